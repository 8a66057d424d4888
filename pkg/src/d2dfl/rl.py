"""Decentralized multi-agent Q-learning over link choices.

Every device keeps an experience buffer of running reward totals and pull
counts per candidate transmitter, turned into a Boltzmann (softmax) policy
over incoming-link choices. A device may also pick itself, which means "no
incoming link". Training repeats: sample links, run an expected-value
exchange on a scratch copy of the class distributions, score local and
global rewards, and credit each device's chosen action.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .exchange import EXPECTED, run_exchange

if TYPE_CHECKING:
    from .scenario import Scenario


@dataclass
class ExperienceBuffer:
    """Running reward totals and pull counts, per state and candidate link.

    Counts start at one so the initial policy is uniform and the average is
    always defined. The state axis is kept for generality; with a static
    channel there is a single state.
    """

    totals: np.ndarray  # (S, N)
    counts: np.ndarray  # (S, N)

    @classmethod
    def fresh(cls, n_actions: int, n_states: int = 1) -> "ExperienceBuffer":
        return cls(
            totals=np.zeros((n_states, n_actions)),
            counts=np.ones((n_states, n_actions), dtype=np.int64),
        )

    def averages(self, state: int = 0) -> np.ndarray:
        return self.totals[state] / self.counts[state]


@dataclass
class RewardWeights:
    """User-set reward trade-off weights.

    alpha1 scales data diversity, alpha2 penalizes unreliable links, alpha3
    scales per-cluster budget slack, gamma couples each device to the global
    reward. diversity_min is the minimum number of satisfied classes before
    the diversity score pays out. budgets holds one request budget per
    cluster (a scalar is broadcast).
    """

    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 0.0
    gamma: float = 0.5
    diversity_min: int = 0
    budgets: np.ndarray | float = 0.0

    def budget_array(self, n_clusters: int) -> np.ndarray:
        b = np.asarray(self.budgets, dtype=float)
        if b.ndim == 0:
            return np.full(n_clusters, float(b))
        if b.shape != (n_clusters,):
            raise ValueError(f"expected {n_clusters} budgets, got shape {b.shape}")
        return b


@dataclass
class EpisodeOutcome:
    """Everything one training episode produced."""

    links: np.ndarray  # (N,) transmitter per receiver, -1 for none
    updated_counts: np.ndarray  # (N, L)
    local_rewards: np.ndarray  # (N,)
    global_rewards: np.ndarray  # (K,)
    overall_rewards: np.ndarray  # (N,)
    cluster_load: np.ndarray  # (K,) inter-cluster requested points
    link_success: float  # mean 1 - drop over chosen links (1.0 if none)


@dataclass
class TrainResult:
    policies: list[ExperienceBuffer]
    episodes: list[EpisodeOutcome] = field(default_factory=list)

    def mean_reward_trace(self) -> np.ndarray:
        return np.array([ep.overall_rewards.mean() for ep in self.episodes])


def link_probabilities(buffer: ExperienceBuffer, state: int = 0) -> np.ndarray:
    """Softmax over average experienced rewards; shift-invariant and safe
    against overflow via max subtraction."""
    avg = buffer.averages(state)
    z = np.exp(avg - avg.max())
    return z / z.sum()


def sample_links(
    policies: list[ExperienceBuffer],
    state: int,
    rng: np.random.Generator,
    allow_no_link: bool = True,
) -> np.ndarray:
    """Sample one incoming-link choice per receiver.

    Returns an (N,) array of transmitter indices with -1 for "no link"
    (a receiver sampling itself). With allow_no_link=False the self action
    is masked out and the row renormalized.
    """
    n = len(policies)
    links = np.empty(n, dtype=np.int64)
    u = rng.random(n)
    for i, buf in enumerate(policies):
        p = link_probabilities(buf, state)
        if not allow_no_link:
            p = p.copy()
            p[i] = 0.0
            p = p / p.sum()
        choice = int(np.searchsorted(np.cumsum(p), u[i]))
        choice = min(choice, n - 1)
        links[i] = -1 if choice == i else choice
    return links


def diversity_score(counts: np.ndarray, thresholds: np.ndarray, min_classes: int) -> int:
    """Number of classes at or above threshold, or 0 below the diversity bar.

    Expected-value exchanges leave fractional counts; a data point either
    arrives or not, so counts are rounded to whole points before the
    threshold comparison (integer inputs are unaffected).
    """
    whole = np.floor(np.asarray(counts, dtype=float) + 0.5)
    met = int(np.sum(whole >= np.asarray(thresholds)))
    return met if met >= min_classes else 0


def local_reward(
    counts: np.ndarray,
    thresholds: np.ndarray,
    p_drop_chosen: float,
    weights: RewardWeights,
) -> float:
    """Diversity payoff minus the unreliability of the chosen link.

    For the no-link action the drop penalty is zero.
    """
    score = diversity_score(counts, thresholds, weights.diversity_min)
    return weights.alpha1 * score - weights.alpha2 * p_drop_chosen


def inter_cluster_load(
    links: np.ndarray,
    requests: dict[int, np.ndarray],
    assignment: np.ndarray,
    n_clusters: int,
) -> np.ndarray:
    """Per-cluster total points requested over links crossing into it."""
    load = np.zeros(n_clusters)
    for rx, req in requests.items():
        tx = links[rx]
        if tx < 0:
            continue
        k = assignment[rx]
        if assignment[tx] != k:
            load[k] += float(np.sum(np.abs(req)))
    return load


def global_reward(
    local_rewards: np.ndarray,
    cluster_load: np.ndarray,
    weights: RewardWeights,
) -> np.ndarray:
    """Mean local reward plus weighted budget slack, one value per cluster."""
    budgets = weights.budget_array(len(cluster_load))
    return local_rewards.mean() + weights.alpha3 * (budgets - cluster_load)


def update_policy(
    buffer: ExperienceBuffer, state: int, chosen: int, reward: float
) -> None:
    """Credit the chosen action: add the reward to its total, bump its count."""
    buffer.totals[state, chosen] += reward
    buffer.counts[state, chosen] += 1


def run_episode(
    scenario: "Scenario",
    links: np.ndarray,
    weights: RewardWeights,
) -> EpisodeOutcome:
    """Score one link assignment with an expected-value exchange on a scratch
    copy of the class distributions."""
    assignment = scenario.partition.assignment
    n_clusters = scenario.partition.k
    link_map = {rx: int(tx) for rx, tx in enumerate(links) if tx >= 0}
    result = run_exchange(
        link_map,
        scenario.counts,
        scenario.thresholds,
        scenario.trust,
        scenario.drop,
        mode=EXPECTED,
    )
    requests = {p.receiver: p.requested for p in result.plans}

    n = len(links)
    locals_ = np.empty(n)
    for i in range(n):
        p_drop = float(scenario.drop[i, links[i]]) if links[i] >= 0 else 0.0
        locals_[i] = local_reward(
            result.updated[i], scenario.thresholds[i], p_drop, weights
        )
    load = inter_cluster_load(links, requests, assignment, n_clusters)
    globals_ = global_reward(locals_, load, weights)
    overall = locals_ + weights.gamma * globals_[assignment]

    chosen = links[links >= 0]
    if chosen.size:
        success = float(np.mean(1.0 - scenario.drop[links >= 0, chosen]))
    else:
        success = 1.0
    return EpisodeOutcome(
        links=links,
        updated_counts=result.updated,
        local_rewards=locals_,
        global_rewards=globals_,
        overall_rewards=overall,
        cluster_load=load,
        link_success=success,
    )


def train(
    scenario: "Scenario",
    episodes: int,
    weights: RewardWeights,
    rng: np.random.Generator,
    allow_no_link: bool = True,
    state: int = 0,
) -> TrainResult:
    """Run the full policy-training loop.

    Each episode samples links from the current policies, scores them, and
    updates every device's buffer at its chosen action (the self index for
    the no-link action). Distributions reset every episode: training probes
    counterfactual exchanges, real data moves only after graph extraction.
    """
    if episodes <= 0:
        raise ValueError(f"episodes must be positive, got {episodes}")
    n = scenario.counts.shape[0]
    policies = [ExperienceBuffer.fresh(n) for _ in range(n)]
    outcomes: list[EpisodeOutcome] = []
    for _ in range(episodes):
        links = sample_links(policies, state, rng, allow_no_link=allow_no_link)
        outcome = run_episode(scenario, links, weights)
        for i in range(n):
            chosen = links[i] if links[i] >= 0 else i
            update_policy(policies[i], state, int(chosen), float(outcome.overall_rewards[i]))
        outcomes.append(outcome)
    return TrainResult(policies=policies, episodes=outcomes)


def extract_graph(
    policies: list[ExperienceBuffer],
    state: int = 0,
    allow_no_link: bool = True,
) -> dict[int, int | None]:
    """Greedy readout: per receiver the argmax-average transmitter, ties to
    the lowest index; the self action reads as no link."""
    graph: dict[int, int | None] = {}
    for i, buf in enumerate(policies):
        avg = buf.averages(state)
        if not allow_no_link:
            avg = avg.copy()
            avg[i] = -np.inf
        best = int(np.argmax(avg))
        graph[i] = None if best == i else best
    return graph
