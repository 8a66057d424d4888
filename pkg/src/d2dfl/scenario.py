"""Scenario generation: device placement, channel, clusters, trust, and the
non-i.i.d. data split, all driven by named sub-seeds of one root seed.

Also provides the uniform random-graph baseline and the materialization step
that moves actual data points between device datasets according to an
integer exchange.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import fl
from .config import ScenarioConfig
from .exchange import EXPECTED, STOCHASTIC, ExchangeResult, run_exchange
from .network import (
    ChannelParams,
    ClusterPartition,
    EnergyParams,
    drop_matrix,
    generate_rss,
    mean_d2d_distance,
    pairwise_distances,
    partition_clusters,
)


def named_rng(root_seed: int, name: str) -> np.random.Generator:
    """Independent generator for one subsystem, stable across runs and
    platforms (the name is hashed with crc32, not Python's salted hash)."""
    return np.random.default_rng(np.random.SeedSequence([root_seed, zlib.crc32(name.encode())]))


@dataclass
class Scenario:
    """Everything the RL and FL phases consume, fixed for one experiment."""

    config: ScenarioConfig
    positions: np.ndarray  # (N, 2)
    rss: np.ndarray  # (N, N)
    drop: np.ndarray  # (N, N) drop[i, j] for link j -> i
    partition: ClusterPartition
    trust: np.ndarray  # (N, N, L), trust[j, i, l]
    counts: np.ndarray  # (N, L) integer class distributions
    thresholds: np.ndarray  # (N, L)
    datasets: list[fl.LabeledSet]
    test_set: fl.LabeledSet
    class_means: np.ndarray  # (L, d)
    channel: ChannelParams
    energy: EnergyParams

    @property
    def n_devices(self) -> int:
        return self.counts.shape[0]

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    @property
    def mean_distance(self) -> float:
        return mean_d2d_distance(self.positions)

    @property
    def distances(self) -> np.ndarray:
        return pairwise_distances(self.positions)


def _non_iid_counts(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Split each device's sample budget over its drawn class subset.

    Successive chosen classes get skew_ratio times the previous class's
    share (1.0 = even split), so local distributions are skewed within the
    subset as well as across it. Shares are rounded with largest remainders
    so each budget is spent exactly.
    """
    counts = np.zeros((cfg.n_devices, cfg.n_classes), dtype=np.int64)
    shares = cfg.skew_ratio ** np.arange(cfg.classes_per_device)
    shares = shares / shares.sum() * cfg.samples_per_device
    floors = np.floor(shares).astype(np.int64)
    remainder_order = np.argsort(-(shares - floors), kind="stable")
    leftover = cfg.samples_per_device - floors.sum()
    alloc = floors.copy()
    alloc[remainder_order[:leftover]] += 1
    # Every drawn class keeps at least one sample (taken from the largest
    # share) so extreme skew ratios still touch classes_per_device classes.
    short = alloc == 0
    alloc[short] = 1
    alloc[0] -= short.sum()
    if alloc[0] < 1:
        raise ValueError("samples_per_device too small for classes_per_device")
    for i in range(cfg.n_devices):
        counts[i, _draw_classes(cfg, rng)] = alloc
    return counts


def _draw_classes(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw a device's class subset, spreading it across the confusable
    subclass pairs of the feature mixture first (at most one member per
    pair while possible), so devices are skewed exactly where discrimination
    needs foreign samples. Marginal class frequencies stay uniform."""
    n_pairs = (cfg.n_classes + 1) // 2
    pair_order = rng.permutation(n_pairs)
    first_members = []
    siblings = []
    for pair in pair_order:
        members = [c for c in (2 * pair, 2 * pair + 1) if c < cfg.n_classes]
        pick = int(members[rng.integers(0, len(members))])
        first_members.append(pick)
        siblings.extend(c for c in members if c != pick)
    chosen = first_members + list(rng.permutation(siblings))
    return np.array(chosen[: cfg.classes_per_device], dtype=np.int64)


def generate_scenario(cfg: ScenarioConfig, root_seed: int | None = None) -> Scenario:
    """Build a full scenario from a validated config.

    Deterministic per (config, seed): positions are uniform in a square,
    RSS follows the configured path loss, trust entries are i.i.d.
    Bernoulli(trust_density), each device holds samples from exactly
    classes_per_device classes, and a test split (test_fraction of every
    device's data) is pooled globally before any exchange happens.
    """
    seed = cfg.seed if root_seed is None else root_seed
    channel = ChannelParams(rate_r=cfg.rate_r, noise_sigma2=cfg.noise_sigma2)
    energy = EnergyParams(
        per_point_bits=cfg.per_point_bits,
        elec_energy_per_bit=cfg.elec_energy_per_bit,
        amp_energy_per_bit_per_dist2=cfg.amp_energy_per_bit_per_dist2,
        d2s_distance_factor=cfg.d2s_distance_factor,
    )

    pos_rng = named_rng(seed, "positions")
    positions = pos_rng.uniform(0.0, cfg.area_size, size=(cfg.n_devices, 2))
    rss = generate_rss(
        positions,
        pathloss_exponent=cfg.pathloss_exponent,
        ref_power=cfg.ref_power,
        shadowing_sigma=cfg.shadowing_sigma,
        rng=named_rng(seed, "channel"),
    )
    drop = drop_matrix(rss, channel)
    partition = partition_clusters(rss, cfg.alpha_d, channel)

    trust_rng = named_rng(seed, "trust")
    trust = (
        trust_rng.random((cfg.n_devices, cfg.n_devices, cfg.n_classes)) < cfg.trust_density
    ).astype(np.int8)

    data_rng = named_rng(seed, "data")
    drawn = _non_iid_counts(cfg, data_rng)
    means = fl.make_class_means(cfg.n_classes, cfg.feature_dim, data_rng, cfg.feature_spread)

    datasets: list[fl.LabeledSet] = []
    test_x, test_y = [], []
    counts = np.zeros_like(drawn)
    for i in range(cfg.n_devices):
        full = fl.dataset_from_counts(means, drawn[i], data_rng, cfg.feature_noise)
        # Hold out test_fraction per class so the test pool mirrors the
        # global distribution; devices keep the remainder.
        keep_idx, test_idx = [], []
        for cls in range(cfg.n_classes):
            cls_idx = np.flatnonzero(full.y == cls)
            n_test = int(round(len(cls_idx) * cfg.test_fraction))
            test_idx.extend(cls_idx[:n_test])
            keep_idx.extend(cls_idx[n_test:])
        keep_idx = np.array(sorted(keep_idx), dtype=np.int64)
        test_sel = np.array(sorted(test_idx), dtype=np.int64)
        datasets.append(fl.LabeledSet(full.x[keep_idx], full.y[keep_idx], cfg.n_classes))
        if test_sel.size:
            test_x.append(full.x[test_sel])
            test_y.append(full.y[test_sel])
        counts[i] = datasets[i].class_counts()
    test_set = fl.LabeledSet(
        np.concatenate(test_x), np.concatenate(test_y), cfg.n_classes
    )
    thresholds = np.full((cfg.n_devices, cfg.n_classes), cfg.class_threshold, dtype=np.int64)

    return Scenario(
        config=cfg,
        positions=positions,
        rss=rss,
        drop=drop,
        partition=partition,
        trust=trust,
        counts=counts,
        thresholds=thresholds,
        datasets=datasets,
        test_set=test_set,
        class_means=means,
        channel=channel,
        energy=energy,
    )


def uniform_baseline_links(n_devices: int, rng: np.random.Generator) -> dict[int, int]:
    """Random-graph baseline: every receiver picks one transmitter uniformly
    from the other devices (one incoming edge each, never none)."""
    if n_devices < 2:
        raise ValueError("need at least two devices")
    links: dict[int, int] = {}
    for rx in range(n_devices):
        offset = int(rng.integers(1, n_devices))
        links[rx] = (rx + offset) % n_devices
    return links


def materialize_exchange(
    scenario: Scenario,
    links: dict[int, int | None],
    mode: str,
    rng: np.random.Generator,
) -> ExchangeResult:
    """Run the exchange with whole data points and move the actual samples.

    Transmitted points leave the sender's dataset whether or not they
    survive the channel; delivered points join the receiver's. Updates
    scenario.datasets and scenario.counts in place and returns the count
    ledger. In expected mode the delivered counts are rounded.
    """
    if mode not in (EXPECTED, STOCHASTIC):
        raise ValueError(f"unknown delivery mode {mode!r}")
    result = run_exchange(
        links,
        scenario.counts,
        scenario.thresholds,
        scenario.trust,
        scenario.drop,
        mode=mode,
        rng=rng,
        integer_payloads=True,
    )
    # Pass 1: pick the transmitted points from every sender's pre-exchange
    # dataset, so a relay never forwards points it receives this round.
    keep_masks = {i: np.ones(len(d), dtype=bool) for i, d in enumerate(scenario.datasets)}
    gains: dict[int, list[tuple[np.ndarray, np.ndarray]]] = {}
    for plan in result.plans:
        tx_set = scenario.datasets[plan.transmitter]
        keep = keep_masks[plan.transmitter]
        for cls in range(scenario.n_classes):
            n_sent = int(plan.buffered[cls])
            n_got = int(plan.delivered[cls])
            if n_sent == 0:
                continue
            candidates = np.flatnonzero((tx_set.y == cls) & keep)
            picked = rng.choice(candidates, size=n_sent, replace=False)
            keep[picked] = False
            if n_got:
                gains.setdefault(plan.receiver, []).append(
                    (tx_set.x[picked[:n_got]], tx_set.y[picked[:n_got]])
                )
    # Pass 2: rebuild every touched dataset.
    for i, data in enumerate(scenario.datasets):
        gained = gains.get(i, [])
        if not gained and keep_masks[i].all():
            continue
        xs = [data.x[keep_masks[i]]] + [g[0] for g in gained]
        ys = [data.y[keep_masks[i]]] + [g[1] for g in gained]
        scenario.datasets[i] = fl.LabeledSet(
            np.concatenate(xs), np.concatenate(ys), data.n_classes
        )
    scenario.counts = result.updated.astype(np.int64)
    return result
