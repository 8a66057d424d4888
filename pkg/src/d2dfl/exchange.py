"""Trust-constrained device-to-device message passing.

One exchange round runs, for every predicted link j -> i:

 1. the transmitter offers its trusted per-class surplus (availability),
 2. the receiver requests up to its per-class deficit (requirement),
 3. the transmitter fills requests, splitting each class surplus
    proportionally when total demand exceeds it (transmission buffer),
 4. the channel drops points with the link's drop probability (delivery),
 5. every device updates its class-distribution vector.

Counts are integers up to step 3; the proportional split can produce
fractional buffers, which are kept as reals during reward computation and
rounded to integers only when data points are actually moved.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Fractional transmission buffers are floored onto this binary grid so that
# every addition/subtraction of counts below ~2^30 stays exact in float64;
# lossless exchanges then conserve totals to integer equality.
_GRID = 2.0**20

EXPECTED = "expected"
STOCHASTIC = "stochastic"
DELIVERY_MODES = (EXPECTED, STOCHASTIC)


@dataclass
class LinkPlan:
    """Per-link ledger of the four message-passing stages."""

    receiver: int
    transmitter: int
    available: np.ndarray  # offered per class, after trust gating
    requested: np.ndarray  # receiver demand per class
    buffered: np.ndarray  # actually placed on the wire per class
    delivered: np.ndarray  # survived the channel per class


@dataclass
class ExchangeResult:
    updated: np.ndarray  # (N, L) post-exchange class distributions
    plans: list[LinkPlan] = field(default_factory=list)

    def delivered_total(self) -> float:
        return float(sum(p.delivered.sum() for p in self.plans))

    def plan_for(self, receiver: int) -> LinkPlan | None:
        for p in self.plans:
            if p.receiver == receiver:
                return p
        return None


def available_vector(
    counts_tx: np.ndarray,
    thresholds_tx: np.ndarray,
    trust_tx: np.ndarray,
    receiver: int,
) -> np.ndarray:
    """Per-class count the transmitter offers to one receiver.

    Surplus over the transmitter's own thresholds, clamped at zero, and
    zeroed for classes the receiver is not trusted with.
    """
    counts_tx = np.asarray(counts_tx)
    if not 0 <= receiver < trust_tx.shape[0]:
        raise IndexError(f"receiver index {receiver} out of range")
    surplus = np.maximum(counts_tx - np.asarray(thresholds_tx), 0)
    return np.where(trust_tx[receiver] != 0, surplus, 0)


def requirement_vector(
    available: np.ndarray,
    counts_rx: np.ndarray,
    thresholds_rx: np.ndarray,
) -> np.ndarray:
    """Per-class count the receiver requests from one offer.

    The full offer when the deficit covers it, the deficit when positive but
    smaller than the offer, zero otherwise.
    """
    available = np.asarray(available)
    deficit = np.asarray(thresholds_rx) - np.asarray(counts_rx)
    return np.clip(deficit, 0, available)


def transmission_buffers(
    requests: dict[int, np.ndarray],
    counts_tx: np.ndarray,
    thresholds_tx: np.ndarray,
) -> dict[int, np.ndarray]:
    """Fill each receiver's request from the transmitter's surplus.

    When the total demand for a class fits in the surplus every request is
    served in full; otherwise the surplus is split proportionally to demand.
    Fractional shares are floored onto a fine binary grid (error < 1e-6 per
    entry) so downstream count arithmetic stays exact.
    """
    if not requests:
        return {}
    receivers = list(requests)
    q = np.stack([np.asarray(requests[r], dtype=float) for r in receivers])
    surplus = np.maximum(np.asarray(counts_tx, dtype=float) - np.asarray(thresholds_tx), 0.0)
    total = q.sum(axis=0)
    out = q.copy()
    tight = total > surplus
    if np.any(tight):
        with np.errstate(invalid="ignore", divide="ignore"):
            share = q[:, tight] / total[tight] * surplus[tight]
        out[:, tight] = np.floor(share * _GRID) / _GRID
    return {r: out[i] for i, r in enumerate(receivers)}


def deliver(
    buffered: np.ndarray,
    p_drop: float,
    mode: str = EXPECTED,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Push a transmission buffer through the lossy channel.

    Expected mode scales by the success probability; stochastic mode drops
    each point independently (binomial on the rounded buffer, clamped so a
    fractional buffer is never exceeded).
    """
    if not 0 <= p_drop <= 1:
        raise ValueError(f"p_drop must lie in [0, 1], got {p_drop}")
    buffered = np.asarray(buffered, dtype=float)
    if mode == EXPECTED:
        return (1.0 - p_drop) * buffered
    if mode == STOCHASTIC:
        if rng is None:
            raise ValueError("stochastic delivery requires an rng")
        n = np.round(buffered).astype(np.int64)
        got = rng.binomial(n, 1.0 - p_drop).astype(float)
        return np.minimum(got, buffered)
    raise ValueError(f"unknown delivery mode {mode!r}")


def integerize_buffers(buffers: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Round fractional transmission buffers to integer point counts.

    Per class: floor every receiver's share, then hand out the leftover
    (total share minus the floors) one point at a time by largest fractional
    remainder, lowest receiver index first on ties. Never exceeds the total
    fractional share, hence never the surplus.
    """
    if not buffers:
        return {}
    receivers = list(buffers)
    u = np.stack([np.asarray(buffers[r], dtype=float) for r in receivers])
    floors = np.floor(u + 1e-9).astype(np.int64)
    frac = u - floors
    target = np.round(u.sum(axis=0)).astype(np.int64)
    leftover = target - floors.sum(axis=0)
    for cls in np.flatnonzero(leftover > 0):
        order = np.argsort(-frac[:, cls], kind="stable")
        for idx in order[: leftover[cls]]:
            floors[idx, cls] += 1
    return {r: floors[i] for i, r in enumerate(receivers)}


def run_exchange(
    links: dict[int, int | None],
    counts: np.ndarray,
    thresholds: np.ndarray,
    trust: np.ndarray,
    drop: np.ndarray,
    mode: str = EXPECTED,
    rng: np.random.Generator | None = None,
    integer_payloads: bool = False,
) -> ExchangeResult:
    """Execute one full message-passing round over the predicted links.

    Args:
        links: receiver -> transmitter map; None (or self) entries mean no
            incoming link. At most one incoming link per receiver by
            construction of the dict.
        counts: (N, L) per-device class-distribution vectors.
        thresholds: (N, L) per-device, per-class thresholds.
        trust: (N, N, L) trust[j, i, l] = 1 iff device j may send class l
            to device i.
        drop: (N, N) drop[i, j] = drop probability of link j -> i.
        mode: expected-value or stochastic delivery.
        integer_payloads: round buffers to whole points before delivery,
            as when real data points are moved.

    A transmitter's distribution loses what it put on the wire; a receiver
    gains what survived the channel. Dropped points are lost (there are no
    acknowledgements or retransmissions).
    """
    counts = np.asarray(counts, dtype=float)
    n, n_classes = counts.shape
    if thresholds.shape != counts.shape:
        raise ValueError("thresholds shape must match counts")
    if trust.shape != (n, n, n_classes):
        raise ValueError("trust tensor must be (N, N, L)")
    if mode not in DELIVERY_MODES:
        raise ValueError(f"unknown delivery mode {mode!r}")

    # Group requests per transmitter so surplus splitting sees all demands.
    by_tx: dict[int, dict[int, np.ndarray]] = {}
    offers: dict[tuple[int, int], np.ndarray] = {}
    for rx, tx in links.items():
        if tx is None or tx == rx:
            continue
        offer = available_vector(counts[tx], thresholds[tx], trust[tx], rx)
        req = requirement_vector(offer, counts[rx], thresholds[rx])
        offers[(rx, tx)] = offer
        by_tx.setdefault(tx, {})[rx] = req

    updated = counts.copy()
    plans: list[LinkPlan] = []
    for tx in sorted(by_tx):
        buffers = transmission_buffers(by_tx[tx], counts[tx], thresholds[tx])
        if integer_payloads:
            buffers = integerize_buffers(buffers)
        for rx in sorted(buffers):
            buf = buffers[rx].astype(float)
            got = deliver(buf, float(drop[rx, tx]), mode=mode, rng=rng)
            if integer_payloads:
                got = np.round(got) if mode == EXPECTED else got
                got = np.minimum(got, buf)
            updated[tx] -= buf
            updated[rx] += got
            plans.append(
                LinkPlan(
                    receiver=rx,
                    transmitter=tx,
                    available=offers[(rx, tx)],
                    requested=by_tx[tx][rx],
                    buffered=buf,
                    delivered=got,
                )
            )
    if integer_payloads:
        updated = np.round(updated)
    return ExchangeResult(updated=updated, plans=plans)
