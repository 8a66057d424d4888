"""Wireless substrate: RSS matrices, link drop probabilities, reliability
clusters and a first-order radio energy model.

All functions here are pure; the channel is static for the lifetime of a
scenario (no fading over time, no mobility).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Bits used when a device broadcasts a single scalar (e.g. a reward value)
# or one model parameter: single-precision float on the wire.
SCALAR_BITS = 32


@dataclass(frozen=True)
class ChannelParams:
    """Shared channel model parameters.

    rate_r is the constant transmission rate, noise_sigma2 the common noise
    power across channels.
    """

    rate_r: float = 1.0
    noise_sigma2: float = 1e-4

    def __post_init__(self):
        if self.noise_sigma2 <= 0:
            raise ValueError(f"noise_sigma2 must be > 0, got {self.noise_sigma2}")
        if self.rate_r < 0:
            raise ValueError(f"rate_r must be >= 0, got {self.rate_r}")


@dataclass(frozen=True)
class EnergyParams:
    """First-order radio energy model parameters.

    Transmitting b bits over distance d costs b * (elec + amp * d^2) joules.
    The device-to-server distance is d2s_distance_factor times the mean
    pairwise device distance.
    """

    per_point_bits: int = 512
    elec_energy_per_bit: float = 50e-9
    amp_energy_per_bit_per_dist2: float = 100e-12
    d2s_distance_factor: float = 3.0

    def __post_init__(self):
        if self.per_point_bits <= 0:
            raise ValueError(f"per_point_bits must be positive, got {self.per_point_bits}")
        if self.elec_energy_per_bit < 0 or self.amp_energy_per_bit_per_dist2 < 0:
            raise ValueError("energy coefficients must be nonnegative")
        if self.d2s_distance_factor <= 0:
            raise ValueError(f"d2s_distance_factor must be > 0, got {self.d2s_distance_factor}")


@dataclass(frozen=True)
class ClusterPartition:
    """Disjoint, total assignment of devices to reliability clusters."""

    assignment: np.ndarray  # shape (N,), cluster index per device
    k: int

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster)


def drop_probability(w, params: ChannelParams):
    """Probability that a transmission with received signal strength w fails.

    Returns 1 - exp(-(2^r - 1) * sigma^2 / w). Accepts scalars or arrays.
    w == 0 with positive rate is the limit case and yields 1.0.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("received signal strength must be nonnegative")
    coeff = (2.0 ** params.rate_r - 1.0) * params.noise_sigma2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.expm1(-coeff / w)
    out = np.where(w == 0, 0.0 if coeff == 0 else 1.0, out)
    return float(out) if out.ndim == 0 else out


def drop_matrix(rss: np.ndarray, params: ChannelParams) -> np.ndarray:
    """Per-link drop probabilities for a full RSS matrix (diagonal forced to 0)."""
    rss = validate_rss(rss)
    w = rss.copy()
    np.fill_diagonal(w, np.inf)  # self links never drop; diagonal of W is unused
    return drop_probability(w, params)


def validate_rss(rss: np.ndarray) -> np.ndarray:
    rss = np.asarray(rss, dtype=float)
    if rss.ndim != 2 or rss.shape[0] != rss.shape[1]:
        raise ValueError(f"RSS matrix must be square, got shape {rss.shape}")
    off_diag = rss[~np.eye(rss.shape[0], dtype=bool)]
    if np.any(off_diag < 0):
        raise ValueError("RSS entries must be nonnegative")
    return rss


def generate_rss(
    positions: np.ndarray,
    pathloss_exponent: float = 2.5,
    ref_power: float = 1.0,
    shadowing_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Build an RSS matrix from device positions via a power-law path loss.

    W[i, j] = ref_power / dist(i, j)^pathloss_exponent, optionally jittered
    per direction by log-normal shadowing (sigma in log-space). Symmetric when
    shadowing is disabled; deterministic for a fixed generator.
    """
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    if n < 2:
        raise ValueError("need at least two devices")
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] == 0):
        raise ValueError("coincident device positions")
    with np.errstate(divide="ignore"):
        rss = ref_power / dist**pathloss_exponent
    np.fill_diagonal(rss, 0.0)
    if shadowing_sigma > 0:
        if rng is None:
            raise ValueError("shadowing requires an rng")
        jitter = np.exp(rng.normal(0.0, shadowing_sigma, size=(n, n)))
        rss = rss * jitter
        np.fill_diagonal(rss, 0.0)
    return rss


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def mean_d2d_distance(positions: np.ndarray) -> float:
    """Mean distance over unordered device pairs."""
    dist = pairwise_distances(positions)
    n = dist.shape[0]
    iu = np.triu_indices(n, k=1)
    return float(dist[iu].mean())


def partition_clusters(rss: np.ndarray, alpha_d: float, params: ChannelParams) -> ClusterPartition:
    """Partition devices into clusters whose internal links all satisfy the
    reliability bound in both directions.

    Greedy clique growth over the reliable graph: seed each cluster with the
    lowest-index unassigned device, then add unassigned devices in ascending
    index order that are adjacent to every current member. An edge requires
    drop probability <= alpha_d in both directions because the RSS matrix
    may be asymmetric. Singletons are always feasible.
    """
    if not 0 < alpha_d < 1:
        raise ValueError(f"alpha_d must lie in (0, 1), got {alpha_d}")
    pd = drop_matrix(rss, params)
    n = pd.shape[0]
    reliable = (pd <= alpha_d) & (pd.T <= alpha_d)
    np.fill_diagonal(reliable, True)

    assignment = np.full(n, -1, dtype=int)
    k = 0
    for seed in range(n):
        if assignment[seed] >= 0:
            continue
        members = [seed]
        assignment[seed] = k
        for cand in range(seed + 1, n):
            if assignment[cand] >= 0:
                continue
            if all(reliable[cand, m] for m in members):
                members.append(cand)
                assignment[cand] = k
        k += 1
    return ClusterPartition(assignment=assignment, k=k)


def transmit_energy(n_bits: float, distance: float, params: EnergyParams) -> float:
    """Energy in joules to move n_bits over one hop at the given distance."""
    if n_bits < 0 or distance < 0:
        raise ValueError("bits and distance must be nonnegative")
    return n_bits * (
        params.elec_energy_per_bit + params.amp_energy_per_bit_per_dist2 * distance**2
    )


def energy_cost(n_points: int, distance: float, params: EnergyParams) -> float:
    """Energy in joules to transmit n_points data points over one hop."""
    if n_points < 0:
        raise ValueError("n_points must be nonnegative")
    return transmit_energy(n_points * params.per_point_bits, distance, params)
