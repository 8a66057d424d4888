"""Desk-scale federated learning on synthetic data.

Models are deliberately tiny and hand-rolled with numpy (a linear softmax
classifier or a one-hidden-layer tanh perceptron) so parameter vectors stay
flat and small and every gradient is finite-difference checkable. Supported
schemes: fedavg and fedprox (local minibatch steps, periodic parameter
averaging) and fedsgd (one full-batch gradient per round, applied globally).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

SCHEMES = ("fedavg", "fedprox", "fedsgd")


@dataclass
class LabeledSet:
    """A bag of feature vectors with integer class labels."""

    x: np.ndarray  # (n, d)
    y: np.ndarray  # (n,)
    n_classes: int

    def __len__(self) -> int:
        return self.x.shape[0]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)


@dataclass
class ModelSpec:
    kind: str  # "linear" or "mlp"
    in_dim: int
    n_classes: int
    hidden: int = 16

    @property
    def n_params(self) -> int:
        if self.kind == "linear":
            return (self.in_dim + 1) * self.n_classes
        if self.kind == "mlp":
            return (self.in_dim + 1) * self.hidden + (self.hidden + 1) * self.n_classes
        raise ValueError(f"unknown model kind {self.kind!r}")


@dataclass
class FlConfig:
    scheme: str = "fedavg"
    tau_a: int = 10  # local steps between aggregations
    total_steps: int = 200
    learning_rate: float = 0.1
    prox_mu: float = 0.0
    batch_size: int = 32
    weighting: str = "data"  # "data" (size-proportional) or "uniform"
    stragglers: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 1 <= self.tau_a <= self.total_steps:
            raise ValueError("need 1 <= tau_a <= total_steps")

    @property
    def n_rounds(self) -> int:
        return self.total_steps // self.tau_a


def init_params(spec: ModelSpec, rng: np.random.Generator, scale: float = 0.01) -> np.ndarray:
    return rng.normal(0.0, scale, size=spec.n_params)


def _unpack(spec: ModelSpec, params: np.ndarray):
    if spec.kind == "linear":
        w_end = spec.in_dim * spec.n_classes
        w = params[:w_end].reshape(spec.in_dim, spec.n_classes)
        b = params[w_end:]
        return w, b
    if spec.kind == "mlp":
        d, h, c = spec.in_dim, spec.hidden, spec.n_classes
        idx = 0
        w1 = params[idx : idx + d * h].reshape(d, h)
        idx += d * h
        b1 = params[idx : idx + h]
        idx += h
        w2 = params[idx : idx + h * c].reshape(h, c)
        idx += h * c
        b2 = params[idx:]
        return w1, b1, w2, b2
    raise ValueError(f"unknown model kind {spec.kind!r}")


def logits(spec: ModelSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    if spec.kind == "linear":
        w, b = _unpack(spec, params)
        return x @ w + b
    w1, b1, w2, b2 = _unpack(spec, params)
    return np.tanh(x @ w1 + b1) @ w2 + b2


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(
    spec: ModelSpec,
    params: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    prox_mu: float = 0.0,
    anchor: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy (plus an optional proximal pull toward anchor)
    and its gradient with respect to the flat parameter vector."""
    n = x.shape[0]
    if spec.kind == "linear":
        w, b = _unpack(spec, params)
        probs = _softmax(x @ w + b)
        ce = -np.log(probs[np.arange(n), y] + 1e-300).mean()
        delta = probs
        delta[np.arange(n), y] -= 1.0
        delta /= n
        grad = np.concatenate([(x.T @ delta).ravel(), delta.sum(axis=0)])
    else:
        w1, b1, w2, b2 = _unpack(spec, params)
        hid = np.tanh(x @ w1 + b1)
        probs = _softmax(hid @ w2 + b2)
        ce = -np.log(probs[np.arange(n), y] + 1e-300).mean()
        delta = probs
        delta[np.arange(n), y] -= 1.0
        delta /= n
        dhid = (delta @ w2.T) * (1.0 - hid**2)
        grad = np.concatenate(
            [
                (x.T @ dhid).ravel(),
                dhid.sum(axis=0),
                (hid.T @ delta).ravel(),
                delta.sum(axis=0),
            ]
        )
    loss = ce
    if prox_mu > 0.0:
        if anchor is None:
            raise ValueError("proximal term needs an anchor parameter vector")
        diff = params - anchor
        loss = loss + 0.5 * prox_mu * float(diff @ diff)
        grad = grad + prox_mu * diff
    return float(loss), grad


def local_train(
    spec: ModelSpec,
    params: np.ndarray,
    data: LabeledSet,
    steps: int,
    lr: float,
    rng: np.random.Generator,
    batch_size: int = 32,
    scheme: str = "fedavg",
    global_params: np.ndarray | None = None,
    prox_mu: float = 0.0,
) -> np.ndarray:
    """Run one round of local work and return the new local parameters.

    fedavg/fedprox take `steps` minibatch gradient steps (fedprox adds the
    proximal pull toward the incoming global model); fedsgd returns the
    unmodified parameters, see full_batch_grad. Empty datasets train nothing.
    """
    if len(data) == 0:
        return params.copy()
    if scheme == "fedsgd":
        return params.copy()
    out = params.copy()
    mu = prox_mu if scheme == "fedprox" else 0.0
    anchor = global_params if scheme == "fedprox" else None
    n = len(data)
    for _ in range(steps):
        idx = rng.integers(0, n, size=min(batch_size, n))
        _, grad = loss_and_grad(spec, out, data.x[idx], data.y[idx], mu, anchor)
        out -= lr * grad
    return out


def full_batch_grad(spec: ModelSpec, params: np.ndarray, data: LabeledSet) -> np.ndarray:
    """One full-batch gradient, accumulated but not applied (fedsgd)."""
    _, grad = loss_and_grad(spec, params, data.x, data.y)
    return grad


def aggregate(
    contributions: list[np.ndarray],
    weights: list[float],
    scheme: str,
    global_params: np.ndarray,
    lr: float = 0.1,
) -> np.ndarray:
    """Combine participant payloads into the next global model.

    fedavg/fedprox average parameters; fedsgd applies one global step with
    the weighted-average gradient. Zero participants leave the model as is.
    """
    if not contributions:
        warnings.warn("aggregation round had no participants; global model unchanged")
        return global_params.copy()
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("aggregation weights must be nonnegative with positive sum")
    w = w / w.sum()
    stacked = np.stack(contributions)
    combined = w @ stacked
    if scheme == "fedsgd":
        return global_params - lr * combined
    return combined


def evaluate(spec: ModelSpec, params: np.ndarray, test: LabeledSet) -> float:
    """Fraction of argmax-correct predictions."""
    if len(test) == 0:
        raise ValueError("empty test set")
    pred = logits(spec, params, test.x).argmax(axis=1)
    return float(np.mean(pred == test.y))


@dataclass
class FlTrace:
    accuracy: list[float]  # test accuracy after each aggregation
    participants: list[int]  # participant count per round


def run_fl(
    spec: ModelSpec,
    datasets: list[LabeledSet],
    test: LabeledSet,
    config: FlConfig,
    rng: np.random.Generator,
) -> FlTrace:
    """Alternate local training and aggregation for the configured total
    steps, evaluating the global model after each aggregation.

    Stragglers train locally but contribute nothing to aggregations; they
    still receive every broadcast global model.
    """
    n = len(datasets)
    params_g = init_params(spec, rng)
    device_rngs = [np.random.default_rng(rng.integers(0, 2**63)) for _ in range(n)]
    accuracy: list[float] = []
    participants: list[int] = []
    for _ in range(config.n_rounds):
        payloads: list[np.ndarray] = []
        weights: list[float] = []
        n_part = 0
        for i, data in enumerate(datasets):
            if len(data) == 0:
                continue
            if config.scheme == "fedsgd":
                payload = full_batch_grad(spec, params_g, data)
            else:
                payload = local_train(
                    spec,
                    params_g,
                    data,
                    steps=config.tau_a,
                    lr=config.learning_rate,
                    rng=device_rngs[i],
                    batch_size=config.batch_size,
                    scheme=config.scheme,
                    global_params=params_g,
                    prox_mu=config.prox_mu,
                )
            if i in config.stragglers:
                continue
            n_part += 1
            payloads.append(payload)
            weights.append(float(len(data)) if config.weighting == "data" else 1.0)
        params_g = aggregate(
            payloads, weights, config.scheme, params_g, lr=config.learning_rate
        )
        accuracy.append(evaluate(spec, params_g, test))
        participants.append(n_part)
    return FlTrace(accuracy=accuracy, participants=participants)


def make_class_means(n_classes: int, dim: int, rng: np.random.Generator, spread: float = 3.0) -> np.ndarray:
    """Gaussian-mixture component means for the synthetic classification task.

    Classes come in close pairs around shared centers (fine-grained
    confusable subclasses), so telling a pair apart needs samples of both;
    class coverage gaps then cost real accuracy instead of being absorbed
    by a linear boundary.
    """
    centers = rng.normal(0.0, spread, size=((n_classes + 1) // 2, dim))
    means = np.repeat(centers, 2, axis=0)[:n_classes]
    means = means + rng.normal(0.0, 0.35 * spread, size=(n_classes, dim))
    return means


def sample_class_points(
    means: np.ndarray, label: int, n: int, rng: np.random.Generator, noise: float = 1.0
) -> np.ndarray:
    return means[label] + rng.normal(0.0, noise, size=(n, means.shape[1]))


def dataset_from_counts(
    means: np.ndarray,
    counts: np.ndarray,
    rng: np.random.Generator,
    noise: float = 1.0,
) -> LabeledSet:
    """Draw a labeled set with exactly the given per-class counts."""
    xs, ys = [], []
    for label, c in enumerate(counts):
        c = int(c)
        if c == 0:
            continue
        xs.append(sample_class_points(means, label, c, rng, noise))
        ys.append(np.full(c, label, dtype=np.int64))
    if not xs:
        dim = means.shape[1]
        return LabeledSet(np.empty((0, dim)), np.empty(0, dtype=np.int64), means.shape[0])
    return LabeledSet(np.concatenate(xs), np.concatenate(ys), means.shape[0])
