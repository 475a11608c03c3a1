"""SPSA gradient estimation, Adam, and the training loop.

The whole flattened parameter vector (PQC angles plus the classical head)
is trained with one SPSA draw per batch by default; an analytic-head mode
computes exact head gradients and reserves SPSA for the circuit angles.
All randomness is derived from a single seed, split per (epoch, batch,
purpose), so training is bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .devices import DeviceProfile
from .model import HybridModel, expectations_batch, forward_batch, mean_kl, mean_nll, softmax

LOSS_KINDS = ("nll_top1", "kl_topk")
HEAD_MODES = ("spsa", "analytic")

# rng purposes, combined with (seed, epoch, batch) into a stream key
_SHUFFLE, _DELTA, _PLUS, _MINUS, _EVAL, _HEAD = range(6)


def stream(seed: int, *tags: int) -> np.random.Generator:
    """A deterministic generator for (seed, *tags)."""
    return np.random.default_rng([seed, *tags])


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 25
    learning_rate: float = 0.01
    batch_size: int = 32
    loss: str = "nll_top1"
    spsa_c: float = 0.1
    #: independent SPSA estimates averaged per batch; one draw is too noisy
    #: for the 25-epoch budget on the reference task
    spsa_draws: int = 4
    shots: int | None = None  # None = analytic expectations
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    head_mode: str = "spsa"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.spsa_c <= 0:
            raise ValueError("spsa_c must be positive")
        if self.spsa_draws < 1:
            raise ValueError("spsa_draws must be >= 1")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if self.head_mode not in HEAD_MODES:
            raise ValueError(f"head_mode must be one of {HEAD_MODES}, got {self.head_mode!r}")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1 or None")


@dataclass
class EpochStats:
    train_loss: float
    test_accuracy: float
    test_loss: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epochs)

    def to_dict(self) -> dict:
        return {
            "epochs": [
                {
                    "train_loss": e.train_loss,
                    "test_accuracy": e.test_accuracy,
                    "test_loss": e.test_loss,
                }
                for e in self.epochs
            ]
        }

    @property
    def final(self) -> EpochStats:
        return self.epochs[-1]


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------

def spsa_gradient(loss_at, theta: np.ndarray, c: float, rng: np.random.Generator) -> np.ndarray:
    """Simultaneous-perturbation gradient estimate: two loss evaluations
    under a shared Rademacher sign vector."""
    if c <= 0:
        raise ValueError("perturbation magnitude c must be positive")
    delta = rng.integers(0, 2, size=theta.shape[0]) * 2.0 - 1.0
    plus = loss_at(theta + c * delta)
    minus = loss_at(theta - c * delta)
    return (plus - minus) / (2.0 * c) * delta


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * grads
    v = beta2 * state.v + (1 - beta2) * grads**2
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def _batch_loss(cfg: TrainConfig, probs: np.ndarray, targets: np.ndarray) -> float:
    if cfg.loss == "nll_top1":
        return mean_nll(probs, targets)
    return mean_kl(probs, targets)


def _check_targets(cfg: TrainConfig, features: np.ndarray, targets: np.ndarray, k: int) -> np.ndarray:
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("training set is empty")
    if targets.shape[0] != features.shape[0]:
        raise ValueError("features and targets disagree on sample count")
    if cfg.loss == "nll_top1":
        targets = np.asarray(targets)
        if targets.ndim != 1:
            raise ValueError("nll_top1 expects a 1-d array of class labels")
        if targets.max() >= k:
            raise ValueError(f"label {targets.max()} out of range for {k} classes")
        return targets.astype(np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim != 2 or targets.shape[1] != k:
        raise ValueError(f"kl_topk expects (N, {k}) probability targets")
    return targets


def normalize_schedule(schedule, epochs: int) -> list[tuple[DeviceProfile, int]]:
    """Accept a single profile, a bare profile list, or (profile, epochs) pairs.

    Two bare profiles split as most-epochs-first: all but 5 epochs on the
    first device, the remaining 5 on the second.
    """
    if isinstance(schedule, DeviceProfile):
        return [(schedule, epochs)]
    schedule = list(schedule)
    if schedule and all(isinstance(item, DeviceProfile) for item in schedule):
        if len(schedule) == 1:
            return [(schedule[0], epochs)]
        if len(schedule) == 2:
            tail = 5 if epochs > 5 else 0
            if tail == 0:
                return [(schedule[0], epochs)]
            return [(schedule[0], epochs - tail), (schedule[1], tail)]
        raise ValueError("bare profile lists support at most two devices")
    total = sum(e for _, e in schedule)
    if total != epochs:
        raise ValueError(f"schedule covers {total} epochs, config asks for {epochs}")
    return [(p, e) for p, e in schedule]


def _epoch_profile(schedule: list[tuple[DeviceProfile, int]], epoch: int) -> DeviceProfile:
    seen = 0
    for profile, count in schedule:
        seen += count
        if epoch < seen:
            return profile
    return schedule[-1][0]


def _one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], k))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def train(
    model: HybridModel,
    features: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    schedule,
    seed: int,
    eval_features: np.ndarray | None = None,
    eval_labels: np.ndarray | None = None,
) -> tuple[HybridModel, TrainHistory]:
    """Train the flattened parameter vector with SPSA + Adam.

    `targets` are class labels for nll_top1 or probability vectors for
    kl_topk.  `schedule` assigns a device profile to each epoch.  History
    records per-epoch train loss (mean of the two SPSA probe losses),
    test accuracy, and test NLL; test fields are NaN without an eval set.
    """
    features = np.asarray(features, dtype=np.float64)
    targets = _check_targets(cfg, features, targets, model.k)
    sched = normalize_schedule(schedule, cfg.epochs)
    n = features.shape[0]
    params = model.flat_params()
    adam = AdamState.zeros(params.shape[0])
    history = TrainHistory()

    def loss_at(flat, xb, tb, profile, rng):
        probs = forward_batch(model.with_flat_params(flat), xb, profile, cfg.shots, rng)
        return _batch_loss(cfg, probs, tb)

    n_theta = model.template.param_count
    for epoch in range(cfg.epochs):
        profile = _epoch_profile(sched, epoch)
        order = stream(seed, epoch, 0, _SHUFFLE).permutation(n)
        probe_losses = []
        for b_idx, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            xb, tb = features[idx], targets[idx]
            # SPSA over the whole flat vector, or over theta only in analytic-head mode
            active = n_theta if cfg.head_mode == "analytic" else params.shape[0]
            grad = np.zeros_like(params)
            probe_mean = 0.0
            for draw in range(cfg.spsa_draws):
                delta = stream(seed, epoch, b_idx, _DELTA, draw).integers(0, 2, active) * 2.0 - 1.0
                bump = np.zeros_like(params)
                bump[:active] = cfg.spsa_c * delta
                plus = loss_at(params + bump, xb, tb, profile, stream(seed, epoch, b_idx, _PLUS, draw))
                minus = loss_at(params - bump, xb, tb, profile, stream(seed, epoch, b_idx, _MINUS, draw))
                grad[:active] += (plus - minus) / (2.0 * cfg.spsa_c) * delta / cfg.spsa_draws
                probe_mean += 0.5 * (plus + minus) / cfg.spsa_draws
            if cfg.head_mode == "analytic":
                work = model.with_flat_params(params)
                exps = expectations_batch(work, xb, profile, cfg.shots, stream(seed, epoch, b_idx, _HEAD))
                probs = softmax(exps @ work.weights.T + work.bias)
                soft = tb if cfg.loss == "kl_topk" else _one_hot(tb, model.k)
                dlogits = (probs - soft) / xb.shape[0]
                grad[n_theta : n_theta + model.weights.size] = (dlogits.T @ exps).ravel()
                grad[n_theta + model.weights.size :] = dlogits.sum(axis=0)
            params, adam = adam_step(params, grad, adam, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
            probe_losses.append(probe_mean)
        test_acc = float("nan")
        test_loss = float("nan")
        if eval_features is not None and eval_labels is not None:
            current = model.with_flat_params(params)
            probs = forward_batch(
                current, eval_features, profile, cfg.shots, stream(seed, epoch, 0, _EVAL)
            )
            predicted = probs.argmax(axis=1)
            test_acc = float(np.mean(predicted == eval_labels))
            test_loss = mean_nll(probs, np.asarray(eval_labels, dtype=np.int64))
        history.epochs.append(EpochStats(float(np.mean(probe_losses)), test_acc, test_loss))
    return model.with_flat_params(params), history
