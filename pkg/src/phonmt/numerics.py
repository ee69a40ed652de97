"""Numerical kernels: softmax, label-smoothed cross-entropy, Adam, the Noam
learning-rate schedule, inverted dropout, and a finite-difference gradient
checker.

Tensors are plain numpy arrays: float32 for training, float64 for gradient
checking.  Parameter collections are flat dicts of name -> array.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NumericsError(ValueError):
    pass


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


@dataclass
class LrSchedule:
    """Noam schedule: linear warmup then inverse-sqrt decay."""

    factor: float = 2.0
    model_dim: int = 512
    warmup_steps: int = 4000

    def __post_init__(self):
        if self.factor <= 0:
            raise NumericsError("factor must be > 0")
        if self.warmup_steps < 1:
            raise NumericsError("warmup_steps must be >= 1")


def noam_lr(step: int, sched: LrSchedule) -> float:
    if step < 1:
        raise NumericsError(f"step must be >= 1, got {step}")
    return (
        sched.factor
        * sched.model_dim ** -0.5
        * min(step ** -0.5, step * sched.warmup_steps ** -1.5)
    )


def label_smoothed_ce(
    logits: np.ndarray, target: int, epsilon: float
) -> tuple[float, np.ndarray]:
    """Cross-entropy against the smoothed target distribution.

    q(target) = 1 - epsilon + epsilon/V, q(other) = epsilon/V;
    gradient w.r.t. logits is softmax(logits) - q.
    """
    v = logits.shape[-1]
    if v < 2:
        raise NumericsError("need at least 2 classes")
    if not 0 <= epsilon < 1:
        raise NumericsError("epsilon must be in [0, 1)")
    if not 0 <= target < v:
        raise NumericsError(f"target {target} out of range for {v} classes")
    q = np.full(v, epsilon / v, dtype=logits.dtype)
    q[target] += 1.0 - epsilon
    shifted = logits - np.max(logits)
    log_z = np.log(np.sum(np.exp(shifted)))
    log_probs = shifted - log_z
    loss = float(-np.dot(q, log_probs))
    grad = np.exp(log_probs) - q
    return loss, grad


def label_smoothed_ce_rows(
    logits: np.ndarray, targets: np.ndarray, epsilon: float
) -> tuple[float, np.ndarray]:
    """Row-wise smoothed CE, summed over rows; gradient has the logits' shape."""
    m, v = logits.shape
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    log_probs = shifted - log_z
    q = np.full_like(logits, epsilon / v)
    q[np.arange(m), targets] += 1.0 - epsilon
    loss = float(-np.sum(q * log_probs))
    grad = np.exp(log_probs) - q
    return loss, grad


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus the step counter."""

    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """One bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise NumericsError(f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        p -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)


def dropout(x: np.ndarray, rate: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Inverted dropout; returns (output, mask) where mask already carries 1/(1-rate)."""
    if not 0 <= rate < 1:
        raise NumericsError("dropout rate must be in [0, 1)")
    if rate == 0:
        ones = np.ones_like(x)
        return x, ones
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * mask, mask


def finite_diff_check(
    loss_fn,
    params: dict[str, np.ndarray],
    probes: int = 100,
    h: float = 1e-4,
    seed: int = 0,
) -> float:
    """Compare analytic gradients to central differences on random coordinates.

    ``loss_fn(params) -> (loss, grads)`` must be deterministic.  Returns the
    max of |a - n| / (|a| + |n| + 1e-12) over probed coordinates.  Parameters
    should be float64.
    """
    loss0, grads = loss_fn(params)
    if not np.isfinite(loss0):
        raise NumericsError("loss is not finite")
    rng = np.random.default_rng(seed)
    names = sorted(params)
    sizes = np.array([params[n].size for n in names], dtype=np.float64)
    worst = 0.0
    for _ in range(probes):
        ni = rng.choice(len(names), p=sizes / sizes.sum())
        name = names[ni]
        flat_idx = int(rng.integers(params[name].size))
        idx = np.unravel_index(flat_idx, params[name].shape)
        orig = params[name][idx]
        params[name][idx] = orig + h
        lp, _ = loss_fn(params)
        params[name][idx] = orig - h
        lm, _ = loss_fn(params)
        params[name][idx] = orig
        numeric = (lp - lm) / (2 * h)
        analytic = grads[name][idx]
        err = abs(analytic - numeric) / (abs(analytic) + abs(numeric) + 1e-12)
        worst = max(worst, err)
    return worst
