"""Minimal differentiable numerical core.

Everything downstream (losses, encoder, trainer) is built on plain float64
numpy arrays, ordered name->array parameter dicts, an Adam optimizer with
per-epoch exponential learning-rate decay, a central-difference gradient
checker, and a numerically stable scaled log-mean-exp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

# Named parameter collection. Insertion order is the canonical ordering.
ParamDict = Dict[str, np.ndarray]


def as_array(values, name: str = "array") -> np.ndarray:
    """Convert to a float64 ndarray, rejecting NaN/Inf entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def clone_params(params: ParamDict) -> ParamDict:
    return {name: arr.copy() for name, arr in params.items()}


@dataclass
class AdamState:
    """Adam accumulators plus the counters that drive the schedule.

    The effective learning rate is ``base_lr * decay**epoch``. The epoch
    index is advanced by the caller (once per training epoch); ``adam_step``
    only increments the step counter ``t``.
    """

    m: ParamDict
    v: ParamDict
    t: int
    base_lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    decay: float = 1.0
    epsilon: float = 1e-8
    epoch: int = 0

    def effective_lr(self) -> float:
        return self.base_lr * self.decay**self.epoch


def init_adam_state(
    params: ParamDict,
    base_lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    decay: float = 1.0,
    epsilon: float = 1e-8,
) -> AdamState:
    """Fresh zero-moment state shaped after ``params``."""
    if base_lr <= 0:
        raise ValueError("base_lr must be positive")
    for val, lo, hi, nm in ((beta1, 0, 1, "beta1"), (beta2, 0, 1, "beta2")):
        if not lo < val < hi:
            raise ValueError(f"{nm} must lie in (0, 1)")
    if not 0 < decay <= 1:
        raise ValueError("decay must lie in (0, 1]")
    zeros = lambda: {k: np.zeros_like(v) for k, v in params.items()}
    return AdamState(m=zeros(), v=zeros(), t=0, base_lr=base_lr, beta1=beta1,
                     beta2=beta2, decay=decay, epsilon=epsilon)


def adam_step(params: ParamDict, grads: ParamDict, state: AdamState) -> Tuple[ParamDict, AdamState]:
    """One bias-corrected Adam update; returns new params and state.

    Inputs are not mutated. Gradients must be finite and shape-match the
    parameters; violations raise with the offending parameter name.
    """
    if set(grads) != set(params) or set(state.m) != set(params):
        raise ValueError("parameter/gradient/state name sets differ")
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for '{name}': {g.shape} vs {p.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for '{name}'")

    t = state.t + 1
    lr = state.effective_lr()
    new_params: ParamDict = {}
    new_m: ParamDict = {}
    new_v: ParamDict = {}
    for name, p in params.items():
        g = grads[name]
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        new_m[name] = m
        new_v[name] = v
    new_state = AdamState(m=new_m, v=new_v, t=t, base_lr=state.base_lr,
                          beta1=state.beta1, beta2=state.beta2, decay=state.decay,
                          epsilon=state.epsilon, epoch=state.epoch)
    return new_params, new_state


LossFn = Callable[[ParamDict], Tuple[float, ParamDict]]


def grad_check(loss_fn: LossFn, params: ParamDict, eps: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` maps a parameter dict to ``(value, gradients)``. Every scalar
    entry is perturbed by +/-eps; the per-entry error is
    ``|analytic - numeric| / max(1, |analytic|, |numeric|)`` and the maximum
    over all entries is returned.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    _, analytic = loss_fn(params)
    worst = 0.0
    work = clone_params(params)
    for name, arr in work.items():
        flat = arr.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus, _ = loss_fn(work)
            flat[idx] = orig - eps
            f_minus, _ = loss_fn(work)
            flat[idx] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise ValueError(f"non-finite loss while perturbing '{name}'[{idx}]")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            err = abs(a_flat[idx] - numeric) / max(1.0, abs(a_flat[idx]), abs(numeric))
            worst = max(worst, err)
    return worst


def lse_mean(values, tau: float) -> float:
    """Scaled log-mean-exp: ``tau * log(mean(exp(values / tau)))``.

    Always evaluated in max-shifted form so the exponentials never overflow;
    the result lies between mean(values) and max(values) and interpolates
    between them as tau moves from +inf to 0.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("lse_mean of an empty sequence")
    top = float(v.max())
    return top + tau * float(np.log(np.mean(np.exp((v - top) / tau))))
