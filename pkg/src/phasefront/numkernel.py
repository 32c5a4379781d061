"""Dense linear-algebra and training primitives shared by the predictor and agents.

Everything runs in 64-bit floats on plain numpy arrays. Kernels are pure;
AdamState is mutated only by its owning trainer.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError, NumericError, ShapeError

LEAKY_SLOPE = 0.1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator; distinct streams never collide."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def as_matrix(data) -> np.ndarray:
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def check_finite(x: np.ndarray, what: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {what}")
    return x


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    return check_finite(out, "matmul output")


def leaky_relu(x, alpha: float = LEAKY_SLOPE) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, x, alpha * x)


def leaky_relu_grad(x, alpha: float = LEAKY_SLOPE) -> np.ndarray:
    """Derivative wrt the preactivation; the kink at 0 takes the alpha branch."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, 1.0, alpha)


def msle(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise ShapeError(f"msle length mismatch: {pred.shape} vs {truth.shape}")
    if np.any(pred <= -1.0) or np.any(truth <= -1.0):
        raise DomainError("msle requires all entries > -1")
    d = np.log1p(pred) - np.log1p(truth)
    return float(np.mean(d * d))


def msle_grad(pred, truth) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if np.any(pred <= -1.0) or np.any(truth <= -1.0):
        raise DomainError("msle requires all entries > -1")
    return 2.0 * (np.log1p(pred) - np.log1p(truth)) / (1.0 + pred) / pred.size


def mae(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise ShapeError(f"mae length mismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean(np.abs(pred - truth)))


def mae_grad(pred, truth) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    return np.sign(pred - truth) / pred.size


class AdamState:
    """Adam moments plus an exponentially decayed learning-rate schedule.

    Effective rate for a step taken at epoch e is base_lr * decay**e.
    """

    def __init__(self, params: dict[str, np.ndarray], base_lr: float = 0.01,
                 decay: float = 0.98, beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-8):
        if not 0.0 < decay <= 1.0:
            raise DomainError(f"decay must be in (0, 1], got {decay}")
        self.step_count = 0
        self.base_lr = float(base_lr)
        self.decay = float(decay)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}


def adam_step(state: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray], epoch: int = 0) -> dict[str, np.ndarray]:
    """One bias-corrected Adam update, in place. Returns the params mapping."""
    for k, p in params.items():
        if grads[k].shape != p.shape:
            raise ShapeError(f"gradient shape {grads[k].shape} != param shape {p.shape} for {k}")
    state.step_count += 1
    t = state.step_count
    lr = state.base_lr * state.decay ** epoch
    b1, b2 = state.beta1, state.beta2
    for k, p in params.items():
        g = grads[k]
        check_finite(g, f"gradient {k}")
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        mhat = m / (1.0 - b1 ** t)
        vhat = v / (1.0 - b2 ** t)
        p -= lr * mhat / (np.sqrt(vhat) + state.epsilon)
        check_finite(p, f"param {k}")
    return params


def finite_diff_check(f, params: dict[str, np.ndarray], analytic: dict[str, np.ndarray],
                      h: float = 1e-5, sample: int | None = None,
                      rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic grads and central differences of f.

    f takes the params mapping and returns a scalar. With `sample` set, only
    that many randomly chosen coordinates per parameter are probed.
    """
    if h <= 0:
        raise DomainError("h must be positive")
    worst = 0.0
    for k, p in params.items():
        flat = p.ravel()
        ana = analytic[k].ravel()
        idx = np.arange(flat.size)
        if sample is not None and flat.size > sample:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, size=sample, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f(params))
            flat[i] = orig - h
            fm = float(f(params))
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError("non-finite loss during finite differencing")
            num = (fp - fm) / (2.0 * h)
            denom = max(abs(ana[i]), abs(num), 1e-8)
            worst = max(worst, abs(ana[i] - num) / denom)
    return worst


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))
