"""Annealed Langevin sampling in the wavelet domain.

The outer loop sweeps a decreasing geometric noise schedule; the inner
loop runs Langevin updates

    X <- X + (alpha/2) * S(X, sigma_i) - w1 * DC(X) + sqrt(alpha) * z

with step size alpha_i = eps * sigma_i^2 / sigma_L^2.  The data-consistency
term pulls the gray projection of the stack toward the observed grayscale's
wavelet bands; after each level the structure-consistency correction aligns
the means of the nine high-frequency channels with the grayscale's bands.

All randomness flows from a seeded numpy Generator (PCG64; normal variates
via numpy's ziggurat implementation), so runs are reproducible.  Chains for
different samples use seeds derived as seed + sample index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .imaging import GrayOp, MEAN, clamp
from .wavelet import WaveletBands, gray_project, gray_wavelet, unstack

__all__ = [
    "make_schedule",
    "step_size",
    "SamplerConfig",
    "DcContext",
    "dc_residual",
    "sc_apply",
    "langevin_step",
    "anneal_sample",
    "colorize",
]

# High-frequency channel indices of the 12-channel stack (cH, cV, cD per color).
HF_CHANNELS = tuple(4 * c + b for c in range(3) for b in (1, 2, 3))


def make_schedule(sigma_begin: float, sigma_end: float, levels: int) -> np.ndarray:
    """Strictly decreasing geometric sequence from sigma_begin to sigma_end."""
    if levels < 2:
        raise ValidationError("schedule needs at least 2 levels")
    if not (sigma_begin > sigma_end > 0):
        raise ValidationError(
            f"need sigma_begin > sigma_end > 0, got {sigma_begin}, {sigma_end}"
        )
    sched = np.geomspace(sigma_begin, sigma_end, levels)
    sched[0] = sigma_begin
    sched[-1] = sigma_end
    return sched


def step_size(eps: float, sigma_i: float, sigma_last: float) -> float:
    """alpha_i = eps * sigma_i^2 / sigma_L^2."""
    if eps <= 0 or sigma_i <= 0 or sigma_last <= 0:
        raise ValidationError("step_size arguments must be positive")
    return eps * (sigma_i * sigma_i) / (sigma_last * sigma_last)


@dataclass
class SamplerConfig:
    """Everything that determines a sampling run (defaults: the reference
    hyperparameter set L=10, T=100, eps=1.56e-5, w2=1)."""

    sigma_begin: float = 1.0
    sigma_end: float = 0.01
    levels: int = 10
    steps_per_level: int = 100
    epsilon: float = 1.56e-5
    w1: float | None = None  # None -> alpha_i / sigma_i^2 rule
    w2: float = 1.0
    seed: int = 0
    gray_op: GrayOp = MEAN
    dc_broadcast: str = "adjoint"  # or "replicate"

    def __post_init__(self):
        if self.levels < 1 or self.steps_per_level < 1:
            raise ValidationError("levels and steps_per_level must be >= 1")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        if self.w2 < 0:
            raise ValidationError("w2 must be >= 0")
        if self.dc_broadcast not in ("adjoint", "replicate"):
            raise ValidationError(f"unknown dc_broadcast {self.dc_broadcast!r}")

    def schedule(self) -> np.ndarray:
        return make_schedule(self.sigma_begin, self.sigma_end, self.levels)

    def w1_at(self, alpha: float, sigma: float) -> float:
        if self.w1 is not None:
            return self.w1
        return alpha / (sigma * sigma)


@dataclass
class DcContext:
    """Observed grayscale's wavelet bands plus the forward model."""

    wy: np.ndarray  # (4, H/2, W/2)
    op: GrayOp = MEAN
    broadcast: str = "adjoint"

    def __post_init__(self):
        if isinstance(self.wy, WaveletBands):
            self.wy = self.wy.as_array()
        self.wy = np.asarray(self.wy, dtype=np.float64)
        if self.wy.ndim != 3 or self.wy.shape[0] != 4:
            raise ValidationError(f"expected (4, h, w) gray bands, got {self.wy.shape}")
        if self.broadcast not in ("adjoint", "replicate"):
            raise ValidationError(f"unknown broadcast {self.broadcast!r}")

    @classmethod
    def from_gray(cls, y, op: GrayOp = MEAN, broadcast: str = "adjoint") -> "DcContext":
        return cls(gray_wavelet(y).as_array(), op=op, broadcast=broadcast)


def dc_residual(X, ctx: DcContext) -> np.ndarray:
    """Gradient of 0.5 * ||F(X) - W(y)||^2 broadcast over the 12 channels.

    The bandwise residual r_b = sum_c weight_c X_{c,b} - Wy_b lands in
    channel (c, b) scaled by weight_c (adjoint mode) or unscaled
    (replicate mode).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[0] != 12:
        raise ValidationError(f"expected a 12-channel stack, got shape {X.shape}")
    if X.shape[1:] != ctx.wy.shape[1:]:
        raise ValidationError(
            f"stack spatial dims {X.shape[1:]} do not match gray bands {ctx.wy.shape[1:]}"
        )
    r = gray_project(X, ctx.op) - ctx.wy  # (4, h, w)
    out = np.empty_like(X)
    for c, weight in enumerate(ctx.op.weights):
        scale = weight if ctx.broadcast == "adjoint" else 1.0
        out[4 * c : 4 * c + 4] = scale * r
    return out


def sc_apply(X, wy, w2: float = 1.0) -> np.ndarray:
    """Shift each high-frequency channel so its mean tracks the gray band's.

    Channel (c, b) with b in {cH, cV, cD} is shifted by
    -w2 * (mean(X_{c,b}) - mean(Wy_b)); cA channels are untouched.
    """
    X = np.asarray(X, dtype=np.float64).copy()
    wy = wy.as_array() if isinstance(wy, WaveletBands) else np.asarray(wy, dtype=np.float64)
    if X.ndim != 3 or X.shape[0] != 12:
        raise ValidationError(f"expected a 12-channel stack, got shape {X.shape}")
    if wy.shape != (4, *X.shape[1:]):
        raise ValidationError(f"gray bands shape {wy.shape} does not match stack")
    band_means = wy.mean(axis=(1, 2))
    for ch in HF_CHANNELS:
        offset = X[ch].mean() - band_means[ch % 4]
        X[ch] -= w2 * offset
    return X


def _model_score(model, X, sigma) -> np.ndarray:
    s = model.score(X.ravel(), sigma)
    if not np.all(np.isfinite(s)):
        raise NumericalError(f"score model returned non-finite values at sigma={sigma}")
    return np.asarray(s, dtype=np.float64).reshape(X.shape)


def langevin_step(X, sigma, alpha, model, rng, ctx=None, w1=0.0) -> np.ndarray:
    """One Langevin update; the DC term is included only when ctx is given."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    X = np.asarray(X, dtype=np.float64)
    out = X + 0.5 * alpha * _model_score(model, X, sigma)
    if ctx is not None:
        out = out - w1 * dc_residual(X, ctx)
    return out + np.sqrt(alpha) * rng.standard_normal(X.shape)


def _resolve_shape(model, ctx):
    if ctx is not None:
        return (12, *ctx.wy.shape[1:])
    res = getattr(model, "resolution", None)
    if res is not None:
        h, w, c = res
        return (int(c), int(h), int(w))
    raise ValidationError("cannot infer stack shape: no context and model has no resolution")


def anneal_sample(model, config: SamplerConfig, ctx: DcContext | None = None,
                  rng=None, shape=None) -> np.ndarray:
    """Run the full annealed Langevin loop and return the final stack.

    X0 is uniform on (-1, 1); each level i runs steps_per_level Langevin
    updates at sigma_i, and (when conditioning on a grayscale) the
    structure-consistency correction is applied after the inner loop.
    """
    schedule = config.schedule()
    if shape is None:
        shape = _resolve_shape(model, ctx)
    res = getattr(model, "resolution", None)
    if res is not None and tuple(shape) != (int(res[2]), int(res[0]), int(res[1])):
        raise ValidationError(f"model resolution {res} does not match stack shape {shape}")
    if ctx is not None and tuple(shape[1:]) != ctx.wy.shape[1:]:
        raise ValidationError("context bands do not match requested shape")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    X = rng.uniform(-1.0, 1.0, size=shape)
    sigma_last = schedule[-1]
    for sigma in schedule:
        alpha = step_size(config.epsilon, sigma, sigma_last)
        w1 = config.w1_at(alpha, sigma) if ctx is not None else 0.0
        for _ in range(config.steps_per_level):
            X = langevin_step(X, sigma, alpha, model, rng, ctx=ctx, w1=w1)
        if ctx is not None and config.w2 > 0:
            X = sc_apply(X, ctx.wy, config.w2)
    return X


def colorize(y, model, config: SamplerConfig, n_samples: int = 1) -> list[np.ndarray]:
    """Produce n colorizations of a grayscale image, clamped to [0, 1].

    Chain k uses the derived seed config.seed + k so samples are
    independent but individually reproducible.
    """
    y = np.asarray(y, dtype=np.float64)
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    ctx = DcContext.from_gray(y, op=config.gray_op, broadcast=config.dc_broadcast)
    results = []
    for k in range(n_samples):
        rng = np.random.default_rng(config.seed + k)
        X = anneal_sample(model, config, ctx=ctx, rng=rng)
        results.append(clamp(unstack(X)))
    return results
