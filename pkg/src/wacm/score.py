"""Score models: gradient of log density of noise-smoothed distributions.

Two implementations of the score(x, sigma) contract:

* ParzenScore -- the exact score of the sigma-smoothed empirical
  distribution of a finite dataset (the analytic minimizer of the
  denoising-score-matching objective).
* MlpScore -- a small tanh network conditioned on the noise level via an
  appended log(sigma) input feature, trained by denoising score matching
  with Adam.  Forward and reverse passes are written out explicitly so the
  gradients can be checked against finite differences.

GaussianScore provides the closed-form score of an isotropic Gaussian,
used as an analytic oracle for the sampler.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import FormatError, NumericalError, ValidationError

__all__ = [
    "ParzenScore",
    "MlpScore",
    "GaussianScore",
    "DsmConfig",
    "dsm_loss",
    "train_mlp",
    "save_model",
    "load_model",
    "score_batch",
]

MODEL_MAGIC = b"WACMMDL"
MODEL_VERSION = 1
_KIND_PARZEN = 1
_KIND_MLP = 2


def _check_sigma(sigma) -> float:
    sigma = float(sigma)
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    return sigma


class ParzenScore:
    """Exact score of a Gaussian-kernel density over a fixed dataset.

    score(x, sigma) = sum_j w_j(x) (X_j - x) / sigma^2 with softmax weights
    w_j over -||x - X_j||^2 / (2 sigma^2), evaluated via the usual
    max-subtraction for stability.
    """

    def __init__(self, dataset, resolution=None):
        data = np.asarray(dataset, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValidationError(f"dataset must be (N, D) with N >= 1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("dataset contains non-finite values")
        self.dataset = data
        self.resolution = tuple(resolution) if resolution is not None else None

    @property
    def dim(self) -> int:
        return self.dataset.shape[1]

    def score(self, x, sigma) -> np.ndarray:
        return self.score_batch(np.asarray(x, dtype=np.float64)[np.newaxis], sigma)[0]

    def score_batch(self, x, sigmas) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValidationError(f"probe shape {x.shape} does not match dim {self.dim}")
        sig = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), (x.shape[0],))
        if np.any(sig <= 0):
            raise ValidationError("sigmas must be positive")
        X = self.dataset
        # (B, N) squared distances
        d2 = (
            np.sum(x * x, axis=1)[:, None]
            - 2.0 * x @ X.T
            + np.sum(X * X, axis=1)[None, :]
        )
        s2 = (sig * sig)[:, None]
        logw = -d2 / (2.0 * s2)
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        w /= w.sum(axis=1, keepdims=True)
        return (w @ X - x) / s2

    def log_density(self, x, sigma) -> float:
        """Log of the smoothed mixture density at one point (up to nothing:
        full normalization included); used by finite-difference checks."""
        sigma = _check_sigma(sigma)
        x = np.asarray(x, dtype=np.float64)
        diffs = self.dataset - x
        d2 = np.sum(diffs * diffs, axis=1)
        n, d = self.dataset.shape
        logk = -d2 / (2.0 * sigma * sigma)
        m = logk.max()
        lse = m + np.log(np.exp(logk - m).sum())
        return lse - np.log(n) - 0.5 * d * np.log(2.0 * np.pi * sigma * sigma)


class GaussianScore:
    """Closed-form score of N(mean, var*I) smoothed by N(0, sigma^2 I)."""

    def __init__(self, mean, var: float, resolution=None):
        self.mean = np.asarray(mean, dtype=np.float64)
        if not var > 0:
            raise ValidationError("variance must be positive")
        self.var = float(var)
        self.resolution = tuple(resolution) if resolution is not None else None

    @property
    def dim(self) -> int:
        return self.mean.size

    def score(self, x, sigma) -> np.ndarray:
        sigma = _check_sigma(sigma)
        x = np.asarray(x, dtype=np.float64)
        return (self.mean - x) / (self.var + sigma * sigma)

    def score_batch(self, x, sigmas) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        sig = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), (x.shape[0],))
        if np.any(sig <= 0):
            raise ValidationError("sigmas must be positive")
        return (self.mean[None, :] - x) / (self.var + sig * sig)[:, None]


class MlpScore:
    """Fully-connected tanh network mapping (x, log sigma) -> score estimate.

    Layer widths are [D+1, hidden..., D]; the extra input feature is
    log(sigma) and the raw network output is divided by sigma, so the net
    only has to learn an O(1) quantity at every noise level.  Weights are
    float64 and serialization round-trips exactly.
    """

    def __init__(self, dim, hidden=(64, 64), rng=None, resolution=None):
        if dim < 1:
            raise ValidationError("dim must be >= 1")
        self.dim = int(dim)
        self.layer_sizes = [self.dim + 1, *map(int, hidden), self.dim]
        self.resolution = tuple(resolution) if resolution is not None else None
        rng = np.random.default_rng(rng)
        self.weights = []
        self.biases = []
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            scale = 1.0 / np.sqrt(n_in)
            self.weights.append(rng.normal(0.0, scale, size=(n_in, n_out)))
            self.biases.append(np.zeros(n_out))

    # -- forward / backward ---------------------------------------------

    def _forward(self, x, sigmas):
        """Batch forward pass; returns (output, activations) for backprop."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        sigmas = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), (x.shape[0],))
        a = np.concatenate([x, np.log(sigmas)[:, None]], axis=1)
        acts = [a]
        last = len(self.weights) - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ W + b
            acts.append(z if l == last else np.tanh(z))
        return acts[-1], acts

    def _backward(self, acts, dout):
        """Gradients of sum-style loss wrt weights given d(loss)/d(output)."""
        grads_W = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = dout
        for l in range(len(self.weights) - 1, -1, -1):
            grads_W[l] = acts[l].T @ delta
            grads_b[l] = delta.sum(axis=0)
            if l > 0:
                delta = (delta @ self.weights[l].T) * (1.0 - acts[l] ** 2)
        return grads_W, grads_b

    def score(self, x, sigma) -> np.ndarray:
        sigma = _check_sigma(sigma)
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValidationError(f"probe shape {x.shape} does not match dim {self.dim}")
        out, _ = self._forward(x[np.newaxis], sigma)
        return out[0] / sigma

    def score_batch(self, x, sigmas) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValidationError(f"probe shape {x.shape} does not match dim {self.dim}")
        sig = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), (x.shape[0],))
        if np.any(sig <= 0):
            raise ValidationError("sigmas must be positive")
        out, _ = self._forward(x, sig)
        return out / sig[:, None]

    # -- parameter vector helpers (finite-difference checks, Adam) -------

    def get_params(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in (*self.weights, *self.biases)])

    def set_params(self, vec) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        i = 0
        for arrs in (self.weights, self.biases):
            for k, a in enumerate(arrs):
                arrs[k] = vec[i : i + a.size].reshape(a.shape).copy()
                i += a.size
        if i != vec.size:
            raise ValidationError("parameter vector size mismatch")

    def copy(self) -> "MlpScore":
        clone = MlpScore.__new__(MlpScore)
        clone.dim = self.dim
        clone.layer_sizes = list(self.layer_sizes)
        clone.resolution = self.resolution
        clone.weights = [W.copy() for W in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone


def score_batch(model, x, sigmas) -> np.ndarray:
    """Evaluate a score model on a batch, one sigma per row."""
    x = np.asarray(x, dtype=np.float64)
    sig = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), (x.shape[0],))
    if hasattr(model, "score_batch"):
        return model.score_batch(x, sig)
    return np.stack([model.score(xi, si) for xi, si in zip(x, sig)])


def default_lambda(sigma):
    """sigma^2 weighting: makes per-level DSM losses comparable in scale."""
    return sigma * sigma


@dataclass
class DsmConfig:
    """Hyperparameters for denoising-score-matching training."""

    schedule: np.ndarray
    batch_size: int = 8
    iterations: int = 1000
    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    lr_decay: bool = True  # linear decay to ~0 over the run
    lam: Callable[[float], float] = field(default=default_lambda)

    def __post_init__(self):
        self.schedule = np.asarray(self.schedule, dtype=np.float64)
        if self.schedule.ndim != 1 or self.schedule.size < 1 or np.any(self.schedule <= 0):
            raise ValidationError("schedule must be a 1-D array of positive sigmas")
        if self.batch_size < 1 or self.iterations < 0:
            raise ValidationError("batch_size must be >= 1 and iterations >= 0")
        if self.learning_rate <= 0 or not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1):
            raise ValidationError("bad optimizer hyperparameters")


def _dsm_terms(model, batch, sigmas, z, lam):
    """Per-sample perturbations and residuals shared by loss and gradient."""
    noisy = batch + sigmas[:, None] * z
    est = score_batch(model, noisy, sigmas)
    residual = est + z / sigmas[:, None]
    weights = np.asarray([lam(s) for s in sigmas])
    return noisy, residual, weights


def dsm_loss(model, batch, schedule, rng, lam=default_lambda) -> float:
    """Stochastic multi-noise DSM objective on one batch.

    Each sample draws a level uniformly from the schedule, is perturbed by
    sigma * z, and contributes lam(sigma) * 0.5 * ||S(x~, sigma) + z/sigma||^2;
    the batch mean is returned.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[0] < 1:
        raise ValidationError("batch must be non-empty")
    schedule = np.asarray(schedule, dtype=np.float64)
    sigmas = schedule[rng.integers(schedule.size, size=batch.shape[0])]
    z = rng.standard_normal(batch.shape)
    _, residual, weights = _dsm_terms(model, batch, sigmas, z, lam)
    return float(np.mean(weights * 0.5 * np.sum(residual * residual, axis=1)))


def train_mlp(model: MlpScore, dataset, config: DsmConfig, rng, history=None) -> MlpScore:
    """Train an MLP score model by DSM with Adam; mutates and returns model.

    Aborts with NumericalError if the loss or any gradient goes non-finite.
    Appends the per-iteration loss to `history` when a list is supplied.
    """
    data = np.atleast_2d(np.asarray(dataset, dtype=np.float64))
    if data.shape[0] < 1:
        raise ValidationError("dataset must be non-empty")
    if data.shape[1] != model.dim:
        raise ValidationError(f"dataset dim {data.shape[1]} != model dim {model.dim}")

    m_W = [np.zeros_like(W) for W in model.weights]
    v_W = [np.zeros_like(W) for W in model.weights]
    m_b = [np.zeros_like(b) for b in model.biases]
    v_b = [np.zeros_like(b) for b in model.biases]
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.adam_eps

    for step in range(1, config.iterations + 1):
        idx = rng.integers(data.shape[0], size=config.batch_size)
        batch = data[idx]
        sigmas = config.schedule[rng.integers(config.schedule.size, size=config.batch_size)]
        z = rng.standard_normal(batch.shape)
        noisy = batch + sigmas[:, None] * z
        out, acts = model._forward(noisy, sigmas)
        residual = out / sigmas[:, None] + z / sigmas[:, None]
        weights = np.asarray([config.lam(s) for s in sigmas])
        loss = float(np.mean(weights * 0.5 * np.sum(residual * residual, axis=1)))
        if not np.isfinite(loss):
            raise NumericalError(f"DSM loss diverged at iteration {step}: {loss}")
        if history is not None:
            history.append(loss)
        dout = (weights[:, None] * residual / sigmas[:, None]) / batch.shape[0]
        grads_W, grads_b = model._backward(acts, dout)
        step_lr = lr
        if config.lr_decay:
            step_lr = max(lr * (1.0 - step / config.iterations), 0.002 * lr)
        corr1 = 1.0 - b1 ** step
        corr2 = 1.0 - b2 ** step
        for l in range(len(model.weights)):
            for g, m, v, param in (
                (grads_W[l], m_W[l], v_W[l], model.weights[l]),
                (grads_b[l], m_b[l], v_b[l], model.biases[l]),
            ):
                if not np.all(np.isfinite(g)):
                    raise NumericalError(f"gradient diverged at iteration {step}")
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * g * g
                param -= step_lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
    return model


# --- serialization ----------------------------------------------------------

def _pack_resolution(resolution):
    res = resolution if resolution is not None else (0, 0, 0)
    return struct.pack("<III", *res)


def save_model(model, path) -> None:
    """Write a Parzen or MLP score model to the binary model format."""
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        if isinstance(model, ParzenScore):
            fh.write(struct.pack("<IB", MODEL_VERSION, _KIND_PARZEN))
            fh.write(_pack_resolution(model.resolution))
            n, d = model.dataset.shape
            fh.write(struct.pack("<II", n, d))
            fh.write(model.dataset.astype("<f8").tobytes())
        elif isinstance(model, MlpScore):
            fh.write(struct.pack("<IB", MODEL_VERSION, _KIND_MLP))
            fh.write(_pack_resolution(model.resolution))
            fh.write(struct.pack("<I", len(model.layer_sizes)))
            fh.write(struct.pack(f"<{len(model.layer_sizes)}I", *model.layer_sizes))
            for W, b in zip(model.weights, model.biases):
                fh.write(W.astype("<f8").tobytes())
                fh.write(b.astype("<f8").tobytes())
        else:
            raise ValidationError(f"cannot serialize model type {type(model).__name__}")


def load_model(path):
    """Read a model file back; scores reproduce bit-identically."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:7] != MODEL_MAGIC:
        raise FormatError(f"bad model magic {data[:7]!r}")
    version, kind = struct.unpack_from("<IB", data, 7)
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model format version {version}")
    res = struct.unpack_from("<III", data, 12)
    resolution = None if res == (0, 0, 0) else res
    pos = 24
    if kind == _KIND_PARZEN:
        n, d = struct.unpack_from("<II", data, pos)
        pos += 8
        need = 8 * n * d
        if len(data) - pos != need:
            raise FormatError("truncated Parzen payload")
        dataset = np.frombuffer(data, dtype="<f8", count=n * d, offset=pos).reshape(n, d)
        return ParzenScore(dataset.copy(), resolution=resolution)
    if kind == _KIND_MLP:
        (n_layers,) = struct.unpack_from("<I", data, pos)
        pos += 4
        sizes = list(struct.unpack_from(f"<{n_layers}I", data, pos))
        pos += 4 * n_layers
        model = MlpScore.__new__(MlpScore)
        model.dim = sizes[-1]
        model.layer_sizes = sizes
        model.resolution = resolution
        model.weights, model.biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            need = 8 * (n_in * n_out + n_out)
            if len(data) - pos < need:
                raise FormatError("truncated MLP payload")
            W = np.frombuffer(data, dtype="<f8", count=n_in * n_out, offset=pos)
            pos += 8 * n_in * n_out
            b = np.frombuffer(data, dtype="<f8", count=n_out, offset=pos)
            pos += 8 * n_out
            model.weights.append(W.reshape(n_in, n_out).copy())
            model.biases.append(b.copy())
        if pos != len(data):
            raise FormatError("trailing bytes in MLP payload")
        return model
    raise FormatError(f"unknown model kind tag {kind}")
