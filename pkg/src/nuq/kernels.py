"""Kernel profiles and separable product kernels on R^d.

Each profile K(z) is a symmetric one-dimensional probability density:

    gaussian    K(z) = exp(-z^2/2) / sqrt(2*pi)
    sigmoid     K(z) = (2/pi) / (exp(-z) + exp(z))
    logistic    K(z) = 1 / (exp(-z) + 2 + exp(z))

The d-dimensional kernel is the unnormalized separable product
prod_i K(u_i / h); callers that need a density divide by N * h^d
themselves.  The squared L2 norm of each profile has a closed form
(gaussian 1/(2*sqrt(pi)), sigmoid 2/pi^2, logistic 1/6), and the
product kernel's squared norm is that constant raised to the d-th
power.  All functions here are stateless and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

KERNEL_KINDS = ("gaussian", "sigmoid", "logistic")

#: Product weights below this threshold are flushed to exactly zero.
WEIGHT_FLOOR = 1e-300

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_TWO_OVER_PI = 2.0 / math.pi

_SQUARE_INTEGRAL = {
    "gaussian": 1.0 / (2.0 * math.sqrt(math.pi)),
    "sigmoid": 2.0 / math.pi**2,
    "logistic": 1.0 / 6.0,
}


@dataclass(frozen=True)
class KernelSpec:
    """Product kernel: 1-d profile ``kind``, bandwidth ``h``, dimension ``d``."""

    kind: str
    bandwidth: float
    dim: int

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(
                f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}"
            )
        h = float(self.bandwidth)
        if not math.isfinite(h) or h <= 0.0:
            raise ConfigError(f"bandwidth must be a positive finite real, got {self.bandwidth!r}")
        if int(self.dim) < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.dim!r}")
        object.__setattr__(self, "bandwidth", h)
        object.__setattr__(self, "dim", int(self.dim))


def profile(kind: str, z):
    """Evaluate the 1-d profile K(z) elementwise on an array.

    Uses overflow-free forms: with a = exp(-|z|), the sigmoid profile is
    (2/pi) * a / (1 + a^2) and the logistic profile is a / (1 + a)^2.
    """
    z = np.asarray(z, dtype=np.float64)
    if kind == "gaussian":
        return _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    a = np.exp(-np.abs(z))
    if kind == "sigmoid":
        return _TWO_OVER_PI * a / (1.0 + a * a)
    if kind == "logistic":
        return a / (1.0 + a) ** 2
    raise ConfigError(f"unknown kernel kind {kind!r}")


def eval_profile(kind: str, z: float) -> float:
    """K(z) for a scalar argument; total on finite reals."""
    if not math.isfinite(z):
        raise InputError(f"kernel profile argument must be finite, got {z!r}")
    return float(profile(kind, z))


def product_weights(spec: KernelSpec, offsets: np.ndarray) -> np.ndarray:
    """Weights prod_i K(u_i/h) for a batch of offset rows u = x_i - x.

    Weights below WEIGHT_FLOOR come back as exactly 0.0.
    """
    u = np.asarray(offsets, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] != spec.dim:
        raise InputError(
            f"offset batch must have shape (k, {spec.dim}), got {u.shape}"
        )
    values = profile(spec.kind, u / spec.bandwidth)
    # multiply in sorted order so the weight is exactly coordinate-order free
    w = np.prod(np.sort(values, axis=1), axis=1)
    w[w < WEIGHT_FLOOR] = 0.0
    return w


def eval_product(spec: KernelSpec, u) -> float:
    """Product-kernel weight of a single offset vector."""
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1 or u.shape[0] != spec.dim:
        raise InputError(f"offset must be a vector of length {spec.dim}, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise InputError("offset vector must be finite")
    return float(product_weights(spec, u[None, :])[0])


def square_integral_per_dim(kind: str) -> float:
    """Closed form of the integral of K(z)^2 over the real line."""
    try:
        return _SQUARE_INTEGRAL[kind]
    except KeyError:
        raise ConfigError(f"unknown kernel kind {kind!r}") from None


def norm_sq(spec: KernelSpec) -> float:
    """Squared L2 norm of the d-dimensional product profile (unit bandwidth)."""
    return square_integral_per_dim(spec.kind) ** spec.dim
