"""Synthetic datasets with analytic oracles.

Every generator draws from a Philox4x64-10 counter generator keyed by the
seed, so a (name, params, seed) triple reproduces bit-for-bit.  Draw
order is part of each generator's contract and is stated in its
docstring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .model import EmbeddingDataset

TOY_NAMES = ("two_moons", "gauss3_1d", "step_reject", "ring_ood")


def _rng(seed: int) -> np.random.Generator:
    if int(seed) < 0:
        raise InputError("toy seeds must be nonnegative")
    return np.random.Generator(np.random.Philox(int(seed)))


def gen_two_moons(n: int, noise: float = 0.1, seed: int = 0) -> EmbeddingDataset:
    """Interleaved half-circles, classes balanced within one point.

    Arc positions are deterministic (linspace over [0, pi]); the single
    random block is one (n, 2) standard-normal draw scaled by ``noise``.
    Outer moon is class 0, inner moon class 1, rows concatenated in that
    order.
    """
    if n < 2:
        raise InputError("two_moons needs n >= 2")
    n_out = n - n // 2
    n_in = n // 2
    t_out = np.linspace(0.0, math.pi, n_out)
    t_in = np.linspace(0.0, math.pi, n_in)
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)])
    pts = np.concatenate([outer, inner])
    if noise > 0.0:
        pts = pts + noise * _rng(seed).standard_normal((n, 2))
    labels = np.concatenate([np.zeros(n_out, dtype=np.int64), np.ones(n_in, dtype=np.int64)])
    return EmbeddingDataset(points=pts.astype(np.float32), labels=labels, num_classes=2)


def moon_arcs(samples_per_arc: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Dense noiseless arcs of the two moons (class 0 arc, class 1 arc)."""
    t = np.linspace(0.0, math.pi, samples_per_arc)
    outer = np.column_stack([np.cos(t), np.sin(t)])
    inner = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    return outer, inner


@dataclass(frozen=True)
class Gauss3Toy:
    """Binary labels from a three-component 1-d Gaussian mixture.

    Components sit at means (-1, 0, 1.5) with scales (0.4, 0.4, 0.6) and
    equal weights; the middle component carries class 1, the outer two
    class 0.  The class-1 posterior and the marginal density are exact.
    """

    means: tuple[float, ...] = (-1.0, 0.0, 1.5)
    scales: tuple[float, ...] = (0.4, 0.4, 0.6)
    component_class: tuple[int, ...] = (0, 1, 0)

    def sample(self, n: int, seed: int = 0) -> EmbeddingDataset:
        """Draw order: component indices (n), then one standard normal block (n)."""
        if n < 3:
            raise InputError("gauss3_1d needs n >= 3")
        rng = _rng(seed)
        comp = rng.integers(0, len(self.means), size=n)
        z = rng.standard_normal(n)
        means = np.asarray(self.means)
        scales = np.asarray(self.scales)
        x = means[comp] + scales[comp] * z
        labels = np.asarray(self.component_class, dtype=np.int64)[comp]
        return EmbeddingDataset(points=x[:, None].astype(np.float32), labels=labels, num_classes=2)

    def _log_component_pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)[..., None]
        means = np.asarray(self.means)
        scales = np.asarray(self.scales)
        z = (x - means) / scales
        return -0.5 * z * z - np.log(scales) - 0.5 * math.log(2.0 * math.pi)

    def eta(self, x):
        """P(class 1 | x), computed stably through log component densities."""
        logp = self._log_component_pdf(x)
        top = logp.max(axis=-1, keepdims=True)
        p = np.exp(logp - top)
        mask = np.asarray(self.component_class) == 1
        out = p[..., mask].sum(axis=-1) / p.sum(axis=-1)
        return out if out.ndim else float(out)

    def density(self, x):
        """Marginal mixture density (equal component weights)."""
        p = np.exp(self._log_component_pdf(x)).mean(axis=-1)
        return p if p.ndim else float(p)


def gen_gauss3_1d(n: int, seed: int = 0) -> tuple[EmbeddingDataset, Gauss3Toy]:
    toy = Gauss3Toy()
    return toy.sample(n, seed), toy


@dataclass(frozen=True)
class StepToy:
    """Smoothed-step label noise: eta(x) = logistic((x - 0.5)/s), X ~ N(0.5, 0.04)."""

    s: float = 0.05

    def __post_init__(self):
        if self.s <= 0:
            raise ConfigError("step smoothing s must be positive")

    def sample(self, n: int, seed: int = 0) -> EmbeddingDataset:
        """Draw order: one standard normal block (n), then one uniform block (n)."""
        if n < 1:
            raise InputError("step_reject needs n >= 1")
        rng = _rng(seed)
        x = 0.5 + 0.2 * rng.standard_normal(n)
        u = rng.random(n)
        labels = (u < self.eta(x)).astype(np.int64)
        return EmbeddingDataset(points=x[:, None].astype(np.float32), labels=labels, num_classes=2)

    def eta(self, x):
        t = (np.asarray(x, dtype=np.float64) - 0.5) / self.s
        out = np.where(t >= 0, 1.0 / (1.0 + np.exp(-np.abs(t))),
                       np.exp(-np.abs(t)) / (1.0 + np.exp(-np.abs(t))))
        return out if out.ndim else float(out)

    def bayes_risk(self, x):
        t = np.abs(np.asarray(x, dtype=np.float64) - 0.5) / self.s
        out = np.exp(-t) / (1.0 + np.exp(-t))
        return out if out.ndim else float(out)

    def optimal_chow_risk(self, x, lam: float):
        out = np.minimum(self.bayes_risk(x), lam)
        return out if out.ndim else float(out)

    def density(self, x):
        z = (np.asarray(x, dtype=np.float64) - 0.5) / 0.2
        out = np.exp(-0.5 * z * z) / (0.2 * math.sqrt(2.0 * math.pi))
        return out if out.ndim else float(out)


def gen_step_reject(n: int, s: float = 0.05, seed: int = 0) -> tuple[EmbeddingDataset, StepToy]:
    toy = StepToy(s=s)
    return toy.sample(n, seed), toy


def gen_ring_ood(n: int, r_min: float, r_max: float, seed: int = 0,
                 center=(0.0, 0.0)) -> EmbeddingDataset:
    """Area-uniform annulus probes around ``center`` (unlabeled, C = 0).

    Draw order: one uniform block (n) for the radius, one (n) for the
    angle.  Mean radius is (2/3)(r_max^3 - r_min^3)/(r_max^2 - r_min^2).
    """
    if n < 1:
        raise InputError("ring_ood needs n >= 1")
    if not (0.0 < r_min < r_max):
        raise InputError("ring radii must satisfy 0 < r_min < r_max")
    rng = _rng(seed)
    r = np.sqrt(r_min**2 + rng.random(n) * (r_max**2 - r_min**2))
    theta = 2.0 * math.pi * rng.random(n)
    cx, cy = float(center[0]), float(center[1])
    pts = np.column_stack([cx + r * np.cos(theta), cy + r * np.sin(theta)])
    return EmbeddingDataset(points=pts.astype(np.float32), labels=None, num_classes=0)
