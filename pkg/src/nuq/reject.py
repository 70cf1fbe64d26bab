"""Classification with a reject option.

The abstention rule accepts a query when the marginal density clears the
floor and

    (1 - max_c prob_c) + z * tau <= lambda,

where z is the standard-normal quantile at 1 - beta (or 1 - beta/C with
the per-class correction) and lambda is the price of a rejection.  With
z = 0 this reduces to the plug-in rule that thresholds the estimated
error probability alone.  ``excess_risk_curve`` measures how fast the
empirical rejection risk approaches the oracle optimum on toys that
expose their true conditional label probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .kernels import KernelSpec
from .knn import IndexConfig
from .model import DENSITY_FLOOR, NuqModel, fit

# Wichura's AS241 rational approximations for the inverse normal CDF.
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coeffs, x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def normal_quantile(q: float) -> float:
    """Inverse standard normal CDF, absolute error below 1e-9."""
    if not (0.0 < q < 1.0):
        raise InputError(f"quantile argument must lie in (0, 1), got {q!r}")
    r = q - 0.5
    if abs(r) <= 0.425:
        s = 0.180625 - r * r
        return r * _poly(_A, s) / _poly(_B, s)
    tail = q if r < 0.0 else 1.0 - q
    t = math.sqrt(-math.log(tail))
    if t <= 5.0:
        t -= 1.6
        z = _poly(_C, t) / _poly(_D, t)
    else:
        t -= 5.0
        z = _poly(_E, t) / _poly(_F, t)
    return -z if r < 0.0 else z


@dataclass(frozen=True)
class RejectConfig:
    """Rejection price ``lam`` and test level ``beta``.

    ``per_class_correction`` selects the Bonferroni z at 1 - beta/C;
    None resolves it automatically (on for more than two classes).
    """

    lam: float
    beta: float
    per_class_correction: bool | None = None

    def __post_init__(self):
        if not (0.0 < self.lam < 1.0):
            raise ConfigError(f"lambda must lie in (0, 1), got {self.lam!r}")
        if not (0.0 < self.beta <= 0.5):
            raise ConfigError(f"beta must lie in (0, 0.5], got {self.beta!r}")


@dataclass(frozen=True)
class RejectDecision:
    action: str  # "predict" | "reject"
    predicted_class: int | None
    u_beta: float
    density_gate_failed: bool

    @property
    def accepted(self) -> bool:
        return self.action == "predict"


def _quantile_for(cfg: RejectConfig, num_classes: int) -> float:
    per_class = cfg.per_class_correction
    if per_class is None:
        per_class = num_classes > 2
    level = 1.0 - (cfg.beta / num_classes if per_class else cfg.beta)
    return normal_quantile(level)


def _decide(report, lam: float, z: float) -> RejectDecision:
    if report.density <= DENSITY_FLOOR:
        return RejectDecision("reject", None, math.inf, True)
    # z * tau with tau = +inf and z = 0 must vanish, not produce NaN
    confidence_term = z * report.tau if z != 0.0 else 0.0
    u_beta = report.aleatoric + confidence_term
    if u_beta <= lam:
        return RejectDecision("predict", report.predicted_class, u_beta, False)
    return RejectDecision("reject", None, u_beta, False)


def abstain(model: NuqModel, x, cfg: RejectConfig) -> RejectDecision:
    """Accept-or-reject decision for one query under the confidence rule."""
    report = model.uncertainties(x)
    return _decide(report, cfg.lam, _quantile_for(cfg, model.num_classes))


def abstain_batch(model: NuqModel, queries, cfg: RejectConfig) -> list[RejectDecision]:
    z = _quantile_for(cfg, model.num_classes)
    return [_decide(r, cfg.lam, z) for r in model.score_batch(queries)]


def chow_plugin_abstain(model: NuqModel, x, lam: float) -> RejectDecision:
    """Plug-in rule: the confidence term is dropped (z = 0)."""
    if not (0.0 < lam < 1.0):
        raise ConfigError(f"lambda must lie in (0, 1), got {lam!r}")
    return _decide(model.uncertainties(x), lam, 0.0)


def chow_plugin_abstain_batch(model: NuqModel, queries, lam: float) -> list[RejectDecision]:
    if not (0.0 < lam < 1.0):
        raise ConfigError(f"lambda must lie in (0, 1), got {lam!r}")
    return [_decide(r, lam, 0.0) for r in model.score_batch(queries)]


def evaluate_chow_risk(decisions, true_labels, lam: float):
    """Empirical rejection risk: errors among accepted plus lam per rejection.

    Returns (risk, abstain_rate, accepted_error_rate); the last is NaN
    when nothing was accepted.
    """
    labels = np.asarray(true_labels).reshape(-1)
    if len(decisions) != labels.shape[0]:
        raise InputError("decisions and labels must have equal length")
    if labels.shape[0] == 0:
        raise InputError("evaluate_chow_risk needs at least one decision")
    n = labels.shape[0]
    rejected = 0
    errors = 0
    for decision, label in zip(decisions, labels):
        if decision.accepted:
            errors += int(decision.predicted_class != label)
        else:
            rejected += 1
    accepted = n - rejected
    risk = (errors + lam * rejected) / n
    accepted_error_rate = errors / accepted if accepted else math.nan
    return risk, rejected / n, accepted_error_rate


@dataclass(frozen=True)
class ExcessRiskPoint:
    """Mean excess rejection risk at one sample size."""

    n: int
    mean_excess: float
    std_error: float
    per_point: dict[float, float]
    per_point_se: dict[float, float]


def excess_risk_curve(toy, ns, lam: float, beta: float, seeds, *,
                      bandwidth_scale: float = 1.0, kernel_kind: str = "gaussian",
                      eval_points=(0.1, 0.3, 0.5, 0.95), rule: str = "nuq",
                      neighbors: int | None = None) -> list[ExcessRiskPoint]:
    """Monte-Carlo excess of the empirical rejection risk over the oracle.

    For each sample size the toy is resampled once per seed, a model is
    fitted with bandwidth ``bandwidth_scale * n**(-1/5)``, and the rule's
    risk at each evaluation point is compared against the oracle optimum
    min(eta, 1 - eta, lam).  ``rule`` selects the confidence rule ("nuq")
    or the plug-in baseline ("plugin").  The toy must expose sample(n,
    seed), eta(x) and optimal_chow_risk(x, lam).
    """
    if rule not in ("nuq", "plugin"):
        raise ConfigError(f"unknown rejection rule {rule!r}")
    seeds = list(seeds)
    points = [float(x) for x in eval_points]
    results = []
    for n in ns:
        h = bandwidth_scale * float(n) ** (-0.2)
        kernel = KernelSpec(kernel_kind, h, 1)
        k = n if neighbors is None else min(neighbors, n)
        cfg = IndexConfig(neighbors=k, backend="exact")
        per_seed = np.zeros((len(seeds), len(points)))
        for row, seed in enumerate(seeds):
            dataset = toy.sample(n, seed)
            model = fit(dataset, kernel, cfg, density_mode="kde")
            if rule == "nuq":
                decisions = abstain_batch(
                    model, np.asarray(points)[:, None],
                    RejectConfig(lam=lam, beta=beta),
                )
            else:
                decisions = chow_plugin_abstain_batch(model, np.asarray(points)[:, None], lam)
            for col, (x, decision) in enumerate(zip(points, decisions)):
                eta = float(toy.eta(x))
                if decision.accepted:
                    risk = 1.0 - eta if decision.predicted_class == 1 else eta
                else:
                    risk = lam
                per_seed[row, col] = risk - float(toy.optimal_chow_risk(x, lam))
        seed_means = per_seed.mean(axis=1)
        se = float(seed_means.std(ddof=1) / math.sqrt(len(seeds))) if len(seeds) > 1 else 0.0
        per_point = {x: float(per_seed[:, i].mean()) for i, x in enumerate(points)}
        per_point_se = {
            x: float(per_seed[:, i].std(ddof=1) / math.sqrt(len(seeds))) if len(seeds) > 1 else 0.0
            for i, x in enumerate(points)
        }
        results.append(ExcessRiskPoint(
            n=int(n),
            mean_excess=float(seed_means.mean()),
            std_error=se,
            per_point=per_point,
            per_point_se=per_point_se,
        ))
    return results
