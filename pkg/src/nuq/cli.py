"""Command-line surface.

Subcommands: tune, fit, score, ood-eval, reject-eval, agreement, toy.
A key=value config file (--config) can preset any flag; explicit flags
win.  Exit codes: 0 success, 2 input/parse error, 3 numerical failure,
4 configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InputError, NuqError
from .kernels import KERNEL_KINDS, KernelSpec
from .knn import BACKENDS, IndexConfig
from .metrics import (
    accuracy_rejection_curve,
    agreement,
    ood_prefix_curve,
    rcc_auc,
    risk_coverage_points,
    roc_auc,
    roc_points,
)
from .model import DENSITY_MODES, fit
from .reject import RejectConfig, abstain_batch, chow_plugin_abstain_batch, evaluate_chow_risk
from .storage import atomic_write_bytes, load_model, read_embeddings, save_model, write_embeddings
from .toys import TOY_NAMES, gen_gauss3_1d, gen_ring_ood, gen_step_reject, gen_two_moons
from .tuning import TuneConfig, default_bandwidth_grid, tune_bandwidth


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit(2); flags are config
        raise ConfigError(message)


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.17g}"
    return str(value)


# config-file key -> (argparse dest, caster)
def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


_CONFIG_KEYS = {
    "knn.backend": ("knn_backend", str),
    "knn.k": ("knn_k", int),
    "knn.m": ("knn_m", int),
    "knn.ef_construction": ("knn_ef_construction", int),
    "knn.ef_search": ("knn_ef_search", int),
    "knn.seed": ("knn_seed", int),
    "density.mode": ("density", str),
    "density.ridge": ("ridge", float),
    "density.diagonal": ("density_diagonal", _bool),
    "kernel": ("kernel", str),
    "bandwidth": ("bandwidth", float),
    "lambda": ("lam", float),
    "beta": ("beta", float),
    "per-class-correction": ("per_class_correction", _bool),
    "label-col": ("label_col", str),
    "folds": ("folds", int),
    "seed": ("seed", int),
    "grid-min": ("grid_min", float),
    "grid-max": ("grid_max", float),
    "grid-size": ("grid_size", int),
    "measure": ("measure", str),
}


def _load_config_defaults(path: str) -> dict:
    defaults = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        dest, caster = _CONFIG_KEYS[key]
        try:
            defaults[dest] = caster(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return defaults


def _add_knn_flags(parser):
    parser.add_argument("--knn-backend", choices=BACKENDS, default="exact")
    parser.add_argument("--knn-k", type=int, default=32)
    parser.add_argument("--knn-m", type=int, default=16)
    parser.add_argument("--knn-ef-construction", type=int, default=200)
    parser.add_argument("--knn-ef-search", type=int, default=128)
    parser.add_argument("--knn-seed", type=int, default=0)


def _index_cfg(args) -> IndexConfig:
    return IndexConfig(
        neighbors=args.knn_k, backend=args.knn_backend, hnsw_m=args.knn_m,
        hnsw_ef_construction=args.knn_ef_construction,
        hnsw_ef_search=args.knn_ef_search, seed=args.knn_seed,
    )


def _label_col(args):
    value = getattr(args, "label_col", None)
    if value in (None, "none"):
        return None
    if value == "last":
        return "last"
    return int(value)


def _read(path, args=None, require_labels=False):
    dataset = read_embeddings(path, label_col=_label_col(args) if args is not None else None)
    if require_labels and dataset.labels is None:
        raise InputError(f"{path}: labels required (for CSV inputs pass --label-col)")
    return dataset


def build_parser() -> _Parser:
    parser = _Parser(prog="nuq", description=__doc__)
    parser.add_argument("--version", action="version", version=f"nuq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    tune = sub.add_parser("tune", help="cross-validated bandwidth sweep")
    tune.add_argument("--train", required=True)
    tune.add_argument("--kernel", choices=KERNEL_KINDS, default="gaussian")
    tune.add_argument("--folds", type=int, default=5)
    tune.add_argument("--knn", dest="knn_k", type=int, default=32)
    tune.add_argument("--grid-min", type=float, default=None)
    tune.add_argument("--grid-max", type=float, default=None)
    tune.add_argument("--grid-size", type=int, default=20)
    tune.add_argument("--seed", type=int, default=0)
    tune.add_argument("--label-col", default=None)
    tune.add_argument("--density", choices=DENSITY_MODES, default="kde")
    tune.add_argument("--ridge", type=float, default=None)
    tune.add_argument("--out", default=None, help="write a model fitted at the best bandwidth")
    tune.set_defaults(func=cmd_tune)

    fit_cmd = sub.add_parser("fit", help="fit a model and write it")
    fit_cmd.add_argument("--train", required=True)
    fit_cmd.add_argument("--bandwidth", type=float, default=None,
                         help="kernel bandwidth (required here or in --config)")
    fit_cmd.add_argument("--kernel", choices=KERNEL_KINDS, default="gaussian")
    fit_cmd.add_argument("--density", choices=DENSITY_MODES, default="kde")
    fit_cmd.add_argument("--ridge", type=float, default=None)
    fit_cmd.add_argument("--density-diagonal", action="store_true", default=False,
                         help="diagonal class covariances (gmm mode)")
    fit_cmd.add_argument("--label-col", default=None)
    fit_cmd.add_argument("--out", required=True)
    _add_knn_flags(fit_cmd)
    fit_cmd.set_defaults(func=cmd_fit)

    score = sub.add_parser("score", help="per-query probabilities and uncertainties")
    score.add_argument("--model", required=True)
    score.add_argument("--input", required=True)
    score.add_argument("--out", required=True)
    score.add_argument("--label-col", default=None)
    score.set_defaults(func=cmd_score)

    ood = sub.add_parser("ood-eval", help="ROC-AUC of an uncertainty measure for OOD detection")
    ood.add_argument("--model", required=True)
    ood.add_argument("--in-dist", required=True)
    ood.add_argument("--ood", required=True)
    ood.add_argument("--measure", choices=("epistemic", "aleatoric", "total"), default="epistemic")
    ood.add_argument("--curve-out", default=None, help="write the merged prefix curve CSV")
    ood.add_argument("--roc-out", default=None, help="write the fpr/tpr curve CSV")
    ood.set_defaults(func=cmd_ood_eval)

    rej = sub.add_parser("reject-eval", help="rejection risk and decisions on a test set")
    rej.add_argument("--model", required=True)
    rej.add_argument("--test", required=True)
    rej.add_argument("--lambda", dest="lam", type=float, required=True)
    rej.add_argument("--beta", type=float, default=0.05)
    rej.add_argument("--per-class-correction", dest="per_class_correction",
                     action="store_true", default=None)
    rej.add_argument("--no-per-class-correction", dest="per_class_correction",
                     action="store_false")
    rej.add_argument("--plugin-baseline", action="store_true",
                     help="also report the z = 0 plug-in rule")
    rej.add_argument("--label-col", default=None)
    rej.add_argument("--out", default=None, help="decision CSV path")
    rej.add_argument("--rc-curve-out", default=None,
                     help="risk-coverage curve CSV (columns coverage,risk)")
    rej.add_argument("--ar-curve-out", default=None,
                     help="accuracy-rejection curve CSV (columns coverage,accuracy)")
    rej.set_defaults(func=cmd_reject_eval)

    agree = sub.add_parser("agreement", help="argmax agreement against external predictions")
    agree.add_argument("--model", required=True)
    agree.add_argument("--test", required=True)
    agree.add_argument("--external-preds", required=True)
    agree.add_argument("--label-col", default=None)
    agree.set_defaults(func=cmd_agreement)

    toy = sub.add_parser("toy", help="write a synthetic dataset (plus oracle CSV when analytic)")
    toy.add_argument("--name", choices=TOY_NAMES, required=True)
    toy.add_argument("--n", type=int, required=True)
    toy.add_argument("--seed", type=int, default=0)
    toy.add_argument("--noise", type=float, default=0.1, help="two_moons noise scale")
    toy.add_argument("--s", type=float, default=0.05, help="step_reject smoothing")
    toy.add_argument("--r-min", type=float, default=2.0)
    toy.add_argument("--r-max", type=float, default=3.0)
    toy.add_argument("--center-x", type=float, default=0.0)
    toy.add_argument("--center-y", type=float, default=0.0)
    toy.add_argument("--out", required=True)
    toy.add_argument("--oracle-out", default=None)
    toy.set_defaults(func=cmd_toy)

    commands = {"tune": tune, "fit": fit_cmd, "score": score, "ood-eval": ood,
                "reject-eval": rej, "agreement": agree, "toy": toy}
    for command in commands.values():
        command.add_argument("--config", default=None, help="key=value file presetting flags")
    parser.command_parsers = commands
    return parser


def cmd_tune(args) -> int:
    dataset = _read(args.train, args, require_labels=True)
    if (args.grid_min is None) != (args.grid_max is None):
        raise ConfigError("--grid-min and --grid-max must be given together")
    if args.grid_min is not None:
        if not (0 < args.grid_min < args.grid_max):
            raise ConfigError("need 0 < grid-min < grid-max")
        grid = tuple(np.geomspace(args.grid_min, args.grid_max, args.grid_size))
    else:
        grid = default_bandwidth_grid(dataset, size=args.grid_size, seed=args.seed)
    cfg = TuneConfig(grid=grid, folds=args.folds, neighbors=args.knn_k,
                     seed=args.seed, kernel_kind=args.kernel)
    best_h, table = tune_bandwidth(dataset, cfg)
    for h, acc in table:
        print(f"h={_fmt(h)} accuracy={_fmt(acc)}")
    print(f"best_h={_fmt(best_h)}")
    if args.out:
        kernel = KernelSpec(args.kernel, best_h, dataset.dim)
        index_cfg = IndexConfig(neighbors=args.knn_k, backend="exact")
        model = fit(dataset, kernel, index_cfg, density_mode=args.density, ridge=args.ridge)
        save_model(model, args.out)
        print(f"model={args.out}")
    return 0


def cmd_fit(args) -> int:
    if args.bandwidth is None:
        raise ConfigError("--bandwidth is required (flag or config file)")
    dataset = _read(args.train, args, require_labels=True)
    kernel = KernelSpec(args.kernel, args.bandwidth, dataset.dim)
    model = fit(dataset, kernel, _index_cfg(args), density_mode=args.density,
                ridge=args.ridge, diagonal=args.density_diagonal)
    save_model(model, args.out)
    print(f"model={args.out} n={model.n} d={model.dim} classes={model.num_classes}")
    return 0


_SCORE_HEADER = "index,pred,p_max,U_a,U_e,U_t,tau,density,out_of_support"


def cmd_score(args) -> int:
    model = load_model(args.model)
    queries = _read(args.input, args)
    reports = model.score_batch(queries.points.astype(np.float64))
    lines = [_SCORE_HEADER]
    for i, rep in enumerate(reports):
        lines.append(",".join([
            str(i), str(rep.predicted_class), _fmt(float(rep.probs.probs.max())),
            _fmt(rep.aleatoric), _fmt(rep.epistemic), _fmt(rep.total),
            _fmt(rep.tau), _fmt(rep.density), str(int(rep.out_of_support)),
        ]))
    atomic_write_bytes(args.out, ("\n".join(lines) + "\n").encode())
    print(f"scored={len(reports)} out={args.out}")
    return 0


def _measure_values(model, dataset, measure: str) -> np.ndarray:
    reports = model.score_batch(dataset.points.astype(np.float64))
    return np.array([getattr(r, measure) for r in reports])


def cmd_ood_eval(args) -> int:
    model = load_model(args.model)
    in_scores = _measure_values(model, _read(args.in_dist), args.measure)
    out_scores = _measure_values(model, _read(args.ood), args.measure)
    auc = roc_auc(in_scores, out_scores)
    print(f"measure={args.measure} roc_auc={_fmt(auc)}")
    if args.curve_out:
        counts = ood_prefix_curve(in_scores, out_scores)
        lines = ["k,ood_count"] + [f"{k + 1},{int(c)}" for k, c in enumerate(counts)]
        atomic_write_bytes(args.curve_out, ("\n".join(lines) + "\n").encode())
        print(f"curve={args.curve_out}")
    if args.roc_out:
        lines = ["fpr,tpr"] + [f"{_fmt(f)},{_fmt(t)}" for f, t in roc_points(in_scores, out_scores)]
        atomic_write_bytes(args.roc_out, ("\n".join(lines) + "\n").encode())
        print(f"roc_curve={args.roc_out}")
    return 0


def cmd_reject_eval(args) -> int:
    model = load_model(args.model)
    dataset = _read(args.test, args)
    cfg = RejectConfig(lam=args.lam, beta=args.beta,
                       per_class_correction=args.per_class_correction)
    queries = dataset.points.astype(np.float64)
    decisions = abstain_batch(model, queries, cfg)
    if args.out:
        lines = ["index,action,u_beta,predicted_class"]
        for i, d in enumerate(decisions):
            pred = "" if d.predicted_class is None else str(d.predicted_class)
            lines.append(f"{i},{d.action},{_fmt(d.u_beta)},{pred}")
        atomic_write_bytes(args.out, ("\n".join(lines) + "\n").encode())
        print(f"decisions={args.out}")
    abstain_rate = float(np.mean([not d.accepted for d in decisions]))
    if dataset.labels is None:
        print(f"abstain_rate={_fmt(abstain_rate)}")
        return 0
    risk, abstain_rate, accepted_error = evaluate_chow_risk(decisions, dataset.labels, args.lam)
    reports = model.score_batch(queries)
    errors = [r.predicted_class != y for r, y in zip(reports, dataset.labels)]
    statistic = [d.u_beta for d in decisions]
    auc = rcc_auc(statistic, errors)
    print(f"chow_risk={_fmt(risk)} abstain_rate={_fmt(abstain_rate)} "
          f"accepted_error_rate={_fmt(accepted_error)} rcc_auc={_fmt(auc)}")
    print("rcc_convention=unnormalized_prefix_risk_sum")
    if args.rc_curve_out:
        lines = ["coverage,risk"] + [
            f"{_fmt(cov)},{_fmt(r)}" for cov, r in risk_coverage_points(statistic, errors)
        ]
        atomic_write_bytes(args.rc_curve_out, ("\n".join(lines) + "\n").encode())
        print(f"rc_curve={args.rc_curve_out}")
    if args.ar_curve_out:
        correct = [not e for e in errors]
        lines = ["coverage,accuracy"] + [
            f"{_fmt(cov)},{_fmt(acc)}"
            for cov, acc in accuracy_rejection_curve(statistic, correct)
        ]
        atomic_write_bytes(args.ar_curve_out, ("\n".join(lines) + "\n").encode())
        print(f"ar_curve={args.ar_curve_out}")
    if args.plugin_baseline:
        plugin = chow_plugin_abstain_batch(model, queries, args.lam)
        p_risk, p_rate, p_err = evaluate_chow_risk(plugin, dataset.labels, args.lam)
        print(f"plugin_chow_risk={_fmt(p_risk)} plugin_abstain_rate={_fmt(p_rate)} "
              f"plugin_accepted_error_rate={_fmt(p_err)}")
    return 0


def cmd_agreement(args) -> int:
    model = load_model(args.model)
    dataset = _read(args.test, args)
    try:
        table = np.loadtxt(args.external_preds, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"malformed predictions CSV: {exc}") from exc
    external = table[:, -1].astype(np.int64)  # last column when several
    reports = model.score_batch(dataset.points.astype(np.float64))
    ours = np.array([r.predicted_class for r in reports])
    if external.shape[0] != ours.shape[0]:
        raise InputError("external predictions do not match the test set length")
    value = agreement(ours, external)
    print(f"agreement={_fmt(value)}")
    disagree = np.flatnonzero(ours != external)
    if disagree.size:
        aleatoric = np.array([r.aleatoric for r in reports])
        ranks = aleatoric.argsort(kind="stable").argsort()
        percentile = float(np.mean(ranks[disagree] / max(len(ours) - 1, 1)))
        print(f"disagreement_mean_ua_percentile={_fmt(percentile)}")
    return 0


def cmd_toy(args) -> int:
    oracle_rows = None
    if args.name == "two_moons":
        dataset = gen_two_moons(args.n, noise=args.noise, seed=args.seed)
    elif args.name == "gauss3_1d":
        dataset, toy = gen_gauss3_1d(args.n, seed=args.seed)
        x = dataset.points[:, 0].astype(np.float64)
        oracle_rows = ("x,eta,density",
                       [(float(v), float(toy.eta(v)), float(toy.density(v))) for v in x])
    elif args.name == "step_reject":
        dataset, toy = gen_step_reject(args.n, s=args.s, seed=args.seed)
        x = dataset.points[:, 0].astype(np.float64)
        oracle_rows = ("x,eta,bayes_risk,density",
                       [(float(v), float(toy.eta(v)), float(toy.bayes_risk(v)),
                         float(toy.density(v))) for v in x])
    else:
        dataset = gen_ring_ood(args.n, args.r_min, args.r_max, seed=args.seed,
                               center=(args.center_x, args.center_y))
    write_embeddings(dataset, args.out)
    print(f"dataset={args.out} n={dataset.n} d={dataset.dim}")
    if args.oracle_out:
        if oracle_rows is None:
            raise ConfigError(f"toy {args.name!r} has no analytic oracle")
        header, rows = oracle_rows
        lines = [header] + [",".join(_fmt(v) for v in row) for row in rows]
        atomic_write_bytes(args.oracle_out, ("\n".join(lines) + "\n").encode())
        print(f"oracle={args.oracle_out}")
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if "--config" in argv:
            at = argv.index("--config")
            if at + 1 >= len(argv):
                raise ConfigError("--config needs a file path")
            defaults = _load_config_defaults(argv[at + 1])
            command = next((token for token in argv if not token.startswith("-")), None)
            target = parser.command_parsers.get(command)
            if target is not None:
                # keys a command does not define are for other commands; skip them
                known = {action.dest for action in target._actions}
                target.set_defaults(**{k: v for k, v in defaults.items() if k in known})
        args = parser.parse_args(argv)
        return args.func(args)
    except NuqError as exc:
        print(f"nuq: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"nuq: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
