"""Command-line interface.

Subcommands: ``fit``, ``diagnose``, ``bootstrap``, ``cox``, ``local``,
``simulate`` and ``distance``. Each writes a JSON report (stdout unless
``--output`` is given) that embeds the resolved configuration, the seed and
the defaults table.

Options may also come from ``--config FILE``: one ``key = value`` per line,
keys spelled like the long options (``-`` or ``_``), ``#`` starts a comment.
Command-line flags override the file.

Exit codes: 0 success, 2 invalid input or configuration, 3 estimation
failure (non-convergence, no events, singular matrices), 4 numerical
integration failure.

The environment variable ``LFSURV_THREADS`` sets the default worker count
for bootstrap and simulation.
"""
import argparse
import os
import sys

import numpy as np

from . import __version__, report
from ._kernels import BACKEND
from .errors import (BoundaryError, ConvergenceError, LFSurvError, ParseError,
                     QuadratureError, SingularMatrixError, ValidationError)

EXIT_OK, EXIT_VALIDATION, EXIT_ESTIMATION, EXIT_NUMERIC = 0, 2, 3, 4


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _threads():
    v = os.environ.get("LFSURV_THREADS")
    if not v:
        return 1
    try:
        return max(1, int(v))
    except ValueError:
        raise ValidationError(f"LFSURV_THREADS must be an integer, got {v!r}") from None


def read_config(path):
    """Parse a ``key = value`` file into a dict of strings."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected key = value", line=lineno)
            k, v = line.split("=", 1)
            k = k.strip().replace("-", "_")
            if not k:
                raise ParseError("empty key", line=lineno)
            out[k] = v.strip()
    return out


# --------------------------------------------------------------------------
# shared option groups


def _add_data(p):
    p.add_argument("--input", required=False, help="CSV with time, status and optional z1..zq")
    p.add_argument("--time-col", default="time")
    p.add_argument("--status-col", default="status")
    p.add_argument("--censor-col", default=None,
                   help="column with a censoring time for every record")
    p.add_argument("--horizon", type=float, default=None,
                   help="observation horizon T (default: largest time)")


def _add_family(p, default="exponential"):
    p.add_argument("--family", default=default,
                   help="exponential, weibull, weibull2, gompertz or piecewise_constant")
    p.add_argument("--cuts", type=_floats, default=None,
                   help="piecewise cut points, comma separated, starting at 0")


def _add_weight(p):
    p.add_argument("--weight", default="unit",
                   help="unit, inverse-censoring-km, inverse-yhat or window")
    p.add_argument("--window", type=_floats, default=None, help="a,b for the window weight")


def _add_common(p):
    p.add_argument("--config", default=None, help="key = value file")
    p.add_argument("--output", default=None, help="report path (default stdout)")
    p.add_argument("--seed", type=int, default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="lfsurv", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"lfsurv {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a parametric hazard model")
    _add_common(p); _add_data(p); _add_family(p); _add_weight(p)
    p.add_argument("--levels", type=_floats, default=[0.90, 0.95])
    p.add_argument("--k-formula", default="per_record_form",
                   choices=["per_record_form", "integral_form", "double_integral_form"])

    p = sub.add_parser("diagnose", help="fit plus per-record influence")
    _add_common(p); _add_data(p); _add_family(p); _add_weight(p)
    p.add_argument("--threshold", type=float, default=None,
                   help="flag records with sphered influence norm above this (default 3)")
    p.add_argument("--influence-csv", default=None)
    p.add_argument("--jackknife", type=_bool, nargs="?", const=True, default=False)

    p = sub.add_parser("bootstrap", help="bootstrap a parametric fit")
    _add_common(p); _add_data(p); _add_family(p); _add_weight(p)
    p.add_argument("--scheme", default="nonparametric_pairs")
    p.add_argument("--B", type=int, default=None)
    p.add_argument("--replicates-csv", default=None)
    p.add_argument("--bootstrap-t", type=_bool, nargs="?", const=True, default=False)

    p = sub.add_parser("cox", help="proportional hazards regression")
    _add_common(p); _add_data(p); _add_family(p)
    p.add_argument("--mode", default="semiparametric", choices=["semiparametric", "parametric"])
    p.add_argument("--bootstrap-scheme", default=None,
                   help="scheme1_parametric or scheme2_triplets")
    p.add_argument("--B", type=int, default=None)
    p.add_argument("--influence-csv", default=None)

    p = sub.add_parser("local", help="local likelihood curve")
    _add_common(p); _add_data(p); _add_family(p)
    p.add_argument("--h", type=float, required=False, default=None, help="bandwidth")
    p.add_argument("--kernel", default="uniform_window",
                   choices=["uniform_window", "epanechnikov", "gaussian_truncated"])
    p.add_argument("--grid-size", type=int, default=None)
    p.add_argument("--csv", default=None, help="write (s, theta(s)) rows here")

    p = sub.add_parser("simulate", help="Monte Carlo studies")
    _add_common(p); _add_family(p)
    p.add_argument("--scenario", default="5B", choices=["5B", "efficiency", "coverage"])
    p.add_argument("--g", type=float, default=0.5, help="censoring rate multiple")
    p.add_argument("--eps", type=float, default=0.1, help="survival at the horizon")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--truth", default="weibull")
    p.add_argument("--shape", type=float, default=1.5)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--censor-rate", type=float, default=None)
    p.add_argument("--T", type=float, default=3.0)
    p.add_argument("--levels", type=_floats, default=[0.90, 0.95])
    p.add_argument("--csv", default=None, help="per-replication estimates")

    p = sub.add_parser("distance", help="distance and identity checks")
    _add_common(p); _add_family(p)
    p.add_argument("--check", default="kl", choices=["kl", "hazard", "oracle", "cox"])
    p.add_argument("--truth", default="exponential")
    p.add_argument("--shape", type=float, default=1.5)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--censor-rate", type=float, default=None)
    p.add_argument("--beta0", type=float, default=0.5)
    p.add_argument("--theta", type=_floats, default=None)
    p.add_argument("--beta", type=_floats, default=None)
    p.add_argument("--T", type=float, default=5.0)
    return ap


# --------------------------------------------------------------------------
# helpers


def _family(args):
    from .families import make_family
    cfg = {"cuts": args.cuts} if args.cuts is not None else None
    return make_family(args.family, cfg)


def _weight(args):
    from .weights import WeightPlan
    kind = args.weight.replace("-", "_")
    if kind == "window":
        if not args.window or len(args.window) != 2:
            raise ValidationError("--weight window needs --window a,b")
        return WeightPlan("window", window=tuple(args.window))
    return WeightPlan(kind)


def _dataset(args):
    from .dataset import load_csv
    if not args.input:
        raise ValidationError("--input is required")
    return load_csv(args.input, time_col=args.time_col, status_col=args.status_col,
                    censor_col=args.censor_col, horizon=args.horizon)


def _envelope(args, body):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    return {"command": args.command, "config": cfg, "seed": getattr(args, "seed", None),
            "defaults": report.defaults_table(), "version": __version__,
            "kernel_backend": BACKEND, "result": body}


def _intervals(fr, levels):
    from .fit import confidence_region
    out = {}
    for lv in levels:
        for mode in ("model_based", "model_robust"):
            cr = confidence_region(fr, lv, mode)
            out.setdefault(mode, {})[str(lv)] = {"lower": cr.lower.tolist(),
                                                 "upper": cr.upper.tolist()}
    return out


# --------------------------------------------------------------------------
# subcommands


def cmd_fit(args):
    from .fit import fit_ml
    ds, fam, w = _dataset(args), _family(args), _weight(args)
    fr = fit_ml(ds, fam, w, k_formula=args.k_formula)
    body = fr.to_dict()
    body["intervals"] = _intervals(fr, args.levels)
    body["horizon"] = ds.horizon
    return body


def cmd_diagnose(args):
    from ._defaults import DEFAULTS
    from .fit import fit_ml
    from .influence import influence_empirical, jackknife_check
    ds, fam, w = _dataset(args), _family(args), _weight(args)
    fr = fit_ml(ds, fam, w)
    rep = influence_empirical(ds, fam, fr)
    thr = DEFAULTS["sphered_threshold"] if args.threshold is None else args.threshold
    if args.influence_csv:
        rep.to_csv(args.influence_csv, threshold=thr)
    flagged = rep.flagged(thr)
    body = {"fit": fr.to_dict(trace=False), "threshold": thr,
            "records": [{"id": int(ds.ids[i]), "x": float(ds.x[i]), "delta": int(ds.delta[i]),
                         "influence": rep.per_record[i].tolist(),
                         "sphered": rep.sphered[i].tolist(),
                         "sphered_norm": float(rep.sphered_norm[i]),
                         "flagged": bool(rep.sphered_norm[i] > thr)} for i in range(ds.n)],
            "flagged_ids": [int(ds.ids[i]) for i in flagged],
            "sigma_hat": rep.sigma_hat.tolist()}
    if args.jackknife:
        jk = jackknife_check(ds, fam, w, workers=_threads())
        body["jackknife"] = {"n_times_difference": jk.jackknife.tolist(),
                             "max_relative_deviation": jk.max_relative_deviation,
                             "failed": jk.failed}
    return body


def cmd_bootstrap(args):
    from .bootstrap import bootstrap
    from .fit import fit_ml
    ds, fam, w = _dataset(args), _family(args), _weight(args)
    fr = fit_ml(ds, fam, w)
    seed = 0 if args.seed is None else args.seed
    args.seed = seed
    run = bootstrap(ds, fam, fr, args.scheme, B=args.B, seed=seed, w=w, workers=_threads(),
                    bootstrap_t=args.bootstrap_t)
    if args.replicates_csv:
        run.to_csv(args.replicates_csv)
    return {"fit": fr.to_dict(trace=False), "bootstrap": run.to_dict(),
            "fit_sandwich": fr.sandwich.tolist(), "fit_J_inverse": np.linalg.inv(fr.J_hat).tolist()}


def cmd_cox(args):
    from .cox import cox_bootstrap, cox_influence, fit_cox_parametric, fit_cox_partial
    if args.bootstrap_scheme and args.bootstrap_scheme.startswith("scheme1") \
            and args.mode != "parametric":
        raise ValidationError("scheme1_parametric bootstrap requires --mode parametric")
    ds = _dataset(args)
    fam = _family(args) if args.mode == "parametric" else None
    fit = fit_cox_parametric(ds, fam) if fam is not None else fit_cox_partial(ds)
    rep = cox_influence(fit, ds)
    if args.influence_csv:
        rep.to_csv(args.influence_csv)
    body = {"fit": fit.to_dict(),
            "influence": {"per_record": rep.per_record.tolist(),
                          "sphered": rep.sphered.tolist(), "ids": ds.ids.tolist()}}
    if args.bootstrap_scheme:
        seed = 0 if args.seed is None else args.seed
        args.seed = seed
        run = cox_bootstrap(ds, fit, args.bootstrap_scheme, B=args.B, seed=seed, fam=fam,
                            workers=_threads())
        body["bootstrap"] = run.to_dict()
    return body


def cmd_local(args):
    from .local import fit_local
    ds, fam = _dataset(args), _family(args)
    if args.h is None:
        raise ValidationError("--h (bandwidth) is required")
    grid = None
    if args.grid_size is not None:
        if args.grid_size < 1:
            raise ValidationError("--grid-size must be positive")
        grid = np.linspace(0.0, ds.horizon, args.grid_size)
    curve = fit_local(ds, fam, grid=grid, h=args.h, kernel=args.kernel)
    if args.csv:
        curve.to_csv(args.csv)
    return curve.to_dict()


def cmd_simulate(args):
    from .distance import make_truth
    from .simulate import coverage_study, efficiency_study
    seed = 0 if args.seed is None else args.seed
    args.seed = seed
    if args.scenario in ("5B", "efficiency"):
        res = efficiency_study(args.g, args.eps, args.n, args.reps, seed=seed, workers=_threads())
        body = res.to_dict()
        body["table"] = [{"estimator": k, "n_var": res.n_var[k], "formula": res.formulas[k],
                          "ratio": res.ratios()[k]}
                         for k in ("ml", "inverse_censoring_km", "inverse_yhat")]
        if args.csv:
            with open(args.csv, "w", encoding="utf-8") as fh:
                keys = list(res.estimates)
                fh.write(",".join(keys) + "\n")
                for row in zip(*(res.estimates[k] for k in keys)):
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
        return body
    fam = _family(args)
    truth = make_truth(args.truth, censor_rate=args.censor_rate, shape=args.shape, rate=args.rate)
    res = coverage_study(truth, fam, args.n, args.reps, levels=args.levels, seed=seed, T=args.T,
                         scenario=f"{args.truth}->{fam.name}", workers=_threads())
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(",".join(fam.param_names) + "\n")
            for row in res.estimates:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return res.to_dict()


def cmd_distance(args):
    from .distance import cox_distance, hazard_distance, kl_identity_check, make_truth
    from .fit import least_false_oracle
    fam = _family(args)
    truth = make_truth(args.truth, censor_rate=args.censor_rate, shape=args.shape, rate=args.rate,
                       beta0=args.beta0 if args.check == "cox" else None)
    theta = np.array(args.theta) if args.theta is not None else None
    if args.check == "kl":
        theta = np.full(fam.dim, 2.0) if theta is None else theta
        r = kl_identity_check(truth, fam, theta, args.T)
        print(f"KL identity residual: {r.residual:.3e}", file=sys.stderr)
        return {"check": "kl", "theta": theta.tolist(), "T": args.T, "distance": r.distance,
                "kl": r.kl, "boundary_term": r.boundary, "residual": r.residual}
    if args.check in ("hazard", "oracle"):
        o = least_false_oracle(fam, truth.alpha0, truth.y, args.T)
        body = {"check": args.check, "theta0": o.theta0.tolist(), "distance_at_theta0": o.distance,
                "T": args.T}
        if theta is not None:
            body["theta"] = theta.tolist()
            body["distance"] = hazard_distance(truth, fam, theta, T=args.T)
        return body
    beta = np.array(args.beta if args.beta is not None else [args.beta0])
    body = {"check": "cox", "beta": beta.tolist(), "T": args.T,
            "semiparametric_distance": cox_distance(truth, beta, args.T)}
    if theta is not None:
        body["parametric_distance"] = cox_distance(truth, beta, args.T, mode="parametric",
                                                   fam=fam, theta=theta)
    return body


COMMANDS = {"fit": cmd_fit, "diagnose": cmd_diagnose, "bootstrap": cmd_bootstrap,
            "cox": cmd_cox, "local": cmd_local, "simulate": cmd_simulate,
            "distance": cmd_distance}


def parse_args(argv=None):
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = ap.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sp = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
        sp.set_defaults(**cfg)
        args = ap.parse_args(argv)
    return args


def main(argv=None):
    try:
        args = parse_args(argv)
        body = COMMANDS[args.command](args)
        report.write(_envelope(args, body), args.output)
        return EXIT_OK
    except SystemExit as exc:  # argparse usage errors
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    except (ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"lfsurv: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, BoundaryError, SingularMatrixError) as exc:
        print(f"lfsurv: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except QuadratureError as exc:
        print(f"lfsurv: numerical integration failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except LFSurvError as exc:
        print(f"lfsurv: error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
