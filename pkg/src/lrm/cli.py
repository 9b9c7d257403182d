"""Command-line front end: ``lrm <command> [flags]``.

Exit status is 0 on success, 2 when flags fail validation and 1 on runtime
failures; every error goes to stderr as one line starting ``ERROR <code>:``.
The seed comes from ``--seed``, else the ``LRM_SEED`` environment variable,
else 0.
"""

import argparse
import os
import sys

from .calibration import BOUND_TAGS, CalibrationParams, effective_noise, lambda_auto, p_auto
from .datagen import SCENARIOS, BoundedBernstein, Gaussian, gen_dataset, gen_ground_truth, gen_masks
from .errors import ConfigurationError, InvalidParameterError, LrmError
from .experiments import NOISE_BOUNDS, StudyConfig, coverage_study, noise_study, rate_study
from .io import load_dataset, save_dataset, write_json
from .lowerbound import vg_packing
from .metrics import EXPLICIT_BOUNDS
from .solver import EstimatorConfig, fit

__all__ = ["main", "build_parser", "resolve_seed"]

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def resolve_seed(flag_value, environ=None):
    """Seed precedence: explicit flag, then ``LRM_SEED``, then 0."""
    if flag_value is not None:
        return flag_value
    env = (os.environ if environ is None else environ).get("LRM_SEED")
    if env is None or env == "":
        return 0
    try:
        seed = int(env)
    except ValueError:
        raise UsageError(f"LRM_SEED must be an integer, got {env!r}") from None
    if seed < 0:
        raise UsageError("LRM_SEED must be nonnegative")
    return seed


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return value


def _pos_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _p_value(text):
    if text == "auto":
        return text
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("p must be 'auto' or a number in (0, 1]")
    return value


def _lambda_value(text):
    if text.startswith("auto:"):
        if text[5:] not in BOUND_TAGS:
            raise argparse.ArgumentTypeError(f"unknown bound tag {text[5:]!r}")
        return text
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError("lambda must be nonnegative or auto:<tag>")
    return value


def _n_list(text):
    values = [int(v) for v in text.split(",") if v]
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("expected comma-separated positive integers")
    return values


def _add_calibration(p):
    g = p.add_argument_group("calibration constants")
    g.add_argument("--D", dest="d_conf", type=float, default=2.0, help="confidence constant D")
    g.add_argument("--H", dest="h", type=float, help="Bernstein noise bound H")
    g.add_argument("--b", dest="b_conf", type=float, help="constant b of tau3")
    g.add_argument("--a", dest="a_conf", type=float, help="constant a > 1 of tau6")
    g.add_argument("--theta", dest="theta_conf", type=float, default=1.0, help="constant of tau7")


def _add_study(p, bound_choices=None):
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--m", type=_pos_int, required=True)
    p.add_argument("--T", dest="t", type=_pos_int, required=True)
    p.add_argument("--r", type=_nonneg_int, required=True)
    p.add_argument("--N", dest="n_grid", type=_n_list, required=True,
                   help="comma-separated, strictly increasing sample sizes")
    p.add_argument("--trials", type=_pos_int, default=20)
    p.add_argument("--p", type=_p_value, default=1.0)
    p.add_argument("--lambda", dest="lam", type=_lambda_value, default="auto:tau1")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--noise", choices=("gaussian", "bernstein"), default="gaussian")
    p.add_argument("--spectral-scale", type=float, default=1.0)
    p.add_argument("--seed", type=_nonneg_int)
    p.add_argument("--jobs", type=_pos_int, default=1)
    p.add_argument("--summary", help="also write the per-N summary CSV here")
    p.add_argument("-o", "--out", required=True, help="per-trial CSV output path")
    if bound_choices:
        p.add_argument("--bound", choices=bound_choices, required=True)
    _add_calibration(p)


def build_parser():
    parser = _Parser(prog="lrm", description="Low-rank trace regression toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--scenario", choices=SCENARIOS, required=True)
    g.add_argument("--m", type=_pos_int, required=True)
    g.add_argument("--T", dest="t", type=_pos_int, required=True)
    g.add_argument("--r", type=_nonneg_int, required=True)
    g.add_argument("--N", dest="n_obs", type=_pos_int, required=True,
                   help="number of observations (a multiple of T for multitask)")
    g.add_argument("--sigma", type=float, default=1.0, help="noise scale; 0 for noiseless")
    g.add_argument("--noise", choices=("gaussian", "bernstein"), default="gaussian")
    g.add_argument("--H", dest="h", type=float, help="Bernstein bound (default sigma)")
    g.add_argument("--spectral-scale", type=float, default=1.0)
    g.add_argument("--seed", type=_nonneg_int)
    g.add_argument("-o", "--out", required=True)

    f = sub.add_parser("fit", help="fit the estimator to a dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--p", type=_p_value, default=1.0)
    f.add_argument("--lambda", dest="lam", type=_lambda_value, required=True)
    f.add_argument("--sigma", type=float, help="noise level for automatic lambda")
    f.add_argument("--max-iters", type=_pos_int, default=5000)
    f.add_argument("--rel-tol", type=float, default=1e-9)
    f.add_argument("--restarts", type=_pos_int, default=5)
    f.add_argument("--step", choices=("fixed", "backtracking"), default="fixed")
    f.add_argument("--seed", type=_nonneg_int)
    f.add_argument("-o", "--out", required=True)
    _add_calibration(f)

    _add_study(sub.add_parser("rates", help="prediction error rate study"))
    _add_study(sub.add_parser("coverage", help="bound coverage study"), EXPLICIT_BOUNDS)
    _add_study(sub.add_parser("noise", help="noise matrix concentration study"), NOISE_BOUNDS)

    k = sub.add_parser("pack", help="greedy Varshamov-Gilbert packing")
    k.add_argument("--n-bits", type=_pos_int, required=True)
    k.add_argument("--min-dist", type=_pos_int, required=True)
    k.add_argument("--target", type=_pos_int, required=True)
    k.add_argument("--seed", type=_nonneg_int)
    k.add_argument("-o", "--out", required=True)

    c = sub.add_parser("calibrate", help="print an effective noise level (lambda for thm4i)")
    c.add_argument("--bound", choices=BOUND_TAGS, required=True)
    c.add_argument("--sigma", type=float)
    c.add_argument("--m", type=_pos_int, required=True)
    c.add_argument("--T", dest="t", type=_pos_int, required=True)
    c.add_argument("--N", dest="n_obs", type=_pos_int, required=True)
    c.add_argument("--p", type=float)
    c.add_argument("--phi", dest="phi_max1", type=float, help="phi_max(1) of the design")
    c.add_argument("--s-row", type=float)
    c.add_argument("--h-row", type=float)
    c.add_argument("--s-col", type=float)
    c.add_argument("--h-col", type=float)
    c.add_argument("--gram-cross", dest="gram_max_cross", type=float)
    c.add_argument("--lambda", dest="show_lambda", action="store_true",
                   help="print lambda instead of tau")
    _add_calibration(c)
    return parser


def _check_out(path):
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise UsageError(f"cannot write to {path}")


def _calibration(args, sigma):
    return CalibrationParams(sigma=sigma, d_conf=args.d_conf, h=args.h, b_conf=args.b_conf,
                             a_conf=args.a_conf, theta_conf=args.theta_conf)


def _noise(kind, sigma, h):
    if sigma == 0:
        return None
    if kind == "bernstein":
        return BoundedBernstein(sigma, sigma if h is None else h)
    return Gaussian(sigma)


def _cmd_gen(args, seed):
    _check_out(args.out)
    if args.sigma < 0:
        raise InvalidParameterError("sigma must be nonnegative")
    noise = _noise(args.noise, args.sigma, args.h)
    n_per_task = None
    count = args.n_obs
    if args.scenario == "multitask":
        if args.n_obs % args.t:
            raise InvalidParameterError("multitask N must be a multiple of T")
        n_per_task = count = args.n_obs // args.t
    truth = gen_ground_truth(args.m, args.t, args.r, args.spectral_scale, seed)
    op = gen_masks(args.scenario, args.m, args.t, count, seed + 1)
    data = gen_dataset(truth, op, noise, seed + 2, args.scenario, n_per_task)
    data.seed = seed
    save_dataset(data, args.out)


def _cmd_fit(args, seed):
    _check_out(args.out)
    data = load_dataset(args.data)
    p = p_auto(data.n, data.m, data.t) if args.p == "auto" else args.p
    sigma = args.sigma if args.sigma is not None else (data.sigma or None)
    config = EstimatorConfig(p=p, lam=args.lam, calibration=_calibration(args, sigma),
                             max_iters=args.max_iters, rel_tol=args.rel_tol,
                             restarts=args.restarts, step=args.step, seed=seed)
    result = fit(data, config)
    out = result.to_dict()
    out["p"] = p
    write_json(out, args.out)


def _cmd_study(args, seed, kind):
    _check_out(args.out)
    if args.summary:
        _check_out(args.summary)
    p = p_auto(args.n_grid[0], args.m, args.t) if args.p == "auto" else args.p
    cfg = StudyConfig(args.scenario, args.m, args.t, args.r, args.n_grid, trials=args.trials,
                      p=p, lam=args.lam, sigma=args.sigma, noise=args.noise, h=args.h,
                      d_conf=args.d_conf, master_seed=seed, parallelism=args.jobs,
                      spectral_scale=args.spectral_scale)
    if kind == "rates":
        result = rate_study(cfg)
    elif kind == "coverage":
        result = coverage_study(cfg, args.bound)
    else:
        result = noise_study(cfg, args.bound)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(result.to_csv())
    if args.summary:
        with open(args.summary, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.summary_csv())


def _cmd_pack(args, seed):
    _check_out(args.out)
    if args.min_dist > args.n_bits:
        raise InvalidParameterError("min-dist cannot exceed n-bits")
    words = vg_packing(args.n_bits, args.min_dist, args.target, seed)
    write_json({"n_bits": args.n_bits, "min_dist": args.min_dist, "seed": seed,
                "codewords": words.astype(int).tolist()}, args.out)


def _cmd_calibrate(args, _seed):
    params = _calibration(args, args.sigma).with_(
        m=args.m, t=args.t, n_obs=args.n_obs, p=args.p, phi_max1=args.phi_max1,
        s_row=args.s_row, h_row=args.h_row, s_col=args.s_col, h_col=args.h_col,
        gram_max_cross=args.gram_max_cross)
    if args.bound == "thm4i" or args.show_lambda:
        value = lambda_auto(args.bound, params)
    else:
        value = effective_noise(args.bound, params)
    print(repr(float(value)))


_COMMANDS = {
    "gen": _cmd_gen,
    "fit": _cmd_fit,
    "rates": lambda a, s: _cmd_study(a, s, "rates"),
    "coverage": lambda a, s: _cmd_study(a, s, "coverage"),
    "noise": lambda a, s: _cmd_study(a, s, "noise"),
    "pack": _cmd_pack,
    "calibrate": _cmd_calibrate,
}


def _fail(code, message):
    print(f"ERROR {code}: {message}", file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        seed = resolve_seed(getattr(args, "seed", None))
    except UsageError as exc:
        return _fail(EXIT_USAGE, str(exc))
    try:
        _COMMANDS[args.command](args, seed)
    except (UsageError, InvalidParameterError, ConfigurationError) as exc:
        return _fail(EXIT_USAGE, str(exc))
    except (LrmError, OSError, ValueError) as exc:
        return _fail(EXIT_RUNTIME, str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
