"""Command-line front end.

Every subcommand writes one table (CSV with ``#`` metadata, or JSON) to
stdout or ``--output``.  SNRs are always given in dB and converted to linear
power ratios once, here.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 infeasible
constraint.
"""

import argparse
import math
import sys

import numpy as np

from . import __version__
from .errors import InfeasibleError, NoCoexistenceError, NumericalError
from .fixed_point import FREE_ENERGY_FORMS, ChannelPoint, solve
from .load_analysis import (
    alpha_one_load_bounds,
    db_to_linear,
    guaranteed_load,
    load_bounds,
    max_load_for_pe,
    spinodal_loads,
    upsilon,
)
from .scalar_channel import TernaryPrior, error_probability, mmse, mmse_bounds
from .simulator import SimConfig, run_monte_carlo
from .table import Table, to_csv, to_json

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

DEFAULT_ETA_GRID = 200


class DbRange(list):
    """Expanded sweep that remembers the text it was parsed from."""

    def __init__(self, values, text):
        super().__init__(values)
        self.text = text


def parse_range(text):
    """``start:stop:step`` in dB, stop included."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}")
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError("need step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return DbRange([round(start + i * step, 12) for i in range(n)], text)


def _alpha(text):
    a = float(text)
    if not 0.0 <= a <= 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in [0, 1], got {a}")
    return a


def _nonneg(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {v}")
    return v


def _unit_open(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {v}")
    return v


def _snr_list(args):
    if getattr(args, "snr_db", None) is not None:
        return [args.snr_db]
    return args.snr_db_range


def _add_snr(p, single_only=False):
    if single_only:
        p.add_argument("--snr-db", type=float, required=True, help="SNR per active user [dB]")
        return
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--snr-db", type=float, help="single SNR [dB]")
    g.add_argument("--snr-db-range", type=parse_range, metavar="START:STOP:STEP",
                   help="SNR sweep in dB, stop included")


# ------------------------------------------------------------------ commands


def cmd_mmse(args):
    prior = TernaryPrior(args.alpha)
    for db in _snr_list(args):
        s = float(db_to_linear(db))
        row = {"s_db": db, "s_linear": s, "mmse": float(mmse(s, prior))}
        bp = mmse_bounds(s, prior)
        row["lower"] = None if bp.degenerate else float(bp.lower)
        row["upper"] = None if bp.degenerate else float(bp.upper)
        row["error_probability"] = float(error_probability(s, prior)) if args.alpha > 0 else 0.0
        yield row


def cmd_bounds(args):
    prior = TernaryPrior(args.alpha)
    gamma = float(db_to_linear(args.snr_db))
    etas = np.linspace(0.0, 1.0, args.grid + 2)[1:-1]
    ups = upsilon(gamma, etas, prior)
    for eta, u in zip(etas, ups):
        if args.alpha == 1.0:
            bp = alpha_one_load_bounds(gamma, eta)
        elif args.alpha == 0.0:
            bp = None
        else:
            bp = load_bounds(gamma, eta, prior)
        yield {
            "eta": float(eta),
            "upsilon": float(u),
            "L": bp.lower_L if bp else None,
            "U": bp.upper_U if bp else None,
        }


def cmd_solve(args):
    point = ChannelPoint.from_db(args.snr_db, args.alpha, args.beta)
    diagram = solve(point, args.grid, args.free_energy_form)
    for i, s in enumerate(diagram.solutions):
        yield {
            "index": i,
            "eta": s.eta,
            "stability": s.stability.value,
            "region": s.region.value,
            "free_energy": s.free_energy,
            "operational": i == diagram.operational_index,
            "tie": diagram.tie and i == diagram.operational_index,
        }


def cmd_curve(args):
    for db in _snr_list(args):
        d = solve(ChannelPoint.from_db(db, args.alpha, args.beta), args.grid, args.free_energy_form)
        op = d.operational
        yield {
            "snr_db": db,
            "eta_operational": op.eta,
            "n_solutions": d.n_solutions,
            "free_energy": op.free_energy,
            "stability": op.stability.value,
            "region": op.region.value,
        }


def cmd_spinodal(args):
    prior = TernaryPrior(args.alpha)
    for db in _snr_list(args):
        sp = spinodal_loads(float(db_to_linear(db)), prior)
        bm, bM = sp.bounds_at_eta_m, sp.bounds_at_eta_M
        yield {
            "snr_db": db,
            "beta_transition": sp.beta_transition,
            "beta_critical": sp.beta_critical,
            "eta_transition": sp.eta_transition,
            "eta_critical": sp.eta_critical,
            "near_critical": sp.near_critical,
            "eta_m": sp.region.eta_m if sp.region else None,
            "eta_M": sp.region.eta_M if sp.region else None,
            "L_at_eta_m": bm.lower_L if bm else None,
            "U_at_eta_m": bm.upper_U if bm else None,
            "L_at_eta_M": bM.lower_L if bM else None,
            "U_at_eta_M": bM.upper_U if bM else None,
        }


def cmd_maxload(args):
    prior = TernaryPrior(args.alpha)
    for db in _snr_list(args):
        r = max_load_for_pe(args.pe, float(db_to_linear(db)), prior)
        yield {
            "snr_db": db,
            "eta_p": r.eta_p,
            "eta_gc": r.eta_gc,
            "eta_max": r.eta_max,
            "upsilon": r.upsilon,
            "L": r.bounds.lower_L,
            "U": r.bounds.upper_U,
            "limited_by": r.limited_by,
        }


def cmd_guaranteed_load(args):
    prior = TernaryPrior(args.alpha)
    for db in _snr_list(args):
        yield {
            "snr_db": db,
            "epsilon": args.epsilon,
            "beta_guaranteed": guaranteed_load(args.epsilon, float(db_to_linear(db)), prior),
        }


def cmd_simulate(args):
    config = SimConfig(
        K=args.K, N=args.N, gamma=float(db_to_linear(args.snr_db)), alpha=args.alpha,
        frames=args.frames, seed=args.seed, batch=args.batch,
    )
    r = run_monte_carlo(config)
    p = r.predicted
    yield {
        "frames": r.frames_run,
        "beta": config.beta,
        "ser_io": r.ser_io.rate,
        "ser_io_ci95": r.ser_io.ci_half_width,
        "ser_jo": r.ser_jo.rate,
        "ser_jo_ci95": r.ser_jo.ci_half_width,
        "io_false_alarm": r.breakdown_io["false_alarm"],
        "io_missed_detection": r.breakdown_io["missed_detection"],
        "io_flip": r.breakdown_io["flip"],
        "jo_false_alarm": r.breakdown_jo["false_alarm"],
        "jo_missed_detection": r.breakdown_jo["missed_detection"],
        "jo_flip": r.breakdown_jo["flip"],
        "jo_ties": r.jo_ties,
        "empirical_mmse": r.empirical_mmse,
        "empirical_mmse_se": r.mmse_std_error,
        "predicted_eta": p.get("eta_operational"),
        "predicted_pe": p.get("pe"),
        "predicted_mmse": p.get("mmse"),
    }


COMMANDS = {
    "mmse": (cmd_mmse, ["s_db", "s_linear", "mmse", "lower", "upper", "error_probability"],
             {"s_db": "dB", "s_linear": "linear"}),
    "bounds": (cmd_bounds, ["eta", "upsilon", "L", "U"], {}),
    "solve": (cmd_solve, ["index", "eta", "stability", "region", "free_energy", "operational", "tie"],
              {"free_energy": "nats"}),
    "curve": (cmd_curve, ["snr_db", "eta_operational", "n_solutions", "free_energy", "stability", "region"],
              {"snr_db": "dB", "free_energy": "nats"}),
    "spinodal": (cmd_spinodal, ["snr_db", "beta_transition", "beta_critical", "eta_transition",
                                "eta_critical", "near_critical", "eta_m", "eta_M", "L_at_eta_m",
                                "U_at_eta_m", "L_at_eta_M", "U_at_eta_M"], {"snr_db": "dB"}),
    "maxload": (cmd_maxload, ["snr_db", "eta_p", "eta_gc", "eta_max", "upsilon", "L", "U", "limited_by"],
                {"snr_db": "dB"}),
    "guaranteed-load": (cmd_guaranteed_load, ["snr_db", "epsilon", "beta_guaranteed"], {"snr_db": "dB"}),
    "simulate": (cmd_simulate, ["frames", "beta", "ser_io", "ser_io_ci95", "ser_jo", "ser_jo_ci95",
                                "io_false_alarm", "io_missed_detection", "io_flip", "jo_false_alarm",
                                "jo_missed_detection", "jo_flip", "jo_ties", "empirical_mmse",
                                "empirical_mmse_se", "predicted_eta", "predicted_pe", "predicted_mmse"],
                 {}),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cdmaload",
        description="Large-system analysis of joint activity and data detection in random CDMA.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--output", "-o", default="-", help="output path, '-' for stdout")
        return p

    p = add("mmse", "scalar-channel MMSE, its bounds and error probability vs effective SNR")
    p.add_argument("--alpha", type=_alpha, required=True)
    _add_snr(p)

    p = add("bounds", "load function and its high-SNR bounds on an efficiency grid")
    p.add_argument("--alpha", type=_alpha, required=True)
    _add_snr(p, single_only=True)
    p.add_argument("--grid", type=int, default=DEFAULT_ETA_GRID,
                   help=f"interior efficiency points (default {DEFAULT_ETA_GRID})")

    for name, help_text in (("solve", "all fixed points at one operating point"),
                            ("curve", "operational efficiency along an SNR sweep")):
        p = add(name, help_text)
        p.add_argument("--alpha", type=_alpha, required=True)
        p.add_argument("--beta", type=_nonneg, required=True)
        _add_snr(p, single_only=(name == "solve"))
        p.add_argument("--grid", type=int, default=4000, help="root-bracketing grid (default 4000)")
        p.add_argument("--free-energy-form", choices=FREE_ENERGY_FORMS, default="stationary")

    p = add("spinodal", "transition and critical loads vs SNR")
    p.add_argument("--alpha", type=_alpha, required=True)
    _add_snr(p)

    p = add("maxload", "maximum load under an error-probability target")
    p.add_argument("--alpha", type=_alpha, required=True)
    p.add_argument("--pe", type=_unit_open, required=True)
    _add_snr(p)

    p = add("guaranteed-load", "load guaranteeing efficiency 1 - epsilon at high SNR")
    p.add_argument("--alpha", type=_unit_open, required=True)
    p.add_argument("--epsilon", type=_unit_open, required=True)
    _add_snr(p)

    p = add("simulate", "finite-size Monte Carlo with exhaustive optimum detectors")
    p.add_argument("--K", type=int, required=True, help="users (1..12)")
    p.add_argument("--N", type=int, required=True, help="spreading length")
    p.add_argument("--alpha", type=_alpha, required=True)
    _add_snr(p, single_only=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--batch", type=int, default=256, help="frames per vectorized batch (default 256)")
    return parser


def _params(args):
    skip = {"command", "format", "output"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip or v is None:
            continue
        if isinstance(v, DbRange):
            v = v.text
        out[k.replace("_", "-")] = v
    return out


def execute(args, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    func, columns, units = COMMANDS[args.command]
    table = Table(args.command, list(columns), params=_params(args),
                  units=dict(units), version=__version__)
    code = EXIT_OK
    try:
        for row in func(args):
            table.rows.append(row)
    except InfeasibleError as exc:
        table.status, table.message, code = "infeasible", str(exc), EXIT_INFEASIBLE
    except NoCoexistenceError as exc:
        table.status, table.message, code = "infeasible", str(exc), EXIT_INFEASIBLE
    except NumericalError as exc:
        table.status, table.message, code = "failed", str(exc), EXIT_NUMERICAL
    except ValueError as exc:
        table.status, table.message, code = "usage", str(exc), EXIT_USAGE
    text = to_json(table) if args.format == "json" else to_csv(table)
    if args.output == "-":
        stdout.write(text)
    else:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    if code:
        stderr.write(f"cdmaload {args.command}: {table.message}\n")
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "grid", 1000) < 1:
        parser.error("argument --grid: must be positive")
    return execute(args)


if __name__ == "__main__":
    sys.exit(main())
