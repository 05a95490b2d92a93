"""Command-line frontend producing machine-readable JSON reports.

Exit codes: 0 success, 1 input error (unreadable or malformed model, bad
arguments), 2 infeasible / no certificate / failed verification.  Reports
are byte-identical for identical configuration and seed, except for the
timestamp field.  Mode indices are 1-based in all CLI-facing text.
"""

import argparse
import csv
import json
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .balred import compute_pair, reduce_model
from .embeddings import build_uncertain_embedding, check_uncertain_minimality_equivalence
from .errors import InfeasibleError, LssError, ModelFormatError
from .gain import l2_gain_upper_bound
from .grammians import check_membership, singular_values
from .model import load_model, validate_model
from .realization import is_minimal
from .simulate import (
    decay_horizon,
    empirical_gain,
    random_input_batch,
    random_switching,
    signal_l2_norm,
    simulate,
    steps_from_signal,
    verify_error_bound,
    zoh_input_norm,
)
from .stability import check_quadratic_stability, check_strong_stability

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2


def _mat(M):
    return [[float(x) for x in row] for row in np.atleast_2d(np.asarray(M))]


def _vec(v):
    return [float(x) for x in np.asarray(v).ravel()]


def _model_info(model, path):
    return {
        "path": str(path),
        "name": model.name,
        "time_domain": model.time_domain,
        "order": model.n,
        "modes": model.num_modes,
        "inputs": model.m,
        "outputs": model.p,
    }


def _emit(report, out_path):
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    else:
        print(text)


def _config_dict(args, keys):
    return {k: getattr(args, k.replace("-", "_")) for k in keys}


def _report(command, args, model, result, status, config_keys):
    return {
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "status": status,
        "model": _model_info(model, args.model),
        "config": _config_dict(args, config_keys),
        "result": result,
    }


def _default_horizon(model, args):
    if args.horizon is not None:
        return args.horizon if not model.is_discrete else int(args.horizon)
    cert = check_quadratic_stability(model)
    if cert is None:
        return 200 if model.is_discrete else 20.0
    return decay_horizon(model, cert, h=None if model.is_discrete else args.step)


def _load_pair(path, n):
    """Explicit grammian pair from a JSON file {"P": [[...]], "Q": [[...]]};
    lets a report reproduce a hand-picked balanced pair exactly."""
    from .grammians import GrammianPair

    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    P = np.array(data["P"], dtype=float)
    Q = np.array(data["Q"], dtype=float)
    if P.shape != (n, n) or Q.shape != (n, n):
        raise ModelFormatError(f"pair file matrices must be {n}x{n}")
    return GrammianPair(P, Q, "manual")


def cmd_check(args, model):
    cert = check_quadratic_stability(model, margin=args.margin)
    result = {
        "minimal": bool(is_minimal(model)),
        "quadratically_stable": cert is not None,
    }
    if cert is not None:
        result["certificate"] = _mat(cert.P)
        result["certificate_margin"] = float(cert.margin)
    if model.is_discrete:
        rep = check_strong_stability(model)
        result["strong_stability"] = {
            "radius": float(rep.kronecker_spectral_radius),
            "stable": bool(rep.stable),
            "matrix_dimension": int(rep.matrix_dimension),
        }
    status = "ok" if cert is not None else "infeasible"
    return result, status


def cmd_grammians(args, model):
    pair = compute_pair(model, source=args.grammians, margin=args.margin)
    sig = singular_values(pair)
    result = {
        "provenance": pair.provenance,
        "margin": float(pair.margin),
        "trace_tightened": args.grammians == "lmi",
        "controllability": _mat(pair.P_ctrl),
        "observability": _mat(pair.Q_obs),
        "sigmas": _vec(sig.values),
        "residuals": {
            "controllability": _vec(check_membership(model, pair.P_ctrl, "C").mode_residuals),
            "observability": _vec(check_membership(model, pair.Q_obs, "O").mode_residuals),
        },
    }
    return result, "ok"


def cmd_reduce(args, model):
    pair = _load_pair(args.pair_file, model.n) if args.pair_file else None
    res = reduce_model(
        model,
        order=args.order,
        bound_budget=args.bound,
        pair=pair,
        source=args.grammians,
        minimize_first=args.minimize_first,
        force_ties=args.force_ties,
        margin=args.margin,
    )
    bal = res.balancing
    reduced = res.reduced_model
    result = {
        "original_order": int(res.extras.get("original_order", model.n)),
        "retained": int(res.retained),
        "sigmas": _vec(res.sigmas),
        "apriori_bound": float(res.apriori_bound),
        "transform": _mat(bal.transform.S),
        "transform_condition": float(bal.transform.condition_estimate),
        "grammian_provenance": bal.pair.provenance,
        "strict_pair": bool(res.strict_pair),
        "minimized_first": bool(res.extras.get("minimized_first", False)),
        "reduced_model": {
            "time_domain": reduced.time_domain,
            "modes": [
                {"A": _mat(A), "B": _mat(B), "C": _mat(C)}
                for A, B, C in zip(reduced.A, reduced.B, reduced.C)
            ],
        },
        "residuals": {
            "reduced_controllability": _vec(
                check_membership(reduced, res.lambda1, "C").mode_residuals
            ),
            "reduced_observability": _vec(
                check_membership(reduced, res.lambda1, "O").mode_residuals
            ),
        },
    }
    return result, "ok"


def cmd_gain(args, model):
    history = []
    gamma_star, cert = l2_gain_upper_bound(model, tol=args.tol, history=history)
    result = {
        "gamma_star": float(gamma_star),
        "iterations": len(history),
        "residuals": _vec(cert.residuals),
        "bisection": [{"gamma": g, "feasible": f} for g, f in history],
    }
    return result, "ok"


def cmd_simulate(args, model):
    rng = np.random.default_rng(args.seed)
    horizon = _default_horizon(model, args)
    h = None if model.is_discrete else args.step
    signal = random_switching(model.num_modes, model.time_domain, rng, horizon, h=h)
    steps = steps_from_signal(signal, h=h)
    u = random_input_batch(rng, 1, steps.size, model.m, model.time_domain, h=h)[0]
    traj = simulate(model, u, signal, h=h)
    ynorm = signal_l2_norm(traj.outputs, h=h)
    result = {
        "horizon": float(horizon),
        "steps": int(steps.size),
        "output_l2_norm": float(ynorm),
        "input_l2_norm": float(zoh_input_norm(traj.inputs, h=h)),
        "switching": {
            "modes": [int(q) + 1 for q in signal.modes],
            "dwells": [float(d) for d in signal.dwells] if signal.dwells else None,
        },
    }
    if args.csv:
        _write_csv(args.csv, traj, model)
        result["csv"] = args.csv
    return result, "ok"


def _write_csv(path, traj, model):
    N = traj.inputs.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = (
            ["t"]
            + [f"u{i + 1}" for i in range(model.m)]
            + [f"x{i + 1}" for i in range(model.n)]
            + [f"y{i + 1}" for i in range(model.p)]
        )
        writer.writerow(header)
        for t in range(N):
            row = (
                [repr(float(traj.times[t]))]
                + [repr(float(v)) for v in traj.inputs[t]]
                + [repr(float(v)) for v in traj.states[t]]
                + [repr(float(v)) for v in traj.outputs[t]]
            )
            writer.writerow(row)


def cmd_verify_bound(args, model):
    pair = _load_pair(args.pair_file, model.n) if args.pair_file else None
    res = reduce_model(
        model,
        order=args.order,
        bound_budget=args.bound,
        pair=pair,
        source=args.grammians,
        minimize_first=args.minimize_first,
        force_ties=args.force_ties,
        margin=args.margin,
    )
    horizon = _default_horizon(model, args)
    h = None if model.is_discrete else args.step
    report = verify_error_bound(model, res, args.trials, horizon, args.seed, h=h)
    result = {
        "retained": int(res.retained),
        "apriori_bound": float(report.bound),
        "worst_ratio": float(report.worst_ratio),
        "slack": float(report.slack),
        "trials": int(report.trials),
        "passed": bool(report.passed),
        "grammian_provenance": res.balancing.pair.provenance,
    }
    return result, "ok" if report.passed else "failed"


def cmd_embed(args, model):
    emb = build_uncertain_embedding(model)
    agree = check_uncertain_minimality_equivalence(model)
    rep = check_strong_stability(model)
    result = {
        "embedding_order": int(emb.A.shape[0]),
        "block_dim": int(emb.n),
        "modes": int(emb.D),
        "minimality_agreement": bool(agree),
        "strong_stability_radius": float(rep.kronecker_spectral_radius),
        "empirical_gain_lower_bound": None,
    }
    if args.trials:
        horizon = int(args.horizon) if args.horizon is not None else 50
        est = empirical_gain(model, args.trials, horizon, args.seed)
        result["empirical_gain_lower_bound"] = float(est.lower_bound)
    return result, "ok"


COMMANDS = {
    "check": (cmd_check, ["seed", "margin"]),
    "grammians": (cmd_grammians, ["seed", "margin", "grammians"]),
    "reduce": (cmd_reduce, ["seed", "margin", "grammians", "order", "bound",
                            "minimize_first", "force_ties", "pair_file"]),
    "gain": (cmd_gain, ["seed", "tol"]),
    "simulate": (cmd_simulate, ["seed", "horizon", "step"]),
    "verify-bound": (cmd_verify_bound, ["seed", "margin", "grammians", "order",
                                        "bound", "trials", "horizon", "step",
                                        "minimize_first", "force_ties", "pair_file"]),
    "embed": (cmd_embed, ["seed", "trials", "horizon"]),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lssbalred",
        description="Balanced truncation and gain analysis for linear switched systems",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--model", required=True, help="model JSON file")
        p.add_argument("--out", default=None, help="write the JSON report here")
        p.add_argument("--order", type=int, default=None, help="retained order r")
        p.add_argument("--bound", type=float, default=None, help="error-bound budget")
        p.add_argument("--grammians", default="lmi",
                       choices=["lmi", "nice", "averaged", "certificate"])
        p.add_argument("--minimize-first", action="store_true")
        p.add_argument("--force-ties", action="store_true")
        p.add_argument("--margin", type=float, default=None)
        p.add_argument("--tol", type=float, default=1e-3)
        p.add_argument("--trials", type=int, default=0)
        p.add_argument("--horizon", type=float, default=None)
        p.add_argument("--step", type=float, default=0.01)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--csv", default=None, help="trajectory CSV output (simulate)")
        p.add_argument("--pair-file", default=None,
                       help='explicit grammian pair JSON {"P": ..., "Q": ...}')
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify-bound" and args.trials <= 0:
        args.trials = 50
    try:
        model = load_model(args.model)
    except OSError as exc:
        print(f"error: cannot read model: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ModelFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = validate_model(model)
    if not report.ok:
        print("error: invalid model: " + "; ".join(report.violations), file=sys.stderr)
        return EXIT_INPUT
    fn, config_keys = COMMANDS[args.command]
    try:
        result, status = fn(args, model)
    except InfeasibleError as exc:
        rep = _report(args.command, args, model,
                      {"error": str(exc)}, "infeasible", config_keys)
        _emit(rep, args.out)
        return EXIT_INFEASIBLE
    except (ValueError, LssError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    rep = _report(args.command, args, model, result, status, config_keys)
    _emit(rep, args.out)
    return EXIT_OK if status == "ok" else EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
