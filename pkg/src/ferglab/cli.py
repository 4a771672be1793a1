"""Command-line front end: ``ferglab <certify|contract|reach|reproduce>``.

Exit codes: 0 all requested checks pass, 1 a bound was violated or a
required condition failed, 2 configuration error, 3 precondition unmet.
"""

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certify import certify
from .errors import AtomCapExceeded, ConfigError, DimensionError, MetricError, StochasticityError
from .filtering import DEFAULT_ATOM_CAP
from .model import config_hash, ex1_config, gaussian_config, load_model, model_to_config
from .simulate import (PreconditionError, bl_regularity_test, dirichlet_pairs, mc_decay, n_step_decay,
                       occupation_distance, one_step_contraction_test, reachable_state_trace)

log = logging.getLogger("ferglab")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3
CSV_COLUMNS = ("n", "distance", "bound", "stderr")
SEEDS = {"contract": 0, "reach": 0, "occupation": 7}
# each lifted BL ground cost is a dense LP of size ~n_states**2
BL_MAX_STATES = 16


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def make_manifest(command, model, seed):
    doc = model.config if model.config is not None else model_to_config(model)
    return {"command": command, "config_hash": config_hash(doc), "seed": seed,
            "tool_version": __version__, "started": _now()}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path, manifest, payload):
    manifest = dict(manifest, finished=_now())
    path.write_text(json.dumps(_jsonable({"manifest": manifest, "result": payload}), indent=2, sort_keys=True) + "\n")


def write_csv(path, manifest, columns, rows):
    # timestamps are left out so that reruns are byte-identical
    stamp = {k: manifest[k] for k in ("command", "config_hash", "seed", "tool_version")}
    with path.open("w", newline="") as fh:
        for k, v in stamp.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def _load(path):
    try:
        return load_model(path)
    except (ConfigError, StochasticityError, MetricError, DimensionError) as exc:
        raise CliError(f"config error: {exc}", EXIT_CONFIG) from exc


def parse_prior(spec, n):
    """``uniform``, ``delta:i``, ``dirichlet:seed`` or comma-separated weights."""
    spec = spec.strip()
    try:
        if spec == "uniform":
            return np.full(n, 1.0 / n)
        if spec.startswith("delta:"):
            i = int(spec.split(":", 1)[1])
            if not 0 <= i < n:
                raise ValueError(f"state {i} out of range")
            return np.eye(n)[i]
        if spec.startswith("dirichlet:"):
            rng = np.random.default_rng(int(spec.split(":", 1)[1]))
            return rng.dirichlet(np.ones(n))
        w = np.array([float(v) for v in spec.split(",")])
    except ValueError as exc:
        raise CliError(f"bad prior {spec!r}: {exc}", EXIT_CONFIG) from exc
    if w.size != n or (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
        raise CliError(f"prior {spec!r} is not a probability vector on {n} states", EXIT_CONFIG)
    return w


# -- commands ----------------------------------------------------------------

def run_certify(model, kr_depth=8):
    return certify(model, kr_depth=kr_depth)


def cmd_certify(args):
    model = _load(args.config)
    report = run_certify(model, args.kr_depth)
    manifest = make_manifest("certify", model, 0)
    payload = report.to_dict()
    if args.format == "json":
        text = json.dumps(_jsonable({"manifest": dict(manifest, finished=_now()), "result": payload}),
                          indent=2, sort_keys=True)
    else:
        text = format_report(report)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    required = [r.strip() for r in args.require.split(",") if r.strip()]
    checks = report.checks()
    unknown = [r for r in required if r not in checks]
    if unknown:
        raise CliError(f"unknown checks {unknown}; choose from {sorted(checks)}", EXIT_CONFIG)
    return EXIT_OK if all(checks[r] for r in required) else EXIT_VIOLATION


def format_report(report):
    lines = [f"model            {report.model_name}",
             f"alpha            {report.alpha:.12g}   (grid {report.alpha_grid:.12g})",
             f"D                {report.D:.12g}",
             f"delta(T)         {report.delta_T:.12g}",
             f"delta(Q)         {report.delta_Q:.12g}",
             f"beta             {report.beta:.12g}   margin {report.margin:.6g}",
             f"assumption 1     {'pass' if report.assumption1_pass else 'FAIL'}"]
    if report.corollary_value is not None:
        lines.append(f"corollary        {report.corollary_value:.12g} < 1: "
                     f"{'pass' if report.corollary_finite_pass else 'FAIL'}")
    lines.append(f"nondegenerate    {report.nondegenerate}")
    if report.mixing is not None:
        lines.append(f"mixing eps_T     {report.mixing[0]:.12g}")
    if report.obs_floor is not None:
        lines.append(f"obs floor        y={report.obs_floor[0]} eps={report.obs_floor[1]:.12g}")
    if report.constant_obs is not None:
        lines.append(f"constant obs     y={report.constant_obs[0]} eps={report.constant_obs[1]:.12g}")
    if report.clm_rate_c is not None:
        lines.append(f"hilbert rate c   {report.clm_rate_c:.12g}")
    if report.kr_rank1 is not None:
        lines.append(f"rank-1 witness   {report.kr_rank1.observation_string} "
                     f"(sigma_2 {report.kr_rank1.second_singular_value:.3g})")
    lines.extend(f"note: {n}" for n in report.notes)
    return "\n".join(lines)


def run_contract(model, out, pairs=200, nmax=5, seed=0, decay_pairs=20, bl_pairs=50, bl_nmax=4,
                 mc_paths=1000, atom_cap=DEFAULT_ATOM_CAP):
    out.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("contract", model, seed)
    report = certify(model)
    notes = []
    ok = True

    one = one_step_contraction_test(model, pairs, seed, beta=report.beta)
    ok &= one.passed

    n = model.n_states
    z0, z1 = np.eye(n)[0], np.eye(n)[n - 1]
    try:
        curve = n_step_decay(model, z0, z1, nmax, atom_cap=atom_cap, beta=report.beta)
        ok &= not curve.violations
        random_curves = []
        for k, (a, b) in enumerate(dirichlet_pairs(n, decay_pairs, seed + 1)):
            c = n_step_decay(model, a, b, nmax, atom_cap=atom_cap, beta=report.beta)
            ok &= not c.violations
            random_curves.append({"pair": k, "violations": c.violations, "fitted_rate": c.fitted_rate,
                                  "max_ratio_to_bound": float(np.max(c.distances / np.maximum(c.bounds, 1e-300)))})
    except AtomCapExceeded as exc:
        msg = f"exact decay infeasible ({exc}); fell back to Monte Carlo"
        log.warning(msg)
        notes.append(msg)
        curve = mc_decay(model, z0, z1, nmax, n_paths=mc_paths, seed=seed, beta=report.beta)
        random_curves = []

    bl_n = min(bl_nmax, nmax)
    while bl_n > 0 and model.n_obs ** bl_n > atom_cap:
        bl_n -= 1
    if model.n_states > BL_MAX_STATES or bl_pairs == 0 or bl_n == 0:
        msg = f"BL regularity skipped ({model.n_states} states, limit {BL_MAX_STATES})"
        log.warning(msg)
        notes.append(msg)
        bl = None
    else:
        bl = bl_regularity_test(model, bl_n, bl_pairs, seed, alpha=report.alpha)
        ok &= bl.passed

    manifest["notes"] = notes
    write_json(out / "contract.json", manifest, {
        "beta": report.beta, "one_step": one.to_dict(), "decay": curve.to_dict(),
        "random_decay": random_curves, "bl_regularity": None if bl is None else dict(bl.to_dict(), n_max=bl_n), "passed": bool(ok)})
    write_csv(out / "decay.csv", manifest, CSV_COLUMNS, curve.rows())
    write_csv(out / "one_step.csv", manifest, ("pair", "ratio", "bound"),
              ((k, float(r), one.bound) for k, r in enumerate(one.ratios)))
    return ok, {"one_step": one, "decay": curve, "bl": bl, "notes": notes}


def cmd_contract(args):
    model = _load(args.config)
    ok, _ = run_contract(model, Path(args.out), args.pairs, args.nmax, args.seed, args.decay_pairs,
                         args.bl_pairs, args.bl_nmax, args.mc_paths)
    return EXIT_OK if ok else EXIT_VIOLATION


def limit_hash(limit, decimals=9):
    return hashlib.sha256(np.round(np.asarray(limit), decimals).tobytes()).hexdigest()[:16]


def run_reach(model, out, obs, priors, max_iter=1000):
    out.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("reach", model, 0)
    summaries = []
    ok = True
    for k, spec in enumerate(priors):
        mu = parse_prior(spec, model.n_states)
        try:
            tr = reachable_state_trace(model, mu, obs, max_iter=max_iter)
        except PreconditionError as exc:
            raise CliError(f"precondition unmet: {exc} (min column entry {exc.min_entry:g})",
                           EXIT_PRECONDITION) from exc
        ok &= not tr.violations
        rows = ((i, float(tr.hilbert_gaps[i - 1]) if i else float("nan"), float(tr.tv_to_limit[i]))
                for i in range(tr.iterates.shape[0]))
        write_csv(out / f"trace_{k}.csv", manifest, ("iteration", "hilbert_gap", "tv_to_limit"), rows)
        summaries.append(dict(tr.to_dict(), prior=spec, limit_hash=limit_hash(tr.limit)))
    hashes = {s["limit_hash"] for s in summaries}
    write_json(out / "reach.json", manifest, {"observation": obs, "traces": summaries,
                                              "limits_agree": len(hashes) == 1, "passed": bool(ok)})
    return ok, summaries


def cmd_reach(args):
    model = _load(args.config)
    obs = args.obs
    if obs not in range(model.n_obs):
        if str(obs) in model.obs_labels:
            obs = model.obs_labels.index(str(obs))
        else:
            raise CliError(f"observation {args.obs!r} not in model", EXIT_CONFIG)
    ok, _ = run_reach(model, Path(args.out), obs, args.prior or ["uniform"], args.max_iter)
    return EXIT_OK if ok else EXIT_VIOLATION


EXAMPLES = {
    "ex1": lambda: ex1_config(0.1),
    "gaussian": lambda: gaussian_config(1.3, 64),
}


def run_reproduce(example, out):
    doc = EXAMPLES[example]()
    model = load_model(doc)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    report = certify(model, kr_depth=12 if example == "ex1" else 6)
    manifest = make_manifest("reproduce", model, SEEDS["contract"])
    write_json(out / "certify.json", manifest, report.to_dict())
    ok, contract = run_contract(model, out / "contract", seed=SEEDS["contract"])
    reach_ok, traces = run_reach(model, out / "reach", 0, ["delta:0", "uniform"])
    summary = {
        "example": example, "alpha": report.alpha, "alpha_grid": report.alpha_grid,
        "alpha_analytic": report.alpha_analytic, "D": report.D, "delta_T": report.delta_T,
        "delta_Q": report.delta_Q, "beta": report.beta, "assumption1_pass": report.assumption1_pass,
        "corollary_value": report.corollary_value, "corollary_finite_pass": report.corollary_finite_pass,
        "one_step_max_ratio": contract["one_step"].max_ratio,
        "decay_fitted_rate": contract["decay"].fitted_rate,
        "bl_max_ratio": contract["bl"].max_ratio if contract["bl"] else None,
        "bl_bound": contract["bl"].bound if contract["bl"] else None,
        "contract_passed": bool(ok), "reach_passed": bool(reach_ok),
        "reach_limits_agree": len({t["limit_hash"] for t in traces}) == 1,
    }
    if example == "ex1":
        occ = occupation_distance(model, np.eye(4)[0], np.eye(4)[3], [250, 500, 1000, 2000],
                                  n_paths=500, seed=SEEDS["occupation"])
        summary["occupation"] = occ.to_dict()
        write_csv(out / "occupation.csv", manifest, ("N", "distance", "stderr"),
                  zip(occ.N_values.tolist(), occ.distances.tolist(), occ.stderr.tolist()))
    write_json(out / "summary.json", manifest, summary)
    return ok and reach_ok, summary


def cmd_reproduce(args):
    out = Path(args.out) if args.out else Path(f"bundle_{args.example}")
    ok, _ = run_reproduce(args.example, out)
    return EXIT_OK if ok else EXIT_VIOLATION


def build_parser():
    p = argparse.ArgumentParser(prog="ferglab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ferglab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="compute constants and check sufficient conditions")
    c.add_argument("config")
    fmt = c.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="format", action="store_const", const="json")
    fmt.add_argument("--text", dest="format", action="store_const", const="text")
    c.add_argument("--out")
    c.add_argument("--require", default="assumption1",
                   help="comma-separated checks that must pass (assumption1, corollary, nondegenerate, "
                        "mixing, positive_eq, kr)")
    c.add_argument("--kr-depth", type=int, default=8)
    c.set_defaults(func=cmd_certify, format="text")

    c = sub.add_parser("contract", help="exact contraction, decay and regularity experiments")
    c.add_argument("config")
    c.add_argument("--pairs", type=int, default=200)
    c.add_argument("--nmax", type=int, default=5)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--decay-pairs", type=int, default=20)
    c.add_argument("--bl-pairs", type=int, default=50)
    c.add_argument("--bl-nmax", type=int, default=4)
    c.add_argument("--mc-paths", type=int, default=1000)
    c.add_argument("--out", default="contract_out")
    c.set_defaults(func=cmd_contract)

    c = sub.add_parser("reach", help="filter iterates under a constant observation")
    c.add_argument("config")
    c.add_argument("--obs", required=True, type=int)
    c.add_argument("--prior", action="append",
                   help="uniform | delta:i | dirichlet:seed | w1,w2,...  (repeatable)")
    c.add_argument("--max-iter", type=int, default=1000)
    c.add_argument("--out", default="reach_out")
    c.set_defaults(func=cmd_reach)

    c = sub.add_parser("reproduce", help="run the full bundle for a built-in example")
    c.add_argument("example", choices=sorted(EXAMPLES))
    c.add_argument("--out")
    c.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"ferglab: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
