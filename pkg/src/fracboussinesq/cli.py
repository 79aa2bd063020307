"""Command-line driver.

    fracboussinesq <command> --config <path> --out <dir> [--seeds a,b,c] [--threads k]

Exit codes: 0 success, 1 malformed config, 2 precondition violation,
3 non-convergence (the report is still written), 4 I/O failure.
Every run writes ``manifest.json`` and the normalized ``config.json`` next to
its artifacts; all files are deterministic for identical inputs.
"""

import argparse
import hashlib
import json
import logging
import math
import os
import sys

import numpy as np

from . import _kernels, calculus, semigroup, solver
from .config import AUDIT_FIELDS, parse_config, require, solver_config
from .errors import BlowUpError, ConfigError, PreconditionError
from .reports import config_hash, dumps, ensure_dir, versions, write_csv, write_json
from .snapshots import load_field, save_field
from .spectral import ScalarField, VectorField, committed_seeds, hdot_norm, make_grid

log = logging.getLogger("fracboussinesq")

COMMANDS = ("solve", "calculus-audit", "semigroup-audit", "scaling-check", "constants", "uniqueness-probe")

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_NONCONVERGENCE, EXIT_IO = 0, 1, 2, 3, 4


class NotConverged(Exception):
    pass


class Run:
    """One command invocation: parsed config, seeds and the output directory."""

    def __init__(self, command, cfg, out, seeds):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.seeds = seeds
        self.written = []
        self.used_seeds = None
        self.data_seed = None

    def path(self, name):
        return os.path.join(self.out, name)

    def json(self, name, obj):
        write_json(self.path(name), obj)
        self.written.append(name)

    def csv(self, name, header, rows):
        write_csv(self.path(name), header, rows)
        self.written.append(name)

    def corpus_seeds(self, count):
        seeds = tuple(self.seeds) if self.seeds is not None else committed_seeds(count)
        self.used_seeds = list(seeds)
        return seeds


# --------------------------------------------------------------------------
# solver pipeline shared by several commands
# --------------------------------------------------------------------------

def _constants(run, scfg):
    c = require(run.cfg, "constants")
    if c["source"] == "given":
        return solver.Constants(c["k1"], c["k2"], c["k3"]), []
    corpus = solver.ConstantsCorpus(
        seeds=run.corpus_seeds(c["seed_count"]),
        bands=tuple(tuple(b) for b in c["bands"]),
        kinds=tuple(c["kinds"]),
        N=c["N"],
        M=c["M"],
        scale=c["scale"],
    )
    samples = []
    log.info("estimating constants over %d seeds", len(corpus.seeds))
    return solver.estimate_constants(scfg, corpus, samples), samples


def _constants_dict(k):
    return {"k1": k.k1, "k2": k.k2, "k3": k.k3, "budget": k.budget, "threshold": k.threshold}


def _data(run, scfg, k, config_dir):
    d = require(run.cfg, "data")
    if d["kind"] == "snapshot":
        u0 = load_field(os.path.join(config_dir, d["u0"]))
        th0 = load_field(os.path.join(config_dir, d["theta0"]))
        if u0.grid != scfg.grid or th0.grid != scfg.grid:
            raise PreconditionError("snapshot grid does not match solver.n / solver.N / solver.L")
        return u0, th0
    seed = run.seeds[0] if run.seeds else d["seed"]
    run.data_seed = seed
    return solver.small_data(scfg, k, d["fraction"], seed, tuple(d["band"]), d["split"])


def _norm_rows(state, cfg, residual):
    xi, yi = cfg.x_indices, cfg.y_indices
    u_sup = np.sqrt(semigroup.node_sq_norms(state.u, xi[0]))
    u_l2 = np.sqrt(semigroup.node_sq_norms(state.u, xi[1]))
    u_rate = np.sqrt(semigroup.node_sq_norms(state.u, xi[2], rate=True))
    t_sup = np.sqrt(semigroup.node_sq_norms(state.theta, yi[0]))
    t_l2 = np.sqrt(semigroup.node_sq_norms(state.theta, yi[1]))
    t_rate = np.sqrt(semigroup.node_sq_norms(state.theta, yi[2], rate=True))
    return [(float(t), *(float(a[m]) for a in (u_sup, u_l2, u_rate, t_sup, t_l2, t_rate, residual)))
            for m, t in enumerate(state.times)]


NORM_HEADER = ["t", "u_sup_index", "u_l2_index", "u_rate_index", "theta_sup_index",
               "theta_l2_index", "theta_rate_index", "momentum_residual"]


def _theta_drift(state):
    """Largest relative increase of ||theta||_{L^2} per unit time (0 if monotone)."""
    l2 = solver.theta_l2_series(state)
    if l2[0] == 0:
        return 0.0
    inc = np.diff(l2) / np.diff(state.times)
    return max(0.0, float(np.max(inc))) / float(l2[0])


def _solve_pipeline(run, config_dir, etd_check=True):
    """Constants, data, Picard and the optional ETD cross-check, collected in one dict."""
    scfg = solver_config(run.cfg)
    k, samples = _constants(run, scfg)
    u0, th0 = _data(run, scfg, k, config_dir)
    D = solver.data_norm(u0, th0, scfg, k)
    log.info("picard: K-budget %.6g, data norm %.6g", k.budget, D)
    state, rep = solver.picard_solve(u0, th0, scfg, k)
    out = {
        "config": {"x_indices": list(scfg.x_indices), "y_indices": list(scfg.y_indices), "s0": scfg.s0},
        "constants": _constants_dict(k),
        "data": {"norm": D, "fraction_of_budget": D / k.budget},
        "fixed_point": rep.to_dict(),
        "etd": None,
        "pressure": None,
        "theta_l2_drift": None,
    }
    result = {"scfg": scfg, "k": k, "samples": samples, "state": state, "report": out,
              "u0": u0, "th0": th0, "etd": None}
    if state is None:
        return result
    res = solver.momentum_residual(state, scfg)
    out["pressure"] = {"max_momentum_residual": float(np.max(res)),
                       "limit": 10.0 * scfg.picard_tol}
    result["residual"] = res
    if etd_check:
        w = scfg.theta_weight(k.k1)
        try:
            etd = solver.etd_march(u0, th0, scfg)
        except BlowUpError as exc:
            out["etd"] = {"error": str(exc)}
            return result
        dist = solver.state_distance(state, etd.state, scfg, w)
        tol = max(scfg.picard_tol, etd.combined(w))
        out["etd"] = {
            "richardson_u": etd.richardson_u,
            "richardson_theta": etd.richardson_theta,
            "combined_estimate": etd.combined(w),
            "distance_to_picard": dist,
            "tolerance": tol,
            "within_10x_tolerance": bool(dist <= 10.0 * tol),
        }
        out["theta_l2_drift"] = _theta_drift(etd.state)
        result["etd"] = etd
    return result


def _write_state(run, state):
    save_field(run.path("u_final.npz"), _last(state.u), extra={"t": state.u.T})
    save_field(run.path("theta_final.npz"), _last(state.theta), extra={"t": state.theta.T})
    run.written += ["u_final.npz", "theta_final.npz"]


def _last(traj):
    c = traj.coeffs[-1]
    return VectorField(traj.grid, c, True, True) if traj.vector else ScalarField(traj.grid, c[0])


def _finish_solve(run, result):
    rep = result["report"]
    if result["state"] is None:
        raise NotConverged(f"picard iteration {rep['fixed_point']['status']}")
    if rep["etd"] is not None and "error" in rep["etd"]:
        raise NotConverged(rep["etd"]["error"])


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_solve(run, config_dir):
    opts = run.cfg.get("solve") or {"etd_check": True, "save_state": False}
    result = _solve_pipeline(run, config_dir, opts["etd_check"])
    run.json("report.json", result["report"])
    state = result["state"]
    rows = [] if state is None else _norm_rows(state, result["scfg"], result["residual"])
    run.csv("norms.csv", NORM_HEADER, rows)
    if state is not None and opts["save_state"]:
        _write_state(run, state)
    _finish_solve(run, result)


def cmd_constants(run, config_dir):
    scfg = solver_config(run.cfg)
    k, samples = _constants(run, scfg)
    run.json("constants.json", _constants_dict(k))
    run.csv("constants_samples.csv", ["seed", "kind", "band_low", "band_high", "k1", "k2", "k3"],
            [(s["seed"], s["kind"], s["band"][0], s["band"][1], s["k1"], s["k2"], s["k3"]) for s in samples])


def _audit_report(spec, sec, seeds):
    kind = spec["inequality"]
    corpus = calculus.CorpusSpec(
        n=spec["n"] or sec["n"],
        resolutions=tuple(spec["resolutions"] or sec["resolutions"]),
        L=sec["L"],
        seeds=seeds,
        bands=None if sec["bands"] is None else tuple((f"band{i}", tuple(b)) for i, b in enumerate(sec["bands"])),
    )
    if kind == "KPV":
        return calculus.audit_kpv(corpus, spec["s"], spec["s1"], spec["s2"], spec["p"], spec["q"], spec["r"])
    if kind == "Product":
        return calculus.audit_product(corpus, spec["s"], spec["s1"], spec["s2"])
    if kind in ("UF1", "UF2", "UF3"):
        return calculus.audit_advection(corpus, kind, spec["alpha"], spec["eps"])
    if kind == "Embedding":
        return calculus.audit_embedding(corpus, spec["s"])
    return calculus.audit_interpolation(corpus, spec["s_lo"], spec["s_hi"], spec["s_mid"])


def cmd_calculus_audit(run, config_dir):
    sec = require(run.cfg, "calculus")
    seeds = run.corpus_seeds(sec["seed_count"])
    # reject bad exponents before any audit runs
    for spec in sec["audits"]:
        calculus.check_exponents(spec["inequality"], spec["n"] or sec["n"],
                                 **{k: spec[k] for k in AUDIT_FIELDS[spec["inequality"]]})
    summaries, rows = [], []
    for spec in sec["audits"]:
        log.info("audit %s", spec["inequality"])
        rep = _audit_report(spec, sec, seeds)
        summaries.append(rep.summary())
        rows.extend((r.inequality_id, r.seed, r.N, r.band, r.exponents, r.lhs, r.rhs, r.ratio) for r in rep.rows)
    run.json("audit_summary.json", {"audits": summaries})
    run.csv("audit_samples.csv", ["inequality_id", "seed", "N", "band", "exponents", "lhs", "rhs", "ratio"], rows)


def semigroup_summary(sec, seeds):
    """Run the semigroup audits; returns (summary, {csv name: (header, rows)})."""
    grid = make_grid(sec["n"], sec["N"], sec["L"])
    corpus = semigroup.FieldCorpus(seeds=seeds, bands=tuple(tuple(b) for b in sec["bands"]))
    alpha, s = sec["alpha"], sec["s"]
    ts = np.logspace(math.log10(sec["t_min"]), math.log10(sec["t_max"]), sec["t_count"])

    sm_rows = semigroup.audit_smoothing(grid, corpus, alpha, s, sec["gamma_ratios"], ts)
    single = _single_mode(grid)
    smoothing = []
    for r in sec["gamma_ratios"]:
        sel = [row for row in sm_rows if row[2] == r]
        bound = semigroup.smoothing_bound(r * alpha, alpha)
        smoothing.append({
            "gamma_over_alpha": r,
            "bound": bound,
            "max_measured": max(row[3] for row in sel) if sel else None,
            "single_mode_measured": semigroup.smoothing_sup(single, alpha, r * alpha, s, ts),
        })

    mr_rows = semigroup.audit_max_regularity(grid, corpus, alpha, s, sec["T_values"], sec["M"])
    per_T = []
    for T in sec["T_values"]:
        vals = [row[4] for row in mr_rows if row[0] == T]
        per_T.append({"T": T, "max_ratio": max(vals) if vals else None})
    maxima = [p["max_ratio"] for p in per_T if p["max_ratio"] is not None]
    spread = (max(maxima) / min(maxima) - 1.0) if maxima and min(maxima) > 0 else None

    ff_rows = semigroup.audit_free_functional(grid, corpus, alpha, s)
    exact = hdot_norm(single, s + alpha) ** 2
    summary = {
        "grid": {"n": grid.n, "N": grid.N, "L": grid.L},
        "alpha": alpha,
        "s": s,
        "smoothing": smoothing,
        "max_regularity": {"per_T": per_T, "relative_spread": spread},
        "free_functional": {
            "max_ratio": max((row[4] for row in ff_rows), default=None),
            "single_mode_ratio": semigroup.free_functional(single, alpha, s)["total"] / hdot_norm(single, s + alpha),
        },
        "characterization": {
            "relative_error_prefactor_2": abs(semigroup.char_integral(single, alpha, s) - exact) / exact,
            "ratio_prefactor_half": semigroup.char_integral(single, alpha, s, prefactor=0.5) / exact,
        },
    }
    tables = {
        "smoothing.csv": (["seed", "band", "gamma_over_alpha", "max_measured", "bound"], sm_rows),
        "max_regularity.csv": (["T", "seed", "band", "profile", "ratio"], mr_rows),
        "free_functional.csv": (["seed", "band", "functional", "norm_s_plus_alpha", "ratio"], ff_rows),
    }
    return summary, tables


def _single_mode(grid):
    k = (1,) + (0,) * (grid.n - 1)
    c = np.zeros(grid.shape, dtype=complex)
    c[k] = 0.5
    c[tuple(-i for i in k)] = 0.5
    return ScalarField(grid, c)


def cmd_semigroup_audit(run, config_dir):
    sec = require(run.cfg, "semigroup")
    summary, tables = semigroup_summary(sec, run.corpus_seeds(sec["seed_count"]))
    run.json("semigroup_summary.json", summary)
    for name, (header, rows) in tables.items():
        run.csv(name, header, rows)


def cmd_scaling_check(run, config_dir):
    lam = require(run.cfg, "scaling")["lambda"]
    result = _solve_pipeline(run, config_dir, etd_check=False)
    report = {"solve": result["report"], "scaling": None}
    if result["state"] is not None:
        report["scaling"] = solver.scaling_check(result["state"], lam, result["scfg"], result["k"])
    run.json("scaling.json", report)
    _finish_solve(run, result)


def cmd_uniqueness_probe(run, config_dir):
    sec = require(run.cfg, "uniqueness")
    result = _solve_pipeline(run, config_dir, etd_check=True)
    report = {"solve": result["report"], "uniqueness": None}
    rows = []
    etd = result["etd"]
    if result["state"] is not None and etd is not None:
        scfg, k = result["scfg"], result["k"]
        budget = scfg.picard_tol + etd.combined(scfg.theta_weight(k.k1))
        probe = solver.uniqueness_probe(result["state"], etd.state, scfg, k, sec["eps"], sec["c_interp"], budget)
        rows = [(r["t"], r["coefficient"], r["du_X"], r["dtheta_Y"]) for r in probe.pop("rows")]
        report["uniqueness"] = probe
    run.json("uniqueness.json", report)
    run.csv("uniqueness.csv", ["t", "coefficient", "du_X", "dtheta_Y"], rows)
    _finish_solve(run, result)


HANDLERS = {
    "solve": cmd_solve,
    "calculus-audit": cmd_calculus_audit,
    "semigroup-audit": cmd_semigroup_audit,
    "scaling-check": cmd_scaling_check,
    "constants": cmd_constants,
    "uniqueness-probe": cmd_uniqueness_probe,
}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _parse_seeds(text):
    if text is None:
        return None
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError("--seeds", f"expected comma-separated integers, got {text!r}") from None
    if not seeds:
        raise ConfigError("--seeds", "seed list is empty")
    if any(s < 0 for s in seeds):
        raise ConfigError("--seeds", "seeds must be nonnegative")
    return seeds


def _load(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(raw)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from None
    return raw, doc


def build_parser():
    p = argparse.ArgumentParser(prog="fracboussinesq", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", help="comma-separated corpus seeds (overrides the committed list)")
    p.add_argument("--threads", type=int, default=1, help="FFT / kernel threads (default 1)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(name)s: %(message)s", stream=sys.stderr)
    run = None
    try:
        seeds = _parse_seeds(args.seeds)
        raw, doc = _load(args.config)
        cfg = parse_config(doc)
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        _kernels.set_threads(args.threads)
        ensure_dir(args.out)
        run = Run(args.command, cfg, args.out, seeds)
        run.json("config.json", cfg)
        code = EXIT_OK
        try:
            HANDLERS[args.command](run, os.path.dirname(os.path.abspath(args.config)))
        except NotConverged as exc:
            print(f"fracboussinesq: not converged: {exc}", file=sys.stderr)
            code = EXIT_NONCONVERGENCE
        _manifest(run, raw, args, code)
        return code
    except ConfigError as exc:
        print(f"fracboussinesq: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"fracboussinesq: precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"fracboussinesq: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def _file_hash(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _manifest(run, raw, args, code):
    run.json("manifest.json", {
        "command": run.command,
        "config_sha256": config_hash(raw),
        "normalized_config_sha256": config_hash(dumps(run.cfg).encode()),
        "seeds_override": None if run.seeds is None else list(run.seeds),
        "corpus_seeds": run.used_seeds,
        "data_seed": run.data_seed,
        "threads": args.threads,
        "exit_code": code,
        "versions": versions(),
        "artifacts": {name: _file_hash(run.path(name)) for name in sorted(set(run.written)) if name != "manifest.json"},
    })


if __name__ == "__main__":
    sys.exit(main())
