"""Command line driver: one subcommand per experiment, each writing a result table and a PASS/FAIL summary."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import cones, entropy, farey
from .census import (
    disjoint_class_census,
    enumerate_classes,
    geodesic_table,
    necklace_count,
)
from .config import ConfigError, RunConfig, load_config
from .flowbox import (
    SurgeryConfig,
    TwistProfile,
    beta0_build,
    gluing_identity_check,
    normalization_constant,
    reeb_bound_check,
    weighted_mean,
)
from .hyperbolic import FRAME_GENERATORS, build_genus2_surface, frame_flow, relation_residual, structure_residual

LOG3 = math.log(3.0)


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


# --- subcommands: each returns (rows, passed, metrics) ---------------------------


def frames_check(cfg: RunConfig, workers: int):
    rng = np.random.default_rng(cfg.cones.seed)
    rows, semigroup = [], 0.0
    for name in FRAME_GENERATORS:
        s, t = rng.uniform(-3.0, 3.0, 2)
        err = np.abs(frame_flow(name, s) @ frame_flow(name, t) - frame_flow(name, s + t)).max()
        err /= np.abs(frame_flow(name, s + t)).max()
        semigroup = max(semigroup, float(err))
        rows.append({"generator": name, "s": s, "t": t, "semigroup_residual": err})
    structure = structure_residual()
    metrics = {"structure_residual": structure, "semigroup_residual": semigroup}
    return rows, structure <= 1e-12 and semigroup <= 1e-10, metrics


def surface_build(cfg: RunConfig, workers: int):
    surf = build_genus2_surface()
    traces = np.abs(np.trace(surf.generators, axis1=1, axis2=2))
    rows = [
        {"generator": k, "trace": tr, "length": 2.0 * math.acosh(tr / 2.0)} for k, tr in enumerate(traces)
    ]
    rel = relation_residual(surf)
    spread = float(traces.max() - traces.min())
    metrics = {"relation_residual": rel, "trace_spread": spread, "min_trace": traces.min(), "systole": surf.systole}
    return rows, rel <= 1e-9 and spread <= 1e-9 and bool(np.all(traces > 2.0)), metrics


def surgery_validate(cfg: RunConfig, workers: int):
    s = cfg.surgery
    rows, ok = [], True
    for q in sorted({0, 1, 2, s.q}):
        sc = SurgeryConfig(q, s.epsilon, s.eta, s.strict_half_bound, s.plateau, s.mollifier, s.box_mass)
        ident = gluing_identity_check(sc, s.n_samples, seed=cfg.cones.seed)
        reeb = reeb_bound_check(sc, s.grid)
        c = normalization_constant(sc)
        mean_err = abs(weighted_mean(sc, c) - 1.0)
        row_ok = ident.ok and reeb.ok and mean_err <= 1e-8 and (q != 0 or c == 1.0)
        ok &= row_ok
        rows.append({"q": q, **ident.residuals, "sup_abs_dh": reeb.sup_abs_dh, "dh_bound": reeb.bound, "c": c, "mean_error": mean_err, "pass": row_ok})
    metrics = {
        "max_identity_residual": max(max(r[k] for k in ("pullback_alpha", "pullback_dalpha", "pullback_volume", "deformed_forms")) for r in rows),
        "sup_abs_dh": max(r["sup_abs_dh"] for r in rows),
        "strict_half_bound": s.strict_half_bound,
        "epsilon": s.epsilon,
    }
    return rows, ok, metrics


def _shard_seeds(seed: int, shards: int):
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(shards)]


def _certify_shard(args):
    q, eps, n, length, t_min, spread, seed = args
    seq = cones.ReturnSequence.synthetic(n, length, eps, t_min=t_min, spread=spread, seed=seed)
    return cones.anosov_certificate(seq, TwistProfile(q, eps))


def _certify(cfg: RunConfig, q: int, eps: float, workers: int) -> dict:
    k = cfg.cones
    per = k.n_sequences // k.shards
    jobs = [(q, eps, per, k.seq_length, k.t_min, k.t_max - k.t_min, sd) for sd in _shard_seeds(k.seed, k.shards)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_certify_shard, jobs))
    else:
        results = [_certify_shard(j) for j in jobs]
    passed = all(r["pass"] for r in results)
    margin = min(r["margin"] for r in results) if passed else None
    witness = next((dict(r["witness"], shard=i) for i, r in enumerate(results) if not r["pass"]), None)
    return {"pass": passed, "margin": margin, "witness": witness}


def _cone_row(cfg, q, eps, verdict, margin):
    return {"q": q, "epsilon": eps, "t_min": cfg.cones.t_min, "n_sequences": cfg.cones.n_sequences, "min_margin": margin, "verdict": verdict}


def cones_certify(cfg: RunConfig, workers: int):
    rows, ok = [], True
    for q in cfg.cones.q_values:
        r = _certify(cfg, q, cfg.cones.epsilon, workers)
        ok &= r["pass"] and (r["margin"] or 0.0) > 0.0
        rows.append(_cone_row(cfg, q, cfg.cones.epsilon, "certified" if r["pass"] else "failed", r["margin"]))
    metrics = {"min_margin": min((r["min_margin"] for r in rows if r["min_margin"] is not None), default=None), "quadrant_preserved": ok}
    return rows, ok, metrics


def cones_sweep(cfg: RunConfig, workers: int):
    rows, ok, flips = [], True, []
    for q in cfg.cones.sweep_q:
        for eps in cfg.cones.sweep_epsilons:
            if q >= 0:
                r = _certify(cfg, q, eps, workers)
                ok &= r["pass"]
                rows.append(_cone_row(cfg, q, eps, "certified" if r["pass"] else "failed", r["margin"]))
            else:
                hit = cones.cone_flip_detector(TwistProfile(q, eps), cfg.cones.t_min)
                if hit is not None:
                    flips.append({"q": q, "epsilon": eps, **hit})
                rows.append(_cone_row(cfg, q, eps, "flip" if hit else "silent", None))
    metrics = {"flips": len(flips), "witnesses": flips, "K": cones.flip_constant(cfg.cones.t_min)}
    return rows, ok, metrics


def _geodesic_census(cfg: RunConfig):
    c = cfg.census
    entries = enumerate_classes(build_genus2_surface(), c.max_length)
    edges = np.linspace(c.fit_range[0], c.fit_range[1], 9)
    return entries, geodesic_table(entries, edges)


def census_geodesics(cfg: RunConfig, workers: int):
    entries, table = _geodesic_census(cfg)
    slope = float(np.polyfit(table.edges, np.log(table.counts), 1)[0])
    monotone = bool(np.all(np.diff(table.counts) >= 0))
    rows = [{"bucket_T": t, "count": n, "filter": f} for t, n, f in table.rows()]
    metrics = {"slope": slope, "monotone": monotone, "classes": len(entries), "max_length": cfg.census.max_length}
    return rows, 0.85 <= slope <= 1.1 and monotone, metrics


def census_disjoint(cfg: RunConfig, workers: int):
    table = disjoint_class_census(cfg.census.max_letters)
    rate = table.fit["rate_per_letter"]
    rows = [{"bucket_T": int(n), "count": int(c), "filter": table.filter} for n, c in zip(table.edges, table.counts)]
    exact = table.new[0] == 4 and (len(table.new) < 2 or table.new[1] == 4)
    oracle = all(int(p) == necklace_count(int(n)) for n, p in zip(table.edges, table.new))
    metrics = {
        "rate_per_letter": rate,
        "log3": LOG3,
        "relative_error": abs(rate / LOG3 - 1.0),
        "new_classes": table.new,
        "necklace_oracle": oracle,
    }
    return rows, bool(exact and oracle and abs(rate / LOG3 - 1.0) <= 0.05), metrics


def _farey_tables(cfg: RunConfig):
    s, c = cfg.surgery, cfg.census
    twist = TwistProfile(max(s.q, 1), s.epsilon, s.plateau, s.mollifier)
    b0 = beta0_build(twist)
    entries, periods = farey.farey_census(twist, c.farey_T, c.critical_points, b0)
    edges = np.geomspace(c.farey_T_min, c.farey_T, 12)
    return twist, b0, entries, farey.torus_table(periods, edges), farey.orbit_table(periods, edges, c.critical_points)


def farey_run(cfg: RunConfig, workers: int):
    twist, b0, entries, tori, orbits = _farey_tables(cfg)
    cutoff = 10_000
    identity_ok = True
    for q in sorted({1, 2, twist.q}):
        counts = farey.torus_counts_by_cutoff(q, cutoff)
        phi = np.cumsum(farey.totient_sieve(cutoff))
        identity_ok &= bool(np.all(counts[1:] == q * (phi[1:] - 1) + (q - 1)))
    examples = {"q1_cutoff10": farey.torus_count_identity(1, 10), "q2_cutoff10": farey.torus_count_identity(2, 10)}
    # spot-check the period formula against direct integration on a spread of tori
    picks = np.unique(np.linspace(0, len(entries) - 1, 25).astype(int))
    rel = max(
        abs(farey.integrate_reeb_period(b0, entries[i].w, entries[i].p, entries[i].qw)["period"] / entries[i].period - 1.0)
        for i in picks
    )
    level = max(abs(float(twist.f(entries[i].w)) - entries[i].p / entries[i].qw) for i in picks)
    exponent = farey.growth_exponent(tori)
    rows = [{"p": e.p, "q_w": e.qw, "w": e.w, "period": e.period} for e in entries]
    growth = [{"T": t, "tori": int(n), "orbits": int(m)} for t, n, m in zip(tori.edges, tori.counts, orbits.counts)]
    metrics = {
        "q": twist.q,
        "tori": len(entries),
        "exponent": exponent,
        "orbit_exponent": farey.growth_exponent(orbits),
        "totient_identity": identity_ok,
        **examples,
        "period_relative_error": rel,
        "level_residual": level,
        "h0_at_0": float(b0.h0(0.0)),
        "contact_margin": b0.contact_margin,
        "growth_table": growth,
    }
    ok = identity_ok and examples == {"q1_cutoff10": 31, "q2_cutoff10": 63} and abs(exponent - 2.0) <= 0.1 and rel <= 1e-8
    return rows, ok, metrics


def entropy_report(cfg: RunConfig, workers: int):
    k = cfg.cones
    n = min(k.n_sequences, 10_000)
    seq = cones.ReturnSequence.synthetic(n, k.seq_length, k.epsilon, t_min=k.t_min, spread=k.t_max - k.t_min, seed=k.seed)
    lyap = cones.lyapunov_estimate(seq, TwistProfile(1, k.epsilon))
    control = cones.lyapunov_estimate(seq, TwistProfile(0, k.epsilon))
    pesin = entropy.pesin_consistency(lyap["exponents"], 1, seed=k.seed)
    pesin0 = entropy.pesin_consistency(control["exponents"], 0, no_crossings=True, seed=k.seed)

    s = cfg.surgery
    sc = SurgeryConfig(s.q, s.epsilon, s.eta, s.strict_half_bound, s.plateau, s.mollifier, s.box_mass)
    c = normalization_constant(sc)
    transfer = entropy.abramov_transfer(1.0, weighted_mean(sc, c))

    _, geo = _geodesic_census(cfg)
    _, _, _, tori, _ = _farey_tables(cfg)
    labels, invariant = [], True
    for name, table in (("geodesic", geo), ("farey", tori)):
        base = entropy.growth_type_classify(table)
        for C in (1.0, 2.0):
            lab = entropy.growth_type_classify(entropy.rescale_table(table, C))
            invariant &= lab.kind == base.kind
            labels.append({"table": name, "rescale": C, "kind": lab.kind, "value": lab.value, "ci": lab.ci})
    geo_label = entropy.growth_type_classify(geo)
    farey_label = entropy.growth_type_classify(tori)

    bounds, bound_ok = [], True
    for a1 in (1.0, 2.0):
        params = entropy.BoundSequenceParams(a1=a1)
        bs = entropy.homotopy_bound_sequence(params, 1e300 if a1 > 1 else 1e30)
        closed = [entropy.closed_form_next(params, x) for x in bs.log_T[:-1]]
        closed_ok = bool(np.allclose(closed, bs.log_T[1:], rtol=1e-12))
        probe = np.geomspace(params.T0, np.exp(bs.log_T[-1]), 4000)
        dominates = bool(np.all(bs.staircase(probe) >= bs.bound(probe) - 1e-12))
        bound_ok &= closed_ok and dominates
        bounds.append({"a1a2": params.a3, "log_T": bs.log_T, "c6": bs.c6, "kind": bs.bound_kind, "closed_form": closed_ok, "dominates": dominates})
    ratio_ok = bool(np.allclose(np.diff(bounds[0]["log_T"]), math.log(2.0 * math.e), rtol=1e-12))

    rows = [{"kind": "lyapunov", "name": "min_q1", "value": lyap["min"]}, {"kind": "lyapunov", "name": "control_deviation", "value": pesin0["deviation"]}]
    rows += [{"kind": "growth", "name": f"{l['table']}@{l['rescale']:g}", "value": f"{l['kind']}:{l['value']}"} for l in labels]
    rows += [{"kind": "bound", "name": f"a1a2={b['a1a2']:g}", "value": b["c6"]} for b in bounds]
    metrics = {
        "lyapunov_min": lyap["min"],
        "control_deviation": pesin0["deviation"],
        "closed_form_deviation": lyap["closed_form_deviation"],
        "abramov_transfer": transfer,
        "entropy_fit": geo_label.value,
        "growth_labels": labels,
        "bound_sequence": bounds,
    }
    ok = (
        pesin["ok"]
        and pesin0["ok"]
        and lyap["closed_form_deviation"] <= 1e-10
        and abs(transfer - 1.0) <= 1e-8
        and geo_label.kind == "exponential"
        and farey_label.kind == "polynomial"
        and abs(farey_label.value - 2.0) <= 0.1
        and invariant
        and bound_ok
        and ratio_ok
    )
    return rows, ok, metrics


COMMANDS = {
    ("frames", "check"): frames_check,
    ("surface", "build"): surface_build,
    ("surgery", "validate"): surgery_validate,
    ("cones", "certify"): cones_certify,
    ("cones", "sweep"): cones_sweep,
    ("census", "geodesics"): census_geodesics,
    ("census", "disjoint"): census_disjoint,
    ("farey", "run"): farey_run,
    ("entropy", "report"): entropy_report,
}


def write_outputs(out: Path, name: str, rows, summary: dict, fmt: str):
    out.mkdir(parents=True, exist_ok=True)
    rows = _clean(rows)
    if fmt == "csv":
        with open(out / f"{name}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
            writer.writeheader()
            for r in rows:
                writer.writerow({k: "" if v is None else v for k, v in r.items()})
    else:
        with open(out / f"{name}.json", "w") as fh:
            json.dump(rows, fh, indent=1, sort_keys=True)
            fh.write("\n")
    with open(out / f"{name}.summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="overrides cones.seed")
    common.add_argument("--workers", type=int, default=1, help="processes for sharded work; never changes results")
    common.add_argument("--format", choices=("csv", "json"), help="result table format (overrides output.format)")
    parser = argparse.ArgumentParser(prog="surgery-lab", description=__doc__)
    groups = parser.add_subparsers(dest="group", required=True)
    for group in dict.fromkeys(g for g, _ in COMMANDS):
        gp = groups.add_parser(group).add_subparsers(dest="action", required=True)
        for g, action in COMMANDS:
            if g == group:
                gp.add_parser(action, parents=[common], help=COMMANDS[(g, action)].__name__.replace("_", " "))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides: dict = {}
    if args.seed is not None:
        overrides.setdefault("cones", {})["seed"] = args.seed
    if args.format is not None:
        overrides.setdefault("output", {})["format"] = args.format
    if args.out is not None:
        overrides.setdefault("output", {})["dir"] = str(args.out)
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.workers < 1:
        print("config error: --workers must be at least 1", file=sys.stderr)
        return 2
    name = f"{args.group}-{args.action}"
    rows, passed, metrics = COMMANDS[(args.group, args.action)](cfg, args.workers)
    summary = _clean({"subcommand": f"{args.group} {args.action}", "pass": bool(passed), "metrics": metrics})
    write_outputs(Path(cfg.output.dir), name, rows, summary, cfg.output.format)
    print(json.dumps(summary, sort_keys=True))
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
