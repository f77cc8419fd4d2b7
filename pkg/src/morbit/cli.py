"""Command-line front end.

    morbit verify <suite> --config c.json [--out dir]
    morbit classify --config c.json [--out report.json]
    morbit ga-check --config c.json [--out report.json]
    morbit orbit --config c.json --steps N --out orbit.csv
    morbit plot --config c.json --out fig.svg

Exit codes: 0 success, 1 a check failed, 2 the configuration is invalid
(nothing is written in that case).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .billiard import (BounceSequence, OrientedLine, PolygonTable, impact, orbit,
                       regular_polygon, sample_line)
from .geometry import Ellipsoid, GeometryError, body_from_config
from .genfun import (ChordGF, DirectionGF, FourierPotential, StandardMapGF, pair_sampler,
                     standard_map_orbit, standard_map_step, validate_derivatives)
from .numerics import classify_definiteness
from .symplectic import (LagrangianSubspace, chart_jacobian_fd, dT_blocks, index_form,
                         order_compare, symplectic_defect)
from .variational import (assemble_window, classify_window, mackay_identity_check,
                          required_length, riccati_sequence)
from .wavefront import fd_front_oracle, ga_check, reflect_front

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SUITES = ("derivatives", "symplectic", "sinai-chernov", "order", "identity")

DEFAULTS = {
    "chart": "both",
    "sense": "maximizing",
    "window_schedule": [5, 10, 20, 50],
    "depths": [10, 20, 40, 80],
    "samples": 100,
    "seed": 0,
    "initial_conditions": {"sampler": {"count": 1}},
}
DEFAULT_TOLERANCES = {"abs": 1e-9, "rel": 1e-9, "convergence": 1e-9, "derivatives": 1e-6,
                      "symplectic": 1e-9, "jacobian": 1e-6, "front": 1e-5, "identity": 1e-10}


class ConfigError(ValueError):
    pass


class OrbitError(RuntimeError):
    pass


# --- configuration ----------------------------------------------------------

def load_schema() -> dict:
    return json.loads(resources.files("morbit").joinpath("config_schema.json").read_text())


def validate_config(raw: dict) -> dict:
    """Schema check, defaults, and the semantic checks the schema cannot express."""
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    cfg = {**DEFAULTS, **raw}
    cfg["tolerances"] = {**DEFAULT_TOLERANCES, **raw.get("tolerances", {})}
    system = build_system(cfg)
    ics = cfg["initial_conditions"]
    for ic in ics.get("explicit", []):
        if system.is_billiard:
            if "point" not in ic:
                raise ConfigError("billiard initial conditions need point and direction")
            if len(ic["point"]) != system.dim or len(ic["direction"]) != system.dim:
                raise ConfigError("initial condition dimension does not match the body")
            if not np.any(ic["direction"]):
                raise ConfigError("initial direction must be non-zero")
        elif "q" not in ic:
            raise ConfigError("standard map initial conditions need q and p")
    return cfg


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return validate_config(raw)


@dataclass
class System:
    body: object | None
    potential: FourierPotential | None
    charts: dict

    @property
    def is_billiard(self) -> bool:
        return self.body is not None

    @property
    def dim(self) -> int:
        return self.body.dim if self.body is not None else 1


def build_system(cfg: dict) -> System:
    bc = cfg["body"]
    if bc["type"] == "standard_map":
        pot = bc.get("potential", {})
        V = FourierPotential(pot.get("a0", 0.0), tuple(pot.get("cos", ())), tuple(pot.get("sin", ())))
        return System(None, V, {"standard": StandardMapGF(V)})
    try:
        if bc["type"] == "regular_polygon":
            body = regular_polygon(bc["sides"], bc.get("radius", 1.0), bc.get("phase", 0.0))
        else:
            body = body_from_config(bc)
    except (GeometryError, ValueError) as exc:
        raise ConfigError(f"body: {exc}") from None
    wanted = ("L", "S") if cfg.get("chart", "both") == "both" else (cfg["chart"],)
    charts = {}
    for c in wanted:
        if c == "S" and isinstance(body, PolygonTable):
            raise ConfigError("the direction chart needs a strictly convex smooth body")
        charts[c] = ChordGF(body) if c == "L" else DirectionGF(body)
    return System(body, None, charts)


def initial_conditions(cfg: dict, system: System) -> list:
    """(orbit_id, start) pairs; start is an OrientedLine or a (q, p) tuple."""
    ics = cfg["initial_conditions"]
    out = []
    if "explicit" in ics:
        for i, ic in enumerate(ics["explicit"]):
            oid = ic.get("id", f"orbit-{i:04d}")
            if system.is_billiard:
                out.append((oid, OrientedLine(np.array(ic["point"], float), np.array(ic["direction"], float))))
            else:
                out.append((oid, (float(ic["q"]), float(ic["p"]))))
    else:
        sp = ics["sampler"]
        rng = np.random.default_rng(sp.get("seed", 0))
        for i in range(sp["count"]):
            oid = f"orbit-{i:04d}"
            if system.is_billiard:
                out.append((oid, sample_line(system.body, rng, sp.get("delta_min", 0.1))))
            else:
                out.append((oid, (float(rng.uniform(0, 2 * np.pi)), float(rng.uniform(-np.pi, np.pi)))))
    ids = [o for o, _ in out]
    if len(set(ids)) != len(ids):
        raise ConfigError("initial condition ids must be unique")
    return out


def default_steps(cfg: dict) -> int:
    return required_length(cfg["window_schedule"], cfg["depths"]) + 1


# --- orbits -----------------------------------------------------------------

def _tile_sequence(seq: BounceSequence, period: int, steps: int) -> BounceSequence:
    pts = tuple(seq.points[i % period] for i in range(steps + 2))
    dirs = tuple(seq.dirs[i % period] for i in range(steps + 1))
    lines = tuple(OrientedLine(pts[i].x, dirs[i]) for i in range(steps + 1))
    return BounceSequence(pts, dirs, lines)


def billiard_sequence(body, start: OrientedLine, steps: int, period: int | None = None) -> BounceSequence:
    """Orbit of ``steps`` bounces; with a period the first period is
    computed and repeated, which keeps unstable periodic orbits exact."""
    if period is None:
        seq = orbit(body, start, steps)
    else:
        seq = orbit(body, start, period)
        if seq.error is None:
            gap = max(np.abs(seq.points[period].x - seq.points[0].x).max(),
                      np.abs(seq.dirs[period] - seq.dirs[0]).max())
            if gap > 1e-8:
                raise OrbitError(f"orbit does not close after {period} bounces (gap {gap:.3g})")
            seq = _tile_sequence(seq, period, steps)
    if seq.error is not None:
        raise OrbitError(seq.error)
    return seq


def standard_configuration(V, q: float, p: float, steps: int, period: int | None = None) -> list:
    """Lifted positions q_0..q_steps; with a period the first period is
    repeated with its 2 pi k shift."""
    if period is None:
        return standard_map_orbit(V, q, p, steps)
    qs, pp = [float(q)], float(p)
    for _ in range(period):
        qn, pp = standard_map_step(V, qs[-1], pp)
        qs.append(float(qn))
    shift = qs[period] - qs[0]
    k = round(shift / (2 * np.pi))
    if abs(shift - 2 * np.pi * k) > 1e-8 or abs(pp - p) > 1e-8:
        raise OrbitError(f"orbit does not close after {period} steps")
    shift = 2 * np.pi * k
    return [qs[i % period] + (i // period) * shift for i in range(steps + 1)]


def chart_configs(system: System, start, steps: int, period: int | None = None):
    if system.is_billiard:
        seq = billiard_sequence(system.body, start, steps, period)
        return seq, {c: gf.config(seq) for c, gf in system.charts.items()}
    qs = standard_configuration(system.potential, start[0], start[1], steps, period)
    return None, {"standard": qs}


# --- classification ---------------------------------------------------------

def _classify_charts(cfg, system, start):
    tol = cfg["tolerances"]
    seq, configs = chart_configs(system, start, cfg.get("steps") or default_steps(cfg), cfg.get("period"))
    results = {}
    for chart, config in configs.items():
        window = assemble_window(system.charts[chart], config)
        results[chart] = classify_window(window, cfg["window_schedule"], cfg["depths"],
                                         tol["abs"], tol["rel"], tol["convergence"],
                                         cfg["sense"], cfg.get("period"))
    return seq, results


def classify_one(cfg: dict, oid: str, start) -> dict:
    system = build_system(cfg)
    try:
        _, results = _classify_charts(cfg, system, start)
    except (OrbitError, GeometryError, ValueError) as exc:
        return {"orbit_id": oid, "error": str(exc)}
    return {"orbit_id": oid, "reports": [cl.report(oid, chart) for chart, cl in results.items()]}


def _run_pool(fn, cfg, jobs):
    n = os.environ.get("MORBIT_THREADS")
    try:
        workers = int(n) if n else 1
    except ValueError:
        raise ConfigError("MORBIT_THREADS must be an integer") from None
    if workers < 1:
        raise ConfigError("MORBIT_THREADS must be >= 1")
    if workers == 1 or len(jobs) < 2:
        out = [fn(cfg, oid, start) for oid, start in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(fn, cfg, oid, start) for oid, start in jobs]
            out = [f.result() for f in futs]
    return sorted(out, key=lambda r: r["orbit_id"])


def agreement_summary(results: list) -> dict:
    verdicts = {}
    for r in results:
        for rep in r.get("reports", []):
            verdicts.setdefault(rep["verdict"], 0)
            verdicts[rep["verdict"]] += 1
    compared = agree = 0
    disagreements = []
    for r in results:
        v = {rep["chart"]: rep["verdict"] for rep in r.get("reports", [])}
        if "L" in v and "S" in v and v["L"] in ("m-orbit", "rejected") and v["S"] in ("m-orbit", "rejected"):
            compared += 1
            if v["L"] == v["S"]:
                agree += 1
            else:
                disagreements.append(r["orbit_id"])
    inconsistent = sorted(r["orbit_id"] for r in results
                          for rep in r.get("reports", []) if rep["verdict"] == "inconsistent")
    return {"orbits": len(results), "errors": sum(1 for r in results if "error" in r),
            "verdicts": dict(sorted(verdicts.items())), "compared": compared, "agree": agree,
            "agreement": (agree / compared) if compared else None,
            "disagreements": disagreements, "inconsistent": inconsistent}


def cmd_classify(cfg: dict) -> tuple[int, dict]:
    system = build_system(cfg)
    jobs = initial_conditions(cfg, system)
    results = _run_pool(classify_one, cfg, jobs)
    summary = agreement_summary(results)
    code = EXIT_FAIL if summary["disagreements"] or summary["inconsistent"] else EXIT_OK
    return code, {"results": results, "summary": summary}


def ga_one(cfg: dict, oid: str, start) -> dict:
    system = build_system(cfg)
    try:
        seq, results = _classify_charts(cfg, system, start)
    except (OrbitError, GeometryError, ValueError) as exc:
        return {"orbit_id": oid, "error": str(exc)}
    certified = set()
    M = N = None
    for cl in results.values():
        M, N = cl.M, cl.N
        if cl.verdict == "m-orbit":
            certified.update(range(cl.M, cl.N + 1))
    tol = cfg["tolerances"]
    bounces = ga_check(system.body, seq, certified, tol["abs"], tol["rel"], indices=range(M, N + 1))
    verdicts = {c: cl.verdict for c, cl in results.items()}
    decided = [v for v in verdicts.values() if v in ("m-orbit", "rejected")]
    failed = [b["bounce_index"] for b in bounces if b["status"] == "fail"]
    conclusion_ok = not certified or len(set(decided)) <= 1
    return {"orbit_id": oid, "verdicts": verdicts, "certified_bounces": len(certified),
            "failed_bounces": failed, "charts_agree": conclusion_ok, "bounces": bounces}


def cmd_ga_check(cfg: dict) -> tuple[int, dict]:
    system = build_system(cfg)
    if not system.is_billiard:
        raise ConfigError("ga-check needs a billiard body")
    if isinstance(system.body, PolygonTable):
        raise ConfigError("ga-check needs a body with positive curvature")
    cfg = {**cfg, "chart": "both"}
    jobs = initial_conditions(cfg, system)
    results = _run_pool(ga_one, cfg, jobs)
    fails = [r["orbit_id"] for r in results if r.get("failed_bounces") or not r.get("charts_agree", True)]
    summary = {"orbits": len(results), "errors": sum(1 for r in results if "error" in r),
               "certified_bounces": sum(r.get("certified_bounces", 0) for r in results),
               "failed_orbits": fails}
    return (EXIT_FAIL if fails else EXIT_OK), {"results": results, "summary": summary}


# --- verification suites ----------------------------------------------------

def suite_derivatives(cfg, system, rng):
    tol = cfg["tolerances"]["derivatives"]
    delta = cfg["initial_conditions"].get("sampler", {}).get("delta_min", 0.1)
    out, ok = {}, True
    for chart, gf in system.charts.items():
        res = validate_derivatives(gf, pair_sampler(gf, delta), cfg["samples"], rng=rng)
        worst = max(v for k, v in res.items() if k.startswith("max_rel_err"))
        res["pass"] = worst < tol
        ok &= res["pass"]
        out[chart] = res
    return ok, out


def suite_symplectic(cfg, system, rng):
    tol = cfg["tolerances"]
    out, ok = {}, True
    for chart, gf in system.charts.items():
        draw = pair_sampler(gf)
        defect = jac = 0.0
        for _ in range(cfg["samples"]):
            q, Q = draw(rng)
            T = dT_blocks(gf, q, Q)
            defect = max(defect, symplectic_defect(T))
            J = chart_jacobian_fd(gf, q, Q)
            jac = max(jac, float(np.abs(T - J).max() / max(np.abs(T).max(), 1.0)))
        res = {"max_symplectic_defect": defect, "max_rel_err_jacobian": jac, "count": cfg["samples"],
               "pass": defect < tol["symplectic"] and jac < tol["jacobian"]}
        ok &= res["pass"]
        out[chart] = res
    return ok, out


def suite_sinai_chernov(cfg, system, rng):
    if not system.is_billiard or isinstance(system.body, PolygonTable):
        raise ConfigError("sinai-chernov needs a smooth billiard body")
    body = system.body
    r = body.dim - 1
    worst = 0.0
    for _ in range(cfg["samples"]):
        line = sample_line(body, rng)
        y, out = impact(body, line)
        A = rng.normal(size=(r, r))
        B = 0.5 * (A + A.T)
        B1 = reflect_front(body, y, line.dir, out.dir, B).B
        B2 = fd_front_oracle(body, y, line.dir, out.dir, B)
        worst = max(worst, float(np.abs(B1 - B2).max() / max(np.abs(B1).max(), 1.0)))
    ok = worst < cfg["tolerances"]["front"]
    return ok, {"max_rel_err": worst, "count": cfg["samples"], "pass": ok}


def _random_symmetric(rng, r, scale=1.0):
    A = rng.normal(size=(r, r)) * scale
    return 0.5 * (A + A.T)


def _random_posdef(rng, r):
    A = rng.normal(size=(r, r))
    return A @ A.T + 0.05 * np.eye(r)


def order_trial(rng, tol_abs=1e-9, tol_rel=1e-9) -> dict:
    """One random trial of both order/index-form equivalences.

    Item 1: A < B relative to the vertical iff Q[alpha, beta] > 0 on the
    vertical.  Item 2 (A < B given): A < W < B iff Q[alpha, beta] < 0 on
    graph(W).  Returns per-item (order verdict, form verdict) or None when
    either side falls in the marginal band."""
    r = int(rng.integers(1, 4))
    A, B = _random_symmetric(rng, r), _random_symmetric(rng, r)
    alpha, beta = LagrangianSubspace.graph(A), LagrangianSubspace.graph(B)
    V = LagrangianSubspace.vertical(r)
    o = order_compare(alpha, beta, tol_abs, tol_rel)
    q = classify_definiteness(index_form(alpha, beta, V), tol_abs, tol_rel)
    item1 = None
    if o != "marginal" and not q.marginal:
        item1 = (o == "less", q.posdef, o == "greater", q.negdef)
    B2 = A + _random_posdef(rng, r)
    W = A + _random_posdef(rng, r) * rng.uniform(0, 1.2) if rng.uniform() < 0.5 else _random_symmetric(rng, r, 2.0)
    beta2 = LagrangianSubspace.graph(B2)
    lw = LagrangianSubspace.graph(W)
    o1, o2 = order_compare(alpha, lw, tol_abs, tol_rel), order_compare(lw, beta2, tol_abs, tol_rel)
    q2 = classify_definiteness(index_form(alpha, beta2, lw), tol_abs, tol_rel)
    item2 = None
    if "marginal" not in (o1, o2) and not q2.marginal:
        item2 = (o1 == "less" and o2 == "less", q2.negdef)
    return {"item1": item1, "item2": item2}


def suite_order(cfg, system, rng):
    t = cfg["tolerances"]
    counts = {"item1": [0, 0, 0], "item2": [0, 0, 0]}  # compared, disagreements, marginal
    for _ in range(cfg["samples"]):
        res = order_trial(rng, t["abs"], t["rel"])
        for k in ("item1", "item2"):
            v = res[k]
            if v is None:
                counts[k][2] += 1
                continue
            counts[k][0] += 1
            if k == "item1":
                bad = v[0] != v[1] or v[2] != v[3]
            else:
                bad = v[0] != v[1]
            counts[k][1] += int(bad)
    out = {k: {"compared": c, "disagreements": d, "marginal": m} for k, (c, d, m) in counts.items()}
    ok = all(v["disagreements"] == 0 for v in out.values())
    out["pass"] = ok
    return ok, out


def identity_trial(cfg, system, rng, chart):
    """One random (window, u) pair; None when the drawn window has a
    singular Riccati pivot (outside the identity's hypothesis)."""
    gf = system.charts[chart]
    size = int(rng.integers(1, 21))
    steps = size + 3
    if system.is_billiard:
        seq = orbit(system.body, sample_line(system.body, rng), steps)
        if seq.error is not None:
            return None
        config = gf.config(seq)
    else:
        config = standard_map_orbit(system.potential, rng.uniform(0, 2 * np.pi), rng.uniform(-3, 3), steps)
    window = assemble_window(gf, config)
    M = int(rng.integers(1, window.length - size + 2))
    w = window.sub(M, M + size - 1)
    tr = riccati_sequence(w, M)
    if tr.singular_at is not None or tr.stop < w.N:
        return None
    if max(np.linalg.cond(A) for A in tr.A) > 1e8:
        return None
    u = rng.normal(size=size * w.rank)
    return mackay_identity_check(w, tr, u) / float(u @ u)


def suite_identity(cfg, system, rng):
    worst, used, skipped = 0.0, 0, 0
    charts = list(system.charts)
    while used < cfg["samples"]:
        if skipped > 10 * cfg["samples"]:
            break
        res = identity_trial(cfg, system, rng, charts[used % len(charts)])
        if res is None:
            skipped += 1
            continue
        used += 1
        worst = max(worst, res)
    ok = used == cfg["samples"] and worst < cfg["tolerances"]["identity"]
    return ok, {"max_rel_residual": worst, "count": used, "skipped": skipped, "pass": ok}


SUITE_FUNCS = {"derivatives": suite_derivatives, "symplectic": suite_symplectic,
               "sinai-chernov": suite_sinai_chernov, "order": suite_order, "identity": suite_identity}


def cmd_verify(suite: str, cfg: dict) -> tuple[int, dict]:
    system = build_system(cfg)
    rng = np.random.default_rng(cfg["seed"])
    ok, report = SUITE_FUNCS[suite](cfg, system, rng)
    return (EXIT_OK if ok else EXIT_FAIL), {"suite": suite, "pass": bool(ok), "results": report}


# --- orbit dump and plot ----------------------------------------------------

def orbit_csv(cfg: dict, steps: int, index: int = 0) -> str:
    system = build_system(cfg)
    jobs = initial_conditions(cfg, system)
    if not 0 <= index < len(jobs):
        raise ConfigError(f"initial condition index {index} out of range")
    _, start = jobs[index]
    if system.is_billiard:
        return billiard_sequence(system.body, start, steps, cfg.get("period")).csv_text()
    q, p = start
    rows = ["index,q,p"]
    for i in range(steps + 1):
        rows.append(f"{i},{q!r},{p!r}")
        q, p = standard_map_step(system.potential, q, p)
    return "\n".join(rows) + "\n"


def _outline(body) -> np.ndarray:
    if isinstance(body, PolygonTable):
        return np.vstack([body.vertices, body.vertices[:1]])
    th = np.linspace(0.0, 2 * np.pi, 361)
    if isinstance(body, Ellipsoid):
        return np.stack([body.semi_axes[0] * np.cos(th), body.semi_axes[1] * np.sin(th)], axis=1)
    return np.array([body.point(t) for t in th])


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def _path(points) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(-y)}" for x, y in points)


def orbit_svg(cfg: dict, steps: int, index: int = 0) -> str:
    system = build_system(cfg)
    if not system.is_billiard or system.dim != 2:
        raise ConfigError("plot needs a planar billiard table")
    jobs = initial_conditions(cfg, system)
    if not 0 <= index < len(jobs):
        raise ConfigError(f"initial condition index {index} out of range")
    outline = _outline(system.body)
    seq = billiard_sequence(system.body, jobs[index][1], steps, cfg.get("period"))
    pts = np.array([p.x for p in seq.points])
    lo, hi = outline.min(axis=0), outline.max(axis=0)
    pad = 0.05 * float((hi - lo).max())
    x0, y0 = lo[0] - pad, -(hi[1] + pad)
    w, h = (hi - lo) + 2 * pad
    stroke = _fmt(0.004 * float(max(w, h)))
    return "\n".join([
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{_fmt(x0)} {_fmt(y0)} {_fmt(w)} {_fmt(h)}" '
        f'width="600" height="{int(round(600 * h / w))}">',
        f'  <polygon points="{_path(outline[:-1])}" fill="none" stroke="black" stroke-width="{stroke}"/>',
        f'  <polyline points="{_path(pts)}" fill="none" stroke="#1f4e9c" stroke-width="{stroke}"/>',
        "</svg>",
        "",
    ])


# --- entry point ------------------------------------------------------------

def _write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".morbit-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morbit", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--config", required=True)
    v.add_argument("--out", help="directory for the JSON report")
    for name, text in (("classify", "m-orbit verdicts in each chart"),
                       ("ga-check", "front curvatures at certified bounces")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", help="JSON report path")
    o = sub.add_parser("orbit", help="dump an orbit as CSV")
    o.add_argument("--config", required=True)
    o.add_argument("--steps", type=int, required=True)
    o.add_argument("--index", type=int, default=0)
    o.add_argument("--out", required=True)
    pl = sub.add_parser("plot", help="SVG of a planar table and an orbit")
    pl.add_argument("--config", required=True)
    pl.add_argument("--steps", type=int, default=50)
    pl.add_argument("--index", type=int, default=0)
    pl.add_argument("--out", required=True)
    return ap


def _default_out(cfg, name):
    d = cfg.get("output", {}).get("dir")
    return str(Path(d) / name) if d else None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "verify":
            code, report = cmd_verify(args.suite, cfg)
            out_dir = args.out or cfg.get("output", {}).get("dir")
            text = _dump(report)
            if out_dir:
                _write(Path(out_dir) / f"verify-{args.suite}.json", text)
            sys.stdout.write(text)
        elif args.command in ("classify", "ga-check"):
            fn = cmd_classify if args.command == "classify" else cmd_ga_check
            code, report = fn(cfg)
            text = _dump(report)
            out = args.out or _default_out(cfg, f"{args.command}.json")
            if out:
                _write(out, text)
                sys.stdout.write(_dump(report["summary"]))
            else:
                sys.stdout.write(text)
        elif args.command == "orbit":
            if args.steps < 1:
                raise ConfigError("--steps must be >= 1")
            try:
                text = orbit_csv(cfg, args.steps, args.index)
            except (OrbitError, GeometryError) as exc:
                print(f"morbit: orbit stopped: {exc}", file=sys.stderr)
                return EXIT_FAIL
            _write(args.out, text)
            code = EXIT_OK
        else:
            if args.steps < 1:
                raise ConfigError("--steps must be >= 1")
            try:
                text = orbit_svg(cfg, args.steps, args.index)
            except (OrbitError, GeometryError) as exc:
                print(f"morbit: orbit stopped: {exc}", file=sys.stderr)
                return EXIT_FAIL
            _write(args.out, text)
            code = EXIT_OK
    except ConfigError as exc:
        print(f"morbit: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
