"""Command-line runner: JSON config in, CSV tables plus a JSON summary out.

Exit status: 0 success, 1 a reported check failed, 2 invalid configuration
(the message names the violated hypothesis), 3 compute budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import analytic, experiments, operators, sparse, weights
from .errors import BudgetError, InvariantViolation, ParameterError
from .families import dyadic_family, family_from_name
from .grid import CellGrid, SampledFunctions, load_functions, read_grid_file
from .kernels import kernel_from_json
from .profile import ExponentProfile

SUBCOMMANDS = ("maximal", "constant", "sparse", "dominate", "sharpness", "weaktype", "twoweight")
EXIT_OK, EXIT_CHECK, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3

_EXTREMAL = re.compile(r"^extremal\(\s*([0-9.eE+-]+)\s*\)$")


# ------------------------------------------------------------ config plumbing


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def build_profile(cfg: dict) -> ExponentProfile:
    p = cfg.get("profile")
    if p is None:
        raise ParameterError("config needs a 'profile' section")
    s = p.get("s")
    if s is None and p.get("s_prime") is not None:
        sp = float(p["s_prime"])
        s = float("inf") if sp == 1 else sp / (sp - 1)
    m = int(p["m"])
    pl = p["p"] if isinstance(p["p"], list) else [p["p"]] * m
    return ExponentProfile(m, int(p.get("n", 1)), float(p.get("alpha", 0.0)), tuple(pl),
                           None if s is None else float(s))


def validate(subcommand: str, profile: ExponentProfile, cfg: dict) -> None:
    """Reject configurations outside the hypotheses the subcommand relies on."""
    if subcommand in ("sharpness", "twoweight"):
        profile.require_strong()
    else:
        profile.require_weak()
    if "kernel" in cfg and subcommand == "dominate" and profile.s is not None:
        profile.require_rough()


def build_grid(cfg: dict, n: int, L: int | None = None) -> CellGrid:
    g = cfg.get("grid", {})
    return CellGrid(n, int(g.get("K", 0)), int(g.get("L", 4) if L is None else L))


def _extremal_eps(spec) -> float | None:
    if isinstance(spec, str):
        mt = _EXTREMAL.match(spec.strip())
        if not mt:
            raise ParameterError(f"unknown preset {spec!r} (expected extremal(eps))")
        return float(mt.group(1))
    return None


def build_field(spec, grid: CellGrid, rng: np.random.Generator) -> np.ndarray:
    """One field from an inline spec: constant, indicator, power, random or file."""
    kind = spec.get("type")
    if kind == "constant":
        return np.full(grid.shape, float(spec.get("value", 1.0)))
    if kind == "indicator":
        return experiments.indicator(grid, float(spec["lo"]), float(spec["hi"]))
    if kind == "power":
        sup = spec.get("support")
        return analytic.cell_averages(grid, analytic.PowerSpec(float(spec.get("c", 1.0)), float(spec["e"])),
                                      None if sup is None else (float(sup[0]), float(sup[1])))
    if kind == "random":
        lo, hi = float(spec.get("low", 0.0)), float(spec.get("high", 1.0))
        steps = spec.get("dyadic")
        if steps:
            return lo + (hi - lo) * rng.integers(0, int(steps) + 1, size=grid.shape) / int(steps)
        return rng.uniform(lo, hi, size=grid.shape)
    if kind == "file":
        g, _, fields = read_grid_file(spec["path"])
        if g != grid:
            raise ParameterError(f"grid file {spec['path']} holds a different grid")
        return fields[int(spec.get("field", 0))]
    raise ParameterError(f"unknown function spec type {kind!r}")


def build_data(cfg: dict, profile: ExponentProfile, grid: CellGrid, rng) -> tuple[SampledFunctions, np.ndarray]:
    fspec = cfg.get("functions")
    wspec = cfg.get("weights")
    if isinstance(fspec, dict) and fspec.get("type") == "bundle":
        fs = load_functions(fspec["path"])
        if fs.grid != grid:
            raise ParameterError("function bundle holds a different grid")
        return fs, fs.w
    m = profile.m
    eps = _extremal_eps(fspec) if fspec is not None else None
    if eps is not None:
        fam = analytic.ExtremalFamily(eps, profile)
        f = np.stack([analytic.cell_averages(grid, fam.f, (0.0, 1.0))] * m)
    else:
        fspec = fspec or [{"type": "constant", "value": 1.0}] * m
        if isinstance(fspec, dict):
            fspec = [fspec] * m
        if len(fspec) != m:
            raise ParameterError(f"need {m} function specs")
        f = np.stack([build_field(s, grid, rng) for s in fspec])
    weps = _extremal_eps(wspec) if wspec is not None else None
    if weps is not None:
        fam = analytic.ExtremalFamily(weps, profile)
        w = np.stack([analytic.cell_averages(grid, fam.omega(i)) for i in range(m)])
    elif wspec is None:
        w = np.ones_like(f)
    else:
        if isinstance(wspec, dict):
            wspec = [wspec] * m
        if len(wspec) != m:
            raise ParameterError(f"need {m} weight specs")
        w = np.stack([build_field(s, grid, rng) for s in wspec])
    return SampledFunctions(grid, f, w), w


def _family(cfg, grid, budget, clip="intersect"):
    return family_from_name(grid, cfg.get("family", "dyadic-union"), clip=clip, budget=budget)


def _levels(cfg) -> list[int]:
    g = cfg.get("grid", {})
    lv = cfg.get("levels")
    if lv is None:
        L = int(g.get("L", 4))
        lv = [L, L + 1]
    return [int(v) for v in lv]


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _field_rows(grid: CellGrid, fields: dict[str, np.ndarray]):
    centers = grid.centers().reshape(-1, grid.n)
    flat = {k: v.reshape(-1) for k, v in fields.items()}
    for c, cell in enumerate(np.ndindex(*grid.shape)):
        yield list(cell) + [float(x) for x in centers[c]] + [float(flat[k][c]) for k in fields]


def _field_header(grid: CellGrid, names):
    return [f"i{a}" for a in range(grid.n)] + [f"x{a}" for a in range(grid.n)] + list(names)


# ------------------------------------------------------------ subcommands


def run_maximal(cfg, out: Path, budget, rng) -> tuple[dict, bool]:
    profile = build_profile(cfg)
    grid = build_grid(cfg, profile.n)
    fs, _ = build_data(cfg, profile, grid, rng)
    family = _family(cfg, grid, budget)
    fields = {"maximal": operators.maximal_alpha(fs, profile, family)}
    value, cube = operators.maximal_argmax(fs, profile, family)
    summary = {"max": value, "argmax": None if cube is None else cube.to_json(), "family": family.description}
    if "kernel" in cfg:
        kernel = kernel_from_json(cfg["kernel"], profile.n, profile.m)
        fields["rough_maximal"] = operators.rough_maximal(fs, kernel, profile, family, budget)
        summary["kernel"] = kernel.describe()
        summary["kernel_ls_norm"] = kernel.ls_norm()
    _write_csv(out / "fields.csv", _field_header(grid, fields), _field_rows(grid, fields))
    return summary, True


def run_constant(cfg, out: Path, budget, rng) -> tuple[dict, bool]:
    profile = build_profile(cfg)
    grid = build_grid(cfg, profile.n)
    _, w = build_data(cfg, profile, grid, rng)
    wv = weights.WeightVector(grid, w, profile)
    family = dyadic_family(grid, clip="inside") if cfg.get("family", "dyadic-union") != "all-cubes" \
        else _family(cfg, grid, budget, clip="inside")
    summary = {"family": family.description}
    rows = []
    kinds = cfg.get("constants", ["apq", "ap"])
    if "apq" in kinds:
        r = weights.apq_constant(wv, family, keep_rows=True)
        summary["apq"] = r.to_json()
        rows += [("apq", *lo, side, val) for lo, side, _, val in r.rows]
    if "ap" in kinds:
        r = weights.multi_ap_constant(wv, family, keep_rows=True)
        summary["ap"] = r.to_json()
        rows += [("ap", *lo, side, val) for lo, side, _, val in r.rows]
    if "ainfty" in kinds:
        kw = {} if budget is None else {"budget": budget}
        a = weights.ainfty_constant(grid, wv.nu, family, **kw)
        rh = weights.reverse_holder_check(grid, wv.nu, family, a.value)
        summary["ainfty"] = a.to_json()
        summary["reverse_holder"] = rh.to_json()
    _write_csv(out / "constants.csv", ["kind"] + [f"lo{a}" for a in range(grid.n)] + ["side", "value"], rows)
    return summary, True


def run_sparse(cfg, out: Path, budget, rng) -> tuple[dict, bool]:
    profile = build_profile(cfg)
    grid = build_grid(cfg, profile.n)
    fs, w = build_data(cfg, profile, grid, rng)
    beta = tuple(cfg.get("beta", [0] * grid.n))
    S = sparse.build_sparse(fs, profile, beta, cfg.get("a"))
    verdict = sparse.verify_sparse(S)
    summary = {"family": S.to_json(), "verdict": verdict.to_json()}
    if profile.inv_q > 0:
        nu = np.prod(w, axis=0)
        summary["norm_bound"] = sparse.sparse_norm_bound(S, nu, profile)
    rows = [(t, q.k, *q.j, *[str(x) for x in q.lower()], str(q.side), avg)
            for t in sorted(S.levels) for q, avg in zip(S.levels[t], S.averages[t])]
    _write_csv(out / "sparse.csv", ["t", "k"] + [f"j{a}" for a in range(grid.n)]
               + [f"lower{a}" for a in range(grid.n)] + ["side", "average"], rows)
    return summary, verdict.passed


def run_dominate(cfg, out: Path, budget, rng) -> tuple[dict, bool]:
    profile = build_profile(cfg)
    kernel = kernel_from_json(cfg["kernel"], profile.n, profile.m) if "kernel" in cfg else None
    eps = cfg.get("eps")
    rows, per_level = [], []
    ok = True
    for L in _levels(cfg):
        grid = build_grid(cfg, profile.n, L)
        fs, _ = build_data(cfg, profile, grid, np.random.default_rng(cfg["_seed"]))
        entry = {"L": L}
        if cfg.get("shift", True):
            rep = operators.shift_domination_check(fs, profile, strict=False, budget=budget)
            entry["shift"] = rep.to_json()
            rows.append((L, "shift", rep.worst_ratio))
            ok = ok and rep.passed
        if kernel is not None:
            rep = operators.rough_vs_smooth_check(fs, kernel, profile, budget=budget)
            entry["rough_vs_smooth"] = rep.to_json()
            rows.append((L, "rough_vs_smooth", rep.constant))
        if eps is not None:
            rep = operators.geometric_mean_domination_check(fs, kernel, profile, float(eps), budget=budget)
            entry["geometric_mean"] = rep.to_json()
            rows.append((L, "geometric_mean", rep.constant))
        per_level.append(entry)
    drifts = {}
    for name in ("rough_vs_smooth", "geometric_mean"):
        vals = [r[2] for r in rows if r[1] == name]
        if len(vals) >= 2:
            drifts[name] = max(experiments.drift(a, b) for a, b in zip(vals, vals[1:]))
    _write_csv(out / "dominate.csv", ["L", "check", "value"], rows)
    return {"levels": per_level, "drift": drifts}, ok


def run_sharpness(cfg, out: Path, budget, rng) -> tuple[dict, bool]:
    profile = build_profile(cfg)
    eps = cfg.get("eps", list(experiments.DEFAULT_EPS))
    rep = experiments.sharpness_run(profile, eps, float(cfg.get("scale", 1.0)))
    keys = list(rep.rows[0])
    _write_csv(out / "sharpness.csv", keys, [[row[k] for k in keys] for row in rep.rows])
    return rep.to_json(), rep.passed


def run_weaktype(cfg, out: Path, budget, rng) -> tuple[dict, bool]:
    profile = build_profile(cfg)
    rows, reports = [], []
    for L in _levels(cfg):
        grid = build_grid(cfg, profile.n, L)
        fs, w = build_data(cfg, profile, grid, np.random.default_rng(cfg["_seed"]))
        wv = weights.WeightVector(grid, w, profile)
        rep = experiments.weaktype_run(fs, wv, profile, _family(cfg, grid, budget))
        reports.append(dict(rep.to_json(), L=L))
        rows.append((L, rep.ratio, rep.weak_norm, rep.apq, rep.product_norm))
    ratios = [r[1] for r in rows]
    ok = all(np.isfinite(ratios)) and all(b <= 1.10 * a for a, b in zip(ratios, ratios[1:]))
    _write_csv(out / "weaktype.csv", ["L", "ratio", "weak_norm", "apq", "product_norm"], rows)
    return {"levels": reports, "case": experiments.exponent_case(profile), "stable": ok}, ok


def run_twoweight(cfg, out: Path, budget, rng) -> tuple[dict, bool]:
    profile = build_profile(cfg)
    rows, reports = [], []
    for L in _levels(cfg):
        grid = build_grid(cfg, profile.n, L)
        seeded = np.random.default_rng(cfg["_seed"])
        fs, w = build_data(cfg, profile, grid, seeded)
        u = build_field(cfg["u"], grid, seeded) if "u" in cfg else np.ones(grid.shape)
        r = cfg.get("r", [2 * pp if np.isfinite(pp) else 2.0 for pp in profile.p_primes])
        twc = experiments.TwoWeightConfig(u, w, r)
        rep = experiments.twoweight_check(fs, twc, profile, _family(cfg, grid, budget))
        reports.append(dict(rep.to_json(), L=L))
        rows.append((L, rep.K, rep.lhs, rep.rhs, rep.constant))
    consts = [r[4] for r in rows]
    ok = all(np.isfinite(consts))
    _write_csv(out / "twoweight.csv", ["L", "K", "lhs", "rhs", "empirical_constant"], rows)
    drifts = [experiments.drift(a, b) for a, b in zip(consts, consts[1:])]
    return {"levels": reports, "max_drift": max(drifts) if drifts else 0.0}, ok


RUNNERS = {"maximal": run_maximal, "constant": run_constant, "sparse": run_sparse, "dominate": run_dominate,
           "sharpness": run_sharpness, "weaktype": run_weaktype, "twoweight": run_twoweight}


# ------------------------------------------------------------ entry point


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def run(subcommand: str, config: dict, out: Path, budget: int | None = None, seed: int = 0) -> int:
    out.mkdir(parents=True, exist_ok=True)
    cfg = dict(config)
    cfg["_seed"] = seed
    rng = np.random.default_rng(seed)
    try:
        validate(subcommand, build_profile(cfg), cfg)
        summary, ok = RUNNERS[subcommand](cfg, out, budget, rng)
    except ParameterError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BudgetError as exc:
        print(f"budget exceeded: {exc} (raise --budget to allow it)", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantViolation as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    summary = {"subcommand": subcommand, "config_sha256": config_hash(config), "seed": seed, "budget": budget,
               "passed": bool(ok), **summary}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2, default=_json_default, allow_nan=True)
        fh.write("\n")
    return EXIT_OK if ok else EXIT_CHECK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="roughmax", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="JSON run configuration")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--budget", type=int, default=None, help="cell/compute budget for brute-force paths")
    ap.add_argument("--seed", type=int, default=0, help="seed for random function specs")
    args = ap.parse_args(argv)
    if args.config is None:
        config = {}
    else:
        try:
            config = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return EXIT_INVALID
    return run(args.subcommand, config, args.out, args.budget, args.seed)


if __name__ == "__main__":
    sys.exit(main())
