"""Batch experiment driver.

    symmin <kind> [--config FILE] [--domain ...] [--group ...] ...
    symmin run --config FILE          # kind taken from the file

A config file is flat ``key = value`` text (``#`` starts a comment); keys
are ExperimentConfig field names, and command-line flags override them.
Every JSON report has sorted keys and a single ``timestamp`` field, so two
runs of the same config differ in that field only.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from symmin import average as avg
from symmin.energy import parse_functional, parse_nonlinearity
from symmin.errors import FieldIOError, InvalidParameter, SymminError
from symmin.field import (
    GridFunction,
    make_grid,
    parse_domain_spec,
    random_field,
    require_invariant_domain,
)
from symmin.group import parse_group_spec
from symmin.io import export_field, finite_or_none, import_field
from symmin.probes import (
    ProbeReport,
    action_continuity_probe,
    mean_value_probe,
    polyconvexity_gap,
    random_matrix_field,
    tau,
)
from symmin.solve import MinimizeOptions, symmetrize_and_polish
from symmin.verify import run_suite

KINDS = (
    "average",
    "minimize",
    "probe-meanvalue",
    "probe-polyconvex",
    "probe-continuity",
    "verify-suite",
)


@dataclass
class ExperimentConfig:
    kind: str = "verify-suite"
    domain: str = "square"
    resolution: int = 33
    group: str = "dihedral:4"
    functional: str = "plaplace:p=2"
    nonlinearity: str = "linear:1"
    seed: int = 0
    smoothness: int = 0
    out: str = "symmin_out"
    input: str | None = None
    max_iters: int = 5000
    grad_tol: float = 1e-8
    energy_floor: float = -1e12
    polish: bool = True
    pgm: bool = False
    samples: int = 10  # random fields per verify-suite check
    pairs: int = 500  # element pairs for the continuity probe
    k: int = 2  # matrix field shape for the polyconvexity probe
    n: int = 2
    s: int = 2

    def validate(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.resolution < 3:
            raise InvalidParameter("resolution must be >= 3")
        if self.samples < 1 or self.pairs < 1:
            raise InvalidParameter("samples and pairs must be positive")
        if self.smoothness < 0:
            raise InvalidParameter("smoothness must be >= 0")
        parse_domain_spec(self.domain)
        parse_group_spec(self.group)
        parse_functional(self.functional, parse_nonlinearity(self.nonlinearity))
        self.solver_options()
        return self

    def solver_options(self) -> MinimizeOptions:
        return MinimizeOptions(
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            energy_floor=self.energy_floor,
            seed=self.seed,
        )


def _coerce(name, raw, typ):
    try:
        if typ == "bool":
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return str(raw).strip()
    except ValueError:
        raise InvalidParameter(f"bad value {raw!r} for config key {name!r}") from None


_TYPES = {f.name: str(f.type).split(" ")[0] for f in fields(ExperimentConfig)}


def read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FieldIOError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not eq:
            raise InvalidParameter(f"config line {lineno}: expected key=value")
        if key not in _TYPES:
            raise InvalidParameter(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, val.strip(), _TYPES[key])
    return values


# output helpers --------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return finite_or_none(x)
    return x


def write_json(path, payload: dict) -> Path:
    body = _jsonable(payload)
    body["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(body, sort_keys=True, indent=2, allow_nan=False) + "\n")
    except OSError as exc:
        raise FieldIOError(f"cannot write {path}: {exc}") from exc
    return path


def write_history(path, result) -> Path:
    lines = ["iteration,energy,residual"]
    lines += [f"{i},{e!r},{r!r}" for i, e, r in result.history_rows()]
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise FieldIOError(f"cannot write {path}: {exc}") from exc
    return path


def _export(cfg, u: GridFunction, name: str):
    export_field(u, f"{cfg.out}_{name}.txt")
    if cfg.pgm:
        export_field(u, f"{cfg.out}_{name}.pgm", format="pgm")


def _config_dict(cfg):
    return dataclasses.asdict(cfg)


# experiments -----------------------------------------------------------------


def _setup(cfg):
    G = parse_group_spec(cfg.group)
    F = parse_functional(cfg.functional, parse_nonlinearity(cfg.nonlinearity))
    if cfg.input:
        u = import_field(cfg.input)
        grid = u.grid
    else:
        grid = make_grid(parse_domain_spec(cfg.domain), cfg.resolution)
        u = None
    require_invariant_domain(G, grid)
    if u is None:
        u = random_field(grid, cfg.seed, cfg.smoothness)
    return G, F, grid, u


def run_average(cfg) -> int:
    G, F, grid, u = _setup(cfg)
    ug = avg.g_average(u, G)
    report = avg.average_report(F, u, G)
    _export(cfg, ug, "avg")
    write_json(f"{cfg.out}_report.json", {**report.to_dict(), "config": _config_dict(cfg)})
    return 0


def run_minimize(cfg) -> int:
    G, F, grid, u0 = _setup(cfg)
    if not u0.is_zero_trace():
        u0 = u0.project()
    res = symmetrize_and_polish(F, G, u0, cfg.solver_options(), polish=cfg.polish)
    _export(cfg, res.raw.u_min, "u_raw")
    _export(cfg, res.averaged, "u_avg")
    write_history(f"{cfg.out}_history_raw.csv", res.raw)
    summary = {
        "config": _config_dict(cfg),
        "functional": str(F),
        "group": G.describe(),
        "raw": _run_summary(res.raw),
        "energy_avg": res.averaged_energy,
        "average_report": res.report.to_dict(),
    }
    if res.polished is not None:
        _export(cfg, res.polished.u_min, "u_polished")
        write_history(f"{cfg.out}_history_polished.csv", res.polished)
        summary["polished"] = _run_summary(res.polished)
        summary["polished_invariance_residual"] = res.polished_invariance
    write_json(f"{cfg.out}_summary.json", summary)
    return 0


def _run_summary(r):
    return {
        "energy": r.energy,
        "iterations": r.iterations,
        "residual": r.residual,
        "converged": r.converged,
        "message": r.message,
    }


def run_probe_meanvalue(cfg) -> int:
    G, _, grid, u = _setup(cfg)
    g, dist = mean_value_probe(u, G)
    report = ProbeReport(
        "mean-value",
        inputs={"config": _config_dict(cfg)},
        results={"closest_element": g.label, "distance": dist, "scale": u.l2()},
    )
    write_json(f"{cfg.out}_probe.json", report.to_dict())
    return 0


def run_probe_polyconvex(cfg) -> int:
    G = parse_group_spec(cfg.group)
    grid = make_grid(parse_domain_spec(cfg.domain), cfg.resolution)
    require_invariant_domain(G, grid)
    Phi = random_matrix_field(grid, cfg.k, cfg.n, cfg.seed)
    gap = polyconvexity_gap(Phi, G, cfg.s)
    report = ProbeReport(
        "polyconvexity",
        inputs={"config": _config_dict(cfg)},
        results={"gap": gap, "tau": tau(cfg.k, cfg.n), "nodes": int(grid.mask.sum())},
    )
    write_json(f"{cfg.out}_probe.json", report.to_dict())
    return 0


def run_probe_continuity(cfg) -> int:
    G, _, grid, v = _setup(cfg)
    est = action_continuity_probe(v, G, pair_samples=cfg.pairs, seed=cfg.seed)
    results = {"c_v": est.c_v, "pairs": est.pairs, "worst_pair": est.worst_pair, "min_distance": est.min_distance}
    if G.kind == "so2-quadrature":
        finer = parse_group_spec(f"so2:{2 * G.order}")
        est2 = action_continuity_probe(v, finer, pair_samples=cfg.pairs, seed=cfg.seed)
        results["c_v_refined"] = est2.c_v
        results["refined_nodes"] = finer.order
        results["relative_change"] = abs(est2.c_v - est.c_v) / max(est.c_v, est2.c_v, 1e-300)
    report = ProbeReport("action-continuity", inputs={"config": _config_dict(cfg)}, results=results)
    write_json(f"{cfg.out}_probe.json", report.to_dict())
    return 0


def run_verify_suite(cfg) -> int:
    G = parse_group_spec(cfg.group)
    F = parse_functional(cfg.functional, parse_nonlinearity(cfg.nonlinearity))
    grid = make_grid(parse_domain_spec(cfg.domain), cfg.resolution)
    require_invariant_domain(G, grid)
    suite = run_suite(grid, G, [F], n_fields=cfg.samples, seed=cfg.seed, solver=cfg.solver_options())
    write_json(f"{cfg.out}_verify.json", {**suite.to_dict(), "config": _config_dict(cfg)})
    for c in suite.checks:
        if not c.passed:
            print(f"FAILED {c.name}: {c.value:.3g} vs {c.tolerance:.3g} {c.note}", file=sys.stderr)
    return 0 if suite.passed else 1


RUNNERS = {
    "average": run_average,
    "minimize": run_minimize,
    "probe-meanvalue": run_probe_meanvalue,
    "probe-polyconvex": run_probe_polyconvex,
    "probe-continuity": run_probe_continuity,
    "verify-suite": run_verify_suite,
}


def run(config: ExperimentConfig) -> int:
    config.validate()
    return RUNNERS[config.kind](config)


# argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symmin", description="Symmetrization experiments on grid functions.")
    ap.add_argument("kind", choices=KINDS + ("run",), help="experiment to run ('run' reads it from --config)")
    ap.add_argument("--config", help="flat key=value config file")
    add = ap.add_argument
    add("--domain", help="interval | square | disk | annulus:r | regular_polygon:k")
    add("--resolution", type=int)
    add("--group", help="cyclic:n | dihedral:n | reflect1d | so2:N")
    add("--functional", help="plaplace:p=_,eps=_ | polyharmonic:m=_")
    add("--nonlinearity", help="linear:l | quadratic:a,b | negexp | expr:<f(s)>")
    add("--seed", type=int)
    add("--smoothness", type=int, help="smoothing passes for random fields")
    add("--out", help="output prefix")
    add("--input", help="GridFunction text file to use instead of a random field")
    add("--max-iters", dest="max_iters", type=int)
    add("--grad-tol", dest="grad_tol", type=float)
    add("--energy-floor", dest="energy_floor", type=float)
    add("--no-polish", dest="polish", action="store_const", const=False)
    add("--pgm", action="store_const", const=True, help="also write PGM heatmaps")
    add("--samples", type=int)
    add("--pairs", type=int)
    add("-k", type=int)
    add("-n", type=int)
    add("-s", type=int)
    return ap


def config_from_args(args) -> ExperimentConfig:
    values = read_config(args.config) if args.config else {}
    for f in fields(ExperimentConfig):
        given = getattr(args, f.name, None)
        if given is not None and f.name != "kind":
            values[f.name] = given
    if args.kind != "run":
        values["kind"] = args.kind
    elif "kind" not in values:
        raise InvalidParameter("'run' needs a config file with a kind key")
    return ExperimentConfig(**values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(config_from_args(args))
    except SymminError as exc:
        print(f"symmin: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
