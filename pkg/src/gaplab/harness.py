"""Config-driven check runner with deterministic JSON/CSV artifacts.

A config file names a sequence of checks; the runner executes them in
declaration order, writes one machine-readable report plus CSV tables, and
exits 0 only if every asserted check passed.  Reports carry no timestamps and
all randomness is seeded, so identical configs give byte-identical output.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import bounds, chebyshev, coarsegrain, detectability, layering, models, spectral
from .errors import GaplabError, SchemaError
from .operators import assemble

CONFIG_SCHEMA = "gaplab-config/1"
REPORT_SCHEMA = "gaplab-report/1"


@dataclass
class CheckResult:
    check: str
    label: str
    passed: bool | None  # None = non-assertive (never affects the exit code)
    details: dict
    csv_rows: list[dict] = field(default_factory=list)
    csv_name: str | None = None

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "label": self.label,
            "passed": self.passed,
            "details": _plain(self.details),
        }


def _plain(obj):
    """Recursively convert numpy scalars/arrays so json.dumps stays deterministic."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    return obj


def _build_model(entry: dict):
    if "model" not in entry:
        raise SchemaError(f"check {entry.get('check')!r} requires a model")
    return models.build_model(entry["model"])


def _solver_kwargs(config: dict) -> dict:
    solver = config.get("solver", {})
    return {"method": solver.get("method", "auto")}


# -- individual checks -----------------------------------------------------------


def _check_gap(entry, config):
    lattice = _build_model(entry)
    rep = spectral.spectrum(assemble(lattice), seed=config["seed"], **_solver_kwargs(config))
    return CheckResult("gap", entry["label"], None, rep.to_dict())


def _check_frustration(entry, config):
    lattice = _build_model(entry)
    h = assemble(lattice)
    rep = spectral.spectrum(h, seed=config["seed"], **_solver_kwargs(config))
    kern = spectral.kernel_projector(h, seed=config["seed"], **_solver_kwargs(config))
    residuals = spectral.frustration_residuals(lattice, kern)
    passed = rep.ground_energy <= 1e-11 and rep.kernel_dim >= 1 and max(residuals, default=0.0) <= 1e-9
    details = {
        "ground_energy": rep.ground_energy,
        "kernel_dim": rep.kernel_dim,
        "max_term_residual": max(residuals, default=0.0),
    }
    return CheckResult("frustration", entry["label"], bool(passed), details)


def _check_local_gap(entry, config):
    lattice = _build_model(entry)
    t = int(entry["params"]["t"])
    value = bounds.local_gap_1d(lattice, t, seed=config["seed"], **_solver_kwargs(config))
    return CheckResult("local_gap", entry["label"], None, {"t": t, "local_gap": value})


def _check_layout(entry, config):
    p = entry["params"]
    layout = coarsegrain.segment_layout(int(p["n"]), int(p["t"]), p.get("boundary", "open"))
    layout.validate()
    return CheckResult("layout", entry["label"], True, layout.to_dict())


def _check_layering(entry, config):
    lattice = _build_model(entry)
    assignment = layering.greedy_layers(lattice)
    ok = assignment.num_layers <= assignment.max_noncommuting + 1
    d = lattice.n_axes
    lattice_bound = (3 * d) ** d
    details = assignment.to_dict()
    details["greedy_bound_holds"] = ok
    details["lattice_bound"] = lattice_bound
    details["lattice_bound_holds"] = (
        assignment.num_layers <= lattice_bound and assignment.max_noncommuting <= lattice_bound
    )
    return CheckResult("layering", entry["label"], bool(ok and details["lattice_bound_holds"]), details)


def _check_detectability(entry, config):
    lattice = _build_model(entry)
    rep = detectability.verify_detectability(lattice, seed=config["seed"], **_solver_kwargs(config))
    return CheckResult("detectability", entry["label"], rep["passed"], rep)


def _check_converse(entry, config):
    lattice = _build_model(entry)
    constant = int(entry["params"].get("constant", 4))
    rep = detectability.verify_converse(lattice, constant, seed=config["seed"], **_solver_kwargs(config))
    return CheckResult("converse", entry["label"], rep["passed"], rep)


def _check_coarse_link(entry, config):
    lattice = _build_model(entry)
    t = int(entry["params"]["t"])
    boundary = "closed" if lattice.boundary[0] == "periodic" else "open"
    layout = coarsegrain.segment_layout(lattice.n_sites, t, boundary)
    cg = coarsegrain.coarse_grain(lattice, layout, seed=config["seed"], **_solver_kwargs(config))
    link = coarsegrain.gap_link_check(lattice, layout, cg=cg, seed=config["seed"], **_solver_kwargs(config))
    match = coarsegrain.kernel_match_report(lattice, cg, seed=config["seed"], **_solver_kwargs(config))
    passed = link["passed"] and match["passed"]
    return CheckResult("coarse_link", entry["label"], bool(passed), {"link": link, "kernel": match})


def _check_lightcone(entry, config):
    lattice = _build_model(entry)
    t = int(entry["params"]["t"])
    boundary = "closed" if lattice.boundary[0] == "periodic" else "open"
    layout = coarsegrain.segment_layout(lattice.n_sites, t, boundary)
    rep = coarsegrain.lightcone_lower_check(lattice, layout, seed=config["seed"], **_solver_kwargs(config))
    return CheckResult("lightcone", entry["label"], rep["passed"], rep)


def _check_step_claim(entry, config):
    p = entry["params"]
    rep = chebyshev.verify_step_claim(
        tuple(p.get("m_values", chebyshev.DEFAULT_M_GRID)),
        tuple(p.get("nu_values", chebyshev.DEFAULT_NU_GRID)),
        int(p.get("x_samples", 10_000)),
    )
    return CheckResult(
        "step_claim", entry["label"], rep.passed, rep.to_dict(), csv_rows=rep.rows, csv_name="step_claim"
    )


def _check_jordan_random(entry, config):
    p = entry["params"]
    dim = int(p.get("dim", 32))
    pairs = int(p.get("pairs", 20))
    seed = p.get("seed", config["seed"])
    rng = np.random.default_rng([seed, 21])
    worst = 0.0
    for _ in range(pairs):
        ranks = rng.integers(1, dim, size=2)
        projs = []
        for r in ranks:
            m = rng.standard_normal((dim, int(r))) + 1j * rng.standard_normal((dim, int(r)))
            q, _ = np.linalg.qr(m)
            projs.append(q @ q.conj().T)
        dec = detectability.jordan_decompose(projs[0], projs[1])
        worst = max(worst, max(dec.residuals.values()))
    passed = worst <= 1e-9
    return CheckResult(
        "jordan_random", entry["label"], bool(passed), {"pairs": pairs, "dim": dim, "max_residual": worst}
    )


def _check_pair_overlap(entry, config):
    p = entry["params"]
    rep = detectability.verify_pair_overlap_bound(
        int(p.get("samples", 1000)), float(p["nu"]), seed=p.get("seed", config["seed"])
    )
    return CheckResult("pair_overlap", entry["label"], rep["passed"], rep)


def _check_threshold_1d(entry, config):
    lattice = _build_model(entry)
    t = int(entry["params"]["t"])
    rep = bounds.verify_threshold_1d(lattice, t, seed=config["seed"], **_solver_kwargs(config))
    return CheckResult("threshold_1d", entry["label"], rep.holds, rep.to_dict())


def _check_threshold_lattice(entry, config):
    lattice = _build_model(entry)
    sizes = entry["params"]["sizes"]
    rep = bounds.verify_threshold_lattice(lattice, sizes, seed=config["seed"], **_solver_kwargs(config))
    return CheckResult("threshold_lattice", entry["label"], rep.holds, rep.to_dict())


def _check_comparisons(entry, config):
    lattice = _build_model(entry)
    ts = entry["params"]["ts"]
    reps = bounds.comparison_bounds(lattice, ts, seed=config["seed"], **_solver_kwargs(config))
    asserted = [r for r in reps if r.holds is not None]
    passed = all(r.holds for r in asserted) if asserted else None
    return CheckResult("comparisons", entry["label"], passed, {"reports": [r.to_dict() for r in reps]})


def _check_absorption(entry, config):
    lattice = _build_model(entry)
    p = entry["params"]
    rep = coarsegrain.absorption_check(
        lattice,
        tuple(p["s_interval"]),
        tuple(p["t_interval"]),
        int(p["q"]),
        probes=int(p.get("probes", 10)),
        seed=p.get("seed", config["seed"]),
    )
    return CheckResult("absorption", entry["label"], rep["passed"], rep)


def _check_sweep(entry, config):
    lattice = _build_model(entry)
    rows = bounds.sweep_local_gaps(lattice, entry["params"]["ts"], seed=config["seed"], **_solver_kwargs(config))
    return CheckResult("sweep", entry["label"], None, {"rows": rows}, csv_rows=rows, csv_name="sweep")


CHECKS = {
    "gap": _check_gap,
    "frustration": _check_frustration,
    "local_gap": _check_local_gap,
    "layout": _check_layout,
    "layering": _check_layering,
    "detectability": _check_detectability,
    "converse": _check_converse,
    "coarse_link": _check_coarse_link,
    "lightcone": _check_lightcone,
    "step_claim": _check_step_claim,
    "jordan_random": _check_jordan_random,
    "pair_overlap": _check_pair_overlap,
    "threshold_1d": _check_threshold_1d,
    "threshold_lattice": _check_threshold_lattice,
    "comparisons": _check_comparisons,
    "absorption": _check_absorption,
    "sweep": _check_sweep,
}

_RANDOMIZED = {"jordan_random", "pair_overlap", "absorption"}


def validate_config(config: dict) -> dict:
    """Schema validation: unknown keys are rejected at every level."""
    if not isinstance(config, dict):
        raise SchemaError("config must be a JSON object")
    if config.get("schema") != CONFIG_SCHEMA:
        raise SchemaError(f"unsupported config schema {config.get('schema')!r}, expected {CONFIG_SCHEMA!r}")
    unknown = set(config) - {"schema", "seed", "solver", "output", "checks"}
    if unknown:
        raise SchemaError(f"unknown config keys: {sorted(unknown)}")
    if "checks" not in config or not isinstance(config["checks"], list):
        raise SchemaError("config requires a 'checks' list")
    solver = config.get("solver", {})
    if set(solver) - {"method", "zero_threshold"}:
        raise SchemaError(f"unknown solver keys: {sorted(set(solver) - {'method', 'zero_threshold'})}")
    output = config.get("output", {})
    if set(output) - {"report", "csv_dir"}:
        raise SchemaError(f"unknown output keys: {sorted(set(output) - {'report', 'csv_dir'})}")
    needs_seed = False
    for i, entry in enumerate(config["checks"]):
        if not isinstance(entry, dict):
            raise SchemaError(f"check {i} must be an object")
        unknown = set(entry) - {"check", "label", "model", "params"}
        if unknown:
            raise SchemaError(f"check {i}: unknown keys {sorted(unknown)}")
        kind = entry.get("check")
        if kind not in CHECKS:
            raise SchemaError(f"check {i}: unknown check {kind!r}; known: {sorted(CHECKS)}")
        if kind in _RANDOMIZED:
            needs_seed = True
        model = entry.get("model")
        if model is not None and model.get("kind") == "random_ff":
            needs_seed = True
    if needs_seed and "seed" not in config:
        raise SchemaError("config runs randomized checks; a top-level 'seed' is required")
    config.setdefault("seed", 0)
    config["seed"] = int(config["seed"])
    return config


def bundled_config(name: str) -> dict:
    ref = resources.files("gaplab").joinpath("configs", f"{name}.json")
    if not ref.is_file():
        available = [p.name[:-5] for p in resources.files("gaplab").joinpath("configs").iterdir()]
        raise SchemaError(f"no bundled config {name!r}; available: {sorted(available)}")
    return json.loads(ref.read_text())


def load_config(path: str) -> dict:
    with open(path) as fh:
        return validate_config(json.load(fh))


def run(config: dict, out_dir: str) -> int:
    """Execute all checks; returns the process exit code (0 ok, 1 failed, 2 invalid)."""
    try:
        config = validate_config(dict(config))
    except SchemaError as exc:
        print(f"config error: {exc}")
        return 2
    os.makedirs(out_dir, exist_ok=True)

    entries = []
    for i, raw in enumerate(config["checks"]):
        entry = dict(raw)
        entry.setdefault("params", {})
        entry.setdefault("label", f"{entry['check']}_{i}")
        entries.append(entry)

    threads = int(os.environ.get("GAPLAB_THREADS", "1"))

    def run_one(entry):
        return CHECKS[entry["check"]](entry, config)

    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run_one, entries))  # order = declaration order
        else:
            results = [run_one(entry) for entry in entries]
    except (GaplabError, KeyError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}")
        return 2

    failed = [r for r in results if r.passed is False]
    report = {
        "schema": REPORT_SCHEMA,
        "config": _plain(config),
        "results": [r.to_dict() for r in results],
        "n_checks": len(results),
        "n_failed": len(failed),
        "passed": not failed,
    }
    report_path = os.path.join(out_dir, config.get("output", {}).get("report", "report.json"))
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")

    csv_dir = os.path.join(out_dir, config.get("output", {}).get("csv_dir", "tables"))
    for i, result in enumerate(results):
        if result.csv_rows:
            os.makedirs(csv_dir, exist_ok=True)
            path = os.path.join(csv_dir, f"{i:02d}_{result.csv_name or result.check}.csv")
            write_csv(path, result.csv_rows)

    for i, result in enumerate(results):
        if result.passed is False:
            path = os.path.join(out_dir, f"counterexample_{i:02d}_{result.check}.json")
            with open(path, "w") as fh:
                json.dump(result.to_dict(), fh, indent=1, sort_keys=True)
                fh.write("\n")

    for result in results:
        status = {True: "pass", False: "FAIL", None: "info"}[result.passed]
        print(f"[{status}] {result.label}")
    print(f"report: {report_path}")
    return 1 if failed else 0


def write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(_plain(row))
