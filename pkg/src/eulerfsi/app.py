"""Command-line runner: configuration, run orchestration and output files.

Two commands are provided::

    eulerfsi run --config run.json [--override key=value ...]
    eulerfsi mms-rates --case {1,2} --levels 0..2 [--output DIR] [--override key=value ...]

A run writes ``effective_config.json`` (defaults plus every override),
``diagnostics.csv``, ``errors.csv`` for manufactured-solution scenarios and
VTK snapshots ``snapshots/step_%06d.vtk``. Every file is written atomically.
Failures are printed to stderr as one JSON object and, when the output
directory exists, saved as ``error.json``.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics
from .b_solver import StabilizationError
from .linsolve import LinearSolveError, SolverOptions
from .materials import MaterialParams
from .mesh import PATTERNS, build_uniform
from .scenarios import MMS_FINAL_TIME, ScenarioError, build_contact, build_mms, center_of_mass_y
from .state import SimState, make_spaces
from .stepper import FixedPointConfig, Problem, SubiterationError, advance
from .vtk import atomic_write_text, write_unstructured

log = logging.getLogger(__name__)

SCENARIOS = ("mms-1", "mms-2", "contact-1", "contact-2", "custom")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class RunConfig:
    scenario: str = "mms-1"
    n_per_side: int = 5
    pattern: str = "union-jack"
    dt: float = 0.2
    final_time: float = MMS_FINAL_TIME
    epsilon: object = None  # number, "4*dx" style rule, or None for the scenario default
    init_profile: str = "sharp"  # contact and custom scenarios
    fixed_point: dict = field(default_factory=lambda: {"rel_tol": 1e-8, "max_iter": 50})
    linear: dict = field(default_factory=lambda: {"method": "direct-lu", "rel_tol": 1e-10})
    output: dict = field(default_factory=lambda: {"directory": "out", "csv": True, "vtk_stride": None})
    materials: dict = field(default_factory=dict)  # MaterialParams overrides
    allow_unstabilized: bool = False

    @property
    def dx(self) -> float:
        return 1.0 / self.n_per_side

    @property
    def n_steps(self) -> int:
        return int(round(self.final_time / self.dt))

    def resolved_epsilon(self) -> float | None:
        """The interface width after applying a ``"<k>*dx"`` rule."""
        eps = self.epsilon
        if eps is None:
            return 4.0 * self.dx if self.scenario.startswith("mms") else None
        if isinstance(eps, str):
            text = eps.replace(" ", "")
            if not text.endswith("*dx"):
                raise ValueError(f"epsilon rule {eps!r} must look like '4*dx'")
            return float(text[:-3]) * self.dx
        return float(eps)

    def vtk_stride(self) -> int:
        stride = self.output.get("vtk_stride")
        if stride is None:
            return 50 if self.scenario.startswith("contact") else 1
        return int(stride)

    def validate(self) -> list[str]:
        p = []
        if self.scenario not in SCENARIOS:
            p.append(f"scenario must be one of {list(SCENARIOS)}, got {self.scenario!r}")
        if not _is_positive_int(self.n_per_side):
            p.append(f"n_per_side must be a positive integer, got {self.n_per_side!r}")
        if self.pattern not in PATTERNS:
            p.append(f"pattern must be one of {list(PATTERNS)}, got {self.pattern!r}")
        dt_ok = _is_number(self.dt) and self.dt > 0
        if not dt_ok:
            p.append(f"dt must be > 0, got {self.dt!r}")
        if not _is_number(self.final_time):
            p.append(f"final_time must be a number, got {self.final_time!r}")
        elif dt_ok:
            if self.final_time < self.dt:
                p.append(f"final_time ({self.final_time}) must be >= dt ({self.dt})")
            elif abs(self.n_steps * self.dt - self.final_time) > 1e-9 * self.final_time:
                p.append(f"final_time ({self.final_time}) must be a whole number of steps of dt ({self.dt})")
        if self.init_profile not in ("sharp", "tanh"):
            p.append(f"init_profile must be 'sharp' or 'tanh', got {self.init_profile!r}")
        if _is_positive_int(self.n_per_side):
            try:
                eps = self.resolved_epsilon()
                if eps is not None and not eps > 0:
                    p.append(f"epsilon must be > 0 after rule resolution, got {eps}")
            except (TypeError, ValueError) as exc:
                p.append(str(exc))
        fp = dict(self.fixed_point)
        unknown = set(fp) - {"rel_tol", "abs_tol", "max_iter", "relaxation", "divergence_limit",
                               "acceleration", "anderson_depth"}
        if unknown:
            p.append(f"unknown fixed_point keys {sorted(unknown)}")
        else:
            try:
                FixedPointConfig(**fp)
            except (TypeError, ValueError) as exc:
                p.append(f"fixed_point: {exc}")
        try:
            SolverOptions(**self.linear)
        except (TypeError, ValueError) as exc:
            p.append(f"linear: {exc}")
        unknown = set(self.output) - {"directory", "csv", "vtk_stride"}
        if unknown:
            p.append(f"unknown output keys {sorted(unknown)}")
        stride = self.output.get("vtk_stride")
        if stride is not None and (not isinstance(stride, int) or stride < 0):
            p.append(f"output.vtk_stride must be a non-negative integer, got {stride!r}")
        if not self.output.get("directory"):
            p.append("output.directory must be set")
        else:
            p.extend(_check_writable(Path(self.output["directory"])))
        unknown = set(self.materials) - set(MaterialParams.field_names())
        if unknown:
            p.append(f"unknown material parameters {sorted(unknown)}")
        elif self.scenario in SCENARIOS and _is_positive_int(self.n_per_side):
            try:
                _material_params(self)
            except (ValueError, ScenarioError) as exc:
                p.append(str(exc))
        return p

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilon_resolved"] = self.resolved_epsilon()
        d["output"] = dict(d["output"], vtk_stride=self.vtk_stride())
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        data.pop("epsilon_resolved", None)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError([f"unknown configuration keys {sorted(unknown)}"])
        cfg = cls()
        for key, value in data.items():
            default = getattr(cfg, key)
            if isinstance(default, dict) and isinstance(value, dict):
                value = {**default, **value}
            setattr(cfg, key, value)
        return cfg


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_positive_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and x >= 1


def _check_writable(path: Path) -> list[str]:
    probe = path
    while not probe.exists():
        if probe.parent == probe:
            break
        probe = probe.parent
    if probe.exists() and not probe.is_dir():
        return [f"output.directory {str(path)!r} is not a directory"]
    if probe.exists() and not os.access(probe, os.W_OK):
        return [f"output.directory {str(path)!r} is not writable"]
    return []


def parse_override(text: str):
    """``"a.b=1e-3"`` -> ``(["a", "b"], 0.001)``; values are parsed as JSON when possible."""
    if "=" not in text:
        raise ConfigError([f"override {text!r} is not of the form key=value"])
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_overrides(data: dict, overrides) -> dict:
    """Return a copy of ``data`` with dotted-key overrides applied.

    Bare material parameter names (``mu_f=0.1``) are routed into ``materials``.
    """
    out = copy.deepcopy(data)
    material_names = set(MaterialParams.field_names())
    for text in overrides or ():
        path, value = parse_override(text)
        if len(path) == 1 and path[0] in material_names:
            path = ["materials", path[0]]
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError([f"override {text!r} descends into a non-table value"])
        node[path[-1]] = value
    return out


def load_config(path=None, overrides=()) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"cannot read config {str(path)!r}: {exc}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError(["config file must hold a JSON object"])
    cfg = RunConfig.from_dict(apply_overrides(data, overrides))
    problems = cfg.validate()
    if problems:
        raise ConfigError(problems)
    return cfg


def _material_params(cfg: RunConfig) -> MaterialParams:
    """Scenario parameters with the configured epsilon and overrides applied."""
    eps = cfg.resolved_epsilon()
    if cfg.scenario.startswith("mms"):
        from .scenarios import mms_params

        prm = mms_params(int(cfg.scenario[-1]), eps)
    elif cfg.scenario.startswith("contact"):
        from .scenarios import contact_params

        prm = contact_params(int(cfg.scenario[-1]))
        if eps is not None:
            prm = prm.replace(epsilon=eps)
    else:
        prm = MaterialParams() if eps is None else MaterialParams(epsilon=eps)
    mats = dict(cfg.materials)
    if "body_force" in mats:
        mats["body_force"] = tuple(mats["body_force"])
    return prm.replace(**mats) if mats else prm


@dataclass
class RunResult:
    config: RunConfig
    state: SimState
    records: list
    errors: diagnostics.ErrorSummary | None = None
    center_of_mass: list = field(default_factory=list)  # (t, y) pairs, contact and custom scenarios


def setup(cfg: RunConfig):
    """Mesh, problem and initial state for ``cfg``."""
    mesh = build_uniform(cfg.n_per_side, cfg.pattern)
    spaces = make_spaces(mesh)
    prm = _material_params(cfg)
    mms = None
    if cfg.scenario.startswith("mms"):
        _, mms, init = build_mms(int(cfg.scenario[-1]), mesh, epsilon=prm.epsilon, spaces=spaces)
        phi_bc = "natural"
    else:
        case = int(cfg.scenario[-1]) if cfg.scenario.startswith("contact") else 1
        _, _, init = build_contact(case, mesh, cfg.init_profile, spaces, prm)
        phi_bc = 1.0 if cfg.scenario.startswith("contact") else "natural"
    problem = Problem(
        spaces,
        prm,
        mms=mms,
        phi_bc=phi_bc,
        linear=SolverOptions(**cfg.linear),
        allow_unstabilized=cfg.allow_unstabilized,
    )
    return problem, SimState.initial(init, cfg.dt)


def snapshot(path, state: SimState) -> None:
    """VTK file with vertex values of phi, v, B and p."""
    mesh = state.mesh
    nv = mesh.n_vertices

    def vertex_values(f):
        sp_ = f.space
        return np.stack([f.coeffs[c * sp_.n_scalar : c * sp_.n_scalar + nv] for c in range(sp_.ncomp)], axis=-1)

    data = {"phi": vertex_values(state.phi)[:, 0], "v": vertex_values(state.v), "B": vertex_values(state.B),
            "p": vertex_values(state.p)[:, 0]}
    write_unstructured(path, mesh.vertices, mesh.triangles, data, title=f"eulerfsi step {state.step_index} t={state.t!r}")


def errors_to_csv(summary: diagnostics.ErrorSummary, t: float) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "e_v", "e_B", "e_phi", "absolute_v", "absolute_B", "absolute_phi"])
    w.writerow([repr(t), repr(summary.e_v), repr(summary.e_B), repr(summary.e_phi),
                summary.absolute_v, summary.absolute_B, summary.absolute_phi])
    return buf.getvalue()


def run(cfg: RunConfig, write: bool = True, callback=None) -> RunResult:
    """Run one configured simulation.

    Solver failures propagate (SubiterationError, LinearSolveError,
    StabilizationError); when ``write`` is set the diagnostics gathered so far
    are saved first.
    """
    problems = cfg.validate()
    if problems:
        raise ConfigError(problems)
    out = Path(cfg.output["directory"])
    write_csv = write and cfg.output.get("csv", True)
    stride = cfg.vtk_stride() if write else 0
    problem, state = setup(cfg)
    if write:
        atomic_write_text(out / "effective_config.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    track_com = not cfg.scenario.startswith("mms")
    records = [diagnostics.record(state, problem.params)]
    state.history = records
    com = [(state.t, center_of_mass_y(state.phi))] if track_com else []
    if stride:
        snapshot(out / "snapshots" / f"step_{0:06d}.vtk", state)
    fp = FixedPointConfig(**cfg.fixed_point)
    try:
        for n in range(cfg.n_steps):
            state = advance(state, problem, fp)
            if track_com:
                com.append((state.t, center_of_mass_y(state.phi)))
            if stride and ((n + 1) % stride == 0 or n + 1 == cfg.n_steps):
                snapshot(out / "snapshots" / f"step_{n + 1:06d}.vtk", state)
            log.info("step %d t=%.6g iterations=%d", state.step_index, state.t, state.half["iterations"])
            if callback is not None:
                callback(state)
    finally:
        if write_csv:
            diagnostics.write_csv(out / "diagnostics.csv", records)
            if track_com:
                lines = ["t,center_of_mass_y"] + [f"{t!r},{y!r}" for t, y in com]
                atomic_write_text(out / "center_of_mass.csv", "\n".join(lines) + "\n")
    errors = None
    if problem.mms is not None:
        errors = diagnostics.relative_errors(state, problem.mms, cfg.final_time)
        if write_csv:
            atomic_write_text(out / "errors.csv", errors_to_csv(errors, state.t))
    return RunResult(cfg, state, records, errors, com)


def level_config(case: int, level: int, base: RunConfig | None = None) -> RunConfig:
    """Refinement level ``i``: ``dt = dx = 0.2 / 2**i`` and ``epsilon = 4 dx``."""
    cfg = copy.deepcopy(base) if base is not None else RunConfig()
    cfg.scenario = f"mms-{case}"
    cfg.n_per_side = 5 * 2**level
    cfg.dt = 0.2 / 2**level
    cfg.final_time = MMS_FINAL_TIME
    cfg.epsilon = "4*dx"
    return cfg


RATE_COLUMNS = ["level", "dt", "dx", "e_v", "e_B", "e_phi", "rate_v", "rate_B", "rate_phi", "max_iterations"]


def rates_table(rows: list[dict]) -> list[dict]:
    """Attach rates between consecutive rows (first row gets empty rates)."""
    out = []
    for k, row in enumerate(rows):
        row = dict(row)
        for name in ("v", "B", "phi"):
            if k == 0:
                row[f"rate_{name}"] = ""
            else:
                row[f"rate_{name}"] = diagnostics.convergence_rates([rows[k - 1][f"e_{name}"], row[f"e_{name}"]])[0]
        out.append(row)
    return out


def rates_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RATE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rates_table(rows):
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


class SweepError(RuntimeError):
    """A refinement level failed; ``rows`` holds the completed levels."""

    def __init__(self, level: int, cause: Exception, rows: list[dict]):
        self.level = level
        self.cause = cause
        self.rows = rows
        super().__init__(f"level {level} failed: {cause}")


def mms_rates(case: int, levels, base: RunConfig | None = None, write: bool = True) -> list[dict]:
    """Run the refinement sweep and return the table rows (with rates).

    ``rates.csv`` is rewritten after every level, so a failing level leaves the
    completed part of the table on disk.
    """
    levels = list(levels)
    if len(levels) < 2:
        warnings.warn("a single refinement level gives no convergence rates", stacklevel=2)
    base = base or RunConfig()
    root = Path(base.output["directory"])
    rows = []
    for i in levels:
        cfg = level_config(case, i, base)
        cfg.output = dict(base.output, directory=str(root / f"level_{i}"))
        try:
            res = run(cfg, write=write)
        except (SubiterationError, LinearSolveError, StabilizationError) as exc:
            raise SweepError(i, exc, rows) from exc
        iters = max((r.subiter_count for r in res.records), default=0)
        rows.append({"level": i, "dt": cfg.dt, "dx": cfg.dx, "e_v": res.errors.e_v, "e_B": res.errors.e_B,
                     "e_phi": res.errors.e_phi, "max_iterations": iters})
        if write:
            atomic_write_text(root / "rates.csv", rates_to_csv(rows))
    return rates_table(rows)


def parse_levels(text: str) -> list[int]:
    """``"0..2"`` -> ``[0, 1, 2]``; ``"3"`` -> ``[3]``; ``"0,2"`` -> ``[0, 2]``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level range {text!r}; use e.g. 0..2") from None


def failure_record(exc: Exception) -> dict:
    rec = {"status": "error", "type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        rec["problems"] = exc.problems
    if isinstance(exc, SweepError):
        rec["level"] = exc.level
        rec["completed_levels"] = [r["level"] for r in exc.rows]
        exc = exc.cause
        rec["cause"] = type(exc).__name__
    for attr in ("step_index", "subproblem"):
        if getattr(exc, attr, None) not in (None, ""):
            rec[attr] = getattr(exc, attr)
    if isinstance(exc, StabilizationError):
        rec["subproblem"] = "tensor-transport"
    return rec


def _report_failure(exc: Exception, directory: Path | None) -> int:
    rec = failure_record(exc)
    print(json.dumps(rec), file=sys.stderr)
    if directory is not None and not isinstance(exc, ConfigError):
        directory.mkdir(parents=True, exist_ok=True)
        atomic_write_text(directory / "error.json", json.dumps(rec, indent=2) + "\n")
    return EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eulerfsi", description="Eulerian diffuse-interface FSI solver")
    ap.add_argument("-v", "--verbose", action="store_true", help="log every time step")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one configured simulation")
    r.add_argument("--config", help="JSON configuration file (defaults are used when omitted)")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration entry, e.g. dt=0.1 or fixed_point.max_iter=20")

    m = sub.add_parser("mms-rates", help="manufactured-solution refinement study")
    m.add_argument("--case", type=int, choices=(1, 2), required=True)
    m.add_argument("--levels", type=parse_levels, default=[0, 1, 2], help="refinement levels, e.g. 0..2")
    m.add_argument("--output", default="mms_rates", help="output directory")
    m.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration entry (material names go to the material parameters)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "run":
        try:
            cfg = load_config(args.config, args.override)
        except ConfigError as exc:
            return _report_failure(exc, None)
        out = Path(cfg.output["directory"])
        try:
            res = run(cfg)
        except (SubiterationError, LinearSolveError, StabilizationError, ScenarioError) as exc:
            return _report_failure(exc, out)
        summary = {"status": "ok", "steps": res.state.step_index, "t": res.state.t, "output": str(out)}
        if res.errors is not None:
            summary.update(e_v=res.errors.e_v, e_B=res.errors.e_B, e_phi=res.errors.e_phi)
        print(json.dumps(summary))
        return EXIT_OK

    try:
        base = load_config(None, [f"output.directory={json.dumps(args.output)}", f"scenario=\"mms-{args.case}\"",
                                  *args.override])
    except ConfigError as exc:
        return _report_failure(exc, None)
    out = Path(args.output)
    try:
        rows = mms_rates(args.case, args.levels, base)
    except SweepError as exc:
        return _report_failure(exc, out)
    for row in rows:
        print(json.dumps(row))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
