"""``conemetric`` command line: checks, model evaluations, torus solves and reports.

Exit codes: 0 verdict delivered, 2 malformed input, 3 hypothesis violation,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import divisor as dv
from .errors import (
    ConeMetricError,
    ConfigurationError,
    DomainError,
    HypothesisError,
    ImpossibleCoverError,
    IndeterminateError,
    NumericalFailure,
    ValidationError,
)

EXIT_OK, EXIT_MALFORMED, EXIT_HYPOTHESIS, EXIT_NUMERICAL = 0, 2, 3, 4

CONDITIONS = ("euler", "flat", "luo-tian", "curvature-case", "tang")
TASKS = ("gauss-bonnet", "isoperimetric", "football-distance", "defects")
MODES = ("flat", "flat-exact", "curvature")

# radii for isoperimetric profiles; the cylinder ratio ~ 1/r needs r ~ 1e13 to drop below 1e-12
ISO_RADII = tuple(float(r) for r in np.geomspace(1e-2, 1e14, 33))
DEFAULT_DELTA = 0.17


class InputError(Exception):
    """Malformed command-line input (bad file, bad JSON, wrong file kind)."""


class Violation(Exception):
    """A hypothesis failed; carries the condition name for the verdict."""

    def __init__(self, condition: str, exc: Exception):
        super().__init__(str(exc))
        self.condition = condition
        self.exc = exc


@dataclass
class RunConfig:
    command: str
    inputs: list[str]
    output: str | None = None
    condition: str | None = None
    task: str | None = None
    mode: str | None = None
    grid_n: int = 256
    tau: tuple[float, float] = (0.0, 1.0)
    delta: float | None = None
    tol: float | None = None
    plot: str | None = None
    seed: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        paths = [Path(p).resolve() for p in self.inputs]
        paths += [Path(p).resolve() for p in (self.output, self.plot) if p]
        if len(set(paths)) != len(paths):
            raise InputError("input, output and plot paths must be distinct")
        n = self.grid_n
        if n < 1 or n & (n - 1):
            raise InputError(f"--grid-n must be a power of two, got {n}")
        if self.tol is not None and not self.tol > 0:
            raise InputError("--tol must be positive")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["tau"] = list(self.tau)
        d.pop("extra")
        return d


# ---------------------------------------------------------------------------
# input handling


def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _kind(path: str) -> str:
    if path.endswith(".off"):
        return "mesh"
    if path.endswith(".cmf"):
        return "field"
    data = _read_json(path)
    if isinstance(data, dict) and "type" in data:
        return "model"
    if isinstance(data, dict) and "points" in data:
        return "divisor"
    raise InputError(f"{path}: neither a divisor (needs 'points') nor a model (needs 'type')")


def _load(path: str, kind: str, cfg: RunConfig):
    """Parse one input; every value error raised while parsing counts as malformed input."""
    from .grid import read_field
    from .models import model_from_dict
    from .polyhedra import load_mesh

    try:
        if kind == "mesh":
            return load_mesh(path)
        if kind == "field":
            return read_field(path)
        data = _read_json(path)
        if not isinstance(data, dict):
            raise InputError(f"{path}: expected a JSON object")
        if kind == "model":
            return model_from_dict(data)
        return dv.Divisor.from_dict(data, tol=cfg.tol), data
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except (ValueError, ConfigurationError) as exc:
        raise InputError(f"{path}: {type(exc).__name__}: {exc}") from exc


def _need(cfg: RunConfig, kind: str, index: int = 0):
    if len(cfg.inputs) <= index:
        raise InputError(f"missing --input ({kind})")
    path = cfg.inputs[index]
    found = _kind(path)
    if found != kind:
        raise InputError(f"{path}: expected a {kind} file, got a {found}")
    return _load(path, kind, cfg)


def _emit(payload: Any, cfg: RunConfig, text: str | None = None) -> None:
    out = text if text is not None else json.dumps(payload, indent=2, sort_keys=False, default=_jsonable) + "\n"
    if cfg.output:
        Path(cfg.output).write_text(out)
    else:
        sys.stdout.write(out)


def _jsonable(v: Any):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    return float(v)


# ---------------------------------------------------------------------------
# commands


def cmd_check(cfg: RunConfig) -> int:
    div, data = _need(cfg, "divisor")
    cond = cfg.condition or "flat"
    try:
        if cond == "euler":
            chi = dv.euler_char(div)
            sign = "positive" if chi > 0 else "zero" if chi == 0 else "negative"
            verdict = dv.Verdict("euler", None, f"chi_{sign}", {"euler_char": chi, "lhs": chi})
        elif cond == "flat":
            verdict = dv.flat_verdict(div)
        elif cond == "luo-tian":
            verdict = dv.check_luo_tian(div)
        elif cond == "curvature-case":
            summary = data.get("curvature")
            if len(cfg.inputs) > 1:
                summary = _read_json(cfg.inputs[1])
            if not isinstance(summary, dict):
                raise InputError("curvature-case needs a curvature summary ('curvature' key or a second --input)")
            try:
                K = dv.CurvatureSummary.from_dict(summary)
            except (TypeError, ValueError) as exc:
                raise InputError(f"bad curvature summary: {exc}") from exc
            verdict = dv.check_curvature_case(div, K)
        else:
            t = data.get("tang")
            if not isinstance(t, dict) or "integral_K_dA0" not in t or "beta_leq_alpha" not in t:
                raise InputError("tang needs {'tang': {'integral_K_dA0': ..., 'beta_leq_alpha': ...}}")
            verdict = dv.check_tang_necessary(float(t["integral_K_dA0"]), bool(t["beta_leq_alpha"]))
    except (DomainError, HypothesisError, IndeterminateError) as exc:
        raise Violation(cond, exc) from exc
    out = verdict.to_dict()
    out["config"] = cfg.to_dict()
    _emit(out, cfg)
    return EXIT_OK


def _model_or_mesh(cfg: RunConfig):
    if not cfg.inputs:
        raise InputError("missing --input")
    kind = _kind(cfg.inputs[0])
    if kind not in ("model", "mesh"):
        raise InputError(f"{cfg.inputs[0]}: expected a model JSON or a .off mesh, got a {kind}")
    return kind, _load(cfg.inputs[0], kind, cfg)


def _defects_payload(mesh) -> dict[str, Any]:
    from .polyhedra import discrete_gauss_bonnet, vertex_angles

    theta = vertex_angles(mesh)
    out = discrete_gauss_bonnet(mesh).to_dict()
    out["euler_characteristic"] = mesh.euler_characteristic
    out["defects"] = {v: 2 * math.pi - float(t) for v, t in zip(mesh.vertices, theta)}
    return out


def cmd_model(cfg: RunConfig) -> int:
    from . import models as md

    task = cfg.task or "gauss-bonnet"
    kind, obj = _model_or_mesh(cfg)
    try:
        if task == "defects" or (task == "gauss-bonnet" and kind == "mesh"):
            if kind != "mesh":
                raise DomainError("the defects task needs a polyhedral mesh (.off)")
            out = _defects_payload(obj)
        elif kind == "mesh":
            raise DomainError(f"task {task} needs a model JSON, not a mesh")
        elif task == "gauss-bonnet":
            out = md.gauss_bonnet_total(obj).to_dict()
            out["divisor"] = md.divisor_of(obj).to_dict()
        elif task == "football-distance":
            if not isinstance(obj, md.Football):
                raise DomainError(f"football-distance needs a Football model, got {type(obj).__name__}")
            d = md.football_geodesic_distance(obj.beta)
            out = {"distance": d, "expected": math.pi, "residual": abs(d - math.pi)}
        else:
            prof = md.isoperimetric_profile(obj, ISO_RADII)
            if cfg.plot:
                from .plotting import plot_isoperimetric

                plot_isoperimetric(prof, cfg.plot, title=type(obj).__name__)
            _emit(None, cfg, text=prof.to_csv())
            return EXIT_OK
    except (DomainError, HypothesisError, IndeterminateError) as exc:
        raise Violation(task, exc) from exc
    if kind == "model":
        out["model"] = md.model_to_dict(obj)
    out["task"] = task
    out["config"] = cfg.to_dict()
    _emit(out, cfg)
    return EXIT_OK


def _grid(cfg: RunConfig):
    from .grid import TorusGrid

    try:
        return TorusGrid(complex(*cfg.tau), cfg.grid_n)
    except ConfigurationError as exc:
        raise Violation("grid", exc) from exc


def _solve(cfg: RunConfig):
    """Run the requested solve; returns (report dict, log-factor field, SolveReport or None)."""
    from .background import build_background
    from .grid import ScalarField
    from . import solver as sv

    div, _ = _need(cfg, "divisor")
    mode = cfg.mode or "flat"
    grid = _grid(cfg)
    delta = cfg.delta if cfg.delta is not None else DEFAULT_DELTA
    try:
        if mode == "flat-exact":
            w = sv.flat_metric_exact(div, grid)
            rep = {"mode": mode, "grid": grid.to_dict(), "divisor": div.to_dict()}
            return rep, w, None
        if mode == "flat":
            res = sv.flat_metric(div, grid, delta)
        else:
            if len(cfg.inputs) > 1:
                K = _need(cfg, "field", 1)
            else:
                K = sv.negative_bump(build_background(div, delta, grid))
            u0 = sv.random_smooth_field(grid, cfg.seed) if cfg.seed is not None else None
            res = sv.prescribed_curvature_solve(div, K, grid, delta, u0=u0)
    except (HypothesisError, ConfigurationError, DomainError) as exc:
        raise Violation(mode, exc) from exc
    rep = res.to_dict()
    rep["mode"] = mode
    return rep, ScalarField(grid, res.log_factor), res


def cmd_solve(cfg: RunConfig) -> int:
    from .grid import write_field

    if not cfg.output:
        raise InputError("solve needs --output (path of the JSON report)")
    rep, field_, _ = _solve(cfg)
    container = Path(cfg.output).with_suffix(".cmf")
    if any(Path(p).resolve() == container.resolve() for p in cfg.inputs):
        raise InputError(f"field container {container} would overwrite an input")
    write_field(field_, container)
    rep["field"] = str(container)
    rep["config"] = cfg.to_dict()
    _emit(rep, cfg)
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    """Write CSV tables and PNG figures into the --output directory."""
    from . import plotting as pl

    if not cfg.output:
        raise InputError("report needs --output (a directory)")
    out = Path(cfg.output)
    if out.exists() and not out.is_dir():
        raise InputError(f"{out} exists and is not a directory")
    if not cfg.inputs:
        raise InputError("missing --input")
    kind = _kind(cfg.inputs[0])
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    if kind == "divisor":
        from .grid import write_field

        rep, field_, res = _solve(cfg)
        grid = field_.grid
        write_field(field_, out / "log_factor.cmf")
        written.append("log_factor.cmf")
        pts = res.background.positions if res is not None else [
            e.position for e in _need(cfg, "divisor")[0].entries if e.beta != 0]
        # clip the logarithmic spikes so the colour scale shows the smooth part
        clip = float(np.percentile(np.abs(field_.values), 99))
        pl.plot_field(grid, field_.values, out / "log_factor.png", pts, "log conformal factor", clip)
        written.append("log_factor.png")
        if res is not None:
            rows = ["label,beta,angle,expected,error"]
            for e in res.background.divisor.entries:
                a = res.cone_angles.get(e.label)
                err = res.cone_angle_errors.get(e.label)
                rows.append(f"{e.label},{float(e.beta)!r},{a!r},{2 * math.pi * (1 + float(e.beta))!r},{err!r}")
            (out / "cone_angles.csv").write_text("\n".join(rows) + "\n")
            hist = ["step,residual_sup"] + [f"{i},{h!r}" for i, h in enumerate(res.residual_history)]
            (out / "residuals.csv").write_text("\n".join(hist) + "\n")
            written += ["cone_angles.csv", "residuals.csv"]
            if len(res.residual_history) > 1:
                pl.plot_residuals(res.residual_history, out / "residuals.png", tol=1e-10)
                written.append("residuals.png")
    elif kind == "mesh":
        mesh = _load(cfg.inputs[0], kind, cfg)
        rep = _defects_payload(mesh)
        rows = ["vertex,defect"] + [f"{v},{d!r}" for v, d in rep["defects"].items()]
        (out / "defects.csv").write_text("\n".join(rows) + "\n")
        pl.plot_defects(list(rep["defects"]), list(rep["defects"].values()), out / "defects.png")
        written += ["defects.csv", "defects.png"]
    elif kind == "model":
        from . import models as md

        model = _load(cfg.inputs[0], kind, cfg)
        try:
            rep = md.gauss_bonnet_total(model).to_dict()
        except (DomainError, HypothesisError) as exc:
            raise Violation("gauss-bonnet", exc) from exc
        rep["model"] = md.model_to_dict(model)
        if isinstance(model, (md.FlatCone, md.Cylinder)):
            prof = md.isoperimetric_profile(model, ISO_RADII)
            (out / "isoperimetric.csv").write_text(prof.to_csv())
            pl.plot_isoperimetric(prof, out / "isoperimetric.png", title=type(model).__name__)
            rep["isoperimetric_limit"] = prof.limit
            written += ["isoperimetric.csv", "isoperimetric.png"]
        if isinstance(model, md.Football):
            d = md.football_geodesic_distance(model.beta)
            rep["football_distance"] = {"distance": d, "residual": abs(d - math.pi)}
    else:
        raise InputError(f"{cfg.inputs[0]}: report needs a divisor, model or mesh")

    rep["files"] = sorted(written)
    rep["config"] = cfg.to_dict()
    (out / "report.json").write_text(json.dumps(rep, indent=2, default=_jsonable) + "\n")
    sys.stdout.write(str(out / "report.json") + "\n")
    return EXIT_OK


COMMANDS = {"check": cmd_check, "model": cmd_model, "solve": cmd_solve, "report": cmd_report}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conemetric", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--input", action="append", default=[], metavar="PATH",
                   help="divisor/model JSON, .off mesh or .cmf field (repeatable)")
    p.add_argument("--output", metavar="PATH", help="output file (report: directory)")
    p.add_argument("--condition", choices=CONDITIONS)
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--grid-n", type=int, default=256)
    p.add_argument("--tau-re", type=float, default=0.0)
    p.add_argument("--tau-im", type=float, default=1.0)
    p.add_argument("--delta", type=float, help=f"cutoff radius (default {DEFAULT_DELTA})")
    p.add_argument("--tol", type=float, help="quantize divisor orders to multiples of TOL")
    p.add_argument("--plot", metavar="SVG", help="write the isoperimetric profile plot here")
    p.add_argument("--seed", type=int, help="seed of the random initial guess (curvature mode)")
    return p


def _violation_exit(condition: str, exc: Exception) -> int:
    verdict = {"condition": condition, "holds": False, "verdict": "hypothesis_violated",
               "error": type(exc).__name__, "message": str(exc)}
    sys.stdout.write(json.dumps(verdict) + "\n")
    print(f"conemetric: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_HYPOTHESIS


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed its message
        return EXIT_OK if exc.code == 0 else EXIT_MALFORMED
    try:
        cfg = RunConfig(args.command, list(args.input), args.output, args.condition, args.task,
                        args.mode, args.grid_n, (args.tau_re, args.tau_im), args.delta, args.tol,
                        args.plot, args.seed)
        return COMMANDS[cfg.command](cfg)
    except InputError as exc:
        print(f"conemetric: malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except Violation as v:
        return _violation_exit(v.condition, v.exc)
    except (HypothesisError, ConfigurationError, DomainError, IndeterminateError, ImpossibleCoverError) as exc:
        return _violation_exit(args.command, exc)
    except ValidationError as exc:
        print(f"conemetric: malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except NumericalFailure as exc:
        print(f"conemetric: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConeMetricError, ArithmeticError, FloatingPointError) as exc:
        # anything else numeric that escaped is reported as a numerical failure, never exit 1
        traceback.print_exc(file=sys.stderr)
        print(f"conemetric: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
