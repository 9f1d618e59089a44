"""
Command-line front end.

Every subcommand reads one JSON configuration file (``--config``), writes
its results to ``--out`` and exits with

    0  success
    2  configuration error (missing file, bad JSON, unknown or invalid keys)
    3  numerical failure (singular matrix, non-finite quadrature)

Lines starting with ``#`` or ``//`` in a config file are ignored, so the
templates printed by ``--print-example`` can be used as they are.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path
from typing import Literal, Optional, Union

import click
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import __version__
from .assembly import QuadratureError, QuadSpec
from .experiments import HRule, converge_prefractal, formulation_gap, hole_effect, null_test, unit_screen
from .geometry import FAMILIES, PrefractalFamily, ScreenPanelMesh, mesh, solid_minus_cantor
from .potentials import (
    directions_from_angles,
    far_field,
    grid_points,
    observation_points,
    scattered_field,
    total_field,
)
from .solve import IncidentField, SingularSystemError, solve

log = logging.getLogger("screenbem")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    """Raised for any problem with the configuration itself."""


# --------------------------------------------------------------------------- #
# Configuration models                                                        #
# --------------------------------------------------------------------------- #
class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class IncidentCfg(_Strict):
    type: Literal["plane_wave", "point_source"] = "plane_wave"
    direction: Optional[list[float]] = None
    source: Optional[list[float]] = None
    amplitude: Union[float, tuple[float, float]] = 1.0

    def build(self) -> IncidentField:
        amp = complex(*self.amplitude) if isinstance(self.amplitude, tuple) else complex(self.amplitude)
        if self.type == "plane_wave":
            if self.direction is None or self.source is not None:
                raise ConfigError("plane_wave needs 'direction' (and no 'source')")
            return IncidentField.plane_wave(self.direction, amp)
        if self.source is None or self.direction is not None:
            raise ConfigError("point_source needs 'source' (and no 'direction')")
        return IncidentField.point_source(self.source, amp)


class QuadCfg(_Strict):
    regular: Optional[int] = Field(None, ge=1)
    near: Optional[int] = Field(None, ge=1)
    singular: Optional[int] = Field(None, ge=1)
    far: Optional[int] = Field(None, ge=1)
    far_ratio: Optional[float] = Field(None, gt=1)
    line: Optional[int] = Field(None, ge=1)
    graded: Optional[int] = Field(None, ge=1)


class HRuleCfg(_Strict):
    m_sub: int = Field(2, ge=1)
    wavelength_fraction: float = Field(0.1, gt=0)
    max_dofs: int = Field(8000, ge=1)

    def build(self) -> HRule:
        return HRule(self.m_sub, self.wavelength_fraction, self.max_dofs)


class ScreenCfg(_Strict):
    """A single screen: ``unit`` (interval or square) or one family level."""

    family: Literal[("unit",) + FAMILIES]  # type: ignore[valid-type]
    dimension: Literal[2, 3] = 2
    level: int = Field(0, ge=0)
    lam: float = Field(1.0 / 3.0, gt=0, lt=1)
    eps: float = Field(0.1, gt=0)

    def region(self):
        if self.family == "unit":
            return unit_screen(self.dimension)
        if self.family in ("grid_inner", "grid_outer"):
            raise ConfigError("grid families need an explicit base region; not available from the CLI")
        return PrefractalFamily(self.family, self.dimension, self.lam, self.eps).region(self.level)


class FamilyCfg(_Strict):
    variant: Literal[FAMILIES]  # type: ignore[valid-type]
    dimension: Literal[2, 3] = 2
    lam: float = Field(1.0 / 3.0, gt=0, lt=1)
    eps: float = Field(0.1, gt=0)

    def build(self) -> PrefractalFamily:
        if self.variant in ("grid_inner", "grid_outer"):
            raise ConfigError("grid families need an explicit base region; not available from the CLI")
        return PrefractalFamily(self.variant, self.dimension, self.lam, self.eps)


class MeshCfg(_Strict):
    screen: ScreenCfg
    k: float = Field(gt=0)
    problem: Literal["soft", "hard"] = "soft"
    h: Optional[float] = Field(None, gt=0)
    h_rule: HRuleCfg = HRuleCfg()


class SolveCfg(_Strict):
    screen: Optional[ScreenCfg] = None
    mesh_file: Optional[str] = None
    problem: Literal["soft", "hard"]
    k: float = Field(gt=0)
    incident: IncidentCfg
    h: Optional[float] = Field(None, gt=0)
    h_rule: HRuleCfg = HRuleCfg()
    quadrature: QuadCfg = QuadCfg()


class GridSpec(_Strict):
    lo: list[float]
    hi: list[float]
    shape: list[int]


class RingSpec(_Strict):
    radius: float = Field(gt=0)
    count: int = Field(16, ge=1)
    center: Optional[list[float]] = None


class RandomSpec(_Strict):
    lo: list[float]
    hi: list[float]
    count: int = Field(ge=1)


class PointsCfg(_Strict):
    points: Optional[list[list[float]]] = None
    grid: Optional[GridSpec] = None
    ring: Optional[RingSpec] = None
    random: Optional[RandomSpec] = None


class FieldCfg(SolveCfg):
    evaluation: PointsCfg
    total: bool = False


class FarFieldCfg(SolveCfg):
    angles: Optional[list[float]] = None
    n_angles: int = Field(360, ge=1)
    azimuth: float = 0.0
    origin: Optional[list[float]] = None


class ConvergeCfg(_Strict):
    family: FamilyCfg
    problem: Literal["soft", "hard"]
    k: float = Field(gt=0)
    incident: IncidentCfg
    levels: list[int] = Field(min_length=1)
    h_rule: HRuleCfg = HRuleCfg()
    quadrature: QuadCfg = QuadCfg()
    obs_points: Optional[list[list[float]]] = None
    h_check: bool = False

    @field_validator("levels")
    @classmethod
    def _levels(cls, v):
        if any(j < 0 for j in v):
            raise ValueError("levels must be non-negative")
        return v


class HoleCfg(_Strict):
    lam: float = Field(1.0 / 3.0, gt=0, lt=1)
    dimension: Literal[2, 3] = 2
    k: float = Field(gt=0)
    incident: IncidentCfg
    levels: list[int] = Field(min_length=1)
    problems: list[Literal["soft", "hard"]] = ["soft", "hard"]
    h_rule: HRuleCfg = HRuleCfg()
    quadrature: QuadCfg = QuadCfg()
    obs_points: Optional[list[list[float]]] = None


class GapCfg(_Strict):
    lam: float = Field(1.0 / 3.0, gt=0, lt=1)
    level: int = Field(ge=1)
    dimension: Literal[2, 3] = 2
    problem: Literal["soft", "hard"]
    k: float = Field(gt=0)
    directions: Optional[list[list[float]]] = None
    n_directions: int = Field(16, ge=1)
    h_rule: HRuleCfg = HRuleCfg()
    quadrature: QuadCfg = QuadCfg()
    obs_points: Optional[list[list[float]]] = None


EXAMPLES = {
    "mesh": ("Mesh one screen; h defaults to the h_rule at wavenumber k.",
             {"screen": {"family": "sierpinski", "dimension": 3, "level": 2},
              "k": 2.0, "problem": "hard", "h_rule": {"m_sub": 2}}),
    "solve": ("Solve on a screen (or on 'mesh_file' written by the mesh command).",
              {"screen": {"family": "unit", "dimension": 2}, "problem": "soft", "k": 5.0,
               "incident": {"type": "plane_wave", "direction": [0.0, -1.0], "amplitude": 1.0}}),
    "field": ("Scattered (or total) field at points, a grid, a ring or seeded random points.",
              {"screen": {"family": "cantor", "dimension": 2, "level": 2}, "problem": "soft", "k": 5.0,
               "incident": {"type": "plane_wave", "direction": [0.0, -1.0]},
               "evaluation": {"grid": {"lo": [-1.0, 0.25], "hi": [2.0, 1.5], "shape": [31, 11]}},
               "total": False}),
    "farfield": ("Far-field pattern at n_angles equispaced angles (or explicit 'angles').",
                 {"screen": {"family": "unit", "dimension": 2}, "problem": "hard", "k": 2.0,
                  "incident": {"type": "plane_wave", "direction": [0.6, -0.8]}, "n_angles": 72}),
    "converge": ("Prefractal convergence report, one CSV row per level.",
                 {"family": {"variant": "sierpinski", "dimension": 3}, "problem": "hard", "k": 2.0,
                  "incident": {"type": "plane_wave", "direction": [0.0, 0.0, -1.0]}, "levels": [1, 2, 3]}),
    "null": ("Convergence report plus decay of max|u^s_j|.",
             {"family": {"variant": "cantor_dust", "dimension": 3, "lam": 0.6}, "problem": "soft", "k": 2.0,
              "incident": {"type": "plane_wave", "direction": [0.0, 0.0, -1.0]}, "levels": [1, 2, 3, 4]}),
    "hole": ("Unit screen minus the level-j Cantor set versus the unit screen.",
             {"lam": 0.3333333333333333, "dimension": 2, "k": 10.0,
              "incident": {"type": "plane_wave", "direction": [0.0, -1.0]}, "levels": [0, 1, 2, 3, 4, 5]}),
    "gap": ("Open versus closed discretisation over a sweep of plane-wave directions.",
            {"lam": 0.3333333333333333, "level": 3, "dimension": 2, "problem": "hard", "k": 5.0,
             "n_directions": 16}),
}


# --------------------------------------------------------------------------- #
# Helpers                                                                     #
# --------------------------------------------------------------------------- #
def _strip_comments(text: str) -> str:
    return "\n".join(line for line in text.splitlines()
                     if not line.lstrip().startswith(("#", "//")))


def load_config(path, model):
    """Parse and validate a JSON config file; raises ConfigError."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(_strip_comments(p.read_text()))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{exc}") from exc


def quad_spec(cfg: QuadCfg, order: Optional[int]) -> QuadSpec:
    """QuadSpec from config values; ``order`` (--quad-order) sets regular=Q,
    near=2Q, singular=Q+3 and line=2Q (Q = 5 gives the defaults)."""
    kw = {}
    if order is not None:
        if order < 1:
            raise ConfigError("--quad-order must be >= 1")
        kw = {"regular": order, "near": 2 * order, "singular": order + 3, "line": 2 * order}
    kw.update({k: v for k, v in cfg.model_dump().items() if v is not None})
    return QuadSpec(**kw)


def set_threads(n: Optional[int]) -> None:
    if n is None:
        env = os.environ.get("SCREENBEM_THREADS")
        if not env:
            return
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"SCREENBEM_THREADS must be an integer, got {env!r}") from exc
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _build_mesh(screen: ScreenCfg, problem, k, h, h_rule: HRule) -> ScreenPanelMesh:
    region = screen.region()
    if h is None:
        return h_rule.build(region, problem, k)
    return mesh(region, h, h_rule.subdivisions(region, problem))


def _solve_mesh(cfg: SolveCfg) -> ScreenPanelMesh:
    if (cfg.screen is None) == (cfg.mesh_file is None):
        raise ConfigError("give exactly one of 'screen' and 'mesh_file'")
    if cfg.mesh_file is not None:
        p = Path(cfg.mesh_file)
        if not p.is_file():
            raise ConfigError(f"mesh file not found: {cfg.mesh_file}")
        try:
            return ScreenPanelMesh.from_dict(json.loads(p.read_text()))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad mesh file {cfg.mesh_file}: {exc}") from exc
    return _build_mesh(cfg.screen, cfg.problem, cfg.k, cfg.h, cfg.h_rule.build())


def _eval_points(spec: PointsCfg, n: int, seed: Optional[int]) -> np.ndarray:
    given = [s for s in ("points", "grid", "ring", "random") if getattr(spec, s) is not None]
    if len(given) != 1:
        raise ConfigError("evaluation needs exactly one of points, grid, ring, random")
    if spec.points is not None:
        pts = np.asarray(spec.points, dtype=float)
    elif spec.grid is not None:
        g = spec.grid
        if not len(g.lo) == len(g.hi) == len(g.shape) == n:
            raise ConfigError(f"grid lo/hi/shape must have length {n}")
        pts = grid_points(g.lo, g.hi, g.shape)
    elif spec.ring is not None:
        c = spec.ring.center if spec.ring.center is not None else [0.5] * (n - 1) + [0.0]
        pts = observation_points(np.asarray(c, dtype=float), spec.ring.radius, spec.ring.count, n)
    else:
        r = spec.random
        if not len(r.lo) == len(r.hi) == n:
            raise ConfigError(f"random lo/hi must have length {n}")
        rng = np.random.default_rng(seed)
        pts = rng.uniform(r.lo, r.hi, size=(r.count, n))
    if pts.ndim != 2 or pts.shape[1] != n:
        raise ConfigError(f"evaluation points must have shape (M, {n})")
    if np.any(pts[:, -1] == 0.0):
        raise ConfigError("evaluation points must lie off the screen plane (x_n != 0)")
    return pts


def _obs(points):
    return None if points is None else np.asarray(points, dtype=float)


def _outdir(out) -> Path:
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1))


def _envelope(command: str, cfg: BaseModel, extra: dict) -> dict:
    d = {"command": command, "version": __version__, "input": cfg.model_dump(mode="json")}
    d.update(extra)
    return d


def _run(fn):
    """Map exceptions to exit codes with a message on standard error."""
    try:
        fn()
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (SingularSystemError, QuadratureError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _common(fn):
    opts = [
        click.option("--config", "config", type=str, default=None, help="JSON config file."),
        click.option("--out", "out", type=str, default=".", show_default=True, help="Output directory."),
        click.option("--threads", type=int, default=None,
                     help="Worker threads (falls back to SCREENBEM_THREADS)."),
        click.option("--quad-order", "quad_order", type=int, default=None,
                     help="Base Galerkin quadrature order Q."),
        click.option("--seed", type=int, default=None, help="Seed for random evaluation points."),
        click.option("--print-example", "print_example", is_flag=True,
                     help="Print a config template and exit."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def _example(name: str) -> str:
    note, data = EXAMPLES[name]
    return f"# {note}\n# usage: screenbem {name} --config FILE --out DIR\n" + json.dumps(data, indent=2)


def _prepare(name, model, config, threads, print_example):
    if print_example:
        click.echo(_example(name))
        sys.exit(0)
    if config is None:
        raise ConfigError("--config PATH is required")
    cfg = load_config(config, model)
    set_threads(threads)
    return cfg


# --------------------------------------------------------------------------- #
# Commands                                                                    #
# --------------------------------------------------------------------------- #
@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True, help="Log progress (-vv for debug).")
def main(verbose):
    """Galerkin BEM for Helmholtz scattering by planar and prefractal screens."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command("mesh")
@_common
def cli_mesh(config, out, threads, quad_order, seed, print_example):
    """Mesh a screen and write mesh.json."""

    def run():
        cfg = _prepare("mesh", MeshCfg, config, threads, print_example)
        m = _build_mesh(cfg.screen, cfg.problem, cfg.k, cfg.h, cfg.h_rule.build())
        d = m.to_dict()
        d["hash"] = m.hash()
        _write_json(_outdir(out) / "mesh.json", d)
        click.echo(f"mesh: {m.n_panels} panels, {m.n_vertices} vertices, h = {m.h:.6g}")

    _run(run)


def _solve(cfg: SolveCfg, quad_order):
    m = _solve_mesh(cfg)
    fld = cfg.incident.build()
    if fld.dimension != m.dimension:
        raise ConfigError("incident field dimension does not match the screen")
    return solve(cfg.problem, m, cfg.k, fld, quad_spec(cfg.quadrature, quad_order))


@main.command("solve")
@_common
def cli_solve(config, out, threads, quad_order, seed, print_example):
    """Solve the screen problem and write solution.json."""

    def run():
        cfg = _prepare("solve", SolveCfg, config, threads, print_example)
        sol = _solve(cfg, quad_order)
        d = _envelope("solve", cfg, sol.to_dict())
        d["quadrature"] = sol.quad.to_dict()
        d["mesh"] = sol.mesh.to_dict()
        _write_json(_outdir(out) / "solution.json", d)
        click.echo(f"solve: {sol.basis.dimension} unknowns, residual {sol.residual:.3e}")

    _run(run)


@main.command("field")
@_common
def cli_field(config, out, threads, quad_order, seed, print_example):
    """Evaluate the scattered (or total) field; writes field.csv and field.json."""

    def run():
        cfg = _prepare("field", FieldCfg, config, threads, print_example)
        sol = _solve(cfg, quad_order)
        pts = _eval_points(cfg.evaluation, sol.mesh.dimension, seed)
        grid = total_field(sol, pts) if cfg.total else scattered_field(sol, pts)
        d = _outdir(out)
        grid.write_csv(d / "field.csv")
        meta = _envelope("field", cfg, grid.to_dict())
        meta["seed"] = seed
        _write_json(d / "field.json", meta)
        click.echo(f"field: {len(pts)} points, {int(grid.near.sum())} flagged near the screen")

    _run(run)


@main.command("farfield")
@_common
def cli_farfield(config, out, threads, quad_order, seed, print_example):
    """Far-field pattern; writes farfield.csv and farfield.json."""

    def run():
        cfg = _prepare("farfield", FarFieldCfg, config, threads, print_example)
        sol = _solve(cfg, quad_order)
        t = (np.asarray(cfg.angles, dtype=float) if cfg.angles is not None
             else np.arange(cfg.n_angles) * 2 * np.pi / cfg.n_angles)
        dirs = directions_from_angles(t, sol.mesh.dimension, cfg.azimuth)
        pat = far_field(sol, dirs, origin=cfg.origin)
        d = _outdir(out)
        pat.write_csv(d / "farfield.csv")
        _write_json(d / "farfield.json", _envelope("farfield", cfg, pat.to_dict()))
        click.echo(f"farfield: {len(dirs)} directions")

    _run(run)


def _report(name, model, config, out, threads, quad_order, print_example, compute):
    def run():
        cfg = _prepare(name, model, config, threads, print_example)
        rep = compute(cfg, quad_spec(cfg.quadrature, quad_order))
        d = _outdir(out)
        (d / f"{name}.csv").write_text(rep.to_csv())
        _write_json(d / f"{name}.json", _envelope(name, cfg, rep.to_dict()))
        click.echo(rep.to_csv(), nl=False)

    _run(run)


@main.command("converge")
@_common
def cli_converge(config, out, threads, quad_order, seed, print_example):
    """Prefractal convergence report (converge.csv, converge.json)."""
    _report("converge", ConvergeCfg, config, out, threads, quad_order, print_example,
            lambda c, q: converge_prefractal(c.family.build(), c.problem, c.incident.build(), c.levels,
                                             c.k, c.h_rule.build(), _obs(c.obs_points), q, c.h_check))


@main.command("null")
@_common
def cli_null(config, out, threads, quad_order, seed, print_example):
    """Null-field decay report (null.csv, null.json)."""
    _report("null", ConvergeCfg, config, out, threads, quad_order, print_example,
            lambda c, q: null_test(c.family.build(), c.problem, c.incident.build(), c.levels, c.k,
                                   c.h_rule.build(), _obs(c.obs_points), q))


@main.command("hole")
@_common
def cli_hole(config, out, threads, quad_order, seed, print_example):
    """Hole-effect report (hole.csv, hole.json)."""
    _report("hole", HoleCfg, config, out, threads, quad_order, print_example,
            lambda c, q: hole_effect(c.lam, c.incident.build(), c.k, c.levels, tuple(c.problems),
                                     c.dimension, c.h_rule.build(), _obs(c.obs_points), q))


@main.command("gap")
@_common
def cli_gap(config, out, threads, quad_order, seed, print_example):
    """Formulation-gap report over incident directions (gap.csv, gap.json)."""
    _report("gap", GapCfg, config, out, threads, quad_order, print_example,
            lambda c, q: formulation_gap(solid_minus_cantor(c.lam, c.level, c.dimension),
                                         unit_screen(c.dimension), c.problem, c.k, c.directions,
                                         c.n_directions, c.h_rule.build(), _obs(c.obs_points), q))


if __name__ == "__main__":  # pragma: no cover
    main()
