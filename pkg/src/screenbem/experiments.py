"""
Scripted experiments on prefractal screen sequences.

* :func:`converge_prefractal` solves a family level by level and records
  the scattered field at fixed observation points together with the
  Cauchy differences between consecutive levels.
* :func:`null_test` adds decay statistics of the field itself.
* :func:`hole_effect` compares a perforated screen with the full one.
* :func:`formulation_gap` compares two discretisations of one screen over
  a sweep of incident directions.

Every experiment is a pure function of its arguments: the CSV output
contains no timings and is bit-identical across repeated runs.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import QuadSpec
from .geometry import PrefractalFamily, ScreenPanelMesh, ScreenRegion, mesh, solid_minus_cantor
from .potentials import observation_points, scattered_field
from .solve import DensitySolution, IncidentField, solve

log = logging.getLogger(__name__)

OBS_COUNT = 16
OBS_RADIUS_FACTOR = 2.0
MIN_OBS_DISTANCE = 0.5


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _cplx(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.ravel(v)]


# --------------------------------------------------------------------------- #
# Mesh rule and observation points                                            #
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class HRule:
    """Mesh size rule for a level.

    Every cell edge is cut into at least ``m_sub`` pieces (h = feature/m_sub)
    and no panel exceeds ``wavelength_fraction`` wavelengths.  Sound-hard
    triangle cells use at least 4 pieces so each cell carries interior
    vertices.

    Attributes
    ----------
    m_sub : int
    wavelength_fraction : float
    max_dofs : int
        Levels needing more unknowns are refused.
    """

    m_sub: int = 2
    wavelength_fraction: float = 0.1
    max_dofs: int = 8000

    def __post_init__(self):
        if int(self.m_sub) != self.m_sub or self.m_sub < 1:
            raise ValueError("m_sub must be a positive integer")
        if not self.wavelength_fraction > 0:
            raise ValueError("wavelength_fraction must be positive")

    def subdivisions(self, region: ScreenRegion, problem: str) -> int:
        m = int(self.m_sub)
        if problem == "hard" and region.dimension == 3 and any(c.shape[0] == 3 for c in region.cells):
            m = max(m, 4)
        return m

    def build(self, region: ScreenRegion, problem: str, k: float) -> ScreenPanelMesh:
        h = self.wavelength_fraction * 2.0 * math.pi / k
        msh = mesh(region, h, self.subdivisions(region, problem))
        dofs = msh.n_panels if problem == "soft" else len(msh.interior_vertices())
        if dofs > self.max_dofs:
            raise ValueError(f"level needs {dofs} unknowns, above the cap of {self.max_dofs}")
        return msh

    def refined(self) -> "HRule":
        return HRule(2 * self.m_sub, 0.5 * self.wavelength_fraction, 4 * self.max_dofs)

    def to_dict(self) -> dict:
        return {"m_sub": self.m_sub, "wavelength_fraction": self.wavelength_fraction,
                "max_dofs": self.max_dofs}


def default_observation_points(region: ScreenRegion) -> np.ndarray:
    """16 points on a circle of radius 2 x diameter about the screen centre
    (in the x1-x3 plane for n = 3)."""
    return observation_points(region.center(), OBS_RADIUS_FACTOR * region.diameter(),
                              OBS_COUNT, region.dimension)


def _check_obs(points: np.ndarray, region: ScreenRegion):
    """Lower bound on the distance from each point to the region's box."""
    bb = region.bounding_box()
    d = region.dimension
    p = points[:, : d - 1]
    gap = np.maximum(np.maximum(bb[0] - p, p - bb[1]), 0.0)
    dist = np.sqrt(np.sum(gap**2, axis=1) + points[:, -1] ** 2)
    if np.any(dist < MIN_OBS_DISTANCE):
        raise ValueError(f"observation points must keep distance >= {MIN_OBS_DISTANCE} from the screen")


def _obs(points, region):
    pts = default_observation_points(region) if points is None else np.asarray(points, dtype=float)
    pts = np.atleast_2d(pts)
    if pts.shape[1] != region.dimension:
        raise ValueError("observation points have the wrong dimension")
    return pts


def _solve_level(region, problem, fld, k, h_rule, quad, obs):
    msh = h_rule.build(region, problem, k)
    t0 = time.perf_counter()
    sol = solve(problem, msh, k, fld, quad)
    vals = scattered_field(sol, obs).values
    return msh, sol, vals, time.perf_counter() - t0


# --------------------------------------------------------------------------- #
# Reports                                                                     #
# --------------------------------------------------------------------------- #
def strictly_decreasing(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(len(v) >= 2 and np.all(np.diff(v) < 0))


@dataclass(frozen=True, eq=False)
class LevelRecord:
    level: int
    n_panels: int
    n_dofs: int
    h: float
    mesh_hash: str
    residual: float
    values: np.ndarray
    seconds: float
    mesh_delta: float = float("nan")


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Scattered field at fixed points, one record per level.

    ``differences[i]`` is max over the points of |u^s_{j_i} - u^s_{j_{i-1}}|
    (nan for the first level).
    """

    family: dict
    problem: str
    k: float
    incident: dict
    obs_points: np.ndarray
    records: tuple
    quad: dict
    h_rule: dict
    expected: str = ""

    @property
    def levels(self) -> list:
        return [r.level for r in self.records]

    @property
    def values(self) -> np.ndarray:
        return np.array([r.values for r in self.records])

    @property
    def max_abs(self) -> np.ndarray:
        return np.abs(self.values).max(axis=1)

    @property
    def differences(self) -> np.ndarray:
        v = self.values
        d = np.full(len(v), np.nan)
        if len(v) > 1:
            d[1:] = np.abs(np.diff(v, axis=0)).max(axis=1)
        return d

    @property
    def cauchy(self) -> np.ndarray:
        return self.differences[1:]

    def columns(self) -> list:
        cols = ["level", "n_panels", "n_dofs", "h", "max_abs_us", "cauchy_diff", "residual", "mesh_hash"]
        if any(np.isfinite(r.mesh_delta) for r in self.records):
            cols.insert(6, "mesh_delta")
        return cols

    def rows(self) -> list:
        out = []
        for r, m, d in zip(self.records, self.max_abs, self.differences):
            row = {"level": r.level, "n_panels": r.n_panels, "n_dofs": r.n_dofs, "h": _fmt(r.h),
                   "max_abs_us": _fmt(m), "cauchy_diff": _fmt(d), "residual": _fmt(r.residual),
                   "mesh_delta": _fmt(r.mesh_delta), "mesh_hash": r.mesh_hash}
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = self.columns()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows():
            w.writerow([row[c] for c in cols])
        return buf.getvalue()

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "experiment": "converge_prefractal",
            "config": {"family": self.family, "problem": self.problem, "k": self.k,
                       "incident": self.incident, "quadrature": self.quad, "h_rule": self.h_rule,
                       "obs_points": self.obs_points.tolist()},
            "expected": self.expected,
            "rows": self.rows(),
            "values": [_cplx(r.values) for r in self.records],
            "trend": {"cauchy_strictly_decreasing": strictly_decreasing(self.cauchy),
                      "max_abs_strictly_decreasing": strictly_decreasing(self.max_abs)},
        }
        if timings:
            d["seconds"] = [r.seconds for r in self.records]
        return d

    def write(self, directory, stem: str = "converge") -> list:
        from pathlib import Path

        p = Path(directory)
        p.mkdir(parents=True, exist_ok=True)
        (p / f"{stem}.csv").write_text(self.to_csv())
        (p / f"{stem}.json").write_text(json.dumps(self.to_dict(), indent=1))
        return [p / f"{stem}.csv", p / f"{stem}.json"]


def _family_dict(family: PrefractalFamily) -> dict:
    return {"variant": family.variant, "dimension": family.dimension, "lam": family.lam,
            "eps": family.eps, "kind": family.kind}


def converge_prefractal(family: PrefractalFamily, problem: str, field_: IncidentField, levels,
                        k: float, h_rule: HRule | None = None, obs_points=None,
                        quad: QuadSpec | None = None, h_check: bool = False) -> ConvergenceReport:
    """Solve a prefractal sequence and record the field at fixed points.

    Parameters
    ----------
    family : PrefractalFamily
    problem : {"soft", "hard"}
    field_ : IncidentField
    levels : iterable of int
    k : float
    h_rule : HRule, optional
    obs_points : array_like (M, n), optional
        Defaults to the ring about the first level (see
        :func:`default_observation_points`); must stay 0.5 away from every level.
    h_check : bool
        Also solve with the refined mesh rule and report the field change
        per level in the ``mesh_delta`` column.
    """
    if problem not in ("soft", "hard"):
        raise ValueError(f"problem must be 'soft' or 'hard', got {problem!r}")
    levels = [int(j) for j in levels]
    if not levels:
        raise ValueError("no levels requested")
    h_rule = h_rule or HRule()
    quad = quad or QuadSpec()
    regions = [family.region(j) for j in levels]
    obs = _obs(obs_points, regions[0])
    for r in regions:
        _check_obs(obs, r)
    records = []
    for j, reg in zip(levels, regions):
        msh, sol, vals, secs = _solve_level(reg, problem, field_, k, h_rule, quad, obs)
        delta = float("nan")
        if h_check:
            _, _, fine, _ = _solve_level(reg, problem, field_, k, h_rule.refined(), quad, obs)
            delta = float(np.abs(fine - vals).max())
        log.info("level %d: %d panels, %d unknowns, max|u^s| %.6g", j, msh.n_panels,
                 sol.basis.dimension, np.abs(vals).max())
        records.append(LevelRecord(j, msh.n_panels, sol.basis.dimension, msh.h, msh.hash(),
                                   sol.residual, vals, secs, delta))
    expected = "Cauchy differences tend to 0 as the level grows"
    return ConvergenceReport(_family_dict(family), problem, float(k), field_.to_dict(), obs,
                             tuple(records), quad.to_dict(), h_rule.to_dict(), expected)


@dataclass(frozen=True, eq=False)
class NullReport:
    convergence: ConvergenceReport

    @property
    def max_abs(self) -> np.ndarray:
        return self.convergence.max_abs

    @property
    def ratio(self) -> float:
        m = self.max_abs
        return float(m[-1] / m[0]) if m[0] > 0 else 0.0

    @property
    def decreasing(self) -> bool:
        return strictly_decreasing(self.max_abs)

    def passed(self, ratio: float = 0.5) -> bool:
        return self.decreasing and self.ratio <= ratio

    def to_dict(self, timings: bool = True) -> dict:
        d = self.convergence.to_dict(timings)
        d["experiment"] = "null_test"
        d["expected"] = "scattered field tends to 0 as the level grows"
        d["null"] = {"max_abs": [float(x) for x in self.max_abs], "final_ratio": self.ratio,
                     "strictly_decreasing": self.decreasing}
        return d

    def to_csv(self) -> str:
        return self.convergence.to_csv()

    def write(self, directory, stem: str = "null") -> list:
        from pathlib import Path

        p = Path(directory)
        p.mkdir(parents=True, exist_ok=True)
        (p / f"{stem}.csv").write_text(self.to_csv())
        (p / f"{stem}.json").write_text(json.dumps(self.to_dict(), indent=1))
        return [p / f"{stem}.csv", p / f"{stem}.json"]


def null_test(family: PrefractalFamily, problem: str, field_: IncidentField, levels, k: float,
              h_rule: HRule | None = None, obs_points=None, quad: QuadSpec | None = None) -> NullReport:
    """:func:`converge_prefractal` plus decay statistics of max|u^s_j|."""
    return NullReport(converge_prefractal(family, problem, field_, levels, k, h_rule, obs_points, quad))


# --------------------------------------------------------------------------- #
# Hole effect and formulation gap                                             #
# --------------------------------------------------------------------------- #
def unit_screen(n: int) -> ScreenRegion:
    if n == 2:
        return ScreenRegion(2, (np.array([0.0, 1.0]),))
    return ScreenRegion(3, (np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),))


@dataclass(frozen=True, eq=False)
class HoleEffectReport:
    """delta[problem][i] = max over points |u^s(Gamma_0 minus C_j) - u^s(Gamma_0)|."""

    lam: float
    dimension: int
    k: float
    incident: dict
    levels: tuple
    problems: tuple
    delta: dict
    n_dofs: dict
    hashes: dict
    obs_points: np.ndarray
    quad: dict
    h_rule: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["problem", "level", "delta", "n_dofs", "mesh_hash"])
        for p in self.problems:
            for j, d, nd, hs in zip(self.levels, self.delta[p], self.n_dofs[p], self.hashes[p]):
                w.writerow([p, j, _fmt(d), nd, hs])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "experiment": "hole_effect",
            "config": {"lam": self.lam, "dimension": self.dimension, "k": self.k,
                       "incident": self.incident, "levels": list(self.levels),
                       "quadrature": self.quad, "h_rule": self.h_rule,
                       "obs_points": self.obs_points.tolist()},
            "expected": {"soft": "delta tends to 0 (the hole has no effect)",
                         "hard": "delta stays bounded away from 0 (the hole has an effect)"},
            "delta": {p: [float(x) for x in self.delta[p]] for p in self.problems},
            "n_dofs": {p: list(self.n_dofs[p]) for p in self.problems},
            "mesh_hashes": {p: list(self.hashes[p]) for p in self.problems},
        }


def hole_effect(lam: float, field_: IncidentField, k: float, levels, problems=("soft", "hard"),
                n: int = 2, h_rule: HRule | None = None, obs_points=None,
                quad: QuadSpec | None = None) -> HoleEffectReport:
    """Compare the unit screen with the unit screen minus the level-j Cantor set.

    Level 0 is the unperforated screen itself (delta = 0).  Sound-hard hats
    vanish on the hole boundaries because each remaining piece is meshed as
    a separate cell.
    """
    h_rule = h_rule or HRule()
    quad = quad or QuadSpec()
    levels = tuple(int(j) for j in levels)
    full = unit_screen(n)
    obs = _obs(obs_points, full)
    _check_obs(obs, full)
    delta, dofs, hashes = {}, {}, {}
    for p in problems:
        m0, s0, ref, _ = _solve_level(full, p, field_, k, h_rule, quad, obs)
        delta[p], dofs[p], hashes[p] = [], [], []
        for j in levels:
            if j == 0:
                vals, nd, hs = ref, s0.basis.dimension, m0.hash()
            else:
                m, s, vals, _ = _solve_level(solid_minus_cantor(lam, j, n), p, field_, k, h_rule, quad, obs)
                nd, hs = s.basis.dimension, m.hash()
            delta[p].append(float(np.abs(vals - ref).max()))
            dofs[p].append(int(nd))
            hashes[p].append(hs)
            log.info("hole effect %s level %d: delta %.6g", p, j, delta[p][-1])
    return HoleEffectReport(float(lam), n, float(k), field_.to_dict(), levels, tuple(problems),
                            delta, dofs, hashes, obs, quad.to_dict(), h_rule.to_dict())


def sweep_directions(count: int, n: int) -> np.ndarray:
    """Unit directions at angles (i + 1/2) 2 pi / count in the x1-x_n plane."""
    t = (np.arange(count) + 0.5) * 2 * np.pi / count
    if n == 2:
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    return np.stack([np.cos(t), np.zeros_like(t), np.sin(t)], axis=1)


@dataclass(frozen=True, eq=False)
class GapReport:
    """gap[i] = max over points |u^s_open - u^s_closed| for direction i."""

    problem: str
    k: float
    directions: np.ndarray
    gap: np.ndarray
    near_zero: np.ndarray
    hashes: tuple
    obs_points: np.ndarray
    quad: dict
    h_rule: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.directions.shape[1]
        w.writerow([f"d{i + 1}" for i in range(n)] + ["gap", "near_zero"])
        for d, g, z in zip(self.directions, self.gap, self.near_zero):
            w.writerow([_fmt(c) for c in d] + [_fmt(g), int(z)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "experiment": "formulation_gap",
            "config": {"problem": self.problem, "k": self.k, "quadrature": self.quad,
                       "h_rule": self.h_rule, "obs_points": self.obs_points.tolist()},
            "mesh_hashes": list(self.hashes),
            "directions": self.directions.tolist(),
            "gap": [float(g) for g in self.gap],
            "near_zero": [bool(z) for z in self.near_zero],
        }


def formulation_gap(open_region: ScreenRegion, closed_region: ScreenRegion, problem: str, k: float,
                    directions=None, n_directions: int = 16, h_rule: HRule | None = None,
                    obs_points=None, quad: QuadSpec | None = None,
                    zero_tol: float = 1e-6) -> GapReport:
    """Field difference between two discretisations over incident directions.

    Each matrix is assembled and factorised once; only the right-hand side
    changes with the direction.  Directions whose gap is below
    ``zero_tol * max(gap)`` (or exactly zero) are flagged.
    """
    from .assembly import assemble, EmptyBasisError
    from .solve import rhs_hard, rhs_soft, _zero_solution
    import scipy.linalg

    h_rule = h_rule or HRule()
    quad = quad or QuadSpec()
    n = open_region.dimension
    dirs = sweep_directions(n_directions, n) if directions is None else np.atleast_2d(
        np.asarray(directions, dtype=float))
    obs = _obs(obs_points, closed_region)
    _check_obs(obs, closed_region)
    _check_obs(obs, open_region)
    fields = [IncidentField.plane_wave(d) for d in dirs]
    outs, hashes = [], []
    for reg in (open_region, closed_region):
        msh = h_rule.build(reg, problem, k)
        hashes.append(msh.hash())
        try:
            system = assemble(problem, msh, k, quad)
        except EmptyBasisError:
            outs.append(np.zeros((len(dirs), len(obs)), dtype=complex))
            continue
        lu = scipy.linalg.lu_factor(system.matrix)
        rows = []
        for f in fields:
            rhs = rhs_soft if problem == "soft" else rhs_hard
            b = rhs(msh, system.basis, f, k)
            if not np.any(b):
                sol = _zero_solution(problem, system.basis, k, f, quad)
            else:
                sol = DensitySolution(problem, scipy.linalg.lu_solve(lu, b), system.basis, float(k), f,
                                      quad=quad)
            rows.append(scattered_field(sol, obs).values)
        outs.append(np.array(rows))
    gap = np.abs(outs[0] - outs[1]).max(axis=1)
    near_zero = gap <= zero_tol * max(gap.max(), 1e-300)
    return GapReport(problem, float(k), dirs, gap, near_zero, tuple(hashes), obs,
                     quad.to_dict(), h_rule.to_dict())
