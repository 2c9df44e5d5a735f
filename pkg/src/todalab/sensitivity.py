"""Variational (tangent) flows: exact derivatives of the lattice state with
respect to one initial coordinate.

The tangent system is integrated alongside the base flow, so a single run
yields the whole column d(state at time t) / d(z_m) over the window.  An
independent central finite-difference oracle cross-validates the variational
route; the two must agree wherever the signal is resolvable (use the same
fixed-step integrator for both when comparing, so that discretization error
cancels instead of polluting the difference).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ghs as _ghs
from .hierarchy import HierarchySpec, hierarchy_rhs, hierarchy_tangent_fields
from .integrators import IntegratorConfig, sample_times, solve_vector
from .perturbed import (PerturbationSpec, perturbed_hierarchy_rhs,
                        perturbed_hierarchy_tangent_rhs, perturbed_rhs,
                        perturbed_tangent_rhs)
from .state import GHSState, LatticeState

FLOWS = ("toda", "hierarchy", "perturbed", "perturbed-hierarchy", "ghs")

_NO_W = PerturbationSpec(family="cosine", w0=0.0)


@dataclass
class TangentState:
    """Base state plus one tangent direction (da, db) = d(a, b)/dz."""

    base: object                  # LatticeState, or GHSState for the chain flow
    da: np.ndarray
    db: np.ndarray
    seed: tuple = (0, "a")

    def __post_init__(self):
        self.da = np.asarray(self.da, dtype=float)
        self.db = np.asarray(self.db, dtype=float)
        if self.da.shape != self.db.shape or self.da.size != self.base.n_sites:
            raise ValueError("tangent fields must match the window size")


def _flow_functions(flow: str, hierarchy: HierarchySpec | None,
                    perturbation: PerturbationSpec | None,
                    potential=None):
    """(base_rhs, tangent_rhs_fields) pair for a named flow."""
    if flow == "toda":
        return (lambda s: perturbed_rhs(s, _NO_W),
                lambda s, da, db: perturbed_tangent_rhs(s, _NO_W, da, db))
    if flow == "hierarchy":
        if hierarchy is None:
            raise ValueError("hierarchy flow needs a HierarchySpec")
        return (lambda s: hierarchy_rhs(s, hierarchy),
                lambda s, da, db: hierarchy_tangent_fields(s, hierarchy, da, db))
    if flow == "perturbed":
        if perturbation is None:
            raise ValueError("perturbed flow needs a PerturbationSpec")
        return (lambda s: perturbed_rhs(s, perturbation),
                lambda s, da, db: perturbed_tangent_rhs(s, perturbation, da, db))
    if flow == "perturbed-hierarchy":
        if hierarchy is None or perturbation is None:
            raise ValueError("perturbed-hierarchy flow needs both specs")
        return (lambda s: perturbed_hierarchy_rhs(s, hierarchy, perturbation),
                lambda s, da, db: perturbed_hierarchy_tangent_rhs(s, hierarchy, perturbation, da, db))
    if flow == "ghs":
        if potential is None:
            raise ValueError("ghs flow needs a PotentialSpec")
        return (lambda s: _ghs.ghs_rhs(s, potential),
                lambda s, da, db: _ghs.ghs_tangent_rhs(s, potential, da, db))
    raise ValueError(f"unknown flow {flow!r}; pick one of {FLOWS}")


def _make_state(template, x1, x2):
    if isinstance(template, GHSState):
        return GHSState(x1, x2, template.offset, template.background)
    return LatticeState(x1, x2, template.offset, template.background)


def _state_arrays(x):
    if isinstance(x, GHSState):
        return x.r, x.p, ("r", "p")
    return x.a, x.b, ("a", "b")


def tangent_rhs(ts: TangentState, flow: str = "toda", *,
                hierarchy: HierarchySpec | None = None,
                perturbation: PerturbationSpec | None = None,
                potential=None):
    """Time derivative of the tangent fields along the chosen flow."""
    _, tangent = _flow_functions(flow, hierarchy, perturbation, potential)
    return tangent(ts.base, ts.da, ts.db)


def _seed_vectors(x, seed):
    m, coord = seed
    x1, x2, names = _state_arrays(x)
    da = np.zeros(x1.size)
    db = np.zeros(x1.size)
    i = m - x.offset
    if not 0 <= i < x1.size:
        raise ValueError(f"seed site {m} outside window")
    if coord == names[0]:
        da[i] = 1.0
    elif coord == names[1]:
        db[i] = 1.0
    elif coord == "btilde" and names == ("a", "b"):
        # difference seed d/d(b_{k+1}) - d/d(b_k)
        if i + 1 >= x1.size:
            raise ValueError(f"btilde seed at site {m} needs site {m + 1} in the window")
        db[i + 1] = 1.0
        db[i] = -1.0
    else:
        raise ValueError(f"seed coordinate must be one of {names} (or 'btilde'), got {coord!r}")
    return da, db


@dataclass
class SensitivityGrid:
    """d(state)/dz over the window and the sampled horizon, plus the base run."""

    times: np.ndarray
    da: np.ndarray            # (T, N); d r / dz for the chain flow
    db: np.ndarray            # (T, N); d p / dz for the chain flow
    base_a: np.ndarray
    base_b: np.ndarray
    offset: int
    background: tuple
    seed_site: int
    seed_coord: str
    flow: str
    guard: int = 10
    significance: float = 1e-10
    coords: tuple = ("a", "b")
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.times.size

    @property
    def n_sites(self) -> int:
        return self.da.shape[1]

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.n_sites)

    @property
    def distances(self) -> np.ndarray:
        return np.abs(self.sites - self.seed_site)

    def observed(self, kind: str = "ab") -> np.ndarray:
        """Pointwise magnitude compared against envelopes.

        "ab":    max(|da|, |db|)
        "log-a": max(2 |da / a(t)|, |db|), the derivative of ln(a^2) paired
                 with the b-derivative (used by the time-dependent bound).
        """
        if kind == "ab":
            return np.maximum(np.abs(self.da), np.abs(self.db))
        if kind == "log-a":
            return np.maximum(2.0 * np.abs(self.da / self.base_a), np.abs(self.db))
        raise ValueError(f"unknown observed kind {kind!r}")

    @property
    def boundary_margin(self) -> int:
        """Distance from the window edge of the nearest significant tangent
        or base deviation, minimized over samples."""
        a_bg, b_bg = self.background
        dev = np.maximum(np.abs(self.da), np.abs(self.db))
        dev = np.maximum(dev, np.abs(self.base_a - a_bg))
        dev = np.maximum(dev, np.abs(self.base_b - b_bg))
        sig = dev > self.significance
        margin = self.n_sites
        for row in sig:
            idx = np.flatnonzero(row)
            if idx.size:
                margin = min(margin, int(idx[0]), int(self.n_sites - 1 - idx[-1]))
        return margin

    @property
    def clean(self) -> bool:
        return self.boundary_margin >= self.guard

    def time_index(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol:
            raise ValueError(f"time {t} not on the sample grid")
        return i

    def base_state(self, i: int):
        if self.coords == ("r", "p"):
            return GHSState(self.base_a[i].copy(), self.base_b[i].copy(),
                            self.offset, self.background)
        return LatticeState(self.base_a[i].copy(), self.base_b[i].copy(),
                            self.offset, self.background)

    def to_csv(self, path):
        sites = self.sites
        c1, c2 = self.coords
        with open(path, "w") as fh:
            fh.write(f"t,n,d{c1},d{c2}\n")
            for i, t in enumerate(self.times):
                for j, n in enumerate(sites):
                    fh.write("%.17g,%d,%.17g,%.17g\n" % (t, n, self.da[i, j], self.db[i, j]))


def evolve_tangent(x, seed, t_final: float, cfg: IntegratorConfig | None = None,
                   flow: str = "toda", *,
                   hierarchy: HierarchySpec | None = None,
                   perturbation: PerturbationSpec | None = None,
                   potential=None,
                   sample_dt: float | None = None, n_samples: int | None = None,
                   guard: int = 10) -> SensitivityGrid:
    """Integrate base + tangent from a unit seed at (site, coordinate)."""
    cfg = cfg or IntegratorConfig()
    base_rhs, tangent = _flow_functions(flow, hierarchy, perturbation, potential)
    da0, db0 = _seed_vectors(x, seed)
    x1, x2, names = _state_arrays(x)
    n = x1.size
    times = sample_times(t_final, sample_dt, n_samples)

    def fun(_t, y):
        s = _make_state(x, y[:n], y[n:2 * n])
        f1, f2 = base_rhs(s)
        g1, g2 = tangent(s, y[2 * n:3 * n], y[3 * n:])
        return np.concatenate((f1, f2, g1, g2))

    y0 = np.concatenate((x1, x2, da0, db0))
    ys = solve_vector(fun, y0, times, cfg)
    return SensitivityGrid(times=times,
                           da=ys[:, 2 * n:3 * n].copy(), db=ys[:, 3 * n:].copy(),
                           base_a=ys[:, :n].copy(), base_b=ys[:, n:2 * n].copy(),
                           offset=x.offset, background=x.background,
                           seed_site=int(seed[0]), seed_coord=str(seed[1]),
                           flow=flow, guard=guard, coords=names)


def finite_difference_oracle(x, seed, t_final: float,
                             cfg: IntegratorConfig | None = None,
                             flow: str = "toda", *, h: float | None = None,
                             hierarchy: HierarchySpec | None = None,
                             perturbation: PerturbationSpec | None = None,
                             potential=None,
                             sample_dt: float | None = None,
                             n_samples: int | None = None,
                             guard: int = 10) -> SensitivityGrid:
    """Central-difference estimate of the same grid: (flow(x + h e) - flow(x - h e)) / 2h.

    Truncation error scales like h^2; meta records h and that scale.  The
    'btilde' seed differentiates along e_{b,k+1} - e_{b,k}.
    """
    cfg = cfg or IntegratorConfig()
    base_rhs, _ = _flow_functions(flow, hierarchy, perturbation, potential)
    da0, db0 = _seed_vectors(x, seed)
    x1, x2, names = _state_arrays(x)
    n = x1.size
    if h is None:
        z0 = float(x1[seed[0] - x.offset]) if seed[1] == names[0] else float(x2[seed[0] - x.offset])
        h = 1e-5 * max(1.0, abs(z0))
    times = sample_times(t_final, sample_dt, n_samples)

    def fun(_t, y):
        s = _make_state(x, y[:n], y[n:])
        f1, f2 = base_rhs(s)
        return np.concatenate((f1, f2))

    runs = []
    for sgn in (1.0, -1.0):
        y0 = np.concatenate((x1 + sgn * h * da0, x2 + sgn * h * db0))
        runs.append(solve_vector(fun, y0, times, cfg))
    diff = (runs[0] - runs[1]) / (2.0 * h)
    mid = 0.5 * (runs[0] + runs[1])
    return SensitivityGrid(times=times,
                           da=diff[:, :n].copy(), db=diff[:, n:].copy(),
                           base_a=mid[:, :n].copy(), base_b=mid[:, n:].copy(),
                           offset=x.offset, background=x.background,
                           seed_site=int(seed[0]), seed_coord=str(seed[1]),
                           flow=flow, guard=guard, coords=names,
                           meta={"fd_h": h, "fd_error_scale": h * h})


# -- second derivatives (Toda flow only) -------------------------------------

@dataclass
class SecondTangentGrid:
    """w = d^2(state at t) / dz1 dz2 for the Toda flow, with both first
    tangents carried along."""

    times: np.ndarray
    w_a: np.ndarray
    w_b: np.ndarray
    u1_a: np.ndarray
    u1_b: np.ndarray
    u2_a: np.ndarray
    u2_b: np.ndarray
    base_a: np.ndarray
    base_b: np.ndarray
    offset: int
    background: tuple
    seed1: tuple
    seed2: tuple
    guard: int = 10

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.w_a.shape[1])

    def observed(self) -> np.ndarray:
        return np.maximum(np.abs(self.w_a), np.abs(self.w_b))


def _toda_second_fields(s: LatticeState, u1a, u1b, u2a, u2b, wa, wb):
    """d/dt of w along the Toda flow: Df(x) w + D^2 f(x)[u1, u2]."""
    a = s.a
    a_bg, b_bg = s.background

    def up(v, fill=0.0):
        return np.concatenate((v[1:], [fill]))

    def dn(v, fill=0.0):
        return np.concatenate(([fill], v[:-1]))

    b_up = up(s.b, b_bg)
    a_dn = dn(a, a_bg)
    dwa = wa * (b_up - s.b) + a * (up(wb) - wb) \
        + u1a * (up(u2b) - u2b) + u2a * (up(u1b) - u1b)
    dwb = 4.0 * (a * wa - a_dn * dn(wa)) \
        + 4.0 * (u1a * u2a - dn(u1a) * dn(u2a))
    return dwa, dwb


def evolve_second_tangent(x: LatticeState, z_seed, k, t_final: float,
                          cfg: IntegratorConfig | None = None, *,
                          sample_dt: float | None = None,
                          n_samples: int | None = None,
                          guard: int = 10) -> SecondTangentGrid:
    """Second variational flow d^2/dz db̃_k of the Toda evolution.

    z_seed is (site, "a"|"b"); k selects the adjacent-difference direction
    e_{b,k+1} - e_{b,k} unless given as an explicit (site, coord) pair.
    """
    if not isinstance(x, LatticeState):
        raise TypeError("second tangent flow is implemented for the Toda flow only")
    cfg = cfg or IntegratorConfig()
    second = k if isinstance(k, tuple) else (int(k), "btilde")
    u1a0, u1b0 = _seed_vectors(x, z_seed)
    u2a0, u2b0 = _seed_vectors(x, second)
    n = x.n_sites
    times = sample_times(t_final, sample_dt, n_samples)
    zeros = np.zeros(n)

    def fun(_t, y):
        blocks = y.reshape(8, n)
        s = LatticeState(blocks[0], blocks[1], x.offset, x.background)
        f1, f2 = perturbed_rhs(s, _NO_W)
        g1, g2 = perturbed_tangent_rhs(s, _NO_W, blocks[2], blocks[3])
        g3, g4 = perturbed_tangent_rhs(s, _NO_W, blocks[4], blocks[5])
        w1, w2 = _toda_second_fields(s, blocks[2], blocks[3], blocks[4], blocks[5],
                                     blocks[6], blocks[7])
        return np.concatenate((f1, f2, g1, g2, g3, g4, w1, w2))

    y0 = np.concatenate((x.a, x.b, u1a0, u1b0, u2a0, u2b0, zeros, zeros))
    ys = solve_vector(fun, y0, times, cfg)
    blk = [ys[:, i * n:(i + 1) * n].copy() for i in range(8)]
    return SecondTangentGrid(times=times, w_a=blk[6], w_b=blk[7],
                             u1_a=blk[2], u1_b=blk[3], u2_a=blk[4], u2_b=blk[5],
                             base_a=blk[0], base_b=blk[1],
                             offset=x.offset, background=x.background,
                             seed1=tuple(z_seed), seed2=second, guard=guard)


def second_finite_difference(x: LatticeState, z_seed, second, t_final: float,
                             h: float = 1e-4,
                             cfg: IntegratorConfig | None = None, *,
                             sample_dt: float | None = None,
                             n_samples: int | None = None):
    """Nested central differences for d^2/dz1 dz2 of the Toda flow: four runs

        (F(+h,+h) - F(+h,-h) - F(-h,+h) + F(-h,-h)) / (4 h^2).

    Returns (times, wa, wb).  Use a fixed-step config so the four runs share
    one discretization.
    """
    cfg = cfg or IntegratorConfig(method="rk4-fixed")
    e1a, e1b = _seed_vectors(x, z_seed)
    e2a, e2b = _seed_vectors(x, second if isinstance(second, tuple) else (int(second), "btilde"))
    n = x.n_sites
    times = sample_times(t_final, sample_dt, n_samples)

    def fun(_t, y):
        s = LatticeState(y[:n], y[n:], x.offset, x.background)
        f1, f2 = perturbed_rhs(s, _NO_W)
        return np.concatenate((f1, f2))

    acc = None
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            y0 = np.concatenate((x.a + h * (s1 * e1a + s2 * e2a),
                                 x.b + h * (s1 * e1b + s2 * e2b)))
            ys = solve_vector(fun, y0, times, cfg)
            term = s1 * s2 * ys
            acc = term if acc is None else acc + term
    acc /= 4.0 * h * h
    return times, acc[:, :n], acc[:, n:]
