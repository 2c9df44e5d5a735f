"""Time integration and trajectory bookkeeping.

Two integrators behind one config:

* "rk-adaptive": dormand-prince 8(5,3) via scipy, rtol = atol = tolerance.
  Use for accuracy-critical runs.
* "rk4-fixed": hand-rolled classical RK4 with a deterministic number of
  equal substeps per sample interval.  Use when byte-identical reruns
  matter (CSV determinism) or when finite differences of whole
  trajectories must share a step sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .state import LatticeState, hamiltonian_ab, jacobi_norm

_METHODS = ("rk-adaptive", "rk4-fixed")


@dataclass
class IntegratorConfig:
    method: str = "rk-adaptive"
    tolerance: float = 1e-10       # adaptive: rtol and atol
    step: float = 0.01             # fixed: substep ceiling
    max_step: float = math.inf     # adaptive: optional step cap

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}; pick one of {_METHODS}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.step > 0:
            raise ValueError("step must be positive")


def solve_vector(fun, y0: np.ndarray, times: np.ndarray,
                 cfg: IntegratorConfig) -> np.ndarray:
    """Integrate dy/dt = fun(t, y) through the given sample times.

    Returns array of shape (len(times), len(y0)); row 0 is y0.
    """
    times = np.asarray(times, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("need at least one sample time")
    if times.size == 1:
        return y0[np.newaxis, :].copy()
    if cfg.method == "rk4-fixed":
        out = np.empty((times.size, y0.size))
        y = y0.copy()
        out[0] = y
        for i in range(times.size - 1):
            t0, t1 = times[i], times[i + 1]
            span = t1 - t0
            nsub = max(1, math.ceil(abs(span) / cfg.step))
            h = span / nsub
            t = t0
            for _ in range(nsub):
                k1 = fun(t, y)
                k2 = fun(t + 0.5 * h, y + (0.5 * h) * k1)
                k3 = fun(t + 0.5 * h, y + (0.5 * h) * k2)
                k4 = fun(t + h, y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                t += h
            out[i + 1] = y
        return out
    sol = solve_ivp(fun, (times[0], times[-1]), y0, method="DOP853",
                    t_eval=times, rtol=cfg.tolerance, atol=cfg.tolerance,
                    max_step=cfg.max_step, dense_output=False)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    return sol.y.T


def sample_times(t_final: float, sample_dt: float | None = None,
                 n_samples: int | None = None) -> np.ndarray:
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    if sample_dt is not None:
        if not 0 < sample_dt <= t_final:
            raise ValueError("sample_dt must lie in (0, t_final]")
        n = int(round(t_final / sample_dt))
        return np.linspace(0.0, n * sample_dt, n + 1)
    if n_samples is None:
        n_samples = 51
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    return np.linspace(0.0, t_final, n_samples)


@dataclass
class Trajectory:
    """Sampled run of a window flow: times plus (a, b) arrays of shape (T, N)."""

    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    offset: int
    background: tuple
    guard: int = 10
    significance: float = 1e-10

    @property
    def n_samples(self) -> int:
        return self.times.size

    @property
    def n_sites(self) -> int:
        return self.a.shape[1]

    def state(self, i: int) -> LatticeState:
        return LatticeState(self.a[i].copy(), self.b[i].copy(), self.offset, self.background)

    @property
    def boundary_margin(self) -> int:
        """Distance from the window edge of the nearest significant deviation
        from background, minimized over samples.  n_sites when nothing moves.
        """
        a_bg, b_bg = self.background
        dev = np.maximum(np.abs(self.a - a_bg), np.abs(self.b - b_bg))
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

    def energy_series(self, energy=hamiltonian_ab) -> np.ndarray:
        return np.array([energy(self.state(i)) for i in range(self.n_samples)])

    def energy_drift(self, energy=hamiltonian_ab) -> float:
        e = self.energy_series(energy)
        return float(np.max(np.abs(e - e[0])))

    def norm_series(self) -> np.ndarray:
        return np.array([jacobi_norm(self.state(i)) for i in range(self.n_samples)])

    def norm_drift(self) -> float:
        v = self.norm_series()
        return float(np.max(np.abs(v - v[0])))

    def trace_drift(self, jmax: int = 4) -> float:
        from .state import trace_invariants
        t0 = trace_invariants(self.state(0), jmax)
        worst = 0.0
        for i in range(1, self.n_samples):
            worst = max(worst, float(np.max(np.abs(trace_invariants(self.state(i), jmax) - t0))))
        return worst

    def to_csv(self, path):
        """Rows t,n,a,b with %.17g floats (byte-stable for identical data)."""
        sites = np.arange(self.offset, self.offset + self.n_sites)
        with open(path, "w") as fh:
            fh.write("t,n,a,b\n")
            for i, t in enumerate(self.times):
                for j, n in enumerate(sites):
                    fh.write("%.17g,%d,%.17g,%.17g\n" % (t, n, self.a[i, j], self.b[i, j]))

    @classmethod
    def from_csv(cls, path, background=None, guard: int = 10) -> "Trajectory":
        from .state import BACKGROUND
        raw = np.loadtxt(path, delimiter=",", skiprows=1)
        times = np.unique(raw[:, 0])
        sites = np.unique(raw[:, 1].astype(int))
        nt, ns = times.size, sites.size
        if raw.shape[0] != nt * ns:
            raise ValueError("ragged trajectory csv")
        a = raw[:, 2].reshape(nt, ns)
        b = raw[:, 3].reshape(nt, ns)
        return cls(times, a, b, int(sites[0]), background or BACKGROUND, guard)


def integrate(s: LatticeState, rhs, t_final: float,
              cfg: IntegratorConfig | None = None, *,
              sample_dt: float | None = None, n_samples: int | None = None,
              guard: int = 10) -> Trajectory:
    """Evolve a lattice window under the vector field rhs(state) -> (da, db)."""
    cfg = cfg or IntegratorConfig()
    times = sample_times(t_final, sample_dt, n_samples)
    n = s.n_sites

    def fun(_t, y):
        st = LatticeState(y[:n], y[n:], s.offset, s.background)
        da, db = rhs(st)
        return np.concatenate((da, db))

    y0 = np.concatenate((s.a, s.b))
    ys = solve_vector(fun, y0, times, cfg)
    return Trajectory(times, ys[:, :n].copy(), ys[:, n:].copy(),
                      s.offset, s.background, guard)
