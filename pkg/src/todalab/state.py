"""Lattice states in Flaschka form and the associated Jacobi operator.

The doubly infinite lattice is truncated to a finite window of sites
[offset, offset + N).  Sites outside the window are frozen at the background
pair (a_bg, b_bg).  The truncation is trustworthy only while the dynamics
stays clear of the window edges; Trajectory.boundary_margin (see
integrators.py) quantifies that.

Coordinates: a_n = (1/2) exp(-(q_{n+1} - q_n)/2), b_n = -p_n / 2.  The
a_n must stay away from zero because the physical coordinates live on a
log scale; the flow preserves the sign of each a_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

BACKGROUND = (0.5, 0.0)


@dataclass
class LatticeState:
    """Window of (a_n, b_n) pairs over sites offset .. offset + N - 1."""

    a: np.ndarray
    b: np.ndarray
    offset: int = 0
    background: tuple = BACKGROUND

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.ndim != 1 or self.a.shape != self.b.shape:
            raise ValueError("a and b must be 1-d arrays of equal length")
        if self.a.size < 3:
            raise ValueError("window too small: need at least 3 sites")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("non-finite entry in lattice state")
        if np.any(self.a == 0.0):
            raise ValueError("a_n must be nonzero (log-scale coordinate)")
        a_bg = float(self.background[0])
        if a_bg == 0.0 or not np.isfinite(a_bg) or not np.isfinite(self.background[1]):
            raise ValueError("background a must be finite and nonzero")

    @property
    def n_sites(self) -> int:
        return self.a.size

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.n_sites)

    def site_index(self, n: int) -> int:
        i = n - self.offset
        if not 0 <= i < self.n_sites:
            raise IndexError(f"site {n} outside window [{self.offset}, {self.offset + self.n_sites})")
        return i

    def copy(self) -> "LatticeState":
        return LatticeState(self.a.copy(), self.b.copy(), self.offset, self.background)


@dataclass
class PQState:
    """Position/momentum window (q_n, p_n), n = offset .. offset + M - 1."""

    q: np.ndarray
    p: np.ndarray
    offset: int = 0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.q.ndim != 1 or self.q.shape != self.p.shape:
            raise ValueError("q and p must be 1-d arrays of equal length")
        if self.q.size < 4:
            raise ValueError("need at least 4 sites")


@dataclass
class GHSState:
    """Relative-coordinate state (r_n = q_{n+1} - q_n, p_n) for chain systems.

    Finite-energy data decays to the background at the window edges; the
    default background is the origin.
    """

    r: np.ndarray
    p: np.ndarray
    offset: int = 0
    background: tuple = (0.0, 0.0)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.r.ndim != 1 or self.r.shape != self.p.shape:
            raise ValueError("r and p must be 1-d arrays of equal length")
        if self.r.size < 3:
            raise ValueError("window too small: need at least 3 sites")
        if not (np.all(np.isfinite(self.r)) and np.all(np.isfinite(self.p))):
            raise ValueError("non-finite entry in chain state")

    @property
    def n_sites(self) -> int:
        return self.r.size

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.n_sites)

    def copy(self) -> "GHSState":
        return GHSState(self.r.copy(), self.p.copy(), self.offset, self.background)


def background_state(n_sites: int, offset: int | None = None,
                     background: tuple = BACKGROUND) -> LatticeState:
    """Pure-background window; offset defaults to centering site 0."""
    if offset is None:
        offset = -(n_sites // 2)
    a = np.full(n_sites, float(background[0]))
    b = np.full(n_sites, float(background[1]))
    return LatticeState(a, b, offset, background)


def random_localized_state(n_sites: int, offset: int | None = None, *,
                           amp_a: float = 0.3, amp_b: float = 0.2,
                           width: float = 8.0, seed: int = 42,
                           background: tuple = BACKGROUND) -> LatticeState:
    """Background plus a random bump with Gaussian envelope around site 0.

    |amp_a| < 1 keeps every a_n strictly positive.  Deterministic for a
    given seed.
    """
    if not 0 <= amp_a < 1:
        raise ValueError("amp_a must lie in [0, 1)")
    s = background_state(n_sites, offset, background)
    rng = np.random.default_rng(seed)
    env = np.exp(-((s.sites / width) ** 2))
    a_bg, b_bg = s.background
    s.a = a_bg * (1.0 + amp_a * env * rng.uniform(-1.0, 1.0, n_sites))
    s.b = b_bg + amp_b * env * rng.uniform(-1.0, 1.0, n_sites)
    return LatticeState(s.a, s.b, s.offset, s.background)


def toda_rhs(s: LatticeState):
    """Toda vector field: da_n = a_n (b_{n+1} - b_n), db_n = 2 (a_n^2 - a_{n-1}^2).

    Neighbors outside the window are the frozen background, so a window
    state is a fixed point iff b == b_bg everywhere and a^2 == a_bg^2.
    """
    a, b = s.a, s.b
    a_bg, b_bg = s.background
    b_up = np.concatenate((b[1:], [b_bg]))
    a_dn = np.concatenate(([a_bg], a[:-1]))
    return a * (b_up - b), 2.0 * (a * a - a_dn * a_dn)


def hamiltonian_ab(s: LatticeState) -> float:
    """Total energy in (a, b) coordinates, window sum of

        2 b_n^2 + 4 a_n^2 - 2 ln(2 |a_n|) - 1.

    The per-site value vanishes on the background (1/2, 0), so this is the
    energy relative to the background for the default vacuum.
    """
    a, b = s.a, s.b
    return float(np.sum(2.0 * b * b + 4.0 * a * a - 2.0 * np.log(2.0 * np.abs(a)) - 1.0))


def flaschka_forward(pq: PQState, background: tuple = BACKGROUND) -> LatticeState:
    """Map (q, p) to (a, b).  Drops the last site: a needs the forward difference.

    Raises on exponent overflow, naming the offending site.
    """
    q, p = pq.q, pq.p
    expo = -(q[1:] - q[:-1]) / 2.0
    bad = np.flatnonzero(expo > 700.0)
    if bad.size:
        n = pq.offset + int(bad[0])
        raise OverflowError(f"flaschka_forward: exp overflow at site {n} (collapsed pair distance)")
    a = 0.5 * np.exp(expo)
    b = -p[:-1] / 2.0
    return LatticeState(a, b, pq.offset, background)


def flaschka_inverse(s: LatticeState) -> GHSState:
    """Map (a, b) to relative coordinates (r_n = q_{n+1} - q_n, p_n).

    Positions q are recoverable from r only up to an overall constant.
    Requires a_n > 0 (the physical branch of the coordinate change).
    """
    if np.any(s.a <= 0.0):
        raise ValueError("flaschka_inverse needs a_n > 0")
    a_bg, b_bg = s.background
    if a_bg <= 0.0:
        raise ValueError("flaschka_inverse needs background a > 0")
    r = -np.log(4.0 * s.a * s.a)
    p = -2.0 * s.b
    r_bg = -math.log(4.0 * a_bg * a_bg)
    return GHSState(r, p, s.offset, (r_bg, -2.0 * b_bg))


def relative_to_lattice(g: GHSState) -> LatticeState:
    """Inverse of flaschka_inverse: a = (1/2) e^{-r/2}, b = -p/2."""
    a = 0.5 * np.exp(-g.r / 2.0)
    b = -g.p / 2.0
    r_bg, p_bg = g.background
    return LatticeState(a, b, g.offset, (0.5 * math.exp(-r_bg / 2.0), -p_bg / 2.0))


def jacobi_matrix(s: LatticeState, pad: int = 0) -> np.ndarray:
    """Dense symmetric tridiagonal matrix: diagonal b, off-diagonal a.

    pad > 0 extends the window with background sites on both ends.
    """
    a, b = s.a, s.b
    if pad > 0:
        a_bg, b_bg = s.background
        a = np.concatenate((np.full(pad, a_bg), a, np.full(pad, a_bg)))
        b = np.concatenate((np.full(pad, b_bg), b, np.full(pad, b_bg)))
    n = b.size
    m = np.zeros((n, n))
    idx = np.arange(n)
    m[idx, idx] = b
    m[idx[:-1], idx[:-1] + 1] = a[:-1]
    m[idx[:-1] + 1, idx[:-1]] = a[:-1]
    return m


def jacobi_norm(s: LatticeState, pad: int = 0) -> float:
    """Spectral norm of the windowed Jacobi operator.

    Sandwiched by max(max |a_n| over interior couplings, max |b_n|) from
    below and 2 max|a| + max|b| from above.
    """
    a, b = s.a, s.b
    if pad > 0:
        a_bg, b_bg = s.background
        a = np.concatenate((np.full(pad, a_bg), a, np.full(pad, a_bg)))
        b = np.concatenate((np.full(pad, b_bg), b, np.full(pad, b_bg)))
    if b.size == 1:
        return abs(float(b[0]))
    ev = eigvalsh_tridiagonal(b, a[:-1])
    return float(max(abs(ev[0]), abs(ev[-1])))


def trace_invariants(s: LatticeState, jmax: int = 4) -> np.ndarray:
    """tr(L^j) - tr(L_bg^j) for j = 1 .. jmax on the same window.

    L_bg is the pure-background window of equal size.  Conserved along the
    flow while the run stays boundary-clean.
    """
    if jmax < 1:
        raise ValueError("jmax must be >= 1")
    ev = eigvalsh_tridiagonal(s.b, s.a[:-1])
    a_bg, b_bg = s.background
    n = s.n_sites
    # free tridiagonal eigenvalues: b_bg + 2 a_bg cos(k pi / (n+1))
    ev_bg = b_bg + 2.0 * a_bg * np.cos(np.pi * np.arange(1, n + 1) / (n + 1))
    out = np.empty(jmax)
    for j in range(1, jmax + 1):
        out[j - 1] = np.sum(ev ** j) - np.sum(ev_bg ** j)
    return out
