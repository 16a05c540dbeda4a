"""The area-preserving twist map generated by the site energy.

With ``p_j = v_t(s_{j-1}, s_j)`` the equilibrium equations become the
implicit recursion

    v_s(s_j, s_{j+1}) = -p_j,     p_{j+1} = v_t(s_j, s_{j+1}),

which is solved for ``s_{j+1}`` by a safeguarded Newton iteration.  Points
live on the cylinder: ``theta = s mod 1`` with the integer part of the lift
kept separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fkmodel import SupercellState, site_derivatives
from .potential import RangeError, TabulatedPotential


class MapError(RuntimeError):
    pass


@dataclass(frozen=True)
class OrbitPoint:
    p: float
    theta: float
    winding: int = 0

    @property
    def s_lift(self) -> float:
        return self.winding + self.theta

    @classmethod
    def from_lift(cls, p: float, s: float) -> "OrbitPoint":
        n = math.floor(s)
        return cls(float(p), float(s - n), int(n))


def _site(theta, d, table, symmetrized, order=2):
    """Scalar ``site_derivatives`` at ``(theta, theta + d)``, in the same arithmetic."""
    params = table.params
    c = 1.0 / (params.a * params.h)
    beta = params.beta
    t = theta + d
    kappa = ((t - theta) / params.a - 1.0) / params.h
    A = table(theta, kappa, order=order)
    if symmetrized:
        B = table(t, kappa, order=order)
        wa = wb = 0.5
    else:
        B = (0.0,) * len(A)
        wa, wb = 1.0, 0.0
    v = wa * A[0] + wb * B[0] + 0.5 * beta * kappa * kappa
    gk = wa * A[2] + wb * B[2] + beta * kappa
    v_s = wa * A[1] - c * gk
    v_t = wb * B[1] + c * gk
    if order == 1:
        return v, v_s, v_t
    kk = wa * A[5] + wb * B[5] + beta
    v_ss = wa * A[3] - 2 * c * wa * A[4] + c * c * kk
    v_st = c * wa * A[4] - c * wb * B[4] - c * c * kk
    v_tt = wb * B[3] + 2 * c * wb * B[4] + c * c * kk
    return v, v_s, v_t, v_ss, v_st, v_tt


def solve_spacing(theta: float, p: float, table: TabulatedPotential, guess: float | None = None,
                  symmetrized: bool = False) -> float:
    """The spacing ``d`` with ``v_s(theta, theta + d) = -p``.

    ``v_s`` decreases in ``d`` under the twist condition, so a bracket is
    grown from ``guess`` (default ``alpha``) and refined by Newton steps,
    falling back to bisection whenever Newton leaves the bracket.
    """
    params = table.params
    a = params.a
    span = a * params.h * table.kappa_max
    d_min, d_max = a - span, a + span
    f = lambda d: _site(theta, d, table, symmetrized, order=2)[1] + p

    d0 = a if guess is None else min(max(guess, d_min), d_max)
    f0 = f(d0)
    if f0 == 0.0:
        return d0
    # f decreasing: f > 0 means the root lies at larger d
    direction = 1.0 if f0 > 0 else -1.0
    step = 1e-3 * a
    lo = hi = d0
    flo = fhi = f0
    while True:
        nxt = d0 + direction * step
        nxt = min(max(nxt, d_min), d_max)
        fn = f(nxt)
        if direction > 0:
            lo, flo, hi, fhi = (hi, fhi, nxt, fn)
        else:
            hi, fhi, lo, flo = (lo, flo, nxt, fn)
        if (direction > 0 and fn <= 0) or (direction < 0 and fn >= 0):
            break
        if nxt in (d_min, d_max):
            raise RangeError(f"no root of v_s + p within the tabulated curvature range (p = {p:.6g})")
        step *= 2.0
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi

    d = 0.5 * (lo + hi)
    for _ in range(200):
        _, v_s, _, _, v_st, _ = _site(theta, d, table, symmetrized, order=2)
        fd = v_s + p
        if fd == 0.0:
            return d
        if fd > 0:
            lo = d
        else:
            hi = d
        nxt = d - fd / v_st if v_st < 0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - d) <= 2e-16 * abs(d) or hi - lo <= 4e-16 * abs(d):
            return nxt
        d = nxt
    raise MapError(f"root finding stagnated at theta={theta:.17g}, p={p:.17g}")


def step(pt: OrbitPoint, table: TabulatedPotential, guess: float | None = None,
         symmetrized: bool = False) -> OrbitPoint:
    """One application of the map ``(p_j, s_j) -> (p_{j+1}, s_{j+1})``."""
    d = solve_spacing(pt.theta, pt.p, table, guess, symmetrized)
    _, _, v_t = _site(pt.theta, d, table, symmetrized, order=1)
    t = pt.theta + d
    n = math.floor(t)
    return OrbitPoint(v_t, t - n, pt.winding + n)


def step_lift(s: float, p: float, table: TabulatedPotential, symmetrized: bool = False) -> tuple[float, float]:
    """The map in lift coordinates, ``(s, p) -> (t, p')``, without wrapping."""
    theta = s - math.floor(s)
    d = solve_spacing(theta, p, table, symmetrized=symmetrized)
    _, _, v_t = _site(theta, d, table, symmetrized, order=1)
    return s + d, v_t


@dataclass
class Orbit:
    p: np.ndarray
    theta: np.ndarray
    winding: np.ndarray

    @property
    def s_lift(self) -> np.ndarray:
        return self.winding + self.theta

    def __len__(self) -> int:
        return len(self.p)

    def point(self, j: int) -> OrbitPoint:
        return OrbitPoint(float(self.p[j]), float(self.theta[j]), int(self.winding[j]))

    def rows(self):
        for j in range(len(self)):
            yield j, float(self.theta[j]), float(self.p[j]), float(self.s_lift[j])


def orbit(pt0: OrbitPoint, n: int, table: TabulatedPotential, symmetrized: bool = False) -> Orbit:
    """``n`` forward steps from ``pt0``, keeping the full lift history."""
    p = np.empty(n + 1)
    th = np.empty(n + 1)
    w = np.empty(n + 1, dtype=np.int64)
    pt = pt0
    p[0], th[0], w[0] = pt.p, pt.theta, pt.winding
    guess = None
    for k in range(1, n + 1):
        try:
            nxt = step(pt, table, guess, symmetrized)
        except (RangeError, MapError) as exc:
            raise type(exc)(f"orbit step {k}: {exc}") from exc
        guess = nxt.s_lift - pt.s_lift
        pt = nxt
        p[k], th[k], w[k] = pt.p, pt.theta, pt.winding
    return Orbit(p, th, w)


def start_from_state(state: SupercellState, table: TabulatedPotential, symmetrized: bool = False) -> OrbitPoint:
    """``(p_0, s_0)`` of a cell, with ``p_0 = v_t(s_{-1}, s_0)`` and ``s_{-1} = s_{q-1} - p``."""
    s_prev = state.s[-1] - state.p
    _, _, v_t = site_derivatives(np.array(s_prev), np.array(state.s[0]), table, order=1, symmetrized=symmetrized)
    return OrbitPoint.from_lift(float(v_t), float(state.s[0]))


def momenta(state: SupercellState, table: TabulatedPotential, symmetrized: bool = False) -> np.ndarray:
    """``p_j = v_t(s_{j-1}, s_j)`` for every site of a cell."""
    prev = np.concatenate([[state.s[-1] - state.p], state.s[:-1]])
    _, _, v_t = site_derivatives(prev, state.s, table, order=1, symmetrized=symmetrized)
    return v_t


def jacobian(s: float, p: float, table: TabulatedPotential, fd_step: float = 1e-6,
             symmetrized: bool = False) -> np.ndarray:
    """Central-difference Jacobian of ``(s, p) -> (t, p')``."""
    J = np.empty((2, 2))
    for col, (ds, dp) in enumerate(((fd_step, 0.0), (0.0, fd_step))):
        plus = step_lift(s + ds, p + dp, table, symmetrized)
        minus = step_lift(s - ds, p - dp, table, symmetrized)
        J[:, col] = (np.array(plus) - np.array(minus)) / (2 * fd_step)
    return J


def area_preservation_check(pt: OrbitPoint, table: TabulatedPotential, fd_step: float = 1e-6,
                            symmetrized: bool = False) -> float:
    """``|det J - 1|`` of the map at ``pt``."""
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    return abs(float(np.linalg.det(jacobian(pt.theta, pt.p, table, fd_step, symmetrized))) - 1.0)


def cylinder_distance(p1, th1, p0, th0):
    dth = np.abs(np.asarray(th1) - th0) % 1.0
    dth = np.minimum(dth, 1.0 - dth)
    return np.hypot(np.asarray(p1) - p0, dth)


def recurrence_indicator(orb: Orbit, window: int) -> tuple[float, int]:
    """Smallest distance from the start over ``j >= window``; returns ``(dist, j)``."""
    if len(orb) <= window:
        raise ValueError("orbit must be longer than the window")
    d = cylinder_distance(orb.p[window:], orb.theta[window:], orb.p[0], orb.theta[0])
    k = int(np.argmin(d))
    return float(d[k]), window + k


def equilibrium_defect(orb: Orbit, table: TabulatedPotential, symmetrized: bool = False) -> float:
    """Max force imbalance ``|v_s(s_j, s_{j+1}) + v_t(s_{j-1}, s_j)|`` along an orbit."""
    s = orb.s_lift
    if len(s) < 3:
        return 0.0
    # shift each pair by the integer part of its left point to keep magnitudes small
    base = np.floor(s[:-1])
    _, v_s, v_t = site_derivatives(s[:-1] - base, s[1:] - base, table, order=1, symmetrized=symmetrized)
    return float(np.max(np.abs(v_s[1:] + v_t[:-1])))


def fit_invariant_graph(theta, p, n_modes: int = 32) -> tuple[np.ndarray, float]:
    """Least-squares Fourier fit ``p = P(theta)``; returns coefficients and max residual."""
    theta = np.asarray(theta, dtype=float)
    cols = [np.ones_like(theta)]
    for k in range(1, n_modes + 1):
        cols += [np.cos(2 * np.pi * k * theta), np.sin(2 * np.pi * k * theta)]
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, p, rcond=None)
    return coef, float(np.max(np.abs(A @ coef - p)))
