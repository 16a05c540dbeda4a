"""Periodic hull interpolants built from relaxed supercells.

For a relaxed ``(p, q)`` cell normalized so that ``s_0`` lies in ``[0, 1)``,
the breakpoints are ``x_j = {j p/q}`` and the assigned values are
``F(x_j) = s_j - floor(j p/q)``, with ``F(1) = s_0 + 1``.  ``F`` is linear
between breakpoints and extended by ``F(x + 1) = F(x) + 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .fkmodel import SupercellState

logger = logging.getLogger(__name__)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class HullFn:
    """Piecewise-linear hull function ``F_q`` of a ``(p, q)`` approximant.

    ``x`` holds the sorted breakpoints in ``[0, 1]`` (including ``x = 1``)
    and ``values`` the hull values there.  ``offset`` shifts the argument:
    evaluation returns ``F(x + offset)``.
    """

    p: int
    q: int
    x: np.ndarray
    values: np.ndarray
    s0: float
    offset: float = 0.0
    phase: float | None = None
    monotone: bool = True
    order: str = "linear"
    _spline: object = field(default=None, repr=False, compare=False)

    @property
    def rotation_number(self) -> float:
        return self.p / self.q

    def __call__(self, x):
        x = np.asarray(x, dtype=float) + self.offset
        n = np.floor(x)
        r = x - n
        if self.order == "linear":
            return np.interp(r, self.x, self.values) + n
        return self._spline(r) + r + n

    def inverse(self, y: float) -> float:
        """The ``x`` with ``F(x) = y`` (``F`` strictly increasing)."""
        n = np.floor(y - self.values[0])
        return float(np.interp(y - n, self.values, self.x)) + n - self.offset

    def g(self, x):
        """The 1-periodic part ``F(x) - x``."""
        return self(x) - np.asarray(x, dtype=float)

    def at_sites(self) -> np.ndarray:
        """``F(j p/q)`` for ``j = 0..q-1``, i.e. the normalized abscissas."""
        j = np.arange(self.q)
        return self(j * self.p / self.q - self.offset)

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.x)

    def max_slope(self) -> float:
        """Largest slope between adjacent breakpoints (a discontinuity indicator)."""
        return float(np.max(self.slopes()))

    def shifted(self, omega: float) -> "HullFn":
        """``x -> F(x + omega)``."""
        return HullFn(
            self.p, self.q, self.x, self.values, self.s0, self.offset + omega,
            None, self.monotone, self.order, self._spline,
        )


def build_hull(state: SupercellState, order: str = "linear") -> HullFn:
    """Hull interpolant of a relaxed cell.

    ``order="cubic"`` interpolates the periodic part ``F(x) - x`` with a
    periodic cubic spline instead of linearly.
    """
    p, q = state.p, state.q
    s = state.s - np.floor(state.s[0])
    j = np.arange(q)
    k = (j * p) // q
    xj = j * p / q - k
    vals = s - k
    idx = np.argsort(xj, kind="stable")
    x = np.append(xj[idx], 1.0)
    v = np.append(vals[idx], s[0] + 1.0)
    dv = np.diff(v)
    monotone = bool(np.all(dv > 0))
    if np.any(dv < 0):
        logger.warning("hull of (%d, %d) decreases somewhere", p, q)
    elif not monotone:
        # equal neighbors are expected on plateaus of the nonsmooth regime
        logger.info("hull of (%d, %d) has flat steps", p, q)
    hull = HullFn(p, q, x, v, float(s[0]), monotone=monotone)
    if order == "cubic":
        from scipy.interpolate import CubicSpline

        gvals = v - x
        gvals[-1] = gvals[0]
        if q >= 3:
            hull.order = "cubic"
            hull._spline = CubicSpline(x, gvals, bc_type="periodic")
    elif order != "linear":
        raise ValueError(f"unknown interpolation order {order!r}")
    return hull


def _sup_error(f_vals, f_args, ref: HullFn, omegas) -> np.ndarray:
    omegas = np.atleast_1d(omegas)
    out = np.empty(len(omegas))
    chunk = max(1, 2_000_000 // max(len(f_args), 1))
    for a in range(0, len(omegas), chunk):
        w = omegas[a:a + chunk]
        r = ref(f_args[None, :] + w[:, None])
        out[a:a + chunk] = np.max(np.abs(f_vals[None, :] - r), axis=1)
    return out


def hull_error(f: HullFn, ref: HullFn, n_scan: int | None = None, tol: float = 1e-10) -> float:
    """``min_omega max_j |s_j - F_ref(j p/q + omega)|``; stores the argmin in ``f.phase``.

    Each term is monotone in ``omega`` (``F_ref`` increases), so the
    objective is quasiconvex: a coarse scan over ``n_scan`` phases (default
    ``ref.q``) in a unit window followed by golden-section refinement
    locates the global minimum.
    """
    j = np.arange(f.q)
    args = j * f.p / f.q
    vals = f(args)
    w0 = ref.inverse(float(vals[0]))
    n = n_scan or max(ref.q, 16)
    grid = w0 + (np.arange(n) / n - 0.5)
    errs = _sup_error(vals, args, ref, grid)
    k = int(np.argmin(errs))
    step = 1.0 / n
    lo, hi = grid[k] - step, grid[k] + step
    fun = lambda w: float(_sup_error(vals, args, ref, w)[0])
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    w = 0.5 * (a + b)
    best = min((fun(w), w), (errs[k], grid[k]))
    f.phase = float(best[1])
    return float(best[0])


def plateau_fraction(state: SupercellState, width: float = 0.02) -> float:
    """Fraction of ``{s_j mod 1}`` within ``width`` of one half."""
    return float(np.mean(np.abs(np.mod(state.s, 1.0) - 0.5) <= width))


def staggered_fraction(state: SupercellState, lo: float = 0.35, hi: float = 0.65) -> float:
    """Fraction of ``{s_j mod 1}`` in ``[lo, hi]``."""
    r = np.mod(state.s, 1.0)
    return float(np.mean((r >= lo) & (r <= hi)))


@dataclass
class StudyRow:
    p: int
    q: int
    strain: float
    error: float
    phase: float
    converged: bool
    residual: float
    iterations: int
    max_slope: float
    plateau_fraction: float

    FIELDS = ("p", "q", "strain", "error", "converged", "phase", "residual",
              "iterations", "max_slope", "plateau_fraction")
    HEADER = ("p", "q", "artificial_strain", "error", "converged_flag", "phase", "residual",
              "iterations", "max_slope", "plateau_fraction")

    def astuple(self):
        return tuple(getattr(self, k) for k in self.FIELDS)


_worker: dict = {}


def _init_worker(table, ref, alpha, relax_kw):
    _worker.update(table=table, ref=ref, alpha=alpha, relax_kw=relax_kw)


def _study_row(pq) -> StudyRow:
    from .relax import relax_approximant

    p, q = pq
    w = _worker
    res = relax_approximant(p, q, w["table"], **w["relax_kw"])
    f = build_hull(res.state)
    err = hull_error(f, w["ref"])
    return StudyRow(p, q, abs(w["alpha"] - p / q), err, float(f.phase), res.converged,
                    res.residual, res.n_iter, f.max_slope(), plateau_fraction(res.state))


def convergence_study(table, pairs, reference: HullFn, jobs: int = 1, **relax_kw) -> list[StudyRow]:
    """Relax every ``(p, q)`` in ``pairs`` and measure its hull error against ``reference``.

    Rows come back in the order of ``pairs`` whatever ``jobs`` is.
    """
    args = (table, reference, table.params.a, relax_kw)
    if jobs <= 1:
        _init_worker(*args)
        return [_study_row(pq) for pq in pairs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=args) as pool:
        return list(pool.map(_study_row, pairs, chunksize=4))


def loglog_slope(rows) -> float:
    """Least-squares slope of ``log error`` against ``log(strain + 1/q^2)``.

    Uses converged rows with nonzero error (the ``q = 1`` cell is exact).
    """
    sel = [r for r in rows if r.converged and r.error > 0]
    if len(sel) < 2:
        raise ValueError("need at least two usable rows")
    x = np.log([r.strain + 1.0 / r.q**2 for r in sel])
    y = np.log([r.error for r in sel])
    return float(np.polyfit(x, y, 1)[0])
