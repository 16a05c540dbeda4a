"""Periodic approximants of the spacing ratio and their relaxation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import gcd

import numpy as np

from . import fkmodel
from .fkmodel import SupercellState
from .optimize import SolverError, lbfgs
from .params import Alpha
from .potential import TabulatedPotential


class UsageError(ValueError):
    pass


def approximants(alpha, q_max: int) -> list[tuple[int, int]]:
    """Reduced pairs ``(p, q)`` with ``p = round(alpha q)`` for ``q <= q_max``.

    Sorted by artificial strain ``|alpha - p/q|``, largest first.
    """
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    if isinstance(alpha, Alpha):
        exact = alpha.exact()
        nearest = lambda q: int(round(exact * q))
        value = alpha.value
    else:
        value = float(alpha)
        nearest = lambda q: int(round(value * q))
    seen = set()
    for q in range(1, q_max + 1):
        p = nearest(q)
        g = gcd(p, q)
        seen.add((p // g, q // g))
    return sorted(seen, key=lambda pq: (-abs(value - pq[0] / pq[1]), pq[1]))


@dataclass
class RelaxResult:
    state: SupercellState
    initial_energy: float
    energy: float
    residual: float
    n_iter: int
    converged: bool
    message: str
    wall_time: float
    trace: list[float] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "p": self.state.p,
            "q": self.state.q,
            "initial_energy": self.initial_energy,
            "final_energy": self.energy,
            "residual": self.residual,
            "iterations": self.n_iter,
            "converged": self.converged,
            "message": self.message,
            "wall_time": self.wall_time,
        }


def minimize(
    initial: SupercellState,
    table: TabulatedPotential,
    tol: float = 1e-9,
    max_iter: int | None = None,
    memory: int = 10,
    symmetrized: bool = False,
) -> RelaxResult:
    """Relax all ``q`` abscissas of a cell with L-BFGS.

    Trial steps that break the ordering ``s_{j+1} > s_j`` (including the wrap)
    or leave the tabulated curvature range are rejected by the line search.
    On ``max_iter`` the result carries the best state with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not initial.is_admissible():
        raise SolverError("initial state is not strictly increasing")
    p, q = initial.p, initial.q
    max_iter = 50 * q if max_iter is None else max_iter

    def fun(x):
        st = SupercellState(p, q, x)
        return fkmodel.supercell_energy_and_gradient(st, table, symmetrized)

    def admissible(x):
        return bool(np.all(np.diff(x) > 0)) and x[0] + p > x[-1]

    t0 = time.perf_counter()
    res = lbfgs(fun, initial.s, tol=tol, max_iter=max_iter, memory=memory, admissible=admissible)
    state = SupercellState(p, q, res.x, initial.params)
    return RelaxResult(
        state=state,
        initial_energy=res.trace[0],
        energy=res.fun,
        residual=res.grad_norm,
        n_iter=res.n_iter,
        converged=res.converged,
        message=res.message,
        wall_time=time.perf_counter() - t0,
        trace=res.trace,
    )


def relax_approximant(p: int, q: int, table: TabulatedPotential, phase: float = 0.0, **kw) -> RelaxResult:
    """Relax the ``(p, q)`` cell from the uniform start ``s_j = j p/q + phase``."""
    return minimize(SupercellState.uniform(p, q, table.params, phase), table, **kw)


def equilibrium_residual(state: SupercellState, table: TabulatedPotential, symmetrized: bool = False) -> float:
    """Max-norm of the force balance at every site."""
    return float(np.max(np.abs(fkmodel.supercell_gradient(state, table, symmetrized))))


def ordering_check(a: SupercellState, b: SupercellState, tol: float = 0.0) -> str:
    """Compare two cells site by site: ``less``, ``equal``, ``greater`` or ``crossing``."""
    if (a.p, a.q) != (b.p, b.q):
        raise UsageError(f"cannot compare ({a.p},{a.q}) with ({b.p},{b.q})")
    # one period suffices: s_{j+q} - t_{j+q} = s_j - t_j
    d = a.s - b.s
    if np.all(np.abs(d) <= tol):
        return "equal"
    if np.all(d < -tol):
        return "less"
    if np.all(d > tol):
        return "greater"
    return "crossing"
