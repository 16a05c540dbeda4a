"""Limited-memory BFGS with a backtracking line search.

Shared by the chain relaxation and the atomistic reference simulation.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The minimizer could not produce an admissible point."""


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    converged: bool
    message: str
    trace: list[float] = field(default_factory=list)

    @property
    def grad_norm(self) -> float:
        return float(np.max(np.abs(self.grad))) if self.grad.size else 0.0


def lbfgs(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 10000,
    memory: int = 10,
    admissible: Callable[[np.ndarray], bool] | None = None,
    c1: float = 1e-4,
    shrink: float = 0.5,
    max_step: float | None = None,
    noise: float = 16 * np.finfo(float).eps,
) -> MinimizeResult:
    """Minimize ``fun`` (returning value and gradient) until ``max|g| < tol``.

    Steps are accepted on the Armijo sufficient-decrease condition.  Once the
    predicted decrease falls below the rounding level of ``f`` (``noise*|f|``),
    a step is also accepted if ``f`` does not rise above that level and the
    gradient norm drops, so the gradient can be driven below what energy
    differences alone can resolve.

    ``admissible`` rejects trial points (the step is shrunk); ``fun`` may also
    raise ``ValueError`` on a trial point, which is treated the same way.
    ``max_step`` caps the max-norm of a trial displacement.
    """
    x = np.array(x0, dtype=float)
    if admissible is not None and not admissible(x):
        raise SolverError("initial point is not admissible")
    f, g = fun(x)
    trace = [f]
    hist: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=memory)
    gmax = float(np.max(np.abs(g))) if g.size else 0.0
    if gmax < tol:
        return MinimizeResult(x, f, g, 0, True, "initial point converged", trace)

    for it in range(1, max_iter + 1):
        d = _two_loop(g, hist)
        slope = float(g @ d)
        if not slope < 0:
            hist.clear()
            d = -g
            slope = float(g @ d)
        if not hist:
            # first step (or after a reset): unit move of the largest component
            d = d * min(1.0, 1.0 / max(gmax, 1e-300)) * (max_step or 1.0)
            slope = float(g @ d)
        if max_step is not None:
            dmax = float(np.max(np.abs(d)))
            if dmax > max_step:
                d *= max_step / dmax
                slope = float(g @ d)

        step = 1.0
        accepted = False
        fscale = noise * max(abs(f), 1.0)
        for _ in range(60):
            xn = x + step * d
            ok = admissible is None or admissible(xn)
            if ok:
                try:
                    fn, gn = fun(xn)
                except ValueError:
                    ok = False
            if ok and np.isfinite(fn):
                if fn <= f + c1 * step * slope:
                    accepted = True
                elif abs(step * slope) < fscale and fn <= f + fscale:
                    gnmax = float(np.max(np.abs(gn)))
                    accepted = gnmax < gmax
                if accepted:
                    break
            step *= shrink
        if not accepted:
            if hist:
                logger.debug("line search failed at iteration %d; resetting memory", it)
                hist.clear()
                continue
            return MinimizeResult(x, f, g, it, False, "line search failed", trace)

        sk = xn - x
        yk = gn - g
        sy = float(sk @ yk)
        if sy > 1e-12 * float(np.sqrt((sk @ sk) * (yk @ yk))):
            hist.append((sk, yk, 1.0 / sy))
        x, f, g = xn, fn, gn
        trace.append(f)
        gmax = float(np.max(np.abs(g)))
        if gmax < tol:
            return MinimizeResult(x, f, g, it, True, "converged", trace)

    return MinimizeResult(x, f, g, max_iter, False, "max_iter exceeded", trace)


def _two_loop(g: np.ndarray, hist) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(hist):
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    if hist:
        s, y, rho = hist[-1]
        q *= 1.0 / (rho * float(y @ y))
    for (s, y, rho), a in zip(hist, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q
