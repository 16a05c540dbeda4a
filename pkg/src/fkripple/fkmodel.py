"""Site energy of the generalized Frenkel-Kontorova chain and supercell sums.

A configuration is the sequence of projected abscissas ``s_j`` of the
chain-alpha atoms on chain 1.  Consecutive abscissas fix the local curvature
``kappa = ((t - s)/alpha - 1)/h`` and the site energy is

    v(s, t) = Vper(s; kappa) + beta/2 * kappa**2.

With ``symmetrized=True`` the potential term is the average of the left and
right attributions, ``(Vper(s; kappa) + Vper(t; kappa))/2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .params import ModelParams
from .potential import TabulatedPotential


class StateError(ValueError):
    pass


@dataclass
class SupercellState:
    """Periodic approximant: ``q`` abscissas with ``s[j + q] = s[j] + p``."""

    p: int
    q: int
    s: np.ndarray
    params: ModelParams | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        if self.q < 1:
            raise StateError("q must be >= 1")
        if gcd(self.p, self.q) != 1:
            raise StateError(f"gcd({self.p}, {self.q}) != 1")
        if self.s.shape != (self.q,):
            raise StateError(f"expected {self.q} abscissas, got shape {self.s.shape}")

    @classmethod
    def uniform(cls, p: int, q: int, params: ModelParams | None = None, phase: float = 0.0):
        """The unrelaxed chain ``s_j = j p/q + phase``, ``j = 0..q-1``."""
        return cls(p, q, np.arange(q) * (p / q) + phase, params)

    def extended(self) -> np.ndarray:
        """``s_0, ..., s_q`` with the wrap value ``s_q = s_0 + p``."""
        return np.append(self.s, self.s[0] + self.p)

    def spacings(self) -> np.ndarray:
        return np.diff(self.extended())

    def is_admissible(self) -> bool:
        return bool(np.all(self.spacings() > 0))

    def translated(self, shift: float) -> "SupercellState":
        return SupercellState(self.p, self.q, self.s + shift, self.params)

    def relabeled(self, k: int = 1) -> "SupercellState":
        """Start the cell at site ``k`` (``s'_j = s_{j+k}``)."""
        k %= self.q
        s = np.concatenate([self.s[k:], self.s[:k] + self.p])
        return SupercellState(self.p, self.q, s, self.params)

    def copy(self) -> "SupercellState":
        return SupercellState(self.p, self.q, self.s.copy(), self.params)

    # -- file format ---------------------------------------------------------

    def save(self, path, params: ModelParams | None = None) -> None:
        params = params or self.params
        head = [f"# p = {self.p}", f"# q = {self.q}"]
        if params is not None:
            head += [
                f"# alpha = {params.alpha}",
                f"# alpha_value = {params.alpha.value!r}",
                f"# beta = {params.beta!r}",
                f"# h = {params.h!r}",
            ]
        body = [f"{x:.17g}" for x in self.s]
        Path(path).write_text("\n".join(head + body) + "\n")

    @classmethod
    def load(cls, path, params: ModelParams | None = None) -> "SupercellState":
        header, vals = {}, []
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                header[k.strip()] = v.strip()
            elif line.strip():
                vals.append(float(line))
        if params is not None:
            for key, want in (("alpha_value", params.alpha.value), ("h", params.h)):
                if key in header and float(header[key]) != want:
                    raise StateError(f"state file {key} = {header[key]} does not match {want!r}")
        return cls(int(header["p"]), int(header["q"]), np.array(vals), params)


def curvature_from_pair(s, t, params: ModelParams):
    """Curvature of chain 1 implied by consecutive abscissas ``s < t``."""
    return ((np.asarray(t) - np.asarray(s)) / params.a - 1.0) / params.h


def _weights(symmetrized: bool) -> tuple[float, float]:
    return (0.5, 0.5) if symmetrized else (1.0, 0.0)


def site_derivatives(s, t, table: TabulatedPotential, order: int = 1, symmetrized: bool = False):
    """Site energy and its partial derivatives, vectorized over pairs.

    ``order=0`` -> ``v``; ``order=1`` -> ``(v, v_s, v_t)``;
    ``order=2`` -> ``(v, v_s, v_t, v_ss, v_st, v_tt)``.
    """
    params = table.params
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    c = 1.0 / (params.a * params.h)
    beta = params.beta
    kappa = curvature_from_pair(s, t, params)
    wa, wb = _weights(symmetrized)
    bend = 0.5 * beta * kappa * kappa
    if order == 0:
        v = wa * table(s, kappa)
        if wb:
            v = v + wb * table(t, kappa)
        return v + bend
    A = table(s, kappa, order=2 if order > 1 else 1)
    B = table(t, kappa, order=2 if order > 1 else 1) if wb else None
    zero = np.zeros_like(kappa)
    if B is None:
        B = (zero,) * len(A)
    v = wa * A[0] + wb * B[0] + bend
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


def site_energy(s, t, table: TabulatedPotential, symmetrized: bool = False):
    """Local energy ``v(s, t)`` of one site."""
    v = site_derivatives(s, t, table, order=0, symmetrized=symmetrized)
    return float(v) if np.ndim(v) == 0 else v


def _pairs(state: SupercellState) -> tuple[np.ndarray, np.ndarray]:
    ext = state.extended()
    return ext[:-1], ext[1:]


def supercell_energy(state: SupercellState, table: TabulatedPotential, symmetrized: bool = False) -> float:
    """Energy per periodic cell, ``sum_j v(s_j, s_{j+1})`` with ``s_q = s_0 + p``."""
    s, t = _pairs(state)
    return float(np.sum(site_energy(s, t, table, symmetrized)))


def supercell_energy_and_gradient(
    state: SupercellState, table: TabulatedPotential, symmetrized: bool = False
) -> tuple[float, np.ndarray]:
    s, t = _pairs(state)
    v, v_s, v_t = site_derivatives(s, t, table, order=1, symmetrized=symmetrized)
    # site j contributes v_s to s_j and v_t to s_{j+1} (index j+1 wraps to 0)
    grad = v_s + np.roll(v_t, 1)
    return float(np.sum(v)), grad


def supercell_gradient(state: SupercellState, table: TabulatedPotential, symmetrized: bool = False) -> np.ndarray:
    """``dU/ds_j = v_s(s_j, s_{j+1}) + v_t(s_{j-1}, s_j)``."""
    return supercell_energy_and_gradient(state, table, symmetrized)[1]


def supercell_hessian(state: SupercellState, table: TabulatedPotential, symmetrized: bool = False):
    """Cyclic tridiagonal Hessian of the cell energy as a CSR matrix."""
    q = state.q
    s, t = _pairs(state)
    _, _, _, v_ss, v_st, v_tt = site_derivatives(s, t, table, order=2, symmetrized=symmetrized)
    j = np.arange(q)
    k = (j + 1) % q
    rows = np.concatenate([j, k, j, k])
    cols = np.concatenate([j, k, k, j])
    data = np.concatenate([v_ss, v_tt, v_st, v_st])
    return sp.coo_matrix((data, (rows, cols)), shape=(q, q)).tocsr()


@dataclass
class ConditionsReport:
    lower_bound: float
    symmetry_defect: float
    twist_margin: float
    twist_argmin: tuple[float, float]

    def as_dict(self) -> dict:
        return {
            "lower_bound": self.lower_bound,
            "symmetry_defect": self.symmetry_defect,
            "twist_margin": self.twist_margin,
            "twist_argmin_s": self.twist_argmin[0],
            "twist_argmin_t": self.twist_argmin[1],
        }


def default_sample_grid(table: TabulatedPotential, n_s: int = 128, n_t: int = 65):
    """Grid over ``s`` in [0,1) and every ``t - s`` whose curvature is tabulated."""
    params = table.params
    span = params.a * params.h * table.kappa_max
    s = np.arange(n_s) / n_s
    d = params.a + np.linspace(-span, span, n_t)
    return s, d


def check_conditions(table: TabulatedPotential, sample_grid=None, symmetrized: bool = False) -> ConditionsReport:
    """Measure the lower bound, symmetry defect and twist margin of ``v``.

    ``sample_grid`` is a pair ``(s_values, spacing_values)``; ``t = s + spacing``.
    """
    s_vals, d_vals = sample_grid if sample_grid is not None else default_sample_grid(table)
    S, D = np.meshgrid(np.asarray(s_vals, float), np.asarray(d_vals, float), indexing="ij")
    T = S + D
    v, _, _, _, v_st, _ = site_derivatives(S, T, table, order=2, symmetrized=symmetrized)
    mirrored = site_energy(-T, -S, table, symmetrized)
    neg = -v_st
    k = np.unravel_index(np.argmin(neg), neg.shape)
    return ConditionsReport(
        lower_bound=float(v.min()),
        symmetry_defect=float(np.max(np.abs(v - mirrored))),
        twist_margin=float(neg[k]),
        twist_argmin=(float(S[k]), float(T[k])),
    )
