"""Two-chain atomistic reference model in a periodic cell of relaxable length.

Each chain carries harmonic bonds and angular springs on the arcsine of the
bond-vector determinant; the chains interact through Lennard-Jones pairs
frozen at construction (all pairs initially within the cutoff, periodic
images included).  Every energy term depends on difference vectors only,
which is what makes the cell derivative simple: writing ``x = u L`` with
fractional ``u``, ``dE/dL = (1/L) sum_d (dE/dd_x) d_x`` over all difference
vectors ``d`` entering the energy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .optimize import lbfgs
from .potential import GeometryError


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ChainConstants:
    l: float
    k: float
    k_theta: float


@dataclass(frozen=True)
class AtomisticSystem:
    r1: np.ndarray
    r2: np.ndarray
    L: float
    c1: ChainConstants
    c2: ChainConstants
    eps: float = 1.0
    sigma: float = 1.0
    cutoff: float = 29.0
    # frozen interlayer pairs: chain-1 index, chain-2 index, image shift (in cells)
    pairs: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if len(self.r1) < 3 or len(self.r2) < 3:
            raise ConfigurationError("each chain needs at least 3 atoms")
        if not self.L > 0:
            raise ConfigurationError("cell length must be positive")

    @property
    def n1(self) -> int:
        return len(self.r1)

    @property
    def n2(self) -> int:
        return len(self.r2)

    def pack(self) -> np.ndarray:
        """Minimizer variables: fractional-x times the current ``L``, y, and ``L``."""
        return np.concatenate([self.r1.ravel(), self.r2.ravel(), [self.L]])

    def unpack(self, z: np.ndarray, L_ref: float) -> "AtomisticSystem":
        """Inverse of :meth:`pack` where x-coordinates were scaled for ``L_ref``."""
        L = float(z[-1])
        n1 = 2 * self.n1
        r1 = z[:n1].reshape(-1, 2).copy()
        r2 = z[n1:-1].reshape(-1, 2).copy()
        r1[:, 0] *= L / L_ref
        r2[:, 0] *= L / L_ref
        return replace(self, r1=r1, r2=r2, L=L)

    def translated(self, dx: float) -> "AtomisticSystem":
        shift = np.array([dx, 0.0])
        return replace(self, r1=self.r1 + shift, r2=self.r2 + shift)

    def save(self, path) -> None:
        lines = [
            "# atomistic snapshot",
            f"# n1 = {self.n1}",
            f"# n2 = {self.n2}",
            f"# L = {self.L:.17g}",
            f"# chain1 = {self.c1.l:.17g} {self.c1.k:.17g} {self.c1.k_theta:.17g}",
            f"# chain2 = {self.c2.l:.17g} {self.c2.k:.17g} {self.c2.k_theta:.17g}",
            f"# lj = {self.eps:.17g} {self.sigma:.17g} {self.cutoff:.17g}",
            "chain_id,index,x,y",
        ]
        for cid, r in ((1, self.r1), (2, self.r2)):
            lines += [f"{cid},{i},{x:.17g},{y:.17g}" for i, (x, y) in enumerate(r)]
        Path(path).write_text("\n".join(lines) + "\n")


def graphene_constants() -> tuple[ChainConstants, ChainConstants]:
    """Chain constants of the graphene dimer-row fit (LJ units)."""
    return ChainConstants(0.5, 130600.0, 764.0), ChainConstants(116.0 / 233.0, 130039.0, 761.0)


def neighbor_pairs(r1, r2, L: float, cutoff: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All ``(i, j, m)`` with ``|r2_j + (mL, 0) - r1_i| < cutoff``."""
    m_max = int(np.ceil(cutoff / L)) + 1
    I, J, M = [], [], []
    for m in range(-m_max, m_max + 1):
        d = r2[None, :, :] + np.array([m * L, 0.0]) - r1[:, None, :]
        i, j = np.nonzero(np.einsum("ijk,ijk->ij", d, d) < cutoff * cutoff)
        I.append(i)
        J.append(j)
        M.append(np.full(len(i), m))
    I, J, M = (np.concatenate(a) for a in (I, J, M))
    order = np.lexsort((M, J, I))
    return I[order], J[order], M[order]


def build_system(
    n1: int = 232,
    n2: int = 233,
    cell_length: float = 116.0,
    separation: float = 1.063,
    constants: tuple[ChainConstants, ChainConstants] | None = None,
    eps: float = 1.0,
    sigma: float = 1.0,
    cutoff: float = 29.0,
) -> AtomisticSystem:
    """Two straight chains at their equilibrium spacings, ``separation`` apart."""
    c1, c2 = constants or graphene_constants()
    for n, c, name in ((n1, c1, "chain 1"), (n2, c2, "chain 2")):
        if abs(n * c.l - cell_length) > 1e-9:
            raise ConfigurationError(f"{name}: {n} * {c.l} != cell length {cell_length}")
    r1 = np.column_stack([np.arange(n1) * c1.l, np.zeros(n1)])
    r2 = np.column_stack([np.arange(n2) * c2.l, np.full(n2, float(separation))])
    pairs = neighbor_pairs(r1, r2, cell_length, cutoff)
    return AtomisticSystem(r1, r2, float(cell_length), c1, c2, eps, sigma, cutoff, pairs)


def _bonds(r, L):
    """Forward bond vectors ``b_i = R_{i+1} - R_i`` with the periodic wrap."""
    b = np.roll(r, -1, axis=0) - r
    b[-1, 0] += L
    return b


def _chain_terms(r, L, c: ChainConstants):
    """Bond and angle energies of one chain and their gradient w.r.t. bond vectors."""
    b = _bonds(r, L)
    n = np.hypot(b[:, 0], b[:, 1])
    if np.any(n == 0):
        raise GeometryError("coincident consecutive atoms")
    stretch = n - c.l
    e_bond = 0.5 * c.k * float(np.sum(stretch * stretch))
    gb = (c.k * stretch / n)[:, None] * b

    # angle at atom i between b_i and -b_{i-1}
    bp = np.roll(b, 1, axis=0)
    nprev = np.roll(n, 1)
    cross = b[:, 0] * bp[:, 1] - b[:, 1] * bp[:, 0]
    det = -cross / (n * nprev)
    det_c = np.clip(det, -1.0 + 1e-12, 1.0 - 1e-12)
    theta = np.arcsin(det_c)
    e_angle = 0.5 * c.k_theta * float(np.sum(theta * theta))
    w = c.k_theta * theta / np.sqrt(1.0 - det_c * det_c)
    inv = 1.0 / (n * nprev)
    d_b = -inv[:, None] * np.column_stack([bp[:, 1], -bp[:, 0]]) - (det / (n * n))[:, None] * b
    d_bp = -inv[:, None] * np.column_stack([-b[:, 1], b[:, 0]]) - (det / (nprev * nprev))[:, None] * bp
    gb = gb + w[:, None] * d_b
    gb = gb + np.roll(w[:, None] * d_bp, -1, axis=0)
    return e_bond, e_angle, b, gb


def _scatter_bonds(gb):
    """Atom gradients from bond-vector gradients (``b_i`` depends on ``R_{i+1} - R_i``)."""
    return np.roll(gb, 1, axis=0) - gb


def energy_and_gradient(sys: AtomisticSystem):
    """Energy components and the gradient ``(g1, g2, dE/dL)`` at fixed fractional x."""
    L = sys.L
    eb1, ea1, b1, gb1 = _chain_terms(sys.r1, L, sys.c1)
    eb2, ea2, b2, gb2 = _chain_terms(sys.r2, L, sys.c2)
    g1 = _scatter_bonds(gb1)
    g2 = _scatter_bonds(gb2)
    virial = float(gb1[:, 0] @ b1[:, 0] + gb2[:, 0] @ b2[:, 0])

    I, J, M = sys.pairs
    d = sys.r2[J] - sys.r1[I]
    d[:, 0] += M * L
    r2 = np.einsum("ij,ij->i", d, d)
    sr6 = (sys.sigma * sys.sigma / r2) ** 3
    e_lj = 4.0 * sys.eps * float(np.sum(sr6 * sr6 - sr6))
    # dV/dr / r
    coef = -24.0 * sys.eps * (2.0 * sr6 * sr6 - sr6) / r2
    gd = coef[:, None] * d
    for k in range(2):
        g2[:, k] += np.bincount(J, gd[:, k], minlength=sys.n2)
        g1[:, k] -= np.bincount(I, gd[:, k], minlength=sys.n1)
    virial += float(gd[:, 0] @ d[:, 0])

    energies = {
        "bond": eb1 + eb2,
        "angle": ea1 + ea2,
        "lj": e_lj,
        "total": eb1 + eb2 + ea1 + ea2 + e_lj,
    }
    return energies, g1, g2, virial / L


def total_energy(sys: AtomisticSystem) -> dict:
    return energy_and_gradient(sys)[0]


@dataclass
class AtomisticResult:
    system: AtomisticSystem
    initial: dict
    final: dict
    length_change: float
    residual: float
    n_iter: int
    converged: bool
    message: str
    wall_time: float

    @property
    def deltas(self) -> dict:
        return {k: self.final[k] - self.initial[k] for k in self.final}

    def summary(self) -> dict:
        out = {f"delta_{k}": v for k, v in self.deltas.items()}
        out.update(
            initial_length=self.system.L / (1.0 + self.length_change),
            final_length=self.system.L,
            relative_length_change=self.length_change,
            residual=self.residual,
            iterations=self.n_iter,
            converged=self.converged,
            message=self.message,
            wall_time=self.wall_time,
        )
        return out


def relax_system(sys: AtomisticSystem, tol: float = 1e-8, max_iter: int = 200000, memory: int = 20) -> AtomisticResult:
    """Minimize over all positions and the cell length.

    The x-coordinates move with ``L`` by affine scaling; the minimizer sees
    ``x * L_ref / L`` so that a change of ``L`` alone rescales the cell.
    Convergence is declared on the max-norm of the physical forces and of
    ``dE/dL``.
    """
    L_ref = sys.L

    def fun(z):
        cur = sys.unpack(z, L_ref)
        e, g1, g2, gL = energy_and_gradient(cur)
        s = cur.L / L_ref
        g1[:, 0] *= s
        g2[:, 0] *= s
        return e["total"], np.concatenate([g1.ravel(), g2.ravel(), [gL]])

    t0 = time.perf_counter()
    initial = total_energy(sys)
    res = lbfgs(fun, sys.pack(), tol=tol, max_iter=max_iter, memory=memory, max_step=1e-2)
    out = sys.unpack(res.x, L_ref)
    return AtomisticResult(
        system=out,
        initial=initial,
        final=total_energy(out),
        length_change=out.L / L_ref - 1.0,
        residual=res.grad_norm,
        n_iter=res.n_iter,
        converged=res.converged,
        message=res.message,
        wall_time=time.perf_counter() - t0,
    )
