"""Curvature- and disregistry-dependent inter-chain potential.

The probe atom of chain C^alpha sits at the origin.  Near it, chain C^1 is
replaced by the parabola ``y = -h + kappa * x**2 / 2`` whose vertex is the
foot of the probe's projection.  Chain-1 atom ``i`` sits either at
horizontal coordinate ``x = i - s`` (``placement="abscissa"``, the default)
or at parabola arc length ``i - s`` from the vertex (``"arclength"``).
Summing the pair potential over those atoms gives ``vper(s, kappa)``,
1-periodic in ``s``.

:class:`TabulatedPotential` samples ``vper`` on a grid and interpolates it
with a tensor-product cubic spline (periodic in ``s``, clamped in
``kappa``) that also returns first and second partial derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .params import Alpha, ModelParams

TABLE_FORMAT_VERSION = 1

# default curvature range of tables, as a bound on |h * kappa|
DEFAULT_H_KAPPA_MAX = 0.45


class GeometryError(ValueError):
    """The parabolic neighbor construction is not valid (|h*kappa| >= 1)."""


class RangeError(ValueError):
    """Curvature outside the tabulated range."""


class BracketError(ValueError):
    """A 1D bracket does not enclose an interior minimum."""


class TableFormatError(ValueError):
    pass


def lj(r, eps: float = 1.0, sigma: float = 1.0):
    """Lennard-Jones pair energy ``4 eps ((sigma/r)**12 - (sigma/r)**6)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("lj: distance must be positive")
    sr6 = (sigma / r) ** 6
    out = 4.0 * eps * (sr6 * sr6 - sr6)
    return float(out) if out.ndim == 0 else out


def lj_r2(r2, eps: float, sigma: float):
    """LJ energy and ``dV/d(r^2)`` as functions of the squared distance."""
    sr6 = (sigma * sigma / r2) ** 3
    e = 4.0 * eps * (sr6 * sr6 - sr6)
    de = -4.0 * eps * (6.0 * sr6 * sr6 - 3.0 * sr6) / r2
    return e, de


def parabola_arclength(x, kappa):
    """Arc length from the vertex of ``y = kappa x^2 / 2`` to abscissa ``x``."""
    x = np.asarray(x, dtype=float)
    kx = kappa * x
    if kappa == 0.0:
        return x
    return 0.5 * (x * np.sqrt(1.0 + kx * kx) + np.arcsinh(kx) / kappa)


def parabola_abscissa(u, kappa):
    """Invert :func:`parabola_arclength` for signed arc lengths ``u``."""
    u = np.asarray(u, dtype=float)
    if kappa == 0.0:
        return u.copy()
    ku = kappa * u
    x = u * (1.0 - ku * ku / 6.0)
    small = np.abs(ku) < 1e-4
    if np.all(small):
        return x
    # Newton on the closed form; the series start is already close and
    # the arclength is convex in |x|, so plain Newton converges monotonically.
    big = ~small
    xb = x[big] if x.ndim else x
    ub = u[big] if u.ndim else u
    if x.ndim:
        xb = np.where(np.abs(kappa * xb) > 1.0, np.sign(ub) * np.sqrt(2.0 * np.abs(ub / kappa)), xb)
    for _ in range(100):
        step = (parabola_arclength(xb, kappa) - ub) / np.sqrt(1.0 + (kappa * xb) ** 2)
        xb = xb - step
        if np.all(np.abs(step) <= 4e-16 * np.maximum(1.0, np.abs(xb))):
            break
    if x.ndim:
        x[big] = xb
        return x
    return xb


def _atom_abscissa(u, kappa: float, placement: str) -> np.ndarray:
    if placement == "arclength":
        return parabola_abscissa(u, kappa)
    return np.array(u, dtype=float)


def _check_geometry(kappa: float, h: float) -> None:
    if not abs(h * kappa) < 1.0:
        raise GeometryError(f"|h*kappa| = {abs(h * kappa):.6g} >= 1: projection not injective")


def _neighbor_offsets(s: float, cutoff: int) -> np.ndarray:
    """Signed arc lengths ``i - s`` of the atoms with ``|i - s| <= cutoff``."""
    lo = math.ceil(s - cutoff)
    hi = math.floor(s + cutoff)
    return np.arange(lo, hi + 1, dtype=float) - s


def parabola_neighbors(s: float, kappa: float, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Chain-1 atom positions on the local parabola, probe at the origin.

    Returns ``(i, xy)`` where ``i`` are the integer atom labels and ``xy``
    has shape ``(n, 2)``.
    """
    _check_geometry(kappa, params.h)
    u = _neighbor_offsets(s, params.lattice_cutoff)
    x = _atom_abscissa(u, kappa, params.placement)
    y = -params.h + 0.5 * kappa * x * x
    return np.rint(u + s).astype(int), np.column_stack([x, y])


def vper(s: float, kappa: float, params: ModelParams, h: float | None = None) -> float:
    """Effective periodic potential felt by one chain-alpha atom."""
    hh = params.h if h is None else h
    _check_geometry(kappa, hh)
    # reduce before building offsets so the neighbor set is identical for s and s+1
    s = float(s) - math.floor(s)
    u = _neighbor_offsets(s, params.lattice_cutoff)
    x = _atom_abscissa(u, kappa, params.placement)
    y = -hh + 0.5 * kappa * x * x
    e, _ = lj_r2(x * x + y * y, params.eps, params.sigma)
    return math.fsum(e)


def tail_bound(params: ModelParams) -> float:
    """Upper bound on the flat-chain LJ tail dropped by the neighbor cutoff.

    Atoms beyond the cutoff are at distance >= ``cutoff - 1/2`` on each side;
    bounding the attractive sum by an integral gives
    ``8 eps sigma^6 / (5 (cutoff - 1)^5)``.
    """
    c = params.lattice_cutoff
    return 8.0 * params.eps * params.sigma**6 / (5.0 * (c - 1.0) ** 5)


def vper_relaxed_h(
    s: float,
    kappa: float,
    params: ModelParams,
    h_bracket: tuple[float, float] = (1.5, 3.5),
    xtol: float = 1e-10,
) -> tuple[float, float]:
    """Minimize ``vper`` over the inter-chain distance inside ``h_bracket``.

    Returns ``(energy, h_opt)``.
    """
    lo, hi = map(float, h_bracket)
    if not 0.0 < lo < hi:
        raise BracketError(f"invalid bracket {h_bracket}")
    f = lambda hh: vper(s, kappa, params, h=hh)
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": xtol})
    h_opt = float(res.x)
    edge = 10 * xtol + 1e-8 * (hi - lo)
    if h_opt - lo < edge or hi - h_opt < edge:
        raise BracketError(f"no interior minimum of vper(h) in [{lo}, {hi}]")
    e = float(res.fun)
    if not (e < f(lo) and e < f(hi)):
        raise BracketError(f"no interior minimum of vper(h) in [{lo}, {hi}]")
    return e, h_opt


def _vper_grid(s_nodes, kappa_nodes, params: ModelParams) -> np.ndarray:
    values = np.empty((len(s_nodes), len(kappa_nodes)))
    for j, k in enumerate(kappa_nodes):
        for i, s in enumerate(s_nodes):
            values[i, j] = vper(s, k, params)
    return values


def _dvper_dkappa(s_nodes, kappa: float, params: ModelParams, step: float) -> np.ndarray:
    # fourth-order central difference
    out = np.empty(len(s_nodes))
    for i, s in enumerate(s_nodes):
        f = [vper(s, kappa + m * step, params) for m in (-2, -1, 1, 2)]
        out[i] = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * step)
    return out


@dataclass(frozen=True, eq=False)
class TabulatedPotential:
    """Spline table of ``vper(s, kappa)`` on ``[0,1) x [-kappa_max, kappa_max]``."""

    params: ModelParams
    s_nodes: np.ndarray
    kappa_nodes: np.ndarray
    values: np.ndarray
    dk_left: np.ndarray
    dk_right: np.ndarray

    def __post_init__(self):
        ns, nk = self.values.shape
        s_ext = np.append(self.s_nodes, 1.0)
        wrap = lambda a: np.concatenate([a, a[:1]], axis=0)
        cs = CubicSpline(s_ext, wrap(self.values), axis=0, bc_type="periodic").c
        # slopes in kappa at the ends, carried through the (linear) s-fit
        dl = CubicSpline(s_ext, wrap(self.dk_left), bc_type="periodic").c
        dr = CubicSpline(s_ext, wrap(self.dk_right), bc_type="periodic").c
        ck = CubicSpline(self.kappa_nodes, cs, axis=2, bc_type=((1, dl), (1, dr))).c
        # ck[b, j, a, i]: kappa power 3-b, kappa cell j, s power 3-a, s cell i
        coef = np.ascontiguousarray(np.transpose(ck, (3, 1, 2, 0)))
        for name, val in (
            ("_coef", coef),
            ("_ds", 1.0 / ns),
            ("_dk", float(self.kappa_nodes[1] - self.kappa_nodes[0])),
        ):
            object.__setattr__(self, name, val)
        self.values.setflags(write=False)
        coef.setflags(write=False)

    @property
    def kappa_max(self) -> float:
        return float(self.kappa_nodes[-1])

    @property
    def n_s(self) -> int:
        return len(self.s_nodes)

    @property
    def n_kappa(self) -> int:
        return len(self.kappa_nodes)

    def _locate(self, s, kappa):
        s = np.asarray(s, dtype=float)
        kappa = np.asarray(kappa, dtype=float)
        kmax = self.kappa_max
        bad = np.abs(kappa) > kmax * (1.0 + 1e-12)
        if np.any(bad):
            worst = float(np.max(np.abs(kappa)))
            raise RangeError(f"|kappa| = {worst:.6g} exceeds table range {kmax:.6g}")
        sr = s - np.floor(s)
        fi = sr * self.n_s
        i = np.minimum(fi.astype(np.intp), self.n_s - 1)
        ds = sr - i * self._ds
        fk = (kappa - self.kappa_nodes[0]) / self._dk
        j = np.clip(np.floor(fk).astype(np.intp), 0, self.n_kappa - 2)
        dk = kappa - self.kappa_nodes[j]
        return i, j, ds, dk

    def __call__(self, s, kappa, order: int = 0):
        """Evaluate the spline.

        ``order=0`` returns the value, ``order=1`` returns
        ``(v, v_s, v_k)`` and ``order=2`` returns
        ``(v, v_s, v_k, v_ss, v_sk, v_kk)``.
        """
        if np.ndim(s) == 0 and np.ndim(kappa) == 0:
            return self._scalar(float(s), float(kappa), order)
        i, j, ds, dk = self._locate(s, kappa)
        c = self._coef[i, j]  # (..., 4 s-powers, 4 kappa-powers)
        one = np.ones_like(ds)
        zero = np.zeros_like(ds)
        ps = np.stack([ds**3, ds**2, ds, one], axis=-1)
        pk = np.stack([dk**3, dk**2, dk, one], axis=-1)
        v = np.einsum("...a,...ab,...b->...", ps, c, pk)
        if order == 0:
            return v
        dps = np.stack([3 * ds**2, 2 * ds, one, zero], axis=-1)
        dpk = np.stack([3 * dk**2, 2 * dk, one, zero], axis=-1)
        cpk = np.einsum("...ab,...b->...a", c, pk)
        cdpk = np.einsum("...ab,...b->...a", c, dpk)
        vs = np.einsum("...a,...a->...", dps, cpk)
        vk = np.einsum("...a,...a->...", ps, cdpk)
        if order == 1:
            return v, vs, vk
        d2ps = np.stack([6 * ds, 2 * one, zero, zero], axis=-1)
        d2pk = np.stack([6 * dk, 2 * one, zero, zero], axis=-1)
        vss = np.einsum("...a,...a->...", d2ps, cpk)
        vsk = np.einsum("...a,...a->...", dps, cdpk)
        vkk = np.einsum("...a,...ab,...b->...", ps, c, d2pk)
        return v, vs, vk, vss, vsk, vkk

    def _scalar(self, s: float, kappa: float, order: int):
        """Single-point evaluation without array overhead (same arithmetic)."""
        if abs(kappa) > self.kappa_max * (1.0 + 1e-12):
            raise RangeError(f"|kappa| = {abs(kappa):.6g} exceeds table range {self.kappa_max:.6g}")
        sr = s - math.floor(s)
        i = min(int(sr * self.n_s), self.n_s - 1)
        ds = sr - i * self._ds
        j = min(max(math.floor((kappa - self.kappa_nodes[0]) / self._dk), 0), self.n_kappa - 2)
        dk = kappa - float(self.kappa_nodes[j])
        c = self._coef[i, j].tolist()
        pk = (dk**3, dk**2, dk, 1.0)
        cpk = [r[0] * pk[0] + r[1] * pk[1] + r[2] * pk[2] + r[3] for r in c]
        v = ((cpk[0] * ds + cpk[1]) * ds + cpk[2]) * ds + cpk[3]
        if order == 0:
            return v
        dpk = (3 * dk * dk, 2 * dk, 1.0)
        cdpk = [r[0] * dpk[0] + r[1] * dpk[1] + r[2] for r in c]
        vs = (3 * cpk[0] * ds + 2 * cpk[1]) * ds + cpk[2]
        vk = ((cdpk[0] * ds + cdpk[1]) * ds + cdpk[2]) * ds + cdpk[3]
        if order == 1:
            return v, vs, vk
        vss = 6 * cpk[0] * ds + 2 * cpk[1]
        vsk = (3 * cdpk[0] * ds + 2 * cdpk[1]) * ds + cdpk[2]
        d2 = [6 * dk * r[0] + 2 * r[1] for r in c]
        vkk = ((d2[0] * ds + d2[1]) * ds + d2[2]) * ds + d2[3]
        return v, vs, vk, vss, vsk, vkk

    # -- persistence -------------------------------------------------------

    def header(self) -> dict:
        p = self.params
        return {
            "format_version": TABLE_FORMAT_VERSION,
            "alpha": str(p.alpha),
            "alpha_value": repr(p.alpha.value),
            "h": repr(p.h),
            "eps": repr(p.eps),
            "sigma": repr(p.sigma),
            "n_s": self.n_s,
            "n_kappa": self.n_kappa,
            "kappa_max": repr(self.kappa_max),
            "lattice_cutoff": p.lattice_cutoff,
        }

    def save(self, path) -> None:
        lines = [f"# {k} = {v}" for k, v in self.header().items()]
        for row in self.values:
            lines.append(" ".join(f"{x:.17g}" for x in row))
        lines.append("# kappa_slope_left")
        lines.append(" ".join(f"{x:.17g}" for x in self.dk_left))
        lines.append("# kappa_slope_right")
        lines.append(" ".join(f"{x:.17g}" for x in self.dk_right))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path, params: ModelParams) -> "TabulatedPotential":
        """Read a table written by :meth:`save`; header must match ``params``."""
        header: dict[str, str] = {}
        rows: list[list[float]] = []
        slopes: dict[str, list[float]] = {}
        pending = None
        for line in Path(path).read_text().splitlines():
            if line.startswith("# kappa_slope_"):
                pending = line[2:].strip()
            elif line.startswith("#"):
                key, _, val = line[1:].partition("=")
                header[key.strip()] = val.strip()
            elif line.strip():
                vals = [float(x) for x in line.split()]
                if pending:
                    slopes[pending] = vals
                else:
                    rows.append(vals)
        n_s, n_k = int(header["n_s"]), int(header["n_kappa"])
        kappa_max = float(header["kappa_max"])
        expected = {
            "format_version": str(TABLE_FORMAT_VERSION),
            "alpha_value": repr(params.alpha.value),
            "h": repr(params.h),
            "eps": repr(params.eps),
            "sigma": repr(params.sigma),
            "lattice_cutoff": str(params.lattice_cutoff),
        }
        for key, want in expected.items():
            got = header.get(key)
            if got is None or (float(got) != float(want)):
                raise TableFormatError(f"table header mismatch for {key}: file {got!r}, expected {want!r}")
        values = np.array(rows)
        if values.shape != (n_s, n_k):
            raise TableFormatError(f"expected {n_s}x{n_k} samples, found {values.shape}")
        return cls(
            params=params,
            s_nodes=np.arange(n_s) / n_s,
            kappa_nodes=np.linspace(-kappa_max, kappa_max, n_k),
            values=values,
            dk_left=np.array(slopes["kappa_slope_left"]),
            dk_right=np.array(slopes["kappa_slope_right"]),
        )


def tabulate(
    params: ModelParams,
    n_s: int = 256,
    n_kappa: int = 144,
    kappa_max: float | None = None,
) -> TabulatedPotential:
    """Sample ``vper`` on a grid and fit the C^2 spline table."""
    if kappa_max is None:
        kappa_max = DEFAULT_H_KAPPA_MAX / params.h
    if n_s < 64 or n_kappa < 16:
        raise ValueError(f"grid too small: n_s={n_s} (>= 64), n_kappa={n_kappa} (>= 16)")
    if not 0.0 < params.h * kappa_max < 0.5:
        raise ValueError("need 0 < h*kappa_max < 0.5")
    s_nodes = np.arange(n_s) / n_s
    kappa_nodes = np.linspace(-kappa_max, kappa_max, n_kappa)
    values = _vper_grid(s_nodes, kappa_nodes, params)
    step = 1e-3 * (kappa_nodes[1] - kappa_nodes[0])
    return TabulatedPotential(
        params=params,
        s_nodes=s_nodes,
        kappa_nodes=kappa_nodes,
        values=values,
        dk_left=_dvper_dkappa(s_nodes, -kappa_max, params, step),
        dk_right=_dvper_dkappa(s_nodes, kappa_max, params, step),
    )


def zero_table(params: ModelParams, n_s: int = 64, n_kappa: int = 16, kappa_max: float | None = None):
    """A table of the identically zero potential (pure bending model)."""
    if kappa_max is None:
        kappa_max = DEFAULT_H_KAPPA_MAX / params.h
    z = np.zeros((n_s, n_kappa))
    return TabulatedPotential(
        params=params,
        s_nodes=np.arange(n_s) / n_s,
        kappa_nodes=np.linspace(-kappa_max, kappa_max, n_kappa),
        values=z,
        dk_left=np.zeros(n_s),
        dk_right=np.zeros(n_s),
    )
