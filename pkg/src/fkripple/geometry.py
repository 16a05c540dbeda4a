"""Ripple geometry from relaxed abscissas, and disregistry measurements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fkmodel import SupercellState, curvature_from_pair
from .params import ModelParams
from .potential import GeometryError


@dataclass
class ArcCurve:
    """Planar curve of piecewise-constant curvature, parametrized by arc length.

    Segment ``j`` covers ``[knots[j], knots[j+1]]`` with curvature
    ``kappa[j]``; ``points[j]`` and ``angles[j]`` are the position and
    tangent angle at ``knots[j]``.
    """

    knots: np.ndarray
    kappa: np.ndarray
    points: np.ndarray
    angles: np.ndarray

    @classmethod
    def integrate(cls, knots, kappa, start=(0.0, 0.0), angle: float = 0.0) -> "ArcCurve":
        knots = np.asarray(knots, dtype=float)
        kappa = np.asarray(kappa, dtype=float)
        lengths = np.diff(knots)
        turn = kappa * lengths
        angles = angle + np.concatenate([[0.0], np.cumsum(turn)])
        chords = _chords(angles[:-1], kappa, lengths)
        points = np.vstack([np.asarray(start, float), np.asarray(start, float) + np.cumsum(chords, axis=0)])
        return cls(knots, kappa, points, angles)

    def evaluate(self, s):
        """Positions, unit tangents and left normals at arc lengths ``s``."""
        s = np.asarray(s, dtype=float)
        j = np.clip(np.searchsorted(self.knots, s, side="right") - 1, 0, len(self.kappa) - 1)
        ds = s - self.knots[j]
        theta0 = self.angles[j]
        pos = self.points[j] + _chords(theta0, self.kappa[j], ds)
        theta = theta0 + self.kappa[j] * ds
        tangent = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        normal = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
        return pos, tangent, normal

    def total_turning(self) -> float:
        return float(self.angles[-1] - self.angles[0])


def _chords(theta, kappa, length):
    """Displacement along an arc of given start angle, curvature and length."""
    half = 0.5 * kappa * length
    # sin(x)/x written via np.sinc, which is sin(pi x)/(pi x)
    scale = length * np.sinc(half / np.pi)
    mid = theta + half
    return np.stack([scale * np.cos(mid), scale * np.sin(mid)], axis=-1)


@dataclass
class RippleCurves:
    chain1: np.ndarray
    chain1_index: np.ndarray
    chain_alpha: np.ndarray
    curve: ArcCurve
    closure_offset: np.ndarray
    closure_angle: float

    def rows(self):
        """CSV rows ``(chain_id, atom_index, x, y)``."""
        for i, (x, y) in zip(self.chain1_index, self.chain1):
            yield 1, int(i), float(x), float(y)
        for j, (x, y) in enumerate(self.chain_alpha):
            yield 2, j, float(x), float(y)


def reconstruct_curves(state: SupercellState, params: ModelParams, periods: int = 1) -> RippleCurves:
    """Integrate chain 1 from the curvatures implied by consecutive abscissas.

    Starts at the origin with a horizontal tangent at ``s_0``.  Chain-1 atoms
    sit at integer arc lengths; chain-alpha atoms at ``gamma(s_j) + h n(s_j)``.
    The cell is not forced to close; the mismatch after ``periods`` cells is
    reported as ``closure_offset`` (relative to the ideal ``(p*periods, 0)``)
    and ``closure_angle``.
    """
    ext = np.concatenate([state.s + k * state.p for k in range(periods)] + [[state.s[0] + periods * state.p]])
    kappa = curvature_from_pair(ext[:-1], ext[1:], params)
    if np.any(np.abs(params.h * kappa) >= 1.0):
        raise GeometryError("|h*kappa| >= 1 in reconstruction")
    curve = ArcCurve.integrate(ext, kappa)
    ints = np.arange(np.ceil(ext[0]), np.floor(ext[-1]) + 1).astype(int)
    chain1, _, _ = curve.evaluate(ints.astype(float))
    pos, _, normal = curve.evaluate(ext[:-1])
    chain_alpha = pos + params.h * normal
    end = curve.points[-1]
    return RippleCurves(
        chain1=chain1,
        chain1_index=ints,
        chain_alpha=chain_alpha,
        curve=curve,
        closure_offset=end - np.array([periods * state.p, 0.0]),
        closure_angle=curve.total_turning(),
    )


def measured_spacings(curve: ArcCurve) -> np.ndarray:
    """Arc length of every segment, recovered from its chord and curvature."""
    out = np.empty(len(curve.kappa))
    for j, (k, a, b) in enumerate(zip(curve.kappa, curve.points[:-1], curve.points[1:])):
        chord = float(np.hypot(*(b - a)))
        if k == 0.0:
            out[j] = chord
        else:
            out[j] = 2.0 * np.arcsin(0.5 * abs(k) * chord) / abs(k)
    return out


def dominant_wavelength(curve: ArcCurve, n_samples: int | None = None) -> float:
    """Arc-length wavelength of the strongest Fourier mode of the ripple.

    The tangent angle is sampled on a uniform arc-length grid and its linear
    trend (the net turning of an open cell) is removed before the transform,
    so a slight mismatch in closure does not masquerade as the longest mode.
    """
    a, b = curve.knots[0], curve.knots[-1]
    n = n_samples or 8 * len(curve.kappa)
    grid = a + (b - a) * np.arange(n) / n
    _, tangent, _ = curve.evaluate(grid)
    theta = np.unwrap(np.arctan2(tangent[:, 1], tangent[:, 0]))
    theta -= np.polyval(np.polyfit(grid, theta, 1), grid)
    spec = np.abs(np.fft.rfft(theta))
    spec[0] = 0.0
    k = int(np.argmax(spec))
    return float((b - a) / k)


def fk_disregistry(state: SupercellState) -> np.ndarray:
    """Disregistry of the reduced model: the abscissas modulo one spacing."""
    return np.mod(state.s, 1.0)


class ProjectionError(ValueError):
    pass


def project_onto_polyline(points, polyline):
    """Closest-point projection onto a polyline.

    Returns ``(arc_positions, segment_indices, vertex_arc_positions)``.

    Ties go to the segment with the smallest arc coordinate.  A point whose
    closest point is an end of the polyline is not projectable.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(polyline, dtype=float)
    a = poly[:-1]
    seg = np.diff(poly, axis=0)
    seglen2 = np.einsum("ij,ij->i", seg, seg)
    cum = np.concatenate([[0.0], np.cumsum(np.sqrt(seglen2))])
    arcs = np.empty(len(pts))
    idx = np.empty(len(pts), dtype=int)
    for n, p in enumerate(pts):
        t = np.clip(np.einsum("ij,ij->i", p - a, seg) / seglen2, 0.0, 1.0)
        foot = a + t[:, None] * seg
        d2 = np.einsum("ij,ij->i", p - foot, p - foot)
        k = int(np.argmin(d2))
        if (k == 0 and t[0] == 0.0) or (k == len(seg) - 1 and t[k] == 1.0):
            raise ProjectionError(f"point {n} projects beyond the end of the polyline")
        arcs[n] = cum[k] + t[k] * np.sqrt(seglen2[k])
        idx[n] = k
    return arcs, idx, cum


def disregistry(positions_bottom, positions_top, spacing_bottom: float) -> np.ndarray:
    """Offset of each top atom's projection from the nearest bottom atom to its left.

    ``positions_bottom`` are the bottom atoms in order (the polyline vertices).
    """
    arcs, idx, cum = project_onto_polyline(positions_top, positions_bottom)
    delta = arcs - cum[idx]
    return np.mod(delta, spacing_bottom)
