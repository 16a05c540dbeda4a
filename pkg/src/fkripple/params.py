"""Model constants of the reduced double-chain system."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction

import mpmath

GOLDEN_DIGITS = 50

_SYMBOLIC = re.compile(
    r"^\(?\s*(?P<num>\d+)\s*(?:/\s*(?P<den>\d+))?\s*\)?\s*\*\s*golden$"
)


class ParameterError(ValueError):
    """Raised for out-of-range or malformed model parameters."""


@dataclass(frozen=True)
class Alpha:
    """Spacing ratio stored both symbolically and as a float.

    ``ratio`` is the rational multiple of the golden ratio, or ``None`` when
    the value was given as a plain decimal.
    """

    value: float
    ratio: Fraction | None = None
    decimal: str = ""

    @classmethod
    def golden_multiple(cls, ratio) -> "Alpha":
        ratio = Fraction(ratio)
        with mpmath.workdps(GOLDEN_DIGITS):
            exact = mpmath.mpf(ratio.numerator) / ratio.denominator
            exact *= (1 + mpmath.sqrt(5)) / 2
            text = mpmath.nstr(exact, GOLDEN_DIGITS - 5)
            # mpmath rounds correctly to the nearest double
            value = float(exact)
        return cls(value=value, ratio=ratio, decimal=text)

    @classmethod
    def parse(cls, text: str | float) -> "Alpha":
        """Accept ``"(8/13)*golden"`` or a decimal literal."""
        if isinstance(text, (int, float)):
            return cls(value=float(text), decimal=repr(float(text)))
        s = text.strip()
        m = _SYMBOLIC.match(s)
        if m:
            return cls.golden_multiple(Fraction(int(m["num"]), int(m["den"] or 1)))
        try:
            value = float(s)
        except ValueError:
            raise ParameterError(f"alpha: cannot parse {text!r}") from None
        return cls(value=value, decimal=s)

    def __str__(self) -> str:
        if self.ratio is not None:
            return f"({self.ratio.numerator}/{self.ratio.denominator})*golden"
        return repr(self.value)

    def exact(self, dps: int = GOLDEN_DIGITS) -> mpmath.mpf:
        with mpmath.workdps(dps):
            if self.ratio is None:
                return mpmath.mpf(self.decimal or repr(self.value))
            return (
                mpmath.mpf(self.ratio.numerator)
                / self.ratio.denominator
                * (1 + mpmath.sqrt(5))
                / 2
            )


# How chain-1 atoms are laid on the local parabola: at arc length i - s from
# the vertex, or at horizontal coordinate x = i - s.
PLACEMENTS = ("arclength", "abscissa")

DEFAULT_ALPHA = Alpha.golden_multiple(Fraction(8, 13))


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the reduced model.

    Lengths are in units of the chain-1 spacing, energies in units of the
    pair-potential depth.
    """

    alpha: Alpha = field(default_factory=lambda: DEFAULT_ALPHA)
    h: float = 2.1262
    beta: float = 764.0
    eps: float = 1.0
    sigma: float = 2.0
    lattice_cutoff: int = 200
    placement: str = "abscissa"

    def __post_init__(self):
        if not isinstance(self.alpha, Alpha):
            object.__setattr__(self, "alpha", Alpha.parse(self.alpha))
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.alpha.value > 0, "alpha > 0"),
            (self.h > 0, "h > 0"),
            (self.beta >= 0, "beta >= 0"),
            (self.eps > 0, "eps > 0"),
            (self.sigma > 0, "sigma > 0"),
            (int(self.lattice_cutoff) == self.lattice_cutoff, "lattice_cutoff is an integer"),
            (self.lattice_cutoff >= 1, "lattice_cutoff >= 1"),
            (self.placement in PLACEMENTS, f"placement in {PLACEMENTS}"),
        ]
        for ok, what in checks:
            if not ok:
                raise ParameterError(f"constraint violated: {what}")

    @property
    def a(self) -> float:
        return self.alpha.value

    def with_beta(self, beta: float) -> "ModelParams":
        return replace(self, beta=float(beta))


def default_params(beta: float = 764.0) -> ModelParams:
    return ModelParams(beta=beta)
