"""Double-chain Frenkel-Kontorova model of spontaneous rippling in incommensurate bilayers."""

__version__ = "0.1.0"

from .params import Alpha, ModelParams, default_params  # noqa: E402
from .potential import TabulatedPotential, tabulate, vper  # noqa: E402
from .fkmodel import SupercellState, check_conditions  # noqa: E402

__all__ = [
    "Alpha",
    "ModelParams",
    "default_params",
    "TabulatedPotential",
    "tabulate",
    "vper",
    "SupercellState",
    "check_conditions",
]
