"""INI-style run configuration.

Sections and keys (all optional except ``model.alpha``)::

    [model]      alpha, h, beta, eps, sigma, lattice_cutoff, placement
    [solver]     tol, max_iter, memory, symmetrized, p, q, q_max,
                 reference_q, orbit_steps
    [table]      n_s, n_kappa, h_kappa_max, path
    [atomistic]  n1, n2, cell_length, separation, l1, k1, k_theta1, k2,
                 k_theta2, eps, sigma, cutoff, tol, max_iter, memory
    [io]         out, snapshot

``alpha`` is a decimal or a rational multiple of the golden ratio written
``(8/13)*golden``.  ``max_iter = 0`` in ``[solver]`` means ``50 q``.  The
chain-2 bond length is always ``cell_length / n2``.  Unknown sections or
keys are errors.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .params import Alpha, ModelParams, ParameterError


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    max_iter: int = 0
    memory: int = 10
    symmetrized: bool = False
    p: int = 2555
    q: int = 2566
    q_max: int = 1000
    reference_q: int = 2566
    orbit_steps: int = 0

    def checks(self):
        return [
            (self.tol > 0, "solver.tol > 0"),
            (self.max_iter >= 0, "solver.max_iter >= 0"),
            (self.memory >= 1, "solver.memory >= 1"),
            (self.q >= 1, "solver.q >= 1"),
            (self.p >= 1, "solver.p >= 1"),
            (self.q_max >= 1, "solver.q_max >= 1"),
            (self.reference_q >= 1, "solver.reference_q >= 1"),
            (self.orbit_steps >= 0, "solver.orbit_steps >= 0"),
        ]


@dataclass(frozen=True)
class TableConfig:
    n_s: int = 256
    n_kappa: int = 144
    h_kappa_max: float = 0.45
    path: str = ""

    def checks(self):
        return [
            (self.n_s >= 64, "table.n_s >= 64"),
            (self.n_kappa >= 16, "table.n_kappa >= 16"),
            (0 < self.h_kappa_max < 0.5, "0 < table.h_kappa_max < 0.5"),
        ]


@dataclass(frozen=True)
class AtomisticConfig:
    n1: int = 232
    n2: int = 233
    cell_length: float = 116.0
    separation: float = 1.063
    l1: float = 0.5
    k1: float = 130600.0
    k_theta1: float = 764.0
    k2: float = 130039.0
    k_theta2: float = 761.0
    eps: float = 1.0
    sigma: float = 1.0
    cutoff: float = 29.0
    tol: float = 1e-8
    max_iter: int = 200000
    memory: int = 20

    def checks(self):
        return [
            (self.n1 >= 3 and self.n2 >= 3, "atomistic.n1, atomistic.n2 >= 3"),
            (self.cell_length > 0, "atomistic.cell_length > 0"),
            (abs(self.n1 * self.l1 - self.cell_length) <= 1e-9, "atomistic.n1 * atomistic.l1 == atomistic.cell_length"),
            (self.separation > 0, "atomistic.separation > 0"),
            (min(self.k1, self.k2, self.k_theta1, self.k_theta2) >= 0, "atomistic spring constants >= 0"),
            (self.eps > 0 and self.sigma > 0, "atomistic.eps, atomistic.sigma > 0"),
            (self.cutoff > 0, "atomistic.cutoff > 0"),
            (self.tol > 0, "atomistic.tol > 0"),
            (self.max_iter >= 1, "atomistic.max_iter >= 1"),
            (self.memory >= 1, "atomistic.memory >= 1"),
        ]


@dataclass(frozen=True)
class IOConfig:
    out: str = "out"
    snapshot: str = ""

    def checks(self):
        return []


_MODEL_KEYS = {"alpha": str, "h": float, "beta": float, "eps": float, "sigma": float,
               "lattice_cutoff": int, "placement": str}
_SECTIONS = {"solver": SolverConfig, "table": TableConfig, "atomistic": AtomisticConfig, "io": IOConfig}


@dataclass(frozen=True)
class Config:
    model: ModelParams
    solver: SolverConfig = field(default_factory=SolverConfig)
    table: TableConfig = field(default_factory=TableConfig)
    atomistic: AtomisticConfig = field(default_factory=AtomisticConfig)
    io: IOConfig = field(default_factory=IOConfig)

    def with_beta(self, beta: float) -> "Config":
        return replace(self, model=self.model.with_beta(beta))


def _convert(kind, section: str, key: str, raw: str):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as {kind.__name__}") from None


def loads_config(text: str, source: str = "<string>") -> Config:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for name in cp.sections():
        if name != "model" and name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")

    model = dict(cp["model"]) if cp.has_section("model") else {}
    for key in model:
        if key not in _MODEL_KEYS:
            raise ConfigError(f"unknown key model.{key}")
    if "alpha" not in model:
        raise ConfigError("model.alpha is required")
    kw = {k: _convert(_MODEL_KEYS[k], "model", k, v) for k, v in model.items()}
    try:
        kw["alpha"] = Alpha.parse(kw["alpha"])
        params = ModelParams(**kw)
    except ParameterError as exc:
        raise ConfigError(f"model: {exc}") from None

    parts = {}
    for name, cls in _SECTIONS.items():
        types = {f.name: f.type for f in fields(cls)}
        raw = dict(cp[name]) if cp.has_section(name) else {}
        vals = {}
        for key, value in raw.items():
            if key not in types:
                raise ConfigError(f"unknown key {name}.{key}")
            vals[key] = _convert(_TYPE_NAMES[types[key]], name, key, value)
        part = cls(**vals)
        for ok, what in part.checks():
            if not ok:
                raise ConfigError(f"constraint violated: {what}")
        parts[name] = part
    return Config(model=params, **parts)


_TYPE_NAMES = {"int": int, "float": float, "bool": bool, "str": str}


def load_config(path) -> Config:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return loads_config(path.read_text(), source=str(path))


def dump(config: Config) -> str:
    """Serialize a configuration; ``loads_config(dump(c)) == c``."""
    m = config.model
    lines = [
        "[model]",
        f"alpha = {m.alpha if m.alpha.ratio is not None else (m.alpha.decimal or repr(m.alpha.value))}",
        f"h = {m.h!r}",
        f"beta = {m.beta!r}",
        f"eps = {m.eps!r}",
        f"sigma = {m.sigma!r}",
        f"lattice_cutoff = {m.lattice_cutoff}",
        f"placement = {m.placement}",
    ]
    for name in _SECTIONS:
        part = getattr(config, name)
        lines += ["", f"[{name}]"]
        for f in fields(part):
            v = getattr(part, f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else (repr(v) if isinstance(v, float) else v)}")
    return "\n".join(lines) + "\n"
