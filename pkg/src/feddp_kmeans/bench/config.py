"""Experiment configuration and its TOML loader.

A config file looks like::

    name = "desk"
    methods = ["FedDPKMeans", "ServerLloyds", "Optimal"]
    unit = "datapoint"          # or "client"
    seeds = [0, 1, 2, 3, 4]
    delta = 1e-6
    output = "results/desk"
    format = "csv"              # or "json"

    [data]
    kind = "desk"               # "desk", "reference" or "import"
    k = 5
    d = 20
    n = 10000
    m = 20

    [grid]
    eps_init = [0.1, 0.2, 0.4, 0.8, 1.6, 3.2]
    T = [0, 1, 2]
    eps_lloyds = [0.1, 0.2, 0.4, 0.8, 1.6, 3.2]

Every key is optional except ``methods``. For ``kind = "import"`` the
``[data]`` section needs ``path``, ``server_path`` and ``k``.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..federated import PrivacyUnit

DEFAULT_EPS_GRID = (0.1, 0.2, 0.4, 0.8, 1.6, 3.2)


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configs."""


class Method(enum.Enum):
    FEDDP = "FedDPKMeans"
    SERVER_KMEANSPP = "ServerKMeansPP"
    SERVER_LLOYDS = "ServerLloyds"
    SPHERE_PACKING = "SpherePacking"
    KFED = "KFed"
    OPTIMAL = "Optimal"

    @property
    def non_private(self) -> bool:
        return self in (Method.KFED, Method.OPTIMAL)

    @property
    def uses_init_budget(self) -> bool:
        return self is Method.FEDDP


@dataclass
class DataConfig:
    kind: str = "desk"
    k: int = 5
    d: int = 20
    n: int = 10_000
    m: int = 20
    separation: float = 2.0
    in_dist_per_component: int = 20
    ood_count: int = 50
    missing_components: tuple[int, ...] = ()
    path: str | None = None
    server_path: str | None = None
    format: str = "csv"

    def __post_init__(self):
        self.missing_components = tuple(int(c) for c in self.missing_components)
        if self.kind not in ("desk", "reference", "import"):
            raise ConfigError(f"unknown data kind {self.kind!r}")
        if self.k < 1 or self.m < 1:
            raise ConfigError("k and m must be positive")
        if self.kind != "import":
            if self.d < 1 or self.n < self.m:
                raise ConfigError("need d >= 1 and n >= m")
            if self.n % self.m:
                raise ConfigError(f"n={self.n} is not divisible by m={self.m}")
            if any(not 0 <= c < self.k for c in self.missing_components):
                raise ConfigError("missing components must be indices in [0, k)")
        elif not (self.path and self.server_path):
            raise ConfigError("imported data needs both path and server_path")


@dataclass
class GridConfig:
    """Budget sweep. ``eps_init`` only applies to FedDPKMeans; T = 0 ignores ``eps_lloyds``."""

    eps_init: tuple[float, ...] = DEFAULT_EPS_GRID
    T: tuple[int, ...] = (0, 1, 2)
    eps_lloyds: tuple[float, ...] = DEFAULT_EPS_GRID
    # share of each Lloyd budget spent on the Gaussian sums (the rest goes to counts)
    gauss_fraction: float = 0.75

    def __post_init__(self):
        self.eps_init = tuple(float(e) for e in self.eps_init)
        self.T = tuple(int(t) for t in self.T)
        self.eps_lloyds = tuple(float(e) for e in self.eps_lloyds)
        if not self.eps_init or not self.T:
            raise ConfigError("budget grids must be nonempty")
        if any(t > 0 for t in self.T) and not self.eps_lloyds:
            raise ConfigError("eps_lloyds grid is empty but T > 0 is requested")
        if any(e <= 0 for e in self.eps_init + self.eps_lloyds):
            raise ConfigError("grid epsilons must be positive")
        if any(t < 0 for t in self.T):
            raise ConfigError("T values must be nonnegative")
        if not 0 < self.gauss_fraction < 1:
            raise ConfigError("gauss_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class GridPoint:
    index: int
    eps_init: float | None
    T: int
    eps_lloyds: float | None


@dataclass
class ExperimentConfig:
    methods: tuple[Method, ...]
    name: str = "experiment"
    unit: PrivacyUnit = PrivacyUnit.DATA_POINT
    data: DataConfig = field(default_factory=DataConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    delta: float = 1e-6
    output: str = "results"
    format: str = "csv"
    restarts: int = 10
    # False runs every mechanism without noise (budgets are still charged)
    noise: bool = True
    # elbow scan settings
    k_prime: int = 10
    k_range: tuple[int, ...] = tuple(range(1, 11))
    elbow_eps_init: float = 1.0

    def __post_init__(self):
        try:
            self.methods = tuple(m if isinstance(m, Method) else Method(m) for m in self.methods)
            self.unit = self.unit if isinstance(self.unit, PrivacyUnit) else PrivacyUnit(self.unit)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.seeds = tuple(int(s) for s in self.seeds)
        self.k_range = tuple(int(k) for k in self.k_range)
        if not self.methods:
            raise ConfigError("no methods given")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.format!r}")
        if self.restarts < 1:
            raise ConfigError("restarts must be positive")
        if not self.k_range or min(self.k_range) < 1 or self.k_prime < max(self.k_range):
            raise ConfigError("need 1 <= k_range <= k_prime")

    def grid_points(self, method: Method) -> list[GridPoint]:
        """Budget settings swept for ``method`` (non-private methods get a single point)."""
        if method.non_private:
            return [GridPoint(0, None, 0, None)]
        inits = self.grid.eps_init if method.uses_init_budget else (None,)
        points = []
        for e0 in inits:
            for T in self.grid.T:
                for e1 in (self.grid.eps_lloyds if T > 0 else (None,)):
                    points.append(GridPoint(len(points), e0, T, e1))
        return points

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["methods"] = [m.value for m in self.methods]
        out["unit"] = self.unit.value
        return out

    def config_hash(self) -> str:
        payload = self.to_dict()
        payload.pop("output")
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _build(cls, raw, section):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"[{section}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    if "methods" not in raw:
        raise ConfigError("config needs a 'methods' list")
    data = _build(DataConfig, raw.pop("data", None), "data")
    grid = _build(GridConfig, raw.pop("grid", None), "grid")
    names = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"data", "grid"}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(data=data, grid=grid, **raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    """Parse a TOML config. I/O problems raise OSError, content problems ConfigError."""
    text = Path(path).read_bytes()
    try:
        raw = tomllib.loads(text.decode())
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw)
