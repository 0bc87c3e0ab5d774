"""Differential-privacy primitives: noise mechanisms, clipping and budget accounting.

All samplers take an explicit ``numpy.random.Generator``. Use :func:`substream`
to derive independent, reproducible generators for each (run, round, client,
mechanism) key.
"""

from __future__ import annotations

import enum
import math
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

import numpy as np

__all__ = [
    "PrivacyParams",
    "NormKind",
    "Sensitivity",
    "BudgetLedger",
    "substream",
    "gaussian_sigma",
    "laplace_scale",
    "add_gaussian_noise",
    "add_laplace_noise",
    "symmetric_gaussian_matrix",
    "clip_l2",
    "clip_l1",
    "compose_basic",
    "compose_advanced",
    "total_budget",
]


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")


class NormKind(enum.Enum):
    L1 = "L1"
    L2 = "L2"


@dataclass(frozen=True)
class Sensitivity:
    value: float
    norm: NormKind = NormKind.L2

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"sensitivity must be nonnegative, got {self.value}")


@dataclass
class BudgetLedger:
    """Append-only record of every privacy charge made during a run."""

    entries: list[tuple[str, PrivacyParams]] = field(default_factory=list)

    def append(self, label: str, params: PrivacyParams) -> None:
        if label in self:
            raise ValueError(f"ledger label {label!r} already charged")
        self.entries.append((label, params))

    def __contains__(self, label: object) -> bool:
        return any(lbl == label for lbl, _ in self.entries)

    def __iter__(self) -> Iterator[tuple[str, PrivacyParams]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def params(self) -> list[PrivacyParams]:
        return [p for _, p in self.entries]

    def to_list(self) -> list[dict]:
        return [{"label": lbl, "epsilon": p.epsilon, "delta": p.delta} for lbl, p in self.entries]

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> "BudgetLedger":
        ledger = cls()
        for item in items:
            ledger.append(item["label"], PrivacyParams(float(item["epsilon"]), float(item["delta"])))
        return ledger


def substream(seed: int, *key: Union[int, str]) -> np.random.Generator:
    """Counter-based generator for ``key`` under ``seed``.

    String key parts are hashed with CRC32 so the mapping is stable across
    processes and platforms. Distinct keys give statistically independent streams.
    """
    words = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=words)))


def gaussian_sigma(epsilon: float, delta: float, sensitivity: float) -> float:
    """Standard deviation of the Gaussian mechanism, ``sqrt(2 ln(1.25/delta)) * S / epsilon``."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"the Gaussian mechanism needs delta in (0, 1), got {delta}")
    if not sensitivity > 0:
        raise ValueError(f"sensitivity must be positive, got {sensitivity}")
    return math.sqrt(2.0 * math.log(1.25 / delta)) * sensitivity / epsilon


def laplace_scale(epsilon: float, sensitivity: float) -> float:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not sensitivity > 0:
        raise ValueError(f"sensitivity must be positive, got {sensitivity}")
    return sensitivity / epsilon


def add_gaussian_noise(v, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Return ``v`` plus iid ``N(0, sigma^2)`` noise; ``sigma == 0`` skips sampling."""
    v = np.asarray(v, dtype=float)
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return v.copy()
    return v + rng.normal(0.0, sigma, size=v.shape)


def add_laplace_noise(x, b: float, rng: np.random.Generator):
    """Return ``x`` plus Laplace(0, b) noise per entry; ``b == 0`` skips sampling."""
    if b < 0:
        raise ValueError(f"scale must be nonnegative, got {b}")
    arr = np.asarray(x, dtype=float)
    if b == 0:
        out = arr.copy()
    else:
        out = arr + rng.laplace(0.0, b, size=arr.shape)
    return float(out) if out.ndim == 0 else out


def symmetric_gaussian_matrix(d: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """d x d symmetric matrix whose upper triangle (with diagonal) is iid N(0, sigma^2)."""
    if d < 1:
        raise ValueError(f"d must be positive, got {d}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    rows, cols = np.triu_indices(d)
    out = np.zeros((d, d))
    if sigma > 0:
        vals = rng.normal(0.0, sigma, size=rows.size)
        out[rows, cols] = vals
        out[cols, rows] = vals
    return out


def clip_l2(v, bound: float) -> np.ndarray:
    """Rescale ``v`` onto the L2 ball of radius ``bound`` if it lies outside."""
    if not bound > 0:
        raise ValueError(f"clip bound must be positive, got {bound}")
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm <= bound:
        return v.copy()
    return v * (bound / norm)


def clip_l1(v, bound: float) -> np.ndarray:
    if not bound > 0:
        raise ValueError(f"clip bound must be positive, got {bound}")
    v = np.asarray(v, dtype=float)
    norm = np.abs(v).sum()
    if norm <= bound:
        return v.copy()
    return v * (bound / norm)


def _as_params(entries) -> list[PrivacyParams]:
    if isinstance(entries, BudgetLedger):
        return entries.params()
    out = []
    for e in entries:
        out.append(e[1] if isinstance(e, tuple) else e)
    return out


def compose_basic(entries) -> PrivacyParams:
    """Sequential composition: epsilons and deltas add up."""
    params = _as_params(entries)
    if not params:
        raise ValueError("cannot compose an empty ledger")
    eps = math.fsum(p.epsilon for p in params)
    delta = math.fsum(p.delta for p in params)
    return PrivacyParams(eps, delta)


def compose_advanced(entries, delta_slack: float) -> PrivacyParams:
    """Advanced composition (Dwork-Rothblum-Vadhan) for ``s`` identical (eps, delta) steps.

    eps_total = sqrt(2 s ln(1/slack)) eps + s eps (e^eps - 1),
    delta_total = s delta + slack.
    """
    params = _as_params(entries)
    if not params:
        raise ValueError("cannot compose an empty ledger")
    if not 0 < delta_slack < 1:
        raise ValueError(f"delta_slack must lie in (0, 1), got {delta_slack}")
    first = params[0]
    if any(p.epsilon != first.epsilon or p.delta != first.delta for p in params):
        raise ValueError("advanced composition needs identical entries; use compose_basic")
    s = len(params)
    eps = first.epsilon
    eps_total = math.sqrt(2.0 * s * math.log(1.0 / delta_slack)) * eps + s * eps * math.expm1(eps)
    return PrivacyParams(eps_total, s * first.delta + delta_slack)


def total_budget(entries, delta_slack: float | None = None) -> PrivacyParams:
    """The tighter of basic and advanced composition (by epsilon).

    Advanced composition is only tried for homogeneous ledgers. ``delta_slack``
    defaults to 10% of the basic-composition delta (or 1e-7 when that is zero).
    """
    params = _as_params(entries)
    basic = compose_basic(params)
    if delta_slack is None:
        delta_slack = 0.1 * basic.delta if basic.delta > 0 else 1e-7
    try:
        advanced = compose_advanced(params, delta_slack)
    except ValueError:
        return basic
    if advanced.epsilon < basic.epsilon and advanced.delta < 1:
        return advanced
    return basic
