"""Series containers, innovation laws and the autoregressive data generators.

The generators simulate

    X_j = m(X_{j-1}) + sigma(X_{j-1}) * eps_j

from ``X = 0`` with a long burn-in, switch the innovation law at a prescribed
fraction of the retained sample and keep the last ``n + 1`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericOverflowError, ParameterError, SeriesError

__all__ = [
    "Family",
    "InnovationSpec",
    "Recursion",
    "PRESETS",
    "DgpSpec",
    "Series",
    "sample_innovation",
    "generate",
    "zeta_family",
    "ZETA_FAMILIES",
]


@dataclass(frozen=True, eq=False)
class Series:
    """Observed values ``X_0, ..., X_n``.

    ``row_labels`` optionally carries one label per value (e.g. dates from an
    input file) so a change-point index can be reported in calendar terms.
    """

    values: np.ndarray
    label: str | None = None
    row_labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float).ravel()
        if arr.size < 2:
            raise SeriesError(f"a series needs at least 2 values, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise SeriesError(f"non-finite value {arr[bad]!r} at index {bad}")
        if self.row_labels is not None and len(self.row_labels) != arr.size:
            raise SeriesError("row_labels must have one entry per value")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        """Number of lag pairs ``(X_{j-1}, X_j)``."""
        return self.values.size - 1

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Series):
            return NotImplemented
        return (
            self.label == other.label
            and self.row_labels == other.row_labels
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]


class Family(str, Enum):
    STD_NORMAL = "std_normal"
    MEAN_MIXTURE = "mean_mixture"
    VAR_MIXTURE = "var_mixture"
    STD_STUDENT_T = "std_student_t"
    SHIFTED_T_MIXTURE = "shifted_t_mixture"
    SCALED_T_MIXTURE = "scaled_t_mixture"
    SKEW_NORMAL = "skew_normal"
    NORMAL = "normal"


# ``std_t(3)`` is the building block of the shifted/scaled t mixtures.
_MIXTURE_T_DF = 3.0


@dataclass(frozen=True)
class InnovationSpec:
    """A sampleable innovation law.

    Only the parameters relevant to ``family`` are used: ``zeta`` for the
    mixture and skew-normal families, ``nu`` for the standardized Student-t,
    ``mu``/``sigma`` for the plain normal.
    """

    family: Family = Family.STD_NORMAL
    zeta: float = 0.0
    nu: float = 3.0
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        self.validate()

    def validate(self) -> None:
        fam = self.family
        if fam in (Family.MEAN_MIXTURE, Family.SHIFTED_T_MIXTURE, Family.SKEW_NORMAL):
            if not (math.isfinite(self.zeta) and self.zeta >= 0):
                raise ParameterError(f"{fam.value}: zeta must be >= 0, got {self.zeta}")
        elif fam in (Family.VAR_MIXTURE, Family.SCALED_T_MIXTURE):
            if not 0 <= self.zeta < 1:
                raise ParameterError(f"{fam.value}: zeta must lie in [0, 1), got {self.zeta}")
        elif fam is Family.STD_STUDENT_T:
            if not (self.nu > 2 and math.isfinite(self.nu)):
                raise ParameterError(f"std_student_t: nu must be > 2, got {self.nu}")
        elif fam is Family.NORMAL:
            if not (self.sigma >= 0 and math.isfinite(self.sigma)) or not math.isfinite(self.mu):
                raise ParameterError(f"normal: invalid (mu, sigma) = ({self.mu}, {self.sigma})")

    def __str__(self) -> str:
        fam = self.family
        if fam is Family.STD_NORMAL:
            return fam.value
        if fam is Family.STD_STUDENT_T:
            return f"{fam.value}:{self.nu:g}"
        if fam is Family.NORMAL:
            return f"{fam.value}:{self.mu:g},{self.sigma:g}"
        return f"{fam.value}:{self.zeta:g}"

    @classmethod
    def parse(cls, text: str) -> "InnovationSpec":
        """Inverse of ``str``: ``"var_mixture:0.6"``, ``"normal:0,0.5"``, ..."""
        name, _, args = text.strip().partition(":")
        try:
            fam = Family(name.strip())
            vals = [float(a) for a in args.split(",")] if args.strip() else []
        except ValueError as exc:
            raise ParameterError(f"cannot parse innovation spec {text!r}") from exc
        if fam is Family.STD_NORMAL:
            return cls(fam)
        if fam is Family.STD_STUDENT_T:
            return cls(fam, nu=vals[0] if vals else 3.0)
        if fam is Family.NORMAL:
            mu, sigma = (vals + [0.0, 1.0][len(vals):])[:2] if vals else (0.0, 1.0)
            return cls(fam, mu=mu, sigma=sigma)
        return cls(fam, zeta=vals[0] if vals else 0.0)

    @property
    def mean(self) -> float:
        """Population mean."""
        if self.family is Family.NORMAL:
            return self.mu
        return 0.0

    @property
    def variance(self) -> float:
        """Population variance."""
        fam, z = self.family, self.zeta
        if fam is Family.MEAN_MIXTURE:
            return 1.0 + 4.0 * z * z
        if fam is Family.SHIFTED_T_MIXTURE:
            return 1.0 + 4.0 * z * z
        if fam is Family.NORMAL:
            return self.sigma**2
        return 1.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` iid values."""
        fam, z = self.family, self.zeta
        if fam is Family.STD_NORMAL:
            return rng.standard_normal(size)
        if fam is Family.NORMAL:
            return self.mu + self.sigma * rng.standard_normal(size)
        if fam is Family.STD_STUDENT_T:
            return _std_t(rng, self.nu, size)
        if fam is Family.SKEW_NORMAL:
            return _skew_normal(rng, 10.0 * z, size)

        # Fair-coin mixtures: component indicator first, then the component.
        upper = rng.random(size) < 0.5
        if fam is Family.MEAN_MIXTURE:
            return np.where(upper, 2.0 * z, -2.0 * z) + rng.standard_normal(size)
        if fam is Family.SHIFTED_T_MIXTURE:
            return np.where(upper, 2.0 * z, -2.0 * z) + _std_t(rng, _MIXTURE_T_DF, size)
        lo, hi = 1.0 - z, math.sqrt(2.0 - (1.0 - z) ** 2)
        scale = np.where(upper, hi, lo)
        if fam is Family.VAR_MIXTURE:
            return scale * rng.standard_normal(size)
        if fam is Family.SCALED_T_MIXTURE:
            return scale * _std_t(rng, _MIXTURE_T_DF, size)
        raise ParameterError(f"unknown family {fam!r}")  # pragma: no cover


def _std_t(rng: np.random.Generator, nu: float, size: int) -> np.ndarray:
    return rng.standard_t(nu, size) * math.sqrt((nu - 2.0) / nu)


def skew_normal_params(alpha: float) -> tuple[float, float, float]:
    """Location, scale and shape giving a mean-0, variance-1 skew-normal law."""
    a2 = alpha * alpha
    pi = math.pi
    loc = -math.sqrt(2 * pi * (a2 + a2 * a2) / (pi**2 + (2 * pi**2 - 2 * pi) * a2 + (pi**2 - 2 * pi) * a2 * a2))
    scale = math.sqrt(pi * (1 + a2)) / math.sqrt(pi + (pi - 2) * a2)
    return loc, scale, alpha


def _skew_normal(rng: np.random.Generator, alpha: float, size: int) -> np.ndarray:
    loc, scale, _ = skew_normal_params(alpha)
    delta = alpha / math.sqrt(1.0 + alpha * alpha)
    z0 = np.abs(rng.standard_normal(size))
    z1 = rng.standard_normal(size)
    return loc + scale * (delta * z0 + math.sqrt(1.0 - delta * delta) * z1)


def sample_innovation(spec: InnovationSpec, rng: np.random.Generator) -> float:
    """Draw a single innovation."""
    return float(spec.sample(rng, 1)[0])


# Families indexed by the scalar ``zeta`` swept in the simulation tables.
ZETA_FAMILIES: dict[str, Callable[[float], InnovationSpec]] = {
    "mean_mixture": lambda z: InnovationSpec(Family.MEAN_MIXTURE, zeta=z),
    "var_mixture": lambda z: InnovationSpec(Family.VAR_MIXTURE, zeta=z),
    "student_t_3_plus_10zeta": lambda z: InnovationSpec(Family.STD_STUDENT_T, nu=3.0 + 10.0 * z),
    "shifted_t_mixture": lambda z: InnovationSpec(Family.SHIFTED_T_MIXTURE, zeta=z),
    "scaled_t_mixture": lambda z: InnovationSpec(Family.SCALED_T_MIXTURE, zeta=z),
    "skew_normal": lambda z: InnovationSpec(Family.SKEW_NORMAL, zeta=z),
    "normal_variance_change": lambda z: InnovationSpec(Family.NORMAL, sigma=0.5 + z),
}


def zeta_family(name: str, zeta: float) -> InnovationSpec:
    try:
        build = ZETA_FAMILIES[name]
    except KeyError:
        raise ParameterError(
            f"unknown zeta family {name!r}; choose from {', '.join(ZETA_FAMILIES)}"
        ) from None
    return build(zeta)


@dataclass(frozen=True)
class Recursion:
    """Conditional mean and scale of a first-order autoregression."""

    name: str
    mean_fn: Callable[[float], float]
    scale_fn: Callable[[float], float]


PRESETS: dict[str, Recursion] = {
    "ar1-half": Recursion("ar1-half", lambda x: 0.5 * x, lambda x: 1.0),
    "arch1-paper": Recursion("arch1-paper", lambda x: 0.0, lambda x: math.sqrt(0.75 + 0.25 * x * x)),
    "iid": Recursion("iid", lambda x: 0.0, lambda x: 1.0),
}


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process with an optional change in the innovation law.

    ``theta0 = 1`` means no change. Otherwise retained innovations
    ``1..floor(n*theta0)`` follow ``pre_change`` and the rest ``post_change``.
    """

    model: Recursion = field(default_factory=lambda: PRESETS["ar1-half"])
    pre_change: InnovationSpec = field(default_factory=InnovationSpec)
    post_change: InnovationSpec = field(default_factory=InnovationSpec)
    theta0: float = 1.0
    n: int = 100
    burn_in_factor: int = 9
    seed: int = 0

    def __post_init__(self) -> None:
        if isinstance(self.model, str):
            object.__setattr__(self, "model", _preset(self.model))
        if not 0 < self.theta0 <= 1:
            raise ParameterError(f"theta0 must lie in (0, 1], got {self.theta0}")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        if int(self.burn_in_factor) != self.burn_in_factor or self.burn_in_factor < 1:
            raise ParameterError(f"burn_in_factor must be a positive integer, got {self.burn_in_factor}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    @property
    def total_steps(self) -> int:
        return (1 + self.burn_in_factor) * self.n

    @property
    def last_pre_change_step(self) -> int:
        """Global step of the last pre-change innovation (steps are 1-based)."""
        return self.total_steps - self.n + math.floor(self.n * self.theta0)

    def with_seed(self, seed: int) -> "DgpSpec":
        return replace(self, seed=int(seed))

    # -- plain-text config ---------------------------------------------------
    def to_config(self) -> str:
        if self.model.name not in PRESETS or PRESETS[self.model.name] is not self.model:
            raise ConfigError("only preset recursions can be serialized")
        lines = [
            f"model = {self.model.name}",
            f"pre_change = {self.pre_change}",
            f"post_change = {self.post_change}",
            f"theta0 = {self.theta0!r}",
            f"n = {self.n}",
            f"burn_in_factor = {self.burn_in_factor}",
            f"seed = {self.seed}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config(cls, text: str) -> "DgpSpec":
        kv = parse_key_values(text)
        known = {"model", "pre_change", "post_change", "theta0", "n", "burn_in_factor", "seed"}
        unknown = set(kv) - known
        if unknown:
            raise ConfigError(f"unknown DGP keys: {', '.join(sorted(unknown))}")
        kwargs: dict = {}
        try:
            if "model" in kv:
                kwargs["model"] = _preset(kv["model"])
            for key in ("pre_change", "post_change"):
                if key in kv:
                    kwargs[key] = InnovationSpec.parse(kv[key])
            if "theta0" in kv:
                kwargs["theta0"] = float(kv["theta0"])
            for key in ("n", "burn_in_factor", "seed"):
                if key in kv:
                    kwargs[key] = int(kv[key])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "DgpSpec":
        return cls.from_config(Path(path).read_text())


def _preset(name: str) -> Recursion:
    try:
        return PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown model preset {name!r}; choose from {', '.join(PRESETS)}") from None


def parse_key_values(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def generate(spec: DgpSpec) -> Series:
    """Simulate the recursion and return the retained ``n + 1`` values."""
    rng = np.random.default_rng(np.random.SeedSequence(int(spec.seed)))
    total = spec.total_steps
    switch = spec.last_pre_change_step
    eps = np.empty(total + 1)
    eps[0] = 0.0
    eps[1 : switch + 1] = spec.pre_change.sample(rng, switch)
    if switch < total:
        eps[switch + 1 :] = spec.post_change.sample(rng, total - switch)

    path = _simulate(spec.model, eps)
    if not np.all(np.isfinite(path)):
        step = int(np.flatnonzero(~np.isfinite(path))[0])
        raise NumericOverflowError(step, float(path[step]))
    return Series(path[total - spec.n :], label=spec.model.name)


def _simulate(model: Recursion, eps: np.ndarray) -> np.ndarray:
    m, sig = model.mean_fn, model.scale_fn
    out = np.empty(eps.size)
    x = 0.0
    out[0] = x
    e = eps.tolist()
    j = 0
    try:
        for j in range(1, eps.size):
            x = m(x) + sig(x) * e[j]
            out[j] = x
    except OverflowError:
        raise NumericOverflowError(j, math.inf) from None
    return out
