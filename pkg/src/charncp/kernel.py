"""Nadaraya-Watson estimates of the conditional mean and variance.

Both estimators regress ``X_i`` on the lagged value ``X_{i-1}`` with a kernel
``K`` and bandwidth ``h``:

    m_hat(x)      = sum_i K((x - X_{i-1})/h) X_i / sum_i K((x - X_{i-1})/h)
    sigma_hat2(x) = sum_i K((x - X_{i-1})/h) (X_i - m_hat(x))^2 / sum_i K(...)

Evaluation at the design points is leave-in: the sum runs over all ``i``
including the pair being fitted.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DegenerateVarianceError,
    EmptyNeighborhoodError,
    InternalConsistencyError,
    ParameterError,
)
from .model import Series

__all__ = [
    "Kernel",
    "BandwidthRule",
    "Mode",
    "FitResult",
    "kernel_values",
    "nw_mean",
    "nw_mean_pairs",
    "nw_variance",
    "fit",
    "VAR_FLOOR",
]

VAR_FLOOR = 1e-12
_NEG_ROUNDOFF = -1e-12
_SQRT_2PI = math.sqrt(2.0 * math.pi)
# Rows of the kernel matrix evaluated at once in ``fit``.
_CHUNK = 1024


class Kernel(str, Enum):
    GAUSSIAN = "gaussian"
    TRIWEIGHT = "triweight"

    def __call__(self, u):
        return kernel_values(self, u)


def kernel_values(kernel: Kernel | str, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if Kernel(kernel) is Kernel.GAUSSIAN:
        return np.exp(-0.5 * u * u) / _SQRT_2PI
    v = np.clip(1.0 - u * u, 0.0, None)
    return (35.0 / 32.0) * v * v * v


class Mode(str, Enum):
    HETERO = "hetero"
    HOMO = "homo"


@dataclass(frozen=True)
class BandwidthRule:
    """``h = c * n**exponent``, or a fixed ``h`` when ``fixed`` is set."""

    c: float = 1.0
    exponent: float = -0.25
    fixed: float | None = None

    def __post_init__(self) -> None:
        if self.fixed is not None:
            if not (self.fixed > 0 and math.isfinite(self.fixed)):
                raise ParameterError(f"fixed bandwidth must be positive, got {self.fixed}")
        elif not (self.c > 0 and math.isfinite(self.c) and math.isfinite(self.exponent)):
            raise ParameterError(f"invalid power-law bandwidth c={self.c}, exponent={self.exponent}")

    def __call__(self, n: int) -> float:
        if self.fixed is not None:
            return float(self.fixed)
        return self.c * float(n) ** self.exponent


def _lagged(series: Series) -> tuple[np.ndarray, np.ndarray]:
    v = series.values
    return v[:-1], v[1:]


def _check_h(h: float) -> None:
    if not (h > 0 and math.isfinite(h)):
        raise ParameterError(f"bandwidth must be positive, got {h}")


def nw_mean(x: float, series: Series, kernel: Kernel | str, h: float) -> float:
    """Kernel-weighted average of ``X_i`` around lagged value ``x``."""
    return nw_mean_pairs(x, *_lagged(series), kernel, h)


def nw_mean_pairs(x: float, design, response, kernel: Kernel | str, h: float) -> float:
    """``nw_mean`` on explicit ``(X_{i-1}, X_i)`` pairs in any order."""
    _check_h(h)
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    k = kernel_values(kernel, (x - design) / h)
    denom = k.sum()
    if not denom > 0:
        raise EmptyNeighborhoodError(x, h)
    return float(k @ response / denom)


def nw_variance(x: float, series: Series, kernel: Kernel | str, h: float) -> float:
    """Kernel-weighted dispersion of ``X_i`` around ``nw_mean(x)``."""
    _check_h(h)
    design, response = _lagged(series)
    k = kernel_values(kernel, (x - design) / h)
    denom = k.sum()
    if not denom > 0:
        raise EmptyNeighborhoodError(x, h)
    m = k @ response / denom
    return _clamp(float(k @ (response - m) ** 2 / denom), x)


def _clamp(v: float, x: float) -> float:
    if v < 0:
        if v < _NEG_ROUNDOFF:
            raise InternalConsistencyError(f"negative variance estimate {v!r} at x={x!r}")
        return 0.0
    return v


@dataclass(frozen=True, eq=False)
class FitResult:
    """Fitted values at the design points ``X_{j-1}``, ``j = 1..n``."""

    design: np.ndarray
    response: np.ndarray
    m_hat: np.ndarray
    sigma_hat: np.ndarray
    residuals: np.ndarray
    bandwidth_used: float
    mode: Mode
    variance_bandwidth: float | None = None
    degenerate: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.residuals.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["j", "x_prev", "x", "m_hat", "sigma_hat", "residual"])
        for j in range(self.n):
            writer.writerow(
                [j + 1]
                + [repr(float(a[j])) for a in (self.design, self.response, self.m_hat, self.sigma_hat, self.residuals)]
            )
        return buf.getvalue()


def _weighted_moments(
    points: np.ndarray, design: np.ndarray, response: np.ndarray, kernel: Kernel, h: float
) -> tuple[np.ndarray, np.ndarray]:
    """Kernel weight matrix rows for ``points``: returns (row sums, weighted means)."""
    sums = np.empty(points.size)
    means = np.empty(points.size)
    for lo in range(0, points.size, _CHUNK):
        pts = points[lo : lo + _CHUNK]
        k = kernel_values(kernel, (pts[:, None] - design[None, :]) / h)
        s = k.sum(axis=1)
        sums[lo : lo + _CHUNK] = s
        with np.errstate(invalid="ignore", divide="ignore"):
            means[lo : lo + _CHUNK] = (k @ response) / s
    return sums, means


def _weighted_dispersion(
    points: np.ndarray, centers: np.ndarray, design: np.ndarray, response: np.ndarray, kernel: Kernel, h: float
) -> np.ndarray:
    out = np.empty(points.size)
    for lo in range(0, points.size, _CHUNK):
        pts = points[lo : lo + _CHUNK]
        k = kernel_values(kernel, (pts[:, None] - design[None, :]) / h)
        dev = response[None, :] - centers[lo : lo + _CHUNK, None]
        out[lo : lo + _CHUNK] = (k * dev * dev).sum(axis=1) / k.sum(axis=1)
    return out


def fit(
    series: Series,
    kernel: Kernel | str = Kernel.GAUSSIAN,
    bw: BandwidthRule | None = None,
    mode: Mode | str = Mode.HETERO,
    *,
    bw_variance: BandwidthRule | None = None,
    var_floor: float = VAR_FLOOR,
    on_degenerate: str = "raise",
) -> FitResult:
    """Estimate ``m`` (and ``sigma``) at every lagged design point and form residuals.

    Parameters
    ----------
    series : Series
        Observations ``X_0..X_n``.
    kernel : Kernel
        Smoothing kernel, Gaussian by default.
    bw : BandwidthRule
        Bandwidth as a function of ``n``; defaults to ``n**(-1/4)``.
    mode : Mode
        ``hetero`` standardizes by ``sigma_hat``; ``homo`` only removes ``m_hat``.
    bw_variance : BandwidthRule, optional
        Separate bandwidth for the variance estimate. Defaults to ``bw``.
    var_floor : float
        Variance estimates at or below this value raise
        :class:`DegenerateVarianceError`.
    on_degenerate : {"raise", "limit"}
        With ``"limit"``, design points so isolated that every other kernel
        weight underflows (``m_hat == X_j`` and ``sigma_hat == 0`` exactly) get
        the limiting residual 0 instead of raising. With self-weight 1 and
        remaining mass ``delta`` the residual is ``O(sqrt(delta))``. Their
        1-based indices are listed in ``FitResult.degenerate``.

    Returns
    -------
    FitResult
    """
    kernel = Kernel(kernel)
    mode = Mode(mode)
    bw = bw or BandwidthRule()
    n = series.n
    h = bw(n)
    _check_h(h)
    design, response = _lagged(series)

    sums, m_hat = _weighted_moments(design, design, response, kernel, h)
    empty = np.flatnonzero(~(sums > 0))
    if empty.size:
        raise EmptyNeighborhoodError(float(design[empty[0]]), h)

    if mode is Mode.HOMO:
        sigma_hat = np.ones(n)
        residuals = response - m_hat
        h2 = None
        degenerate = ()
    else:
        h2 = bw_variance(n) if bw_variance is not None else h
        _check_h(h2)
        if h2 != h:
            s2 = _weighted_moments(design, design, response, kernel, h2)[0]
            empty = np.flatnonzero(~(s2 > 0))
            if empty.size:
                raise EmptyNeighborhoodError(float(design[empty[0]]), h2)
        var = _weighted_dispersion(design, m_hat, design, response, kernel, h2)
        if np.any(var < _NEG_ROUNDOFF):
            j = int(np.flatnonzero(var < _NEG_ROUNDOFF)[0])
            raise InternalConsistencyError(f"negative variance estimate {var[j]!r} at j={j + 1}")
        if on_degenerate not in ("raise", "limit"):
            raise ParameterError(f"on_degenerate must be 'raise' or 'limit', got {on_degenerate!r}")
        isolated = (var == 0.0) & (response == m_hat) if on_degenerate == "limit" else np.zeros(n, bool)
        bad = np.flatnonzero((var <= var_floor) & ~isolated)
        if bad.size:
            raise DegenerateVarianceError([int(b) + 1 for b in bad], var_floor)
        sigma_hat = np.sqrt(var)
        residuals = np.zeros(n)
        ok = ~isolated
        residuals[ok] = (response[ok] - m_hat[ok]) / sigma_hat[ok]
        degenerate = tuple(int(j) + 1 for j in np.flatnonzero(isolated))

    return FitResult(
        design=design,
        response=response,
        m_hat=m_hat,
        sigma_hat=sigma_hat,
        residuals=residuals,
        bandwidth_used=h,
        mode=mode,
        variance_bandwidth=h2,
        degenerate=degenerate,
    )
