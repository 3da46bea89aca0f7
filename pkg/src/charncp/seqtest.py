"""Weighted sequential empirical processes and the Kolmogorov-Smirnov change-point statistic.

For a split after residual ``k`` the test process is

    T_n(k/n, t) = sqrt(n) * (W_k / n) * (W*_k / n) * (F_k(t) - F*_{n-k}(t))

where ``W_k`` / ``W*_k`` are the weight totals before / after the split and
``F_k``, ``F*_{n-k}`` the weighted residual ECDFs of the two segments. For fixed
``k`` the difference of ECDFs is a right-continuous step function of ``t`` that
only jumps at residual values and vanishes below the smallest one, so the
supremum over ``t`` is attained on the sorted distinct residuals. The statistic
is computed exactly on that grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import ParameterError
from .kernel import BandwidthRule, FitResult, Kernel, Mode, fit
from .model import Series

__all__ = [
    "WeightSpec",
    "weight",
    "smoothstep7",
    "seq_ecdf",
    "TestReport",
    "test_process",
    "run_test",
]

# Rows of the (k, t) grid processed per block; bounds memory at O(block * n).
_BLOCK = 512


class WeightMode(str, Enum):
    TRIVIAL = "trivial"
    INTERVAL = "interval"


@dataclass(frozen=True)
class WeightSpec:
    """Weight function ``w`` applied to the lagged value ``X_{j-1}``.

    ``Interval(a, b, kappa)`` is 1 on ``[a + kappa, b - kappa]``, 0 outside
    ``[a, b]`` and rises/falls along a C^3 polynomial ramp in between.
    """

    mode: WeightMode = WeightMode.TRIVIAL
    a: float = -math.inf
    b: float = math.inf
    kappa: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", WeightMode(self.mode))
        if self.mode is WeightMode.INTERVAL:
            if not (self.kappa > 0 and math.isfinite(self.a) and math.isfinite(self.b)):
                raise ParameterError(f"invalid interval weight a={self.a}, b={self.b}, kappa={self.kappa}")
            if not self.a + self.kappa < self.b - self.kappa:
                raise ParameterError("interval weight needs a + kappa < b - kappa")

    @classmethod
    def interval(cls, a: float, b: float, kappa: float) -> "WeightSpec":
        return cls(WeightMode.INTERVAL, a, b, kappa)

    @classmethod
    def parse(cls, text: str) -> "WeightSpec":
        """``"trivial"`` or ``"interval:a,b,kappa"``."""
        name, _, args = text.strip().partition(":")
        if name == "trivial" and not args:
            return cls()
        if name == "interval":
            try:
                a, b, kappa = (float(v) for v in args.split(","))
            except ValueError:
                raise ParameterError(f"expected interval:a,b,kappa, got {text!r}") from None
            return cls.interval(a, b, kappa)
        raise ParameterError(f"unknown weight spec {text!r}")

    def __str__(self) -> str:
        if self.mode is WeightMode.TRIVIAL:
            return "trivial"
        return f"interval:{self.a:g},{self.b:g},{self.kappa:g}"

    def __call__(self, x) -> np.ndarray:
        return weight(self, x)


def smoothstep7(u):
    """``35u^4 - 84u^5 + 70u^6 - 20u^7`` clipped to [0, 1]; C^3 at both ends."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return u**4 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))


def weight(spec: WeightSpec, x):
    """Evaluate the weight function; scalar in, scalar out."""
    xa = np.asarray(x, dtype=float)
    if spec.mode is WeightMode.TRIVIAL:
        out = np.ones_like(xa)
    else:
        rise = smoothstep7((xa - spec.a) / spec.kappa)
        fall = smoothstep7((spec.b - xa) / spec.kappa)
        out = np.minimum(rise, fall)
    return float(out) if out.ndim == 0 else out


def seq_ecdf(residuals, weights, k: int, t: float) -> float:
    """Weighted ECDF of the first ``k`` residuals at ``t``; 0 when ``k = 0`` or no weight."""
    r = np.asarray(residuals, dtype=float)[:k]
    w = np.asarray(weights, dtype=float)[:k]
    total = w.sum()
    if k <= 0 or total <= 0:
        return 0.0
    return float(w[r <= t].sum() / total)


@dataclass(frozen=True, eq=False)
class TestReport:
    """Outcome of the change-point statistic on one series.

    ``s_profile`` holds ``max_t |T_n(k/n, t)|`` for ``k = 1..n-1``;
    ``changepoint_index`` is the smallest ``k`` attaining ``ks_stat``.
    """

    __test__ = False  # not a pytest class

    ks_stat: float
    changepoint_index: int
    s_values: np.ndarray
    s_profile: np.ndarray
    n: int
    mode: Mode | None = None
    bandwidth: float | None = None
    t_at_max: float | None = None
    p_value: float | None = None
    critical_values: dict[float, float] = field(default_factory=dict)

    @property
    def s_star(self) -> float:
        return self.changepoint_index / self.n

    def with_null(self, p_value: float, critical_values: dict[float, float] | None = None) -> "TestReport":
        return replace(self, p_value=p_value, critical_values=dict(critical_values or {}))

    def to_dict(self) -> dict:
        return {
            "stat": self.ks_stat,
            "p_value": self.p_value,
            "changepoint_index": self.changepoint_index,
            "s_star": self.s_star,
            "t_at_max": self.t_at_max,
            "mode": self.mode.value if self.mode is not None else None,
            "n": self.n,
            "bandwidth": self.bandwidth,
            "critical_values": {f"{q:g}": v for q, v in sorted(self.critical_values.items())},
        }

    def to_json(self, **extra) -> str:
        d = self.to_dict()
        d.update(extra)
        return json.dumps(d, indent=2, sort_keys=False)

    def profile_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["s", "max_abs_T"])
        for s, v in zip(self.s_values, self.s_profile):
            writer.writerow([repr(float(s)), repr(float(v))])
        return buf.getvalue()


def _profile(residuals: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per split ``k = 1..n-1``: max over t of |T_n| and the index of the maximizing t."""
    n = residuals.size
    grid, rank = np.unique(residuals, return_inverse=True)
    m = grid.size
    w_total = weights.sum()
    # Column totals over all n residuals: S_n(t) = sum_j w_j 1{r_j <= t}.
    s_full = np.cumsum(np.bincount(rank, weights=weights, minlength=m))
    scale = math.sqrt(n) / (n * n)

    prof = np.zeros(n - 1)
    arg_t = np.zeros(n - 1, dtype=np.int64)
    carry = np.zeros(m)  # per-column weight of residuals before the current block
    w_cum = np.cumsum(weights)
    for lo in range(0, n - 1, _BLOCK):
        hi = min(lo + _BLOCK, n - 1)
        rows = hi - lo
        block = np.zeros((rows, m))
        block[np.arange(rows), rank[lo:hi]] = weights[lo:hi]
        np.cumsum(block, axis=0, out=block)
        block += carry
        carry = block[-1].copy()
        np.cumsum(block, axis=1, out=block)  # S_k(t) for k = lo+1..hi
        w_k = w_cum[lo:hi, None]
        t_vals = scale * ((w_total - w_k) * block - w_k * (s_full[None, :] - block))
        np.abs(t_vals, out=t_vals)
        idx = t_vals.argmax(axis=1)
        arg_t[lo:hi] = idx
        prof[lo:hi] = t_vals[np.arange(rows), idx]
    return prof, grid[arg_t] if n > 1 else np.zeros(0)


def test_process(fit_result: FitResult, wspec: WeightSpec | None = None) -> TestReport:
    """Evaluate the test process on every ``(k/n, t)`` grid cell of a fit."""
    wspec = wspec or WeightSpec()
    weights = np.asarray(weight(wspec, fit_result.design), dtype=float).reshape(-1)
    report = statistic(fit_result.residuals, weights)
    return replace(report, mode=fit_result.mode, bandwidth=fit_result.bandwidth_used)


def statistic(residuals, weights=None) -> TestReport:
    """KS statistic of raw residuals with optional per-residual weights."""
    r = np.asarray(residuals, dtype=float).reshape(-1)
    n = r.size
    if n < 2:
        raise ParameterError(f"need at least 2 residuals, got {n}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != r.shape:
        raise ParameterError("weights and residuals differ in length")
    prof, t_arg = _profile(r, w)
    k = int(np.argmax(prof))
    return TestReport(
        ks_stat=float(prof[k]),
        changepoint_index=k + 1,
        s_values=np.arange(1, n) / n,
        s_profile=prof,
        n=n,
        t_at_max=float(t_arg[k]),
    )


test_process.__test__ = False  # not a pytest test despite the name


def run_test(
    series: Series,
    kernel: Kernel | str = Kernel.GAUSSIAN,
    bw: BandwidthRule | None = None,
    wspec: WeightSpec | None = None,
    mode: Mode | str = Mode.HETERO,
    **fit_kwargs,
) -> TestReport:
    """Fit the kernel estimators and evaluate the change-point statistic."""
    return test_process(fit(series, kernel, bw, mode, **fit_kwargs), wspec)
