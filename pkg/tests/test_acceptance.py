"""Acceptance criteria: Monte Carlo reproduction targets, oracles and data checks.

Every test records a PASS/FAIL line (see the ``criterion`` fixture) before
asserting, so the summary shows measured values even for failures. Seeds are
fixed up front (study base seed 0) and never tuned.
"""

from __future__ import annotations

import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from charncp.kernel import Kernel, Mode, kernel_values, nw_variance
from charncp.model import DgpSpec, InnovationSpec, Series, generate
from charncp.nulldist import build_table, load_or_build, tucked_sheet
from charncp.seqtest import run_test, statistic
from charncp.study import TABLE_PRESETS, StudyConfig, run_cell
from charncp.ingest import IngestSpec, Transform, ingest

from oracles import brute_force_sup, dense_pillow_sups, exact_moment_variance, pillow_covariance

pytestmark = pytest.mark.acceptance

DATA_DIR = Path(os.environ.get("CHARNCP_DATA_DIR", Path(__file__).resolve().parent.parent / "data"))


@pytest.fixture(scope="module")
def null_table():
    return load_or_build()


def preset(name: str, label: str) -> StudyConfig:
    return next(c for c in TABLE_PRESETS[name] if c.label == label)


def in_band(x: float, lo: float, hi: float) -> bool:
    return lo <= x <= hi


class TestRejectionRates:
    def test_1_null_level_ar1(self, null_table, criterion):
        cfg = replace(preset("table1", "AR(1) F1"), replications=2000)
        rates = {n: run_cell(cfg, null_table, n, 0.0, 1.0).rejection_rate for n in (100, 200)}
        ok = all(in_band(r, 0.035, 0.075) for r in rates.values())
        criterion(
            1,
            "AR(1) F1 zeta=0 level, 2000 reps",
            ", ".join(f"n={n}: {100 * r:.2f}%" for n, r in rates.items()),
            "[3.5%, 7.5%] for both n",
            ok,
        )
        assert ok

    def test_2_power_ar1(self, null_table, criterion):
        cell = run_cell(preset("table1", "AR(1) F1"), null_table, 200, 1.0, 1.0)
        ok = in_band(cell.rejection_rate, 0.87, 0.97)
        criterion(2, "AR(1) F1 n=200 zeta=1 power, 500 reps", f"{100 * cell.rejection_rate:.1f}%", "[87%, 97%]", ok)
        assert ok

    def test_3_power_arch(self, null_table, criterion):
        cell = run_cell(preset("table2", "ARCH(1) F1"), null_table, 100, 1.0, 1.0)
        ok = in_band(cell.rejection_rate, 0.50, 0.64)
        criterion(
            3,
            "ARCH(1) F1 n=100 zeta=1 power, 500 reps",
            f"{100 * cell.rejection_rate:.1f}% ({cell.failures} failed)",
            "[50%, 64%]",
            ok,
        )
        assert ok

    def test_4_power_homoscedastic_variance_change(self, null_table, criterion):
        cell = run_cell(TABLE_PRESETS["table6"][0], null_table, 200, 0.6, 1.0)
        ok = in_band(cell.rejection_rate, 0.61, 0.75)
        criterion(4, "homo variance change n=200 zeta=0.6, 500 reps", f"{100 * cell.rejection_rate:.1f}%", "[61%, 75%]", ok)
        assert ok

    def test_6_power_grows_with_n(self, null_table, criterion):
        cfg = preset("table1", "AR(1) F1")
        rates = [run_cell(cfg, null_table, n, 1.0, 1.0).rejection_rate for n in (100, 200, 400)]
        ok = rates[0] < rates[1] < rates[2]
        criterion(
            6,
            "AR(1) F1 zeta=1 power over n=100,200,400",
            " < ".join(f"{100 * r:.1f}%" for r in rates),
            "strictly increasing",
            ok,
        )
        assert ok


def test_5_distribution_free_null(criterion):
    def stats_for(innov: InnovationSpec) -> np.ndarray:
        out = []
        for seed in range(1000):
            spec = DgpSpec(model="ar1-half", pre_change=innov, n=500, seed=seed)
            out.append(run_test(generate(spec), var_floor=0.0, on_degenerate="limit").ks_stat)
        return np.array(out)

    normal = stats_for(InnovationSpec())
    t8 = stats_for(InnovationSpec.parse("std_student_t:8"))
    d = stats.ks_2samp(normal, t8).statistic
    ok = d < 0.08
    criterion(5, "KS distance of null statistics, N(0,1) vs t(8), n=500, 1000 seeds", f"{d:.4f}", "< 0.08", ok)
    assert ok


def test_7_variance_second_moment_identity(criterion):
    # The moment form is evaluated exactly: in floating point it is the
    # unstable side of the identity, not a reference.
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 300))
        v = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 5), size=n)
        s = Series(v)
        x = rng.uniform(v.min(), v.max())
        h = rng.uniform(0.05, 3.0)
        k = kernel_values(Kernel.GAUSSIAN, (x - v[:-1]) / h)
        moment = exact_moment_variance(k, v[1:])
        direct = nw_variance(x, s, Kernel.GAUSSIAN, h)
        worst = max(worst, abs(direct - moment) / moment)
    ok = worst < 1e-10
    criterion(7, "direct vs second-moment variance, 1000 draws", f"max rel diff {worst:.2e}", "< 1e-10", ok)
    assert ok


def test_8_exact_sup_against_brute_force(criterion):
    rng = np.random.default_rng(8)
    worst = -np.inf
    for i in range(200):
        n = int(rng.integers(2, 31))
        r = rng.standard_normal(n)
        if i % 2:
            r = np.round(r, 1)  # ties
        w = None if i % 3 else rng.uniform(0, 1, n)
        worst = max(worst, brute_force_sup(r, w) - statistic(r, w).ks_stat)
    ok = worst <= 1e-12
    criterion(8, "brute-force sup minus grid statistic, 200 instances", f"max excess {worst:.2e}", "<= 1e-12", ok)
    assert ok


def test_9_tucked_sheet_covariance(criterion):
    m, reps = 64, 100_000
    nodes = [((16, 16), (16, 16)), ((16, 32), (48, 32)), ((32, 32), (32, 32)), ((8, 56), (24, 12)), ((48, 20), (48, 40))]
    rng = np.random.default_rng(9)
    sums = np.zeros(len(nodes))
    sq = np.zeros(len(nodes))
    boundary_max = 0.0
    for lo in range(0, reps, 2000):
        g = tucked_sheet(m, rng, size=2000)
        boundary_max = max(boundary_max, *(np.abs(e).max() for e in (g[:, 0], g[:, -1], g[:, :, 0], g[:, :, -1])))
        for i, ((a, b), (c, d)) in enumerate(nodes):
            p = g[:, a, b] * g[:, c, d]
            sums[i] += p.sum()
            sq[i] += (p * p).sum()
    mean = sums / reps
    se = np.sqrt((sq / reps - mean**2) / reps)
    target = np.array([pillow_covariance(a / m, b / m, c / m, d / m) for (a, b), (c, d) in nodes])
    z = np.abs(mean - target) / se
    ok = bool(np.all(z < 4)) and boundary_max == 0.0
    criterion(
        9,
        "sheet covariance at 5 node pairs, 1e5 reps",
        f"max |z| {z.max():.2f}, boundary max {boundary_max:g}",
        "|z| < 4 and boundary exactly 0",
        ok,
    )
    assert ok


def test_10_null_table_cross_oracle(criterion):
    cumsum = build_table(32, 20_000, seed=10).quantile(0.95)
    dense = np.quantile(dense_pillow_sups(32, 20_000, np.random.default_rng(10)), 0.95)
    ok = abs(cumsum - dense) < 0.05
    criterion(10, "q95 grid 32, cumsum vs Cholesky", f"{cumsum:.4f} vs {dense:.4f}", "|diff| < 0.05", ok)
    assert ok


def test_11_expansion_remainder_shrinks(criterion):
    from expansion import median_scaled_remainder

    meds = [median_scaled_remainder(n, seeds=range(50)) for n in (200, 800, 1600)]
    ok = meds[0] > meds[1] > meds[2]
    criterion(
        11,
        "median sqrt(n)*remainder at n=200,800,1600",
        " > ".join(f"{m:.4f}" for m in meds),
        "strictly decreasing",
        ok,
    )
    assert ok


class TestDataWorkflow:
    def _series(self, name: str, **kw):
        path = DATA_DIR / name
        if not path.exists():
            pytest.skip(f"{path} not present (criterion 12 is conditional on data availability)")
        return ingest(IngestSpec(path, transform=Transform.DIFFLOG, **kw))

    def test_12_gnp(self, criterion):
        s = self._series("gnp.csv", column=1)
        stat = {m: run_test(s, mode=m).ks_stat for m in Mode}
        ok = all(abs(v - 1.392) <= 0.05 for v in stat.values())
        criterion(12, "GNP growth statistic", ", ".join(f"{m.value} {v:.3f}" for m, v in stat.items()), "1.392 +- 0.05", ok)
        assert ok

    def test_12_sp500(self, criterion):
        s = self._series("sp500.csv", column=1)
        het = run_test(s, mode=Mode.HETERO).ks_stat
        hom = run_test(s, mode=Mode.HOMO).ks_stat
        ok = abs(het - 1.578) <= 0.05 and abs(hom - 1.575) <= 0.05
        criterion(12, "S&P 500 statistic", f"hetero {het:.3f}, homo {hom:.3f}", "1.578 / 1.575 +- 0.05", ok)
        assert ok
