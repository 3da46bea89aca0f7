"""Declarative Monte Carlo studies of rejection probabilities.

A study is a list of :class:`StudyConfig` rows. Every row sweeps a grid of
``zeta`` values, sample sizes and bandwidth constants; each cell runs
``replications`` independent generate -> fit -> test -> p-value pipelines.
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import CharnError, ConfigError, ParameterError
from .kernel import BandwidthRule, Kernel, Mode, fit
from .model import PRESETS, DgpSpec, InnovationSpec, generate, zeta_family
from .nulldist import NullTable
from .seqtest import WeightSpec, test_process

__all__ = [
    "StudyConfig",
    "Cell",
    "RejectionTable",
    "run_study",
    "replication_seed",
    "load_study",
    "TABLE_PRESETS",
    "FAILURE_FLAG_FRACTION",
]

log = logging.getLogger(__name__)

FAILURE_FLAG_FRACTION = 0.01
DEFAULT_ZETAS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0)
DEFAULT_ZETAS_99 = (0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 0.99)


@dataclass(frozen=True)
class StudyConfig:
    """One row family of a rejection table.

    ``post_family`` names a zeta-indexed innovation law (see
    :data:`charncp.model.ZETA_FAMILIES`); ``pre_change`` is fixed.
    """

    label: str
    model: str = "ar1-half"
    pre_change: InnovationSpec = field(default_factory=InnovationSpec)
    post_family: str = "mean_mixture"
    zetas: tuple[float, ...] = DEFAULT_ZETAS
    n_values: tuple[int, ...] = (100, 200)
    replications: int = 500
    level: float = 0.05
    bandwidth_constants: tuple[float, ...] = (1.0,)
    mode: Mode = Mode.HETERO
    kernel: Kernel = Kernel.GAUSSIAN
    theta0: float = 0.5
    burn_in_factor: int = 9
    base_seed: int = 0
    var_floor: float = 0.0
    on_degenerate: str = "limit"

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        object.__setattr__(self, "zetas", tuple(float(z) for z in self.zetas))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "bandwidth_constants", tuple(float(c) for c in self.bandwidth_constants))
        if self.on_degenerate not in ("raise", "limit"):
            raise ConfigError(f"{self.label}: on_degenerate must be 'raise' or 'limit'")
        if self.replications < 1:
            raise ConfigError(f"{self.label}: replications must be >= 1")
        if not 0 < self.level < 1:
            raise ConfigError(f"{self.label}: level must lie in (0, 1)")
        if self.model not in PRESETS:
            raise ConfigError(f"{self.label}: unknown model {self.model!r}")
        if not self.zetas or not self.n_values or not self.bandwidth_constants:
            raise ConfigError(f"{self.label}: zetas, n_values and bandwidth_constants must be non-empty")
        try:
            for z in self.zetas:
                zeta_family(self.post_family, z)
        except ParameterError as exc:
            raise ConfigError(f"{self.label}: {exc}") from exc

    def cells(self) -> Iterable[tuple[int, float, float]]:
        for n in self.n_values:
            for c in self.bandwidth_constants:
                for z in self.zetas:
                    yield n, z, c

    def dgp(self, n: int, zeta: float, seed: int) -> DgpSpec:
        return DgpSpec(
            model=PRESETS[self.model],
            pre_change=self.pre_change,
            post_change=zeta_family(self.post_family, zeta),
            theta0=self.theta0,
            n=n,
            burn_in_factor=self.burn_in_factor,
            seed=seed,
        )


def replication_seed(base_seed: int, label: str, n: int, zeta: float, c: float, rep: int) -> int:
    """64-bit seed derived from the cell coordinates and replication index."""
    key = (
        zlib.crc32(label.encode()),
        int(n),
        int(round(zeta * 1_000_000)),
        int(round(c * 1_000_000)),
        int(rep),
    )
    ss = np.random.SeedSequence(int(base_seed), spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Cell:
    family: str
    n: int
    zeta: float
    c: float
    rejection_rate: float
    stderr: float
    failures: int
    replications: int

    @property
    def flagged(self) -> bool:
        return self.failures > FAILURE_FLAG_FRACTION * self.replications


CSV_COLUMNS = ["family", "n", "zeta", "c", "rejection_rate", "stderr", "failures"]


@dataclass
class RejectionTable:
    cells: list[Cell] = field(default_factory=list)

    def get(self, family: str, n: int, zeta: float, c: float = 1.0) -> Cell:
        for cell in self.cells:
            if cell.family == family and cell.n == n and math.isclose(cell.zeta, zeta) and math.isclose(cell.c, c):
                return cell
        raise KeyError((family, n, zeta, c))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for cell in self.cells:
            writer.writerow(csv_row(cell))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, replications: int | None = None) -> "RejectionTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(
            [
                Cell(
                    r["family"],
                    int(r["n"]),
                    float(r["zeta"]),
                    float(r["c"]),
                    float(r["rejection_rate"]),
                    float(r["stderr"]),
                    int(r["failures"]),
                    replications or 0,
                )
                for r in rows
            ]
        )

    def to_text(self) -> str:
        """Aligned table in percent: one line per (family, n, c), one column per zeta."""
        groups: dict[tuple[str, int, float], dict[float, Cell]] = {}
        for cell in self.cells:
            groups.setdefault((cell.family, cell.n, cell.c), {})[cell.zeta] = cell
        lines: list[str] = []
        last_zetas = None
        for (fam, n, c), row in groups.items():
            zetas = sorted(row)
            name = f"{fam}, n={n}" + ("" if c == 1.0 else f", c={c:g}")
            if zetas != last_zetas:
                lines.append(f"{'%':<28}" + "".join(f"{'zeta=' + format(z, 'g'):>11}" for z in zetas))
                last_zetas = zetas
            cells = "".join(f"{100 * row[z].rejection_rate:>10.1f}{'*' if row[z].flagged else ' '}" for z in zetas)
            lines.append(f"{name:<28}{cells}")
        if any(cell.flagged for cell in self.cells):
            lines.append(f"* more than {100 * FAILURE_FLAG_FRACTION:g}% of replications failed")
        return "\n".join(lines) + "\n"


def csv_row(cell: Cell) -> list:
    return [cell.family, cell.n, f"{cell.zeta:g}", f"{cell.c:g}", repr(cell.rejection_rate), repr(cell.stderr), cell.failures]


def run_replication(config: StudyConfig, table: NullTable, n: int, zeta: float, c: float, rep: int) -> float:
    """p-value of one replication of a cell."""
    seed = replication_seed(config.base_seed, config.label, n, zeta, c, rep)
    series = generate(config.dgp(n, zeta, seed))
    fitted = fit(
        series,
        config.kernel,
        BandwidthRule(c=c),
        config.mode,
        var_floor=config.var_floor,
        on_degenerate=config.on_degenerate,
    )
    return table.p_value(test_process(fitted, WeightSpec()).ks_stat)


def run_cell(config: StudyConfig, table: NullTable, n: int, zeta: float, c: float) -> Cell:
    rejections = failures = 0
    for rep in range(config.replications):
        try:
            p = run_replication(config, table, n, zeta, c, rep)
        except CharnError as exc:
            failures += 1
            log.debug("%s n=%d zeta=%g c=%g rep=%d failed: %s", config.label, n, zeta, c, rep, exc)
            continue
        rejections += p <= config.level
    ok = config.replications - failures
    rate = rejections / ok if ok else math.nan
    stderr = math.sqrt(rate * (1 - rate) / ok) if ok else math.nan
    cell = Cell(config.label, n, zeta, c, rate, stderr, failures, config.replications)
    if cell.flagged:
        log.warning("%s n=%d zeta=%g c=%g: %d of %d replications failed", config.label, n, zeta, c, failures, ok + failures)
    return cell


def run_study(
    configs: StudyConfig | Sequence[StudyConfig],
    table: NullTable,
    *,
    threads: int = 1,
    on_cell: Callable[[Cell], None] | None = None,
) -> RejectionTable:
    """Run every cell of every config.

    ``on_cell`` is called as each cell finishes (in completion order); the
    returned table lists cells in config order regardless of ``threads``.
    """
    if isinstance(configs, StudyConfig):
        configs = [configs]
    jobs = [(cfg, n, z, c) for cfg in configs for n, z, c in cfg.cells()]

    def work(job):
        cfg, n, z, c = job
        cell = run_cell(cfg, table, n, z, c)
        log.info("%s n=%d zeta=%g c=%g: %.3f", cfg.label, n, z, c, cell.rejection_rate)
        if on_cell is not None:
            on_cell(cell)
        return cell

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(work, jobs))
    else:
        cells = [work(job) for job in jobs]
    return RejectionTable(cells)


# -- config files ----------------------------------------------------------------

_LIST_KEYS = {"zetas": float, "n_values": int, "bandwidth_constants": float}
_SCALAR_KEYS = {
    "model": str,
    "post_family": str,
    "replications": int,
    "level": float,
    "mode": str,
    "kernel": str,
    "theta0": float,
    "burn_in_factor": int,
    "base_seed": int,
    "var_floor": float,
    "on_degenerate": str,
}


def parse_study(text: str) -> list[StudyConfig]:
    """Parse an INI study file: one section per row family, ``[DEFAULT]`` shared."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse study config: {exc}") from exc
    configs = []
    for section in parser.sections():
        kwargs: dict = {"label": section}
        for key, value in parser.items(section):
            try:
                if key in _LIST_KEYS:
                    kwargs[key] = tuple(_LIST_KEYS[key](v) for v in value.replace(",", " ").split())
                elif key in _SCALAR_KEYS:
                    kwargs[key] = _SCALAR_KEYS[key](value)
                elif key == "pre_change":
                    kwargs[key] = InnovationSpec.parse(value)
                else:
                    raise ConfigError(f"[{section}] unknown key {key!r}")
            except (ValueError, ParameterError) as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
        configs.append(StudyConfig(**kwargs))
    if not configs:
        raise ConfigError("study config defines no sections")
    return configs


def load_study(path: str | Path) -> list[StudyConfig]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read study config {path}: {exc}") from exc
    return parse_study(text)


def format_study(configs: Sequence[StudyConfig]) -> str:
    out = []
    for cfg in configs:
        out.append(f"[{cfg.label}]")
        out.append(f"model = {cfg.model}")
        out.append(f"pre_change = {cfg.pre_change}")
        out.append(f"post_family = {cfg.post_family}")
        out.append("zetas = " + ", ".join(f"{z:g}" for z in cfg.zetas))
        out.append("n_values = " + ", ".join(str(n) for n in cfg.n_values))
        out.append("bandwidth_constants = " + ", ".join(f"{c:g}" for c in cfg.bandwidth_constants))
        for key in ("replications", "level", "theta0", "burn_in_factor", "base_seed", "var_floor", "on_degenerate"):
            out.append(f"{key} = {getattr(cfg, key)}")
        out.append(f"mode = {cfg.mode.value}")
        out.append(f"kernel = {cfg.kernel.value}")
        out.append("")
    return "\n".join(out)


def _t3() -> InnovationSpec:
    return InnovationSpec.parse("std_student_t:3")


TABLE_PRESETS: dict[str, list[StudyConfig]] = {
    "table1": [
        StudyConfig("AR(1) F1", "ar1-half", post_family="mean_mixture"),
        StudyConfig("AR(1) F2", "ar1-half", post_family="var_mixture", zetas=DEFAULT_ZETAS_99),
    ],
    "table2": [
        StudyConfig("ARCH(1) F1", "arch1-paper", post_family="mean_mixture"),
        StudyConfig("ARCH(1) F2", "arch1-paper", post_family="var_mixture", zetas=DEFAULT_ZETAS_99),
    ],
    "table3": [
        StudyConfig(
            "ARCH(1) St(3+10z)",
            "arch1-paper",
            pre_change=_t3(),
            post_family="student_t_3_plus_10zeta",
            n_values=(100, 200, 500),
        ),
    ],
    "table4": [
        StudyConfig("ARCH(1) F3", "arch1-paper", pre_change=_t3(), post_family="shifted_t_mixture"),
        StudyConfig(
            "ARCH(1) F4", "arch1-paper", pre_change=_t3(), post_family="scaled_t_mixture", zetas=DEFAULT_ZETAS_99
        ),
    ],
    "table5": [
        StudyConfig("AR(1) F5", "ar1-half", post_family="skew_normal", n_values=(100, 200, 500)),
        StudyConfig("ARCH(1) F5", "arch1-paper", post_family="skew_normal", n_values=(100, 200, 500)),
    ],
    "table6": [
        StudyConfig(
            "AR(1) homo variance change",
            "ar1-half",
            pre_change=InnovationSpec.parse("normal:0,0.5"),
            post_family="normal_variance_change",
            mode=Mode.HOMO,
        ),
    ],
    "bandwidth": [
        StudyConfig(
            "AR(1) F1",
            "ar1-half",
            post_family="mean_mixture",
            n_values=(200,),
            bandwidth_constants=(0.5, 0.75, 1.0, 1.5, 2.0),
        ),
    ],
}
