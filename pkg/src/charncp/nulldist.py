"""Limiting null law of the KS change-point statistic.

Under no change the statistic converges to the supremum of ``|G|`` where ``G``
is a completely tucked Brownian sheet (Brownian pillow) on the unit square:
a centered Gaussian field with covariance

    (s1 ^ s2 - s1 s2) (z1 ^ z2 - z1 z2)

The law has no closed form, so critical values and p-values come from a
simulated table of sup-draws that is cached on disk.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NullTableError, ParameterError

__all__ = [
    "NullTable",
    "tucked_sheet",
    "simulate_sheet_sup",
    "build_table",
    "p_value",
    "default_cache_dir",
    "load_or_build",
    "DEFAULT_GRID",
    "DEFAULT_REPLICATIONS",
    "DEFAULT_SEED",
]

log = logging.getLogger(__name__)

DEFAULT_GRID = 256
DEFAULT_REPLICATIONS = 100_000
DEFAULT_SEED = 20130101
MIN_REPLICATIONS = 1000
MIN_GRID = 16

FORMAT_VERSION = 1
_MAGIC = b"CHARNCP-NULLTABLE\n"
# Replications per independently seeded chunk. Fixed so that the table does
# not depend on the number of worker threads.
_CHUNK = 256
# Sheets held in memory at once inside a chunk.
_BATCH = 16
CACHE_ENV = "CHARNCP_CACHE_DIR"


def tucked_sheet(m: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Tucked Brownian sheet on the ``(m+1) x (m+1)`` node grid ``(i/m, j/m)``.

    The free sheet ``W`` is the double cumulative sum of iid ``N(0, 1/m^2)``
    cells; tucking ``W(s,z) - s W(1,z) - z W(s,1) + s z W(1,1)`` equals the
    double cumulative sum of the doubly centred cells, which is what is
    computed. Returns shape ``(m+1, m+1)`` or ``(size, m+1, m+1)``.
    """
    if m < MIN_GRID:
        raise ParameterError(f"grid size must be >= {MIN_GRID}, got {m}")
    batch = 1 if size is None else size
    z = rng.standard_normal((batch, m, m))
    z -= z.mean(axis=1, keepdims=True)
    z -= z.mean(axis=2, keepdims=True)
    g = np.zeros((batch, m + 1, m + 1))
    np.cumsum(z, axis=1, out=z)
    np.cumsum(z, axis=2, out=z)
    g[:, 1:, 1:] = z / m
    # The last row and column are zero up to rounding; pin them exactly.
    g[:, -1, :] = 0.0
    g[:, :, -1] = 0.0
    return g[0] if size is None else g


def _sups(m: int, rng: np.random.Generator, count: int) -> np.ndarray:
    out = np.empty(count)
    for lo in range(0, count, _BATCH):
        b = min(_BATCH, count - lo)
        g = tucked_sheet(m, rng, b)
        out[lo : lo + b] = np.abs(g).reshape(b, -1).max(axis=1)
    return out


def simulate_sheet_sup(m: int, rng: np.random.Generator) -> float:
    """One draw of ``max |G|`` over the grid nodes."""
    return float(_sups(m, rng, 1)[0])


@dataclass(frozen=True, eq=False)
class NullTable:
    """Sorted simulated draws of ``sup |G|``."""

    sorted_sups: np.ndarray
    grid_size: int
    replications: int
    seed: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.sorted_sups, dtype=float)
        if arr.size != self.replications:
            raise NullTableError("table length does not match replications")
        if arr.size < 1 or np.any(arr < 0) or np.any(np.diff(arr) < 0):
            raise NullTableError("table must be non-empty, non-negative and sorted")
        arr.flags.writeable = False
        object.__setattr__(self, "sorted_sups", arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NullTable):
            return NotImplemented
        return (
            (self.grid_size, self.replications, self.seed) == (other.grid_size, other.replications, other.seed)
            and np.array_equal(self.sorted_sups, other.sorted_sups)
        )

    __hash__ = None  # type: ignore[assignment]

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.sorted_sups, q))

    def critical_value(self, level: float) -> float:
        return self.quantile(1.0 - level)

    def critical_values(self, qs=(0.90, 0.95, 0.99)) -> dict[float, float]:
        return {q: self.quantile(q) for q in qs}

    def p_value(self, stat: float) -> float:
        return p_value(self, stat)

    # -- persistence -----------------------------------------------------------
    def to_bytes(self) -> bytes:
        header = json.dumps(
            {
                "format_version": FORMAT_VERSION,
                "grid_size": self.grid_size,
                "replications": self.replications,
                "seed": self.seed,
                "dtype": "<f8",
            },
            sort_keys=True,
        ).encode()
        return _MAGIC + struct.pack("<I", len(header)) + header + self.sorted_sups.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "NullTable":
        if not data.startswith(_MAGIC):
            raise NullTableError("not a null-table file")
        off = len(_MAGIC)
        try:
            (hlen,) = struct.unpack_from("<I", data, off)
            header = json.loads(data[off + 4 : off + 4 + hlen])
            body = data[off + 4 + hlen :]
        except (struct.error, ValueError) as exc:
            raise NullTableError(f"corrupt null-table header: {exc}") from exc
        if header.get("format_version") != FORMAT_VERSION:
            raise NullTableError(f"unsupported null-table format {header.get('format_version')!r}")
        if len(body) != 8 * header["replications"]:
            raise NullTableError("null-table body length does not match header")
        return cls(np.frombuffer(body, dtype="<f8").copy(), header["grid_size"], header["replications"], header["seed"])

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        tmp.write_bytes(self.to_bytes())
        os.replace(tmp, path)
        return path

    @classmethod
    def load(cls, path: str | Path) -> "NullTable":
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise NullTableError(f"cannot read null table {path}: {exc}") from exc
        return cls.from_bytes(data)

    def quantiles_csv(self, qs=(0.90, 0.95, 0.99)) -> str:
        lines = ["quantile,value"]
        lines += [f"{q:g},{v!r}" for q, v in self.critical_values(qs).items()]
        return "\n".join(lines) + "\n"


def build_table(
    grid_size: int = DEFAULT_GRID,
    replications: int = DEFAULT_REPLICATIONS,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
) -> NullTable:
    """Simulate ``replications`` sup-draws and sort them.

    Draws are produced in fixed-size chunks, each with its own child seed of
    ``seed``, so the sorted table is identical for any ``threads``.
    """
    if replications < MIN_REPLICATIONS:
        raise ParameterError(f"replications must be >= {MIN_REPLICATIONS}, got {replications}")
    if grid_size < MIN_GRID:
        raise ParameterError(f"grid size must be >= {MIN_GRID}, got {grid_size}")
    n_chunks = -(-replications // _CHUNK)
    children = np.random.SeedSequence(int(seed)).spawn(n_chunks)

    def run(c: int) -> np.ndarray:
        count = min(_CHUNK, replications - c * _CHUNK)
        return _sups(grid_size, np.random.default_rng(children[c]), count)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(c) for c in range(n_chunks)]
    return NullTable(np.sort(np.concatenate(parts)), grid_size, replications, int(seed))


def p_value(table: NullTable, stat: float) -> float:
    """Add-one Monte Carlo p-value ``(1 + #{draws >= stat}) / (1 + R)``."""
    r = table.replications
    at_least = r - int(np.searchsorted(table.sorted_sups, stat, side="left"))
    return (1 + at_least) / (1 + r)


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "charncp"


def cache_path(grid_size: int, replications: int, seed: int, cache_dir: str | Path | None = None) -> Path:
    base = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    return base / f"nulltable_v{FORMAT_VERSION}_g{grid_size}_r{replications}_s{seed}.bin"


def load_or_build(
    grid_size: int = DEFAULT_GRID,
    replications: int = DEFAULT_REPLICATIONS,
    seed: int = DEFAULT_SEED,
    cache_dir: str | Path | None = None,
    threads: int = 1,
) -> NullTable:
    """Return the cached table for these parameters, building it if absent."""
    path = cache_path(grid_size, replications, seed, cache_dir)
    if path.exists():
        table = NullTable.load(path)
        if (table.grid_size, table.replications, table.seed) == (grid_size, replications, seed):
            return table
        log.warning("cache file %s does not match its key; rebuilding", path)
    log.warning(
        "building null table (grid=%d, replications=%d, seed=%d); this is done once and cached at %s",
        grid_size,
        replications,
        seed,
        path,
    )
    table = build_table(grid_size, replications, seed, threads)
    table.save(path)
    return table
