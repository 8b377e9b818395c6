"""Monte Carlo experiments, the empirical pipeline and the density demo.

A cell is one (test, innovation law, coefficient, sample size) combination
replicated many times. Replication ``i`` of cell ``c`` draws its data from the
seed ``derive_seed(master, stable_hash(c), i)``, so a cell's output does not
depend on how replications are spread over workers or on which other cells
run alongside it.
"""
from __future__ import annotations

import csv
import io
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from . import constancy as cst
from . import quantreg as qr
from . import spectest as spt
from .distributions import InnovationSpec
from .rng import derive_seed, stable_hash
from .simulate import ArchSpec, MarModel, simulate_ar_arch, simulate_mar

__all__ = [
    "ExperimentConfig",
    "CellResult",
    "CellError",
    "DataError",
    "TABLE_IDS",
    "simulate_design",
    "run_replication",
    "run_cell",
    "table_cells",
    "run_table",
    "write_table",
    "render_table",
    "read_series",
    "transform_series",
    "analyze_series",
    "conditional_density_demo",
    "DensitySlice",
    "density_csv",
    "table_csv",
    "format_report",
    "config_from_mapping",
    "config_to_mapping",
]

TESTS = ("constancy", "ev", "eg")
LEVELS = (0.01, 0.05, 0.10)
FULL_REPS = 500
ARCH_COEF = 0.7


class CellError(RuntimeError):
    """Too many replications of a cell failed."""


class DataError(ValueError):
    """Input data cannot be used by the pipeline."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo cell.

    The data are a pure causal AR(1) (``causal=True``) or a pure non-causal
    AR(1) with coefficient ``coef`` driven by ``dist`` innovations. With
    ``arch=True`` the innovations carry the linear ARCH(1) scale and the
    fitted design adds ``|v_{t-1}|`` with the scale treated as known.
    """

    test: str
    dist: str = "gaussian"
    coef: float = 0.6
    causal: bool = True
    T: int = 200
    replications: int = 500
    level: float = 0.05
    interval: tuple[float, float] = cst.DEFAULT_INTERVAL
    k: float = 4.0
    centering: str = "none"
    B: int = 500
    arch: bool = False
    seed: int = 0
    params: tuple = ()
    cell_id: str = ""

    def __post_init__(self):
        if self.test not in TESTS:
            raise ValueError(f"test must be one of {TESTS}, got {self.test!r}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not any(math.isclose(self.level, a) for a in LEVELS):
            raise ValueError(f"level must be one of {LEVELS}")
        if self.T < 20:
            raise ValueError("T must be at least 20")
        lo, hi = self.interval
        if not 0.0 < lo < hi < 1.0:
            raise ValueError("interval must satisfy 0 < lo < hi < 1")
        object.__setattr__(self, "interval", (float(lo), float(hi)))
        object.__setattr__(self, "params", tuple(sorted(dict(self.params).items())))
        if not self.cell_id:
            kind = "c" if self.causal else "nc"
            object.__setattr__(self, "cell_id", f"{self.test}/{self.dist}/{kind}{self.coef:g}/T{self.T}")

    @property
    def innovation(self) -> InnovationSpec:
        return InnovationSpec(self.dist, dict(self.params), standardized=self.arch)

    @property
    def model(self) -> MarModel:
        if self.causal:
            return MarModel(phi=(self.coef,), innovation=self.innovation)
        return MarModel(psi=(self.coef,), innovation=self.innovation)


@dataclass(frozen=True)
class CellResult:
    cell_id: str
    test: str
    dist: str
    coef: float
    causal: bool
    T: int
    replications: int
    level: float
    rejection_rate: float
    mean_stat: float
    runtime_s: float
    failures: int = 0
    reference_rate: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.rejection_rate <= 1.0:
            raise ValueError("rejection_rate must lie in [0, 1]")


# ---------------------------------------------------------------- one replication


def simulate_design(config: ExperimentConfig, seed: int):
    """Response, design and (for ARCH cells) known scale for one draw."""
    if config.arch:
        d = simulate_ar_arch(config.model, ArchSpec(), config.T, seed)
        y, v, sigma = d["y"], d["v"], d["sigma"]
        X = np.column_stack([np.ones(y.size - 1), y[:-1], np.abs(v[:-1])])
        return y[1:], X, sigma[1:]
    y, X = qr.lag_design(simulate_mar(config.model, config.T, seed), 1)
    return y, X, None


def run_replication(config: ExperimentConfig, seed: int) -> tuple[float, bool]:
    """Statistic and decision of the configured test on one simulated sample."""
    y, X, scale = simulate_design(config, seed)
    if config.test == "constancy":
        res = cst.constancy_test_design(y, X, restrict=[1], interval=config.interval, scale=scale)
    elif config.test == "ev":
        res = spt.ev_test_design(y, X, k=config.k, centering=config.centering)
    else:
        res = spt.eg_test_design(y, X, B=config.B, seed=derive_seed(seed, 1))
    return float(res.statistic), bool(res.reject(_level_key(res.critical_values, config.level)))


def _level_key(cvs: dict, level: float) -> float:
    for a in cvs:
        if math.isclose(a, level):
            return a
    raise KeyError(level)


def _replicate(args):
    config, rep = args
    seed = derive_seed(config.seed, stable_hash(config.cell_id), rep)
    try:
        stat, rej = run_replication(config, seed)
        return rep, stat, rej, None
    except Exception as exc:  # reported per replication, judged per cell
        return rep, math.nan, False, f"{type(exc).__name__}: {exc}"


def _warm_critical_values(configs: Iterable[ExperimentConfig]) -> None:
    # fill the cache once in the parent so workers only read it; every cell tests one slope
    for interval in sorted({cfg.interval for cfg in configs if cfg.test == "constancy"}):
        cst.critical_values(1, interval)


def run_cell(config: ExperimentConfig, threads: int = 1, reference_rate: float | None = None) -> CellResult:
    """Replicate one cell and report its rejection frequency.

    A replication that raises is dropped from the average; the cell fails with
    :class:`CellError` when more than 1% of replications fail.
    """
    _warm_critical_values([config])
    start = time.perf_counter()
    jobs = [(config, r) for r in range(config.replications)]
    if threads > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        out = [_replicate(j) for j in jobs]
    errors = [(rep, msg) for rep, _, _, msg in out if msg is not None]
    if len(errors) > 0.01 * config.replications:
        rep, msg = errors[0]
        raise CellError(f"{config.cell_id}: {len(errors)} of {config.replications} replications failed; first at replication {rep}: {msg}")
    good = [(s, r) for _, s, r, msg in out if msg is None]
    stats_ = np.array([s for s, _ in good])
    rejections = sum(r for _, r in good)
    return CellResult(
        cell_id=config.cell_id,
        test=config.test,
        dist=config.dist,
        coef=config.coef,
        causal=config.causal,
        T=config.T,
        replications=len(good),
        level=config.level,
        rejection_rate=rejections / len(good),
        mean_stat=float(stats_.mean()),
        runtime_s=time.perf_counter() - start,
        failures=len(errors),
        reference_rate=reference_rate,
    )


# ---------------------------------------------------------------- table grids

_T1_DISTS = ("exponential", "gamma", "beta", "f", "chisq", "skewnormal", "trunccauchy", "lognormal", "t", "uniform", "laplace")
_SPEC_DISTS = ("gaussian", "exponential", "gamma", "beta", "f", "chisq", "lognormal", "t", "uniform", "laplace")

# rates in percent, ordered as (size, power) per sample size and coefficient
_T1 = {
    "exponential": ([4.2, 4.0, 4.8, 6.4, 6.8, 4.8], [33.8, 38.8, 40.2, 65.4, 69.6, 72.4]),
    "gamma": ([4.4, 3.0, 3.8, 5.0, 5.8, 4.4], [34.4, 37.0, 42.2, 64.4, 68.4, 70.2]),
    "beta": ([6.8, 6.6, 5.4, 6.8, 9.4, 6.4], [15.4, 27.2, 39.0, 24.8, 65.0, 77.2]),
    "f": ([5.0, 6.6, 3.4, 8.4, 6.0, 4.2], [80.0, 81.8, 70.0, 97.2, 98.2, 96.2]),
    "chisq": ([5.0, 4.4, 4.0, 4.0, 4.8, 5.2], [11.4, 11.4, 8.8, 27.4, 35.6, 17.4]),
    "skewnormal": ([5.2, 6.6, 7.4, 9.8, 7.4, 9.6], [8.0, 7.8, 10.6, 25.4, 20.0, 12.8]),
    "trunccauchy": ([26.6, 34.8, 43.0, 20.8, 19.2, 33.2], [70.0, 96.4, 92.4, 80.0, 99.8, 91.8]),
    "lognormal": ([21.2, 19.6, 23.6, 23.2, 26.4, 26.6], [98.2, 99.0, 99.6, 100.0, 100.0, 100.0]),
    "t": ([5.4, 4.0, 5.0, 4.0, 6.8, 4.8], [9.8, 13.0, 15.8, 11.6, 20.0, 25.8]),
    "uniform": ([6.2, 7.6, 6.0, 6.0, 6.8, 5.8], [13.4, 8.0, 13.2, 40.4, 7.8, 48.8]),
    "laplace": ([3.4, 4.0, 4.6, 2.6, 3.8, 4.6], [8.4, 5.6, 17.0, 10.8, 8.6, 29.0]),
}
_T2_COEFS = (0.3, 0.6, 0.9, -0.4, -0.6, -0.8)
_T2 = {
    (0.05, 0.95): {
        100: ([2.4, 2.2, 2.6, 2.8, 2.0, 2.4], [22.4, 24.6, 22.0, 4.8, 32.8, 26.6]),
        200: ([3.6, 3.6, 4.0, 5.0, 2.8, 4.4], [40.8, 38.6, 41.8, 8.4, 48.0, 44.0]),
        500: ([3.4, 6.2, 4.8, 6.6, 4.8, 3.4], [67.2, 67.0, 72.4, 14.2, 66.0, 72.2]),
    },
    (0.10, 0.90): {
        100: ([3.4, 3.2, 3.2, 3.8, 2.4, 3.4], [28.0, 25.4, 22.8, 6.0, 32.8, 28.2]),
        200: ([3.2, 2.8, 5.0, 3.0, 4.2, 4.0], [37.4, 43.4, 43.2, 5.8, 49.4, 48.8]),
        500: ([4.8, 5.4, 6.0, 4.6, 3.8, 5.0], [71.2, 67.8, 69.2, 14.6, 65.4, 72.8]),
    },
    (0.15, 0.85): {
        100: ([4.4, 2.6, 3.6, 5.0, 3.0, 3.0], [27.8, 28.2, 21.8, 8.8, 37.6, 30.2]),
        200: ([5.6, 3.8, 3.6, 6.6, 3.4, 4.4], [39.0, 40.0, 42.4, 9.6, 51.6, 46.6]),
        500: ([5.4, 4.4, 5.0, 4.2, 4.8, 5.4], [64.8, 65.8, 69.0, 21.8, 68.0, 71.6]),
    },
}
# EV at T = 100, 200, 500
_T3 = {
    "gaussian": ([2.2, 3.4, 3.4], [0.4, 0.6, 2.6]),
    "exponential": ([4.4, 1.8, 2.0], [29.2, 43.2, 97.2]),
    "gamma": ([1.8, 3.0, 2.8], [10.6, 41.6, 97.6]),
    "beta": ([3.2, 3.2, 3.4], [26.4, 67.8, 99.0]),
    "f": ([3.6, 5.8, 3.4], [24.0, 67.6, 99.0]),
    "chisq": ([4.8, 4.4, 3.6], [13.4, 22.2, 68.4]),
    "lognormal": ([5.4, 4.6, 6.8], [54.0, 92.4, 100.0]),
    "t": ([6.2, 7.0, 6.4], [13.8, 42.4, 93.4]),
    "uniform": ([5.0, 6.0, 3.4], [44.0, 86.8, 100.0]),
    "laplace": ([4.4, 4.8, 4.4], [14.0, 47.2, 98.2]),
}
# EG at T = 50, 100, 200
_T4 = {
    "gaussian": ([6.0, 5.0, 4.0], [4.8, 5.6, 5.8]),
    "exponential": ([5.2, 4.6, 6.0], [24.8, 49.2, 76.4]),
    "gamma": ([5.0, 5.6, 5.0], [23.8, 45.8, 75.8]),
    "beta": ([6.4, 5.8, 6.0], [24.2, 42.2, 75.8]),
    "f": ([4.4, 5.0, 5.4], [22.6, 37.4, 67.0]),
    "chisq": ([6.6, 5.4, 4.6], [12.8, 22.6, 41.6]),
    "lognormal": ([5.6, 5.4, 4.0], [32.0, 60.6, 85.8]),
    "t": ([4.4, 6.6, 7.0], [6.8, 14.8, 36.2]),
    "uniform": ([4.8, 6.6, 6.6], [10.2, 25.4, 64.8]),
    "laplace": ([5.6, 5.0, 6.8], [8.2, 14.4, 41.6]),
}
# constancy / EV / EG at T = 100, 200
_T5 = {
    "gaussian": {"constancy": ([2.8, 5.4], [4.2, 3.4]), "ev": ([2.2, 3.4], [0.4, 0.6]), "eg": ([5.0, 4.0], [5.6, 5.8])},
    "exponential": {"constancy": ([3.2, 4.0], [25.4, 38.8]), "ev": ([4.4, 1.8], [29.2, 43.2]), "eg": ([4.6, 6.0], [49.2, 76.4])},
    "gamma": {"constancy": ([3.8, 3.0], [26.6, 37.0]), "ev": ([1.8, 3.0], [10.6, 41.6]), "eg": ([5.6, 5.0], [45.8, 75.8])},
    "beta": {"constancy": ([4.2, 6.6], [18.6, 27.2]), "ev": ([3.2, 3.2], [26.4, 67.8]), "eg": ([5.8, 6.0], [42.2, 75.8])},
    "f": {"constancy": ([6.8, 6.6], [62.4, 81.8]), "ev": ([3.6, 5.8], [24.0, 67.6]), "eg": ([5.0, 5.4], [34.7, 67.0])},
    "chisq": {"constancy": ([5.8, 4.4], [9.6, 11.4]), "ev": ([4.8, 4.4], [13.4, 22.2]), "eg": ([5.4, 4.6], [22.6, 41.6])},
    "lognormal": {"constancy": ([20.2, 19.6], [78.8, 99.6]), "ev": ([5.4, 4.6], [54.0, 92.4]), "eg": ([5.4, 4.0], [60.6, 85.8])},
    "t": {"constancy": ([3.4, 4.0], [10.2, 13.0]), "ev": ([6.2, 7.0], [13.8, 42.4]), "eg": ([6.6, 7.0], [14.8, 36.2])},
    "uniform": {"constancy": ([6.8, 7.6], [7.4, 8.0]), "ev": ([5.0, 6.0], [44.0, 86.8]), "eg": ([6.6, 6.6], [25.4, 64.8])},
    "laplace": {"constancy": ([5.8, 4.0], [5.2, 5.6]), "ev": ([4.4, 4.8], [14.0, 47.2]), "eg": ([5.0, 6.8], [14.4, 41.6])},
}
# AR-ARCH at T = 100, 200, 500, 1000
_T7 = {
    "exponential": {"constancy": ([3.6, 4.4, 6.0, 7.0], [39.0, 54.6, 75.8, 90.8]), "ev": ([5.2, 4.4, 4.6, 5.0], [16.8, 34.8, 82.8, 97.8])},
    "t": {"constancy": ([5.2, 6.6, 6.0, 7.8], [24.6, 39.4, 63.6, 78.0]), "ev": ([8.2, 7.2, 8.2, 7.2], [51.0, 83.2, 99.8, 100.0])},
    "laplace": {"constancy": ([4.4, 3.8, 7.6, 4.4], [14.4, 25.0, 38.8, 55.0]), "ev": ([7.0, 6.4, 8.6, 7.2], [45.4, 82.6, 99.2, 10.0])},
}

TABLE_IDS = ("T1", "T2", "T3", "T4", "T5", "T7")


def _pair(base: dict, size: float, power: float, prefix: str):
    for causal, rate in ((True, size), (False, power)):
        kind = "size" if causal else "power"
        cfg = dict(base, causal=causal)
        cfg["cell_id"] = f"{prefix}/{kind}/{cfg['coef']:g}/T{cfg['T']}"
        yield cfg, rate / 100.0


def table_cells(table_id: str, scale: float = 1.0, seed: int = 0) -> list[tuple[ExperimentConfig, float]]:
    """Cells of a named table with their reference rejection rates."""
    if not 0.0 < scale <= 1.0:
        raise ValueError("scale must lie in (0, 1]")
    reps = max(1, int(round(FULL_REPS * scale)))
    common = {"replications": reps, "seed": seed}
    raw = []
    if table_id == "T1":
        for d in _T1_DISTS:
            sizes, powers = _T1[d]
            for i, (T, coef) in enumerate((T, c) for T in (200, 500) for c in (0.3, 0.6, 0.9)):
                base = dict(common, test="constancy", dist=d, coef=coef, T=T)
                raw += _pair(base, sizes[i], powers[i], f"T1/constancy/{d}")
    elif table_id == "T2":
        for iv, rows in _T2.items():
            for T, (sizes, powers) in rows.items():
                for coef, s, p in zip(_T2_COEFS, sizes, powers):
                    base = dict(common, test="constancy", dist="exponential", coef=coef, T=T, interval=iv)
                    raw += _pair(base, s, p, f"T2/[{iv[0]:.2f},{iv[1]:.2f}]")
    elif table_id in ("T3", "T4"):
        test, Ts, data = ("ev", (100, 200, 500), _T3) if table_id == "T3" else ("eg", (50, 100, 200), _T4)
        for d in _SPEC_DISTS:
            for T, s, p in zip(Ts, *data[d]):
                base = dict(common, test=test, dist=d, coef=0.6, T=T)
                raw += _pair(base, s, p, f"{table_id}/{test}/{d}")
    elif table_id == "T5":
        for d in _SPEC_DISTS:
            for test in TESTS:
                for T, s, p in zip((100, 200), *_T5[d][test]):
                    base = dict(common, test=test, dist=d, coef=0.6, T=T)
                    raw += _pair(base, s, p, f"T5/{test}/{d}")
    elif table_id == "T7":
        for d in _T7:
            for test in ("constancy", "ev"):
                for T, s, p in zip((100, 200, 500, 1000), *_T7[d][test]):
                    base = dict(common, test=test, dist=d, coef=ARCH_COEF, T=T, arch=True)
                    if test == "ev":
                        base.update(k=7.0, centering="linear")
                    raw += _pair(base, s, p, f"T7/{test}/{d}")
    else:
        raise ValueError(f"unknown table id {table_id!r}; choose from {TABLE_IDS}")
    return [(ExperimentConfig(**cfg), rate) for cfg, rate in raw]


def run_table(table_id: str, scale: float = 1.0, seed: int = 0, threads: int = 1, progress=None) -> list[CellResult]:
    cells = table_cells(table_id, scale, seed)
    _warm_critical_values(cfg for cfg, _ in cells)
    out = []
    for cfg, ref in cells:
        res = run_cell(cfg, threads=threads, reference_rate=ref)
        out.append(res)
        if progress is not None:
            progress(res)
    return out


CSV_FIELDS = ("cell_id", "test", "dist", "coef", "T", "reps", "level", "rejection_rate", "mean_stat", "reference_rate")


def _csv_row(r: CellResult) -> list[str]:
    return [
        r.cell_id,
        r.test,
        r.dist,
        f"{r.coef:g}" if r.causal else f"nc{r.coef:g}",
        str(r.T),
        str(r.replications),
        f"{r.level:g}",
        f"{r.rejection_rate:.4f}",
        f"{r.mean_stat:.6g}",
        "" if r.reference_rate is None else f"{r.reference_rate:.4f}",
    ]


def table_csv(results: Sequence[CellResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in results:
        w.writerow(_csv_row(r))
    return buf.getvalue()


def render_table(results: Sequence[CellResult]) -> str:
    """Aligned text with simulated and reference rates side by side."""
    head = ("cell", "reps", "ours %", "ref %", "diff")
    rows = []
    for r in results:
        ours = 100.0 * r.rejection_rate
        ref = "" if r.reference_rate is None else f"{100.0 * r.reference_rate:.1f}"
        diff = "" if r.reference_rate is None else f"{ours - 100.0 * r.reference_rate:+.1f}"
        rows.append((r.cell_id, str(r.replications), f"{ours:.1f}", ref, diff))
    widths = [max(len(x) for x in col) for col in zip(head, *rows)]
    fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))  # noqa: E731
    lines = [fmt(head), "  ".join("-" * w for w in widths)] + [fmt(row) for row in rows]
    return "\n".join(lines) + "\n"


def write_table(results: Sequence[CellResult], out_dir, table_id: str) -> dict[str, Path]:
    """Write ``<id>.csv``, ``<id>.txt`` and the runtime sidecar ``<id>.timing.csv``.

    Wall-clock times live in the sidecar so that the main CSV is reproducible
    byte for byte.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / f"{table_id}.csv", "txt": out / f"{table_id}.txt", "timing": out / f"{table_id}.timing.csv"}
    paths["csv"].write_text(table_csv(results), encoding="utf-8")
    paths["txt"].write_text(render_table(results), encoding="utf-8")
    timing = "cell_id,runtime_s\n" + "".join(f"{r.cell_id},{r.runtime_s:.3f}\n" for r in results)
    paths["timing"].write_text(timing, encoding="utf-8")
    return paths


# ---------------------------------------------------------------- empirical pipeline


def read_series(path) -> np.ndarray:
    """Single numeric column from a CSV file; a non-numeric first row is a header."""
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path} holds no data")
    values = []
    for i, row in enumerate(rows):
        cell = row[-1].strip()
        try:
            values.append(float(cell))
        except ValueError:
            if i == 0:
                continue
            raise DataError(f"{path}: non-numeric value {cell!r} on line {i + 1}") from None
    if not values:
        raise DataError(f"{path} holds no numeric data")
    x = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DataError(f"{path}: series contains non-finite values")
    return x


def transform_series(x, transform: str = "none") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if transform == "none":
        return x
    if transform == "diff":
        return np.diff(x)
    if transform == "detrend":
        t = np.arange(x.size, dtype=float)
        A = np.column_stack([np.ones_like(t), t])
        coef, *_ = np.linalg.lstsq(A, x, rcond=None)
        return x - A @ coef
    raise ValueError(f"unknown transform {transform!r}; choose none, diff or detrend")


def _stars(decision: dict) -> str:
    if decision.get(0.05, False):
        return "**"
    if decision.get(0.10, False):
        return "*"
    return ""


def analyze_series(
    series,
    transform: str = "none",
    max_lag: int = 10,
    tests: Iterable[str] = TESTS,
    level: float = 0.05,
    seed: int = 0,
    order_rule: str = "cutoff",
    B: int = 500,
) -> dict:
    """Order selection and the three tests on an observed series.

    ``series`` is an array or a CSV path. The report carries, per test, the
    statistic, the critical value at ``level`` and the decision; constancy is
    run on both the ``[0.05, 0.95]`` and ``[0.10, 0.90]`` intervals.
    """
    if isinstance(series, (str, os.PathLike)):
        series = read_series(series)
    x = transform_series(series, transform)
    if x.size < 100:
        raise DataError(f"series has {x.size} observations after the transform; at least 100 are needed")
    if np.ptp(x) == 0:
        raise DataError("series is constant")
    tests = [t for t in TESTS if t in set(tests)]
    p = qr.select_order(x, max_lag, rule=order_rule)
    report = {"n": int(x.size), "transform": transform, "p": p, "level": level, "seed": seed, "tests": []}
    if p == 0:
        report["message"] = "no dynamics detected"
        return report
    for test in tests:
        if test == "constancy":
            for iv in ((0.05, 0.95), (0.10, 0.90)):
                res = cst.constancy_test(x, p, interval=iv)
                report["tests"].append(_entry("constancy", p, res, level, {"interval": list(iv)}, seed))
        elif test == "ev":
            res = spt.ev_test(x, p)
            report["tests"].append(_entry("ev", p, res, level, res.tuning, seed))
        else:
            res = spt.eg_test(x, p, B=B, seed=seed)
            report["tests"].append(_entry("eg", p, res, level, res.tuning, seed))
    return report


def _entry(method, p, res, level, tuning, seed) -> dict:
    key = _level_key(res.critical_values, level)
    return {
        "method": method,
        "p": p,
        "statistic": float(res.statistic),
        "critical_value": float(res.critical_values[key]),
        "level": level,
        "reject": bool(res.reject(key)),
        "stars": _stars(res.decision),
        "tuning": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in dict(tuning).items()},
        "seed": seed,
    }


def format_report(report: dict) -> str:
    """One results block: statistics with stars over critical values."""
    lines = [f"n = {report['n']}, transform = {report['transform']}, order p = {report['p']}"]
    if report["p"] == 0:
        lines.append(report["message"])
        return "\n".join(lines) + "\n"
    labels, stats_, cvs = [], [], []
    for e in report["tests"]:
        label = e["method"]
        if e["method"] == "constancy":
            lo, hi = e["tuning"]["interval"]
            label = f"constancy [{lo:.2f},{hi:.2f}]"
        labels.append(label)
        stats_.append(f"{e['statistic']:.3f}{e['stars']}")
        cvs.append(f"({e['critical_value']:.3f})")
    widths = [max(len(a), len(b), len(c)) for a, b, c in zip(labels, stats_, cvs)]
    for row, name in ((labels, ""), (stats_, "statistic"), (cvs, "critical value")):
        lines.append(name.ljust(15) + "  ".join(c.rjust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- density slices


@dataclass(frozen=True)
class DensitySlice:
    percentile: float
    x: float
    window: float
    n_points: int
    bandwidth: float
    grid: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)


def conditional_density_demo(
    coef: float = 0.6,
    causal: bool = True,
    innovation: InnovationSpec | str = "exponential",
    T: int = 500,
    percentiles: Sequence[float] = (10, 30, 50, 70, 90),
    seed: int = 0,
    neighbors: float = 0.1,
    min_points: int = 30,
    grid_size: int = 200,
    series=None,
) -> list[DensitySlice]:
    """Kernel estimates of the density of ``Y_t`` given ``Y_{t-1}`` near chosen percentiles.

    Each slice keeps the ``neighbors * T`` observations whose lag is closest
    to the conditioning value; a window that would hold fewer than
    ``min_points`` is widened to that many, with a warning. Slices are
    Gaussian KDEs with Silverman's bandwidth on a grid shared by all slices.
    """
    if T < 500:
        raise ValueError("T must be at least 500")
    if not 0.0 < neighbors <= 1.0:
        raise ValueError("neighbors must be a fraction in (0, 1]")
    if series is None:
        spec = InnovationSpec(innovation) if isinstance(innovation, str) else innovation
        model = MarModel(phi=(coef,), innovation=spec) if causal else MarModel(psi=(coef,), innovation=spec)
        series = simulate_mar(model, T, seed)
    series = np.asarray(series, dtype=float)
    lag, cur = series[:-1], series[1:]
    k = int(np.ceil(neighbors * lag.size))
    if k < min_points:
        warnings.warn(f"window of {k} points widened to {min_points}", RuntimeWarning, stacklevel=2)
        k = min_points
    if k > lag.size:
        raise DataError(f"series too short for windows of {k} points")
    pad = 0.1 * np.ptp(cur)
    grid = np.linspace(cur.min() - pad, cur.max() + pad, grid_size)
    out = []
    for q in percentiles:
        x = float(np.percentile(lag, q))
        dist_ = np.abs(lag - x)
        idx = np.argsort(dist_, kind="stable")[:k]
        kde = stats.gaussian_kde(cur[idx], bw_method="silverman")
        h = float(np.sqrt(kde.covariance[0, 0]))
        out.append(DensitySlice(float(q), x, float(dist_[idx].max()), k, h, grid, kde(grid)))
    return out


def density_csv(slices: Sequence[DensitySlice]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("percentile", "x", "y", "density"))
    for s in slices:
        for g, d in zip(s.grid, s.density):
            w.writerow((f"{s.percentile:g}", f"{s.x:.6g}", f"{g:.6g}", f"{d:.6g}"))
    return buf.getvalue()


def config_from_mapping(data: dict) -> ExperimentConfig:
    """Build a cell from a flat mapping such as a parsed TOML table."""
    fields_ = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(data) - fields_ - {"distribution"}
    if unknown:
        raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
    data = dict(data)
    if "distribution" in data:
        data["dist"] = data.pop("distribution")
    if "interval" in data:
        data["interval"] = tuple(data["interval"])
    if "params" in data:
        data["params"] = tuple(dict(data["params"]).items())
    return ExperimentConfig(**data)


def config_to_mapping(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["interval"] = list(d["interval"])
    d["params"] = dict(d["params"])
    return d

