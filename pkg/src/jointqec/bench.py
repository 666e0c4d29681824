"""Joint cost of the SU(d) generators under J_z dephasing against reference lines."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .jnt import solve_jnt
from .models import su_d_jz
from .sep import bounds
from .sud import appendix_d_cost

log = logging.getLogger(__name__)

COLUMNS = (
    "d", "P", "jnt_cost", "sep_line", "noiseless_line", "noiseless_full_set",
    "qfi_trace_bound", "appendixD_cost", "ordering_ok", "status",
)


@dataclass
class BenchRow:
    d: int
    p: int
    jnt_cost: float
    sep_line: float
    noiseless_line: float
    noiseless_full_set: float
    qfi_trace_bound: float
    appendix_d_cost: float
    status: str = "ok"

    @property
    def ordering_ok(self) -> bool:
        """``qfi_trace_bound <= jnt_cost <= min(sep_line, appendixD_cost)`` (NaN entries skipped)."""
        if not math.isfinite(self.jnt_cost):
            return False
        tol = 1e-6 * max(1.0, self.jnt_cost)
        upper = min(v for v in (self.sep_line, self.appendix_d_cost) if math.isfinite(v))
        return self.qfi_trace_bound - tol <= self.jnt_cost <= upper + tol

    def values(self) -> list:
        return [self.d, self.p, self.jnt_cost, self.sep_line, self.noiseless_line, self.noiseless_full_set,
                self.qfi_trace_bound, self.appendix_d_cost, int(self.ordering_ok), self.status]


@dataclass
class BenchResult:
    rows: list[BenchRow]
    slope: float
    files: list[Path] = field(default_factory=list)

    @property
    def ordering_ok(self) -> bool:
        return all(r.ordering_ok for r in self.rows)


def loglog_slope(p, cost) -> float:
    """Least-squares slope of ``log cost`` against ``log P`` over the finite entries."""
    p = np.asarray(p, dtype=float)
    cost = np.asarray(cost, dtype=float)
    ok = np.isfinite(cost) & (cost > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(p[ok]), np.log(cost[ok]), 1)[0])


def bench_row(d: int, tol: float = 1e-7, time: float = 1.0) -> BenchRow:
    model = su_d_jz(d, time=time)
    p = model.n_params
    t2 = time ** 2
    status = "ok"
    try:
        jnt = solve_jnt(model, tol=tol).cost
    except Exception as exc:  # recorded per row, the run continues
        log.warning("d=%d: joint solve failed: %s", d, exc)
        jnt, status = float("nan"), f"jnt failed: {exc}".replace(",", ";")
    b = bounds(model, restarts=0)
    return BenchRow(
        d=d,
        p=p,
        jnt_cost=jnt,
        sep_line=p * p / (2 * t2),
        noiseless_line=p ** 1.5 / (4 * t2),
        noiseless_full_set=d * (d * d - 1) / (4 * t2),
        qfi_trace_bound=b.qfi_trace_bound,
        appendix_d_cost=appendix_d_cost(d) / t2,
        status=status,
    )


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.12g}"
    return str(v)


def write_csv(rows: list[BenchRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])


def write_dat(rows: list[BenchRow], path: Path) -> None:
    """Whitespace separated columns with a ``#`` header, readable by gnuplot."""
    lines = ["# " + " ".join(COLUMNS[:8])]
    for r in rows:
        lines.append(" ".join(_fmt(v) for v in r.values()[:8]))
    path.write_text("\n".join(lines) + "\n")


def run_benchmark(d_range, out_path=None, tol: float = 1e-7) -> BenchResult:
    """One row per ``d``; writes ``<out>.csv`` and ``<out>.dat`` when ``out_path`` is given."""
    rows = [bench_row(int(d), tol) for d in d_range]
    slope = loglog_slope([r.p for r in rows], [r.jnt_cost for r in rows])
    files = []
    if out_path is not None:
        out = Path(out_path)
        base = out.with_suffix("") if out.suffix in (".csv", ".dat") else out
        csv_path, dat_path = base.with_suffix(".csv"), base.with_suffix(".dat")
        write_csv(rows, csv_path)
        write_dat(rows, dat_path)
        files = [csv_path, dat_path]
    return BenchResult(rows, slope, files)
