"""Batch harness: convergence/efficiency tables for a problem over a range of M.

For each M the spatial mesh is uniform with n = round(L*M/T) elements so that
h matches tau = T/M (for the built-in benchmark on (-1,1) with T = 1 this is
2M elements).  Each row records the reference error e_M at the final time,
the experimental order p_M between consecutive rows, the total bound, the
efficiency chi = bound/e_M, and the five weighted component columns.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from .bound import EstimatorBreakdown, assemble_total, eta_ell_split
from .elliptic import make_estimator
from .fem1d import SpatialMesh
from .problem import ProblemSpec, load_problem, validate
from .reconstruction import compute_psi_family
from .reference import ReferenceSolution, error_at_T, exact_reference, solve_reference
from .stepping import TimeGrid, run as run_scheme

CSV_HEADER = "M,e_M,p_M,eta_eE,chi_M"
BREAKDOWN_HEADER = "M,eta_init,eta_F,eta_ell_MK,eta_dpsi,eta_zh"


@dataclass
class RunConfig:
    problem: object = "paper-sect4"
    m_values: List[int] = field(default_factory=lambda: [16, 32, 64, 128, 256])
    k_policy: str = "sweep"           # "sweep" (minimizing K) or "last" (K = M-1)
    estimator: str = "residual-1d"
    estimator_constant: Optional[float] = None
    eta_f_mode: str = "simpson-paper"
    oracle_tol: float = 1e-9
    reference: str = "oracle"         # "oracle" or "exact"
    out_dir: Optional[str] = None
    n_per_element: int = 9
    initial_mode: str = "interpolate"
    workers: int = 1
    chi_reciprocal: bool = False
    figures: bool = True
    cache_dir: Optional[str] = None
    oracle_fine_factor: int = 16
    oracle_base_steps: int = 512

    def __post_init__(self):
        if any(m < 2 for m in self.m_values):
            raise ValueError("time-step counts must be at least 2")
        if self.k_policy not in ("last", "sweep"):
            raise ValueError(f"unknown K policy {self.k_policy!r}")
        if self.reference not in ("oracle", "exact"):
            raise ValueError(f"unknown reference mode {self.reference!r}")


@dataclass
class RunRecord:
    M: int
    n_elements: int
    e_M: float
    p_M: float
    eta_total: float
    chi: float
    K: int
    columns: dict
    wall_time: float
    metadata: dict = field(default_factory=dict)
    error: Optional[str] = None
    flags: List[str] = field(default_factory=list)


def mesh_elements_for(spec: ProblemSpec, m_steps: int) -> int:
    """Element count matching h = tau on this domain."""
    return max(2, round(spec.length * m_steps / spec.horizon))


def run_single(spec: ProblemSpec, m_steps: int, config: RunConfig,
               ref: ReferenceSolution) -> RunRecord:
    start = time.perf_counter()
    mesh = SpatialMesh.uniform(spec.x_left, spec.x_right, mesh_elements_for(spec, m_steps))
    grid = TimeGrid.uniform(spec.horizon, m_steps)
    estimator = make_estimator(config.estimator, config.estimator_constant)

    traj = run_scheme(spec, mesh, grid, initial_mode=config.initial_mode)
    psi = compute_psi_family(traj, spec)
    breakdown = assemble_total(spec, mesh, grid, traj, psi, estimator, K=m_steps - 1,
                               eta_f_mode=config.eta_f_mode,
                               n_per_element=config.n_per_element)
    total_at_last = breakdown.total  # K = M-1 value, kept for reliability reporting
    if config.k_policy == "sweep":
        breakdown = _resplit_at_best_k(breakdown, spec, grid)

    e_m = error_at_T(traj, ref)
    chi = breakdown.total / e_m if e_m > 0.0 else math.nan
    metadata = dict(breakdown.metadata)
    metadata["eta_eE_last"] = total_at_last
    metadata["k_policy"] = config.k_policy
    metadata["initial_mode"] = config.initial_mode
    metadata["reference_accuracy"] = ref.accuracy
    return RunRecord(M=m_steps, n_elements=mesh.n_elements, e_M=e_m, p_M=math.nan,
                     eta_total=breakdown.total, chi=chi, K=breakdown.K,
                     columns=breakdown.columns(), wall_time=time.perf_counter() - start,
                     metadata=metadata)


def _resplit_at_best_k(breakdown: EstimatorBreakdown, spec: ProblemSpec,
                       grid) -> EstimatorBreakdown:
    """Re-evaluate the elliptic split for every admissible K, keep the minimizer."""
    best_k, best_col = breakdown.K, breakdown.col_ell
    for k in range(grid.m_steps):
        col = eta_ell_split(k, breakdown.eta_ell, breakdown.eta_ell_delta,
                            breakdown.weights, spec.greens, grid)
        if col < best_col:
            best_k, best_col = k, col
    breakdown.K = best_k
    breakdown.col_ell = best_col
    breakdown.total = breakdown.recompute_total()
    return breakdown


def build_reference(spec: ProblemSpec, config: RunConfig) -> ReferenceSolution:
    if config.reference == "exact":
        return exact_reference(spec)
    production_elements = max(mesh_elements_for(spec, m) for m in config.m_values)
    return solve_reference(spec, tol=config.oracle_tol,
                           production_elements=production_elements,
                           fine_factor=config.oracle_fine_factor,
                           base_steps=config.oracle_base_steps,
                           cache_dir=config.cache_dir)


def run_matrix(config: RunConfig) -> List[RunRecord]:
    spec = load_problem(config.problem)
    report = validate(spec)
    if not report.ok:
        raise ValueError("invalid problem: " + "; ".join(report.violations))
    ref = build_reference(spec, config)

    m_values = sorted(config.m_values)

    def do_row(m):
        try:
            return run_single(spec, m, config, ref)
        except Exception as exc:  # row-level isolation: other rows proceed
            return RunRecord(M=m, n_elements=mesh_elements_for(spec, m), e_M=math.nan,
                             p_M=math.nan, eta_total=math.nan, chi=math.nan, K=-1,
                             columns={}, wall_time=0.0, error=str(exc))

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(do_row, m_values))
    else:
        records = [do_row(m) for m in m_values]

    records.sort(key=lambda r: r.M)
    for prev, cur in zip(records, records[1:]):
        if prev.error or cur.error or not (prev.e_M > 0.0 and cur.e_M > 0.0):
            continue
        cur.p_M = math.log(prev.e_M / cur.e_M) / math.log(cur.M / prev.M)
    return records


# -- table output ----------------------------------------------------------------

def _sci(x: float) -> str:
    return f"{x:.3e}"  # 4 significant digits


def _fmt_p(p: float) -> str:
    return "" if math.isnan(p) else f"{p:.2f}"


def emit_tables(records: List[RunRecord], out_dir, chi_reciprocal: bool = False) -> dict:
    """Write results.csv, breakdown.csv and an aligned results.txt; return paths."""
    if not records:
        raise ValueError("no records to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"results": out / "results.csv", "breakdown": out / "breakdown.csv",
             "text": out / "results.txt"}

    lines = [CSV_HEADER]
    for r in records:
        lines.append(f"{r.M},{_sci(r.e_M)},{_fmt_p(r.p_M)},{_sci(r.eta_total)},{_sci(r.chi)}")
    paths["results"].write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = [BREAKDOWN_HEADER]
    for r in records:
        cols = r.columns
        if cols:
            row = ",".join(_sci(cols[name]) for name in
                           ("eta_init", "eta_F", "eta_ell_MK", "eta_dpsi", "eta_zh"))
        else:
            row = ",".join(["nan"] * 5)
        lines.append(f"{r.M},{row}")
    paths["breakdown"].write_text("\n".join(lines) + "\n", encoding="utf-8")

    paths["text"].write_text(render_text_tables(records, chi_reciprocal), encoding="utf-8")
    return paths


def render_text_tables(records: List[RunRecord], chi_reciprocal: bool = False) -> str:
    def chi_str(r):
        if math.isnan(r.chi):
            return "nan"
        if chi_reciprocal:
            return f"1/{r.chi:.0f}" if r.chi >= 1.0 else f"{1.0 / r.chi:.0f}/1"
        return _sci(r.chi)

    out = []
    header = f"{'M':>6}  {'e_M':>10}  {'p_M':>5}  {'eta_eE':>10}  {'chi_M':>10}"
    out.append(header)
    out.append("-" * len(header))
    for r in records:
        if r.error:
            out.append(f"{r.M:>6}  row failed: {r.error}")
            continue
        out.append(f"{r.M:>6}  {_sci(r.e_M):>10}  {_fmt_p(r.p_M):>5}  "
                   f"{_sci(r.eta_total):>10}  {chi_str(r):>10}")
    out.append("")

    header = (f"{'M':>6}  {'eta_init':>10}  {'eta_F':>10}  {'eta_ell_MK':>10}  "
              f"{'eta_dpsi':>10}  {'eta_zh':>10}")
    out.append(header)
    out.append("-" * len(header))
    for r in records:
        if not r.columns:
            continue
        cols = r.columns
        out.append(f"{r.M:>6}  " + "  ".join(
            f"{_sci(cols[name]):>10}" for name in
            ("eta_init", "eta_F", "eta_ell_MK", "eta_dpsi", "eta_zh")))
    out.append("")

    meta = next((r.metadata for r in reversed(records) if r.metadata), {})
    if meta:
        out.append(f"# estimator = {meta.get('estimator')} "
                   f"(constants {meta.get('estimator_constants')})")
        out.append(f"# eta_F mode = {meta.get('eta_f_mode')}; alternative "
                   f"{meta.get('eta_f_alternative_mode')} would give "
                   f"{_sci(meta.get('eta_f_alternative_value', math.nan))} on the last row")
        out.append(f"# K policy = {meta.get('k_policy')}; initial mode = "
                   f"{meta.get('initial_mode')}")
        out.append(f"# quadrature consistency terms: "
                   f"{meta.get('quadrature_consistency_terms')}")
        out.append(f"# reference accuracy = {_sci(meta.get('reference_accuracy', math.nan))}")
        out.append("")
    return "\n".join(out)
