"""Scenario orchestration: configuration, the check registry, parallel
suite execution, and table emission.

A scenario is one (q, lam) cell of the parameter grid at a fixed cutoff.
Scenarios are distributed whole to worker processes, so per-check
determinism is independent of the parallelism degree; the orchestrator
owns all report collection.
"""

from __future__ import annotations

import csv
import io
import json
import multiprocessing
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import checks
from .fock import FockSpace
from .oneparticle import make_space
from .report import ConvergenceReport, skipped_report

DEFAULT_Q = (0.0, 0.3, -0.3, 0.7, -0.7)
DEFAULT_LAM = (0.04, 0.25)

DEFAULT_CHECKS = (
    "cstar_power",
    "rstar_c_expansion",
    "remainder_X",
    "remainder_Y",
    "cesaro_cc",
    "limit_T",
    "series_S",
    "cesaro_S_n",
    "cesaro_R_n",
    "proof_T_n_bound",
    "fullness_chain",
    "creation_power_norms",
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated suite configuration; one instance drives the whole grid."""

    q_values: Tuple[float, ...] = DEFAULT_Q
    lam_values: Tuple[float, ...] = DEFAULT_LAM
    cutoff: int = 10
    identity_degree: int = 4
    remainder_degree_sum: int = 8
    cc_n_max: int = 5
    s_n_max: int = 2
    r_n_max: int = 5
    r_dec_max: int = 3
    t_n_max: int = 2
    trials: int = 20
    identity_tol: float = 1e-9
    bound_tol: float = 1e-9
    tail_tol: float = 1e-6
    seed: int = 20240901
    out_dir: Optional[str] = None
    checks: Tuple[str, ...] = DEFAULT_CHECKS
    dense_max: int = 3000
    workers: Optional[int] = None

    def __post_init__(self):
        for q in self.q_values:
            if not (-1.0 < q < 1.0):
                raise ValueError(f"q={q} outside (-1, 1)")
        for lam in self.lam_values:
            if not (0.0 < lam < 1.0):
                raise ValueError(f"lambda={lam} outside (0, 1)")
        if self.cutoff < 4:
            raise ValueError("cutoff must be at least 4")
        unknown = set(self.checks) - set(DEFAULT_CHECKS)
        if unknown:
            raise ValueError(f"unknown checks: {sorted(unknown)}")
        if self.trials < 1 or self.identity_degree < 1:
            raise ValueError("degrees and trial counts must be positive")

    def grid(self) -> List[Tuple[float, float]]:
        return [(q, lam) for q in self.q_values for lam in self.lam_values]


# ---------------------------------------------------------------------------
# config file parsing

_LIST_KEYS = {"q": "q_values", "lambda": "lam_values"}
_INT_KEYS = {
    "cutoff",
    "identity_degree",
    "remainder_degree_sum",
    "cc_n_max",
    "s_n_max",
    "r_n_max",
    "r_dec_max",
    "t_n_max",
    "trials",
    "seed",
    "dense_max",
    "workers",
}
_FLOAT_KEYS = {"identity_tol", "bound_tol", "tail_tol"}


def parse_config_text(text: str) -> Dict[str, object]:
    """Flat key = value lines; '#' starts a comment; lists are
    comma-separated."""
    out: Dict[str, object] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in _LIST_KEYS:
            out[_LIST_KEYS[key]] = tuple(float(v) for v in val.split(","))
        elif key in _INT_KEYS:
            out[key] = int(val)
        elif key in _FLOAT_KEYS:
            out[key] = float(val)
        elif key == "checks":
            out["checks"] = tuple(v.strip() for v in val.split(","))
        elif key == "out":
            out["out_dir"] = val
        else:
            raise ValueError(f"unknown config key: {key!r}")
    return out


def load_config(
    path: Optional[str] = None, overrides: Optional[Dict[str, object]] = None
) -> ScenarioConfig:
    """Config file plus command-line overrides; the output directory may
    also come from the environment."""
    kwargs: Dict[str, object] = {}
    if path is not None:
        kwargs.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    if overrides:
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
    if "out_dir" not in kwargs and os.environ.get("QFOCK_OUT"):
        kwargs["out_dir"] = os.environ["QFOCK_OUT"]
    return ScenarioConfig(**kwargs)


# ---------------------------------------------------------------------------
# running one scenario


@dataclass
class ScenarioResult:
    scenario_id: str
    q: float
    lam: float
    cutoff: int
    reports: List[ConvergenceReport]
    wall_time: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def failing_checks(self) -> List[str]:
        return [r.name for r in self.reports if not r.passed]

    def skipped_checks(self) -> List[str]:
        return [r.name for r in self.reports if r.skipped]


def scenario_id(index: int, q: float, lam: float) -> str:
    return f"s{index:02d}_q{q:+g}_l{lam:g}"


def _identity_pairs(deg: int) -> List[Tuple[int, int]]:
    return [(m, n) for n in range(1, deg + 1) for m in range(1, n + 1)]


def _remainder_triples(total: int, overshoot: bool) -> List[Tuple[int, int, int]]:
    out = []
    for m in range(0, total + 1):
        for n in range(1, total + 1):
            for l in range(0, total + 1):
                if m + n + l > total:
                    continue
                if overshoot and not m > n:
                    continue
                if not overshoot and not m <= n:
                    continue
                out.append((m, n, l))
    return out


def run_scenario(
    index: int, q: float, lam: float, config: ScenarioConfig
) -> ScenarioResult:
    """Execute the selected checks on one grid cell.

    Pure given (index, q, lam, config); the per-scenario seed mixes the
    grid index into the configured seed so trials are independent across
    cells yet reproducible.
    """
    t0 = time.time()
    N = config.cutoff
    seed = config.seed + index
    fock = FockSpace(q, make_space((lam,), 0), N)
    e, ebar = checks.block_letters(fock)
    lops = checks.LetterOps(fock)
    collected: Dict[str, List[ConvergenceReport]] = {c: [] for c in config.checks}
    selected = config.checks

    def want(name: str) -> bool:
        return name in selected

    if want("cstar_power"):
        for m, n in _identity_pairs(config.identity_degree):
            if n + 1 <= N:
                collected["cstar_power"].append(
                    checks.check_cstar_power(fock, e, m, n, ops=lops)
                )
    if want("rstar_c_expansion"):
        for m in range(1, config.identity_degree + 1):
            for n in range(1, config.identity_degree + 1):
                if n + 1 <= N:
                    collected["rstar_c_expansion"].append(
                        checks.check_rstar_c_expansion(fock, e, e, m, n, ops=lops)
                    )
    if want("remainder_X"):
        for m, n, l in _remainder_triples(config.remainder_degree_sum, False):
            if n + l <= N:
                collected["remainder_X"].append(
                    checks.check_remainder_X(fock, ebar, e, m, n, l, ops=lops)
                )
    if want("remainder_Y"):
        for m, n, l in _remainder_triples(config.remainder_degree_sum, True):
            if n + l <= N:
                collected["remainder_Y"].append(
                    checks.check_remainder_Y(fock, ebar, e, m, n, l, ops=lops)
                )
    if want("cesaro_cc"):
        collected["cesaro_cc"].append(checks.cesaro_cc(fock, ebar, e, config.cc_n_max))

    # one shared build of T and S feeds every downstream operator check
    needs_limits = any(
        want(k) for k in ("limit_T", "series_S", "cesaro_S_n", "fullness_chain")
    )
    lims = None
    if needs_limits:
        if (N - 1) // 2 >= 2:
            lims = checks.build_S_series(fock, lam)
        else:
            reason = "skipped: cutoff too small"
            for name in ("limit_T", "series_S", "cesaro_S_n", "fullness_chain"):
                if want(name):
                    collected[name].append(
                        skipped_report(name, q=q, lam=lam, cutoff=N, reason=reason)
                    )
    if lims is not None:
        if want("limit_T"):
            collected["limit_T"].append(lims.report_t)
        if want("series_S"):
            collected["series_S"].append(lims.report)
        if want("cesaro_S_n"):
            collected["cesaro_S_n"].append(
                checks.cesaro_S_n(fock, lam, config.s_n_max, s_ref=lims)
            )
    if want("cesaro_R_n"):
        collected["cesaro_R_n"].append(
            checks.cesaro_R_n(
                fock, ebar, e, config.r_n_max, dec_max=config.r_dec_max, ops=lops
            )
        )
    tn_rep = None
    if want("proof_T_n_bound"):
        tn_rep = checks.proof_T_n_bound(fock, lam, config.t_n_max, ops=lops)
        collected["proof_T_n_bound"].append(tn_rep)
    if want("fullness_chain") and lims is not None:
        collected["fullness_chain"].append(
            checks.fullness_chain(
                fock,
                lam,
                config.t_n_max,
                config.trials,
                seed=seed,
                lims=lims,
                tn_report=tn_rep,
                ops=lops,
            )
        )
    if want("creation_power_norms"):
        collected["creation_power_norms"].append(checks.creation_power_norms(fock))
    reports = [
        r for name in DEFAULT_CHECKS if name in collected for r in collected[name]
    ]
    return ScenarioResult(
        scenario_id=scenario_id(index, q, lam),
        q=q,
        lam=lam,
        cutoff=N,
        reports=reports,
        wall_time=time.time() - t0,
    )


def _scenario_worker(args) -> ScenarioResult:
    return run_scenario(*args)


# ---------------------------------------------------------------------------
# the suite


@dataclass
class SuiteResult:
    scenarios: List[ScenarioResult]
    config: ScenarioConfig
    total_time: float = 0.0

    @property
    def aggregate_pass(self) -> bool:
        """Fails iff any report verdict fails; skips do not count."""
        return all(s.passed for s in self.scenarios)

    def failing_pairs(self) -> List[Tuple[str, str]]:
        return [
            (s.scenario_id, name)
            for s in self.scenarios
            for name in s.failing_checks()
        ]

    def skipped_pairs(self) -> List[Tuple[str, str]]:
        return [
            (s.scenario_id, name)
            for s in self.scenarios
            for name in s.skipped_checks()
        ]

    def to_dict(self) -> dict:
        # deliberately excludes wall-clock data so serialized results are
        # bitwise reproducible run to run
        return {
            "aggregate_pass": self.aggregate_pass,
            "scenarios": [
                {
                    "scenario_id": s.scenario_id,
                    "q": s.q,
                    "lambda": s.lam,
                    "cutoff": s.cutoff,
                    "passed": s.passed,
                    "reports": [r.to_dict() for r in s.reports],
                }
                for s in self.scenarios
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def run_suite(config: ScenarioConfig) -> SuiteResult:
    """Execute all selected checks over the (q, lambda) grid.

    Deterministic given the config seed; scenarios are distributed whole
    across worker processes, falling back to in-process execution for a
    single worker.
    """
    t0 = time.time()
    tasks = [
        (idx, q, lam, config) for idx, (q, lam) in enumerate(config.grid())
    ]
    workers = config.workers
    if workers is None:
        workers = min(os.cpu_count() or 1, len(tasks))
    if workers <= 1 or len(tasks) <= 1:
        scenarios = [_scenario_worker(t) for t in tasks]
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            scenarios = pool.map(_scenario_worker, tasks)
    return SuiteResult(
        scenarios=scenarios, config=config, total_time=time.time() - t0
    )


# ---------------------------------------------------------------------------
# table emission

CSV_HEADER = ("scenario_id", "q", "lambda", "N", "check", "n", "value", "bound", "verdict")


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def result_csv(result: SuiteResult) -> str:
    """One row per measured index; UTF-8 text with LF endings and
    17-significant-digit floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in result.scenarios:
        for r in s.reports:
            if r.skipped:
                writer.writerow(
                    [s.scenario_id, _fmt(s.q), _fmt(s.lam), s.cutoff, r.name,
                     "", "", "", "skip"]
                )
                continue
            for n, value, bound in zip(r.indices, r.values, r.bounds):
                verdict = "pass" if r.passed else "fail"
                writer.writerow(
                    [s.scenario_id, _fmt(s.q), _fmt(s.lam), s.cutoff, r.name,
                     n, _fmt(value), _fmt(bound), verdict]
                )
    return buf.getvalue()


def report_rows_from_json(doc: dict) -> str:
    """Re-render a serialized suite document to the CSV schema."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in doc.get("scenarios", []):
        for r in s.get("reports", []):
            if r.get("skipped"):
                writer.writerow(
                    [s["scenario_id"], _fmt(s["q"]), _fmt(s["lambda"]),
                     s["cutoff"], r["name"], "", "", "", "skip"]
                )
                continue
            verdict = "pass" if r.get("passed") else "fail"
            for n, value, bound in zip(r["indices"], r["values"], r["bounds"]):
                writer.writerow(
                    [s["scenario_id"], _fmt(s["q"]), _fmt(s["lambda"]),
                     s["cutoff"], r["name"], n, _fmt(value), _fmt(bound), verdict]
                )
    return buf.getvalue()


def emit_tables(result: SuiteResult, fmt: str, out_dir: str) -> List[str]:
    """Write the suite tables; returns the created file paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            path = out / "reports.csv"
            path.write_text(result_csv(result), encoding="utf-8", newline="")
        elif fmt == "json":
            path = out / "reports.json"
            path.write_text(result.to_json(), encoding="utf-8", newline="")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write tables under {out_dir!r}: {exc}") from exc
    return [str(path)]
