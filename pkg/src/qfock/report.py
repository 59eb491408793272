"""Result records for identity, bound, and convergence checks.

A ConvergenceReport stores everything a check measured: the swept index
sequence, the measured values, the per-index analytic bounds (when the
estimate provides one), and the derived verdicts.  Verdicts are computed
once from the stored data by the factory and can always be recomputed
from the record itself, so a serialized report is self-certifying.

LimitOperators carries the truncated limit operator T, the series
operator S built from it, and the measured inventory (norms, Cauchy gap,
tail estimates) that the convergence checks certify.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

from .fock import FockSpace
from .operators import FockOperator

# slack conventions shared by every verdict so that recomputation is
# unambiguous: bounds are checked with a tiny relative margin (exact
# algebraic ties at q = 0 land on the bound to the last ulp), trends with
# a tiny absolute one
BOUND_REL_SLACK = 1e-9
TREND_SLACK = 1e-12


def bound_ok(value: float, bound: Optional[float]) -> bool:
    """value <= bound up to the shared relative slack; vacuous when the
    check records no bound at this index."""
    if bound is None:
        return True
    return value <= bound + abs(bound) * BOUND_REL_SLACK


def nonincreasing(values: Sequence[float], slack: float = TREND_SLACK) -> bool:
    return all(b <= a + slack for a, b in zip(values, values[1:]))


@dataclass(frozen=True)
class ConvergenceReport:
    """Write-once record of one check at one parameter point."""

    name: str
    q: float
    lam: float
    cutoff: int
    degrees: Tuple[int, ...]
    indices: Tuple[int, ...]
    values: Tuple[float, ...]
    bounds: Tuple[Optional[float], ...]
    bound_satisfied: Optional[bool]
    trend_decreasing: Optional[bool]
    final_threshold: Optional[float]
    final_below: Optional[bool]
    safe_top: Optional[int] = None
    seed: Optional[int] = None
    skipped: bool = False
    skip_reason: str = ""
    aux: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    aux_verdicts: Dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        if list(self.indices) != sorted(set(self.indices)):
            raise ValueError("indices must be strictly increasing")
        if not (len(self.indices) == len(self.values) == len(self.bounds)):
            raise ValueError("indices, values, bounds must align")

    # ---- verdicts
    @property
    def verdicts(self) -> Dict[str, bool]:
        out = {}
        if self.bound_satisfied is not None:
            out["bound_satisfied"] = self.bound_satisfied
        if self.trend_decreasing is not None:
            out["trend_decreasing"] = self.trend_decreasing
        if self.final_below is not None:
            out["final_below"] = self.final_below
        for key, val in self.aux_verdicts.items():
            out[key] = val
        return out

    @property
    def passed(self) -> bool:
        """Skips pass vacuously; otherwise every recorded verdict holds."""
        if self.skipped:
            return True
        return all(self.verdicts.values())

    def recompute_verdicts(self) -> Dict[str, Optional[bool]]:
        """Re-derive the three standard verdicts from the stored data.

        Auxiliary verdicts are check-specific and are validated against
        their stored aux series by the checks' own tests.
        """
        bound = None
        if any(b is not None for b in self.bounds):
            bound = all(bound_ok(v, b) for v, b in zip(self.values, self.bounds))
        trend = nonincreasing(self.values) if len(self.values) >= 2 else None
        final = None
        if self.final_threshold is not None and self.values:
            final = self.values[-1] <= self.final_threshold
        return {
            "bound_satisfied": bound,
            "trend_decreasing": trend,
            "final_below": final,
        }

    # ---- serialization
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "q": self.q,
            "lambda": self.lam,
            "cutoff": self.cutoff,
            "degrees": list(self.degrees),
            "indices": list(self.indices),
            "values": list(self.values),
            "bounds": list(self.bounds),
            "bound_satisfied": self.bound_satisfied,
            "trend_decreasing": self.trend_decreasing,
            "final_threshold": self.final_threshold,
            "final_below": self.final_below,
            "safe_top": self.safe_top,
            "seed": self.seed,
            "skipped": self.skipped,
            "skip_reason": self.skip_reason,
            "aux": {k: list(v) for k, v in sorted(self.aux.items())},
            "aux_verdicts": dict(sorted(self.aux_verdicts.items())),
            "passed": self.passed,
        }

    def to_json(self) -> str:
        # sorted keys and explicit separators keep serialization bitwise
        # reproducible; floats round-trip via repr
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def make_report(
    name: str,
    *,
    q: float,
    lam: float,
    cutoff: int,
    degrees: Sequence[int] = (),
    entries: Sequence[Tuple[int, float, Optional[float]]] = (),
    final_threshold: Optional[float] = None,
    safe_top: Optional[int] = None,
    seed: Optional[int] = None,
    aux: Optional[Dict[str, Sequence[float]]] = None,
    aux_verdicts: Optional[Dict[str, bool]] = None,
    with_trend: bool = True,
) -> ConvergenceReport:
    """Assemble a report and derive its verdicts from the measurements.

    ``entries`` is the swept data as (index, measured value, bound or
    None) triples; verdicts follow the shared slack conventions so that
    ``recompute_verdicts`` reproduces them exactly.
    """
    indices = tuple(n for n, _, _ in entries)
    values = tuple(float(v) for _, v, _ in entries)
    bounds = tuple(None if b is None else float(b) for _, _, b in entries)
    bound_satisfied: Optional[bool] = None
    if any(b is not None for b in bounds):
        bound_satisfied = all(bound_ok(v, b) for v, b in zip(values, bounds))
    trend: Optional[bool] = None
    if with_trend and len(values) >= 2:
        trend = nonincreasing(values)
    final: Optional[bool] = None
    if final_threshold is not None and values:
        final = values[-1] <= final_threshold
    return ConvergenceReport(
        name=name,
        q=float(q),
        lam=float(lam),
        cutoff=int(cutoff),
        degrees=tuple(int(x) for x in degrees),
        indices=indices,
        values=values,
        bounds=bounds,
        bound_satisfied=bound_satisfied,
        trend_decreasing=trend,
        final_threshold=final_threshold,
        final_below=final,
        safe_top=safe_top,
        seed=seed,
        aux={k: tuple(float(x) for x in v) for k, v in (aux or {}).items()},
        aux_verdicts=dict(aux_verdicts or {}),
    )


def skipped_report(
    name: str,
    *,
    q: float,
    lam: float,
    cutoff: int,
    reason: str,
    degrees: Sequence[int] = (),
) -> ConvergenceReport:
    """Record that a precondition ruled the check out at this cutoff."""
    return ConvergenceReport(
        name=name,
        q=float(q),
        lam=float(lam),
        cutoff=int(cutoff),
        degrees=tuple(int(x) for x in degrees),
        indices=(),
        values=(),
        bounds=(),
        bound_satisfied=None,
        trend_decreasing=None,
        final_threshold=None,
        final_below=None,
        skipped=True,
        skip_reason=reason,
    )


@dataclass
class LimitOperators:
    """The truncated limit operator T, the series S, and their inventory.

    T is diagonal in the level grading and exact on inputs up to
    ``t_safe_top``; S raises levels in steps of two and is stored with
    its compression inverse on the downward-closed window ``window_top``
    when the invertibility regime applies.
    """

    fock: FockSpace
    lam: float
    T: FockOperator
    p: int
    t_safe_top: int
    t_norm: float
    t_inv_norm: float
    eig_min: float
    eig_max: float
    cauchy_gap: float
    S: Optional[FockOperator] = None
    S_inverse: Optional[FockOperator] = None
    K: Optional[int] = None
    window_top: Optional[int] = None
    s_inv_norm: Optional[float] = None
    neumann_defect: Optional[float] = None
    tail_bound: Optional[float] = None
    tail_bound_sharp: Optional[float] = None
    invertibility_checked: bool = False
    skip_reason: str = ""
    report: Optional[ConvergenceReport] = None
    report_t: Optional[ConvergenceReport] = None

    @property
    def t_condition(self) -> float:
        return self.t_norm * self.t_inv_norm
