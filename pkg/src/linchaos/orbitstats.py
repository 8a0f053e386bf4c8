"""Visit sets of an orbit and single-orbit chaos ingredients.

All membership decisions are certified against the orbit's error bounds: a
step counts as "below delta" only if the largest norm consistent with the
error bound is below delta, and "above M" only if the smallest one is above M.
The asymptotic quantifiers ("for every delta", "tends to infinity") are
sampled on ladders and, where a limit is involved, restricted to the second
half of the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .natdensity import IndexSet, upper_density
from .shiftops import OrbitRecord

FLAGS = ("irregular", "dist_near_zero", "dist_unbounded", "abs_mean_irregular")

DEFAULT_DELTA_LADDER = tuple(10.0 ** -k for k in range(1, 7))
DEFAULT_M_LADDER = tuple(10.0 ** k for k in range(1, 7))


def visit_below(orbit: OrbitRecord, delta: float) -> IndexSet:
    """``{n in [1, N] : ||T^n x|| < delta}`` with certified membership."""
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    upper = orbit.certified_upper()[1:]
    return IndexSet.from_mask(upper < math.log(delta))


def visit_above(orbit: OrbitRecord, M: float) -> IndexSet:
    """``{n in [1, N] : ||T^n x|| > M}`` with certified membership."""
    if not M > 0:
        raise ConfigurationError("M must be positive")
    lower = orbit.certified_lower()[1:]
    return IndexSet.from_mask(lower > math.log(M))


def _tail(orbit: OrbitRecord) -> slice:
    return slice(orbit.horizon // 2 + 1, orbit.horizon + 1)


@dataclass(frozen=True)
class ProbeOutcome:
    flag: bool
    witness: dict
    confidence: float = 0.0

    def __bool__(self):
        return self.flag


def irregular_probe(orbit: OrbitRecord, low_target: float = 1e-6, high_target: float = 1e6) -> ProbeOutcome:
    """Both a certified dip below ``low_target`` and a certified rise above
    ``high_target`` within the last half of the horizon."""
    if not (0 < low_target < 1 < high_target):
        raise ConfigurationError("need 0 < low_target < 1 < high_target")
    tail = _tail(orbit)
    up = orbit.certified_upper()[tail]
    lo = orbit.certified_lower()[tail]
    start = tail.start
    i_min, i_max = int(np.argmin(up)), int(np.argmax(lo))
    dips = bool(up[i_min] < math.log(low_target))
    rises = bool(lo[i_max] > math.log(high_target))
    witness = {
        "low_target": low_target,
        "high_target": high_target,
        "tail_start": start,
        "min_log_norm": float(up[i_min]),
        "min_at": start + i_min,
        "max_log_norm": float(lo[i_max]),
        "max_at": start + i_max,
        "dips": dips,
        "rises": rises,
    }
    return ProbeOutcome(dips and rises, witness)


def _density_ladder(orbit, sets, tol, n_min):
    rows = []
    worst_gap = 0.0
    for level, S in sets:
        est = upper_density(S, n_min)
        rows.append({"level": level, "upper_density": est.value, "convergence_gap": est.convergence_gap})
        worst_gap = max(worst_gap, est.convergence_gap)
    flag = all(r["upper_density"] >= 1 - tol for r in rows)
    return flag, rows, worst_gap


def dist_near_zero_probe(orbit: OrbitRecord, delta_ladder=DEFAULT_DELTA_LADDER, tol: float = 0.05, n_min: int | None = None) -> ProbeOutcome:
    """Upper density of ``visit_below(delta)`` at least ``1 - tol`` for every delta."""
    ladder = list(delta_ladder)
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigurationError("delta ladder must be decreasing")
    flag, rows, gap = _density_ladder(orbit, [(d, visit_below(orbit, d)) for d in ladder], tol, n_min)
    return ProbeOutcome(flag, {"tol": tol, "densities": rows}, gap)


def dist_unbounded_probe(orbit: OrbitRecord, M_ladder=DEFAULT_M_LADDER, tol: float = 0.05, n_min: int | None = None) -> ProbeOutcome:
    """Upper density of ``visit_above(M)`` at least ``1 - tol`` for every M."""
    ladder = list(M_ladder)
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigurationError("M ladder must be increasing")
    flag, rows, gap = _density_ladder(orbit, [(M, visit_above(orbit, M)) for M in ladder], tol, n_min)
    return ProbeOutcome(flag, {"tol": tol, "densities": rows}, gap)


def abs_mean_irregular_probe(orbit: OrbitRecord, tol_low: float = 1e-6, tol_high: float = 1e6) -> ProbeOutcome:
    """Cesaro means dip below ``tol_low`` and exceed ``tol_high`` in the tail half."""
    tail = slice(orbit.horizon // 2, orbit.horizon)  # cesaro index k holds N' = k + 1
    up = orbit.cesaro_upper()[tail]
    lo = orbit.cesaro_lower()[tail]
    if up.size == 0:
        return ProbeOutcome(False, {"reason": "empty tail"})
    dips = bool(up.min() < math.log(tol_low))
    rises = bool(lo.max() > math.log(tol_high))
    witness = {
        "tol_low": tol_low,
        "tol_high": tol_high,
        "min_log_mean": float(up.min()),
        "max_log_mean": float(lo.max()),
        "dips": dips,
        "rises": rises,
    }
    return ProbeOutcome(dips and rises, witness)


@dataclass(frozen=True)
class OrbitVerdict:
    flags: frozenset
    witnesses: dict = field(default_factory=dict)
    confidence: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "flags": sorted(self.flags),
            "witnesses": self.witnesses,
            "confidence": self.confidence,
        }


def orbit_verdict(
    orbit: OrbitRecord,
    low_target: float = 1e-6,
    high_target: float = 1e6,
    delta_ladder=DEFAULT_DELTA_LADDER,
    M_ladder=DEFAULT_M_LADDER,
    tol: float = 0.05,
) -> OrbitVerdict:
    outcomes = {
        "irregular": irregular_probe(orbit, low_target, high_target),
        "dist_near_zero": dist_near_zero_probe(orbit, delta_ladder, tol),
        "dist_unbounded": dist_unbounded_probe(orbit, M_ladder, tol),
        "abs_mean_irregular": abs_mean_irregular_probe(orbit, low_target, high_target),
    }
    return OrbitVerdict(
        frozenset(k for k, v in outcomes.items() if v.flag),
        {k: v.witness for k, v in outcomes.items()},
        {k: v.confidence for k, v in outcomes.items()},
    )
