"""Natural and Banach densities of finite-horizon subsets of the positive integers.

The asymptotic quantities

    lower / upper density   liminf / limsup_n  card(A ∩ [1, n]) / n
    Banach lower / upper    lim_n  inf_m / sup_m  card(A ∩ [m+1, m+n]) / n

are replaced by estimators over a finite horizon ``H``.  Each estimator
returns a :class:`DensityEstimate` carrying the ladder of intermediate values
it went through, so that callers can see how settled the number is.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, OutOfRangeError

KINDS = ("lower", "upper", "banach_lower", "banach_upper")


@dataclass(frozen=True, eq=False)
class IndexSet:
    """A subset of ``[1, horizon]`` stored as a sorted array of members."""

    horizon: int
    members: np.ndarray = field(repr=False)

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise OutOfRangeError(f"horizon must be positive, got {self.horizon}")
        m = np.asarray(self.members, dtype=np.int64).ravel()
        if m.size:
            if np.any(np.diff(m) <= 0):
                raise ValueError("members must be strictly increasing")
            if m[0] < 1 or m[-1] > self.horizon:
                raise OutOfRangeError(f"members must lie in [1, {self.horizon}]")
        m.setflags(write=False)
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "members", m)

    @classmethod
    def from_members(cls, members: Iterable[int], horizon: int) -> "IndexSet":
        arr = np.unique(np.fromiter((int(v) for v in members), dtype=np.int64))
        return cls(horizon, arr)

    @classmethod
    def from_mask(cls, mask: Sequence[bool]) -> "IndexSet":
        """``mask[i]`` says whether ``i + 1`` belongs to the set."""
        mask = np.asarray(mask, dtype=bool)
        return cls(mask.size, np.flatnonzero(mask) + 1)

    @classmethod
    def full(cls, horizon: int) -> "IndexSet":
        return cls(horizon, np.arange(1, horizon + 1))

    @classmethod
    def empty(cls, horizon: int) -> "IndexSet":
        return cls(horizon, np.empty(0, dtype=np.int64))

    def __len__(self):
        return int(self.members.size)

    def __contains__(self, n):
        i = np.searchsorted(self.members, n)
        return bool(i < self.members.size and self.members[i] == n)

    def __eq__(self, other):
        if not isinstance(other, IndexSet):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.members, other.members)

    def __hash__(self):
        return hash((self.horizon, self.members.tobytes()))

    @cached_property
    def mask(self) -> np.ndarray:
        out = np.zeros(self.horizon, dtype=bool)
        out[self.members - 1] = True
        return out

    @cached_property
    def prefix_counts(self) -> np.ndarray:
        """``prefix_counts[n] = card(A ∩ [1, n])`` for ``n = 0..H``."""
        out = np.zeros(self.horizon + 1, dtype=np.int64)
        np.cumsum(self.mask, out=out[1:])
        return out

    def complement(self) -> "IndexSet":
        return IndexSet.from_mask(~self.mask)

    def union(self, other: "IndexSet") -> "IndexSet":
        if other.horizon != self.horizon:
            raise OutOfRangeError("horizons differ")
        return IndexSet(self.horizon, np.union1d(self.members, other.members))

    def intersection(self, other: "IndexSet") -> "IndexSet":
        if other.horizon != self.horizon:
            raise OutOfRangeError("horizons differ")
        return IndexSet(self.horizon, np.intersect1d(self.members, other.members))

    def issubset(self, other: "IndexSet") -> bool:
        return bool(np.all(np.isin(self.members, other.members)))

    # -- text formats -------------------------------------------------------

    def to_lines(self) -> str:
        body = "\n".join(str(int(v)) for v in self.members)
        return f"# horizon={self.horizon}\n" + body + ("\n" if body else "")

    def runs(self) -> list[tuple[int, int]]:
        m = self.members
        if m.size == 0:
            return []
        breaks = np.flatnonzero(np.diff(m) != 1)
        starts = np.concatenate(([m[0]], m[breaks + 1]))
        ends = np.concatenate((m[breaks], [m[-1]]))
        return [(int(a), int(b)) for a, b in zip(starts, ends)]

    def to_runs(self) -> str:
        parts = [str(a) if a == b else f"{a}-{b}" for a, b in self.runs()]
        return f"horizon={self.horizon};" + ",".join(parts)

    @classmethod
    def parse(cls, text: str, horizon: int | None = None) -> "IndexSet":
        """Read either the newline list or the run-length format."""
        text = text.strip()
        members: list[int] = []
        found_h = None
        if text.startswith("horizon=") and ";" in text:
            head, text = text.split(";", 1)
            found_h = int(head.split("=", 1)[1])
        tokens = []
        for line in text.replace(",", "\n").splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "horizon=" in line:
                    found_h = int(line.split("horizon=", 1)[1].split()[0])
                continue
            tokens.append(line)
        for tok in tokens:
            if "-" in tok[1:]:
                a, b = tok.split("-", 1)
                members.extend(range(int(a), int(b) + 1))
            else:
                members.append(int(tok))
        h = horizon or found_h or (max(members) if members else None)
        if h is None:
            raise ValueError("cannot infer horizon of an empty set; pass horizon=")
        return cls.from_members(members, h)


@dataclass(frozen=True)
class DensityEstimate:
    value: float
    kind: str
    ladder: tuple[tuple[int, float], ...]
    convergence_gap: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown density kind {self.kind!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"density {self.value} outside [0, 1]")

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "kind": self.kind,
            "ladder": [list(r) for r in self.ladder],
            "convergence_gap": self.convergence_gap,
        }


def _estimate(kind, rungs):
    gap = abs(rungs[-1][1] - rungs[-2][1]) if len(rungs) > 1 else 0.0
    return DensityEstimate(float(rungs[-1][1]), kind, tuple(rungs), float(gap))


def window_count(A: IndexSet, m: int, w: int) -> int:
    """``card(A ∩ [m+1, m+w])`` by binary search on the member array."""
    if m < 0 or w < 1:
        raise OutOfRangeError(f"need m >= 0 and w >= 1, got m={m}, w={w}")
    if m + w > A.horizon:
        raise OutOfRangeError(f"window [{m + 1}, {m + w}] exceeds horizon {A.horizon}")
    lo = np.searchsorted(A.members, m + 1, side="left")
    hi = np.searchsorted(A.members, m + w, side="right")
    return int(hi - lo)


def default_n_min(horizon: int) -> int:
    return max(1, horizon // 100)


def default_window_ladder(horizon: int) -> list[int]:
    """Windows 10, 100, ... up to the default prefix floor ``n_min``.

    Capping at ``n_min`` keeps the sliding-window and prefix estimators on
    the same smallest scale, so their finite-size biases respect the chain
    Bd_lower <= lower <= upper <= Bd_upper.
    """
    cap = max(1, min(default_n_min(horizon), horizon // 2))
    ladder = []
    w = 10
    while w <= cap:
        ladder.append(w)
        w *= 10
    return ladder or [cap]


def _prefix_rungs(n_min, horizon):
    rungs = []
    n = n_min
    while n < horizon:
        rungs.append(n)
        n *= 10
    rungs.append(horizon)
    return rungs


def _prefix_density(A, n_min, kind):
    H = A.horizon
    if n_min is None:
        n_min = default_n_min(H)
    if n_min < 1 or n_min > H:
        raise OutOfRangeError(f"n_min={n_min} outside [1, {H}]")
    n = np.arange(n_min, H + 1)
    ratios = A.prefix_counts[n_min:] / n
    running = np.minimum.accumulate(ratios) if kind == "lower" else np.maximum.accumulate(ratios)
    rungs = [(r, float(running[r - n_min])) for r in _prefix_rungs(n_min, H)]
    return _estimate(kind, rungs)


def lower_density(A: IndexSet, n_min: int | None = None) -> DensityEstimate:
    """min over ``n in [n_min, H]`` of ``card(A ∩ [1, n]) / n``."""
    return _prefix_density(A, n_min, "lower")


def upper_density(A: IndexSet, n_min: int | None = None) -> DensityEstimate:
    """max over ``n in [n_min, H]`` of ``card(A ∩ [1, n]) / n``."""
    return _prefix_density(A, n_min, "upper")


def _check_ladder(ladder, horizon):
    ladder = [int(w) for w in ladder]
    if not ladder:
        raise ConfigurationError("window ladder is empty")
    if any(w < 1 for w in ladder) or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigurationError(f"window ladder must be positive and increasing: {ladder}")
    if 2 * ladder[-1] > horizon:
        raise ConfigurationError(f"window {ladder[-1]} exceeds half the horizon {horizon}")
    return ladder


def window_extrema(A: IndexSet, w: int) -> tuple[float, float]:
    """(min, max) over ``m in [0, H-w]`` of ``card(A ∩ [m+1, m+w]) / w``."""
    cs = A.prefix_counts
    counts = cs[w:] - cs[:-w]
    return counts.min() / w, counts.max() / w


def banach_upper_density(A: IndexSet, window_ladder: Sequence[int] | None = None) -> DensityEstimate:
    """Running min over the ladder of the best window ratio.

    ``sup_m card(A ∩ [m+1, m+w])`` is subadditive in ``w``, so the limit is
    the infimum of ``f(w) = sup_m (...) / w`` and the running minimum can only
    approach it from above.
    """
    ladder = _check_ladder(default_window_ladder(A.horizon) if window_ladder is None else window_ladder, A.horizon)
    rungs, best = [], 1.0
    for w in ladder:
        best = min(best, window_extrema(A, w)[1])
        rungs.append((w, float(best)))
    return _estimate("banach_upper", rungs)


def banach_lower_density(A: IndexSet, window_ladder: Sequence[int] | None = None) -> DensityEstimate:
    """Running max over the ladder of the worst window ratio (superadditive dual)."""
    ladder = _check_ladder(default_window_ladder(A.horizon) if window_ladder is None else window_ladder, A.horizon)
    rungs, best = [], 0.0
    for w in ladder:
        best = max(best, window_extrema(A, w)[0])
        rungs.append((w, float(best)))
    return _estimate("banach_lower", rungs)


def four_densities(A: IndexSet, n_min=None, window_ladder=None) -> dict[str, DensityEstimate]:
    return {
        "lower": lower_density(A, n_min),
        "upper": upper_density(A, n_min),
        "banach_lower": banach_lower_density(A, window_ladder),
        "banach_upper": banach_upper_density(A, window_ladder),
    }


def exact_four_densities_periodic(pattern, period: int) -> tuple[float, float, float, float]:
    """All four densities of the periodic set generated by ``pattern``.

    ``pattern`` is a string of 0/1 characters or a boolean sequence of length
    ``period``; the density of a purely periodic set is its fill ratio.
    """
    if period <= 0:
        raise ConfigurationError("period must be positive")
    bits = [c == "1" for c in pattern] if isinstance(pattern, str) else [bool(b) for b in pattern]
    if len(bits) != period:
        raise ConfigurationError(f"pattern length {len(bits)} != period {period}")
    d = sum(bits) / period
    return (d, d, d, d)


def periodic_set(pattern, horizon: int) -> IndexSet:
    """The set ``{n <= horizon : pattern[(n-1) mod period]}``."""
    bits = np.array([c == "1" for c in pattern] if isinstance(pattern, str) else pattern, dtype=bool)
    reps = -(-horizon // bits.size)
    return IndexSet.from_mask(np.tile(bits, reps)[:horizon])


def block_union(starts_and_lengths: Iterable[tuple[int, int]], horizon: int) -> IndexSet:
    """Union of integer intervals ``[s, s+len-1]`` clipped to ``[1, horizon]``."""
    mask = np.zeros(horizon, dtype=bool)
    for s, length in starts_and_lengths:
        lo, hi = max(s, 1), min(s + length - 1, horizon)
        if lo <= hi:
            mask[lo - 1:hi] = True
    return IndexSet.from_mask(mask)


def square_blocks(horizon: int) -> IndexSet:
    """``⋃_k [k², k²+k]`` up to ``horizon``."""
    blocks = []
    k = 1
    while k * k <= horizon:
        blocks.append((k * k, k + 1))
        k += 1
    return block_union(blocks, horizon)


def squares(horizon: int) -> IndexSet:
    k = np.arange(1, math.isqrt(horizon) + 1)
    return IndexSet(horizon, k * k)
