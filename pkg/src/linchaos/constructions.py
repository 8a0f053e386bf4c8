"""Constructive procedures on orbits of backward shifts.

Two builders live here:

* ``banach_visit_sets_from_irregular`` turns an orbit that keeps dipping
  below ``2^-k^2`` and rising above ``2^k^2`` into two block unions ``A``
  (near zero) and ``B`` (large), spaced so that both have Banach upper
  density one in the limit.
* ``select_manifold_data`` / ``build_x_beta`` / ``verify_manifold_vector``
  assemble vectors ``x_beta = sum_j beta_{r_j} (2C)^{-r_j} x_{r_j}`` from unit
  vectors ``x_m`` whose orbits spike once and then die, and check the two
  inequalities that make ``x_beta`` irregular and distributionally near zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, ConstructionFailed, PreconditionError
from .natdensity import IndexSet, block_union
from .seqspace import NEG_INF, SeqVector, SpaceTag, linear_combo
from .shiftops import OrbitRecord, ShiftOperator, orbit, orbit_log_norms

LN2 = math.log(2.0)


# -- Banach-dense visit sets ------------------------------------------------

@dataclass(frozen=True, eq=False)
class BanachVisitSets:
    n: tuple
    l: tuple
    A: IndexSet
    B: IndexSet
    depth: int
    opnorm_log: float
    # log2 of the certified orbit value at each n_k (upper) and l_k (lower)
    log2_at_n: tuple = ()
    log2_at_l: tuple = ()

    def guaranteed_bounds(self):
        """Per-depth log2 bounds that any operator orbit with this norm obeys on A and B."""
        c = self.opnorm_log / LN2
        return [(k, k * c - k * k, k * k - k * c) for k in range(1, self.depth + 1)]

    def to_json(self):
        return {
            "n": list(self.n),
            "l": list(self.l),
            "depth": self.depth,
            "opnorm_log": self.opnorm_log,
            "horizon": self.A.horizon,
            "log2_at_n": list(self.log2_at_n),
            "log2_at_l": list(self.log2_at_l),
            "A": self.A.to_runs(),
            "B": self.B.to_runs(),
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            tuple(d["n"]),
            tuple(d["l"]),
            IndexSet.parse(d["A"]),
            IndexSet.parse(d["B"]),
            int(d["depth"]),
            float(d["opnorm_log"]),
            tuple(d.get("log2_at_n", ())),
            tuple(d.get("log2_at_l", ())),
        )


def _blocks_hit(blocks, lo, hi):
    return any(a <= hi and lo <= b for a, b in blocks)


def banach_visit_sets_from_irregular(orb: OrbitRecord, opnorm_log: float) -> BanachVisitSets:
    """Greedy smallest choice of ``n_k`` and ``l_k``.

    ``n_k``: certified ``||T^n x|| < 2^{-k^2}``, block ``[n_k, n_k + k]`` inside
    the horizon.  ``l_k``: certified ``||T^l x|| > 2^{k^2}``, block
    ``[l_k - k, l_k]`` inside ``[1, H]``.  Consecutive picks are more than
    ``(k-1)^2`` apart (i.e. ``n_{k+1} - n_k > k^2``) and no block of A meets
    a block of B.
    """
    H = orb.horizon
    up = orb.certified_upper() / LN2
    lo = orb.certified_lower() / LN2
    steps = np.arange(H + 1)
    if not (np.any(up[1:] < -1) and np.any(lo[1:] > 1)):
        raise PreconditionError("orbit is not irregular at the 2^(+-1) scale")

    ns, ls, vn, vl = [], [], [], []
    a_blocks, b_blocks = [], []
    k = 0
    while True:
        k += 1
        n_start = 1 if not ns else ns[-1] + (k - 1) ** 2 + 1
        l_start = k + 1 if not ls else max(ls[-1] + (k - 1) ** 2 + 1, k + 1)
        n_pick = next(
            (
                int(n)
                for n in steps[n_start : H - k + 1][up[n_start : H - k + 1] < -k * k]
                if not _blocks_hit(b_blocks, n, n + k)
            ),
            None,
        )
        if n_pick is None:
            break
        l_pick = next(
            (
                int(m)
                for m in steps[l_start:][lo[l_start:] > k * k]
                if not _blocks_hit(a_blocks + [(n_pick, n_pick + k)], m - k, m)
            ),
            None,
        )
        if l_pick is None:
            break
        ns.append(n_pick)
        ls.append(l_pick)
        vn.append(float(up[n_pick]))
        vl.append(float(lo[l_pick]))
        a_blocks.append((n_pick, n_pick + k))
        b_blocks.append((l_pick - k, l_pick))
    depth = len(ns)
    A = block_union([(a, b - a + 1) for a, b in a_blocks], H)
    B = block_union([(a, b - a + 1) for a, b in b_blocks], H)
    sets = BanachVisitSets(tuple(ns), tuple(ls), A, B, depth, float(opnorm_log), tuple(vn), tuple(vl))
    if depth < 2:
        raise ConstructionFailed(f"horizon {H} exhausted at depth {depth}", depth=depth, partial=sets)
    return sets


# -- manifold data ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ManifoldData:
    """Unit vectors ``x_1..x_m`` with their spike times ``N_1 < ... < N_m``.

    ``slack[m-1]`` holds the margins of the three selection inequalities for
    ``x_m``: spike ratio (log of ``||T^{N_m} x_m|| / (m (2C)^m)``), the worst
    ``1/m - ||T^{N_m} x_k||`` and the worst ``1/m - mean_{i<=N_m} ||T^i x_k||``
    over ``k < m``.
    """

    space: SpaceTag
    C: float
    vectors: tuple
    N: tuple
    r: tuple = ()
    gamma_supports: tuple = ()
    slack: tuple = ()
    search_horizon: int = 0
    gain: float = 1.0

    @property
    def m(self) -> int:
        return len(self.vectors)

    def x(self, i: int) -> SeqVector:
        return self.vectors[i - 1]

    def N_of(self, i: int) -> int:
        return self.N[i - 1]

    def N_lower_bound(self, i: int) -> int:
        """``N_i`` when known, otherwise a lower bound implied by the search."""
        if 1 <= i <= len(self.N):
            return self.N[i - 1]
        return max(self.search_horizon, self.N[-1] if self.N else 0) + 1

    def with_schedule(self, r1: int) -> "ManifoldData":
        return replace(self, r=schedule(self, r1))

    def to_json(self):
        return {
            "space": self.space.to_dict(),
            "C": self.C,
            "vectors": [v.to_json() for v in self.vectors],
            "N": list(self.N),
            "r": list(self.r),
            "gamma_supports": [list(g) for g in self.gamma_supports],
            "slack": list(self.slack),
            "search_horizon": self.search_horizon,
            "gain": self.gain,
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            SpaceTag.from_dict(d["space"]),
            float(d["C"]),
            tuple(SeqVector.from_json(v) for v in d["vectors"]),
            tuple(int(n) for n in d["N"]),
            tuple(int(r) for r in d["r"]),
            tuple(tuple(g) for g in d.get("gamma_supports", ())),
            tuple(d.get("slack", ())),
            int(d.get("search_horizon", 0)),
            float(d.get("gain", 1.0)),
        )


def schedule(data: ManifoldData, r1: int) -> tuple:
    """Minimal ``r_{j+1} = 1 + r_j + N_{r_j + 1}`` kept while ``x_{r_j}`` exists."""
    if not 1 <= r1 <= data.m:
        raise ConfigurationError(f"r1={r1} outside the selected range 1..{data.m}")
    r = [r1]
    while r[-1] + 1 <= data.m:
        nxt = 1 + r[-1] + data.N_of(r[-1] + 1)
        if nxt > data.m:
            break
        r.append(nxt)
    return tuple(r)


def _spike_log_growth(T: ShiftOperator, H: int) -> np.ndarray:
    # log ||T^N e_{N+1}|| for N = 0..H
    j = np.arange(1, H + 2)
    L = T.weights.log_prefix(j)
    return L - L[0]


def _unit_spike_vector(space: SpaceTag, q: int, log_b: float, anchor: int) -> SeqVector:
    """``a e_anchor + b e_q`` with ``||.|| = 1``."""
    if log_b >= 0.0:
        return SeqVector(space, [q], [1], [0.0])
    if space.p is None:
        log_a = 0.0
    else:
        log_a = math.log1p(-math.exp(space.p * log_b)) / space.p
    return SeqVector(space, [anchor, q], [1, 1], [log_a, log_b])


def select_manifold_data(
    T: ShiftOperator,
    search_horizon: int,
    gain: float = 4.0,
    r1: int = 1,
    max_m: int | None = None,
) -> ManifoldData:
    """Greedy search for ``x_m``, ``N_m`` satisfying, for all ``k < m``,

        ||T^{N_m} x_m|| > m (2C)^m,  ||T^{N_m} x_k|| < 1/m,
        (1/N_m) sum_{i<=N_m} ||T^i x_k|| < 1/m.

    ``x_m`` spikes to ``gain * m (2C)^m`` at step ``N_m`` (coefficient at
    ``e_{N_m+1}``) and carries the rest of its unit norm on a fresh low
    index, so it dies right after the spike.  ``N_m`` is the least step
    passing all three checks.
    """
    if T.space.bilateral:
        raise PreconditionError("finitely supported vectors do not die under a bilateral shift")
    if not gain > 1:
        raise ConfigurationError("gain must exceed 1")
    C = T.norm_bound
    if not C > 1:
        raise PreconditionError(f"||T|| = {C:g} <= 1, so T is power bounded")
    H = int(search_horizon)
    growth = _spike_log_growth(T, H)
    log2C = math.log(2 * C)
    space = T.space

    vectors, Ns, slack, orbits, used = [], [], [], [], set()
    m = 0
    while max_m is None or m < max_m:
        m += 1
        target = math.log(gain) + math.log(m) + m * log2C
        floor_n = (Ns[-1] + 1) if Ns else 1
        reach = np.nonzero(growth[floor_n:] >= target)[0]
        if reach.size == 0:
            break
        N = floor_n + int(reach[0])
        # the Cesaro condition needs N > m * S_k with S_k the full orbit sum
        for ln in orbits:
            need = math.exp(math.log(m) + float(np.logaddexp.reduce(ln[1:])))
            N = max(N, int(math.floor(need)) + 1)
        picked = None
        while N <= H:
            slk = _check_selection(T, orbits, m, N)
            if slk is not None:
                anchor = min(i for i in range(1, N + 2) if i not in used)
                x = _unit_spike_vector(space, N + 1, target - growth[N], anchor)
                ln = orbit_log_norms(T, x, N + 1)
                spike = float(ln[N]) - (math.log(m) + m * log2C)
                if spike > 0:
                    picked = (x, ln, dict(m=m, N=N, spike_log_ratio=spike, **slk))
                    break
            N += 1
        if picked is None:
            break
        x, ln, slk = picked
        vectors.append(x)
        Ns.append(N)
        orbits.append(ln)
        slack.append(slk)
        used.update(int(i) for i in x.indices)
    m = len(vectors)
    data = ManifoldData(space, C, tuple(vectors), tuple(Ns), (), (), tuple(slack), H, float(gain))
    if m == 0:
        raise PreconditionError(f"no spike of size {gain:g}*2C within horizon {H}; T looks power bounded at this scale")
    if r1 <= m:
        data = data.with_schedule(r1)
    if m < 2:
        raise ConstructionFailed(f"only m={m} reachable within horizon {H}", depth=m, partial=data)
    return data


def _check_selection(T, orbits, m, N):
    """Margins of the conditions on earlier vectors at step N, or None if one fails."""
    worst_norm, worst_mean = 1.0 / m, 1.0 / m
    for ln in orbits:
        at_N = ln[N] if N < ln.size else NEG_INF
        mean = float(np.logaddexp.reduce(ln[1 : N + 1])) - math.log(N)
        worst_norm = min(worst_norm, 1.0 / m - math.exp(at_N))
        worst_mean = min(worst_mean, 1.0 / m - math.exp(mean))
    # keep the margins clear of floating-point noise in the orbit sums
    if worst_norm <= 1e-9 / m or worst_mean <= 1e-9 / m:
        return None
    return {"norm_margin": worst_norm, "cesaro_margin": worst_mean}


def _pattern_support(pattern) -> tuple[list, int]:
    """Positions ``i`` with ``beta_i = 1`` and the truncation length."""
    if isinstance(pattern, (set, frozenset)):
        sup = sorted(int(i) for i in pattern)
        return sup, (sup[-1] if sup else 0)
    vals = list(pattern)
    if any(v not in (0, 1) for v in vals):
        raise ConfigurationError("beta pattern entries must be 0 or 1")
    return [i + 1 for i, v in enumerate(vals) if v == 1], len(vals)


def build_x_beta(data: ManifoldData, beta_pattern, tail: bool = True) -> SeqVector:
    """Truncated ``x_beta = sum_{i in beta} (2C)^{-i} x_i``.

    ``beta_pattern`` is a 0/1 sequence ``beta_1, beta_2, ...`` or a set of
    positions.  The terms beyond the truncation carry unit vectors with
    coefficients ``(2C)^{-r_j}``, bounded by ``2 (2C)^{-r_{J+1}}``; ``r_{J+1}``
    is the next scheduled position or, past the data, ``1 + r_J + N_{r_J+1}``
    with ``N`` bounded below by the search.
    """
    sup, length = _pattern_support(beta_pattern)
    bad = [i for i in sup if i not in data.r]
    if bad:
        raise ConfigurationError(f"pattern positions {bad} are not in the schedule {list(data.r)}")
    if not sup:
        return SeqVector.zero(data.space)
    missing = [i for i in sup if i > data.m]
    if missing:
        raise ConfigurationError(f"no vectors x_i for i in {missing}")
    log2C = math.log(2 * data.C)
    vec = linear_combo([(math.exp(-i * log2C), data.x(i)) for i in sup])
    if not tail:
        return vec
    later = [r for r in data.r if r > length]
    if later:
        r_next = later[0]
    else:
        r_last = max([r for r in data.r if r <= length], default=length)
        r_next = 1 + r_last + data.N_lower_bound(r_last + 1)
    log_tail = LN2 - r_next * log2C
    return SeqVector(vec.space, vec.indices, vec.signs, vec.log_mags, float(np.logaddexp(vec.log_tail, log_tail)))


@dataclass(frozen=True)
class ManifoldCheck:
    kind: str  # "spike" or "cesaro"
    k: int
    r_k: int
    step: int
    value: float
    threshold: float
    margin: float
    passed: bool | None  # None: step outside the data or horizon

    def to_dict(self):
        return {
            "kind": self.kind,
            "k": self.k,
            "r_k": self.r_k,
            "step": self.step,
            "value": self.value,
            "threshold": self.threshold,
            "margin": self.margin,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ManifoldReport:
    checks: tuple = ()

    @property
    def vacuous(self) -> bool:
        return not any(c.passed is not None for c in self.checks)

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def check(self, kind: str, k: int) -> ManifoldCheck | None:
        return next((c for c in self.checks if c.kind == kind and c.k == k), None)

    def to_dict(self):
        return {"passed": self.passed, "vacuous": self.vacuous, "checks": [c.to_dict() for c in self.checks]}


def _exp(x: float) -> float:
    return math.exp(x) if x < 700 else math.inf


def verify_manifold_vector(
    T: ShiftOperator,
    v: SeqVector,
    data: ManifoldData,
    pattern=None,
    scale: float = 1.0,
    horizon: int | None = None,
) -> ManifoldReport:
    """Certified checks for ``v = scale * x_beta`` at each scheduled ``r_k`` in ``pattern``:

        ||T^{N_{r_k}} v|| >= scale (r_k - 1)
        (1/N') sum_{i<=N'} ||T^i v|| <= scale / (r_k + 1),   N' = N_{r_k + 1}

    Bounds include the orbit's truncation error.  Checks whose step lies
    beyond the data or the horizon are listed with ``passed=None``.
    """
    if v.is_zero():
        return ManifoldReport()
    if pattern is None:
        sup = list(data.r)
    else:
        sup, _ = _pattern_support(pattern)
    rs = [r for r in data.r if r in sup]
    steps = [data.N_of(r) for r in rs if r <= data.m] + [data.N_of(r + 1) for r in rs if r + 1 <= data.m]
    if not steps:
        return ManifoldReport(tuple(
            ManifoldCheck(kind, k, r, 0, math.nan, math.nan, math.nan, None)
            for k, r in enumerate(rs, 1)
            for kind in ("spike", "cesaro")
        ))
    H = max(steps) if horizon is None else horizon
    rec = orbit(T, v, max(H, 1))
    lower, mean_upper = rec.certified_lower(), rec.cesaro_upper()
    checks = []
    for k, r in enumerate(rs, 1):
        thr = scale * (r - 1)
        if r <= data.m and data.N_of(r) <= H:
            n = data.N_of(r)
            val = _exp(float(lower[n]))
            checks.append(ManifoldCheck("spike", k, r, n, val, thr, val - thr, bool(val >= thr)))
        else:
            checks.append(ManifoldCheck("spike", k, r, data.N_lower_bound(r), math.nan, thr, math.nan, None))
        thr = scale / (r + 1)
        if r + 1 <= data.m and data.N_of(r + 1) <= H:
            n = data.N_of(r + 1)
            val = _exp(float(mean_upper[n - 1]))
            checks.append(ManifoldCheck("cesaro", k, r, n, val, thr, thr - val, bool(val <= thr)))
        else:
            checks.append(ManifoldCheck("cesaro", k, r, data.N_lower_bound(r + 1), math.nan, thr, math.nan, None))
    return ManifoldReport(tuple(checks))


def gamma_supports(data: ManifoldData, count: int) -> tuple:
    """Split the schedule round-robin into ``count`` disjoint nonempty supports."""
    if count < 0:
        raise ConfigurationError("count must be nonnegative")
    if count > len(data.r):
        raise PreconditionError(
            f"{count} disjoint supports requested but the schedule has only {len(data.r)} positions"
        )
    return tuple(tuple(data.r[i::count]) for i in range(count))


def dense_manifold_family(data: ManifoldData, dense_seq, count: int) -> list[SeqVector]:
    """``y_n = w_n + (1/n) v_n`` for ``n = 1..count`` with ``v_n`` built on disjoint supports."""
    if count == 0:
        return []
    dense_seq = list(dense_seq)
    if len(dense_seq) < count:
        raise ConfigurationError(f"need {count} vectors w_n, got {len(dense_seq)}")
    supports = gamma_supports(data, count)
    out = []
    for n, (w, gamma) in enumerate(zip(dense_seq, supports), 1):
        v = build_x_beta(data, set(gamma))
        out.append(linear_combo([(1.0, w), (1.0 / n, v)]))
    return out
