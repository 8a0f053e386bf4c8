"""Pair profiles, chaos classification and the implication lattice.

For a pair ``(x, y)`` everything is computed from the orbit of ``z = x - y``
(``T^j x - T^j y = T^j z``).  Given the visit sets
``V(delta) = {j : ||T^j z|| < delta}`` the four profile functions are

    F(delta)   lower density of V(delta)
    F*(delta)  upper density
    BF(delta)  Banach lower density
    BF*(delta) Banach upper density

and the chaos classes are predicates on these functions, sampled on a grid
of deltas with tolerance ``tau``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import ConfigurationError, PreconditionError
from .natdensity import (
    DensityEstimate,
    banach_lower_density,
    banach_upper_density,
    lower_density,
    upper_density,
)
from .orbitstats import (
    DEFAULT_DELTA_LADDER,
    DEFAULT_M_LADDER,
    abs_mean_irregular_probe,
    dist_near_zero_probe,
    dist_unbounded_probe,
    irregular_probe,
    visit_below,
)
from .seqspace import SeqVector, linear_combo, norm
from .shiftops import OrbitRecord, ShiftOperator, orbit

CHAOS_CLASSES = ("LiYorkePair", "MeanLiYorkePair", "DC1", "DC2", "DC2half", "RDC1", "RDC1plus", "RDC2")
DYNAMICS_LABELS = ("FHC", "FH", "UFH", "RH", "mixing", "w-mixing", "H", "Devaney")

DEFAULT_DELTA_GRID = tuple(10.0 ** k for k in range(-6, 7))

PROFILE_FIELDS = ("F", "F_star", "BF_lower", "BF_star")


@dataclass(frozen=True, eq=False)
class ChaosProfile:
    horizon: int
    delta_grid: tuple
    F: tuple
    F_star: tuple
    BF_lower: tuple
    BF_star: tuple
    # extremes of the z-orbit (and its Cesaro means) over the second half;
    # None for synthetic profiles that were not computed from an orbit
    tail_log_min: float | None = None
    tail_log_max: float | None = None
    tail_log_mean_min: float | None = None
    tail_log_mean_max: float | None = None

    def values(self, name: str) -> np.ndarray:
        return np.array([float(e) for e in getattr(self, name)])

    def gaps(self, name: str) -> np.ndarray:
        return np.array([e.convergence_gap if isinstance(e, DensityEstimate) else 0.0 for e in getattr(self, name)])

    @classmethod
    def from_values(cls, delta_grid, F, F_star, BF_lower, BF_star, horizon=0, **tails):
        """Synthetic profile from plain numbers (no ladders)."""
        def wrap(vals, kind):
            return tuple(DensityEstimate(float(v), kind, ((1, float(v)),), 0.0) for v in vals)

        return cls(
            horizon,
            tuple(float(d) for d in delta_grid),
            wrap(F, "lower"),
            wrap(F_star, "upper"),
            wrap(BF_lower, "banach_lower"),
            wrap(BF_star, "banach_upper"),
            **tails,
        )

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "delta_grid": list(self.delta_grid),
            **{f: [e.to_dict() for e in getattr(self, f)] for f in PROFILE_FIELDS},
            "tail_log_min": self.tail_log_min,
            "tail_log_max": self.tail_log_max,
            "tail_log_mean_min": self.tail_log_mean_min,
            "tail_log_mean_max": self.tail_log_mean_max,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", "F", "F_star", "BF", "BF_star"])
        cols = [self.values(f) for f in PROFILE_FIELDS]
        for i, d in enumerate(self.delta_grid):
            w.writerow([repr(d)] + [repr(float(c[i])) for c in cols])
        return buf.getvalue()


def profile_from_orbit(orb: OrbitRecord, delta_grid=DEFAULT_DELTA_GRID, n_min=None, window_ladder=None) -> ChaosProfile:
    grid = tuple(float(d) for d in delta_grid)
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] <= 0:
        raise ConfigurationError("delta grid must be positive and increasing")
    cols = {f: [] for f in PROFILE_FIELDS}
    for d in grid:
        V = visit_below(orb, d)
        cols["F"].append(lower_density(V, n_min))
        cols["F_star"].append(upper_density(V, n_min))
        cols["BF_lower"].append(banach_lower_density(V, window_ladder))
        cols["BF_star"].append(banach_upper_density(V, window_ladder))
    tail = slice(orb.horizon // 2 + 1, orb.horizon + 1)
    mtail = slice(orb.horizon // 2, orb.horizon)
    return ChaosProfile(
        orb.horizon,
        grid,
        *(tuple(cols[f]) for f in PROFILE_FIELDS),
        tail_log_min=float(orb.certified_upper()[tail].min()),
        tail_log_max=float(orb.certified_lower()[tail].max()),
        tail_log_mean_min=float(orb.cesaro_upper()[mtail].min()),
        tail_log_mean_max=float(orb.cesaro_lower()[mtail].max()),
    )


def pair_profile(T: ShiftOperator, x: SeqVector, y: SeqVector, N: int, delta_grid=DEFAULT_DELTA_GRID, **kw) -> ChaosProfile:
    z = linear_combo([(1.0, x), (-1.0, y)])
    if z.is_zero():
        raise PreconditionError("x and y coincide")
    return profile_from_orbit(orbit(T, z, N), delta_grid, **kw)


@dataclass(frozen=True)
class ChaosVerdict:
    flags: frozenset
    witnesses: dict = field(default_factory=dict)
    assumptions: dict = field(default_factory=dict)

    def to_dict(self):
        return {"flags": sorted(self.flags), "witnesses": self.witnesses, "assumptions": self.assumptions}


def _grid_positions(grid, eps_grid):
    if eps_grid is None:
        return list(range(len(grid)))
    pos = []
    for e in eps_grid:
        hits = [i for i, d in enumerate(grid) if math.isclose(d, e, rel_tol=1e-12)]
        if not hits:
            raise ConfigurationError(f"epsilon {e} is not on the profile's delta grid")
        pos.append(hits[0])
    return sorted(set(pos))


def classify_pair(
    profile: ChaosProfile,
    eps_search_grid=None,
    tau: float = 0.05,
    margin: float = 0.05,
    ly_low: float | None = None,
    ly_high: float | None = None,
    dense_X0: bool = False,
) -> ChaosVerdict:
    """Flag the pair classes whose grid-rendered predicates hold.

    ``F* == 1`` becomes ``F* >= 1 - tau`` on the whole grid, ``= 0`` becomes
    ``<= tau`` and a strict ``< 1`` becomes ``<= 1 - tau - margin``.  Banach
    estimates are first clamped onto the chain ``BF <= F`` and ``F* <= BF*``,
    which the true values always satisfy.
    """
    if not 0 < tau < 0.5 or not 0 <= margin < 0.5:
        raise ConfigurationError("tau must lie in (0, 0.5) and margin in [0, 0.5)")
    grid = profile.delta_grid
    F, Fs = profile.values("F"), profile.values("F_star")
    BFl = np.minimum(profile.values("BF_lower"), F)
    BFs = np.maximum(profile.values("BF_star"), Fs)
    eps = _grid_positions(grid, eps_search_grid)
    ly_low = grid[0] if ly_low is None else ly_low
    ly_high = grid[-1] if ly_high is None else ly_high

    flags, wit = set(), {}

    def first(cond):
        return next((i for i in eps if cond(i)), None)

    star_full = bool(np.all(Fs >= 1 - tau))
    i = first(lambda i: F[i] <= tau)
    if star_full and i is not None:
        flags.add("DC1")
        wit["DC1"] = {"epsilon": grid[i], "F(epsilon)": F[i], "min F*": float(Fs.min())}
    i = first(lambda i: F[i] <= 1 - tau - margin)
    if star_full and i is not None:
        flags.add("DC2")
        wit["DC2"] = {"epsilon": grid[i], "F(epsilon)": F[i], "min F*": float(Fs.min())}

    # largest prefix delta_0..delta_R with a common separator c
    R = -1
    for r in range(len(grid)):
        if F[: r + 1].max() + margin <= Fs[: r + 1].min():
            R = r
        else:
            break
    if R >= 0:
        c = 0.5 * (F[: R + 1].max() + Fs[: R + 1].min())
        r_val = grid[R + 1] if R + 1 < len(grid) else grid[R] * 10
        flags.add("DC2half")
        wit["DC2half"] = {"c": float(c), "r": r_val, "deltas_checked": R + 1}

    i = first(lambda i: BFl[i] <= tau)
    if i is not None and Fs[0] > tau:
        flags.add("RDC1")
        wit["RDC1"] = {"epsilon": grid[i], "BF(epsilon)": float(BFl[i]), "c": float(Fs[0]), "r": grid[1] if len(grid) > 1 else grid[0] * 10}
    if i is not None and star_full:
        flags.add("RDC1plus")
        wit["RDC1plus"] = {"epsilon": grid[i], "BF(epsilon)": float(BFl[i]), "min F*": float(Fs.min())}
    j = first(lambda i: F[i] <= 1 - tau - margin)
    if j is not None and bool(np.all(BFs >= 1 - tau)):
        flags.add("RDC2")
        wit["RDC2"] = {"epsilon": grid[j], "F(epsilon)": F[j], "min BF*": float(BFs.min())}

    if profile.tail_log_min is not None:
        if profile.tail_log_min < math.log(ly_low) and profile.tail_log_max > math.log(ly_high):
            flags.add("LiYorkePair")
            wit["LiYorkePair"] = {"tail_log_min": profile.tail_log_min, "tail_log_max": profile.tail_log_max, "low": ly_low, "high": ly_high}
    else:
        # no orbit at hand: read liminf 0 off BF* > 0 at every delta and
        # limsup > 0 off some BF(eps) bounded away from 1
        k = first(lambda i: BFl[i] <= 1 - min(tau, margin))
        if bool(np.all(BFs > 0)) and k is not None:
            flags.add("LiYorkePair")
            wit["LiYorkePair"] = {"epsilon": grid[k], "BF(epsilon)": float(BFl[k]), "min BF*": float(BFs.min())}
    if profile.tail_log_mean_min is not None and (
        profile.tail_log_mean_min < math.log(ly_low) and profile.tail_log_mean_max > math.log(ly_high)
    ):
        flags.add("MeanLiYorkePair")
        wit["MeanLiYorkePair"] = {
            "tail_log_mean_min": profile.tail_log_mean_min,
            "tail_log_mean_max": profile.tail_log_mean_max,
            "low": ly_low,
            "high": ly_high,
        }

    for name in wit:
        wit[name].update(tau=tau, margin=margin)
    clamped = int(np.sum(BFl < profile.values("BF_lower")) + np.sum(BFs > profile.values("BF_star")))
    return ChaosVerdict(frozenset(flags), wit, {"dense_X0": dense_X0, "source": "pair", "chain_clamps": clamped})


@dataclass(frozen=True)
class VectorParams:
    low_target: float = 1e-6
    high_target: float = 1e6
    delta_ladder: tuple = DEFAULT_DELTA_LADDER
    M_ladder: tuple = DEFAULT_M_LADDER
    tol: float = 0.05
    c0: float = 0.1

    def to_dict(self):
        return {
            "low_target": self.low_target,
            "high_target": self.high_target,
            "delta_ladder": list(self.delta_ladder),
            "M_ladder": list(self.M_ladder),
            "tol": self.tol,
            "c0": self.c0,
        }


def classify_orbit(orb: OrbitRecord, params: VectorParams = VectorParams(), dense_X0: bool = False) -> ChaosVerdict:
    """Map single-orbit evidence to classes via the irregular-vector characterisations.

    RDC1   irregular and visits below every delta with upper density >= c0
    RDC1+  irregular and distributionally near to zero
    RDC2   irregular and distributionally unbounded
    """
    irr = irregular_probe(orb, params.low_target, params.high_target)
    dnz = dist_near_zero_probe(orb, params.delta_ladder, params.tol)
    dun = dist_unbounded_probe(orb, params.M_ladder, params.tol)
    ami = abs_mean_irregular_probe(orb, params.low_target, params.high_target)
    positive = all(r["upper_density"] >= params.c0 for r in dnz.witness["densities"])

    flags, wit = set(), {}
    evidence = {"irregular": irr.witness, "dist_near_zero": dnz.witness, "dist_unbounded": dun.witness}
    if irr:
        flags.add("LiYorkePair")
        wit["LiYorkePair"] = {"irregular": irr.witness, "paired_with": "0"}
        if positive:
            flags.add("RDC1")
            wit["RDC1"] = {**evidence, "c0": params.c0}
        if dnz:
            flags.add("RDC1plus")
            wit["RDC1plus"] = evidence
        if dun:
            flags.add("RDC2")
            wit["RDC2"] = evidence
    if ami:
        flags.add("MeanLiYorkePair")
        wit["MeanLiYorkePair"] = {"abs_mean_irregular": ami.witness}
    probes = {
        "irregular": irr.flag,
        "dist_near_zero": dnz.flag,
        "dist_unbounded": dun.flag,
        "abs_mean_irregular": ami.flag,
        "positive_upper_density_near_zero": positive,
    }
    return ChaosVerdict(
        frozenset(flags),
        wit,
        {"dense_X0": dense_X0, "source": "vector", "params": params.to_dict(), "probes": probes},
    )


def dense_X0_holds(T: ShiftOperator) -> bool:
    """Finitely supported vectors die under a unilateral backward shift."""
    return not T.space.bilateral


def classify_vector(T: ShiftOperator, x: SeqVector, N: int, params: VectorParams = VectorParams()) -> ChaosVerdict:
    if x.indices.size == 0 or norm(x).log_value == -math.inf:
        raise PreconditionError("cannot classify the zero vector")
    return classify_orbit(orbit(T, x, N), params, dense_X0_holds(T))


# -- implication lattice ----------------------------------------------------

_BASE_EDGES = [
    ("FHC", "mixing"),
    ("FHC", "Devaney"),
    ("FHC", "FH"),
    ("FHC", "DC1"),
    ("FHC", "MeanLiYorkePair"),
    ("MeanLiYorkePair", "RDC1plus"),
    ("RDC1plus", "RDC1"),
    ("RDC1", "LiYorkePair"),
    ("DC1", "RDC1plus"),
    ("Devaney", "RH"),
    ("mixing", "w-mixing"),
    ("FH", "UFH"),
    ("UFH", "DC2half"),
    ("UFH", "RH"),
    ("DC1", "DC2half"),
    ("RH", "w-mixing"),
    ("w-mixing", "H"),
    ("DC2half", "RDC2"),
    ("DC2half", "RDC1"),
    ("RDC2", "LiYorkePair"),
    ("H", "LiYorkePair"),
]
# DC1 and DC2 are separate flags here; only these two edges hold by definition.
_DEFINITIONAL = [("DC1", "DC2"), ("DC2", "DC2half")]
# under a dense set of vectors with T^n x -> 0
_DENSE_EQUIVALENCES = [("RDC2", "DC1"), ("LiYorkePair", "RDC1plus")]
_DENSE_EDGES = [
    ("UFH", "DC1"),
    ("UFH", "RH"),
    ("DC1", "MeanLiYorkePair"),
    ("Devaney", "RH"),
    ("RH", "w-mixing"),
    ("Devaney", "DC1"),
    ("w-mixing", "H"),
    ("H", "LiYorkePair"),
    ("MeanLiYorkePair", "LiYorkePair"),
]


def implication_lattice(dense_X0: bool = False) -> nx.DiGraph:
    g = nx.DiGraph(dense_X0=dense_X0)
    g.add_nodes_from(CHAOS_CLASSES, kind="chaos")
    g.add_nodes_from(DYNAMICS_LABELS, kind="label")
    g.add_edges_from(_BASE_EDGES, source="base")
    g.add_edges_from(_DEFINITIONAL, source="definition")
    if dense_X0:
        for u, v in _DENSE_EDGES:
            if not g.has_edge(u, v):
                g.add_edge(u, v, source="dense")
        g.add_edges_from(_DENSE_EQUIVALENCES, source="dense-equivalence")
    return g


def equivalence_classes(lattice: nx.DiGraph) -> list[set]:
    return [c for c in nx.strongly_connected_components(lattice) if len(c) > 1]


def reachable(lattice: nx.DiGraph, node: str) -> set:
    return nx.descendants(lattice, node)


@dataclass(frozen=True)
class Violation:
    flag: str
    missing: str

    def __str__(self):
        return f"{self.flag} implies {self.missing}, which is not flagged"


def check_consistency(verdict: ChaosVerdict, lattice: nx.DiGraph) -> list[Violation]:
    """Flags whose lattice consequences (among chaos classes) are missing."""
    out = []
    for f in sorted(verdict.flags):
        if f not in lattice:
            continue
        for d in sorted(nx.descendants(lattice, f)):
            if lattice.nodes[d].get("kind") == "chaos" and d not in verdict.flags:
                out.append(Violation(f, d))
    return out


# -- c(T) -------------------------------------------------------------------

@dataclass(frozen=True)
class CTBound:
    value: float
    label: str
    per_candidate: tuple
    degenerate: tuple

    def to_dict(self):
        return {
            "value": self.value,
            "label": self.label,
            "per_candidate": list(self.per_candidate),
            "degenerate": list(self.degenerate),
        }


def c_T_lower_bound(T: ShiftOperator, candidates, a: float, N: int) -> CTBound:
    """Largest upper density of ``{n : ||T^n x|| < a}`` over the candidates.

    Only a lower bound for c(T) if the candidates are hypercyclic, which is
    not checked; candidates whose orbit ends inside the ball for the whole
    second half are reported as degenerate (they cannot be hypercyclic).
    """
    candidates = list(candidates)
    if not a > 0:
        raise ConfigurationError("ball radius must be positive")
    if not candidates:
        raise PreconditionError("need at least one candidate vector")
    vals, degenerate = [], []
    for i, x in enumerate(candidates):
        rec = orbit(T, x, N)
        vals.append(upper_density(visit_below(rec, a)).value)
        if np.all(rec.certified_upper()[N // 2 + 1:] < math.log(a)):
            degenerate.append(i)
    return CTBound(max(vals), "heuristic", tuple(vals), tuple(degenerate))
