import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from linchaos.chaoscls import (
    CHAOS_CLASSES,
    DEFAULT_DELTA_GRID,
    DYNAMICS_LABELS,
    ChaosProfile,
    ChaosVerdict,
    VectorParams,
    c_T_lower_bound,
    check_consistency,
    classify_orbit,
    classify_pair,
    classify_vector,
    equivalence_classes,
    implication_lattice,
    pair_profile,
    profile_from_orbit,
    reachable,
)
from linchaos.constructions import build_x_beta, select_manifold_data
from linchaos.errors import ConfigurationError, PreconditionError
from linchaos.natdensity import block_union
from linchaos.seqspace import SeqVector, basis_vector, lp
from linchaos.shiftops import OrbitRecord, cesaro_shift, rolewicz_shift

GRID = DEFAULT_DELTA_GRID
ONES = [1.0] * len(GRID)
ZEROS = [0.0] * len(GRID)


def step(at):
    """0 for delta <= 10^at, 1 beyond."""
    return [0.0 if d <= 10.0 ** at else 1.0 for d in GRID]


def dc1_profile():
    F = step(0)
    return ChaosProfile.from_values(GRID, F, ONES, F, ONES)


def near_zero_without_unbounded_profile():
    BF = step(-3)
    return ChaosProfile.from_values(GRID, ONES, ONES, BF, ONES)


def verdict(*flags):
    return ChaosVerdict(frozenset(flags))


monotone_col = st.lists(st.floats(0, 1), min_size=len(GRID), max_size=len(GRID)).map(sorted)


@st.composite
def chain_profiles(draw):
    """Random monotone profiles satisfying BF <= F <= F* <= BF*."""
    cols = sorted([draw(monotone_col) for _ in range(4)], key=sum)
    stacked = np.sort(np.array(cols), axis=0)
    return ChaosProfile.from_values(GRID, stacked[1], stacked[2], stacked[0], stacked[3])


class TestPairProfile:
    def test_dead_orbit(self):
        prof = pair_profile(cesaro_shift(0.4), basis_vector(5, lp(2)), SeqVector.zero(lp(2)), 100_000)
        assert np.all(prof.values("F") >= 0.99)

    def test_growing_orbit(self):
        N = 2000
        prof = pair_profile(rolewicz_shift(2), basis_vector(N + 1, lp(2)), SeqVector.zero(lp(2)), N)
        small = [i for i, d in enumerate(GRID) if d <= 2]
        assert np.all(prof.values("F")[small] <= 0.01)

    def test_identical_vectors(self):
        x = basis_vector(3, lp(2))
        with pytest.raises(PreconditionError):
            pair_profile(rolewicz_shift(2), x, x, 100)

    def test_block_shape_banach(self):
        H = 100_000
        n = [4 ** k for k in range(1, 9) if 4 ** k + k <= H]
        l = [2 * 4 ** k for k in range(1, 9) if 2 * 4 ** k <= H]
        ln = np.zeros(H + 1)
        A = block_union([(s, k + 1) for k, s in enumerate(n, start=1)], H)
        ln[A.members] = -np.inf
        for k, s in enumerate(l, start=1):
            ln[s - k : s + 1] = k * k * math.log(2)
        prof = profile_from_orbit(OrbitRecord.from_log_norms(ln), (0.1, 1.0, 10.0), window_ladder=[5])
        assert prof.values("BF_lower")[1] == 0.0
        assert prof.values("BF_star")[1] == 1.0

    def test_chain_on_computed_profiles(self, rng):
        T = rolewicz_shift(2)
        for _ in range(10):
            x = SeqVector.from_values(lp(2), rng.normal(size=5), start=int(rng.integers(1, 3000)))
            prof = pair_profile(T, x, SeqVector.zero(lp(2)), 4000)
            vals = [prof.values(f) for f in ("BF_lower", "F", "F_star", "BF_star")]
            gaps = [prof.gaps(f) for f in ("BF_lower", "F", "F_star", "BF_star")]
            for (lo, glo), (hi, ghi) in zip(zip(vals, gaps), list(zip(vals, gaps))[1:]):
                assert np.all(lo <= hi + glo + ghi + 1e-12)
            for v in vals:
                assert np.all(np.diff(v) >= -1e-12)

    def test_csv_and_dict(self):
        prof = dc1_profile()
        lines = prof.to_csv().splitlines()
        assert lines[0] == "delta,F,F_star,BF,BF_star"
        assert len(lines) == len(GRID) + 1
        assert prof.to_dict()["tail_log_min"] is None


class TestClassifyPair:
    def test_dc1_shape(self):
        v = classify_pair(dc1_profile())
        assert v.flags >= {"DC1", "DC2", "DC2half", "RDC1", "RDC1plus", "RDC2", "LiYorkePair"}
        for f in v.flags:
            assert v.witnesses[f]["tau"] == 0.05

    def test_dead_pair_has_no_li_yorke(self):
        prof = pair_profile(cesaro_shift(0.4), basis_vector(8, lp(2)), SeqVector.zero(lp(2)), 20_000)
        v = classify_pair(prof)
        assert not v.flags

    def test_short_horizon_transient(self):
        # the floor n_min = H/100 is too short to see past a 7-step transient,
        # so the lower density looks bounded away from 1; documented limitation
        prof = pair_profile(cesaro_shift(0.4), basis_vector(8, lp(2)), SeqVector.zero(lp(2)), 2000)
        assert prof.values("F").min() < 0.9

    def test_near_zero_without_unbounded_part(self):
        v = classify_pair(near_zero_without_unbounded_profile())
        assert "RDC1plus" in v.flags and "RDC2" not in v.flags
        assert check_consistency(v, implication_lattice()) == []

    def test_eps_grid_must_lie_on_profile_grid(self):
        with pytest.raises(ConfigurationError):
            classify_pair(dc1_profile(), eps_search_grid=[0.5])

    def test_eps_grid_restricts_search(self):
        v = classify_pair(dc1_profile(), eps_search_grid=[1e6])
        assert "DC1" not in v.flags

    def test_bad_tau(self):
        with pytest.raises(ConfigurationError):
            classify_pair(dc1_profile(), tau=0.6)

    def test_rdc1_mixes_banach_lower_with_upper(self):
        # F* bounded away from 1 still allows RDC1 but not RDC1plus
        prof = ChaosProfile.from_values(GRID, ZEROS, [0.5] * len(GRID), ZEROS, [0.5] * len(GRID))
        v = classify_pair(prof)
        assert "RDC1" in v.flags and "RDC1plus" not in v.flags

    def test_swap_invariance(self, rng):
        T = rolewicz_shift(2)
        for _ in range(5):
            x = SeqVector.from_values(lp(2), rng.normal(size=4), start=int(rng.integers(1, 3000)))
            y = SeqVector.from_values(lp(2), rng.normal(size=4), start=int(rng.integers(1, 3000)))
            a = classify_pair(pair_profile(T, x, y, 4000))
            b = classify_pair(pair_profile(T, y, x, 4000))
            assert a.flags == b.flags

    @given(chain_profiles())
    def test_definitional_nesting(self, prof):
        f = classify_pair(prof).flags
        if "DC1" in f:
            assert {"DC2", "RDC1plus"} <= f
        if "DC2" in f:
            assert "DC2half" in f
        if "RDC1plus" in f:
            assert "RDC1" in f


class TestClassifyVector:
    def test_constructed_rolewicz_vector(self):
        T = rolewicz_shift(2)
        data = select_manifold_data(T, 10_000)
        data = data.with_schedule(data.m)
        v = build_x_beta(data, {data.m})
        out = classify_vector(T, v, 10_000, VectorParams(high_target=max(2.0, data.m - 1.0)))
        assert "RDC1plus" in out.flags
        assert check_consistency(out, implication_lattice(True)) == []

    def test_cesaro_finite_support(self, rng):
        x = SeqVector.from_values(lp(2), rng.normal(size=50))
        assert classify_vector(cesaro_shift(0.4), x, 2000).flags == frozenset()

    def test_contraction(self, rng):
        x = SeqVector.from_values(lp(2), rng.normal(size=50), start=100)
        assert classify_vector(rolewicz_shift(0.5), x, 2000).flags == frozenset()

    def test_zero_vector(self):
        with pytest.raises(PreconditionError):
            classify_vector(rolewicz_shift(2), SeqVector.zero(lp(2)), 100)

    @given(st.lists(st.floats(-60, 60), min_size=200, max_size=400))
    def test_rdc1plus_implies_rdc1(self, logs):
        out = classify_orbit(OrbitRecord.from_log_norms(logs), VectorParams(delta_ladder=(1e-1,), M_ladder=(10.0,)))
        if "RDC1plus" in out.flags:
            assert "RDC1" in out.flags
        assert out.assumptions["source"] == "vector"


class TestLattice:
    def test_reachable_from_dc1(self):
        assert reachable(implication_lattice(), "DC1") >= {"RDC1plus", "RDC1", "RDC2", "LiYorkePair"}

    def test_dense_rdc2_implies_dc1(self):
        g = implication_lattice(dense_X0=True)
        assert "DC1" in reachable(g, "RDC2")
        assert "DC1" not in reachable(implication_lattice(), "RDC2")

    def test_acyclic_before_merging(self):
        assert nx.is_directed_acyclic_graph(implication_lattice())
        assert equivalence_classes(implication_lattice()) == []

    def test_merged_classes(self):
        classes = [c & set(CHAOS_CLASSES) for c in equivalence_classes(implication_lattice(True))]
        assert {"DC1", "RDC2"} <= next(c for c in classes if "DC1" in c)
        assert {"LiYorkePair", "RDC1plus"} <= next(c for c in classes if "LiYorkePair" in c)

    def test_labels_are_inert(self):
        g = implication_lattice()
        assert all(g.nodes[n]["kind"] == "label" for n in DYNAMICS_LABELS)
        assert g.has_edge("FHC", "DC1") and g.has_edge("H", "LiYorkePair")

    def test_base_edges_present(self):
        g = implication_lattice()
        for e in [
            ("DC1", "RDC1plus"), ("DC1", "DC2half"), ("DC2half", "RDC1"), ("DC2half", "RDC2"),
            ("RDC1plus", "RDC1"), ("RDC1", "LiYorkePair"), ("RDC2", "LiYorkePair"), ("MeanLiYorkePair", "RDC1plus"),
        ]:
            assert g.has_edge(*e)


class TestConsistency:
    def test_dc1_alone(self):
        missing = {v.missing for v in check_consistency(verdict("DC1"), implication_lattice())}
        assert "RDC2" in missing

    def test_rdc1plus_chain(self):
        assert check_consistency(verdict("RDC1plus", "RDC1", "LiYorkePair"), implication_lattice()) == []

    def test_merged_lattice_is_stricter(self):
        v = verdict("RDC1plus", "RDC1", "LiYorkePair")
        assert check_consistency(v, implication_lattice(True)) == []
        assert check_consistency(verdict("RDC2", "LiYorkePair"), implication_lattice(True)) != []

    def test_violation_text(self):
        v = check_consistency(verdict("RDC1"), implication_lattice())[0]
        assert str(v) == "RDC1 implies LiYorkePair, which is not flagged"


class TestCTBound:
    def test_dead_orbit_is_degenerate(self):
        b = c_T_lower_bound(rolewicz_shift(2), [basis_vector(3, lp(2))], 0.5, 1000)
        assert b.value == pytest.approx(1.0, abs=0.01)
        assert b.degenerate == (0,) and b.label == "heuristic"

    def test_growing_orbit(self):
        N = 2000
        b = c_T_lower_bound(rolewicz_shift(2), [basis_vector(N + 1, lp(2))], 0.5, N)
        assert b.value <= 0.01 and b.degenerate == ()

    def test_empty_visits(self):
        N = 500
        b = c_T_lower_bound(rolewicz_shift(2), [basis_vector(N + 1, lp(2))], 1e-3, N)
        assert b.value == 0.0

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            c_T_lower_bound(rolewicz_shift(2), [], 1.0, 100)
        with pytest.raises(ConfigurationError):
            c_T_lower_bound(rolewicz_shift(2), [basis_vector(3, lp(2))], 0.0, 100)
