import math
from dataclasses import replace

import numpy as np
import pytest

from linchaos.constructions import (
    BanachVisitSets,
    ManifoldData,
    banach_visit_sets_from_irregular,
    build_x_beta,
    dense_manifold_family,
    gamma_supports,
    schedule,
    select_manifold_data,
    verify_manifold_vector,
)
from linchaos.errors import ConfigurationError, ConstructionFailed, PreconditionError
from linchaos.labcli import synthetic_irregular_orbit
from linchaos.natdensity import banach_upper_density, block_union
from linchaos.orbitstats import dist_near_zero_probe, irregular_probe
from linchaos.seqspace import SeqVector, basis_vector, linear_combo, lp, norm
from linchaos.shiftops import OrbitRecord, cesaro_shift, orbit, rolewicz_shift

LN2 = math.log(2)


@pytest.fixture(scope="module")
def rolewicz_data():
    return select_manifold_data(rolewicz_shift(2), 10_000)


@pytest.fixture(scope="module")
def visit_sets():
    return banach_visit_sets_from_irregular(synthetic_irregular_orbit(100_000), LN2)


def toy_data(space=lp(1), count=40):
    """Disjoint unit vectors with N_i = i; the minimal schedule from 1 is (1, 4, 10, 22)."""
    return ManifoldData(
        space,
        2.0,
        tuple(basis_vector(i, space) for i in range(1, count + 1)),
        tuple(range(1, count + 1)),
        search_horizon=count,
    )


class TestBanachVisitSets:
    def test_depth(self, visit_sets):
        assert visit_sets.depth >= 3

    def test_spacing(self, visit_sets):
        for k in range(1, visit_sets.depth):
            assert visit_sets.n[k] - visit_sets.n[k - 1] > k * k
            assert visit_sets.l[k] - visit_sets.l[k - 1] > k * k

    def test_thresholds_certified(self, visit_sets):
        for k, (a, b) in enumerate(zip(visit_sets.log2_at_n, visit_sets.log2_at_l), start=1):
            assert a < -k * k and b > k * k

    def test_blocks(self, visit_sets):
        for k, (n, l) in enumerate(zip(visit_sets.n, visit_sets.l), start=1):
            assert all(i in visit_sets.A for i in range(n, n + k + 1))
            assert all(i in visit_sets.B for i in range(l - k, l + 1))

    def test_disjoint(self, visit_sets):
        assert visit_sets.A.intersection(visit_sets.B).members.size == 0

    def test_window_density_grows_with_depth(self, visit_sets):
        H = visit_sets.A.horizon
        prev_a = prev_b = 0.0
        for d in range(1, visit_sets.depth + 1):
            A = block_union([(n, k + 1) for k, n in enumerate(visit_sets.n[:d], start=1)], H)
            B = block_union([(l - k, k + 1) for k, l in enumerate(visit_sets.l[:d], start=1)], H)
            a = banach_upper_density(A, [10]).value
            b = banach_upper_density(B, [10]).value
            assert a >= prev_a and b >= prev_b
            prev_a, prev_b = a, b

    def test_guaranteed_bounds(self, visit_sets):
        rows = visit_sets.guaranteed_bounds()
        assert rows[1] == (2, 2 - 4, 4 - 2)

    def test_json_roundtrip(self, visit_sets):
        back = BanachVisitSets.from_json(visit_sets.to_json())
        assert back.n == visit_sets.n and back.A == visit_sets.A and back.B == visit_sets.B

    def test_power_bounded_orbit(self):
        rec = orbit(rolewicz_shift(0.5), basis_vector(500, lp(2)), 400)
        with pytest.raises(PreconditionError):
            banach_visit_sets_from_irregular(rec, math.log(0.5))

    def test_depth_one_only(self):
        l2 = np.zeros(1001)
        l2[100] = -1.5
        l2[300] = 1.5
        with pytest.raises(ConstructionFailed) as info:
            banach_visit_sets_from_irregular(OrbitRecord.from_log_norms(l2 * LN2), LN2)
        assert info.value.depth == 1
        assert info.value.partial.n == (100,)


class TestSelectManifoldData:
    def test_rolewicz_depth(self, rolewicz_data):
        assert rolewicz_data.m >= 4
        assert rolewicz_data.C == 2.0

    def test_unit_vectors(self, rolewicz_data):
        for x in rolewicz_data.vectors:
            assert norm(x).log_value == pytest.approx(0.0, abs=1e-12)

    def test_disjoint_supports(self, rolewicz_data):
        seen = set()
        for x in rolewicz_data.vectors:
            s = set(x.indices.tolist())
            assert not s & seen
            seen |= s

    def test_inequalities_independently(self, rolewicz_data):
        T, C = rolewicz_shift(2), rolewicz_data.C
        H = rolewicz_data.N[-1] + 1
        recs = [orbit(T, x, H) for x in rolewicz_data.vectors]
        for m in range(1, rolewicz_data.m + 1):
            N = rolewicz_data.N_of(m)
            assert recs[m - 1].log_norms[N] > math.log(m) + m * math.log(2 * C)
            for k in range(1, m):
                assert math.exp(recs[k - 1].log_norms[N]) < 1 / m
                assert math.exp(recs[k - 1].cesaro_log_means[N - 1]) < 1 / m

    def test_slack_positive(self, rolewicz_data):
        for s in rolewicz_data.slack:
            assert s["spike_log_ratio"] > 0
            assert s["norm_margin"] > 0 and s["cesaro_margin"] > 0

    def test_N_increasing(self, rolewicz_data):
        assert list(rolewicz_data.N) == sorted(set(rolewicz_data.N))

    def test_cesaro_small_depth(self):
        with pytest.raises(ConstructionFailed) as info:
            select_manifold_data(cesaro_shift(0.4), 10_000)
        assert info.value.depth <= 2
        assert info.value.partial.m == info.value.depth

    def test_power_bounded(self):
        with pytest.raises(PreconditionError):
            select_manifold_data(rolewicz_shift(0.5), 1000)

    def test_bilateral(self):
        with pytest.raises(PreconditionError):
            select_manifold_data(rolewicz_shift(2, lp(2, bilateral=True)), 1000)

    def test_gain(self):
        with pytest.raises(ConfigurationError):
            select_manifold_data(rolewicz_shift(2), 1000, gain=1.0)

    def test_json_roundtrip(self, rolewicz_data):
        back = ManifoldData.from_json(rolewicz_data.to_json())
        assert back.N == rolewicz_data.N and back.r == rolewicz_data.r
        assert [v.digest() for v in back.vectors] == [v.digest() for v in rolewicz_data.vectors]


class TestSchedule:
    def test_toy(self):
        assert schedule(toy_data(), 1) == (1, 4, 10, 22)

    def test_recurrence(self, rolewicz_data):
        for r1 in range(1, rolewicz_data.m + 1):
            r = schedule(rolewicz_data, r1)
            for a, b in zip(r, r[1:]):
                assert b >= 1 + a + rolewicz_data.N_of(a + 1)

    def test_start_outside(self, rolewicz_data):
        with pytest.raises(ConfigurationError):
            schedule(rolewicz_data, rolewicz_data.m + 1)


class TestBuildXBeta:
    def test_all_ones_disjoint(self):
        data = replace(toy_data(), r=(1, 3, 8))
        x = build_x_beta(data, {1, 3, 8})
        assert norm(x).value == pytest.approx(4.0 ** -1 + 4.0 ** -3 + 4.0 ** -8)

    def test_empty_pattern(self):
        data = toy_data().with_schedule(1)
        assert build_x_beta(data, [0, 0, 0]).support_size == 0
        assert build_x_beta(data, set()).is_zero()

    def test_single_term(self):
        data = toy_data().with_schedule(1)
        x = build_x_beta(data, [1])
        assert x.coeffs == pytest.approx({1: 0.25})
        # next scheduled position is r_2 = 4
        assert x.tail_bound == pytest.approx(2 * 4.0 ** -4)

    def test_outside_schedule(self):
        with pytest.raises(ConfigurationError):
            build_x_beta(toy_data().with_schedule(1), {2})

    @pytest.mark.parametrize("space", [lp(1), lp(2)], ids=str)
    def test_interval_nesting(self, space):
        data = toy_data(space).with_schedule(1)
        r = data.r
        intervals = []
        for J in range(1, len(r) + 1):
            x = build_x_beta(data, set(r[:J]))
            n = norm(x)
            intervals.append((n.log_value, n.log_upper))
        for (lo0, hi0), (lo1, hi1) in zip(intervals, intervals[1:]):
            assert lo0 <= lo1 + 1e-12 and hi1 <= hi0 + 1e-12
        ideal = math.log(sum(4.0 ** -i for i in r)) if space.p == 1 else None
        if ideal is not None:
            assert intervals[-1][0] <= ideal + 1e-12 <= intervals[-1][1] + 1e-12


class TestVerify:
    def test_rolewicz_first_position(self, rolewicz_data):
        data = rolewicz_data.with_schedule(1)
        v = build_x_beta(data, {1})
        rep = verify_manifold_vector(rolewicz_shift(2), v, data)
        assert rep.passed and not rep.vacuous
        assert rep.check("spike", 1).margin >= 0
        assert rep.check("cesaro", 1).margin > 0

    def test_rolewicz_last_spike(self, rolewicz_data):
        data = rolewicz_data.with_schedule(rolewicz_data.m)
        v = build_x_beta(data, {data.m})
        rep = verify_manifold_vector(rolewicz_shift(2), v, data)
        spike = rep.check("spike", 1)
        assert spike.passed and spike.value >= data.m - 1
        assert rep.check("cesaro", 1).passed is None

    def test_zero_vector_is_vacuous(self, rolewicz_data):
        rep = verify_manifold_vector(rolewicz_shift(2), SeqVector.zero(lp(2)), rolewicz_data)
        assert rep.vacuous and rep.passed

    def test_corrupted_data_fails(self, rolewicz_data):
        data = rolewicz_data.with_schedule(rolewicz_data.m)
        v = build_x_beta(data, {data.m})
        bad = replace(data, N=data.N[:-1] + (data.N[-1] - 10,))
        rep = verify_manifold_vector(rolewicz_shift(2), v, bad)
        assert not rep.passed
        assert rep.check("spike", 1).passed is False

    def test_scaled_vector(self, rolewicz_data):
        data = rolewicz_data.with_schedule(1)
        v = linear_combo([(0.5, build_x_beta(data, {1}))])
        assert verify_manifold_vector(rolewicz_shift(2), v, data, scale=0.5).passed


class TestDenseFamily:
    def test_count_zero(self, rolewicz_data):
        assert dense_manifold_family(rolewicz_data, [], 0) == []

    def test_single_member(self, rolewicz_data):
        T = rolewicz_shift(2)
        w = SeqVector.from_values(lp(2), [0.3, -0.2, 0.1])
        (y,) = dense_manifold_family(rolewicz_data, [w], 1)
        v = linear_combo([(1.0, y), (-1.0, w)])
        assert verify_manifold_vector(T, v, rolewicz_data, scale=1.0).passed

    def test_rolewicz_schedule_has_one_support(self, rolewicz_data):
        # with r_1 = 1 the next position needs N_2 + 2 selected vectors
        with pytest.raises(PreconditionError):
            dense_manifold_family(rolewicz_data, [basis_vector(1, lp(2))] * 2, 2)

    def test_disjoint_supports_on_longer_schedule(self):
        data = toy_data(lp(2)).with_schedule(1)
        sup = gamma_supports(data, 2)
        assert sup == ((1, 10), (4, 22))
        ws = [basis_vector(100, lp(2)), basis_vector(101, lp(2))]
        fam = dense_manifold_family(data, ws, 2)
        assert len(fam) == 2
        assert set(fam[0].coeffs) == {1, 10, 100}
        assert fam[1].coeffs[4] == pytest.approx(0.5 * 4.0 ** -4)

    def test_too_many(self):
        with pytest.raises(PreconditionError):
            gamma_supports(toy_data().with_schedule(1), 5)

    def test_constructed_member_is_irregular_and_near_zero(self, rolewicz_data):
        # scaled spike checks are the certificate; the orbit probes agree
        T = rolewicz_shift(2)
        data = rolewicz_data.with_schedule(rolewicz_data.m)
        v = build_x_beta(data, {data.m})
        rec = orbit(T, v, 10_000)
        assert irregular_probe(rec, 1e-6, data.m - 1.0)
        assert dist_near_zero_probe(rec)
