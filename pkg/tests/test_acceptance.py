"""One test per acceptance criterion, each at its stated tolerance.

Every test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import json
import math
import time

import numpy as np
import pytest

from linchaos.chaoscls import VectorParams, classify_vector
from linchaos.constructions import (
    banach_visit_sets_from_irregular,
    build_x_beta,
    select_manifold_data,
    verify_manifold_vector,
)
from linchaos.errors import ConstructionFailed, PreconditionError
from linchaos.labcli import (
    EXPERIMENTS,
    brute_force_four,
    chain_violations,
    main,
    random_index_set,
    structured_sets,
    synthetic_irregular_orbit,
)
from linchaos.natdensity import banach_upper_density, default_n_min, default_window_ladder, four_densities
from linchaos.orbitstats import dist_unbounded_probe
from linchaos.seqspace import SeqVector, basis_vector, lp
from linchaos.shiftops import (
    abs_cesaro_bounded_probe,
    basis_samples,
    cesaro_shift,
    orbit,
    rolewicz_shift,
    weighted_shift,
)

pytestmark = pytest.mark.acceptance

SEED = 20261016
KINDS = ("banach_lower", "lower", "upper", "banach_upper")


@pytest.fixture(scope="module")
def repro_runs(tmp_path_factory):
    """`repro all` twice with the same seed, timed."""
    root = tmp_path_factory.mktemp("repro")
    runs = []
    for name in ("first", "second"):
        t0 = time.perf_counter()
        code = main(["repro", "all", "--seed", str(SEED), "--out", str(root / name)])
        runs.append((root / name, code, time.perf_counter() - t0))
    return runs


def test_1_density_oracles(criterion):
    H = 100_000
    n_min, ladder = default_n_min(H), default_window_ladder(H)
    t0 = time.perf_counter()
    sets = structured_sets(H)
    worst, worst_at = 0.0, None
    for name, A, analytic in sets:
        est = four_densities(A, n_min, ladder)
        oracle = brute_force_four(A, n_min, ladder)
        for i, kind in enumerate(KINDS):
            refs = [oracle[kind]] + ([analytic[i]] if analytic else [])
            for ref in refs:
                err = abs(est[kind].value - ref)
                if err > worst:
                    worst, worst_at = err, (name, kind)
    elapsed = time.perf_counter() - t0
    ok = len(sets) == 20 and worst <= 0.02 and elapsed < 10
    criterion(1, ok, f"{len(sets)} sets at H={H}, max |estimate - oracle| = {worst:.4g} at {worst_at}, {elapsed:.1f}s")
    assert len(sets) == 20
    assert worst <= 0.02
    assert elapsed < 10


def test_2_chain_inequality(criterion):
    rng = np.random.default_rng(SEED)
    bad = []
    for i in range(500):
        bad += [(i, *v) for v in chain_violations(random_index_set(rng))]
    criterion(2, not bad, f"500 seeded random sets, {len(bad)} chain violations")
    assert bad == []


def test_3_telescoping_oracle(criterion):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(100):
        size = int(rng.integers(10, 400))
        ws = rng.uniform(0.1, 4.0, size=size) * rng.choice([-1.0, 1.0], size=size)
        table = {k: float(ws[k - 2]) for k in range(2, size + 2)}
        rest = float(rng.uniform(0.5, 2.0))
        T = weighted_shift(table, rest=rest)
        n, k = int(rng.integers(1, size)), int(rng.integers(1, size))
        rec = orbit(T, basis_vector(n + k, lp(2)), n)
        expected = sum(math.log(abs(table.get(i, rest))) for i in range(k + 1, n + k + 1))
        worst = max(worst, abs(math.expm1(rec.log_norms[n] - expected)))
    T = cesaro_shift(0.4)
    worst_c = 0.0
    for n in range(1, 1001):
        rec = orbit(T, basis_vector(n + 1, lp(2)), n)
        worst_c = max(worst_c, abs(math.exp(rec.log_norms[n]) / (n + 1) ** 0.4 - 1))
    ok = worst <= 1e-9 and worst_c <= 1e-9
    criterion(3, ok, f"100 random tables max rel err {worst:.2e}; cesaro (n+1)^0.4 for n<=1000 max rel err {worst_c:.2e}")
    assert worst <= 1e-9
    assert worst_c <= 1e-9


def test_4_cesaro_example(criterion):
    T = cesaro_shift(0.4, p=2)
    N = 10_000
    samples = basis_samples(lp(2), range(1, 201))
    c1 = abs_cesaro_bounded_probe(T, N, samples).value
    c2 = abs_cesaro_bounded_probe(T, 2 * N, samples).value
    growth = c2 / c1 - 1
    a_ok = growth < 0.05
    unbounded = [int(x.indices[0]) for x in samples if dist_unbounded_probe(orbit(T, x, N)).flag]
    b_ok = not unbounded
    try:
        data = select_manifold_data(T, N)
        depth, c_source = data.m, "cesaro"
    except ConstructionFailed as err:
        depth, data, c_source = err.depth, None, "rolewicz"
    if data is not None:
        data = data.with_schedule(data.m)
        v, op = build_x_beta(data, {data.m}), T
        params = VectorParams(high_target=max(2.0, data.m - 1.0))
    else:
        op = rolewicz_shift(2)
        fb = select_manifold_data(op, N).with_schedule(4)
        v = build_x_beta(fb, {fb.m})
        params = VectorParams(high_target=max(2.0, fb.m - 1.0))
    flags = classify_vector(op, v, N, params).flags
    c_ok = "RDC1plus" in flags
    ok = a_ok and b_ok and c_ok
    criterion(
        4,
        ok,
        f"(a) Cesaro-mean sup {c1:.4f} -> {c2:.4f}, growth {growth:.2%}; "
        f"(b) dist. unbounded samples: {unbounded or 'none'}; "
        f"(c) cesaro construction depth {depth}, RDC1plus evidence on {c_source}: {c_ok}",
    )
    assert a_ok and b_ok and c_ok


def test_5_shift_dichotomy(criterion):
    N = 10_000
    t0 = time.perf_counter()
    half = rolewicz_shift(0.5)
    rng = np.random.default_rng(SEED)
    vectors = basis_samples(lp(2), range(1, 31)) + [
        SeqVector.from_values(lp(2), rng.normal(size=int(rng.integers(1, 200)))) for _ in range(10)
    ]
    half_flags = set()
    for x in vectors:
        half_flags |= classify_vector(half, x, N).flags
    try:
        select_manifold_data(half, N)
        half_constructed = True
    except PreconditionError:
        half_constructed = False
    T = rolewicz_shift(2)
    data = select_manifold_data(T, N)
    data = data.with_schedule(data.m)
    v = build_x_beta(data, {data.m})
    two_flags = classify_vector(T, v, N, VectorParams(high_target=max(2.0, data.m - 1.0))).flags
    elapsed = time.perf_counter() - t0
    half_ok = not half_flags & {"RDC1plus", "LiYorkePair"} and not half_constructed
    two_ok = "RDC1plus" in two_flags
    ok = half_ok and two_ok and elapsed < 30
    criterion(
        5,
        ok,
        f"c=1/2 over {len(vectors)} vectors: flags {sorted(half_flags) or 'none'}; "
        f"c=2 constructed vector: {sorted(two_flags)}; {elapsed:.1f}s",
    )
    assert half_ok and two_ok and elapsed < 30


def test_6_manifold_inequalities(criterion):
    T = rolewicz_shift(2)
    data = select_manifold_data(T, 10_000)
    m_ok = data.m >= 4
    data = data.with_schedule(1)
    v = build_x_beta(data, set(data.r))
    rep = verify_manifold_vector(T, v, data)
    parts, ok = [f"m={data.m}, N={list(data.N)}, schedule r={list(data.r)}"], m_ok
    for k in (1, 2):
        for kind in ("spike", "cesaro"):
            chk = rep.check(kind, k)
            if chk is None:
                last = data.r[-1]
                need = 1 + last + data.N_lower_bound(last + 1)
                parts.append(f"k={k} {kind}: r_{k} >= {need} but only m={data.m} vectors fit the horizon")
                ok = False
                continue
            good = bool(chk.passed) and chk.margin > 0 if kind == "cesaro" else bool(chk.passed) and chk.margin >= 0
            parts.append(f"k={k} {kind}: value {chk.value:.4g} vs {chk.threshold:.4g}, margin {chk.margin:.3g}")
            ok = ok and good
    criterion(6, ok, "; ".join(parts))
    assert m_ok
    for k in (1, 2):
        spike, ces = rep.check("spike", k), rep.check("cesaro", k)
        assert spike is not None and spike.passed and spike.margin >= 0
        assert ces is not None and ces.passed and ces.margin > 0


def test_7_visit_set_construction(criterion):
    rec = synthetic_irregular_orbit(100_000)
    sets = banach_visit_sets_from_irregular(rec, math.log(2.0))
    ladder = [10, 100, 1000]
    bA = banach_upper_density(sets.A, ladder).value
    bB = banach_upper_density(sets.B, ladder).value
    ok = sets.depth >= 3 and bA >= 0.9 and bB >= 0.9
    criterion(
        7,
        ok,
        f"depth {sets.depth}, Bd(A)={bA:.3f}, Bd(B)={bB:.3f} with windows {ladder} "
        f"(longest block has {sets.depth + 1} points)",
    )
    assert sets.depth >= 3
    assert bA >= 0.9 and bB >= 0.9


def test_8_lattice_audit(criterion, repro_runs):
    root, _, _ = repro_runs[0]
    violations, verdicts, merged_checked, dense_verdicts = [], 0, 0, 0
    for eid in EXPERIMENTS:
        report = json.loads((root / eid / "report.json").read_text())
        violations += report["consistency"]["violations"]
        verdicts += len(report["verdicts"])
        for name, v in report["verdicts"].items():
            if v["assumptions"].get("dense_X0"):
                dense_verdicts += 1
        merged_checked += sum("merged" in c["lattices"] for c in report["consistency"].get("checked", []))
    ok = not violations and merged_checked == dense_verdicts
    criterion(8, ok, f"{verdicts} verdicts audited ({merged_checked} also against the merged lattice), {len(violations)} violations")
    assert violations == []
    assert merged_checked == dense_verdicts


def test_9_repro_suite(criterion, repro_runs):
    (a, code_a, t_a), (b, code_b, t_b) = repro_runs
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file() and p.name != "timing.json")
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file() and p.name != "timing.json")
    differing = [str(p) for p in files_a if p not in files_b or (a / p).read_bytes() != (b / p).read_bytes()]
    same = files_a == files_b and not differing
    ok = code_a == 0 and code_b == 0 and max(t_a, t_b) < 300 and same
    criterion(
        9,
        ok,
        f"repro all: {t_a:.1f}s and {t_b:.1f}s, exit codes {code_a}/{code_b}, "
        f"{len(files_a)} files, {len(differing)} differ",
    )
    assert code_a == 0 and code_b == 0
    assert max(t_a, t_b) < 300
    assert same, differing
