"""Command-line harness and experiment registry.

``linchaos repro <id>`` reruns one of the registered experiments and writes
``report.json`` (deterministic for a given config and seed), ``verdict.json``,
``orbit.csv`` / ``profile.csv`` where applicable and ``plotdata/*.csv`` with a
``plotdata/manifest.json`` describing the intended axes.  Wall-clock timings
go to ``timing.json`` so that reports can be compared byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import click
import numpy as np

from .chaoscls import (
    DEFAULT_DELTA_GRID,
    ChaosProfile,
    ChaosVerdict,
    VectorParams,
    check_consistency,
    classify_orbit,
    classify_pair,
    dense_X0_holds,
    equivalence_classes,
    implication_lattice,
    pair_profile,
)
from .constructions import (
    banach_visit_sets_from_irregular,
    build_x_beta,
    dense_manifold_family,
    select_manifold_data,
    verify_manifold_vector,
)
from .errors import ConfigurationError, ConstructionFailed, LinChaosError, PreconditionError
from .natdensity import (
    IndexSet,
    banach_upper_density,
    block_union,
    default_n_min,
    default_window_ladder,
    exact_four_densities_periodic,
    four_densities,
    periodic_set,
    square_blocks,
    squares,
)
from .orbitstats import dist_unbounded_probe
from .seqspace import SeqVector, SpaceTag, basis_vector, c0, lp
from .shiftops import (
    OrbitRecord,
    ShiftOperator,
    abs_cesaro_bounded_probe,
    basis_samples,
    cesaro_shift,
    orbit,
    power_bounded_probe,
    rolewicz_shift,
    weighted_shift,
)

HORIZON_GUARD = 2_000_000
DENSITY_EXPERIMENTS = ("density-suite", "prop1-construction")
ESTIMATORS = ("banach_lower", "lower", "upper", "banach_upper")


# -- configuration -----------------------------------------------------------

def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(float(t)) for t in text.replace(";", ",").split(",") if t.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    operator: str = ""
    vectors: str = ""
    horizon: int = 10_000
    delta_grid: tuple = DEFAULT_DELTA_GRID
    window_ladder: tuple = ()
    samples: int = 200
    tol: float = 0.05
    tau: float = 0.05
    margin: float = 0.05
    gain: float = 4.0
    count: int = 1
    chain_sets: int = 500
    seed: int = 20261016
    out: str = "runs"

    SCHEMA = {
        "experiment": str,
        "operator": str,
        "vectors": str,
        "horizon": lambda s: int(float(s)),
        "delta_grid": _floats,
        "window_ladder": _ints,
        "samples": int,
        "tol": float,
        "tau": float,
        "margin": float,
        "gain": float,
        "count": int,
        "chain_sets": int,
        "seed": int,
        "out": str,
    }

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}")
        for name in ("tol", "tau", "margin"):
            v = getattr(self, name)
            if not 0 < v < 0.5:
                raise ConfigurationError(f"{name}={v} must lie in (0, 0.5)")
        if self.experiment in DENSITY_EXPERIMENTS and self.horizon < 1000:
            raise ConfigurationError("density experiments need horizon >= 1000")
        if not 1 <= self.horizon <= HORIZON_GUARD:
            raise ConfigurationError(f"horizon {self.horizon} outside [1, {HORIZON_GUARD}]")
        if self.samples < 1 or self.count < 0 or self.chain_sets < 0:
            raise ConfigurationError("samples must be positive; count and chain_sets nonnegative")
        if not self.gain > 1:
            raise ConfigurationError("gain must exceed 1")
        return self

    @classmethod
    def parse(cls, text: str, **overrides) -> "ExperimentConfig":
        """Flat ``key = value`` lines; ``#`` starts a comment."""
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key] = val
        return cls.from_mapping({**values, **{k: v for k, v in overrides.items() if v is not None}})

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        if "experiment" not in values:
            raise ConfigurationError("config needs an experiment id")
        exp = str(values["experiment"])
        base = dict(EXPERIMENTS[exp].defaults) if exp in EXPERIMENTS else {}
        for key, val in values.items():
            if key not in cls.SCHEMA:
                raise ConfigurationError(f"unknown config key {key!r}")
            if isinstance(val, str):
                try:
                    val = cls.SCHEMA[key](val)
                except ValueError as err:
                    raise ConfigurationError(f"bad value for {key}: {err}") from None
            base[key] = val
        return cls(**base).validate()

    def echo(self) -> dict:
        """Everything but the output location, which must not leak into reports."""
        return {f.name: _plain(getattr(self, f.name)) for f in fields(self) if f.name != "out"}


# -- operator / vector / set specs ---------------------------------------------

def _kv(text: str) -> dict:
    out = {}
    for part in text.split(","):
        if part.strip():
            if "=" not in part:
                raise ConfigurationError(f"expected key=value, got {part!r}")
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _space(p: str | None) -> SpaceTag:
    if p is None:
        return lp(2.0)
    if p.lower() in ("c0", "inf", "sup"):
        return c0()
    return lp(float(p))


def parse_operator(spec: str) -> ShiftOperator:
    """``rolewicz:c=2``, ``cesaro:alpha=0.4,p=2`` or ``table:rest=1,w2=3,w5=0.5``."""
    kind, _, rest = spec.partition(":")
    try:
        args = _kv(rest)
        p = args.pop("p", None)
        if kind == "rolewicz":
            return rolewicz_shift(float(args.pop("c", 2.0)), _space(p))
        if kind == "cesaro":
            return cesaro_shift(float(args.pop("alpha", 0.4)), float(p or 2.0))
        if kind == "table":
            restw = float(args.pop("rest", 1.0))
            table = {int(k[1:]): float(v) for k, v in args.items() if k.startswith("w")}
            return weighted_shift(table, restw, _space(p), name=spec)
    except (ValueError, KeyError) as err:
        raise ConfigurationError(f"bad operator spec {spec!r}: {err}") from None
    raise ConfigurationError(f"unknown operator kind {kind!r} (rolewicz, cesaro, table)")


def parse_vectors(spec: str, space: SpaceTag) -> list[SeqVector]:
    """``e:5``, ``e:1-200`` or ``coeffs:1=0.5,3=-1``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "e":
            lo, _, hi = rest.partition("-")
            return [basis_vector(k, space) for k in range(int(lo), int(hi or lo) + 1)]
        if kind == "coeffs":
            return [SeqVector.from_dict(space, {int(k): float(v) for k, v in _kv(rest).items()})]
    except ValueError as err:
        raise ConfigurationError(f"bad vector spec {spec!r}: {err}") from None
    raise ConfigurationError(f"unknown vector spec {spec!r} (e:K, e:K1-K2, coeffs:i=v,...)")


def parse_set(spec: str, horizon: int) -> IndexSet:
    """``squares``, ``square-blocks``, ``periodic:0110`` or ``file:<path>``."""
    kind, _, rest = spec.partition(":")
    if kind == "squares":
        return squares(horizon)
    if kind == "square-blocks":
        return square_blocks(horizon)
    if kind == "periodic":
        return periodic_set(rest, horizon)
    if kind == "file":
        return IndexSet.parse(Path(rest).read_text(), horizon)
    raise ConfigurationError(f"unknown set spec {spec!r}")


# -- output plumbing -------------------------------------------------------------

def _plain(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_plain(v) for v in items]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else ("nan" if math.isnan(f) else ("inf" if f > 0 else "-inf"))
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


class ArtifactWriter:
    """Collects output files; writes them under ``root`` when one is given."""

    def __init__(self, root: Path | None = None):
        self.root = root
        self.files: dict[str, str] = {}
        self.plots: dict[str, dict] = {}

    def text(self, rel: str, content: str):
        self.files[rel] = content
        if self.root is not None:
            path = self.root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(content)

    def json(self, rel: str, obj):
        self.text(rel, dumps(obj))

    def table(self, rel: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_csv_cell(v) for v in row])
        self.text(rel, buf.getvalue())

    def series(self, name: str, x_label: str, y_labels, rows, title: str = ""):
        self.table(f"plotdata/{name}.csv", [x_label, *y_labels], rows)
        self.plots[name] = {"x": x_label, "y": list(y_labels), "title": title}

    def finish(self) -> list[str]:
        if self.plots:
            self.json("plotdata/manifest.json", self.plots)
        return sorted(self.files)


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


@dataclass
class RunReport:
    experiment: str
    config: dict
    verdicts: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    findings: dict = field(default_factory=dict)
    consistency: dict = field(default_factory=lambda: {"violations": []})
    artifacts: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def violations(self) -> list:
        return self.consistency["violations"]

    def to_dict(self) -> dict:
        # wall-clock is deliberately absent (kept in timing.json)
        return {
            "experiment": self.experiment,
            "config": self.config,
            "verdicts": self.verdicts,
            "tables": self.tables,
            "findings": self.findings,
            "consistency": self.consistency,
            "artifacts": self.artifacts,
        }


class Run:
    """Per-experiment context handed to experiment functions."""

    def __init__(self, cfg: ExperimentConfig, writer: ArtifactWriter):
        self.cfg = cfg
        self.out = writer
        self.report = RunReport(cfg.experiment, cfg.echo())
        self.lattices = {False: implication_lattice(False), True: implication_lattice(True)}

    def verdict(self, name: str, verdict: ChaosVerdict):
        """Record a verdict and audit it against the base lattice (and the merged one if dense X0 holds)."""
        entry = verdict.to_dict()
        self.report.verdicts[name] = entry
        checked = [False] + ([True] if verdict.assumptions.get("dense_X0") else [])
        for dense in checked:
            for v in check_consistency(verdict, self.lattices[dense]):
                self.report.violations.append(
                    {"verdict": name, "lattice": "merged" if dense else "base", "flag": v.flag, "missing": v.missing}
                )
        self.report.consistency.setdefault("checked", []).append(
            {"verdict": name, "lattices": ["merged" if d else "base" for d in checked]}
        )

    def orbit_csv(self, rec: OrbitRecord, rel: str = "orbit.csv"):
        self.out.text(rel, rec.to_csv())


# -- experiment registry ------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    id: str
    description: str
    func: Callable
    defaults: dict


EXPERIMENTS: dict[str, Experiment] = {}


def experiment(eid: str, description: str, **defaults):
    def deco(func):
        EXPERIMENTS[eid] = Experiment(eid, description, func, {"experiment": eid, **defaults})
        return func

    return deco


def list_experiments() -> list[tuple[str, str]]:
    return [(e.id, e.description) for e in EXPERIMENTS.values()]


def run(cfg: ExperimentConfig, out_dir: Path | None = None) -> RunReport:
    cfg = cfg.validate()
    writer = ArtifactWriter(out_dir)
    ctx = Run(cfg, writer)
    t0 = time.perf_counter()
    EXPERIMENTS[cfg.experiment].func(ctx)
    ctx.report.wall_clock = time.perf_counter() - t0
    ctx.out.json("verdict.json", ctx.report.verdicts)
    ctx.report.artifacts = sorted(set(writer.finish()) | {"report.json", "verdict.json"})
    writer.json("report.json", ctx.report.to_dict())
    if out_dir is not None:
        (out_dir / "timing.json").write_text(dumps({"wall_clock_seconds": ctx.report.wall_clock}))
    return ctx.report


def run_by_id(eid: str, out_dir: Path | None = None, **overrides) -> RunReport:
    if eid not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {eid!r}; see `linchaos list`")
    return run(ExperimentConfig.from_mapping({"experiment": eid, **overrides}), out_dir)


# -- density suite ------------------------------------------------------------------

def beatty_set(alpha: float, horizon: int) -> IndexSet:
    """``{floor(k alpha) : k >= 1}``, density ``1/alpha``."""
    k = np.arange(1, int(horizon / alpha) + 2)
    vals = np.floor(k * alpha).astype(np.int64)
    return IndexSet.from_members(vals[(vals >= 1) & (vals <= horizon)], horizon)


PERIODIC_PATTERNS = (
    "1", "10", "100", "110", "1011", "0001", "11110", "1000000",
    "1101001", "1010010001", "0111111111", "10000000000000000000",
)


def structured_sets(horizon: int) -> list[tuple[str, IndexSet, tuple | None]]:
    """Twenty structured sets with analytic limits where the horizon reaches them."""
    out = []
    for pat in PERIODIC_PATTERNS:
        out.append((f"periodic:{pat}", periodic_set(pat, horizon), exact_four_densities_periodic(pat, len(pat))))
    sb = square_blocks(horizon)
    sq = squares(horizon)
    k_max = int(round(horizon ** (1 / 3))) + 1
    out += [
        ("square-blocks", sb, None),
        ("squares", sq, None),
        ("square-blocks-complement", sb.complement(), None),
        ("squares-complement", sq.complement(), None),
        ("cube-blocks", block_union([(k**3, k * k + 1) for k in range(1, k_max)], horizon), None),
        ("power2-blocks", block_union([(2**k, k + 1) for k in range(1, 64) if 2**k <= horizon], horizon), None),
        ("first-half", IndexSet.from_members(np.arange(1, horizon // 2 + 1), horizon), None),
        ("beatty-sqrt2", beatty_set(math.sqrt(2.0), horizon), (1 / math.sqrt(2.0),) * 4),
    ]
    return out


def brute_force_four(A: IndexSet, n_min: int, ladder) -> dict:
    """Direct evaluation of the finite-horizon estimators (plain loop + convolution)."""
    mask = A.mask.astype(np.int64)
    count, lo, hi = 0, math.inf, -math.inf
    for n, bit in enumerate(mask.tolist(), 1):
        count += bit
        if n >= n_min:
            r = count / n
            lo = min(lo, r)
            hi = max(hi, r)
    b_up, b_lo = 1.0, 0.0
    for w in ladder:
        win = np.convolve(mask, np.ones(w, dtype=np.int64), mode="valid") / w
        b_up = min(b_up, float(win.max()))
        b_lo = max(b_lo, float(win.min()))
    return {"banach_lower": b_lo, "lower": lo, "upper": hi, "banach_upper": b_up}


def random_index_set(rng: np.random.Generator, horizon: int | None = None) -> IndexSet:
    """Stationary random sets: Bernoulli, two-state Markov runs, or noisy periodic."""
    H = int(horizon or rng.choice([10_000, 20_000, 50_000]))
    kind = int(rng.integers(3))
    if kind == 0:
        return IndexSet.from_mask(rng.random(H) < rng.uniform(0.02, 0.98))
    if kind == 1:
        a, b = rng.uniform(0.01, 0.3, 2)
        state = bool(rng.random() < 0.5)
        mask = np.empty(H, dtype=bool)
        pos = 0
        while pos < H:
            run = int(rng.geometric(b if state else a))
            mask[pos : pos + run] = state
            pos += run
            state = not state
        return IndexSet.from_mask(mask)
    period = int(rng.integers(1, 40))
    pattern = rng.random(period) < rng.random()
    return IndexSet.from_mask(np.tile(pattern, H // period + 1)[:H] ^ (rng.random(H) < 0.02))


def chain_violations(A: IndexSet) -> list[tuple[str, str, float, float]]:
    d = four_densities(A)
    bad = []
    for x, y in zip(ESTIMATORS, ESTIMATORS[1:]):
        if d[x].value > d[y].value + d[x].convergence_gap + d[y].convergence_gap:
            bad.append((x, y, d[x].value, d[y].value))
    return bad


@experiment("density-suite", "Four density estimators against oracles on 20 structured sets, plus the chain inequality on seeded random sets", horizon=100_000)
def _density_suite(ctx: Run):
    cfg = ctx.cfg
    H = cfg.horizon
    ladder = list(cfg.window_ladder) or default_window_ladder(H)
    n_min = default_n_min(H)
    rows, worst = [], 0.0
    for name, A, analytic in structured_sets(H):
        est = four_densities(A, n_min, ladder)
        brute = brute_force_four(A, n_min, ladder)
        for i, key in enumerate(ESTIMATORS):
            err = abs(est[key].value - brute[key])
            worst = max(worst, err)
            rows.append([name, key, est[key].value, brute[key], err, analytic[i] if analytic else math.nan, est[key].convergence_gap])
    ctx.out.table(
        "densities.csv",
        ["set", "estimator", "estimate", "brute_force", "abs_error", "analytic_limit", "convergence_gap"],
        rows,
    )
    rng = np.random.default_rng(cfg.seed)
    bad = []
    for i in range(cfg.chain_sets):
        A = random_index_set(rng)
        bad += [(i, A.horizon, *v) for v in chain_violations(A)]
    sb = square_blocks(H)
    ladder_rows = []
    for key, est in four_densities(sb, n_min, ladder).items():
        ladder_rows += [[key, scale, value] for scale, value in est.ladder]
    ctx.out.table("plotdata/square_blocks_ladder.csv", ["estimator", "scale", "value"], ladder_rows)
    ctx.out.plots["square_blocks_ladder"] = {"x": "scale", "y": ["value"], "group": "estimator", "title": "square blocks: estimator ladders"}
    ctx.report.tables["densities"] = {"rows": len(rows), "file": "densities.csv"}
    ctx.report.findings.update(
        oracle_max_abs_error=worst,
        oracle_within_0_02=worst <= 0.02,
        n_min=n_min,
        window_ladder=ladder,
        chain_sets=cfg.chain_sets,
        chain_violations=len(bad),
        chain_violation_examples=bad[:5],
    )


# -- Cesaro example -------------------------------------------------------------------

def _constructed_vector(T: ShiftOperator, horizon: int, gain: float):
    """``x_beta`` on the last selected spike (the one inside the second half of the horizon)."""
    data = select_manifold_data(T, horizon, gain=gain)
    data = data.with_schedule(data.m)
    v = build_x_beta(data, {data.m})
    params = VectorParams(high_target=max(2.0, data.m - 1.0))
    return data, v, params


@experiment("cesaro-example", "Cesaro-weighted shift: absolutely Cesaro bounded, never distributionally unbounded; constructed vector", operator="cesaro:alpha=0.4,p=2", vectors="e:1-200", horizon=10_000)
def _cesaro_example(ctx: Run):
    cfg = ctx.cfg
    T = parse_operator(cfg.operator)
    N = cfg.horizon
    samples = parse_vectors(cfg.vectors, T.space)
    c1 = abs_cesaro_bounded_probe(T, N, samples)
    c2 = abs_cesaro_bounded_probe(T, 2 * N, samples)
    growth = c2.value / c1.value - 1.0
    unbounded, flag_union = [], set()
    for x in samples:
        rec = orbit(T, x, N)
        if dist_unbounded_probe(rec, tol=cfg.tol).flag:
            unbounded.append(int(x.indices[0]))
        verdict = classify_orbit(rec, VectorParams(tol=cfg.tol), dense_X0_holds(T))
        flag_union |= verdict.flags
        ctx.verdict(f"sample:{x.indices.tolist()}", verdict)
    last = orbit(T, samples[-1], N)
    ctx.orbit_csv(last)
    ctx.out.series(
        "cesaro_means",
        "N",
        ["log_mean"],
        [[n + 1, float(v)] for n, v in enumerate(last.cesaro_log_means) if n < 2 * samples[-1].max_index],
        "Cesaro means of the last sample",
    )

    construction = {"operator": T.name}
    try:
        data, v, params = _constructed_vector(T, N, cfg.gain)
        verdict = classify_orbit(orbit(T, v, N), params, dense_X0_holds(T))
        ctx.verdict("constructed", verdict)
        construction.update(depth=data.m, N=list(data.N), flags=sorted(verdict.flags), fallback=None)
    except ConstructionFailed as err:
        construction.update(depth=err.depth, N=list(err.partial.N) if err.partial else [], reason=str(err))
        R = rolewicz_shift(2.0, T.space)
        data, v, params = _constructed_vector(R, N, cfg.gain)
        rec = orbit(R, v, N)
        verdict = classify_orbit(rec, params, dense_X0_holds(R))
        ctx.verdict("fallback:rolewicz", verdict)
        ctx.orbit_csv(rec, "fallback_orbit.csv")
        construction["fallback"] = {"operator": R.name, "depth": data.m, "N": list(data.N), "flags": sorted(verdict.flags)}
    ctx.report.findings.update(
        abs_cesaro_bound={"N": c1.to_dict(), "2N": c2.to_dict(), "relative_growth": growth, "below_5_percent": growth < 0.05},
        dist_unbounded_samples=unbounded,
        sample_flag_union=sorted(flag_union),
        construction=construction,
    )


# -- Rolewicz manifold ----------------------------------------------------------------

@experiment("rolewicz-manifold", "Manifold data for the Rolewicz operator: selection slack and the two certified inequalities", operator="rolewicz:c=2", horizon=10_000)
def _rolewicz_manifold(ctx: Run):
    cfg = ctx.cfg
    T = parse_operator(cfg.operator)
    N = cfg.horizon
    data = select_manifold_data(T, N, gain=cfg.gain, r1=1)
    ctx.out.json("manifold_data.json", data.to_json())
    ctx.out.table(
        "slack.csv",
        ["m", "N", "spike_log_ratio", "norm_margin", "cesaro_margin"],
        [[s["m"], s["N"], s["spike_log_ratio"], s["norm_margin"], s["cesaro_margin"]] for s in data.slack],
    )
    v = build_x_beta(data, set(data.r))
    report = verify_manifold_vector(T, v, data)
    ks = []
    for k in (1, 2):
        spike, mean = report.check("spike", k), report.check("cesaro", k)
        if spike is None:
            # r_k is not in the schedule: r_k >= 1 + r_{k-1} + N_{r_{k-1}+1}
            prev = data.r[-1]
            ks.append({"k": k, "status": "unreachable", "r_k_lower_bound": 1 + prev + data.N_lower_bound(prev + 1), "selected_m": data.m})
            continue
        ks.append({"k": k, "status": "checked", "spike": spike.to_dict(), "cesaro": mean.to_dict(),
                   "passed": bool(spike.passed and mean.passed)})
    ctx.out.json("verification.json", report.to_dict())

    data_m, vm, params = _constructed_vector(T, N, cfg.gain)
    rec = orbit(T, vm, N)
    ctx.orbit_csv(rec)
    ctx.out.series(
        "constructed_orbit",
        "n",
        ["certified_upper", "certified_lower"],
        [[n, float(u), float(l)] for n, (u, l) in enumerate(zip(rec.certified_upper(), rec.certified_lower())) if n % 10 == 0 or abs(n - data_m.N[-1]) < 50],
        "log-norm of the constructed vector's orbit",
    )
    ctx.verdict("constructed", classify_orbit(rec, params, dense_X0_holds(T)))
    family = dense_manifold_family(data_m, [basis_vector(1, T.space).scaled(0.5)], cfg.count) if cfg.count else []
    fam_checks = []
    for n, y in enumerate(family, 1):
        frec = orbit(T, y, N)
        fv = classify_orbit(frec, params, dense_X0_holds(T))
        ctx.verdict(f"family:y{n}", fv)
        fam_checks.append({"n": n, "flags": sorted(fv.flags)})
    ctx.report.findings.update(
        m=data.m,
        N=list(data.N),
        C=data.C,
        gain=data.gain,
        schedule=list(data.r),
        slack_positive=all(s["spike_log_ratio"] > 0 and s["norm_margin"] > 0 and s["cesaro_margin"] > 0 for s in data.slack),
        checks=ks,
        family=fam_checks,
    )


# -- shift dichotomy --------------------------------------------------------------------

@experiment("shift-dichotomy", "Rolewicz c=1/2 (power bounded) against c=2 (not power bounded)", horizon=10_000, samples=20)
def _shift_dichotomy(ctx: Run):
    cfg = ctx.cfg
    N = cfg.horizon
    rng = np.random.default_rng(cfg.seed)
    findings = {}
    for c in (0.5, 2.0):
        T = rolewicz_shift(c)
        probe_samples = basis_samples(T.space, [1, 10, 100, N + 1])
        pb = power_bounded_probe(T, N, probe_samples)
        entry = {"operator": T.name, "power_bound_probe": pb.to_dict()}
        try:
            data, v, params = _constructed_vector(T, N, cfg.gain)
            verdict = classify_orbit(orbit(T, v, N), params, dense_X0_holds(T))
            ctx.verdict(f"c={c:g}:constructed", verdict)
            entry.update(constructed=True, flags=sorted(verdict.flags), depth=data.m)
        except PreconditionError as err:
            entry.update(constructed=False, reason=str(err))
            flags = set()
            vecs = basis_samples(T.space, range(1, cfg.samples + 1))
            for j in range(cfg.samples):
                size = int(rng.integers(1, 6))
                idx = rng.choice(np.arange(1, 200), size=size, replace=False)
                vecs.append(SeqVector.from_dict(T.space, dict(zip(idx.tolist(), rng.normal(size=size).tolist()))))
            for j, x in enumerate(vecs):
                verdict = classify_orbit(orbit(T, x, N), VectorParams(tol=cfg.tol), dense_X0_holds(T))
                flags |= verdict.flags
                ctx.verdict(f"c={c:g}:vector{j}", verdict)
            entry.update(vectors_tested=len(vecs), flags=sorted(flags))
        findings[f"c={c:g}"] = entry
    ctx.report.findings.update(findings)


# -- block-union visit sets --------------------------------------------------------------

def synthetic_irregular_orbit(horizon: int) -> OrbitRecord:
    """log2-norms ``-k^2`` at ``4^k`` and ``+k^2`` at ``2 4^k``, zero elsewhere."""
    l2 = np.zeros(horizon + 1)
    k = 1
    while 4**k <= horizon:
        l2[4**k] = -k * k
        if 2 * 4**k <= horizon:
            l2[2 * 4**k] = k * k
        k += 1
    return OrbitRecord.from_log_norms(l2 * math.log(2.0))


@experiment("prop1-construction", "Block unions A, B from an irregular orbit and their Banach upper densities", horizon=100_000, window_ladder=(10, 100, 1000))
def _visit_sets(ctx: Run):
    cfg = ctx.cfg
    rec = synthetic_irregular_orbit(cfg.horizon)
    sets = banach_visit_sets_from_irregular(rec, math.log(2.0))
    ctx.out.json("visit_sets.json", sets.to_json())
    ctx.out.text("A.runs", sets.A.to_runs() + "\n")
    ctx.out.text("B.runs", sets.B.to_runs() + "\n")
    ladder = list(cfg.window_ladder)
    dens = {}
    for name, S in (("A", sets.A), ("B", sets.B)):
        up = banach_upper_density(S, ladder)
        dens[name] = {"banach_upper": up.to_dict(), "banach_upper_w10": banach_upper_density(S, [10]).value}
    ctx.out.series(
        "window_ladder",
        "window",
        ["A", "B"],
        [[w, a, b] for (w, a), (_, b) in zip(banach_upper_density(sets.A, ladder).ladder, banach_upper_density(sets.B, ladder).ladder)],
        "running Banach upper density of A and B",
    )
    ctx.report.findings.update(
        depth=sets.depth,
        n=list(sets.n),
        l=list(sets.l),
        window_ladder=ladder,
        densities=dens,
        disjoint=not bool(np.any(sets.A.mask & sets.B.mask)),
        # longest block at depth k has k+1 points, so a window of w sees at most (k+1)/w
        max_block=sets.depth + 1,
    )


# -- lattice audit -------------------------------------------------------------------------

def _synthetic_profiles(grid):
    g = np.asarray(grid)
    one, zero = np.ones(g.size), np.zeros(g.size)
    step = (g > 1.0).astype(float)
    return {
        "dc1-shape": ChaosProfile.from_values(g, step, one, step, one),
        "rdc1plus-only-shape": ChaosProfile.from_values(g, one, one, (g >= 1e-2).astype(float), one),
        "dc2half-shape": ChaosProfile.from_values(g, 0.3 * one, 0.6 * one, zero, one),
        "null-shape": ChaosProfile.from_values(g, zero, zero, zero, zero),
    }


@experiment("lattice-audit", "Implication lattice structure and consistency of pair verdicts", horizon=10_000)
def _lattice_audit(ctx: Run):
    cfg = ctx.cfg
    grid = cfg.delta_grid
    for dense, label in ((False, "base"), (True, "merged")):
        g = ctx.lattices[dense]
        ctx.out.table(f"lattice_{label}.csv", ["from", "to", "source"], sorted((u, v, d["source"]) for u, v, d in g.edges(data=True)))
    import networkx as nx

    base_acyclic = nx.is_directed_acyclic_graph(ctx.lattices[False])
    merged = [sorted(c) for c in equivalence_classes(ctx.lattices[True])]
    for name, prof in _synthetic_profiles(grid).items():
        ctx.verdict(f"synthetic:{name}", classify_pair(prof, tau=cfg.tau, margin=cfg.margin))
    pairs = [
        ("cesaro:e5-0", parse_operator("cesaro:alpha=0.4,p=2"), basis_vector(5, lp(2.0))),
        ("rolewicz:eN1-0", rolewicz_shift(2.0), basis_vector(cfg.horizon + 1, lp(2.0))),
        # supports stay far below n_min: a pre-asymptotic stretch longer than
        # about tau * n_min would drag the lower density down
        ("rolewicz-half:e5-0", rolewicz_shift(0.5), basis_vector(5, lp(2.0))),
    ]
    data, v, _ = _constructed_vector(rolewicz_shift(2.0), cfg.horizon, cfg.gain)
    pairs.append(("rolewicz:xbeta-0", rolewicz_shift(2.0), v))
    profiles_out = {}
    for name, T, x in pairs:
        prof = pair_profile(T, x, SeqVector.zero(T.space), cfg.horizon, grid)
        verdict = classify_pair(prof, tau=cfg.tau, margin=cfg.margin, dense_X0=dense_X0_holds(T))
        ctx.verdict(f"pair:{name}", verdict)
        ctx.out.text(f"profiles/{name.replace(':', '_')}.csv", prof.to_csv())
        profiles_out[name] = sorted(verdict.flags)
        if name == "rolewicz:xbeta-0":
            ctx.out.text("profile.csv", prof.to_csv())
    ctx.report.findings.update(
        base_acyclic=base_acyclic,
        merged_equivalence_classes=merged,
        pair_flags=profiles_out,
    )


# -- CLI ---------------------------------------------------------------------------------

def _emit(obj, as_json: bool, human: Callable[[], None]):
    if as_json:
        click.echo(dumps(obj), nl=False)
    else:
        human()


def _exit_for(violations) -> None:
    if violations:
        raise SystemExit(2)


@click.group()
def cli():
    """Finite-horizon experiments on densities, weighted shifts and reiterative distributional chaos."""


@cli.command("list")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def list_cmd(as_json):
    """List the registered experiments."""
    items = list_experiments()
    _emit([{"id": i, "description": d} for i, d in items], as_json,
          lambda: [click.echo(f"{i:20s} {d}") for i, d in items])


@cli.command()
@click.option("--set", "set_spec", required=True, help="squares | square-blocks | periodic:0110 | file:<path>")
@click.option("--horizon", type=int, default=100_000, show_default=True)
@click.option("--n-min", type=int, default=None, help="Prefix floor (default horizon/100).")
@click.option("--windows", default=None, help="Comma-separated window ladder.")
@click.option("--json", "as_json", is_flag=True)
def density(set_spec, horizon, n_min, windows, as_json):
    """Four density estimates of an index set."""
    A = parse_set(set_spec, horizon)
    d = four_densities(A, n_min, list(_ints(windows)) if windows else None)
    out = {k: v.to_dict() for k, v in d.items()}
    _emit(out, as_json, lambda: [click.echo(f"{k:13s} {v.value:.6f}  (gap {v.convergence_gap:.2e})") for k, v in d.items()])


@cli.command("orbit")
@click.option("--operator", "op_spec", required=True, help="rolewicz:c=2 | cesaro:alpha=0.4,p=2 | table:rest=1,w2=3")
@click.option("--vector", "vec_spec", required=True, help="e:K | coeffs:i=v,...")
@click.option("--horizon", type=int, default=1000, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--json", "as_json", is_flag=True)
def orbit_cmd(op_spec, vec_spec, horizon, out_dir, as_json):
    """Certified log-norm trajectory of one vector."""
    T = parse_operator(op_spec)
    x = parse_vectors(vec_spec, T.space)[0]
    rec = orbit(T, x, horizon)
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "orbit.csv").write_text(rec.to_csv())
    summary = {
        "operator": T.name,
        "vector": x.digest(),
        "horizon": horizon,
        "final_log_norm": float(rec.log_norms[-1]),
        "max_log_norm": float(rec.log_norms.max()),
        "argmax": int(rec.log_norms.argmax()),
        "exact": rec.is_exact(),
    }
    _emit(summary, as_json, lambda: [click.echo(f"{k}: {v}") for k, v in summary.items()])


@cli.command()
@click.option("--operator", "op_spec", required=True)
@click.option("--vector", "vec_spec", required=True, help="e:K | coeffs:i=v,... | constructed")
@click.option("--pair-with", "pair_spec", default=None, help="Second vector; classifies the pair instead.")
@click.option("--horizon", type=int, default=10_000, show_default=True)
@click.option("--low", type=float, default=1e-6, show_default=True)
@click.option("--high", type=float, default=None, help="Rise threshold (default 1e6, or the construction's scale).")
@click.option("--gain", type=float, default=4.0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--json", "as_json", is_flag=True)
def classify(op_spec, vec_spec, pair_spec, horizon, low, high, gain, out_dir, as_json):
    """Chaos verdict for a vector (or a pair) with a lattice audit; exit 2 on inconsistency."""
    T = parse_operator(op_spec)
    params = VectorParams(low_target=low)
    if vec_spec == "constructed":
        _, x, params = _constructed_vector(T, horizon, gain)
        params = replace(params, low_target=low)
    else:
        x = parse_vectors(vec_spec, T.space)[0]
    if high is not None:
        params = replace(params, high_target=high)
    dense = dense_X0_holds(T)
    profile = None
    if pair_spec:
        y = parse_vectors(pair_spec, T.space)[0]
        profile = pair_profile(T, x, y, horizon)
        verdict = classify_pair(profile, dense_X0=dense)
    else:
        if x.is_zero():
            raise PreconditionError("cannot classify the zero vector")
        rec = orbit(T, x, horizon)
        verdict = classify_orbit(rec, params, dense)
    violations = [str(v) for d in ([False, True] if dense else [False]) for v in check_consistency(verdict, implication_lattice(d))]
    out = {"verdict": verdict.to_dict(), "violations": violations}
    if out_dir:
        p = Path(out_dir)
        p.mkdir(parents=True, exist_ok=True)
        (p / "verdict.json").write_text(dumps(out))
        if profile is not None:
            (p / "profile.csv").write_text(profile.to_csv())
    _emit(out, as_json, lambda: (click.echo("flags: " + (", ".join(sorted(verdict.flags)) or "(none)")),
                                 [click.echo(f"violation: {v}") for v in violations]))
    _exit_for(violations)


@cli.command()
@click.option("--operator", "op_spec", default="rolewicz:c=2", show_default=True)
@click.option("--kind", type=click.Choice(["manifold", "visit-sets"]), default="manifold", show_default=True)
@click.option("--vector", "vec_spec", default=None, help="Vector whose orbit feeds the visit-set construction.")
@click.option("--horizon", type=int, default=10_000, show_default=True)
@click.option("--gain", type=float, default=4.0, show_default=True)
@click.option("--r1", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--json", "as_json", is_flag=True)
def construct(op_spec, kind, vec_spec, horizon, gain, r1, out_dir, as_json):
    """Run one of the two constructions and print what it certified."""
    T = parse_operator(op_spec)
    if kind == "manifold":
        data = select_manifold_data(T, horizon, gain=gain, r1=r1)
        v = build_x_beta(data, set(data.r))
        result = {"data": data.to_json(), "verification": verify_manifold_vector(T, v, data).to_dict()}
        human = lambda: click.echo(f"m={data.m} N={list(data.N)} schedule={list(data.r)}")  # noqa: E731
    else:
        if not vec_spec:
            raise ConfigurationError("--vector is required for visit-sets")
        x = parse_vectors(vec_spec, T.space)[0]
        sets = banach_visit_sets_from_irregular(orbit(T, x, horizon), T.log_norm_bound)
        result = sets.to_json()
        human = lambda: click.echo(f"depth={sets.depth} n={list(sets.n)} l={list(sets.l)}")  # noqa: E731
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / f"{kind}.json").write_text(dumps(result))
    _emit(result, as_json, human)


@cli.command()
@click.argument("experiment_id")
@click.option("--config", "config_path", type=click.Path(dir_okay=False, exists=True), default=None)
@click.option("--horizon", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="runs", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def repro(experiment_id, config_path, horizon, seed, out_dir, as_json):
    """Rerun a registered experiment (or `all`); exit 2 on lattice violations."""
    ids = [e for e in EXPERIMENTS] if experiment_id == "all" else [experiment_id]
    text = Path(config_path).read_text() if config_path else ""
    bad = []
    summaries = {}
    for eid in ids:
        if eid not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {eid!r}; see `linchaos list`")
        cfg = ExperimentConfig.parse(text + f"\nexperiment = {eid}\n", horizon=horizon, seed=seed)
        report = run(cfg, Path(out_dir) / eid)
        bad += report.violations
        summaries[eid] = {"findings": report.findings, "violations": report.violations}
        if not as_json:
            click.echo(f"{eid}: {len(report.verdicts)} verdicts, {len(report.violations)} violations, {report.wall_clock:.1f}s -> {Path(out_dir) / eid}")
    if as_json:
        click.echo(dumps(summaries), nl=False)
    _exit_for(bad)


def main(argv=None) -> int:
    """Console entry point: 0 success, 1 error, 2 lattice violation."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except SystemExit as exc:
        return int(exc.code or 0)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (LinChaosError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
