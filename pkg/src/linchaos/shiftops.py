"""Weighted backward shifts, their orbits, and boundedness probes.

Convention: ``(B_w x)_k = w_{k+1} x_{k+1}``.  On the unilateral space the
coefficient at index 1 is annihilated, so a finitely supported vector dies
after ``max index`` steps.

Each weight rule exposes a cumulative log-weight ``L`` with
``L(b) - L(a) = sum_{i=a+1}^{b} log|w_i|``, which makes
``||T^n e_j|| = exp(L(j) - L(j-n))`` a single subtraction.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, PreconditionError, SpaceMismatchError
from .seqspace import NEG_INF, SeqVector, SpaceTag, basis_vector, lp, norm


class WeightRule:
    """Base class for weight sequences ``(w_k)``."""

    kind = "abstract"
    has_negative = False

    def log_abs(self, k: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sign(self, k: np.ndarray) -> np.ndarray:
        return np.ones(np.shape(k), dtype=np.int8)

    def log_prefix(self, j: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def log_sup(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantWeights(WeightRule):
    c: float
    kind = "constant"

    def __post_init__(self):
        if self.c == 0 or not math.isfinite(self.c):
            raise ConfigurationError(f"constant weight must be finite and nonzero, got {self.c}")

    @property
    def has_negative(self):
        return self.c < 0

    def log_abs(self, k):
        return np.full(np.shape(k), math.log(abs(self.c)))

    def sign(self, k):
        return np.full(np.shape(k), 1 if self.c > 0 else -1, dtype=np.int8)

    def log_prefix(self, j):
        return np.asarray(j, dtype=np.float64) * math.log(abs(self.c))

    @property
    def log_sup(self):
        return math.log(abs(self.c))

    def to_dict(self):
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class CesaroWeights(WeightRule):
    """``w_k = (k / (k-1))^alpha`` for ``k >= 2``; telescopes to ``L(j) = alpha log j``."""

    alpha: float
    kind = "cesaro"

    def log_abs(self, k):
        k = np.asarray(k, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return self.alpha * (np.log(k) - np.log(k - 1))

    def log_prefix(self, j):
        j = np.asarray(j, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return self.alpha * np.log(j)

    @property
    def log_sup(self):
        return self.alpha * math.log(2.0)

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


class TableWeights(WeightRule):
    """Explicit weights on a finite set of indices; ``rest`` everywhere else."""

    kind = "table"

    def __init__(self, table: Mapping[int, float], rest: float = 1.0):
        if rest == 0 or any(v == 0 for v in table.values()):
            raise ConfigurationError("weights must be nonzero")
        self.table = {int(k): float(v) for k, v in sorted(table.items())}
        self.rest = float(rest)
        self._keys = np.array(list(self.table), dtype=np.int64)
        vals = np.array(list(self.table.values()), dtype=np.float64)
        self._log_vals = np.log(np.abs(vals))
        self._signs = np.sign(vals).astype(np.int8)
        self._log_rest = math.log(abs(self.rest))
        deltas = self._log_vals - self._log_rest
        self._cum = np.concatenate(([0.0], np.cumsum(deltas)))
        self.has_negative = self.rest < 0 or bool(np.any(vals < 0))

    def _lookup(self, k):
        k = np.asarray(k, dtype=np.int64)
        pos = np.searchsorted(self._keys, k)
        pos_c = np.minimum(pos, max(self._keys.size - 1, 0))
        hit = (pos < self._keys.size) & (self._keys[pos_c] == k) if self._keys.size else np.zeros(k.shape, bool)
        return hit, pos_c

    def log_abs(self, k):
        hit, pos = self._lookup(k)
        out = np.full(np.shape(k), self._log_rest)
        if self._keys.size:
            out[hit] = self._log_vals[pos[hit]]
        return out

    def sign(self, k):
        hit, pos = self._lookup(k)
        out = np.full(np.shape(k), 1 if self.rest > 0 else -1, dtype=np.int8)
        if self._keys.size:
            out[hit] = self._signs[pos[hit]]
        return out

    def log_prefix(self, j):
        j = np.asarray(j, dtype=np.int64)
        return j * self._log_rest + self._cum[np.searchsorted(self._keys, j, side="right")]

    @property
    def log_sup(self):
        return float(max(self._log_rest, self._log_vals.max() if self._keys.size else NEG_INF))

    def to_dict(self):
        return {"kind": self.kind, "table": {str(k): v for k, v in self.table.items()}, "rest": self.rest}

    def __eq__(self, other):
        return isinstance(other, TableWeights) and self.table == other.table and self.rest == other.rest

    def __hash__(self):
        return hash((tuple(self.table.items()), self.rest))


def weights_from_dict(d: dict) -> WeightRule:
    kind = d["kind"]
    if kind == "constant":
        return ConstantWeights(float(d["c"]))
    if kind == "cesaro":
        return CesaroWeights(float(d["alpha"]))
    if kind == "table":
        return TableWeights({int(k): v for k, v in d["table"].items()}, d.get("rest", 1.0))
    raise ConfigurationError(f"unknown weight rule {kind!r}")


@dataclass(frozen=True)
class ShiftOperator:
    space: SpaceTag
    weights: WeightRule
    name: str = "B_w"

    @property
    def log_norm_bound(self) -> float:
        """``log sup_k |w_k|``, the norm of a weighted backward shift."""
        return self.weights.log_sup

    @property
    def norm_bound(self) -> float:
        return math.exp(self.log_norm_bound)

    def to_dict(self):
        return {"name": self.name, "space": self.space.to_dict(), "weights": self.weights.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(SpaceTag.from_dict(d["space"]), weights_from_dict(d["weights"]), d.get("name", "B_w"))


def cesaro_shift(alpha: float, p: float = 2.0) -> ShiftOperator:
    """``T e_1 = 0``, ``T e_k = (k/(k-1))^alpha e_{k-1}`` on l^p(N)."""
    if not alpha > 0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    if alpha >= 1.0 / p:
        warnings.warn(
            f"alpha={alpha} >= 1/p={1 / p:g}: the operator is no longer absolutely Cesaro bounded",
            stacklevel=2,
        )
    return ShiftOperator(lp(p), CesaroWeights(float(alpha)), f"cesaro(alpha={alpha:g},p={p:g})")


def rolewicz_shift(c: float, space: SpaceTag | None = None) -> ShiftOperator:
    if c == 0:
        raise ConfigurationError("Rolewicz weight must be nonzero")
    space = space or lp(2.0)
    return ShiftOperator(space, ConstantWeights(float(c)), f"rolewicz(c={c:g},{space})")


def weighted_shift(table: Mapping[int, float], rest: float = 1.0, space: SpaceTag | None = None, name="table") -> ShiftOperator:
    return ShiftOperator(space or lp(2.0), TableWeights(table, rest), name)


def apply(T: ShiftOperator, x: SeqVector) -> SeqVector:
    if x.space != T.space:
        raise SpaceMismatchError(f"operator on {T.space} applied to vector in {x.space}")
    idx = x.indices
    keep = idx >= 2 if not T.space.bilateral else np.ones(idx.size, dtype=bool)
    src = idx[keep]
    log_tail = x.log_tail + T.log_norm_bound if x.log_tail > NEG_INF else NEG_INF
    return SeqVector(
        T.space,
        src - 1,
        x.signs[keep] * T.weights.sign(src),
        x.log_mags[keep] + T.weights.log_abs(src),
        log_tail,
    )


def power(T: ShiftOperator, x: SeqVector, n: int) -> SeqVector:
    """``T^n x`` in one step via the telescoped weights."""
    if x.space != T.space:
        raise SpaceMismatchError(f"operator on {T.space} applied to vector in {x.space}")
    if n == 0:
        return x
    idx = x.indices
    keep = idx - n >= 1 if not T.space.bilateral else np.ones(idx.size, dtype=bool)
    src = idx[keep]
    gain = T.weights.log_prefix(src) - T.weights.log_prefix(src - n)
    signs = x.signs[keep].astype(np.int64)
    if T.weights.has_negative:
        for step in range(n):
            signs = signs * T.weights.sign(src - step)
    log_tail = x.log_tail + n * T.log_norm_bound if x.log_tail > NEG_INF else NEG_INF
    return SeqVector(T.space, src - n, signs, x.log_mags[keep] + gain, log_tail)


@dataclass(frozen=True, eq=False)
class OrbitRecord:
    """Norm trajectory ``log ||T^n x||`` for ``n = 0..N`` with certified errors.

    ``step_error_log[n]`` is the log of an absolute bound on
    ``| ||T^n x|| - exp(log_norms[n]) |`` (``-inf`` when exact); the Cesaro
    arrays hold ``log((1/N') sum_{j<=N'} ||T^j x||)`` for ``N' = 1..N`` and
    the matching error bound.
    """

    operator: str
    vector_digest: str
    horizon: int
    log_norms: np.ndarray = field(repr=False)
    cesaro_log_means: np.ndarray = field(repr=False)
    step_error_log: np.ndarray = field(repr=False)
    cesaro_error_log: np.ndarray = field(repr=False)

    def __post_init__(self):
        N = self.horizon
        if self.log_norms.shape != (N + 1,) or self.step_error_log.shape != (N + 1,):
            raise ValueError("log_norms and step_error_log need length N+1")
        if self.cesaro_log_means.shape != (N,) or self.cesaro_error_log.shape != (N,):
            raise ValueError("Cesaro arrays need length N")

    @classmethod
    def from_log_norms(cls, log_norms, step_error_log=None, operator="synthetic", digest="synthetic"):
        """Build a record from a given trajectory (entry 0 is ``log ||x||``)."""
        ln = np.asarray(log_norms, dtype=np.float64)
        N = ln.size - 1
        err = np.full(N + 1, NEG_INF) if step_error_log is None else np.asarray(step_error_log, dtype=np.float64)
        means, mean_err = _cesaro(ln, err)
        return cls(operator, digest, N, ln, means, err, mean_err)

    def certified_upper(self) -> np.ndarray:
        return np.logaddexp(self.log_norms, self.step_error_log)

    def certified_lower(self) -> np.ndarray:
        return _log_sub(self.log_norms, self.step_error_log)

    def cesaro_upper(self) -> np.ndarray:
        return np.logaddexp(self.cesaro_log_means, self.cesaro_error_log)

    def cesaro_lower(self) -> np.ndarray:
        return _log_sub(self.cesaro_log_means, self.cesaro_error_log)

    def is_exact(self) -> bool:
        return bool(np.all(self.step_error_log == NEG_INF))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "log_norm", "cesaro_log_mean", "step_error_log"])
        for n in range(self.horizon + 1):
            mean = repr(float(self.cesaro_log_means[n - 1])) if n else ""
            w.writerow([n, repr(float(self.log_norms[n])), mean, repr(float(self.step_error_log[n]))])
        return buf.getvalue()


def _log_sub(a, e):
    with np.errstate(invalid="ignore", divide="ignore"):
        out = a + np.log1p(-np.exp(e - a))
    return np.where(e < a, out, NEG_INF)


def _cesaro(log_norms, step_err):
    N = log_norms.size - 1
    if N == 0:
        return np.empty(0), np.empty(0)
    counts = np.log(np.arange(1, N + 1, dtype=np.float64))
    means = np.logaddexp.accumulate(log_norms[1:]) - counts
    errs = np.logaddexp.accumulate(step_err[1:]) - counts
    return means, errs


def orbit_log_norms(T: ShiftOperator, x: SeqVector, N: int, chunk_cells: int = 2_000_000) -> np.ndarray:
    """``log ||T^n x_fin||`` for ``n = 0..N`` where ``x_fin`` is the stored part of ``x``."""
    p = T.space.p
    out = np.full(N + 1, NEG_INF)
    idx = x.indices
    if idx.size == 0:
        return out
    base = x.log_mags + T.weights.log_prefix(idx)
    last = N if T.space.bilateral else min(N, int(idx[-1]) - 1)
    step = max(1, chunk_cells // idx.size)
    for n0 in range(0, last + 1, step):
        n = np.arange(n0, min(last, n0 + step - 1) + 1)
        dest = idx[None, :] - n[:, None]
        with np.errstate(invalid="ignore"):
            vals = base[None, :] - T.weights.log_prefix(dest)
        if not T.space.bilateral:
            vals = np.where(dest >= 1, vals, NEG_INF)
        top = vals.max(axis=1)
        if p is None:
            out[n] = top
        else:
            safe = np.where(np.isfinite(top), top, 0.0)
            with np.errstate(divide="ignore"):
                out[n] = np.where(
                    np.isfinite(top),
                    safe + np.log(np.sum(np.exp(p * (vals - safe[:, None])), axis=1)) / p,
                    NEG_INF,
                )
    return out


def orbit(T: ShiftOperator, x: SeqVector, N: int) -> OrbitRecord:
    """Orbit record of ``x`` up to step ``N``.

    Finitely supported vectors stay finitely supported under a backward shift,
    so the stored part is propagated exactly; the tail contributes at most
    ``tail_bound * (sup|w|)^n`` at step ``n``.
    """
    if N < 1:
        raise ConfigurationError("horizon must be at least 1")
    if x.space != T.space:
        raise SpaceMismatchError(f"operator on {T.space} applied to vector in {x.space}")
    ln = orbit_log_norms(T, x, N)
    if x.log_tail > NEG_INF:
        err = x.log_tail + np.arange(N + 1) * T.log_norm_bound
    else:
        err = np.full(N + 1, NEG_INF)
    means, mean_err = _cesaro(ln, err)
    return OrbitRecord(T.name, x.digest(), N, ln, means, err, mean_err)


@dataclass(frozen=True)
class PowerBoundProbe:
    verdict: str  # "unbounded" or "bounded-looking"
    log_evidence: float
    argmax: tuple[int, int]  # (sample position, n)
    blowup_factor: float
    inconclusive: bool

    @property
    def evidence(self) -> float:
        return math.exp(self.log_evidence)

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "log_evidence": self.log_evidence,
            "argmax": list(self.argmax),
            "blowup_factor": self.blowup_factor,
            "inconclusive": self.inconclusive,
        }


def _check_samples(samples):
    samples = list(samples)
    if not samples:
        raise PreconditionError("need at least one sample vector")
    for x in samples:
        if x.indices.size == 0:
            raise PreconditionError("sample vectors must be nonzero")
    return samples


def power_bounded_probe(T: ShiftOperator, N: int, samples: Sequence[SeqVector], blowup_factor: float = 1e3) -> PowerBoundProbe:
    """Largest certified ``||T^n x|| / ||x||`` over samples and ``0 <= n <= N``.

    A finite horizon can only refute power boundedness; the other outcome is
    labelled inconclusive.
    """
    samples = _check_samples(samples)
    best, arg = NEG_INF, (0, 0)
    for s, x in enumerate(samples):
        rec = orbit(T, x, N)
        ratio = rec.certified_lower() - norm(x).log_upper
        n = int(np.argmax(ratio))
        if ratio[n] > best:
            best, arg = float(ratio[n]), (s, n)
    unbounded = best >= math.log(blowup_factor)
    return PowerBoundProbe("unbounded" if unbounded else "bounded-looking", best, arg, blowup_factor, not unbounded)


@dataclass(frozen=True)
class CesaroBoundProbe:
    log_value: float
    argmax: tuple[int, int]  # (sample position, N')

    @property
    def value(self) -> float:
        return math.exp(self.log_value)

    def to_dict(self):
        return {"log_value": self.log_value, "value": self.value, "argmax": list(self.argmax)}


def abs_cesaro_bounded_probe(T: ShiftOperator, N: int, samples: Sequence[SeqVector]) -> CesaroBoundProbe:
    """sup over samples and ``N' <= N`` of ``(1/N') sum_{j<=N'} ||T^j x|| / ||x||``."""
    samples = _check_samples(samples)
    best, arg = NEG_INF, (0, 1)
    for s, x in enumerate(samples):
        rec = orbit(T, x, N)
        ratio = rec.cesaro_upper() - norm(x).log_value
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, arg = float(ratio[k]), (s, k + 1)
    return CesaroBoundProbe(best, arg)


def basis_samples(space: SpaceTag, indices) -> list[SeqVector]:
    return [basis_vector(int(k), space) for k in indices]
