"""Finitely supported vectors in l^p and c_0 sequence spaces.

Coefficients are kept as (sign, log|c|) pairs so that vectors whose entries
range from 2^-5000 to 2^5000 (common along shift orbits) stay representable.
Every vector carries ``tail_bound``, an upper bound on the norm of whatever
was dropped when it was built; the stored coefficients alone give a lower
bound on the true norm.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import OutOfRangeError, SpaceMismatchError

NEG_INF = -math.inf


@dataclass(frozen=True)
class SpaceTag:
    """``p=None`` means the sup norm (c_0); otherwise l^p with ``p >= 1``."""

    p: float | None = 2.0
    bilateral: bool = False

    def __post_init__(self):
        if self.p is not None:
            if not self.p >= 1 or math.isinf(self.p):
                raise ValueError(f"l^p needs finite p >= 1, got {self.p}")
            object.__setattr__(self, "p", float(self.p))

    @property
    def is_sup(self) -> bool:
        return self.p is None

    def __str__(self):
        base = "c0" if self.p is None else f"l{self.p:g}"
        return base + ("(Z)" if self.bilateral else "(N)")

    def to_dict(self):
        return {"p": self.p, "bilateral": self.bilateral}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("p"), bool(d.get("bilateral", False)))


def lp(p: float = 2.0, bilateral: bool = False) -> SpaceTag:
    return SpaceTag(p, bilateral)


def c0(bilateral: bool = False) -> SpaceTag:
    return SpaceTag(None, bilateral)


def log_norm_of(log_mags: np.ndarray, p: float | None) -> float:
    """log of the l^p (or sup) norm of a coefficient array given as log|c|."""
    if log_mags.size == 0:
        return NEG_INF
    top = float(np.max(log_mags))
    if p is None or top == NEG_INF:
        return top
    return top + math.log(float(np.sum(np.exp(p * (log_mags - top))))) / p


def log_combine_norms(log_a: float, log_b: float, p: float | None) -> float:
    """Norm of two disjointly supported pieces: (a^p + b^p)^(1/p), or a + b for sup.

    The sup case follows the additive certification rule used for tails.
    """
    if p is None:
        return float(np.logaddexp(log_a, log_b))
    return float(np.logaddexp(p * log_a, p * log_b)) / p


class LogNorm(NamedTuple):
    log_value: float
    log_upper: float
    tail_dominated: bool

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


@dataclass(frozen=True, eq=False)
class SeqVector:
    space: SpaceTag
    indices: np.ndarray = field(repr=False)
    signs: np.ndarray = field(repr=False)
    log_mags: np.ndarray = field(repr=False)
    log_tail: float = NEG_INF

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        sg = np.asarray(self.signs, dtype=np.int8).ravel()
        lm = np.asarray(self.log_mags, dtype=np.float64).ravel()
        if not (idx.size == sg.size == lm.size):
            raise ValueError("indices, signs and log_mags differ in length")
        keep = np.isfinite(lm) & (sg != 0)
        idx, sg, lm = idx[keep], sg[keep], lm[keep]
        order = np.argsort(idx, kind="stable")
        idx, sg, lm = idx[order], sg[order], lm[order]
        if idx.size and np.any(np.diff(idx) == 0):
            raise ValueError("duplicate indices; combine them with linear_combo")
        if not self.space.bilateral and idx.size and idx[0] < 1:
            raise OutOfRangeError("unilateral vectors are indexed from 1")
        if math.isnan(self.log_tail):
            raise ValueError("tail bound is NaN")
        for a in (idx, sg, lm):
            a.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "signs", sg)
        object.__setattr__(self, "log_mags", lm)
        object.__setattr__(self, "log_tail", float(self.log_tail))

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_dict(cls, space: SpaceTag, coeffs: Mapping[int, float], tail_bound: float = 0.0):
        items = [(int(k), float(v)) for k, v in coeffs.items() if v != 0]
        idx = np.array([k for k, _ in items], dtype=np.int64)
        vals = np.array([v for _, v in items], dtype=np.float64)
        with np.errstate(divide="ignore"):
            return cls(space, idx, np.sign(vals), np.log(np.abs(vals)), _log(tail_bound))

    @classmethod
    def from_values(cls, space: SpaceTag, values: Iterable[float], start: int = 1, tail_bound: float = 0.0):
        """Consecutive coefficients starting at index ``start``."""
        return cls.from_dict(space, {start + i: v for i, v in enumerate(values)}, tail_bound)

    @classmethod
    def zero(cls, space: SpaceTag, tail_bound: float = 0.0):
        e = np.empty(0)
        return cls(space, e, e, e, _log(tail_bound))

    # -- views --------------------------------------------------------------

    @property
    def tail_bound(self) -> float:
        return math.exp(self.log_tail)

    @property
    def coeffs(self) -> dict[int, float]:
        """Index -> value; entries beyond float range come back as +-inf or 0."""
        with np.errstate(over="ignore", under="ignore"):
            vals = self.signs * np.exp(self.log_mags)
        return {int(k): float(v) for k, v in zip(self.indices, vals)}

    @property
    def support_size(self) -> int:
        return int(self.indices.size)

    @property
    def max_index(self) -> int | None:
        return int(self.indices[-1]) if self.indices.size else None

    def is_zero(self) -> bool:
        return self.indices.size == 0 and self.log_tail == NEG_INF

    def scaled(self, scalar: float) -> "SeqVector":
        return linear_combo([(scalar, self)])

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_json(self) -> dict:
        return {
            "space": self.space.to_dict(),
            "entries": [[int(k), v] for k, v in self.coeffs.items()],
            "log_entries": [
                [int(k), int(s), float(m)] for k, s, m in zip(self.indices, self.signs, self.log_mags)
            ],
            "tail_bound": self.tail_bound,
            "log_tail_bound": self.log_tail if self.log_tail != NEG_INF else None,
        }

    @classmethod
    def from_json(cls, d: dict) -> "SeqVector":
        space = SpaceTag.from_dict(d["space"])
        log_tail = d.get("log_tail_bound")
        log_tail = NEG_INF if log_tail is None else float(log_tail)
        if log_tail == NEG_INF and d.get("tail_bound"):
            log_tail = math.log(d["tail_bound"])
        if "log_entries" in d:
            rows = d["log_entries"]
            return cls(
                space,
                [r[0] for r in rows],
                [r[1] for r in rows],
                [r[2] for r in rows],
                log_tail,
            )
        vec = cls.from_dict(space, {int(k): v for k, v in d["entries"]})
        return SeqVector(space, vec.indices, vec.signs, vec.log_mags, log_tail)


def _log(x: float) -> float:
    if x < 0:
        raise ValueError(f"bounds must be nonnegative, got {x}")
    return math.log(x) if x > 0 else NEG_INF


def basis_vector(k: int, space: SpaceTag) -> SeqVector:
    if not space.bilateral and k <= 0:
        raise OutOfRangeError(f"unilateral basis starts at e_1, got e_{k}")
    return SeqVector(space, [k], [1], [0.0])


def norm(x: SeqVector, tail_fraction: float = 0.5) -> LogNorm:
    """Log of the norm of the stored coefficients, with a certified upper bound.

    ``tail_dominated`` is set when ``tail_bound > tail_fraction * ||coeffs||``.
    """
    lv = log_norm_of(x.log_mags, x.space.p)
    upper = log_combine_norms(lv, x.log_tail, x.space.p)
    dominated = x.log_tail > NEG_INF and (lv == NEG_INF or x.log_tail > lv + math.log(tail_fraction))
    return LogNorm(lv, upper, bool(dominated))


def _signed_logsumexp(signs, logs):
    top = float(np.max(logs))
    s = float(np.sum(signs * np.exp(logs - top)))
    if s == 0.0:
        return 0, NEG_INF
    return (1 if s > 0 else -1), top + math.log(abs(s))


def linear_combo(terms: Iterable[tuple[float, SeqVector]]) -> SeqVector:
    """Coefficientwise sum of ``scalar * vector``; tails add as ``sum |scalar| tail``."""
    terms = list(terms)
    if not terms:
        raise ValueError("linear_combo needs at least one term")
    space = terms[0][1].space
    idx, sg, lm, tails = [], [], [], []
    for scalar, vec in terms:
        if vec.space != space:
            raise SpaceMismatchError(f"cannot combine {vec.space} with {space}")
        if scalar == 0:
            continue
        ls = math.log(abs(scalar))
        idx.append(vec.indices)
        sg.append(vec.signs * (1 if scalar > 0 else -1))
        lm.append(vec.log_mags + ls)
        if vec.log_tail > NEG_INF:
            tails.append(vec.log_tail + ls)
    log_tail = float(np.logaddexp.reduce(tails)) if tails else NEG_INF
    if not idx:
        return SeqVector(space, [], [], [], log_tail)
    idx = np.concatenate(idx)
    sg = np.concatenate(sg)
    lm = np.concatenate(lm)
    uniq, inverse, counts = np.unique(idx, return_inverse=True, return_counts=True)
    if np.all(counts == 1):
        order = np.argsort(idx)
        return SeqVector(space, idx[order], sg[order], lm[order], log_tail)
    out_s = np.zeros(uniq.size, dtype=np.int8)
    out_l = np.full(uniq.size, NEG_INF)
    for j in range(uniq.size):
        sel = inverse == j
        out_s[j], out_l[j] = _signed_logsumexp(sg[sel], lm[sel])
    return SeqVector(space, uniq, out_s, out_l, log_tail)


def truncate(x: SeqVector, keep: int | None = None, threshold: float | None = None) -> SeqVector:
    """Drop small coefficients, moving their norm into ``tail_bound``.

    ``keep`` retains the ``keep`` largest magnitudes; ``threshold`` drops every
    coefficient with ``|c| < threshold``.  Both may be given.
    """
    drop = np.zeros(x.indices.size, dtype=bool)
    if threshold is not None and threshold > 0:
        drop |= x.log_mags < math.log(threshold)
    if keep is not None:
        if keep < 0:
            raise ValueError("keep must be nonnegative")
        order = np.argsort(-x.log_mags, kind="stable")
        drop[order[keep:]] = True
    if not drop.any():
        return x
    dropped = log_norm_of(x.log_mags[drop], x.space.p)
    kept = ~drop
    return SeqVector(
        x.space,
        x.indices[kept],
        x.signs[kept],
        x.log_mags[kept],
        float(np.logaddexp(x.log_tail, dropped)),
    )
