"""Shared domain types: outcome matrices, ranking profiles, committees, ledgers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

WEIGHT_TOL = 1e-12


class CommitteeError(Exception):
    """Base class for errors raised by this package."""


class DataError(CommitteeError, ValueError):
    """Malformed or inconsistent input data."""


class CapExceeded(CommitteeError):
    """An enumeration would exceed its configured committee-count cap."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"enumeration of {count} committees exceeds cap {cap}")
        self.count = count
        self.cap = cap


class Exhausted(CommitteeError):
    """Rejection sampling hit its draw cap before accepting enough samples.

    ``partial`` carries whatever the interrupted routine had built so far.
    """

    def __init__(self, message: str = "draw cap reached", partial=None):
        super().__init__(message)
        self.partial = partial


def as_members(S: Iterable[int] | "Committee") -> tuple[int, ...]:
    """Sorted tuple of distinct candidate ids; raises on duplicates."""
    if isinstance(S, Committee):
        return S.members
    items = [int(c) for c in S]
    out = tuple(sorted(set(items)))
    if len(out) != len(items):
        raise ValueError(f"committee has duplicate members: {items}")
    return out


@dataclass(frozen=True)
class Committee:
    """A set of candidate ids, kept sorted, with the size it is meant to reach."""

    members: tuple[int, ...]
    target_size: int = -1

    def __post_init__(self):
        members = tuple(int(c) for c in self.members)
        if len(set(members)) != len(members):
            raise ValueError(f"committee has duplicate members: {members}")
        object.__setattr__(self, "members", tuple(sorted(members)))
        if self.target_size < 0:
            object.__setattr__(self, "target_size", len(members))
        if len(members) > self.target_size:
            raise ValueError("committee larger than its target size")

    @classmethod
    def of(cls, S: Iterable[int], target_size: int = -1) -> "Committee":
        return cls(tuple(S), target_size)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, c):
        return c in self.members

    def is_proper(self, m: int) -> bool:
        return len(self.members) < m

    def union(self, other: Iterable[int]) -> "Committee":
        members = set(self.members) | set(as_members(other))
        return Committee(tuple(members), max(self.target_size, len(members)))

    def labels(self, names: Sequence[str] | None) -> list[str]:
        if names is None:
            return [str(c) for c in self.members]
        return [names[c] for c in self.members]


def pad_to_size(committee: Iterable[int], k: int, m: int) -> Committee:
    """Extend a committee to exactly ``k`` members with the lowest unused ids."""
    members = list(as_members(committee))
    if k > m:
        raise ValueError(f"target size k={k} exceeds candidate count m={m}")
    if len(members) > k:
        raise ValueError(f"committee of size {len(members)} exceeds target size {k}")
    if any(c < 0 or c >= m for c in members):
        raise ValueError("committee member out of range")
    taken = set(members)
    c = 0
    while len(members) < k:
        if c not in taken:
            members.append(c)
        c += 1
    return Committee(tuple(members), k)


def best_rank(row: Sequence[int] | np.ndarray, S: Iterable[int]) -> int:
    """Best (smallest) rank of a committee on one ranking; ``m + 1`` when empty."""
    row = np.asarray(row)
    members = as_members(S)
    m = row.shape[0]
    if not members:
        return m + 1
    if members[0] < 0 or members[-1] >= m:
        raise ValueError("committee member out of range")
    return int(row[list(members)].min())


def is_competition_ranking(row: Sequence[int] | np.ndarray) -> bool:
    """True iff every rank equals one plus the number of strictly better entries."""
    row = np.asarray(row)
    if row.ndim != 1 or row.size == 0:
        return False
    ordered = np.sort(row)
    better = np.searchsorted(ordered, row, side="left")
    return bool(np.all(row == better + 1))


def competition_ranks(scores: np.ndarray) -> np.ndarray:
    """Competition ranks (ties share) from scores, higher score ranks first.

    Works column-wise on a 2-D array of shape (candidates, tasks) and returns an
    integer array of the same shape.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        return competition_ranks(scores[:, None])[:, 0]
    neg = -scores
    ordered = np.sort(neg, axis=0)
    out = np.empty(scores.shape, dtype=np.int64)
    for j in range(scores.shape[1]):
        out[:, j] = np.searchsorted(ordered[:, j], neg[:, j], side="left") + 1
    return out


def _check_labels(labels, expected, what):
    if labels is None:
        return None
    labels = tuple(str(x) for x in labels)
    if len(labels) != expected:
        raise DataError(f"{what} labels have length {len(labels)}, expected {expected}")
    if len(set(labels)) != len(labels):
        raise DataError(f"duplicate {what} labels")
    return labels


@dataclass(frozen=True, eq=False)
class BinaryOutcomeMatrix:
    """m x n bit matrix: ``bits[c, d] = 1`` iff candidate c solves task d."""

    bits: np.ndarray
    candidate_labels: tuple[str, ...] | None = None
    task_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise DataError("outcome matrix must be two-dimensional")
        if bits.size and not np.isin(bits, (0, 1)).all():
            raise DataError("outcome matrix entries must be 0 or 1")
        bits = bits.astype(np.int8)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(
            self, "candidate_labels", _check_labels(self.candidate_labels, bits.shape[0], "candidate")
        )
        object.__setattr__(self, "task_labels", _check_labels(self.task_labels, bits.shape[1], "task"))

    @property
    def m(self) -> int:
        return self.bits.shape[0]

    @property
    def n(self) -> int:
        return self.bits.shape[1]

    def columns(self, idx) -> "BinaryOutcomeMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        tl = None if self.task_labels is None else tuple(self.task_labels[i] for i in idx)
        return BinaryOutcomeMatrix(self.bits[:, idx], self.candidate_labels, tl)

    def without_candidates(self, drop: Iterable[int]) -> "BinaryOutcomeMatrix":
        keep = [c for c in range(self.m) if c not in set(drop)]
        cl = None if self.candidate_labels is None else tuple(self.candidate_labels[c] for c in keep)
        return BinaryOutcomeMatrix(self.bits[keep], cl, self.task_labels)

    def solo_accuracy(self) -> np.ndarray:
        return self.bits.mean(axis=1)

    def coverage(self, S: Iterable[int]) -> float:
        """Fraction of tasks solved by at least one member of S."""
        members = list(as_members(S))
        if not members or self.n == 0:
            return 0.0
        return float(self.bits[members].max(axis=0).mean())

    def miss_rate(self, S: Iterable[int]) -> float:
        return 1.0 - self.coverage(S)

    def rescue_rate(self, c: int, S: Iterable[int]) -> float:
        """q(c|S): solve rate of c on tasks S misses; 0 when S misses nothing."""
        members = list(as_members(S))
        missed = np.ones(self.n, dtype=bool) if not members else self.bits[members].max(axis=0) == 0
        if not missed.any():
            return 0.0
        return float(self.bits[c, missed].mean())


@dataclass(frozen=True, eq=False)
class RankingProfile:
    """n rankings over m candidates, stored as 1-based competition ranks.

    ``ranks[t, c]`` is the rank of candidate c in ranking t. Strict profiles are
    the special case where every row is a permutation of 1..m.
    """

    ranks: np.ndarray
    weights: np.ndarray | None = None
    candidate_labels: tuple[str, ...] | None = None
    task_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        ranks = np.asarray(self.ranks)
        if ranks.ndim != 2:
            raise DataError("rank matrix must be two-dimensional")
        if ranks.size and not np.issubdtype(ranks.dtype, np.integer):
            if not np.all(ranks == np.round(ranks)):
                raise DataError("ranks must be integers")
        ranks = ranks.astype(np.int64)
        n, m = ranks.shape
        for t in range(n):
            if not is_competition_ranking(ranks[t]):
                raise DataError(f"row {t} is not a valid competition ranking: {ranks[t].tolist()}")
        if self.weights is None:
            w = np.full(n, 1.0 / n) if n else np.zeros(0)
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (n,):
                raise DataError("weights must have one entry per ranking")
            if (w < 0).any() or abs(w.sum() - 1.0) > WEIGHT_TOL:
                raise DataError("weights must be nonnegative and sum to 1")
        ranks.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "candidate_labels", _check_labels(self.candidate_labels, m, "candidate"))
        object.__setattr__(self, "task_labels", _check_labels(self.task_labels, n, "task"))

    @classmethod
    def from_orders(cls, orders: Sequence[Sequence[int]], weights=None, candidate_labels=None):
        """Build a strict profile from best-to-worst candidate orders."""
        orders = [list(o) for o in orders]
        m = len(orders[0])
        ranks = np.empty((len(orders), m), dtype=np.int64)
        for t, order in enumerate(orders):
            if sorted(order) != list(range(m)):
                raise DataError(f"order {order} is not a permutation of 0..{m - 1}")
            ranks[t, order] = np.arange(1, m + 1)
        return cls(ranks, weights, candidate_labels)

    @property
    def m(self) -> int:
        return self.ranks.shape[1]

    @property
    def n(self) -> int:
        return self.ranks.shape[0]

    @property
    def strict(self) -> bool:
        return bool(np.all(np.sort(self.ranks, axis=1) == np.arange(1, self.m + 1)))

    def rows(self, idx) -> "RankingProfile":
        """Sub-profile on the given rankings, weights renormalized."""
        idx = np.asarray(idx, dtype=np.int64)
        w = self.weights[idx]
        tl = None if self.task_labels is None else tuple(self.task_labels[i] for i in idx)
        return RankingProfile(self.ranks[idx], w / w.sum(), self.candidate_labels, tl)

    def without_candidates(self, drop: Iterable[int]) -> "RankingProfile":
        """Restrict to the remaining candidates and recompute competition ranks."""
        drop = set(drop)
        keep = [c for c in range(self.m) if c not in drop]
        cl = None if self.candidate_labels is None else tuple(self.candidate_labels[c] for c in keep)
        sub = self.ranks[:, keep]
        # lower rank is better; negate so competition_ranks (higher-first) applies
        new = competition_ranks(-sub.T.astype(float)).T
        return RankingProfile(new, self.weights.copy(), cl, self.task_labels)

    def best_ranks(self, S: Iterable[int]) -> np.ndarray:
        members = list(as_members(S))
        if not members:
            return np.full(self.n, self.m + 1)
        return self.ranks[:, members].min(axis=1)

    def cover_probs(self, S: Iterable[int]) -> np.ndarray:
        """g_x(S) for every x: weight of rankings where S has a member ranked at or above x."""
        r = self.best_ranks(S)
        return self.weights @ (r[:, None] <= self.ranks)

    def mean_ranks(self) -> np.ndarray:
        return self.weights @ self.ranks


@dataclass(frozen=True, eq=False)
class RivalWeights:
    """A probability vector over candidates."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or (p < 0).any() or abs(p.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError("rival weights must be a nonnegative vector summing to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, m: int) -> "RivalWeights":
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def point(cls, m: int, x: int) -> "RivalWeights":
        p = np.zeros(m)
        p[x] = 1.0
        return cls(p)

    @property
    def m(self) -> int:
        return self.probs.shape[0]


COST_CLASSES = ("cand", "eval", "rank")


@dataclass
class QueryLedger:
    """Oracle-call counters, split by what the calls were used for."""

    q_cand: int = 0
    q_eval: int = 0
    q_rank: int = 0
    draws: int = 0

    def charge(self, cost: str, n: int = 1) -> None:
        if n < 0:
            raise ValueError("ledger counters only increase")
        if cost == "cand":
            self.q_cand += int(n)
        elif cost == "eval":
            self.q_eval += int(n)
        elif cost == "rank":
            self.q_rank += int(n)
        elif cost == "draw":
            self.draws += int(n)
        else:
            raise ValueError(f"unknown cost class {cost!r}")

    @property
    def total(self) -> int:
        return self.q_cand + self.q_eval + self.q_rank

    def merge(self, other: "QueryLedger") -> None:
        self.q_cand += other.q_cand
        self.q_eval += other.q_eval
        self.q_rank += other.q_rank
        self.draws += other.draws

    def snapshot(self) -> "QueryLedger":
        return QueryLedger(self.q_cand, self.q_eval, self.q_rank, self.draws)

    def since(self, before: "QueryLedger") -> "QueryLedger":
        return QueryLedger(
            self.q_cand - before.q_cand,
            self.q_eval - before.q_eval,
            self.q_rank - before.q_rank,
            self.draws - before.draws,
        )

    def as_dict(self) -> dict[str, int]:
        return {"q_cand": self.q_cand, "q_eval": self.q_eval, "q_rank": self.q_rank, "draws": self.draws}


@dataclass
class StepRecord:
    chosen: int | None
    rho_bar: float | None = None
    accepted_failures: int = 0
    capped: bool = False
    ledger: QueryLedger = field(default_factory=QueryLedger)


@dataclass
class SelectionResult:
    committee: Committee
    ledger: QueryLedger
    trace: list[StepRecord] = field(default_factory=list)


def n_committees(m: int, k: int) -> int:
    return math.comb(m, k)
