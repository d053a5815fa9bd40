"""Query surface: task sources, scalar oracle calls, and rejection-sampling streams.

Every oracle answer an algorithm pays for goes through :meth:`FeedbackSource.bill`,
which updates the caller's :class:`QueryLedger` and, when logging is enabled,
records one key per call so tests can audit repeats and recount totals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    BinaryOutcomeMatrix,
    DataError,
    Exhausted,
    QueryLedger,
    RankingProfile,
    RivalWeights,
    as_members,
)

BINARY = "binary"
RANKING = "ranking"


class FeedbackSource:
    """Base class for task sources.

    Subclasses implement :meth:`_draw_rows`, returning an ``(n, m)`` array whose
    rows are the latent task profiles (bits or competition ranks).
    """

    kind: str
    m: int
    strict: bool = True

    def __init__(self, seed=0):
        self._seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        task_ss, rival_ss, self._child_ss = self._seed_seq.spawn(3)
        self.rng = np.random.default_rng(task_ss)
        self.rival_rng = np.random.default_rng(rival_ss)
        self.n_drawn = 0
        self.oracle_calls = 0
        self.logging = False
        self._log: list[np.ndarray] = []
        self._handles: dict[int, np.ndarray] = {}
        self._asked: dict[int, set] = {}

    # -- drawing -------------------------------------------------------------

    def _draw_rows(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def draw(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``n`` fresh tasks; returns (draw ids, latent rows). Charges nothing."""
        rows = self._draw_rows(int(n))
        ids = np.arange(self.n_drawn, self.n_drawn + n, dtype=np.int64)
        self.n_drawn += int(n)
        return ids, rows

    def draw_rivals(self, n: int, lam: RivalWeights) -> np.ndarray:
        u = self.rival_rng.random(int(n))
        idx = np.searchsorted(np.cumsum(lam.probs), u, side="right")
        return np.minimum(idx, self.m - 1)

    def spawn(self) -> "FeedbackSource":
        """Independent child source over the same law (fresh random streams)."""
        raise NotImplementedError

    def _next_child_seed(self):
        (child,) = self._child_ss.spawn(1)
        return child

    # -- accounting ----------------------------------------------------------

    def enable_logging(self, on: bool = True) -> None:
        self.logging = on
        self._log = []

    def bill(self, ledger: QueryLedger, cost: str, n: int, keys=None) -> None:
        """Charge ``n`` oracle calls of class ``cost``.

        When logging, ``keys`` must be an ``(n, 3)`` array of (draw id, a, b)
        identifying each call (b = -1 for binary queries).
        """
        if n == 0:
            return
        ledger.charge(cost, n)
        self.oracle_calls += int(n)
        if self.logging:
            keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
            if keys.shape[0] != n:
                raise RuntimeError(f"billed {n} calls but logged {keys.shape[0]} keys")
            self._log.append(keys)

    def query_log(self) -> np.ndarray:
        if not self._log:
            return np.zeros((0, 3), dtype=np.int64)
        return np.concatenate(self._log)

    def repeated_queries(self) -> int:
        """Number of logged calls that repeat an earlier key exactly."""
        log = self.query_log()
        if log.shape[0] == 0:
            return 0
        return int(log.shape[0] - np.unique(log, axis=0).shape[0])

    def _check_candidate(self, c):
        if not 0 <= c < self.m:
            raise ValueError(f"candidate {c} out of range for m={self.m}")


class EmpiricalSource(FeedbackSource):
    """Samples columns of a finite matrix or rankings of a finite profile."""

    def __init__(self, data: BinaryOutcomeMatrix | RankingProfile, seed=0):
        super().__init__(seed)
        self.data = data
        if isinstance(data, BinaryOutcomeMatrix):
            self.kind = BINARY
            self.m = data.m
            self._table = np.ascontiguousarray(data.bits.T)
            weights = np.full(data.n, 1.0 / data.n) if data.n else np.zeros(0)
            self.strict = True
        elif isinstance(data, RankingProfile):
            self.kind = RANKING
            self.m = data.m
            dtype = np.int16 if data.m < 32000 else np.int64
            self._table = data.ranks.astype(dtype)
            weights = data.weights
            self.strict = data.strict
        else:
            raise TypeError("expected a BinaryOutcomeMatrix or RankingProfile")
        self._cdf = np.cumsum(weights)
        self.n_tasks = self._table.shape[0]

    def _draw_rows(self, n):
        if self.n_tasks == 0:
            raise DataError("cannot sample from an empty source")
        idx = np.searchsorted(self._cdf, self.rng.random(n), side="right")
        return self._table[np.minimum(idx, self.n_tasks - 1)]

    def spawn(self):
        return EmpiricalSource(self.data, self._next_child_seed())


class GenerativeSource(FeedbackSource):
    """Draws each task's latent profile from ``sampler(U)``, U uniform of shape (n, width)."""

    def __init__(self, kind: str, m: int, sampler: Callable, width: int, seed=0, strict=True, law=None, meta=None):
        super().__init__(seed)
        if kind not in (BINARY, RANKING):
            raise ValueError(f"unknown source kind {kind!r}")
        self.kind = kind
        self.m = m
        self.sampler = sampler
        self.width = width
        self.strict = strict
        self.law = law
        self.meta = dict(meta or {})

    def _draw_rows(self, n):
        return self.sampler(self.rng.random((n, self.width)))

    def spawn(self):
        return GenerativeSource(
            self.kind, self.m, self.sampler, self.width, self._next_child_seed(), self.strict, self.law, self.meta
        )


# -- scalar query API ---------------------------------------------------------


@dataclass(frozen=True)
class TaskHandle:
    """Opaque reference to one sampled task of a source."""

    source: FeedbackSource
    index: int

    @property
    def row(self) -> np.ndarray:
        return self.source._handles[self.index]


def sample_task(source: FeedbackSource, ledger: QueryLedger) -> TaskHandle:
    ids, rows = source.draw(1)
    idx = int(ids[0])
    source._handles[idx] = rows[0]
    ledger.charge("draw", 1)
    return TaskHandle(source, idx)


def _asked(handle):
    return handle.source._asked.setdefault(handle.index, set())


def query_binary(handle: TaskHandle, c: int, ledger: QueryLedger, cost: str = "cand") -> int:
    src = handle.source
    if src.kind != BINARY:
        raise TypeError("binary query on a pairwise source")
    src._check_candidate(c)
    _asked(handle).add((c, -1))
    src.bill(ledger, cost, 1, [(handle.index, c, -1)])
    return int(handle.row[c])


def query_pairwise(handle: TaskHandle, a: int, b: int, ledger: QueryLedger, cost: str = "eval") -> int:
    """1 iff a is ranked above b. The reverse of an asked pair is free."""
    src = handle.source
    if src.kind != RANKING:
        raise TypeError("pairwise query on a binary source")
    if not src.strict:
        raise TypeError("strict pairwise queries are undefined on weak rankings; use query_cover")
    if a == b:
        raise ValueError("pairwise query needs two distinct candidates")
    src._check_candidate(a)
    src._check_candidate(b)
    asked = _asked(handle)
    if (a, b) in asked or (b, a) not in asked:
        asked.add((a, b))
        src.bill(ledger, cost, 1, [(handle.index, a, b)])
    row = handle.row
    return int(row[a] < row[b])


def query_cover(handle: TaskHandle, c: int, x: int, ledger: QueryLedger, cost: str = "eval") -> int:
    """1 iff rank(c) <= rank(x); free when c == x."""
    src = handle.source
    if src.kind != RANKING:
        raise TypeError("cover query on a binary source")
    src._check_candidate(c)
    src._check_candidate(x)
    if c == x:
        return 1
    if src.strict:
        return query_pairwise(handle, c, x, ledger, cost)
    _asked(handle).add((c, x))
    src.bill(ledger, cost, 1, [(handle.index, c, x)])
    row = handle.row
    return int(row[c] <= row[x])


def evaluate_committee_binary(handle: TaskHandle, S, ledger: QueryLedger) -> tuple[int, int]:
    """Scan members in ascending id order, stopping at the first solver."""
    used = 0
    for s in as_members(S):
        used += 1
        if query_binary(handle, s, ledger, cost="eval"):
            return 1, used
    return 0, used


def _covers_pair(handle, S, x, ledger):
    for s in as_members(S):
        if s == x or query_cover(handle, s, x, ledger, cost="eval"):
            return True
    return False


def rejection_sample_failure(source: FeedbackSource, S, ledger: QueryLedger, max_draws: int) -> TaskHandle:
    for _ in range(int(max_draws)):
        h = sample_task(source, ledger)
        covered, _ = evaluate_committee_binary(h, S, ledger)
        if not covered:
            return h
    raise Exhausted(f"no failure of {as_members(S)} within {max_draws} draws")


def rejection_sample_failed_pair(source, S, lam: RivalWeights, ledger: QueryLedger, max_draws: int):
    for _ in range(int(max_draws)):
        h = sample_task(source, ledger)
        x = int(source.draw_rivals(1, lam)[0])
        if not _covers_pair(h, S, x, ledger):
            return h, x
    raise Exhausted(f"no failed pair for {as_members(S)} within {max_draws} draws")


def top_of_committee(handle: TaskHandle, S, ledger: QueryLedger) -> int:
    """Best-ranked member by a linear tournament of ``|S| - 1`` comparisons."""
    members = as_members(S)
    if not members:
        raise ValueError("empty committee has no top member")
    best = members[0]
    for s in members[1:]:
        if query_pairwise(handle, s, best, ledger, cost="eval"):
            best = s
    return best


def recover_ranking(handle: TaskHandle, m: int, ledger: QueryLedger) -> np.ndarray:
    """Full ranks (1-based) of a strict ranking by merge sort over pairwise queries."""
    if not handle.source.strict:
        raise TypeError("full ranking recovery needs a strict source")

    def better(a, b):
        return query_pairwise(handle, a, b, ledger, cost="rank")

    def merge_sort(items):
        if len(items) <= 1:
            return items
        mid = len(items) // 2
        left, right = merge_sort(items[:mid]), merge_sort(items[mid:])
        out = []
        i = j = 0
        while i < len(left) and j < len(right):
            if better(left[i], right[j]):
                out.append(left[i])
                i += 1
            else:
                out.append(right[j])
                j += 1
        return out + left[i:] + right[j:]

    order = merge_sort(list(range(m)))
    ranks = np.empty(m, dtype=np.int64)
    ranks[order] = np.arange(1, m + 1)
    return ranks


# -- vectorized evaluation helpers --------------------------------------------


def binary_scan(rows: np.ndarray, S: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Coverage flags and short-circuit query counts for committee S on each row."""
    S = list(S)
    n = rows.shape[0]
    if not S:
        return np.zeros(n, dtype=bool), np.zeros(n, dtype=np.int64)
    sub = rows[:, S].astype(bool)
    covered = sub.any(axis=1)
    first = sub.argmax(axis=1)
    return covered, np.where(covered, first + 1, len(S))


def pair_scan(rows: np.ndarray, x: np.ndarray, S: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Prefix-cover flags and query counts when scanning S against rivals x.

    A member equal to the rival covers at no cost.
    """
    S = np.asarray(list(S), dtype=np.int64)
    n = rows.shape[0]
    if S.size == 0:
        return np.zeros(n, dtype=bool), np.zeros(n, dtype=np.int64)
    rx = rows[np.arange(n), x]
    sub = rows[:, S] <= rx[:, None]
    covered = sub.any(axis=1)
    j = sub.argmax(axis=1)
    cost = np.where(covered, j + (S[j] != x), S.size)
    return covered, cost


def _scan_keys(ids, costs, S, x=None):
    """Keys (id, s, x) for the members actually queried in each scan."""
    S = list(S)
    out = []
    for i, (d, c) in enumerate(zip(ids, costs)):
        if x is None:
            out.extend((int(d), s, -1) for s in S[: int(c)])
        else:
            xi = int(x[i])
            queried = [s for s in S if s != xi][: int(c)]
            out.extend((int(d), s, xi) for s in queried)
    return np.asarray(out, dtype=np.int64).reshape(-1, 3)


class RejectionStream:
    """Lazily accepted failures of a fixed committee, with lookahead.

    ``peek(n)`` exposes the next ``n`` accepted failures without paying for
    them; ``commit(n)`` consumes them and charges the draws and committee
    evaluations spent up to and including the n-th one. Warm-start failures are
    served first and cost nothing (they were paid for when collected).
    """

    def __init__(self, source: FeedbackSource, S, ledger: QueryLedger, max_draws: int, warm=None, lam=None):
        self.source = source
        self.S = list(as_members(S))
        self.ledger = ledger
        self.max_draws = int(max_draws)
        self.lam = lam
        self.fresh_draws = 0
        m = source.m
        self._ids = np.zeros(0, dtype=np.int64)
        self._rows = np.zeros((0, m), dtype=np.int16)
        self._x = np.zeros(0, dtype=np.int64)
        self._fail = np.zeros(0, dtype=bool)
        self._cost = np.zeros(0, dtype=np.int64)
        if warm is not None:
            wid, wrows, wx = warm
            self._warm = (np.asarray(wid), np.asarray(wrows), None if wx is None else np.asarray(wx))
        else:
            self._warm = (np.zeros(0, dtype=np.int64), np.zeros((0, m), dtype=np.int16), np.zeros(0, dtype=np.int64))
        self._accept_rate = 0.5
        self._fails_seen = 0

    @property
    def exhausted(self) -> bool:
        return self.fresh_draws >= self.max_draws

    def _n_warm(self):
        return self._warm[0].shape[0]

    def _test(self, rows, x):
        if x is None:
            return binary_scan(rows, self.S)
        return pair_scan(rows, x, self.S)

    def _refill(self, need: int) -> None:
        room = self.max_draws - self.fresh_draws
        if room <= 0:
            return
        want = int(np.ceil(1.25 * need / max(self._accept_rate, 1e-6))) + 16
        n = int(min(room, max(64, want), 1 << 18))
        ids, rows = self.source.draw(n)
        x = self.source.draw_rivals(n, self.lam) if self.lam is not None else None
        covered, cost = self._test(rows, x)
        fail = ~covered
        self.fresh_draws += n
        self._fails_seen += int(fail.sum())
        self._accept_rate = max(self._fails_seen / self.fresh_draws, 1.0 / (self.fresh_draws + 1))
        self._ids = np.concatenate([self._ids, ids])
        self._rows = np.concatenate([self._rows, rows.astype(self._rows.dtype, copy=False)])
        if x is not None:
            self._x = np.concatenate([self._x, x])
        self._fail = np.concatenate([self._fail, fail])
        self._cost = np.concatenate([self._cost, cost])

    def available(self) -> int:
        return self._n_warm() + int(self._fail.sum())

    def peek(self, n: int):
        """Up to ``n`` upcoming failures as (ids, rows, rivals or None)."""
        while self.available() < n and not self.exhausted:
            self._refill(n - self.available())
        wid, wrows, wx = self._warm
        nw = min(n, wid.shape[0])
        pos = np.flatnonzero(self._fail)[: n - nw]
        ids = np.concatenate([wid[:nw], self._ids[pos]])
        rows = np.concatenate([wrows[:nw].astype(self._rows.dtype, copy=False), self._rows[pos]])
        x = None
        if self.lam is not None:
            x = np.concatenate([wx[:nw], self._x[pos]])
        return ids, rows, x

    def pending_eval_cost(self, n: int) -> int:
        """Committee evaluations that committing the next n failures would charge."""
        n -= min(n, self._n_warm())
        if n <= 0:
            return 0
        pos = np.flatnonzero(self._fail)
        return int(self._cost[: int(pos[n - 1]) + 1].sum())

    def commit(self, n: int) -> None:
        wid, wrows, wx = self._warm
        nw = min(n, wid.shape[0])
        self._warm = (wid[nw:], wrows[nw:], None if wx is None else wx[nw:])
        n -= nw
        if n <= 0:
            return
        pos = np.flatnonzero(self._fail)
        if pos.shape[0] < n:
            raise RuntimeError("commit beyond peeked failures")
        self._consume(int(pos[n - 1]) + 1)

    def _consume(self, upto: int) -> None:
        costs = self._cost[:upto]
        self.ledger.charge("draw", upto)
        keys = None
        if self.source.logging:
            x = self._x[:upto] if self.lam is not None else None
            keys = _scan_keys(self._ids[:upto], costs, self.S, x)
        self.source.bill(self.ledger, "eval", int(costs.sum()), keys)
        self._ids = self._ids[upto:]
        self._rows = self._rows[upto:]
        if self.lam is not None:
            self._x = self._x[upto:]
        self._fail = self._fail[upto:]
        self._cost = self._cost[upto:]

    def take(self, n: int):
        out = self.peek(n)
        if out[0].shape[0] < n:
            self.give_up()
        self.commit(n)
        return out

    def give_up(self):
        """Charge every pending draw (all rejected) and raise :class:`Exhausted`."""
        self.commit(self._n_warm() + int(self._fail.sum()))
        if self._ids.shape[0]:
            self._consume(self._ids.shape[0])
        raise Exhausted(f"draw cap {self.max_draws} reached while sampling failures")


def failure_stream(source, S, ledger, max_draws, warm=None) -> RejectionStream:
    if source.kind != BINARY:
        raise TypeError("failure stream needs a binary source")
    return RejectionStream(source, S, ledger, max_draws, warm)


def failed_pair_stream(source, S, lam: RivalWeights, ledger, max_draws, warm=None) -> RejectionStream:
    if source.kind != RANKING:
        raise TypeError("failed-pair stream needs a ranking source")
    return RejectionStream(source, S, ledger, max_draws, warm, lam=lam)
