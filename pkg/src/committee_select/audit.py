"""Auditing theta for fixed committees and learning the best of a finite family."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Committee, QueryLedger, RankingProfile, SelectionResult, as_members
from .exact import theta_values
from .oracles import RANKING, recover_ranking, sample_task
from .stats import audit_T, elim_radii, family_erm_T

MAX_BATCH = 1 << 14


@dataclass
class AuditReport:
    theta_hat: float
    interval: tuple[float, float]
    per_rival_counts: dict[int, int]
    stopped_at: int
    ledger: QueryLedger = field(default_factory=QueryLedger)


def _check(source, S):
    if source.kind != RANKING:
        raise TypeError("audits need a pairwise (ranking) source")
    members = as_members(S)
    if not members or len(members) >= source.m:
        raise ValueError("audited committee must be nonempty and proper")
    return list(members)


def _bill_rounds(source, ledger, ids, members, rivals_per_round):
    """Charge top-finding plus rival comparisons for each audited ranking."""
    n = len(ids)
    per = [len(members) - 1 + len(r) for r in rivals_per_round]
    keys = None
    if source.logging:
        keys = []
        for d, rivals in zip(ids, rivals_per_round):
            keys.extend((int(d), s, -3) for s in members[1:])
            keys.extend((int(d), -4, int(x)) for x in rivals)
    ledger.charge("draw", n)
    source.bill(ledger, "eval", int(sum(per)), keys)


def audit_theta_fixed(source, S, epsilon, delta) -> AuditReport:
    """Non-adaptive audit: T rankings, each compared against every rival."""
    members = _check(source, S)
    m = source.m
    T = audit_T(m, len(members), epsilon, delta)
    ledger = QueryLedger()
    ids, rows = source.draw(T)
    outside = [x for x in range(m) if x not in members]
    best = rows[:, members].min(axis=1)
    g = (best[:, None] <= rows[:, outside]).mean(axis=0)
    _bill_rounds(source, ledger, ids, members, [outside] * T)
    theta_hat = float(g.min())
    interval = (max(0.0, theta_hat - epsilon), min(1.0, theta_hat + epsilon))
    return AuditReport(theta_hat, interval, {x: T for x in outside}, T, ledger)


def audit_family_erm(source, family, epsilon, delta) -> SelectionResult:
    """Recover T full rankings and return the family member with the best empirical theta."""
    family = [as_members(S) for S in family]
    if not family:
        raise ValueError("family must be nonempty")
    for S in family:
        _check(source, S)
    if not source.strict:
        raise TypeError("full ranking recovery needs a strict source")
    T = family_erm_T(len(family), epsilon, delta)
    ledger = QueryLedger()
    ranks = np.array([recover_ranking(sample_task(source, ledger), source.m, ledger) for _ in range(T)])
    sample = RankingProfile(ranks)
    vals = [float(theta_values(sample, np.array([S]))[0]) for S in family]
    best = int(np.argmax(vals))
    return SelectionResult(Committee(family[best]), ledger)


class GapAudit:
    """Resumable gap-adaptive audit of one committee.

    Every round draws a ranking, finds the committee's best member and compares
    it with each still-active rival. A rival is dropped once its lower bound
    exceeds the smallest active upper bound. Unused lookahead draws are kept, so
    pausing and resuming replays exactly the uninterrupted transcript.
    """

    def __init__(self, source, S, delta):
        self.members = _check(source, S)
        self.source = source
        self.delta = delta
        self.rivals = np.array([x for x in range(source.m) if x not in self.members], dtype=np.int64)
        self.M = self.rivals.size
        self.sums = np.zeros(self.M, dtype=np.int64)
        self.counts = np.zeros(self.M, dtype=np.int64)
        self.active = np.ones(self.M, dtype=bool)
        self.n = 0
        self.ledger = QueryLedger()
        self._ids = np.zeros(0, dtype=np.int64)
        self._rows = np.zeros((0, source.m), dtype=np.int16)
        self.lower, self.upper = 0.0, 1.0

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def _peek(self, n):
        if self._ids.shape[0] < n:
            ids, rows = self.source.draw(n - self._ids.shape[0])
            self._ids = np.concatenate([self._ids, ids])
            self._rows = np.concatenate([self._rows, rows.astype(self._rows.dtype, copy=False)])
        return self._ids[:n], self._rows[:n]

    def _commit(self, n, act):
        ids = self._ids[:n]
        _bill_rounds(self.source, self.ledger, ids, self.members, [self.rivals[act]] * n)
        self._ids = self._ids[n:]
        self._rows = self._rows[n:]

    def _bounds(self, means, rad):
        lo = np.clip(means - rad, 0.0, 1.0)
        hi = np.clip(means + rad, 0.0, 1.0)
        return lo, hi

    def advance(self, width: float) -> "GapAudit":
        """Run until the theta interval is at most ``width`` wide."""
        batch = 64
        while self.width > width:
            ids, rows = self._peek(batch)
            act = np.flatnonzero(self.active)
            best = rows[:, self.members].min(axis=1)
            wins = best[:, None] <= rows[:, self.rivals[act]]
            cs = self.sums[act] + np.cumsum(wins, axis=0)
            nn = self.n + np.arange(1, batch + 1)
            rad = elim_radii(nn, self.M, self.delta)
            means = cs / nn[:, None]
            L, U = self._bounds(means, rad[:, None])
            minU = U.min(axis=1)
            drop = L > minU[:, None]
            widths = minU - L.min(axis=1)
            event = drop.any(axis=1) | (widths <= width)
            hits = np.flatnonzero(event)
            j = int(hits[0]) if hits.size else batch - 1
            self._commit(j + 1, act)
            self.sums[act] = cs[j]
            self.counts[act] += j + 1
            self.n = int(nn[j])
            self.lower, self.upper = float(L[j].min()), float(minU[j])
            if hits.size:
                self.active[act[drop[j]]] = False
            else:
                batch = min(2 * batch, MAX_BATCH)
        return self

    def report(self) -> AuditReport:
        counts = {int(x): int(c) for x, c in zip(self.rivals, self.counts)}
        mid = 0.5 * (self.lower + self.upper)
        return AuditReport(mid, (self.lower, self.upper), counts, self.n, self.ledger)


def gap_adaptive_audit(source, S, epsilon, delta) -> AuditReport:
    return GapAudit(source, S, delta).advance(2 * epsilon).report()


@dataclass
class FamilyResult:
    committee: Committee
    ledger: QueryLedger
    audits: list[GapAudit]
    eliminated_at: dict[int, int]


def active_family_learning(source, family, epsilon, delta, c: float = 0.25) -> FamilyResult:
    """Phased racing over committees built on resumable gap-adaptive audits.

    Phase j audits every surviving committee to width ``max(c 2^-j, eps/2)``;
    a committee leaves once its upper bound trails the best lower bound by more
    than eps, and the race ends when some committee's lower bound is within
    eps of every upper bound.
    """
    family = [as_members(S) for S in family]
    if not family:
        raise ValueError("family must be nonempty")
    N = len(family)
    audits = [GapAudit(source.spawn(), S, delta / N) for S in family]
    alive = list(range(N))
    eliminated_at: dict[int, int] = {}
    j = 0
    while True:
        j += 1
        target = max(c * 2.0**-j, epsilon / 2)
        for i in alive:
            audits[i].advance(target)
        best_L = max(audits[i].lower for i in alive)
        for i in list(alive):
            if audits[i].upper < best_L - epsilon:
                alive.remove(i)
                eliminated_at[i] = j
        max_U = max(audits[i].upper for i in alive)
        winners = [i for i in alive if audits[i].lower >= max_U - epsilon]
        if winners:
            win = max(winners, key=lambda i: (audits[i].lower, -i))
            ledger = QueryLedger()
            for a in audits:
                ledger.merge(a.ledger)
            return FamilyResult(Committee(family[win]), ledger, audits, eliminated_at)
