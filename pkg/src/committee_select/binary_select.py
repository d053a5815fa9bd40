"""Committee selection from binary solve/fail feedback."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BinaryOutcomeMatrix,
    Committee,
    QueryLedger,
    SelectionResult,
    StepRecord,
    as_members,
    pad_to_size,
)
from .elimination import ElimOutcome, eliminate
from .exact import DEFAULT_CAP, opt_coverage_bruteforce
from .oracles import BINARY, binary_scan, failure_stream
from .stats import certify_params, elim_round_cap, erm_binary_T, greedy_binary_T

DRAW_CAP_FACTOR = 10


@dataclass
class MissRateEstimate:
    """Certified miss rate ``min(1, 2 r0 / N)`` and the stored failures."""

    rho_bar: float
    failures: tuple  # (draw ids, rows)
    draws_used: int


def _require_binary(source):
    if source.kind != BINARY:
        raise TypeError("this method needs a binary feedback source")


def _elicit(source, T, ledger):
    """Draw T tasks and read every cell: exactly m*T candidate queries."""
    ids, rows = source.draw(T)
    ledger.charge("draw", T)
    keys = None
    if source.logging:
        keys = [(int(d), c, -1) for d in ids for c in range(source.m)]
    source.bill(ledger, "cand", source.m * T, keys)
    return BinaryOutcomeMatrix(rows.T.copy())


def erm_exhaustive(source, m, k, epsilon, delta, cap=DEFAULT_CAP) -> SelectionResult:
    _require_binary(source)
    ledger = QueryLedger()
    sample = _elicit(source, erm_binary_T(m, k, epsilon, delta), ledger)
    best = opt_coverage_bruteforce(sample, k, cap)
    return SelectionResult(best.witness, ledger)


def greedy_on_matrix(matrix: BinaryOutcomeMatrix, k: int) -> Committee:
    """Standard greedy on observed coverage; stops at zero gain and pads."""
    bits = matrix.bits.astype(bool)
    covered = np.zeros(matrix.n, dtype=bool)
    chosen: list[int] = []
    for _ in range(k):
        gains = (bits & ~covered).sum(axis=1)
        gains[chosen] = -1
        c = int(np.argmax(gains))
        if gains[c] <= 0:
            break
        chosen.append(c)
        covered |= bits[c]
    return pad_to_size(chosen, k, matrix.m)


def greedy_full_elicitation(source, m, k, epsilon, delta) -> SelectionResult:
    _require_binary(source)
    ledger = QueryLedger()
    sample = _elicit(source, greedy_binary_T(m, k, epsilon, delta), ledger)
    return SelectionResult(greedy_on_matrix(sample, k), ledger)


def certify_miss(source, S, r0: int, M0: int, ledger: QueryLedger) -> MissRateEstimate | None:
    """Draw until r0 failures of S or M0 draws; None means STOP."""
    _require_binary(source)
    members = list(as_members(S))
    got_ids, got_rows = [], []
    n_fail = 0
    N = 0
    while N < M0 and n_fail < r0:
        n = min(M0 - N, max(64, 2 * (r0 - n_fail)))
        ids, rows = source.draw(n)
        covered, cost = binary_scan(rows, members)
        fail_pos = np.flatnonzero(~covered)
        if n_fail + fail_pos.size >= r0:
            # stop right after the r0-th failure
            n = int(fail_pos[r0 - n_fail - 1]) + 1
            fail_pos = fail_pos[: r0 - n_fail]
        ledger.charge("draw", n)
        keys = None
        if source.logging:
            keys = [(int(ids[t]), s, -1) for t in range(n) for s in members[: int(cost[t])]]
        source.bill(ledger, "eval", int(cost[:n].sum()), keys)
        got_ids.append(ids[fail_pos])
        got_rows.append(rows[fail_pos])
        n_fail += fail_pos.size
        N += n
    if n_fail < r0:
        return None
    failures = (np.concatenate(got_ids), np.concatenate(got_rows), None)
    return MissRateEstimate(min(1.0, 2.0 * r0 / N), failures, N)


def failcond_elim(
    source,
    S,
    A,
    eta: float,
    delta: float,
    ledger: QueryLedger,
    warm_start=None,
    max_draws: int | None = None,
) -> ElimOutcome:
    """eta-optimal rescue candidate on failures of S, with warm-started failures first.

    ``max_draws`` caps fresh rejection-sampling draws; the default allows a
    hundred draws per round of the deterministic round cap.
    """
    _require_binary(source)
    members = as_members(S)
    A = sorted(int(a) for a in A)
    if set(A) & set(members):
        raise ValueError("candidate set must be disjoint from the committee")
    if max_draws is None:
        max_draws = 100 * (elim_round_cap(len(A), eta, delta) + 1)
    stream = failure_stream(source, members, ledger, max_draws, warm_start)
    return eliminate(stream, A, eta, delta, ledger)


def adaptive_fail_greedy(source, m, k, epsilon, delta, initial=(), draw_cap_factor=DRAW_CAP_FACTOR) -> SelectionResult:
    """Certified-miss-rate greedy with failure-conditioned elimination per step."""
    _require_binary(source)
    ledger = QueryLedger()
    r0, M0 = certify_params(k, epsilon, delta)
    S = list(as_members(initial))
    trace: list[StepRecord] = []
    delta_i = delta / (2 * k)
    while len(S) < k:
        before = ledger.snapshot()
        cert = certify_miss(source, S, r0, M0, ledger)
        if cert is None:
            trace.append(StepRecord(None, None, 0, False, ledger.since(before)))
            break
        rho = cert.rho_bar
        eta = epsilon / (k * rho)
        A = [c for c in range(m) if c not in S]
        cap = draw_cap_factor * math.ceil(4 * elim_round_cap(len(A), eta, delta_i) / rho)
        out = failcond_elim(source, S, A, eta, delta_i, ledger, cert.failures, cap)
        S.append(out.candidate)
        trace.append(StepRecord(out.candidate, rho, out.rounds, out.capped, ledger.since(before)))
    return SelectionResult(pad_to_size(S, k, m), ledger, trace)


def conceptual_fail_greedy(matrix: BinaryOutcomeMatrix, source, k, epsilon, delta) -> SelectionResult:
    """Greedy with the true miss rate of a known matrix; a test reference only."""
    ledger = QueryLedger()
    S: list[int] = []
    trace = []
    for _ in range(k):
        rho = matrix.miss_rate(S)
        if rho <= epsilon / k:
            break
        eta = epsilon / (k * rho)
        A = [c for c in range(matrix.m) if c not in S]
        out = failcond_elim(source, S, A, min(eta, 1.0), delta / k, ledger)
        S.append(out.candidate)
        trace.append(StepRecord(out.candidate, rho, out.rounds, out.capped))
    return SelectionResult(pad_to_size(S, k, matrix.m), ledger, trace)


# -- baselines ------------------------------------------------------------------


def top_k_baseline(train: BinaryOutcomeMatrix, k: int, ledger: QueryLedger | None = None) -> Committee:
    """k best solo accuracies; charges the full read m * n_train."""
    if train.n == 0:
        raise ValueError("training matrix has no tasks")
    if ledger is not None:
        ledger.charge("cand", train.m * train.n)
    solo = train.bits.sum(axis=1)
    order = np.lexsort((np.arange(train.m), -solo))
    return Committee(tuple(order[:k]), k)


def sampled_erm_baseline(train: BinaryOutcomeMatrix, k: int, N: int, seed=0, ledger=None) -> Committee:
    """Best of N distinct uniformly sampled committees by training coverage.

    Each committee is scored by scanning members in id order per task and
    stopping at the first solver, so it costs at most k * n_train reads.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    m = train.m
    total = math.comb(m, k)
    rng = np.random.default_rng(seed)
    if N >= total:
        committees = [tuple(c) for c in itertools.combinations(range(m), k)]
    else:
        seen: set[tuple] = set()
        committees = []
        while len(committees) < N:
            S = tuple(sorted(rng.choice(m, size=k, replace=False).tolist()))
            if S not in seen:
                seen.add(S)
                committees.append(S)
    rows = train.bits.T
    best, best_S = -1, None
    for S in committees:
        covered, cost = binary_scan(rows, S)
        if ledger is not None:
            ledger.charge("eval", int(cost.sum()))
        v = int(covered.sum())
        if v > best or (v == best and S < best_S):
            best, best_S = v, S
    return Committee(best_S, k)


def uniform_greedy_baseline(source, m, k, Q_budget) -> SelectionResult:
    """Greedy with floor(Q / (k m)) fresh fully read tasks per step."""
    _require_binary(source)
    per_step = Q_budget // (k * m)
    if per_step < 1:
        raise ValueError("budget too small for one task per step")
    ledger = QueryLedger()
    S: list[int] = []
    for _ in range(k):
        ids, rows = source.draw(per_step)
        ledger.charge("draw", per_step)
        others = [c for c in range(m) if c not in S]
        if source.logging:
            source.bill(ledger, "eval", per_step * len(S), [(int(d), s, -1) for d in ids for s in S])
            source.bill(ledger, "cand", per_step * len(others), [(int(d), c, -1) for d in ids for c in others])
        else:
            source.bill(ledger, "eval", per_step * len(S))
            source.bill(ledger, "cand", per_step * len(others))
        missed = ~rows[:, S].astype(bool).any(axis=1) if S else np.ones(per_step, dtype=bool)
        gains = rows[missed][:, others].sum(axis=0)
        S.append(others[int(np.argmax(gains))])
    return SelectionResult(pad_to_size(S, k, m), ledger)


def ucb_greedy_baseline(source, m, k, Q_budget) -> SelectionResult:
    """Per step, UCB1 over rescue indicators on fresh failures with budget Q/k.

    Each accepted failure costs the committee evaluations spent to find it
    plus one candidate query; the step ends when the next pull would overrun
    the step budget, and the empirically best arm is added.
    """
    _require_binary(source)
    if Q_budget < k * m:
        raise ValueError("budget too small")
    ledger = QueryLedger()
    S: list[int] = []
    per_step = Q_budget // k
    for _ in range(k):
        arms = [c for c in range(m) if c not in S]
        n = np.zeros(len(arms))
        wins = np.zeros(len(arms))
        spent = 0
        t = 0
        stream = failure_stream(source, S, ledger, max_draws=max(1, per_step))
        while True:
            ids, rows, _ = stream.peek(1)
            if ids.shape[0] == 0:
                break
            scan_cost = stream.pending_eval_cost(1)
            if spent + scan_cost + 1 > per_step:
                break
            t += 1
            if t <= len(arms):
                a = t - 1
            else:
                ucb = wins / n + np.sqrt(2 * math.log(t) / n)
                a = int(np.argmax(ucb))
            stream.commit(1)
            source.bill(ledger, "cand", 1, [(int(ids[0]), arms[a], -1)])
            spent += scan_cost + 1
            n[a] += 1
            wins[a] += rows[0, arms[a]]
        means = np.where(n > 0, wins / np.maximum(n, 1), -1.0)
        S.append(arms[int(np.argmax(means))])
    return SelectionResult(pad_to_size(S, k, m), ledger)
