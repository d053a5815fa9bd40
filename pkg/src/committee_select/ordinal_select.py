"""Committee selection from pairwise comparisons.

The evaluators ``win_rate``, ``theta_exact`` and ``prefix_cover_stats`` live in
:mod:`committee_select.exact` and are re-exported here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CapExceeded,
    Committee,
    QueryLedger,
    RankingProfile,
    RivalWeights,
    SelectionResult,
    StepRecord,
    as_members,
    pad_to_size,
)
from .elimination import ElimOutcome, eliminate
from .exact import (
    DEFAULT_CAP,
    cover_probs,
    lottery_value,
    opt_theta_bruteforce,
    prefix_cover_stats,
    theta_exact,
    theta_values,
    win_rate,
)
from .oracles import RANKING, EmpiricalSource, failed_pair_stream, pair_scan, recover_ranking, sample_task
from .stats import (
    PTAS_C0,
    elim_round_cap,
    hoeffding_slack,
    minimax_audit_T,
    mw_rate,
    mw_rounds_and_rate,
    ordinal_erm_T,
    ptas_size,
    ranking_sort_cost,
    wofg_L,
)

__all__ = [
    "win_rate",
    "theta_exact",
    "prefix_cover_stats",
    "ordinal_erm",
    "ordinal_failcond_elim",
    "weighted_ordinal_fail_greedy",
    "minimax_wrapper",
    "ptas_theta",
    "borda_top_k",
    "sampled_erm_theta",
    "Lottery",
    "MinimaxResult",
]

MAX_ROUNDS_PER_STEP = 10_000
DRAW_CAP_FACTOR = 10


def _require_ranking(source):
    if source.kind != RANKING:
        raise TypeError("this method needs a pairwise (ranking) source")


def ordinal_erm(source, m, k, epsilon, delta, cap=DEFAULT_CAP) -> SelectionResult:
    """Recover T full rankings by comparison sort and maximize empirical theta."""
    _require_ranking(source)
    if not source.strict:
        raise TypeError("full ranking recovery needs a strict source")
    if math.comb(m, k) > cap:
        raise CapExceeded(math.comb(m, k), cap)
    ledger = QueryLedger()
    T = ordinal_erm_T(m, k, epsilon, delta)
    ranks = np.array([recover_ranking(sample_task(source, ledger), m, ledger) for _ in range(T)])
    best = opt_theta_bruteforce(RankingProfile(ranks), k, cap)
    return SelectionResult(best.witness, ledger)


def ordinal_failcond_elim(
    source,
    S,
    A,
    lam: RivalWeights,
    eta: float,
    delta: float,
    ledger: QueryLedger,
    warm_start=None,
    max_draws: int | None = None,
    round_cap: int | None = None,
) -> ElimOutcome:
    """eta-optimal rescue candidate on failed (ranking, rival) pairs of S."""
    _require_ranking(source)
    members = as_members(S)
    A = sorted(int(a) for a in A)
    if set(A) & set(members):
        raise ValueError("candidate set must be disjoint from the committee")
    if max_draws is None:
        max_draws = 100 * (elim_round_cap(len(A), eta, delta) + 1)
    stream = failed_pair_stream(source, members, lam, ledger, max_draws, warm_start)
    return eliminate(stream, A, eta, delta, ledger, round_cap)


def _tentative_pairs(source, S, lam, L, ledger):
    """Failure count among L fresh (ranking, rival) pairs, scanning S per pair."""
    ids, rows = source.draw(L)
    x = source.draw_rivals(L, lam)
    covered, cost = pair_scan(rows, x, S)
    ledger.charge("draw", L)
    keys = None
    if source.logging:
        keys = []
        for t in range(L):
            queried = [s for s in S if s != x[t]][: int(cost[t])]
            keys.extend((int(ids[t]), s, int(x[t])) for s in queried)
    source.bill(ledger, "eval", int(cost.sum()), keys)
    return int((~covered).sum())


def weighted_ordinal_fail_greedy(
    source,
    m,
    k,
    lam: RivalWeights,
    epsilon,
    delta,
    initial=(),
    tentative_pairs: int | None = None,
    max_rounds_per_step: int | None = MAX_ROUNDS_PER_STEP,
    draw_cap_factor: int = DRAW_CAP_FACTOR,
    ledger: QueryLedger | None = None,
) -> SelectionResult:
    """Greedy on the rival-weighted cover objective with failure-conditioned steps.

    ``tentative_pairs`` overrides the miss-rate sample size; the upper
    confidence slack then becomes the matching Hoeffding term.
    """
    _require_ranking(source)
    ledger = ledger if ledger is not None else QueryLedger()
    L = tentative_pairs if tentative_pairs is not None else wofg_L(k, epsilon, delta)
    slack = epsilon / (16 * k) if tentative_pairs is None else hoeffding_slack(L, k, delta)
    S = list(as_members(initial))
    trace: list[StepRecord] = []
    delta_i = delta / (2 * k)
    while len(S) < k:
        before = ledger.snapshot()
        fails = _tentative_pairs(source, S, lam, L, ledger)
        rho_bar = min(1.0, fails / L + slack)
        if rho_bar <= epsilon / (4 * k):
            trace.append(StepRecord(None, rho_bar, 0, False, ledger.since(before)))
            break
        eta = epsilon / (4 * k * rho_bar)
        A = [c for c in range(m) if c not in S]
        rounds = elim_round_cap(len(A), eta, delta_i)
        if max_rounds_per_step is not None:
            rounds = min(rounds, max_rounds_per_step)
        cap = draw_cap_factor * math.ceil(2 * rounds / rho_bar)
        out = ordinal_failcond_elim(source, S, A, lam, eta, delta_i, ledger, None, cap, max_rounds_per_step)
        S.append(out.candidate)
        trace.append(StepRecord(out.candidate, rho_bar, out.rounds, out.capped, ledger.since(before)))
    return SelectionResult(pad_to_size(S, k, m), ledger, trace)


# -- minimax wrapper ------------------------------------------------------------


@dataclass
class Lottery:
    committees: list[Committee]

    def __post_init__(self):
        if not self.committees:
            raise ValueError("lottery needs at least one committee")

    @property
    def R(self) -> int:
        return len(self.committees)

    def value(self, data) -> float:
        return lottery_value(data, [S.members for S in self.committees])

    def union(self) -> Committee:
        members = set()
        for S in self.committees:
            members |= set(S.members)
        return Committee(tuple(members))


@dataclass
class MinimaxResult:
    lottery: Lottery
    union: Committee
    ledger: QueryLedger
    lambdas: list[np.ndarray] = field(default_factory=list)


def _audit_full(profile: RankingProfile, S, source, ledger, round_idx):
    """Cover probabilities read off the full training profile: n(m-1) reads."""
    n, m = profile.n, profile.m
    keys = None
    if source.logging:
        base = -(round_idx + 1) * n - np.arange(n)
        keys = np.stack(
            [np.repeat(base, m - 1), np.tile(np.arange(m - 1), n), np.full(n * (m - 1), -2)], axis=1
        )
    source.bill(ledger, "eval", n * (m - 1), keys)
    return cover_probs(profile, S)


def _audit_sampled(source, S, T, ledger):
    """Fresh-task audit: find the top member, then compare it with every rival."""
    members = list(as_members(S))
    m = source.m
    ids, rows = source.draw(T)
    ledger.charge("draw", T)
    best = rows[:, members].min(axis=1)
    outside = [x for x in range(m) if x not in members]
    g = np.ones(m)
    g[outside] = (best[:, None] <= rows[:, outside]).mean(axis=0)
    keys = None
    if source.logging:
        top = np.array(members)[rows[:, members].argmin(axis=1)]
        keys = [(int(d), s, -3) for d in ids for s in members[1:]]
        keys += [(int(d), int(tp), x) for d, tp in zip(ids, top) for x in outside]
    source.bill(ledger, "eval", T * (m - 1), keys)
    return g


def minimax_wrapper(
    source,
    m,
    k,
    epsilon,
    delta,
    rival_audit_mode: str = "sampled",
    c_R: float = 8.0,
    R: int | None = None,
    audit_const: float = 2.0,
    tentative_pairs: int | None = None,
    max_rounds_per_step: int | None = MAX_ROUNDS_PER_STEP,
    train_profile: RankingProfile | None = None,
) -> MinimaxResult:
    """Multiplicative weights over rivals against a fixed-rival greedy oracle.

    Rivals the current committee fails against gain weight. Full-information
    audits read ``train_profile`` (default: the source's own profile).
    """
    _require_ranking(source)
    if not 1 <= k < m:
        raise ValueError(f"need 1 <= k < m, got k={k}, m={m}")
    if rival_audit_mode not in ("sampled", "full"):
        raise ValueError("rival_audit_mode must be 'sampled' or 'full'")
    if R is None:
        R, eta_mw = mw_rounds_and_rate(m, epsilon, c_R)
    else:
        eta_mw = mw_rate(m, R)
    if rival_audit_mode == "full":
        if train_profile is None:
            if not isinstance(source, EmpiricalSource):
                raise TypeError("full-information audits need a finite training profile")
            train_profile = source.data
    T_audit = minimax_audit_T(m, R, epsilon, delta, audit_const)
    ledger = QueryLedger()
    lam = np.full(m, 1.0 / m)
    committees, lambdas = [], []
    for t in range(R):
        lambdas.append(lam.copy())
        res = weighted_ordinal_fail_greedy(
            source, m, k, RivalWeights(lam), epsilon / 4, delta / (2 * R),
            tentative_pairs=tentative_pairs, max_rounds_per_step=max_rounds_per_step, ledger=ledger,
        )
        S = res.committee
        committees.append(S)
        if rival_audit_mode == "full":
            g = _audit_full(train_profile, S.members, source, ledger, t)
        else:
            g = _audit_sampled(source, S.members, T_audit, ledger)
        g[list(S.members)] = 1.0
        w = lam * np.exp(eta_mw * (1.0 - g))
        lam = w / w.sum()
    lottery = Lottery(committees)
    return MinimaxResult(lottery, lottery.union(), ledger, lambdas)


# -- exhaustive and full-information methods ---------------------------------------


def _committee_count(m, sizes):
    return sum(math.comb(m, s) for s in sizes)


def ptas_theta(profile, k: int, gamma: float, cap: int = DEFAULT_CAP, c0: float = PTAS_C0) -> Committee:
    """Best theta over all committees of size at most min(k, K_gamma), padded to k."""
    m = profile.m
    if not 1 <= k < m:
        raise ValueError(f"need 1 <= k < m, got k={k}, m={m}")
    K = ptas_size(gamma, c0)
    top = min(k, K)
    sizes = range(1, top + 1)
    count = _committee_count(m, sizes)
    if count > cap:
        raise CapExceeded(count, cap)
    best_val, best_S = -np.inf, None
    for s in sizes:
        block = np.array(list(itertools.combinations(range(m), s)), dtype=np.int64)
        for i in range(0, block.shape[0], 20_000):
            chunk = block[i : i + 20_000]
            vals = theta_values(profile, chunk)
            j = int(np.argmax(vals))
            if vals[j] > best_val + 1e-12:
                best_val, best_S = float(vals[j]), tuple(chunk[j])
    return pad_to_size(best_S, k, m)


def borda_top_k(profile: RankingProfile, k: int, ledger: QueryLedger | None = None) -> Committee:
    """k lowest weighted mean ranks; charges ceil(log2 m!) comparisons per ranking."""
    if k > profile.m:
        raise ValueError("k exceeds the number of candidates")
    if ledger is not None:
        ledger.charge("rank", ranking_sort_cost(profile.m) * profile.n)
    mean = profile.mean_ranks()
    order = np.lexsort((np.arange(profile.m), mean))
    return Committee(tuple(order[:k]), k)


def sampled_erm_theta(train: RankingProfile, k: int, N: int, seed=0, ledger=None) -> Committee:
    """Best of N distinct sampled committees by training theta; n(m-1) reads each."""
    m = train.m
    if N < 1:
        raise ValueError("N must be at least 1")
    total = math.comb(m, k)
    rng = np.random.default_rng(seed)
    if N >= total:
        committees = list(itertools.combinations(range(m), k))
    else:
        seen: set[tuple] = set()
        committees = []
        while len(committees) < N:
            S = tuple(sorted(rng.choice(m, size=k, replace=False).tolist()))
            if S not in seen:
                seen.add(S)
                committees.append(S)
    if ledger is not None:
        ledger.charge("eval", len(committees) * train.n * (m - 1))
    vals = theta_values(train, np.array(committees, dtype=np.int64))
    best = max(range(len(committees)), key=lambda i: (vals[i], tuple(-c for c in committees[i])))
    return Committee(committees[best], k)
