"""Acceptance criteria 1-11, one test each, each printing a PASS/FAIL line."""

import itertools
import math
import time

import numpy as np
import pytest

from committee_select import cli
from committee_select.audit import audit_theta_fixed, gap_adaptive_audit
from committee_select.binary_select import (
    adaptive_fail_greedy,
    certify_miss,
    erm_exhaustive,
    failcond_elim,
    greedy_on_matrix,
)
from committee_select.core import QueryLedger, RankingProfile, RivalWeights
from committee_select.exact import (
    Pass,
    Witness,
    check_submodularity,
    lottery_value,
    opt_coverage_bruteforce,
    opt_phi_bruteforce,
    opt_theta_bruteforce,
    phi,
    prefix_cover_stats,
    theta,
    win_rate,
)
from committee_select.instances import (
    BernoulliProductLaw,
    BitBlockLaw,
    gen_bernoulli_product,
    gen_bitblock_ranking,
    gen_cyclic_profile,
    gen_planted_gap,
    gen_planted_gap_ordinal,
    materialize,
    nonsubmodular4,
    random_matrix,
    random_profile,
)
from committee_select.oracles import EmpiricalSource, query_pairwise, recover_ranking, sample_task
from committee_select.ordinal_select import minimax_wrapper, ordinal_failcond_elim, ptas_theta, weighted_ordinal_fail_greedy
from committee_select.stats import audit_T, erm_binary_T, ptas_size

RATIO = 1 - 1 / math.e
SEEDS = 200


def subsets(m):
    for r in range(m + 1):
        yield from itertools.combinations(range(m), r)


def binomial_cdf(x: int, n: int, p: float) -> float:
    return sum(math.comb(n, i) * p**i * (1 - p) ** (n - i) for i in range(x + 1))


def consistent_with(successes: int, n: int, p: float, alpha: float = 0.01) -> bool:
    """One-sided binomial test: False only if the success rate is significantly below p."""
    return binomial_cdf(successes, n, p) >= alpha


def test_criterion_01_marginal_identities(report):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for trial in range(100):
        m = int(rng.integers(2, 9))
        M = random_matrix(m, int(rng.integers(1, 40)), rng)
        P = random_profile(m, int(rng.integers(1, 15)), rng, weak=trial % 2 == 1, weighted=True)
        lam = RivalWeights(rng.dirichlet(np.ones(m)))
        phis = {S: phi(P, S, lam) for S in subsets(m)}
        for S in subsets(m):
            st = prefix_cover_stats(P, S, lam)
            rho, v = M.miss_rate(S), M.coverage(S)
            for c in range(m):
                if c in S:
                    continue
                T = tuple(sorted(S + (c,)))
                worst = max(worst, abs(M.coverage(T) - v - rho * M.rescue_rate(c, S)))
                worst = max(worst, abs(phis[T] - phis[S] - st.rho_lambda * st.q_lambda[c]))
    report(1, worst <= 1e-12, f"max identity residual {worst:.1e}", time.perf_counter() - start, 10)


def test_criterion_02_nonsubmodular_fixture(report):
    start = time.perf_counter()
    P = nonsubmodular4()
    a, b, c = 0, 1, 2
    values = [theta(P, S) for S in [(a,), (a, c), (a, b), (a, b, c)]]
    want = [1 / 3, 1 / 3, 2 / 3, 1.0]
    w = check_submodularity(lambda S: theta(P, S) if 0 < len(S) < 4 else None, 4)
    ok = all(abs(x - y) <= 1e-12 for x, y in zip(values, want))
    ok &= isinstance(w, Witness) and (w.S, w.R, w.x) == ((a,), (a, b), c)
    ok &= abs(w.gains[0]) <= 1e-12 and abs(w.gains[1] - 1 / 3) <= 1e-12
    detail = f"theta {np.round(values, 6).tolist()}, witness S={w.S} R={w.R} x={w.x} gains={np.round(w.gains, 6).tolist()}"
    report(2, ok, detail, time.perf_counter() - start, 1)


def test_criterion_03_structure_suite(report):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    failures = []
    for trial in range(50):
        m = int(rng.integers(2, 6))
        M = random_matrix(m, int(rng.integers(1, 25)), rng)
        sample = M.columns(rng.integers(0, M.n, size=int(rng.integers(1, 10))))
        for name, f in (("v", M.coverage), ("v_hat", sample.coverage)):
            if not isinstance(check_submodularity(f, m), Pass):
                failures.append((trial, name))
        P = random_profile(m, int(rng.integers(1, 10)), rng, weak=bool(trial % 2), weighted=True)
        vertices = [RivalWeights.point(m, x) for x in range(m)]
        for lam in vertices:
            if not isinstance(check_submodularity(lambda S: phi(P, S, lam), m), Pass):
                failures.append((trial, "phi"))
        sets = list(subsets(m))
        best = {S: P.best_ranks(S) for S in sets}
        for S in sets:
            if 0 < len(S) < m:
                th = theta(P, S)
                if abs(th - min(phi(P, S, lam) for lam in vertices)) > 1e-12:
                    failures.append((trial, "theta-min"))
                for T in sets:
                    if float(P.weights @ (best[S] <= best[T])) < 1 - len(T) * (1 - th) - 1e-12:
                        failures.append((trial, "lift"))
            for T in sets:
                if abs(win_rate(P, S, T) + win_rate(P, T, S) - 1) > 1e-12:
                    failures.append((trial, "symmetry"))
    report(3, not failures, f"{len(failures)} violations over 50 matrices and 50 profiles", time.perf_counter() - start, 60)


def test_criterion_04_cyclic_counterexample(report):
    start = time.perf_counter()
    worst = 0.0
    for N in (5, 7, 9):
        P = gen_cyclic_profile(N)
        for k in (1, 2, 3):
            for S in itertools.combinations(range(N), k):
                shifted = tuple((s - 1) % N for s in S)
                worst = max(worst, win_rate(P, S, shifted) - k / N)
    report(4, worst <= 1e-12, f"max WIN(S, S-1) - k/N = {worst:.3f}", time.perf_counter() - start, 30)


def test_criterion_05_greedy_ratio(report):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    violations = 0
    worst = np.inf
    for _ in range(500):
        m = int(rng.integers(2, 13))
        k = int(rng.integers(1, min(4, m) + 1))
        M = random_matrix(m, int(rng.integers(1, 40)), rng)
        opt = opt_coverage_bruteforce(M, k).value
        got = M.coverage(greedy_on_matrix(M, k))
        if opt > 0:
            worst = min(worst, got / opt)
        violations += got < RATIO * opt - 1e-12
    report(5, violations == 0, f"{violations} violations, worst ratio {worst:.3f}", time.perf_counter() - start, 60)


def _run_6a(eps=0.1, delta=0.2):
    ok = 0
    for seed in range(SEEDS):
        biases = np.random.default_rng([6, seed]).uniform(0.02, 0.35, size=12)
        law = BernoulliProductLaw(biases)
        opt = max(law.coverage(S) for S in itertools.combinations(range(12), 3))
        res = adaptive_fail_greedy(gen_bernoulli_product(12, biases, seed), 12, 3, eps, delta)
        ok += law.coverage(res.committee.members) >= RATIO * opt - eps
    return ok, delta


def _run_6b(eps=0.2, delta=0.2):
    ok = 0
    lam = RivalWeights.uniform(8)
    for seed in range(SEEDS):
        biases = np.random.default_rng([7, seed]).uniform(0.1, 0.9, size=8)
        law = BitBlockLaw(biases)
        best = opt_phi_bruteforce(law, 2, lam).value
        res = weighted_ordinal_fail_greedy(gen_bitblock_ranking(8, biases, seed), 8, 2, lam, eps, delta)
        ok += phi(law, res.committee.members, lam) >= RATIO * best - eps
    return ok, delta


def _run_6c(eps=0.4, delta=0.2):
    bitblock = materialize(gen_bitblock_ranking(6, [0.9, 0.8, 0.6, 0.5, 0.3, 0.2], seed=1), 200)
    counts = []
    for P, k in ((nonsubmodular4(), 1), (bitblock, 2)):
        target = RATIO * opt_theta_bruteforce(P, k).value - eps
        ok = 0
        for seed in range(SEEDS):
            res = minimax_wrapper(
                EmpiricalSource(P, seed), P.m, k, eps, delta, "full", tentative_pairs=200, max_rounds_per_step=2000
            )
            ok += lottery_value(P, [S.members for S in res.lottery.committees]) >= target
        counts.append(ok)
    return counts, delta


def _run_6d(eps=0.05, delta=0.2):
    biases = np.array([0.9, 0.8, 0.6, 0.5, 0.3, 0.2])
    target = theta(BitBlockLaw(biases), (0, 3))
    ok = sum(
        abs(gap_adaptive_audit(gen_bitblock_ranking(6, biases, s), (0, 3), eps, delta).theta_hat - target) <= eps
        for s in range(SEEDS)
    )
    return ok, delta


def test_criterion_06_high_probability_guarantees(report):
    start = time.perf_counter()
    a, delta = _run_6a()
    b, _ = _run_6b()
    (c1, c2), _ = _run_6c()
    d, _ = _run_6d()
    parts = {"a": a, "b": b, "c fixture": c1, "c bit-block": c2, "d": d}
    ok = all(consistent_with(x, SEEDS, 1 - delta) for x in parts.values())
    detail = ", ".join(f"{k} {v}/{SEEDS}" for k, v in parts.items()) + f" (need rate {1 - delta:.2f} at p=0.01)"
    report(6, ok, detail, time.perf_counter() - start, 600)


def test_criterion_07_certification_sandwich(report):
    start = time.perf_counter()
    r0, rho = 27, 0.5
    inside = 0
    for seed in range(1000):
        est = certify_miss(gen_bernoulli_product(2, [rho, rho], seed), (0,), r0, 10**6, QueryLedger())
        inside += rho <= 2 * r0 / est.draws_used <= 4 * rho
    need = 1 - 2 * math.exp(-r0 / 6)
    report(7, inside / 1000 >= need, f"{inside}/1000 inside [rho, 4 rho], need {need:.4f}", time.perf_counter() - start, 30)


def test_criterion_08_instance_dependent_savings(report):
    start = time.perf_counter()
    eta, delta = 0.01, 0.1
    binary, ordinal, audit = [], [], []
    audit_biases = np.array([0.9, 0.9, 0.9, 0.9, 0.1])
    gaps = BitBlockLaw(audit_biases).cover_probs((0,))[1:] - 0.5
    for seed in range(SEEDS):
        out = failcond_elim(gen_planted_gap(4, 1, [0.4, 0.05], seed), (0,), (1, 2, 3), eta, delta, QueryLedger())
        binary.append((out.queries[2], out.queries[3]))
        src = gen_planted_gap_ordinal(5, 2, [0.4, 0.05], seed)
        out = ordinal_failcond_elim(src, (0,), src.meta["arms"], src.meta["rival"], eta, delta, QueryLedger())
        ordinal.append((out.queries[3], out.queries[4]))
        rep = gap_adaptive_audit(gen_bitblock_ranking(5, audit_biases, seed), (0,), 0.02, delta)
        counts = rep.per_rival_counts
        audit.append((counts[4], np.mean([counts[1], counts[2], counts[3]])))
    ratios = [np.mean([r[0] for r in rows]) / np.mean([r[1] for r in rows]) for rows in (binary, ordinal, audit)]
    ok = all(r < 0.25 for r in ratios) and np.allclose(gaps, [0, 0, 0, 0.4])
    detail = "mean query ratio large/small gap: binary {:.4f}, pairwise {:.4f}, audit {:.4f}".format(*ratios)
    report(8, ok, detail, time.perf_counter() - start, 120)


def test_criterion_09_ptas(report):
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    mismatches = 0
    for trial in range(100):
        m = int(rng.integers(2, 9))
        k = int(rng.integers(1, min(3, m - 1) + 1))
        P = random_profile(m, int(rng.integers(1, 12)), rng, weak=trial % 3 == 0, weighted=True)
        got = theta(P, ptas_theta(P, k, 0.5))
        mismatches += abs(got - opt_theta_bruteforce(P, k).value) > 1e-12
    ok = mismatches == 0 and ptas_size(0.99) == 10 and ptas_size(0.5) > 3
    report(9, ok, f"{mismatches} mismatches over 100 profiles, K(0.99)={ptas_size(0.99)}", time.perf_counter() - start, 60)


def test_criterion_10_query_accounting(report):
    start = time.perf_counter()
    checks = {}
    rng = np.random.default_rng(10)
    M = random_matrix(6, 50, rng)
    src = EmpiricalSource(M, 0)
    src.enable_logging()
    res = erm_exhaustive(src, 6, 2, 0.3, 0.1)
    checks["erm m*T"] = res.ledger.q_cand == 6 * erm_binary_T(6, 2, 0.3, 0.1) and res.ledger.q_eval == 0
    checks["erm conservation"] = res.ledger.total == src.oracle_calls == src.query_log().shape[0]

    worst = 0
    for m in (2, 3, 5, 8):
        P = random_profile(m, 20, rng)
        s = EmpiricalSource(P, 1)
        for _ in range(20):
            led = QueryLedger()
            recover_ranking(sample_task(s, led), m, led)
            worst = max(worst, led.q_rank - m * math.ceil(math.log2(m)))
    checks["ranking recovery bound"] = worst <= 0

    P = random_profile(7, 30, rng)
    s = EmpiricalSource(P, 2)
    s.enable_logging()
    rep = audit_theta_fixed(s, (1, 4), 0.1, 0.1)
    checks["audit T(m-1)"] = rep.ledger.q_eval == audit_T(7, 2, 0.1, 0.1) * 6
    checks["audit conservation"] = rep.ledger.total == s.oracle_calls == s.query_log().shape[0]

    h = sample_task(EmpiricalSource(P, 3), QueryLedger())
    led = QueryLedger()
    query_pairwise(h, 0, 1, led)
    query_pairwise(h, 1, 0, led)
    checks["reverse pair free"] = led.q_eval == 1

    for name, run in (
        ("afg", lambda s: adaptive_fail_greedy(s, 8, 3, 0.2, 0.1).ledger),
        ("wofg", lambda s: weighted_ordinal_fail_greedy(s, 6, 2, RivalWeights.uniform(6), 0.4, 0.1).ledger),
        ("minimax", lambda s: minimax_wrapper(s, 4, 1, 0.5, 0.2, "sampled", tentative_pairs=100, max_rounds_per_step=500).ledger),
        ("gap audit", lambda s: gap_adaptive_audit(s, (0,), 0.05, 0.1).ledger),
    ):
        if name == "afg":
            s = gen_bernoulli_product(8, np.linspace(0.05, 0.4, 8), 4)
        elif name == "minimax":
            s = EmpiricalSource(nonsubmodular4(), 4)
        else:
            s = gen_bitblock_ranking(6, [0.9, 0.7, 0.5, 0.5, 0.3, 0.1], 4)
        s.enable_logging()
        led = run(s)
        checks[f"{name} conservation"] = led.total == s.oracle_calls == s.query_log().shape[0]
        checks[f"{name} no repeats"] = s.repeated_queries() == 0

    failed = [k for k, v in checks.items() if not v]
    report(10, not failed, f"{len(checks) - len(failed)}/{len(checks)} checks hold {failed or ''}", time.perf_counter() - start, 10)


def test_criterion_11_sweep_determinism(report, tmp_path):
    start = time.perf_counter()
    sweep = {
        "base": {"k": 2, "instance": {"kind": "bernoulli_product", "params": {"m": 8}, "seed": 2}, "n_tasks": 400},
        "grid": {"method": ["adaptive_fail_greedy", "top_k", "uniform_greedy"], "epsilon": [1.0, 0.5], "budget": [800]},
        "seeds": 3,
        "master_seed": 2024,
    }
    outputs = []
    for i in range(2):
        rows = cli.run_sweep(sweep)
        path = tmp_path / f"run{i}.csv"
        cli.write_rows(rows, path)
        cli.write_frontier(cli.frontier(rows), tmp_path / f"run{i}.frontier.csv")
        outputs.append(path.read_bytes() + (tmp_path / f"run{i}.frontier.csv").read_bytes())
    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0
    report(11, ok, f"two sweeps of {len(rows)} runs byte-identical: {ok}", time.perf_counter() - start, 30)
