import numpy as np
import pytest

from committee_select.audit import (
    GapAudit,
    active_family_learning,
    audit_family_erm,
    audit_theta_fixed,
    gap_adaptive_audit,
)
from committee_select.core import RankingProfile
from committee_select.exact import theta
from committee_select.instances import BitBlockLaw, gen_bitblock_ranking
from committee_select.oracles import EmpiricalSource
from committee_select.stats import audit_T

A, B, C, D = range(4)
BIASES = np.array([0.9, 0.8, 0.6, 0.5, 0.3, 0.2])


def test_fixed_audit_on_a_point_mass_profile():
    P = RankingProfile.from_orders([[2, 0, 3, 1, 4]])
    rep = audit_theta_fixed(EmpiricalSource(P, 0), (0, 1), 0.1, 0.1)
    assert rep.theta_hat == theta(P, (0, 1))
    T = audit_T(5, 2, 0.1, 0.1)
    assert rep.ledger.q_eval == T * (5 - 2 + 1)
    assert rep.stopped_at == T


def test_fixed_audit_charges_T_times_m_minus_one_for_singletons(ns4):
    rep = audit_theta_fixed(EmpiricalSource(ns4, 1), (B,), 0.05, 0.1)
    assert rep.ledger.q_eval == audit_T(4, 1, 0.05, 0.1) * 3
    assert set(rep.per_rival_counts) == {A, C, D}


def test_fixed_audit_accuracy_on_bitblocks():
    law = BitBlockLaw(BIASES)
    target = theta(law, (1, 4))
    eps, delta = 0.05, 0.1
    ok = sum(
        abs(audit_theta_fixed(gen_bitblock_ranking(6, BIASES, s), (1, 4), eps, delta).theta_hat - target) <= eps
        for s in range(300)
    )
    assert ok >= (1 - delta) * 300


def test_audit_rejects_improper_committees(ns4):
    with pytest.raises(ValueError):
        audit_theta_fixed(EmpiricalSource(ns4), (A, B, C, D), 0.1, 0.1)
    with pytest.raises(ValueError):
        gap_adaptive_audit(EmpiricalSource(ns4), (), 0.1, 0.1)


def test_family_erm(ns4):
    singles = [(c,) for c in range(4)]
    assert audit_family_erm(EmpiricalSource(ns4, 2), singles, 0.1, 0.1).committee.members == (B,)
    assert audit_family_erm(EmpiricalSource(ns4, 2), [(C, D)], 0.1, 0.1).committee.members == (C, D)


def test_gap_audit_single_rival_is_a_bernoulli_mean():
    P = RankingProfile.from_orders([[0, 1], [1, 0], [1, 0], [1, 0]])
    rep = gap_adaptive_audit(EmpiricalSource(P, 0), (0,), 0.05, 0.1)
    assert rep.theta_hat == pytest.approx(0.25, abs=0.05)
    assert rep.ledger.q_eval == rep.stopped_at == rep.per_rival_counts[1]


def test_gap_audit_interval_width_and_accuracy():
    law = BitBlockLaw(BIASES)
    target = theta(law, (0,))
    eps = 0.05
    for seed in range(20):
        rep = gap_adaptive_audit(gen_bitblock_ranking(6, BIASES, seed), (0,), eps, 0.1)
        lo, hi = rep.interval
        assert hi - lo <= 2 * eps + 1e-12
        assert abs(rep.theta_hat - target) <= eps


def test_gap_audit_resume_matches_straight_run():
    straight = GapAudit(gen_bitblock_ranking(6, BIASES, 7), (0, 1), 0.1).advance(0.05).report()
    staged = GapAudit(gen_bitblock_ranking(6, BIASES, 7), (0, 1), 0.1)
    staged.advance(0.3).advance(0.1).advance(0.05)
    rep = staged.report()
    assert rep.interval == straight.interval
    assert rep.ledger.as_dict() == straight.ledger.as_dict()


def test_gap_audit_logging_conservation():
    src = gen_bitblock_ranking(6, BIASES, 3)
    src.enable_logging()
    rep = gap_adaptive_audit(src, (0, 2), 0.05, 0.1)
    assert rep.ledger.total == src.oracle_calls == src.query_log().shape[0]
    assert src.repeated_queries() == 0


def test_active_family_learning_drops_the_weak_committee():
    law = BitBlockLaw(BIASES)
    strong, weak = (0, 1), (5,)
    assert theta(law, strong) - theta(law, weak) > 0.4
    res = active_family_learning(gen_bitblock_ranking(6, BIASES, 4), [strong, weak], 0.05, 0.1)
    assert res.committee.members == strong
    assert res.audits[1].ledger.total < res.audits[0].ledger.total
    assert res.ledger.total == sum(a.ledger.total for a in res.audits)


def test_active_family_learning_singleton_family(ns4):
    res = active_family_learning(EmpiricalSource(ns4, 0), [(A, B)], 0.1, 0.1)
    assert res.committee.members == (A, B)
    assert res.audits[0].width <= 0.25
