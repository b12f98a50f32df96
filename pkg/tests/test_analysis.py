import itertools
import json

import pytest

import oracles
from qsdc_swap import analysis
from qsdc_swap.adversary import AttackStrategy
from qsdc_swap.analysis import (
    EnumerationBudgetError,
    detection_from_swap_algebra,
    detection_report,
    enumerate_session_leaves,
    exact_detection,
    exact_leakage,
    honest_fidelity,
    monte_carlo,
    run_identities,
    session_detection,
    sweep_csv,
    sweep_report,
)
from qsdc_swap.bellmap import ENCODING_OPS
from qsdc_swap.protocol import DetectionPredicate, EncodeTarget, Verdict
from qsdc_swap.qcore import BELL_KINDS

STRATEGIES = list(AttackStrategy)
PREDICATES = list(DetectionPredicate)


@pytest.mark.parametrize("strategy", STRATEGIES)
@pytest.mark.parametrize("predicate", PREDICATES)
def test_detection_matches_label_oracle(strategy, predicate):
    expected = oracles.oracle_detection(strategy.value, predicate.value)
    assert exact_detection(strategy, predicate) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("strategy", STRATEGIES)
@pytest.mark.parametrize("predicate", PREDICATES)
def test_two_routes_agree(strategy, predicate):
    tree = exact_detection(strategy, predicate)
    algebra = detection_from_swap_algebra(strategy, predicate)
    assert abs(tree - algebra) < 1e-9


def test_headline_detection_values():
    announced = DetectionPredicate.ANNOUNCED_OP
    assert exact_detection(AttackStrategy.NONE, announced) == pytest.approx(0.0, abs=1e-12)
    assert exact_detection(
        AttackStrategy.REPLACE_MEASURE_AFTER, announced
    ) == pytest.approx(0.75, abs=1e-12)
    assert exact_detection(
        AttackStrategy.REPLACE_MEASURE_BEFORE, announced
    ) == pytest.approx(0.75, abs=1e-12)
    assert exact_detection(
        AttackStrategy.ANCILLA_PASSIVE, announced
    ) == pytest.approx(0.5, abs=1e-12)
    assert exact_detection(
        AttackStrategy.ANCILLA_CORRECTIVE, announced
    ) == pytest.approx(0.0, abs=1e-12)
    # the resend attack reproduces the announced-op correlation exactly,
    # so only the strict predicate sees it
    assert exact_detection(
        AttackStrategy.INTERCEPT_MEASURE_RESEND, announced
    ) == pytest.approx(0.0, abs=1e-12)
    assert exact_detection(
        AttackStrategy.INTERCEPT_MEASURE_RESEND, DetectionPredicate.STRICT_U0
    ) == pytest.approx(0.75, abs=1e-12)


@pytest.mark.parametrize("target", list(EncodeTarget))
def test_detection_independent_of_encode_target(target):
    for strategy in STRATEGIES:
        a = exact_detection(strategy, encode_target=target)
        b = detection_from_swap_algebra(strategy, encode_target=target)
        assert abs(a - b) < 1e-9
        assert abs(a - exact_detection(strategy)) < 1e-9


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_leakage_matches_oracle(strategy):
    expected = oracles.oracle_leakage(strategy.value)
    assert exact_leakage(strategy) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_fidelity_matches_oracle(strategy):
    expected = oracles.oracle_fidelity(strategy.value)
    assert honest_fidelity(strategy) == pytest.approx(expected, abs=1e-9)


def test_session_detection_curve():
    p = 0.75
    assert session_detection(p, 1) == pytest.approx(p)
    assert abs(session_detection(p, 20) - (1.0 - 0.25**20)) < 1e-12
    curve = [session_detection(0.3, m) for m in range(1, 30)]
    assert all(b >= a for a, b in zip(curve, curve[1:]))


def test_policy_sensitivity_identity_only():
    from qsdc_swap.bellmap import EncodingOp
    from qsdc_swap.protocol import single_op_policy

    policy = single_op_policy(EncodingOp.U0)
    # with an identity-only policy the strict predicate stops flagging
    # honest traffic but the resend attack becomes invisible to both
    assert exact_detection(
        AttackStrategy.NONE, DetectionPredicate.STRICT_U0, policy
    ) == pytest.approx(0.0, abs=1e-12)
    assert exact_detection(
        AttackStrategy.INTERCEPT_MEASURE_RESEND, DetectionPredicate.STRICT_U0, policy
    ) == pytest.approx(0.0, abs=1e-12)
    assert detection_from_swap_algebra(
        AttackStrategy.INTERCEPT_MEASURE_RESEND, DetectionPredicate.STRICT_U0, policy
    ) == pytest.approx(0.0, abs=1e-12)


def test_honest_session_leaves_uniform_outcomes():
    leaves = enumerate_session_leaves(1, [1], checking_ops=[ENCODING_OPS[2]])
    assert abs(sum(l.prob for l in leaves) - 1.0) < 1e-9
    outcome_probs = {}
    for leaf in leaves:
        _, _, alice, _, passed = leaf.checking[0]
        assert passed
        outcome_probs[alice] = outcome_probs.get(alice, 0.0) + leaf.prob
    assert set(outcome_probs) == set(BELL_KINDS)
    for p in outcome_probs.values():
        assert abs(p - 0.25) < 1e-9


def test_single_encoding_group_matches_column():
    from qsdc_swap.bellmap import correlation_table, EncodingOp

    leaves = enumerate_session_leaves(1, [], message_bits="01")
    assert abs(sum(l.prob for l in leaves) - 1.0) < 1e-9
    column = correlation_table()[EncodingOp.U1]
    for leaf in leaves:
        assert abs(leaf.prob - 0.25) < 1e-9
        _, alice, bob = leaf.encoding[0]
        assert (bob, alice) in column
        assert leaf.decoded_bits == "01"


def test_mixed_session_leaves_decode():
    leaves = enumerate_session_leaves(
        2, [1], checking_ops=[ENCODING_OPS[1]], message_bits="10"
    )
    assert abs(sum(l.prob for l in leaves) - 1.0) < 1e-9
    for leaf in leaves:
        assert leaf.verdict is Verdict.CLEAN
        assert leaf.decoded_bits == "10"


def test_replace_attack_joint_outcomes_uniform():
    # with the travel photons substituted, receiver and sender outcomes
    # are independent and uniform over all 16 pairs
    leaves = enumerate_session_leaves(
        1, [1], AttackStrategy.REPLACE_MEASURE_AFTER, checking_ops=[ENCODING_OPS[0]]
    )
    joint = {}
    for leaf in leaves:
        _, _, alice, bob, _ = leaf.checking[0]
        joint[(bob, alice)] = joint.get((bob, alice), 0.0) + leaf.prob
    assert len(joint) == 16
    for p in joint.values():
        assert abs(p - 1.0 / 16.0) < 1e-9


@pytest.mark.parametrize(
    "strategy,predicate",
    [
        (AttackStrategy.REPLACE_MEASURE_AFTER, DetectionPredicate.ANNOUNCED_OP),
        (AttackStrategy.ANCILLA_PASSIVE, DetectionPredicate.ANNOUNCED_OP),
        (AttackStrategy.INTERCEPT_MEASURE_RESEND, DetectionPredicate.STRICT_U0),
    ],
)
def test_two_group_detection_composes_iid(strategy, predicate):
    p1 = exact_detection(strategy, predicate)
    leaves = enumerate_session_leaves(2, [1, 2], strategy, predicate=predicate)
    assert abs(sum(l.prob for l in leaves) - 1.0) < 1e-9
    joint = sum(l.prob for l in leaves if l.verdict is Verdict.EVE_DETECTED)
    assert abs(joint - session_detection(p1, 2)) < 1e-9


def test_node_budget_enforced(monkeypatch):
    monkeypatch.setenv(analysis.NODE_BUDGET_ENV, "5")
    with pytest.raises(EnumerationBudgetError):
        enumerate_session_leaves(2, [1, 2], AttackStrategy.REPLACE_MEASURE_BEFORE)
    monkeypatch.delenv(analysis.NODE_BUDGET_ENV)
    exact_detection(AttackStrategy.NONE)  # default budget restored


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_monte_carlo_brackets_exact_at_3_sigma(strategy):
    trials = 10_000
    mc = monte_carlo(strategy, trials, seed=2024)
    for predicate in PREDICATES:
        p = exact_detection(strategy, predicate)
        sigma = max((p * (1 - p) / trials) ** 0.5, 1e-12)
        assert abs(mc.p_hat(predicate) - p) <= max(3 * sigma, 1e-9)


def test_monte_carlo_deterministic():
    a = monte_carlo(AttackStrategy.ANCILLA_PASSIVE, 2000, seed=5)
    b = monte_carlo(AttackStrategy.ANCILLA_PASSIVE, 2000, seed=5)
    assert a == b


def test_monte_carlo_honest_never_fails():
    mc = monte_carlo(AttackStrategy.NONE, 10_000, seed=1)
    assert mc.failures[DetectionPredicate.ANNOUNCED_OP] == 0


def test_identities_all_pass():
    checks = run_identities()
    assert len(checks) == 10
    for check in checks:
        assert check.passed, f"{check.name}: max error {check.max_error}"
        assert check.max_error < 1e-9


def test_detection_report_schema():
    report = detection_report(
        AttackStrategy.REPLACE_MEASURE_AFTER,
        DetectionPredicate.ANNOUNCED_OP,
        trials=2000,
        seed=99,
    )
    doc = report.to_json_dict()
    for key in ("strategy", "predicate", "p_exact", "p_mc", "ci", "paper_claim"):
        assert key in doc
    assert doc["p_exact"] == pytest.approx(0.75)
    assert doc["paper_claim"] == 0.75
    assert doc["abs_delta"] == pytest.approx(0.0)
    assert abs(doc["p_mc"] - 0.75) < 3 * (0.75 * 0.25 / 2000) ** 0.5
    assert doc["session_detection"]["20"] == pytest.approx(1 - 0.25**20)
    assert json.dumps(doc)  # serializable


def test_detection_report_requires_seed_for_sampling():
    with pytest.raises(ValueError):
        detection_report(AttackStrategy.NONE, trials=10, seed=None)


def test_sweep_report_and_csv():
    report = sweep_report(trials=0, seed=0)
    assert len(report["rows"]) == len(STRATEGIES) * len(PREDICATES)
    for row in report["rows"]:
        assert abs(row["p_exact"] - row["p_algebra"]) < 1e-9
        assert row["p_mc"] is None
    text = sweep_csv(report)
    lines = text.strip().split("\n")
    assert len(lines) == 1 + len(report["rows"])
    assert lines[0].startswith("strategy,predicate,")
    resend_rows = [l for l in lines if l.startswith("measure-resend,announced-op")]
    assert resend_rows and ",0," in resend_rows[0]
