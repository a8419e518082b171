import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfusion.oracle import full_branches
from wfusion.protocols import (
    OutcomeClass,
    classify_outcome,
    fuse,
    fuse_three,
    fuse_two,
    normalize_outcome,
    success_probability_three,
    success_probability_two,
)
from wfusion.registers import expand_to_full, w_vector

S, BP, R, HF = (OutcomeClass.SUCCESS, OutcomeClass.BYPRODUCT,
                OutcomeClass.RECYCLABLE, OutcomeClass.HARD_FAILURE)


def probs(report):
    return {b.outcome: b.probability for b in report.branches}


def test_two_fusion_bell_pairs():
    p = probs(fuse_two(2, 2))
    expected = {"ge": 1 / 4, "eg": 1 / 4, "ee": 1 / 12, "gge": 1 / 6, "ggg": 1 / 4}
    assert p == pytest.approx(expected, abs=1e-14)


def test_two_fusion_three_three():
    assert fuse_two(3, 3).success_probability == pytest.approx(10 / 27, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 80), st.integers(2, 80))
def test_two_fusion_closed_forms(N, M):
    p = probs(fuse_two(N, M))
    d = 3 * N * M
    assert p["ge"] == pytest.approx((N + M - 1) / d, abs=1e-13)
    assert p["eg"] == pytest.approx((N + M - 1) / d, abs=1e-13)
    assert p["ee"] == pytest.approx(1 / d, abs=1e-13)
    assert p["gge"] == pytest.approx((N + M - 2) / d, abs=1e-13)
    assert p["ggg"] == pytest.approx((N - 1) * (M - 1) / (N * M), abs=1e-13)


def test_three_fusion_bell_pairs():
    rep = fuse_three(2, 2, 2)
    p = probs(rep)
    assert rep.success_probability == pytest.approx(3 / 8, abs=1e-14)
    assert p["ggg"] == pytest.approx(1 / 8, abs=1e-14)
    assert p["eee"] == pytest.approx(1 / 8, abs=1e-14)
    assert p["egg"] + p["geg"] + p["gge"] == pytest.approx(3 / 8, abs=1e-14)
    assert rep.total_probability == pytest.approx(1, abs=1e-14)


def test_three_fusion_ggg_mass():
    assert probs(fuse_three(3, 3, 3))["ggg"] == pytest.approx(8 / 27, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(2, 30), st.integers(2, 30))
def test_three_fusion_closed_forms(N, M, T):
    rep = fuse_three(N, M, T)
    assert rep.success_probability == pytest.approx(success_probability_three(N, M, T), abs=1e-13)
    assert rep.branch("ggg").probability == pytest.approx((N - 1) * (M - 1) * (T - 1) / (N * M * T), abs=1e-13)
    assert rep.total_probability == pytest.approx(1, abs=1e-12)


def test_success_symmetric_and_decreasing():
    for N in range(2, 20):
        for M in range(2, 20):
            assert success_probability_two(N, M) == success_probability_two(M, N)
            assert success_probability_two(N + 1, M) < success_probability_two(N, M)
    assert success_probability_two(2, 2) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        success_probability_two(1, 4)
    with pytest.raises(ValueError):
        success_probability_three(2, 2, 1)


def test_branch_probabilities_symmetric_under_swap():
    a, b = probs(fuse_two(3, 6)), probs(fuse_two(6, 3))
    assert a["ge"] == pytest.approx(b["eg"], abs=1e-14)
    assert a["gge"] == pytest.approx(b["gge"], abs=1e-14)


@pytest.mark.parametrize("protocol,label,cls", [
    ("two", "ge", S), ("two", "eg", S), ("two", "ee", HF), ("two", "gg->e", BP), ("two", "gg→g", R),
    ("two", "gge", BP), ("three", "gee", S), ("three", "ege", S), ("three", "eeg", S),
    ("three", "ggg", R), ("three", "eee", HF), ("three", "egg", HF), ("three", "geg", HF),
    ("three", "gge", HF),
])
def test_classification(protocol, label, cls):
    assert classify_outcome(protocol, label) is cls


@pytest.mark.parametrize("protocol,label", [("two", "gg"), ("two", "gxe"), ("three", "ge"), ("four", "ge"),
                                            ("two", "egg")])
def test_bad_outcomes(protocol, label):
    with pytest.raises(ValueError):
        classify_outcome(protocol, label)


def test_outcome_normalisation():
    assert normalize_outcome("two", "GG -> E") == "gge"


@pytest.mark.parametrize("sizes", [(2, 2), (3, 5), (10, 4)])
def test_two_fusion_successes_are_w_states(sizes):
    rep = fuse(2, sizes)
    N, M = sizes
    for label in ("ge", "eg"):
        b = rep.branch(label)
        assert b.residual_sizes == [N + M - 1]
        assert b.post_correction_fidelity == pytest.approx(1, abs=1e-10)
    gge = rep.branch("gge")
    assert gge.residual_sizes == [N + M - 2]
    assert gge.post_correction_fidelity == pytest.approx(1, abs=1e-10)
    assert gge.pulsed_atoms == 0
    ggg = rep.branch("ggg")
    assert ggg.residual_sizes == [N - 1, M - 1]
    assert ggg.post_correction_fidelity == pytest.approx(1, abs=1e-12)
    assert rep.branch("ee").post_correction_fidelity is None


def test_three_fusion_successes_are_w_states():
    rep = fuse_three(3, 4, 2)
    for b in rep.branches:
        if b.classification is S:
            assert b.post_correction_fidelity == pytest.approx(1, abs=1e-10)
            assert b.residual_sizes == [6]
    assert rep.branch("ggg").post_correction_fidelity == pytest.approx(1, abs=1e-12)


def test_ggg_three_fusion_is_product_of_three_w():
    _, vec = full_branches("three", (3, 4, 2))["ggg"]
    ref = np.kron(np.kron(w_vector(2), w_vector(3)), w_vector(1))
    assert abs(abs(np.vdot(ref, vec)) - 1) < 1e-12


def test_single_e_three_fusion_holds_two_excitations():
    # these leaves are not W states of any size, hence discarded
    for label in ("egg", "geg", "gge"):
        _, vec = full_branches("three", (3, 3, 3))[label]
        idx = np.flatnonzero(np.abs(vec) > 1e-12)
        assert {bin(i).count("1") for i in idx} == {2}


def test_two_fusion_gge_is_w_already():
    rep = fuse_two(3, 4)
    v = expand_to_full(rep.branch("gge").residual).state
    ref = w_vector(5)
    assert abs(abs(np.vdot(ref, v)) - 1) < 1e-12


def test_off_magic_time_loses_fidelity():
    rep = fuse_two(3, 3, lambda_t=0.3)
    assert rep.branch("ge").post_correction_fidelity < 0.99
    assert rep.total_probability == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("protocol,sizes", [("two", (2, 3)), ("two", (4, 4)), ("three", (2, 3, 4))])
def test_compact_matches_state_vector(protocol, sizes):
    rep = fuse(protocol, sizes)
    oracle = full_branches(protocol, sizes)
    for b in rep.branches:
        p, vec = oracle[b.outcome]
        assert b.probability == pytest.approx(p, abs=1e-12)
        if vec is not None:
            assert np.allclose(expand_to_full(b.residual).state, vec, atol=1e-12)


def test_dense_and_contracted_oracles_agree():
    a = full_branches("two", (3, 3), dense_embed=True)
    b = full_branches("two", (3, 3), dense_embed=False)
    for k in a:
        assert a[k][0] == pytest.approx(b[k][0], abs=1e-14)


def test_report_serialisation():
    rep = fuse_two(2, 2)
    d = rep.to_dict()
    assert d["class_probabilities"]["Success"] == pytest.approx(0.5)
    assert [b["outcome"] for b in d["branches"]] == ["ge", "eg", "ee", "gge", "ggg"]
    lines = rep.to_csv().splitlines()
    assert lines[0].split(",") == list(rep.CSV_COLUMNS)
    assert len(lines) == 6


def test_fuse_arity_checked():
    with pytest.raises(ValueError):
        fuse("two", (2, 2, 2))
    with pytest.raises(ValueError):
        fuse("three", (2, 2))
    with pytest.raises(ValueError):
        fuse_two(1, 5)
