import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfusion.cavity import effective_propagator, magic_time
from wfusion.protocols import phase_correction
from wfusion.registers import (
    CompactFusionState,
    GroupSpec,
    apply_extracted_propagator,
    expand_to_full,
    fidelity,
    initial_three_fusion_state,
    initial_two_fusion_state,
    measure,
    product_w_like,
    project,
    standard_w,
    standard_w_like,
    w_vector,
)

MAGIC = 2 * math.pi / 9


def test_w1_is_excited_atom():
    assert np.array_equal(expand_to_full(standard_w(1)).state, [0, 1])


def test_w2_is_bell_pair():
    v = expand_to_full(standard_w(2)).state
    assert np.allclose(v, [0, 1 / math.sqrt(2), 1 / math.sqrt(2), 0], atol=1e-16)


def test_w5_weights():
    v = expand_to_full(standard_w(5)).state
    nz = np.flatnonzero(np.abs(v) > 0)
    assert len(nz) == 5
    assert np.allclose(np.abs(v[nz]) ** 2, 0.2)
    assert all(bin(i).count("1") == 1 for i in nz)


def test_w0_rejected():
    with pytest.raises(ValueError):
        standard_w(0)


def test_w3_expansion():
    v = expand_to_full(standard_w(3)).state
    ref = np.zeros(8)
    ref[[0b100, 0b010, 0b001]] = 1 / math.sqrt(3)
    assert np.allclose(v, ref, atol=1e-16)


def test_two_fusion_initial_for_bell_pairs():
    s = initial_two_fusion_state(2, 2)
    assert s.groups == (1, 1) and s.slots == ("1", "2", "3")
    assert len(s.terms) == 4
    assert all(abs(a - 0.5) < 1e-15 for a in s.terms.values())


def test_two_fusion_initial_coefficients():
    N, M = 3, 5
    s = initial_two_fusion_state(N, M)
    assert s.amplitude((0, 0), (1, 1, 0)) == pytest.approx(1 / math.sqrt(N * M), abs=1e-15)
    # |(N-2)_g,e> carries sqrt(N-1) inside the amplitude
    assert s.amplitude((1, 0), (0, 1, 0)) == pytest.approx(math.sqrt(N - 1) / math.sqrt(N * M), abs=1e-15)
    assert initial_two_fusion_state(3, 4).norm() == pytest.approx(1, abs=1e-15)


def test_two_fusion_initial_matches_tensor_product():
    full = np.kron(np.kron(w_vector(2), w_vector(2)), [1, 0])
    # compact order: group1, group2, slot1, slot2, slot3; dense order: g1, slot1, g2, slot2, anc
    v = expand_to_full(initial_two_fusion_state(2, 2)).state.reshape(2, 2, 2, 2, 2)
    v = v.transpose(0, 2, 1, 3, 4).reshape(-1)
    assert np.allclose(v, full, atol=1e-16)
    assert np.count_nonzero(np.abs(v) > 1e-15) == 4


@pytest.mark.parametrize("bad", [(1, 3), (2, 0)])
def test_two_fusion_rejects_small(bad):
    with pytest.raises(ValueError):
        initial_two_fusion_state(*bad)


def test_three_fusion_initial():
    s = initial_three_fusion_state(2, 2, 2)
    assert len(s.terms) == 8
    assert all(abs(abs(a) ** 2 - 1 / 8) < 1e-15 for a in s.terms.values())
    N, M, T = 3, 4, 5
    s = initial_three_fusion_state(N, M, T)
    assert s.amplitude((0, 0, 0), (1, 1, 1)) == pytest.approx(1 / math.sqrt(N * M * T), abs=1e-15)
    assert s.norm() == pytest.approx(1, abs=1e-15)
    with pytest.raises(ValueError):
        initial_three_fusion_state(2, 1, 2)


def test_identity_propagator_keeps_state():
    s = initial_two_fusion_state(3, 2)
    out = apply_extracted_propagator(s, np.eye(8))
    assert out.terms == s.terms


def test_propagator_dimension_checked():
    with pytest.raises(ValueError):
        apply_extracted_propagator(initial_two_fusion_state(3, 2), np.eye(4))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(2, 30), st.integers(2, 30), st.floats(0, 2 * math.pi))
def test_propagation_preserves_norm_and_measurement_is_complete(N, M, T, lt):
    U = effective_propagator(lt)
    for s in (initial_two_fusion_state(N, M), initial_three_fusion_state(N, M, T)):
        out = apply_extracted_propagator(s, U)
        assert abs(out.norm() - 1) < 1e-12
        for slots in (("1",), ("1", "2"), ("1", "2", "3")):
            probs = [o.probability for o in measure(out, slots)]
            assert abs(sum(probs) - 1) < 1e-10


def test_measure_bell_pair():
    bell = CompactFusionState(GroupSpec((), ("a", "b")), {((), (0, 1)): 2 ** -0.5, ((), (1, 0)): 2 ** -0.5})
    outs = measure(bell, ["a", "b"])
    assert [o.label for o in outs] == ["ge", "eg"]
    assert [o.probability for o in outs] == pytest.approx([0.5, 0.5], abs=1e-15)


def test_measure_rejects_spectators():
    s = initial_two_fusion_state(3, 3)
    with pytest.raises(ValueError):
        measure(s, ["group0"])
    with pytest.raises(ValueError):
        measure(s, [])


def ge_residual_at_magic(N, M):
    """The ge residual written out term by term, global phase dropped."""
    spec = GroupSpec((N - 1, M - 1), ("3",))
    k = 1 / math.sqrt(3 * N * M)
    return CompactFusionState(spec, {
        ((0, 0), (1,)): k * cmath.exp(-2j * math.pi / 9),
        ((0, 1), (0,)): k * math.sqrt(M - 1),
        ((1, 0), (0,)): k * cmath.exp(2j * math.pi / 3) * math.sqrt(N - 1),
    })


def evolved_two(N, M, lt=MAGIC):
    return apply_extracted_propagator(initial_two_fusion_state(N, M), effective_propagator(lt))


@pytest.mark.parametrize("N,M", [(2, 2), (3, 5), (7, 4)])
def test_ge_residual_matches_closed_form_up_to_discarded_phase(N, M):
    residual, p = project(evolved_two(N, M), ["1", "2"], [0, 1])
    ref = ge_residual_at_magic(N, M).scaled(cmath.exp(-5j * math.pi / 6))
    for key, amp in ref.terms.items():
        assert residual.terms[key] == pytest.approx(amp, abs=1e-15)
    assert p == pytest.approx((N + M - 1) / (3 * N * M), abs=1e-15)


def test_gg_then_g_is_product_of_smaller_w():
    N, M = 4, 3
    outs = {o.label: o for o in measure(evolved_two(N, M), ["1", "2", "3"])}
    res = outs["ggg"].residual
    assert fidelity(res, product_w_like(res.spec)) == pytest.approx(1, abs=1e-12)
    v = expand_to_full(res).state
    ref = np.kron(w_vector(N - 1), w_vector(M - 1))
    assert abs(abs(np.vdot(ref, v)) - 1) < 1e-12


def test_phase_correction_ge_residual_gives_w():
    res = ge_residual_at_magic(3, 4).normalized()
    out = phase_correction(res, "two", "ge")
    assert fidelity(out, standard_w_like(out.spec)) == pytest.approx(1, abs=1e-12)


def test_phase_correction_gee_residual_gives_w():
    N, M, T = 3, 2, 4
    spec = GroupSpec((N - 1, M - 1, T - 1))
    gee_residual = CompactFusionState(spec, {
        ((0, 1, 0), ()): math.sqrt(M - 1),
        ((1, 0, 0), ()): cmath.exp(2j * math.pi / 3) * math.sqrt(N - 1),
        ((0, 0, 1), ()): math.sqrt(T - 1),
    }).normalized()
    out = phase_correction(gee_residual, "three", "gee")
    assert fidelity(out, standard_w_like(spec)) == pytest.approx(1, abs=1e-12)


def test_phase_correction_leaves_standard_w_alone():
    spec = GroupSpec((2, 3), ("3",))
    w = standard_w_like(spec)
    out = phase_correction(w, "two", "eg")
    assert out.terms == pytest.approx(w.terms)


def test_phase_correction_rejects_failure_branches():
    with pytest.raises(ValueError):
        phase_correction(ge_residual_at_magic(3, 3), "two", "ee")
    with pytest.raises(ValueError):
        phase_correction(ge_residual_at_magic(3, 3), "three", "ggg")


@pytest.mark.parametrize("N,M", [(2, 2), (3, 4), (9, 2)])
def test_ge_and_eg_corrected_states_coincide(N, M):
    outs = {o.label: o for o in measure(evolved_two(N, M), ["1", "2"])}
    a = phase_correction(outs["ge"].residual, "two", "ge")
    b = phase_correction(outs["eg"].residual, "two", "eg")
    assert set(a.terms) == set(b.terms)
    for k in a.terms:
        assert abs(a.terms[k] - b.terms[k]) < 1e-10


def test_fidelity_before_and_after_correction():
    res = ge_residual_at_magic(2, 2).normalized()
    ref = standard_w_like(res.spec)
    oracle = abs(np.vdot(expand_to_full(ref).state, expand_to_full(res).state)) ** 2
    assert fidelity(res, ref) == pytest.approx(oracle, abs=1e-14)
    assert oracle < 0.99
    assert fidelity(phase_correction(res, "two", "ge"), ref) == pytest.approx(1, abs=1e-14)


def test_fidelity_self_and_orthogonal():
    w = standard_w_like(GroupSpec((2,), ("a",)))
    assert fidelity(w, w) == pytest.approx(1, abs=1e-15)
    a = CompactFusionState(GroupSpec((2,), ("a",)), {((1,), (0,)): 1})
    b = CompactFusionState(GroupSpec((2,), ("a",)), {((0,), (1,)): 1})
    assert fidelity(a, b) == 0


def test_fidelity_layout_mismatch():
    with pytest.raises(ValueError):
        fidelity(standard_w(3), standard_w(4))


def test_invalid_terms_rejected():
    with pytest.raises(ValueError):
        CompactFusionState(GroupSpec((0,), ()), {((1,), ()): 1.0})
    with pytest.raises(ValueError):
        CompactFusionState(GroupSpec((2,), ()), {((2,), ()): 1.0})


@st.composite
def compact_states(draw):
    sizes = tuple(draw(st.lists(st.integers(0, 3), min_size=1, max_size=3)))
    nslots = draw(st.integers(0, 2))
    spec = GroupSpec(sizes, tuple(str(i) for i in range(nslots)))
    terms = {}
    for _ in range(draw(st.integers(1, 6))):
        pattern = tuple(draw(st.integers(0, 1)) if s else 0 for s in sizes)
        bits = tuple(draw(st.integers(0, 1)) for _ in range(nslots))
        terms[(pattern, bits)] = complex(draw(st.floats(-1, 1)), draw(st.floats(-1, 1)))
    return CompactFusionState(spec, terms)


@settings(max_examples=60, deadline=None)
@given(compact_states())
def test_expansion_is_an_isometry(state):
    full = expand_to_full(state)
    assert full.qubit_count == state.spec.n_atoms
    assert full.norm() == pytest.approx(state.norm(), rel=1e-12, abs=1e-15)


def test_expansion_guard():
    with pytest.raises(ValueError):
        expand_to_full(standard_w(15))


def test_serialisation_shape():
    d = initial_two_fusion_state(2, 2).to_dict()
    assert d["groups"] == [1, 1] and d["slots"] == ["1", "2", "3"]
    assert {"pattern", "re", "im"} <= set(d["terms"][0])


@pytest.mark.parametrize("lt", [MAGIC, 0.37, 1.9])
@pytest.mark.parametrize("N,M", [(2, 2), (3, 7)])
def test_two_fusion_evolution_term_by_term(lt, N, M):
    from transcriptions import compact_terms, max_term_error, two_fusion_lines

    out = apply_extracted_propagator(initial_two_fusion_state(N, M), effective_propagator(lt))
    assert max_term_error(out, compact_terms(two_fusion_lines(lt), (N, M))) < 1e-12


@pytest.mark.parametrize("lt", [MAGIC, 0.37, 1.9])
@pytest.mark.parametrize("sizes", [(2, 2, 2), (3, 5, 4)])
def test_three_fusion_evolution_term_by_term(lt, sizes):
    from transcriptions import compact_terms, max_term_error, three_fusion_lines

    out = apply_extracted_propagator(initial_three_fusion_state(*sizes), effective_propagator(lt))
    assert max_term_error(out, compact_terms(three_fusion_lines(lt), sizes)) < 1e-12
