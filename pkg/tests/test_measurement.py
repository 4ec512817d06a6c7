import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqebench.core import Circuit, ContractError, Gate, GateKind, Observable, PauliTerm, build_ry_cnot_ansatz, parse_observable
from vqebench.measurement import (
    MitigationError,
    basis_rotation,
    build_confusion,
    energy_from_counts,
    group_terms,
    measure_counts,
    mitigate,
    term_expectation,
)
from vqebench.noise import NoiseModel, readout_confusion
from vqebench.simulator import Counts, StateVector, expectation, run_statevector, sample_distribution

from conftest import random_theta


def flip_model(p, n):
    return NoiseModel(readout=tuple(readout_confusion(p, p) for _ in range(n)))


def test_h2_grouping(h2):
    groups = group_terms(h2)
    assert len(groups) == 5
    assert groups[0].label == "ZZZZ"
    assert len(groups[0].terms) == 10  # the identity term is never measured
    assert sorted(g.label for g in groups[1:]) == ["XXXX", "XXYY", "YYXX", "YYYY"]


def test_z_only_observable_is_one_group():
    assert len(group_terms(parse_observable("ZI 1\nIZ 2\nZZ 3\n"))) == 1


def test_incompatible_single_qubit_terms():
    assert len(group_terms(parse_observable("X 1\nZ 1\n"))) == 2


@given(st.integers(1, 4).flatmap(lambda n: st.lists(st.text("IXYZ", min_size=n, max_size=n), min_size=1, max_size=10)))
@settings(max_examples=80, deadline=None)
def test_grouping_is_partition(strings):
    obs = Observable.from_terms([(s, 1.0) for s in strings])
    groups = group_terms(obs)
    seen = [t.paulis for g in groups for t in g.terms]
    expected = sorted(t.paulis for t in obs.terms if not t.is_identity)
    assert sorted(seen) == expected
    for g in groups:
        for t in g.terms:
            assert all(c in ("I", b) for c, b in zip(t.paulis, g.basis))


def test_z_group_rotation_is_only_measure(h2):
    rot = basis_rotation(group_terms(h2)[0], 4)
    assert [g.kind for g in rot.gates] == [GateKind.MEASURE]


@pytest.mark.parametrize(
    "label, prep",
    [
        ("X", [Gate(GateKind.RY, (0,), math.pi / 2)]),
        ("Y", [Gate(GateKind.RX, (0,), -math.pi / 2)]),
    ],
)
def test_basis_rotation_maps_eigenstate_to_zero(label, prep):
    from vqebench.measurement import MeasurementGroup

    group = MeasurementGroup((label,), (PauliTerm(1.0, label),))
    body = Circuit(1, tuple(prep)) + basis_rotation(group, 1)
    probs = run_statevector(body.without_measurements()).probabilities()
    assert probs[0] == pytest.approx(1.0)


def test_term_expectation_examples():
    assert term_expectation(Counts({"0000": 200}), PauliTerm(1.0, "ZIZI")) == 1.0
    assert term_expectation(Counts({"0001": 100, "0000": 100}), PauliTerm(1.0, "ZIII")) == 0.0
    assert term_expectation(Counts({"11": 100}), PauliTerm(1.0, "ZZ")) == 1.0
    # qubit 0 is the last printed bit
    assert term_expectation(Counts({"0001": 10}), PauliTerm(1.0, "ZIII")) == -1.0
    assert term_expectation(Counts({"0001": 10}), PauliTerm(1.0, "IIIZ")) == 1.0


@given(st.dictionaries(st.text("01", min_size=3, max_size=3), st.integers(0, 50), min_size=1), st.text("IZ", min_size=3, max_size=3))
@settings(max_examples=80, deadline=None)
def test_term_expectation_bounded(counts, paulis):
    c = Counts(counts)
    if c.shots == 0:
        return
    assert -1.0 <= term_expectation(c, PauliTerm(1.0, paulis)) <= 1.0


def test_zero_state_counts_match_exact(h2):
    # |0000> reads as all zeros in the Z basis and uniformly in any X/Y basis
    zero = Counts({"0000": 160})
    uniform = Counts({format(i, "04b"): 10 for i in range(16)})
    value = energy_from_counts([(g, zero if g.label == "ZZZZ" else uniform) for g in group_terms(h2)], h2)
    assert value == pytest.approx(expectation(StateVector.zero(4), h2), abs=1e-12)


def test_identity_only_observable():
    obs = parse_observable("II -0.5\n")
    assert energy_from_counts([], obs) == -0.5


def test_missing_group_is_contract_error(h2):
    groups = group_terms(h2)
    with pytest.raises(ContractError):
        energy_from_counts([(groups[0], Counts({"0000": 1}))], h2)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_large_shot_energy_matches_exact(h2, seed):
    ansatz = build_ry_cnot_ansatz(4)
    theta = random_theta(seed)
    rng = np.random.default_rng(seed)
    pairs = []
    for g in group_terms(h2):
        state = run_statevector((ansatz + basis_rotation(g, 4)).bind(theta).without_measurements())
        pairs.append((g, measure_counts(state, 10**6, rng)))
    exact = expectation(run_statevector(ansatz.bind(theta)), h2)
    assert energy_from_counts(pairs, h2) == pytest.approx(exact, abs=5e-3)


def test_confusion_examples():
    assert np.allclose(build_confusion(flip_model(0.0, 2), 2), np.eye(4))
    assert np.allclose(build_confusion(flip_model(0.02, 1), 1), [[0.98, 0.02], [0.02, 0.98]])
    m4 = build_confusion(flip_model(0.02, 4), 4)
    assert m4[0, 0] == pytest.approx(0.98**4)
    assert np.allclose(m4.sum(axis=0), 1)


def test_confusion_bit_order():
    # qubit 0 flips with certainty, qubit 1 never: |00> reads as index 1
    noise = NoiseModel(readout=(readout_confusion(1.0, 1.0), readout_confusion(0.0, 0.0)))
    m = build_confusion(noise, 2)
    assert m[1, 0] == 1.0


def test_mitigate_identity_unchanged():
    counts = Counts({"00": 30, "11": 70})
    assert np.allclose(mitigate(counts, np.eye(4)), [0.3, 0, 0, 0.7])


def test_mitigate_round_trip():
    rng = np.random.default_rng(4)
    truth = rng.dirichlet(np.ones(8))
    conf = build_confusion(NoiseModel(readout=(readout_confusion(0.02, 0.05), readout_confusion(0.03, 0.01), readout_confusion(0.04, 0.04))), 3)
    counts = sample_distribution(conf @ truth, 10**6, rng, 3)
    recovered = mitigate(counts, conf)
    assert np.abs(recovered - truth).sum() < 0.01


def test_mitigate_singular_matrix():
    conf = build_confusion(flip_model(0.5, 1), 1)
    with pytest.raises(MitigationError):
        mitigate(Counts({"0": 5, "1": 5}), conf)


@given(st.lists(st.integers(0, 40), min_size=4, max_size=4), st.floats(0, 0.3))
@settings(max_examples=80, deadline=None)
def test_mitigate_output_is_distribution(values, p):
    if sum(values) == 0:
        return
    out = mitigate(Counts.from_vector(values, 2), build_confusion(flip_model(p, 2), 2))
    assert np.all(out >= 0)
    assert out.sum() == pytest.approx(1.0)


def test_mitigation_moves_energy_toward_noiseless(h2):
    ansatz = build_ry_cnot_ansatz(4)
    theta = random_theta(5)
    conf = build_confusion(flip_model(0.02, 4), 4)
    raw, mit = [], []
    rng = np.random.default_rng(8)
    for g in group_terms(h2):
        state = run_statevector((ansatz + basis_rotation(g, 4)).bind(theta).without_measurements())
        counts = measure_counts(state, 10**5, rng, confusion=conf)
        raw.append((g, counts))
        mit.append((g, mitigate(counts, conf)))
    exact = expectation(run_statevector(ansatz.bind(theta)), h2)
    assert abs(energy_from_counts(mit, h2) - exact) < abs(energy_from_counts(raw, h2) - exact)
