import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqebench.core import (
    Circuit,
    ContractError,
    Gate,
    GateKind,
    Observable,
    ObservableParseError,
    PauliTerm,
    build_ry_cnot_ansatz,
    circuit_unitary,
    exact_ground_energy,
    parse_observable,
    phase_invariant_distance,
    serialize_observable,
)

pauli_strings = st.integers(1, 4).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))


def observables(n_max=4):
    return st.integers(1, n_max).flatmap(
        lambda n: st.lists(
            st.tuples(st.text("IXYZ", min_size=n, max_size=n), st.floats(-2, 2, allow_nan=False)),
            min_size=1,
            max_size=8,
        )
    )


def test_single_identity_line():
    obs = parse_observable("IIII -0.81054\n")
    assert len(obs.terms) == 1
    assert obs.terms[0].coefficient == -0.81054


def test_duplicate_strings_merge():
    obs = parse_observable("ZIII 0.1\nZIII 0.2\n")
    assert len(obs.terms) == 1
    assert obs.coefficient("ZIII") == pytest.approx(0.3)


def test_bundled_h2_has_15_terms(h2):
    assert h2.n_qubits == 4
    assert len(h2.terms) == 15
    # printed coefficients kept verbatim, including the six-decimal one
    assert h2.coefficient("ZIIZ") == 0.166145
    assert h2.coefficient("IIII") == -0.81054


@pytest.mark.parametrize(
    "text, line",
    [
        ("ZZ 0.1\nXQ 0.2\n", 2),
        ("ZZ 0.1\nZZZ 0.2\n", 2),
        ("ZZ abc\n", 1),
        ("# c\n\nZZ 0.1 0.2\n", 3),
    ],
)
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(ObservableParseError) as info:
        parse_observable(text)
    assert info.value.line_number == line
    assert f"line {line}" in str(info.value)


def test_exact_energy_trivial_cases():
    assert exact_ground_energy(parse_observable("IIII -0.81054")) == pytest.approx(-0.81054)
    assert exact_ground_energy(parse_observable("Z 1.0")) == pytest.approx(-1.0)


def test_exact_energy_regression(h2):
    # pinned from the dense eigensolver on the printed coefficients plus 1/R
    assert exact_ground_energy(h2) == pytest.approx(-1.14574692649567, abs=1e-10)


def test_h2_ground_energy_matches_scipy_oracle(h2):
    from scipy.sparse.linalg import eigsh
    from scipy.sparse import csr_matrix

    m = csr_matrix(h2.matrix())
    value = eigsh(m, k=1, which="SA")[0][0]
    assert exact_ground_energy(h2) == pytest.approx(value, abs=1e-9)


def test_matrix_is_hermitian(h2):
    m = h2.matrix()
    assert np.max(np.abs(m - m.conj().T)) < 1e-12


@given(observables())
@settings(max_examples=60, deadline=None)
def test_serialize_round_trip(pairs):
    obs = Observable.from_terms(pairs)
    again = parse_observable(serialize_observable(obs))
    assert again.n_qubits == obs.n_qubits
    assert {t.paulis: t.coefficient for t in again.terms} == {t.paulis: t.coefficient for t in obs.terms}


@given(observables(3))
@settings(max_examples=40, deadline=None)
def test_observable_matrix_hermitian(pairs):
    m = Observable.from_terms(pairs).matrix()
    assert np.max(np.abs(m - m.conj().T)) < 1e-12


# --- circuits -------------------------------------------------------------


def test_ansatz_shape():
    c = build_ry_cnot_ansatz(4)
    kinds = [g.kind for g in c.gates]
    assert kinds.count(GateKind.RY) == 4 and kinds.count(GateKind.CX) == 4
    assert c.num_parameters == 4
    assert [g.qubits for g in c.gates if g.kind is GateKind.CX] == [(0, 1), (1, 2), (2, 3), (3, 0)]


def test_ansatz_two_qubits():
    c = build_ry_cnot_ansatz(2)
    assert [(g.kind, g.qubits) for g in c.gates] == [
        (GateKind.RY, (0,)),
        (GateKind.RY, (1,)),
        (GateKind.CX, (0, 1)),
        (GateKind.CX, (1, 0)),
    ]


@pytest.mark.parametrize("n", range(2, 9))
def test_ansatz_sizes(n):
    c = build_ry_cnot_ansatz(n)
    assert len(c.gates) == 2 * n
    assert c.num_parameters == n


def test_ansatz_too_narrow():
    with pytest.raises(ContractError):
        build_ry_cnot_ansatz(1)


def test_zero_parameters_fix_zero_state():
    u = circuit_unitary(build_ry_cnot_ansatz(4).bind([0, 0, 0, 0]))
    assert abs(u[0, 0]) == pytest.approx(1.0)


def test_unitary_examples():
    assert np.allclose(circuit_unitary(Circuit(1, ())), np.eye(2))
    x = Circuit(1, (Gate(GateKind.X, (0,)),))
    assert np.allclose(circuit_unitary(x), [[0, 1], [1, 0]])
    cc = Circuit(2, (Gate(GateKind.CX, (0, 1)), Gate(GateKind.CX, (0, 1))))
    assert np.allclose(circuit_unitary(cc), np.eye(4))


def test_cx_control_is_first_qubit():
    # control 0 set (index 1) flips qubit 1 -> index 3
    u = circuit_unitary(Circuit(2, (Gate(GateKind.CX, (0, 1)),)))
    assert u[3, 1] == 1


def test_unitary_rejects_unbound_and_measure():
    with pytest.raises(ContractError):
        circuit_unitary(build_ry_cnot_ansatz(2))
    with pytest.raises(ContractError):
        circuit_unitary(Circuit(1, (Gate(GateKind.MEASURE, (0,)),)))


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=4, max_size=4))
@settings(max_examples=50, deadline=None)
def test_ansatz_unitary_is_unitary(theta):
    u = circuit_unitary(build_ry_cnot_ansatz(4).bind(theta))
    assert np.max(np.abs(u.conj().T @ u - np.eye(16))) < 1e-10


def test_phase_invariant_distance_ignores_global_phase():
    u = circuit_unitary(build_ry_cnot_ansatz(3).bind([0.1, 0.2, 0.3]))
    assert phase_invariant_distance(u, np.exp(1.3j) * u) < 1e-12
    assert phase_invariant_distance(u, np.eye(8)) > 0.1


def test_gate_validation():
    with pytest.raises((ContractError, ValueError)):
        Gate(GateKind.CX, (0, 0))
    with pytest.raises((ContractError, ValueError)):
        Gate(GateKind.RX, (0, 1), 0.1)
    with pytest.raises((ContractError, ValueError)):
        Circuit(2, (Gate(GateKind.X, (2,)),))


def test_pauli_term_matrix_orientation():
    # character 0 acts on qubit 0 (least significant bit)
    m = PauliTerm(1.0, "ZI").matrix()
    assert np.allclose(np.diag(m), [1, -1, 1, -1])
    assert math.isclose(PauliTerm(1.0, "IZ").matrix()[1, 1].real, 1.0)
