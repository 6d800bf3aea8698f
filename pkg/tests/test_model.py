import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quditclass.algebra import pauli_basis
from quditclass.model import (
    CoefficientExpr,
    Layer,
    LayerTerm,
    Observable,
    ParameterVector,
    Segments,
    SpecError,
    expectation_value,
    forward,
    kernel,
    kernel_matrix,
    kernel_qubit_model_a_closed_form,
    layer_hamiltonian,
    load_spec,
    predict,
    readout,
    save_spec,
    spec_from_dict,
    spec_to_dict,
    validate_spec,
)
from quditclass.zoo import LITERAL_LABELS, builtin_model, builtin_names, qubit_models

SX, SY, SZ = pauli_basis().generators

TABLE = {
    # name: (d, k, P)
    "qubit-A": (2, 2, 2), "qubit-B": (2, 2, 4), "qubit-C": (2, 2, 3), "qubit-D": (2, 2, 5),
    "qubit-E": (2, 2, 4), "qubit-F": (2, 2, 6), "qubit-G": (2, 3, 3),
    "qutrit-A": (3, 2, 4), "qutrit-B": (3, 2, 8), "qutrit-C": (3, 2, 8),
    "qutrit-D1": (3, 8, 8), "qutrit-D2": (3, 8, 8), "qutrit-D3": (3, 8, 9),
    "qutrit-3class": (3, 2, 9), "qutrit-uci": (3, 4, 5),
}


def encoded_qubit_a(s, x):
    """exp(i s (x1 sx + x2 sz)) |0> by the half-angle formula."""
    r = np.hypot(*x)
    if r == 0:
        return np.array([1, 0], dtype=complex)
    n = (x[0] * SX + x[1] * SZ) / r
    return (np.cos(s * r) * np.eye(2) + 1j * np.sin(s * r) * n)[:, 0]


def test_catalog_matches_table():
    assert set(builtin_names()) == set(TABLE)
    for name, (d, k, p) in TABLE.items():
        spec = builtin_model(name)
        assert (spec.d, spec.k, spec.num_params) == (d, k, p), name
        assert validate_spec(spec) == []


def test_unknown_model_lists_names():
    with pytest.raises(KeyError, match="qubit-A"):
        builtin_model("qubit-Z")


def test_qutrit_d2_rotation_combos():
    rot = builtin_model("qutrit-D2").layers[1]
    assert [t.combo.indices() for t in rot.terms] == [[j, j + 4] for j in range(4)]
    enc = builtin_model("qutrit-D2").layers[0]
    assert [t.coeff.weight[1] for t in enc.terms] == [0, 1, 2, 3, 0, 1, 2, 3]


def test_qutrit_uci_rotates_on_generators_5_to_8():
    rot = builtin_model("qutrit-uci").layers[1]
    assert [t.combo.indices() for t in rot.terms] == [[4], [5], [6], [7]]


def test_qubit_a_layer_hamiltonian_example():
    spec = builtin_model("qubit-A")
    theta = ParameterVector([1.0], [0.7])
    h_rot = layer_hamiltonian(spec.layers[1], [0.0, 0.0], theta, spec.basis)
    # rotation generator of the catalog is sigma_y; its weight 0.7 enters linearly
    np.testing.assert_allclose(h_rot, 0.7 * SY)
    h_enc = layer_hamiltonian(spec.layers[0], [0.3, -0.2], theta, spec.basis)
    np.testing.assert_allclose(h_enc, 0.3 * SX - 0.2 * SZ)


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2),
       st.lists(st.floats(-2, 2), min_size=2, max_size=2),
       st.floats(-3, 3))
def test_layer_hamiltonian_is_linear_in_x(x1, x2, s):
    spec = builtin_model("qubit-D")
    theta = ParameterVector([s, 0.5], [0.1, 0.2, 0.3])
    layer = spec.layers[0]
    lhs = layer_hamiltonian(layer, np.add(x1, x2), theta, spec.basis)
    rhs = layer_hamiltonian(layer, x1, theta, spec.basis) + layer_hamiltonian(layer, x2, theta, spec.basis)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_forward_map_is_not_linear():
    spec = builtin_model("qubit-B")
    theta = [1.3, 0.2, -0.4, 0.9]
    a, b = np.array([0.3, 0.1]), np.array([-0.2, 0.4])
    ea, eb, eab = expectation_value(spec, theta, np.vstack([a, b, a + b]))
    assert abs(eab - (ea + eb)) > 1e-3


def test_rotation_layer_rejects_inputs():
    spec = builtin_model("qubit-A")
    bad_layer = Layer("rotate", [LayerTerm(CoefficientExpr(1.0, ("W", 0), 0), [(1, 1.0)])])
    bad = replace(spec, layers=(spec.layers[0], bad_layer))
    errors = validate_spec(bad)
    assert any("input in rotation layer" in e for e in errors)
    with pytest.raises(SpecError):
        forward(bad, [1.0, 1.0], [0.1, 0.1])


def test_validate_reports_k_bound_and_bank_index():
    spec = builtin_model("qubit-A")
    errs = validate_spec(replace(spec, k=4))
    assert any("k <= d^2-1" in e for e in errs)
    layer = Layer("rotate", [LayerTerm(CoefficientExpr(1.0, ("W", 3)), [(1, 1.0)])])
    errs = validate_spec(replace(spec, layers=(spec.layers[0], layer)))
    assert any(e.startswith("layers[1].terms[0].weight") for e in errs)


def test_overlapping_groups_only_warn():
    spec = builtin_model("qubit-A")
    enc = Layer("encode", [LayerTerm(CoefficientExpr(1.0, ("S", 0), i), [(0, 1.0)]) for i in range(2)])
    with pytest.warns(UserWarning, match="overlap"):
        assert validate_spec(replace(spec, layers=(enc, spec.layers[1]))) == []


def test_thresholds_outside_spectrum_rejected():
    spec = builtin_model("qubit-A")
    bad = replace(spec, observable=Observable(spec.observable.combo, Segments([1.5])))
    assert any("spectrum" in e for e in validate_spec(bad))


@pytest.mark.parametrize("name", sorted(TABLE))
def test_forward_is_normalized(name, rng):
    spec = builtin_model(name)
    for _ in range(3):
        psi = forward(spec, rng.uniform(-3, 3, spec.num_params), rng.uniform(-1, 1, spec.k))
        assert np.linalg.norm(np.asarray(psi)) == pytest.approx(1, abs=1e-10)


def test_qubit_a_expectation_against_formula():
    # <sz> after exp(i w sy) exp(i s (x1 sx + x2 sz)) |0>
    spec = builtin_model("qubit-A")
    s, w, x = 1.1, -0.6, np.array([0.4, -0.3])
    psi = (np.cos(w) * np.eye(2) + 1j * np.sin(w) * SY) @ encoded_qubit_a(s, x)
    want = np.vdot(psi, SZ @ psi).real
    assert expectation_value(spec, [s, w], x)[0] == pytest.approx(want, abs=1e-14)


def test_tie_goes_to_upper_class():
    spec = builtin_model("qubit-A")
    # x = 0 leaves |0>; w = pi/4 about sigma_y gives <sz> = cos(pi/2) = 0 up to round-off
    val = readout(spec, [1.0, np.pi / 4], [0.0, 0.0])[0]
    assert abs(val) < 1e-15
    from quditclass.model import classify_values
    assert classify_values(Segments([0.0]), np.array([0.0]))[0] == 1
    assert classify_values(Segments([-2 / 3, 2 / 3]), np.array([-2 / 3, 2 / 3, 2.0]))[0:3].tolist() == [1, 2, 2]


def test_predict_scalar_and_batch():
    spec = builtin_model("qutrit-uci")
    th = np.linspace(-1, 1, 5)
    assert isinstance(predict(spec, th, [0.1, 0.2, 0.3, 0.4]), int)
    assert predict(spec, th, np.zeros((3, 4))).shape == (3,)


def test_kernel_examples():
    spec = builtin_model("qubit-A")
    th = ParameterVector([np.pi / 4], [0.3])
    assert kernel(spec, th, [1, 0], [0, 1]) == pytest.approx(0.5, abs=1e-12)
    assert kernel(spec, th, [1, 0], [1, 0]) == pytest.approx(1.0, abs=1e-12)
    assert kernel_qubit_model_a_closed_form(np.pi / 4, [1, 0], [0, 1]) == pytest.approx(0.5, abs=1e-12)
    assert kernel_qubit_model_a_closed_form(0.37, [1, 0], [1, 0]) == pytest.approx(1.0, abs=1e-12)


def test_closed_form_domain_error():
    with pytest.raises(ValueError, match="zero-norm"):
        kernel_qubit_model_a_closed_form(1.0, [0, 0], [1, 0])


def test_kernel_against_half_angle_oracle(rng):
    spec = builtin_model("qubit-A")
    for _ in range(200):
        s = rng.uniform(-2, 2)
        x, y = rng.uniform(-1, 1, (2, 2))
        want = abs(np.vdot(encoded_qubit_a(s, y), encoded_qubit_a(s, x))) ** 2
        th = ParameterVector([s], [rng.uniform(-3, 3)])
        assert kernel(spec, th, x, y) == pytest.approx(want, abs=1e-12)
        assert kernel_qubit_model_a_closed_form(s, x, y) == pytest.approx(want, abs=1e-12)


def test_literal_labels_break_the_closed_form():
    literal = qubit_models(LITERAL_LABELS, LITERAL_LABELS)["qubit-A"]
    th = ParameterVector([1.3], [0.0])
    x, y = [0.4, 0.7], [-0.5, 0.2]
    assert abs(kernel(literal, th, x, y) - kernel_qubit_model_a_closed_form(1.3, x, y)) > 1e-2


def test_literal_labels_cannot_see_the_x2_sign(rng):
    literal = qubit_models(LITERAL_LABELS, LITERAL_LABELS)["qubit-A"]
    for _ in range(5):
        th = rng.uniform(-3, 3, 2)
        pts = rng.uniform(-1, 1, (10, 2))
        mirrored = pts * [1, -1]
        np.testing.assert_allclose(expectation_value(literal, th, pts),
                                   expectation_value(literal, th, mirrored), atol=1e-12)


def test_literal_labels_without_rotation_are_radial():
    literal = qubit_models(LITERAL_LABELS, LITERAL_LABELS)["qubit-B"]
    pts = 0.3 * np.array([[np.cos(a), np.sin(a)] for a in np.linspace(0, 2 * np.pi, 7)])
    vals = expectation_value(literal, [1.3, 0.0, 0.0, 0.0], pts)
    np.testing.assert_allclose(vals, np.cos(2 * 1.3 * 0.3), atol=1e-12)


def test_remapped_qubit_b_collapses_the_x2_axis():
    spec = builtin_model("qubit-B")
    pts = np.column_stack([np.zeros(4), [0.1, 0.2, 0.4, -0.3]])
    vals = expectation_value(spec, [2.0, 0.3, -0.2, 0.5], pts)
    np.testing.assert_allclose(vals, vals[0], atol=1e-12)


def test_qutrit_a_encoding_leaves_ground_state():
    spec = builtin_model("qutrit-A")
    vals = expectation_value(spec, [1.0, 2.0, 0.3, 0.4], np.random.default_rng(0).uniform(-1, 1, (5, 2)))
    np.testing.assert_allclose(vals, vals[0], atol=1e-12)


def test_kernel_matrix_symmetric_psd(rng):
    spec = builtin_model("qutrit-B")
    th = rng.uniform(-1, 1, 8)
    xs = rng.uniform(-1, 1, (6, 2))
    km = kernel_matrix(spec, th, xs)
    np.testing.assert_allclose(km, km.T, atol=1e-12)
    np.testing.assert_allclose(np.diag(km), 1, atol=1e-12)
    assert np.linalg.eigvalsh(km).min() > -1e-10


@pytest.mark.parametrize("name", ["qubit-E", "qutrit-3class", "qutrit-uci", "qutrit-D2"])
def test_spec_json_round_trip(name, tmp_path):
    spec = builtin_model(name)
    path = tmp_path / "m.json"
    save_spec(spec, path)
    back = load_spec(path)
    assert back == spec
    assert spec_to_dict(back) == json.loads(path.read_text())


def test_malformed_spec():
    with pytest.raises(SpecError):
        spec_from_dict({"dimension": 2})


def test_parameter_length_mismatch():
    spec = builtin_model("qubit-B")
    with pytest.raises(SpecError):
        forward(spec, [1.0, 2.0], [0.1, 0.2])
    with pytest.raises(SpecError):
        forward(spec, ParameterVector([1.0], [1.0]), [0.1, 0.2])
    with pytest.raises(SpecError):
        forward(spec, [1.0, 2.0, 3.0, 4.0], [0.1, 0.2, 0.3])
