import pytest
from hypothesis import given, strategies as st

from memtbwp.netlist import (
    Circuit,
    NetlistError,
    Polynomial,
    bundled_names,
    deriv_poly,
    eval_poly,
    format_netlist,
    load_netlist,
    parse_netlist,
)


def test_parse_ml_parallel(ml):
    assert [b.id for b in ml.branches] == ["m1", "l1"]
    assert ml.of_kind("memristor")[0].characteristic.coeffs == (0.0, 1.0)
    assert ml.of_kind("inductor")[0].value == 1.0
    assert ml.nodes == ("a", "b")


def test_comments_and_blank_lines():
    c = parse_netlist("# header\n\nM m1 a b 0 1  # memristor\nL l1 a b 2\n")
    assert c.n_branches == 2
    assert c.branches[1].value == 2.0


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("X x1 a b 1\n", "unknown device kind"),
        ("R r1 a b\n", "no characteristic"),
        ("R r1 a\n", "expected"),
        ("R r1 a b one\n", "bad coefficient"),
        ("R r1 a b 1\nR r1 a b 2\n", "duplicate branch id"),
        ("R r1 a a 1\n", "self-loop"),
        ("C c1 a b 1 2\n", "exactly one constant"),
        ("R r1 a b 1\nR r2 c d 1\n", "not connected"),
        ("# nothing\n", "empty circuit"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(NetlistError, match=fragment):
        parse_netlist(text)


def test_error_carries_line_number():
    with pytest.raises(NetlistError) as info:
        parse_netlist("R r1 a b 1\nQ q a b 1\n")
    assert info.value.line == 2


def test_polynomial_basics():
    p = Polynomial((1.0, -2.0, 3.0))
    assert p(2.0) == pytest.approx(1 - 4 + 12)
    assert p.derivative().coeffs == (-2.0, 6.0)
    assert p.antiderivative().coeffs == (0.0, 1.0, -1.0, 1.0)
    assert deriv_poly([5.0]).coeffs == (0.0,)
    with pytest.raises(ValueError):
        Polynomial(())


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=6), st.floats(-3, 3))
def test_horner_matches_power_sum(coeffs, x):
    expected = sum(c * x**k for k, c in enumerate(coeffs))
    assert eval_poly(coeffs, x) == pytest.approx(expected, rel=1e-9, abs=1e-9)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=6), st.floats(-2, 2))
def test_antiderivative_inverts_derivative(coeffs, x):
    p = Polynomial(tuple(coeffs))
    assert p.antiderivative().derivative()(x) == pytest.approx(p(x), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("name", ["ml_parallel.net", "mrl.net", "neural.net", "vc_loop.net"])
def test_format_round_trip(name):
    c = load_netlist(name)
    assert parse_netlist(format_netlist(c)) == c


def test_with_characteristic_replaces_one_branch(ml):
    c = ml.with_characteristic("m1", [0.0, 0.0, 1.0])
    assert c.of_kind("memristor")[0].characteristic.coeffs == (0.0, 0.0, 1.0)
    assert ml.of_kind("memristor")[0].characteristic.coeffs == (0.0, 1.0)


def test_class_ordered_positions(neural):
    order = [neural.branches[i].kind for i in neural.class_ordered_positions()]
    assert order[0] == "memristor"
    assert order[1:3] == ["capacitor", "capacitor"]
    assert set(order[3:]) == {"resistor"}


def test_bundled_names():
    assert {"ml_parallel.net", "mrl.net", "neural.net", "normal_form.ode"} <= set(bundled_names())


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_netlist("does_not_exist.net")


def test_circuit_rejects_duplicates_directly(ml):
    with pytest.raises(NetlistError):
        Circuit(ml.branches + ml.branches[:1])
