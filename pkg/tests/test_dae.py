import numpy as np
import pytest

from memtbwp.dae import (
    ModelError,
    SingularConstraintError,
    assemble_dae,
    equilibrium_at,
    find_equilibrium,
    normal_form_dae,
    pencil_spectrum,
    schur_blocks,
    schur_reduce,
)
from memtbwp.netlist import load_netlist, parse_netlist
from memtbwp.numerics import jacobian_fd

from oracles import hausdorff, neural_nodal_matrix, pencil_eigenvalues


@pytest.mark.parametrize("name", ["ml_parallel.net", "mrl.net", "neural.net"])
def test_analytic_jacobian_matches_finite_differences(name):
    dae = assemble_dae(load_netlist(name))
    rng = np.random.default_rng(1)
    x = rng.normal(size=dae.r + dae.p)
    assert np.allclose(dae.jacobian(x), jacobian_fd(dae.F, x), atol=1e-7)


def test_ml_layout_and_residual(ml):
    dae = assemble_dae(ml)
    assert dae.y_names == ["q[m1]", "i[l1]"]
    assert dae.line_index == 0
    eq = find_equilibrium(dae, 0.7)
    assert eq.y_star[0] == pytest.approx(0.7)
    assert np.allclose(eq.x[1:], 0.0)
    assert eq.residual_g <= 1e-12 and eq.residual_h <= 1e-12


def test_ml_reduced_field(ml):
    # reduced dynamics q' = -i_l, i_l' = -M(q) i_l / L up to branch orientation
    dae = assemble_dae(ml)
    eq = find_equilibrium(dae, 0.4)
    red = schur_reduce(dae, eq)
    assert sorted(np.linalg.eigvals(red.f_prime).real) == pytest.approx([-0.4, 0.0], abs=1e-12)


@pytest.mark.parametrize("name, q", [("ml_parallel.net", 0.3), ("mrl.net", 0.5), ("neural.net", -0.9)])
def test_pencil_matches_qz(name, q):
    dae = assemble_dae(load_netlist(name))
    eq = find_equilibrium(dae, q)
    ps = pencil_spectrum(dae, eq)
    qz = pencil_eigenvalues(dae.jacobian(eq.x), dae.r)
    assert hausdorff(ps.spectrum.eigenvalues, qz) <= 1e-7 * np.linalg.norm(dae.jacobian(eq.x), 2)


def test_neural_matches_nodal_model(neural):
    dae = assemble_dae(neural)
    R = {b.id: b.value for b in neural.of_kind("resistor")}
    C = {b.id: b.value for b in neural.of_kind("capacitor")}
    for M in (-2.5, -1.2, 0.4):
        eq = find_equilibrium(dae, M)
        ps = pencil_spectrum(dae, eq)
        want = np.linalg.eigvals(neural_nodal_matrix(R, C, M))
        got = ps.spectrum.transverse()
        assert hausdorff(got, want) < 1e-9


def test_lift_maps_into_kernel_of_constraint_derivative(neural):
    dae = assemble_dae(neural)
    eq = find_equilibrium(dae, 0.2)
    J = dae.jacobian(eq.x)
    red = schur_blocks(J, dae.r)
    u = np.random.default_rng(0).normal(size=dae.r)
    lifted = red.lift(u)
    assert np.allclose(J[dae.r :] @ lifted, 0.0, atol=1e-12)


def test_singular_constraint(tmp_path):
    dae = assemble_dae(load_netlist("vc_loop.net"))
    with pytest.raises(SingularConstraintError):
        schur_blocks(dae.jacobian(np.zeros(dae.r + dae.p)), dae.r)


def test_two_memristors_rejected():
    with pytest.raises(ModelError):
        assemble_dae(parse_netlist("M m1 a b 0 1\nM m2 a b 0 1\nL l1 a b 1\n"))


def test_normal_form_dae():
    dae = normal_form_dae()
    eq = find_equilibrium(dae, 0.5)
    assert np.allclose(eq.x, [0.5, 0.0, 0.0])
    red = schur_reduce(dae, eq)
    assert np.allclose(red.f_prime, [[0.0, 1.0], [0.0, 0.5]])


def test_equilibrium_at_reports_residuals(ml):
    dae = assemble_dae(ml)
    eq = equilibrium_at(dae, [0.0, 1.0, 0.0, 0.0, 0.0])
    assert eq.residual_g > 0.5
