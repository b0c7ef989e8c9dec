import csv

import numpy as np
import pytest

from memtbwp.dae import assemble_dae, normal_form_dae
from memtbwp.sim import (
    ATTRACTED,
    REPELLED,
    UNDECIDED,
    ConstraintProjector,
    ConstraintSolveError,
    stability_exchange_experiment,
    trace_equilibrium_line,
    write_line_csv,
    write_trajectory_csv,
)
from memtbwp.tbwp import classify_equilibrium_branch

FAST = dict(t_end=30.0, step=0.02)


def test_ml_exchange(ml):
    rep = stability_exchange_experiment(assemble_dae(ml), 0.0, dq=0.5, **FAST)
    assert rep.side("M>0").verdict == ATTRACTED
    assert rep.side("M<0").verdict == REPELLED
    for s in rep.sides:
        assert s.max_constraint_residual <= 1e-8
        assert s.initial_offset == rep.eps


def test_ml_closed_form_decay(ml):
    # i_l decays like exp(-M t / L) on the attracting side
    rep = stability_exchange_experiment(assemble_dae(ml), 0.0, dq=0.5, t_end=4.0, step=0.01)
    side = rep.side("M>0")
    assert side.final_distance == pytest.approx(1e-3 * np.exp(-0.5 * 4.0), rel=1e-2)


def test_mrl_exchange_labels(mrl):
    rep = stability_exchange_experiment(assemble_dae(mrl), 0.0, dq=0.5, **FAST)
    # both sides have M < 0, so they are labelled by offset; R + M > 0 on the plus side
    assert rep.side("plus").verdict == ATTRACTED
    assert rep.side("minus").verdict == REPELLED


def test_normal_form_dae_exchange():
    rep = stability_exchange_experiment(normal_form_dae(), 0.0, dq=0.5, **FAST)
    assert rep.side("minus").verdict == ATTRACTED
    assert rep.side("plus").verdict == REPELLED


def test_at_bifurcation_is_not_attracted(ml):
    rep = stability_exchange_experiment(assemble_dae(ml), 0.0, dq=0.0, t_end=5.0, step=0.05)
    assert all(s.verdict in (UNDECIDED, REPELLED) for s in rep.sides)


def test_verdicts_agree_with_eigenvalues(ml, mrl):
    for c in (ml, mrl):
        dae = assemble_dae(c)
        rep = stability_exchange_experiment(dae, 0.0, dq=0.5, **FAST)
        for s in rep.sides:
            prof = classify_equilibrium_branch(dae, [s.q_m])[0]
            assert (s.verdict == REPELLED) == (prof.n_positive > 0)


def test_trajectory_csv(ml, tmp_path):
    dae = assemble_dae(ml)
    rep = stability_exchange_experiment(dae, 0.0, dq=0.5, t_end=1.0, step=0.1)
    path = write_trajectory_csv(tmp_path / "t.csv", dae, rep.sides[0])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "q[m1]", "i[l1]", "constraint_residual"]
    assert len(rows) == 12
    assert float(rows[-1][0]) == pytest.approx(1.0)
    assert max(float(r[-1]) for r in rows[1:]) <= 1e-8


def test_trace_ml_matches_closed_form(ml, tmp_path):
    rows = trace_equilibrium_line(assemble_dae(ml), (-1.0, 1.0), 21)
    assert len(rows) == 21
    for r in rows:
        assert r.status == "ok"
        assert complex(r.nonzero[0]).real == pytest.approx(-r.q_m / 1.0, abs=1e-8)
    path = write_line_csv(tmp_path / "line.csv", rows)
    header = next(csv.reader(path.open()))
    assert header[:3] == ["q_m", "memristance", "status"]


def test_trace_mrl_crossing(mrl):
    rows = trace_equilibrium_line(assemble_dae(mrl), (0.0, 2.0), 21)
    ev = np.array([complex(r.nonzero[0]).real for r in rows])
    q = np.array([r.q_m for r in rows])
    assert np.allclose(ev, -(q - 1.0 + 1.0), atol=1e-8)  # -(M(q) + R) / L


def test_trace_neural_residuals(neural):
    rows = trace_equilibrium_line(assemble_dae(neural), (-3.0, 1.0), 9)
    assert all(r.status == "ok" and r.residual == 0.0 for r in rows)


def test_trace_records_failures():
    from memtbwp.netlist import load_netlist

    rows = trace_equilibrium_line(assemble_dae(load_netlist("vc_loop.net")), (0.0, 1.0), 3)
    assert all(r.status.startswith("error") for r in rows)


def test_projector_failure_raises():
    from memtbwp.netlist import parse_netlist

    # memristor parallel to a capacitor: g_z is singular where M vanishes
    dae = assemble_dae(parse_netlist("M m1 a b 0 1\nC c1 a b 1\n"))
    proj = ConstraintProjector(dae, np.zeros(dae.p))
    with pytest.raises(ConstraintSolveError):
        proj(np.array([0.0, 1.0]))
