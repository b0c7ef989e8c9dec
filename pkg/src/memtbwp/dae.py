"""Semiexplicit DAE models ``y' = h(y, z)``, ``0 = g(y, z)``.

:func:`assemble_dae` builds the branch-oriented model of a circuit with at
most one memristor, using ``y = (q_m, v_c, i_l)`` and
``z = (i_m, i_c, v_l, i_r, v_j, i_u)``. Capacitance and inductance are
folded into ``h``, which therefore reads ``(i_m, C^-1 i_c, L^-1 v_l)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import ReducedMatrices, fundamental_matrices
from .netlist import CLASS_ORDER, Circuit
from .numerics import (
    DEFAULT_TOLERANCES,
    NewtonError,
    RankInfo,
    Spectrum,
    Tolerances,
    jacobian_fd,
    newton_solve,
    rank_info,
    spectrum,
)

Y_BLOCKS = ("q_m", "v_c", "i_l")
Z_BLOCKS = ("i_m", "i_c", "v_l", "i_r", "v_j", "i_u")
# device class owning each variable block
_BLOCK_KIND = {
    "q_m": "memristor",
    "v_c": "capacitor",
    "i_l": "inductor",
    "i_m": "memristor",
    "i_c": "capacitor",
    "v_l": "inductor",
    "i_r": "resistor",
    "v_j": "isource",
    "i_u": "vsource",
}


class ModelError(ValueError):
    pass


class SingularConstraintError(ModelError):
    """``g_z`` is singular: the DAE is not index one at this point."""


# ---------------------------------------------------------------------------
# device characteristics


@dataclass
class Characteristics:
    """Smooth device characteristics evaluated by the assembled model.

    ``capacitance``, ``inductance`` and ``resistance`` return square
    matrices, so coupled devices are allowed; ``resistor_voltage`` is the
    map ``gamma`` with ``resistance`` its Jacobian.
    """

    memristance: Callable[[float], float]
    memristance_slope: Callable[[float], float]
    capacitance: Callable[[np.ndarray], np.ndarray]
    inductance: Callable[[np.ndarray], np.ndarray]
    resistor_voltage: Callable[[np.ndarray], np.ndarray]
    resistance: Callable[[np.ndarray], np.ndarray]
    reactive_constant: bool = True

    @classmethod
    def from_circuit(cls, circuit: Circuit) -> "Characteristics":
        mem = circuit.of_kind("memristor")
        caps = np.array([b.value for b in circuit.of_kind("capacitor")])
        inds = np.array([b.value for b in circuit.of_kind("inductor")])
        res_polys = [b.characteristic for b in circuit.of_kind("resistor")]
        gammas = [p.antiderivative() for p in res_polys]
        if mem:
            M = mem[0].characteristic
            dM = M.derivative()
            memristance, slope = M, dM
        else:
            memristance = slope = lambda q: 0.0
        return cls(
            memristance=memristance,
            memristance_slope=slope,
            capacitance=lambda v: np.diag(caps),
            inductance=lambda i: np.diag(inds),
            resistor_voltage=lambda i: np.array([g(x) for g, x in zip(gammas, i)]),
            resistance=lambda i: np.diag([p(x) for p, x in zip(res_polys, i)]),
            reactive_constant=True,
        )


# ---------------------------------------------------------------------------
# the model


@dataclass
class SemiexplicitDAE:
    r: int
    p: int
    h: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray] | None = None
    y_names: list[str] = field(default_factory=list)
    z_names: list[str] = field(default_factory=list)
    line_index: int | None = 0  # y-coordinate spanning the equilibrium line
    layout: dict[str, slice] = field(default_factory=dict)
    circuit: Circuit | None = None
    characteristics: Characteristics | None = None
    matrices: ReducedMatrices | None = None

    def split(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        return x[: self.r], x[self.r :]

    def F(self, x) -> np.ndarray:
        y, z = self.split(x)
        return np.concatenate([np.atleast_1d(self.h(y, z)), np.atleast_1d(self.g(y, z))])

    def jacobian(self, x) -> np.ndarray:
        """Full Jacobian ``F'(x)`` with blocks ``[[h_y, h_z], [g_y, g_z]]``."""
        if self.jac is not None:
            return np.asarray(self.jac(np.asarray(x, dtype=float)), dtype=float)
        return jacobian_fd(self.F, x)

    def blocks(self, x):
        J = self.jacobian(x)
        r = self.r
        return J[:r, :r], J[:r, r:], J[r:, :r], J[r:, r:]

    @property
    def names(self) -> list[str]:
        return list(self.y_names) + list(self.z_names)


def _layout(circuit: Circuit) -> tuple[dict[str, slice], list[str], list[str]]:
    layout: dict[str, slice] = {}
    y_names, z_names = [], []
    prefix = {"q": "q", "v": "v", "i": "i"}
    for blocks, names in ((Y_BLOCKS, y_names), (Z_BLOCKS, z_names)):
        start = 0
        for blk in blocks:
            ids = [b.id for b in circuit.of_kind(_BLOCK_KIND[blk])]
            layout[blk] = slice(start, start + len(ids))
            names.extend(f"{prefix[blk[0]]}[{i}]" for i in ids)
            start += len(ids)
    return layout, y_names, z_names


def assemble_dae(circuit: Circuit, characteristics: Characteristics | None = None) -> SemiexplicitDAE:
    n_m = len(circuit.class_index["memristor"])
    if n_m > 1:
        raise ModelError(f"circuit has {n_m} memristors; at most one is supported")
    chars = characteristics or Characteristics.from_circuit(circuit)
    mats = fundamental_matrices(circuit)
    B, Q = mats.B, mats.Q
    cols = {k: circuit.class_index[k] for k in CLASS_ORDER}
    Bm, Bc, Bl, Br, Bu, Bj = (B[:, cols[k]] for k in CLASS_ORDER)
    Qm, Qc, Ql, Qr, Qu, Qj = (Q[:, cols[k]] for k in CLASS_ORDER)
    V = np.array([b.value for b in circuit.of_kind("vsource")])
    I = np.array([b.value for b in circuit.of_kind("isource")])
    nb, nq = B.shape[0], Q.shape[0]

    layout, y_names, z_names = _layout(circuit)
    r, p = len(y_names), len(z_names)
    ys = {k: layout[k] for k in Y_BLOCKS}
    zs = {k: layout[k] for k in Z_BLOCKS}
    src_v = Bu @ V if V.size else np.zeros(nb)
    src_i = Qj @ I if I.size else np.zeros(nq)

    def mem(q):
        return float(chars.memristance(q[0])) if n_m else 0.0

    def h(y, z):
        C = np.atleast_2d(chars.capacitance(y[ys["v_c"]]))
        L = np.atleast_2d(chars.inductance(y[ys["i_l"]]))
        out = [z[zs["i_m"]]]
        out.append(np.linalg.solve(C, z[zs["i_c"]]) if C.size else np.zeros(0))
        out.append(np.linalg.solve(L, z[zs["v_l"]]) if L.size else np.zeros(0))
        return np.concatenate(out)

    def g(y, z):
        i_m = z[zs["i_m"]]
        i_r = z[zs["i_r"]]
        gamma = np.asarray(chars.resistor_voltage(i_r), dtype=float) if i_r.size else np.zeros(0)
        kvl = (
            Bm @ (mem(y[ys["q_m"]]) * i_m)
            + Bc @ y[ys["v_c"]]
            + Bl @ z[zs["v_l"]]
            + Br @ gamma
            + src_v
            + Bj @ z[zs["v_j"]]
        )
        kcl = (
            Qm @ i_m
            + Qc @ z[zs["i_c"]]
            + Ql @ y[ys["i_l"]]
            + Qr @ i_r
            + Qu @ z[zs["i_u"]]
            + src_i
        )
        return np.concatenate([kvl, kcl])

    def jac(x):
        y, z = x[:r], x[r:]
        J = np.zeros((r + p, r + p))
        zoff = lambda k: slice(r + zs[k].start, r + zs[k].stop)  # noqa: E731
        goff = r  # first g row
        C = np.atleast_2d(chars.capacitance(y[ys["v_c"]]))
        L = np.atleast_2d(chars.inductance(y[ys["i_l"]]))
        # h_z
        J[ys["q_m"], zoff("i_m")] = np.eye(n_m)
        if C.size:
            J[ys["v_c"], zoff("i_c")] = np.linalg.inv(C)
        if L.size:
            J[ys["i_l"], zoff("v_l")] = np.linalg.inv(L)
        # h_y, nonzero only off equilibrium for state-dependent C and L
        if not chars.reactive_constant:
            J[:r, :r] = jacobian_fd(lambda yy: h(yy, z), y)
        # g_y
        kvl = slice(goff, goff + nb)
        kcl = slice(goff + nb, goff + nb + nq)
        if n_m:
            slope = float(chars.memristance_slope(y[ys["q_m"]][0]))
            J[kvl, ys["q_m"]] = (Bm * slope * z[zs["i_m"]][0]).reshape(nb, 1)
        J[kvl, ys["v_c"]] = Bc
        J[kcl, ys["i_l"]] = Ql
        # g_z
        J[kvl, zoff("i_m")] = Bm * mem(y[ys["q_m"]])
        J[kcl, zoff("i_m")] = Qm
        J[kcl, zoff("i_c")] = Qc
        J[kvl, zoff("v_l")] = Bl
        i_r = z[zs["i_r"]]
        if i_r.size:
            J[kvl, zoff("i_r")] = Br @ np.atleast_2d(chars.resistance(i_r))
        J[kcl, zoff("i_r")] = Qr
        J[kvl, zoff("v_j")] = Bj
        J[kcl, zoff("i_u")] = Qu
        return J

    return SemiexplicitDAE(
        r=r,
        p=p,
        h=h,
        g=g,
        jac=jac,
        y_names=y_names,
        z_names=z_names,
        line_index=0 if n_m else None,
        layout=layout,
        circuit=circuit,
        characteristics=chars,
        matrices=mats,
    )


def normal_form_dae() -> SemiexplicitDAE:
    """``y1' = z, y2' = y2 y1, 0 = z - y2``; reduces to ``x' = y, y' = xy``."""

    def h(y, z):
        return np.array([z[0], y[1] * y[0]])

    def g(y, z):
        return np.array([z[0] - y[1]])

    def jac(x):
        y1, y2, _ = x
        return np.array([[0.0, 0.0, 1.0], [y2, y1, 0.0], [0.0, -1.0, 1.0]])

    return SemiexplicitDAE(
        r=2, p=1, h=h, g=g, jac=jac, y_names=["x", "y"], z_names=["z"], line_index=0
    )


# ---------------------------------------------------------------------------
# equilibria


@dataclass
class EquilibriumPoint:
    y_star: np.ndarray
    z_star: np.ndarray
    residual_h: float
    residual_g: float

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.y_star, self.z_star])

    def as_dict(self, dae: SemiexplicitDAE | None = None) -> dict:
        out = {
            "y": [float(v) for v in self.y_star],
            "z": [float(v) for v in self.z_star],
            "residual_h": self.residual_h,
            "residual_g": self.residual_g,
        }
        if dae is not None:
            out["y_names"] = list(dae.y_names)
            out["z_names"] = list(dae.z_names)
        return out


def equilibrium_at(dae: SemiexplicitDAE, x) -> EquilibriumPoint:
    y, z = dae.split(x)
    hv = np.atleast_1d(dae.h(y, z))
    gv = np.atleast_1d(dae.g(y, z))
    nrm = lambda v: float(np.max(np.abs(v))) if v.size else 0.0  # noqa: E731
    return EquilibriumPoint(y.copy(), z.copy(), nrm(hv), nrm(gv))


def find_equilibrium(
    dae: SemiexplicitDAE,
    q_m_value: float | None = None,
    seed=None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> EquilibriumPoint:
    """Solve ``h = 0, g = 0`` with the line coordinate pinned to ``q_m_value``.

    The pinned system has one more equation than unknowns but is
    consistent, so it is solved by Gauss-Newton steps.
    """
    n = dae.r + dae.p
    x0 = np.zeros(n) if seed is None else np.array(seed, dtype=float)
    if x0.shape != (n,):
        raise ModelError(f"seed must have length {n}")
    if dae.line_index is not None and q_m_value is not None:
        x0[dae.line_index] = q_m_value
        free = np.array([k for k in range(n) if k != dae.line_index])
    else:
        free = np.arange(n)

    def residual(u):
        x = x0.copy()
        x[free] = u
        return dae.F(x)

    def jac(u):
        x = x0.copy()
        x[free] = u
        return dae.jacobian(x)[:, free]

    result = newton_solve(
        residual, jac, x0[free], tols.newton_tol, tols.newton_max_iter, tols.newton_max_cond
    )
    x = x0.copy()
    x[free] = result.x
    return equilibrium_at(dae, x)


# ---------------------------------------------------------------------------
# reduction and spectra


@dataclass
class SchurReduction:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    f_prime: np.ndarray  # A - B D^-1 C
    cond_D: float

    def lift(self, u) -> np.ndarray:
        """Tangent lift ``u -> (u, -D^-1 C u)`` onto the constraint manifold."""
        u = np.asarray(u)
        return np.concatenate([u, -np.linalg.solve(self.D, self.C @ u)]) if self.D.size else u


def schur_blocks(M, r: int, tols: Tolerances = DEFAULT_TOLERANCES) -> SchurReduction:
    M = np.asarray(M, dtype=float)
    A, B, C, D = M[:r, :r], M[:r, r:], M[r:, :r], M[r:, r:]
    if D.size == 0:
        return SchurReduction(A, B, C, D, A.copy(), 1.0)
    info = rank_info(D)
    if info.corank > 0:
        raise SingularConstraintError(
            f"g_z is singular (corank {info.corank}): index > 1 at this point"
        )
    cond = float(info.singular_values[0] / info.singular_values[-1])
    if cond > tols.newton_max_cond:
        raise SingularConstraintError(f"g_z is numerically singular (condition {cond:.2e})")
    return SchurReduction(A, B, C, D, A - B @ np.linalg.solve(D, C), cond)


def schur_reduce(
    dae: SemiexplicitDAE, eq: EquilibriumPoint, tols: Tolerances = DEFAULT_TOLERANCES
) -> SchurReduction:
    return schur_blocks(dae.jacobian(eq.x), dae.r, tols)


@dataclass
class PencilSpectrum:
    spectrum: Spectrum
    corank_F: int
    corank_gz: int
    f_prime: np.ndarray
    F_rank: RankInfo

    def as_dict(self) -> dict:
        out = self.spectrum.as_dict()
        out["corank_F"] = self.corank_F
        out["corank_gz"] = self.corank_gz
        return out


def pencil_spectrum(
    dae: SemiexplicitDAE, eq: EquilibriumPoint, tols: Tolerances = DEFAULT_TOLERANCES
) -> PencilSpectrum:
    J = dae.jacobian(eq.x)
    red = schur_blocks(J, dae.r, tols)
    Finfo = rank_info(J)
    gz_corank = rank_info(red.D).corank if red.D.size else 0
    return PencilSpectrum(spectrum(red.f_prime, tols), Finfo.corank, gz_corank, red.f_prime, Finfo)


__all__ = [
    "Characteristics",
    "EquilibriumPoint",
    "ModelError",
    "NewtonError",
    "PencilSpectrum",
    "SchurReduction",
    "SemiexplicitDAE",
    "SingularConstraintError",
    "assemble_dae",
    "equilibrium_at",
    "find_equilibrium",
    "normal_form_dae",
    "pencil_spectrum",
    "schur_blocks",
    "schur_reduce",
]
