"""Certification of transcritical bifurcations without parameters.

Checks run at three levels: explicit ODEs (:func:`check_ode_tbwp`),
semiexplicit DAEs (:func:`check_dae_tbwp`) and circuits, where the
structural graph conditions are cross-checked against the numeric DAE
test (:func:`check_circuit_tbwp`). :func:`check_nonpassive_zero_multiplicity`
covers circuits whose resistors need not be passive.

Every check returns a report of per-condition entries. An entry passes,
fails, or is inconclusive when a decisive number falls inside the
one-decade band around its tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dae import (
    Characteristics,
    EquilibriumPoint,
    SemiexplicitDAE,
    SingularConstraintError,
    assemble_dae,
    find_equilibrium,
    pencil_spectrum,
    schur_blocks,
)
from .graph import check_configurations, enumerate_trees, mr_products, branch_resistances
from .netlist import Circuit
from .numerics import (
    DEFAULT_TOLERANCES,
    IndexStructureError,
    NumericsError,
    Tolerances,
    compare,
    det_jacobian_derivative,
    generalized_eigvec,
    jacobian_fd,
    rank_info,
    second_directional_derivative,
    spectrum,
)

PASS, FAIL, INCONCLUSIVE, SKIPPED = "pass", "fail", "inconclusive", "skipped"
CERTIFIED, REFUTED = "certified", "refuted"


def _vec(v) -> list[float]:
    return [float(x) for x in np.ravel(v)]


@dataclass
class Condition:
    id: str
    status: str
    certificate: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "pass": self.passed,
            "status": self.status,
            "certificate": self.certificate,
            "tolerances": self.tolerances,
            "message": self.message,
        }


def _verdict(conditions: Sequence[Condition]) -> str:
    statuses = {c.status for c in conditions}
    if FAIL in statuses:
        return REFUTED
    if statuses <= {PASS}:
        return CERTIFIED
    return INCONCLUSIVE


@dataclass
class TbwpReport:
    level: str
    conditions: list[Condition]
    line_direction: list[float] = field(default_factory=list)
    line_provenance: str = ""
    spectra: dict | None = None

    @property
    def verdict(self) -> str:
        return _verdict(self.conditions)

    @property
    def failing(self) -> list[str]:
        return [c.id for c in self.conditions if c.status == FAIL]

    def condition(self, cid: str) -> Condition:
        for c in self.conditions:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "verdict": self.verdict,
            "failing": self.failing,
            "conditions": [c.as_dict() for c in self.conditions],
            "line_direction": self.line_direction,
            "line_provenance": self.line_provenance,
            "spectra": self.spectra,
        }


# ---------------------------------------------------------------------------
# shared pieces


def _line_condition(cid, F, x_star, direction, tols) -> Condition:
    ts = np.linspace(-tols.line_radius, tols.line_radius, tols.line_samples)
    res = max(float(np.max(np.abs(F(x_star + t * direction)), initial=0.0)) for t in ts)
    c = compare(res, tols.line_tol)
    status = PASS if c < 0 else FAIL if c > 0 else INCONCLUSIVE
    return Condition(
        cid,
        status,
        {"max_residual": res, "samples": int(tols.line_samples), "radius": tols.line_radius},
        {"line_tol": tols.line_tol},
        "" if status == PASS else "field does not vanish along the line",
    )


@dataclass
class _Zero2:
    condition: Condition
    p: np.ndarray | None = None
    q: np.ndarray | None = None


def _double_zero_condition(cid, J, tols, line_direction=None) -> _Zero2:
    """Double index-two zero eigenvalue of ``J`` and hyperbolic remainder."""
    spec = spectrum(J, tols)
    cert: dict = {"spectrum": spec.as_dict()}
    tol_d = {"zero_tol": tols.zero_tol, "realpart_tol": tols.realpart_tol, "lsq_tol": tols.lsq_tol}
    if spec.ambiguous:
        return _Zero2(
            Condition(cid, INCONCLUSIVE, cert, tol_d, "eigenvalues inside a tolerance band: "
                      + ", ".join(f"{spec.eigenvalues[i]:.3e}" for i in spec.ambiguous))
        )
    if spec.n_zero != 2:
        return _Zero2(
            Condition(cid, FAIL, cert, tol_d, f"zero cluster has {spec.n_zero} eigenvalue(s), not 2")
        )
    if spec.critical:
        return _Zero2(Condition(cid, FAIL, cert, tol_d, "a nonzero eigenvalue lies on the imaginary axis"))
    scale = float(np.linalg.norm(J, 2)) or 1.0
    info = rank_info(J, tol=tols.zero_tol * scale)
    sv = info.singular_values
    cert["corank"] = info.corank
    cert["singular_values"] = _vec(sv)
    if info.corank != 1:
        return _Zero2(Condition(cid, FAIL, cert, tol_d, f"geometric multiplicity {info.corank}, not 1"))
    if compare(sv[-1], tols.zero_tol * scale) >= 0 or (
        sv.size > 1 and compare(sv[-2], tols.zero_tol * scale) <= 0
    ):
        return _Zero2(Condition(cid, INCONCLUSIVE, cert, tol_d, "kernel dimension is ambiguous"))
    p = info.null_basis[:, 0]
    if line_direction is not None:
        if float(np.dot(p, line_direction)) < 0:
            p = -p
        cert["kernel_alignment"] = float(abs(np.dot(p, line_direction)))
    try:
        ge = generalized_eigvec(J, p, tols, info)
    except IndexStructureError as exc:
        return _Zero2(Condition(cid, FAIL, cert, tol_d, str(exc)))
    cert.update(p=_vec(p), q=_vec(ge.q), gen_residual=ge.residual)
    return _Zero2(Condition(cid, PASS, cert, tol_d), p, ge.q)


def transversality(
    cid: str,
    field_fn: Callable,
    jac_fn: Callable,
    x,
    p,
    q,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> Condition:
    """Decide ``F''(x) p q not in im F'(x)`` by two independent routes.

    Route one differentiates ``det F'`` along ``q``; route two measures the
    component of the second directional derivative outside the image of
    ``F'``. Both are normalized so that they agree in magnitude.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float) / np.linalg.norm(p)
    q = np.asarray(q, dtype=float) / np.linalg.norm(q)
    J = jac_fn(x)
    scale = float(np.linalg.norm(J, 2)) or 1.0
    info = rank_info(J, tol=tols.zero_tol * scale)
    dd = det_jacobian_derivative(jac_fn, x, q)
    w = second_directional_derivative(field_fn, x, p, q)
    hess = info.image_residual(w)
    c_det = compare(dd.normalized, tols.trans_tol)
    c_hess = compare(hess, tols.trans_tol)
    cert = {
        "p": _vec(p),
        "q": _vec(q),
        "det_derivative": dd.as_dict(),
        "second_derivative": _vec(w),
        "out_of_image": hess,
    }
    tol_d = {"trans_tol": tols.trans_tol}
    if c_det == 0 or c_hess == 0:
        return Condition(cid, INCONCLUSIVE, cert, tol_d, "transversality scalar inside tolerance band")
    if c_det != c_hess:
        return Condition(cid, INCONCLUSIVE, cert, tol_d, "determinant and second-derivative routes disagree")
    if c_det > 0:
        return Condition(cid, PASS, cert, tol_d)
    return Condition(cid, FAIL, cert, tol_d, "transversality scalar vanishes")


# ---------------------------------------------------------------------------
# explicit ODEs


def check_ode_tbwp(
    field_fn: Callable,
    jacobian: Callable | None,
    x_star,
    line_direction,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> TbwpReport:
    """Check the TBWP conditions for ``x' = f(x)`` at ``x_star``.

    All three conditions are invariant under orthogonal changes of
    coordinates, so an oblique equilibrium line is handled in place.
    """
    x_star = np.asarray(x_star, dtype=float)
    d = np.asarray(line_direction, dtype=float)
    d = d / np.linalg.norm(d)
    jac_fn = jacobian if jacobian is not None else (lambda x: jacobian_fd(field_fn, x))

    def f(x):
        return np.atleast_1d(np.asarray(field_fn(x), dtype=float))

    conds = [_line_condition("ode.line_of_equilibria", f, x_star, d, tols)]
    J = np.atleast_2d(np.asarray(jac_fn(x_star), dtype=float))
    z2 = _double_zero_condition("ode.double_index_two_zero", J, tols, d)
    conds.append(z2.condition)
    if z2.condition.passed:
        conds.append(transversality("ode.transversality", f, jac_fn, x_star, z2.p, z2.q, tols))
    else:
        conds.append(Condition("ode.transversality", SKIPPED, message="needs a double index-two zero"))
    return TbwpReport(
        "ode",
        conds,
        _vec(d),
        "supplied by caller",
        z2.condition.certificate.get("spectrum"),
    )


# ---------------------------------------------------------------------------
# semiexplicit DAEs


def check_dae_tbwp(
    dae: SemiexplicitDAE,
    eq: EquilibriumPoint,
    line_direction=None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> TbwpReport:
    r = dae.r
    if line_direction is None:
        if dae.line_index is None:
            raise ValueError("line_direction is required for this DAE")
        line_direction = np.eye(r)[dae.line_index]
        provenance = "line coordinate of the model"
    else:
        provenance = "supplied by caller"
    d = np.asarray(line_direction, dtype=float)
    d = d / np.linalg.norm(d)
    x = eq.x
    J = dae.jacobian(x)
    conds: list[Condition] = []
    try:
        red = schur_blocks(J, r, tols)
    except SingularConstraintError as exc:
        conds.append(Condition("dae.gz_nonsingular", FAIL, message=str(exc)))
        for cid in ("dae.line_of_equilibria", "dae.double_index_two_zero", "dae.transversality"):
            conds.append(Condition(cid, SKIPPED, message="g_z singular"))
        return TbwpReport("dae", conds, _vec(d), provenance)
    conds.append(Condition("dae.gz_nonsingular", PASS, {"cond_gz": red.cond_D}))

    dbar = np.concatenate([d, np.zeros(dae.p)])
    conds.append(_line_condition("dae.line_of_equilibria", dae.F, x, dbar, tols))

    z2 = _double_zero_condition("dae.double_index_two_zero", red.f_prime, tols, d)
    cond2 = z2.condition
    Jscale = float(np.linalg.norm(J, 2)) or 1.0
    Finfo = rank_info(J, tol=tols.zero_tol * Jscale)
    cond2.certificate["corank_F"] = Finfo.corank
    if cond2.passed and Finfo.corank != 1:
        cond2.status = FAIL
        cond2.message = f"corank of F' is {Finfo.corank}, not 1"
    conds.append(cond2)
    if not cond2.passed:
        conds.append(Condition("dae.transversality", SKIPPED, message="needs a double index-two zero"))
        return TbwpReport("dae", conds, _vec(d), provenance, cond2.certificate.get("spectrum"))

    pbar = red.lift(z2.p)
    qbar = red.lift(z2.q)
    cond3 = transversality("dae.transversality", dae.F, dae.jacobian, x, pbar, qbar, tols)
    cond3.certificate["p_reduced"] = _vec(z2.p)
    cond3.certificate["q_reduced"] = _vec(z2.q)
    conds.append(cond3)
    return TbwpReport("dae", conds, _vec(d), provenance, cond2.certificate.get("spectrum"))


# ---------------------------------------------------------------------------
# stability along the equilibrium line


@dataclass
class BranchSample:
    q_m: float
    memristance: float | None
    eigenvalues: list[complex]
    transverse: list[complex]
    n_positive: int
    n_negative: int
    n_zero: int
    regular: bool  # exactly one zero eigenvalue
    residual: float
    error: str = ""

    def as_dict(self) -> dict:
        return {
            "q_m": self.q_m,
            "memristance": self.memristance,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "transverse": [[float(z.real), float(z.imag)] for z in self.transverse],
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
            "n_zero": self.n_zero,
            "regular": self.regular,
            "residual": self.residual,
            "error": self.error,
        }


def _as_dae(model) -> SemiexplicitDAE:
    return assemble_dae(model) if isinstance(model, Circuit) else model


def memristance_of(dae: SemiexplicitDAE, q: float) -> float | None:
    if dae.characteristics is None or dae.line_index is None or dae.circuit is None:
        return None
    if not dae.circuit.class_index["memristor"]:
        return None
    return float(dae.characteristics.memristance(q))


def classify_equilibrium_branch(
    model: Circuit | SemiexplicitDAE,
    samples: Sequence[float],
    tols: Tolerances = DEFAULT_TOLERANCES,
    seed=None,
) -> list[BranchSample]:
    """Stability profile of the equilibrium line at each charge sample."""
    dae = _as_dae(model)
    out = []
    for q in samples:
        q = float(q)
        try:
            eq = find_equilibrium(dae, q, seed, tols)
            ps = pencil_spectrum(dae, eq, tols)
        except (NumericsError, SingularConstraintError) as exc:
            out.append(BranchSample(q, memristance_of(dae, q), [], [], 0, 0, 0, False, np.nan, str(exc)))
            continue
        seed = eq.x
        spec = ps.spectrum
        ev = list(spec.eigenvalues)
        out.append(
            BranchSample(
                q_m=q,
                memristance=memristance_of(dae, q),
                eigenvalues=ev,
                transverse=list(spec.transverse()),
                n_positive=len(spec.unstable),
                n_negative=len(spec.stable),
                n_zero=spec.n_zero,
                regular=spec.n_zero == 1,
                residual=max(eq.residual_h, eq.residual_g),
            )
        )
    return out


# ---------------------------------------------------------------------------
# circuits


@dataclass
class CircuitTbwpReport:
    structural: TbwpReport
    numeric: TbwpReport
    config: dict
    passivity: dict
    memristance: float | None
    memristance_slope: float | None
    q_star: float
    stability_profile: list[BranchSample]

    @property
    def verdict(self) -> str:
        s, n = self.structural.verdict, self.numeric.verdict
        if s == n:
            return s
        return INCONCLUSIVE

    @property
    def failing(self) -> list[str]:
        return self.structural.failing + self.numeric.failing

    @property
    def conditions(self) -> list[Condition]:
        return self.structural.conditions + self.numeric.conditions

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "failing": self.failing,
            "q_star": self.q_star,
            "structural": self.structural.as_dict(),
            "numeric": self.numeric.as_dict(),
            "config": self.config,
            "passivity": self.passivity,
            "memristance": self.memristance,
            "memristance_slope": self.memristance_slope,
            "stability_profile": [s.as_dict() for s in self.stability_profile],
        }


def _min_sym_eig(A) -> float | None:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return None
    return float(np.min(np.linalg.eigvalsh(0.5 * (A + A.T))))


def _asymmetry(A) -> float:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A - A.T) / max(np.linalg.norm(A), np.finfo(float).tiny))


def _passivity(dae: SemiexplicitDAE, eq: EquilibriumPoint) -> dict:
    chars: Characteristics = dae.characteristics
    lay = dae.layout
    y, z = eq.y_star, eq.z_star
    C = chars.capacitance(y[lay["v_c"]])
    L = chars.inductance(y[lay["i_l"]])
    i_r = z[lay["i_r"]]
    R = chars.resistance(i_r) if i_r.size else np.zeros((0, 0))
    return {
        "C_min_eig": _min_sym_eig(C),
        "L_min_eig": _min_sym_eig(L),
        "R_min_eig": _min_sym_eig(R),
        "C_asymmetry": _asymmetry(C),
        "L_asymmetry": _asymmetry(L),
    }


def check_circuit_tbwp(
    circuit: Circuit,
    eq: EquilibriumPoint | None = None,
    q_star: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
    characteristics: Characteristics | None = None,
) -> CircuitTbwpReport:
    """Graph-theoretic TBWP test, confirmed by the numeric DAE test.

    A disagreement between the structural and numeric verdicts is
    reported as inconclusive, with both sets of certificates.
    """
    if len(circuit.class_index["memristor"]) != 1:
        raise ValueError("circuit-level analysis needs exactly one memristor")
    dae = assemble_dae(circuit, characteristics)
    if eq is None:
        eq = find_equilibrium(dae, 0.0 if q_star is None else q_star, tols=tols)
    q = float(eq.y_star[dae.layout["q_m"]][0])
    chars = dae.characteristics
    cfg = check_configurations(circuit)

    conds = []
    ok1 = cfg.vmc_loop is None and cfg.ilc_cutset is None
    conds.append(
        Condition(
            "circuit.no_vmc_loop_ilc_cutset",
            PASS if ok1 else FAIL,
            {"vmc_loop": cfg.vmc_loop, "ilc_cutset": cfg.ilc_cutset},
            message="" if ok1 else "a VMC-loop or ILC-cutset is present",
        )
    )
    ok2 = cfg.unique_vml_loop_with_memristor_and_inductor
    if ok2:
        msg = ""
    elif cfg.n_vml_loops == 0:
        msg = "no VML-loop"
    elif cfg.n_vml_loops > 1:
        msg = f"{cfg.n_vml_loops} VML-loops"
    else:
        msg = "the VML-loop misses the memristor or an inductor"
    conds.append(
        Condition(
            "circuit.unique_vml_loop",
            PASS if ok2 else FAIL,
            {"n_vml_loops": cfg.n_vml_loops, "witnesses": cfg.vml_loops[:2]},
            message=msg,
        )
    )

    pas = _passivity(dae, eq)
    status, notes = PASS, []
    for key in ("C_min_eig", "L_min_eig", "R_min_eig"):
        v = pas[key]
        if v is None:
            continue
        c = compare(v, tols.trans_tol)
        if v < 0 and c > 0:
            status = FAIL
            notes.append(f"{key[0]} not positive definite")
        elif c <= 0 and status != FAIL:
            status = INCONCLUSIVE
            notes.append(f"{key[0]} nearly singular")
    for key in ("C_asymmetry", "L_asymmetry"):
        if pas[key] > 1e-12:
            status = FAIL
            notes.append(f"{key[0]} not symmetric")
    conds.append(Condition("circuit.passivity", status, pas, {"trans_tol": tols.trans_tol}, "; ".join(notes)))

    M = float(chars.memristance(q))
    dM = float(chars.memristance_slope(q))
    cz = compare(M, tols.zero_tol)
    conds.append(
        Condition(
            "circuit.memristance_zero",
            PASS if cz < 0 else FAIL if cz > 0 else INCONCLUSIVE,
            {"M": M},
            {"zero_tol": tols.zero_tol},
            "" if cz < 0 else "memristance does not vanish",
        )
    )
    cs = compare(dM, tols.trans_tol)
    conds.append(
        Condition(
            "circuit.memristance_slope",
            PASS if cs > 0 else FAIL if cs < 0 else INCONCLUSIVE,
            {"dM": dM},
            {"trans_tol": tols.trans_tol},
            "" if cs > 0 else "M'(q*) vanishes",
        )
    )
    line = np.eye(dae.r)[dae.line_index]
    structural = TbwpReport("circuit", conds, _vec(line), "q_m coordinate axis")
    numeric = check_dae_tbwp(dae, eq, line, tols)
    delta = tols.line_radius
    profile = classify_equilibrium_branch(dae, [q - delta, q + delta], tols, seed=eq.x)
    return CircuitTbwpReport(
        structural=structural,
        numeric=numeric,
        config=cfg.as_dict(),
        passivity=pas,
        memristance=M,
        memristance_slope=dM,
        q_star=q,
        stability_profile=profile,
    )


# ---------------------------------------------------------------------------
# non-passive circuits


def check_nonpassive_zero_multiplicity(
    circuit: Circuit,
    eq: EquilibriumPoint | None = None,
    q_star: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
    characteristics: Characteristics | None = None,
) -> TbwpReport:
    """Tree-sum criterion for a multiple zero eigenvalue.

    With no VC-loops, IL-cutsets, VL-loops or IC-cutsets, a nonvanishing
    MR-product sum over proper trees and a vanishing one over L-proper
    trees force the zero eigenvalue to be multiple; the conclusion is
    confirmed on the pencil spectrum.
    """
    if len(circuit.class_index["memristor"]) != 1:
        raise ValueError("circuit-level analysis needs exactly one memristor")
    dae = assemble_dae(circuit, characteristics)
    if eq is None:
        eq = find_equilibrium(dae, 0.0 if q_star is None else q_star, tols=tols)
    lay = dae.layout
    q = float(eq.y_star[lay["q_m"]][0])
    i_r = dict(zip([b.id for b in circuit.of_kind("resistor")], eq.z_star[lay["i_r"]]))
    values = branch_resistances(circuit, q, i_r)

    cfg = check_configurations(circuit)
    bad = {
        k: getattr(cfg, k)
        for k in ("vc_loop", "il_cutset", "vl_loop", "ic_cutset")
        if getattr(cfg, k) is not None
    }
    conds = [
        Condition(
            "nonpassive.no_vc_il_vl_ic",
            FAIL if bad else PASS,
            {k: getattr(cfg, k) for k in ("vc_loop", "il_cutset", "vl_loop", "ic_cutset")},
            message=", ".join(f"{k} present" for k in bad),
        )
    ]

    sums = {}
    for fam, cid, want_zero in (
        ("proper", "nonpassive.proper_sum_nonzero", False),
        ("lproper", "nonpassive.lproper_sum_zero", True),
    ):
        family = enumerate_trees(circuit, fam)
        products = mr_products(circuit, family, values)
        family.products = products
        total = float(sum(products))
        scale = float(sum(abs(x) for x in products))
        sums[fam] = family
        cert = {"sum": total, "scale": scale, "count": len(family)}
        tol_d = {"trans_tol": tols.trans_tol}
        if not family.trees:
            conds.append(Condition(cid, FAIL, cert, tol_d, f"no {fam} trees: {family.explanation}"))
            continue
        c = compare(total, tols.trans_tol * scale)
        if c == 0:
            status = INCONCLUSIVE
        elif want_zero:
            status = PASS if c < 0 else FAIL
        else:
            status = PASS if c > 0 else FAIL
        msg = "" if status == PASS else f"{fam} MR-product sum {'does not vanish' if want_zero else 'vanishes'}"
        conds.append(Condition(cid, status, cert, tol_d, msg))

    chars = dae.characteristics
    C = np.atleast_2d(chars.capacitance(eq.y_star[lay["v_c"]]))
    L = np.atleast_2d(chars.inductance(eq.y_star[lay["i_l"]]))
    for name, mat in (("C", C), ("L", L)):
        if mat.size and rank_info(mat).corank:
            conds.append(Condition(f"nonpassive.{name}_nonsingular", FAIL, message=f"{name} singular"))

    spectra = None
    try:
        ps = pencil_spectrum(dae, eq, tols)
        spectra = ps.as_dict()
    except SingularConstraintError as exc:
        ps = None
        spectra = {"error": str(exc)}
    if all(c.passed for c in conds):
        if ps is None:
            conds.append(Condition("nonpassive.zero_multiplicity", FAIL, message=spectra["error"]))
        else:
            n0 = ps.spectrum.n_zero
            conds.append(
                Condition(
                    "nonpassive.zero_multiplicity",
                    PASS if n0 >= 2 else FAIL,
                    {"n_zero": n0},
                    {"zero_tol": tols.zero_tol},
                    "" if n0 >= 2 else "zero eigenvalue is simple",
                )
            )
    report = TbwpReport("nonpassive", conds, [], "q_m coordinate axis", spectra)
    report.tree_families = {k: v.as_dict() for k, v in sums.items()}  # type: ignore[attr-defined]
    return report
