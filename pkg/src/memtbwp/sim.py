"""Dynamic demonstration of the stability exchange along the equilibrium line.

The reduced field ``y' = h(y, psi(y))`` is integrated with fixed-step RK4,
where ``psi`` solves ``g(y, z) = 0`` by Newton iterations warm-started from
the previous stage.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dae import SemiexplicitDAE, find_equilibrium, pencil_spectrum
from .numerics import (
    DEFAULT_TOLERANCES,
    NumericsError,
    Tolerances,
    Trajectory,
    integrate_rk4,
)
from .tbwp import memristance_of

ATTRACTED, REPELLED, UNDECIDED = "attracted", "repelled", "undecided"


class ConstraintSolveError(NumericsError):
    """Newton projection onto ``g = 0`` failed along a trajectory."""


class ConstraintProjector:
    """Stateful solver for ``z = psi(y)``; each call starts from the last solution."""

    def __init__(self, dae: SemiexplicitDAE, z0, tol: float = 1e-12, max_iter: int = 30):
        self.dae = dae
        self.z = np.array(z0, dtype=float)
        self.tol = tol
        self.max_iter = max_iter
        self.gz: np.ndarray | None = None

    def __call__(self, y) -> np.ndarray:
        dae = self.dae
        z = self.z.copy()
        if dae.p == 0:
            return z
        # chord iterations with the stored g_z; refreshed when progress stalls
        fresh = self.gz is None
        if fresh:
            self._refresh(y, z)
        for k in range(self.max_iter):
            gv = np.atleast_1d(dae.g(y, z))
            if not np.all(np.isfinite(gv)):
                break
            if np.max(np.abs(gv)) <= self.tol * (1.0 + np.max(np.abs(z))):
                self.z = z
                return z
            if k > 0 and k % 3 == 0 and not fresh:
                self._refresh(y, z)
                fresh = True
            z = z - np.linalg.solve(self.gz, gv)
        raise ConstraintSolveError("Newton projection onto g = 0 did not converge")

    def _refresh(self, y, z):
        gz = self.dae.jacobian(np.concatenate([y, z]))[self.dae.r :, self.dae.r :]
        if np.linalg.cond(gz) > 1e14:
            raise ConstraintSolveError("g_z singular along trajectory")
        self.gz = gz

    def residual(self, y, z) -> float:
        gv = np.atleast_1d(self.dae.g(y, z))
        return float(np.max(np.abs(gv))) if gv.size else 0.0


@dataclass
class SideResult:
    label: str
    q_m: float
    memristance: float | None
    eigenvalues: list[complex]
    direction: list[float]
    initial_offset: float
    final_distance: float
    verdict: str
    blowup_time: float | None
    max_constraint_residual: float
    trajectory: Trajectory | None = field(default=None, repr=False)
    z_path: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "q_m": self.q_m,
            "memristance": self.memristance,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "direction": self.direction,
            "initial_offset": self.initial_offset,
            "final_distance": self.final_distance,
            "verdict": self.verdict,
            "blowup_time": self.blowup_time,
            "max_constraint_residual": self.max_constraint_residual,
            "final_time": float(self.trajectory.t[-1]) if self.trajectory is not None else None,
        }


@dataclass
class ExchangeReport:
    q_star: float
    dq: float
    eps: float
    t_end: float
    step: float
    sides: list[SideResult]

    def side(self, label: str) -> SideResult:
        for s in self.sides:
            if s.label == label:
                return s
        raise KeyError(label)

    def as_dict(self) -> dict:
        return {
            "q_star": self.q_star,
            "dq": self.dq,
            "eps": self.eps,
            "t_end": self.t_end,
            "step": self.step,
            "sides": [s.as_dict() for s in self.sides],
        }


def _side_label(dae: SemiexplicitDAE, q: float, sign: int) -> str:
    m = memristance_of(dae, q)
    if m is None or m == 0.0:
        return "plus" if sign > 0 else "minus"
    return "M>0" if m > 0 else "M<0"


def _transverse_direction(f_prime: np.ndarray, line_index: int) -> tuple[np.ndarray, list[complex]]:
    """Leading eigenvector not associated with the null eigenvalue, line component removed."""
    ev, vecs = np.linalg.eig(f_prime)
    null = int(np.argmin(np.abs(ev)))
    others = [k for k in range(ev.size) if k != null]
    if not others:
        raise ValueError("no transverse direction: the state is one-dimensional")
    lead = max(others, key=lambda k: (ev[k].real, -k))
    v = np.real(vecs[:, lead]).copy()
    v[line_index] = 0.0
    if np.linalg.norm(v) < 1e-12:
        v = np.zeros(ev.size)
        v[next(k for k in range(ev.size) if k != line_index)] = 1.0
    v /= np.linalg.norm(v)
    if v[int(np.argmax(np.abs(v)))] < 0:
        v = -v
    return v, [ev[k] for k in sorted(others, key=lambda k: -ev[k].real)]


def _run_side(dae, q, sign, eps, t_end, step, tols, seed) -> SideResult:
    li = dae.line_index
    eq = find_equilibrium(dae, q, seed, tols)
    ps = pencil_spectrum(dae, eq, tols)
    direction, transverse = _transverse_direction(ps.f_prime, li)
    y_star = eq.y_star
    mask = np.ones(dae.r, dtype=bool)
    mask[li] = False

    def distance(y):
        return float(np.linalg.norm((y - y_star)[mask]))

    proj = ConstraintProjector(dae, eq.z_star)

    def field_fn(y):
        return np.atleast_1d(dae.h(y, proj(y)))

    def stop(t, y):
        return distance(y) >= 10 * eps

    y0 = y_star + eps * direction
    traj = integrate_rk4(field_fn, y0, t_end, step, stop=stop)

    # constraint solutions and residuals along the recorded states
    post = ConstraintProjector(dae, eq.z_star)
    zs, worst = [], 0.0
    for y in traj.x:
        if not np.all(np.isfinite(y)):
            zs.append(np.full(dae.p, np.nan))
            continue
        z = post(y)
        zs.append(z)
        worst = max(worst, post.residual(y, z))
    final = distance(traj.x[-1]) if np.all(np.isfinite(traj.x[-1])) else float("inf")
    if traj.blowup_time is not None or final >= 10 * eps:
        verdict = REPELLED
    elif final <= eps / 10:
        verdict = ATTRACTED
    else:
        verdict = UNDECIDED
    return SideResult(
        label=_side_label(dae, q, sign),
        q_m=q,
        memristance=memristance_of(dae, q),
        eigenvalues=transverse,
        direction=[float(v) for v in direction],
        initial_offset=eps,
        final_distance=final,
        verdict=verdict,
        blowup_time=traj.blowup_time,
        max_constraint_residual=worst,
        trajectory=traj,
        z_path=np.array(zs),
    )


def stability_exchange_experiment(
    dae: SemiexplicitDAE,
    q_star: float,
    dq: float = 0.1,
    eps: float = 1e-3,
    t_end: float = 50.0,
    step: float = 1e-3,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> ExchangeReport:
    """Perturb the equilibrium at ``q_star + dq`` and ``q_star - dq`` and integrate.

    A side is *attracted* when the final distance to the line is at most
    ``eps / 10`` and *repelled* once it reaches ``10 * eps``; integration
    stops as soon as the repulsion threshold is crossed.
    """
    if dae.line_index is None:
        raise ValueError("the model has no designated line coordinate")
    sides = [_run_side(dae, q_star + sign * dq, sign, eps, t_end, step, tols, None) for sign in (+1, -1)]
    if sides[0].label == sides[1].label:
        sides[0].label, sides[1].label = "plus", "minus"
    return ExchangeReport(q_star, dq, eps, t_end, step, sides)


def write_trajectory_csv(path: str | Path, dae: SemiexplicitDAE, side: SideResult) -> Path:
    """CSV with columns ``t``, the ``y`` components and the constraint residual."""
    path = Path(path)
    traj = side.trajectory
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *dae.y_names, "constraint_residual"])
        for t, y, z in zip(traj.t, traj.x, side.z_path):
            res = float(np.max(np.abs(np.atleast_1d(dae.g(y, z))))) if dae.p else 0.0
            w.writerow([repr(float(t)), *(repr(float(v)) for v in y), repr(res)])
    return path


# ---------------------------------------------------------------------------
# equilibrium line tables


@dataclass
class LineSample:
    q_m: float
    memristance: float | None
    status: str
    residual: float
    n_positive: int
    n_negative: int
    n_zero: int
    nonzero: list[complex]

    def as_row(self, width: int) -> list:
        ev = list(self.nonzero) + [complex(np.nan, np.nan)] * (width - len(self.nonzero))
        row = [self.q_m, self.memristance, self.status, self.residual,
               self.n_positive, self.n_negative, self.n_zero]
        for z in ev[:width]:
            row += [float(z.real), float(z.imag)]
        return row


def trace_equilibrium_line(
    dae: SemiexplicitDAE,
    q_range: tuple[float, float],
    samples: int = 21,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> list[LineSample]:
    """Equilibria and transverse spectra on an evenly spaced grid of charges.

    Newton failures are recorded per sample and do not abort the trace.
    """
    out, seed = [], None
    for q in np.linspace(q_range[0], q_range[1], samples):
        q = float(q)
        try:
            eq = find_equilibrium(dae, q, seed, tols)
            spec = pencil_spectrum(dae, eq, tols).spectrum
        except (NumericsError, ValueError) as exc:
            out.append(LineSample(q, memristance_of(dae, q), f"error: {exc}", np.nan, 0, 0, 0, []))
            continue
        seed = eq.x
        out.append(
            LineSample(
                q,
                memristance_of(dae, q),
                "ok",
                max(eq.residual_h, eq.residual_g),
                len(spec.unstable),
                len(spec.stable),
                spec.n_zero,
                list(spec.transverse()),
            )
        )
    return out


def write_line_csv(path: str | Path, rows: Sequence[LineSample]) -> Path:
    path = Path(path)
    width = max((len(r.nonzero) for r in rows), default=0)
    header = ["q_m", "memristance", "status", "residual", "n_positive", "n_negative", "n_zero"]
    for k in range(width):
        header += [f"eig{k + 1}_re", f"eig{k + 1}_im"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else v for v in r.as_row(width)])
    return path
