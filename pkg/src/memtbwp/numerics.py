"""Shared numerical kernels.

Everything here works on dense numpy arrays. Tolerances are collected in
:class:`Tolerances` so that every verdict can record the thresholds it was
decided against.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

EPS = np.finfo(float).eps

#: half-width (multiplicative) of the ambiguity band around a tolerance;
#: the band [tol / BAND, tol * BAND] spans one decade
BAND = math.sqrt(10.0)


class NumericsError(RuntimeError):
    pass


class NewtonError(NumericsError):
    pass


class IndexStructureError(NumericsError):
    """The zero eigenvalue has no 2x2 Jordan block."""


@dataclass(frozen=True)
class Tolerances:
    zero_tol: float = 1e-7  # eigenvalue zero cluster, relative to ||A||
    realpart_tol: float = 1e-7  # critical strip |Re| <= tol, relative to ||A||
    trans_tol: float = 1e-6  # transversality scalars and nonvanishing tests
    lsq_tol: float = 1e-8  # generalized eigenvector residual, relative to ||p||
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    newton_max_cond: float = 1e14
    line_tol: float = 1e-9  # residual along a sampled equilibrium line
    line_radius: float = 0.1
    line_samples: int = 11

    def replace(self, **overrides) -> "Tolerances":
        names = {f.name: f.type for f in dataclasses.fields(self)}
        clean = {}
        for key, value in overrides.items():
            if key not in names:
                raise KeyError(f"unknown tolerance {key!r}")
            current = getattr(self, key)
            clean[key] = type(current)(value)
        return dataclasses.replace(self, **clean)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_file(cls, path: str | Path, base: "Tolerances | None" = None) -> "Tolerances":
        """Read ``key=value`` lines (``#`` comments allowed)."""
        overrides = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"bad config line {raw!r}")
            overrides[key.strip()] = value.strip()
        return (base or cls()).replace(**overrides)


DEFAULT_TOLERANCES = Tolerances()


def compare(value: float, tol: float) -> int:
    """-1 if clearly below ``tol``, +1 if clearly above, 0 inside the band."""
    value = abs(value)
    if value <= tol / BAND:
        return -1
    if value >= tol * BAND:
        return 1
    return 0


# ---------------------------------------------------------------------------
# rank and kernels


@dataclass
class RankInfo:
    rank: int
    corank: int
    singular_values: np.ndarray
    null_basis: np.ndarray  # columns
    tol_used: float
    left_basis: np.ndarray  # leading left singular vectors U_r
    left_null: np.ndarray  # remaining left singular vectors
    right_basis: np.ndarray  # leading right singular vectors V_r

    def in_image(self, w: np.ndarray, tol: float | None = None) -> bool:
        return self.image_residual(w) <= (self.tol_used if tol is None else tol) * max(
            np.linalg.norm(w), np.finfo(float).tiny
        )

    def image_residual(self, w: np.ndarray) -> float:
        """Norm of the component of ``w`` orthogonal to the column space."""
        w = np.asarray(w, dtype=float)
        return float(np.linalg.norm(w - self.left_basis @ (self.left_basis.T @ w)))


def rank_info(A, tol: float | None = None) -> RankInfo:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    rows, cols = A.shape
    if A.size == 0:
        return RankInfo(
            0, cols, np.zeros(0), np.eye(cols), 0.0, np.zeros((rows, 0)), np.eye(rows),
            np.zeros((cols, 0)),
        )
    U, s, Vh = np.linalg.svd(A)
    if tol is None:
        tol = max(rows, cols) * EPS * (s[0] if s.size else 0.0)
    r = int(np.sum(s > tol))
    return RankInfo(
        rank=r,
        corank=cols - r,
        singular_values=s,
        null_basis=Vh[r:].T.copy(),
        tol_used=float(tol),
        left_basis=U[:, :r].copy(),
        left_null=U[:, r:].copy(),
        right_basis=Vh[:r].T.copy(),
    )


# ---------------------------------------------------------------------------
# spectra


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    zero_cluster: list[int]
    stable: list[int]
    unstable: list[int]
    critical: list[int]  # nonzero but inside the critical strip
    ambiguous: list[int]  # inside a tolerance band
    zero_tol: float
    realpart_tol: float

    @property
    def n_zero(self) -> int:
        return len(self.zero_cluster)

    def transverse(self) -> np.ndarray:
        """Eigenvalues with the single smallest-modulus one removed."""
        if self.eigenvalues.size == 0:
            return self.eigenvalues
        k = int(np.argmin(np.abs(self.eigenvalues)))
        return np.delete(self.eigenvalues, k)

    def as_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "zero_cluster": self.zero_cluster,
            "stable": self.stable,
            "unstable": self.unstable,
            "critical": self.critical,
            "ambiguous": self.ambiguous,
            "zero_tol": self.zero_tol,
            "realpart_tol": self.realpart_tol,
        }


def _sorted_eigs(ev: np.ndarray) -> np.ndarray:
    # deterministic order: descending real part, then imaginary part
    order = np.lexsort((ev.imag, -ev.real))
    return ev[order]


def spectrum(A, tols: Tolerances = DEFAULT_TOLERANCES) -> Spectrum:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    ev = _sorted_eigs(np.linalg.eigvals(A)) if A.size else np.zeros(0, complex)
    scale = np.linalg.norm(A, 2) if A.size else 0.0
    scale = scale if scale > 0 else 1.0
    ztol = tols.zero_tol * scale
    rtol = tols.realpart_tol * scale
    zero, stable, unstable, critical, ambiguous = [], [], [], [], []
    for i, lam in enumerate(ev):
        cz = compare(abs(lam), ztol)
        if cz < 0:
            zero.append(i)
            continue
        if cz == 0:
            ambiguous.append(i)
            continue
        cr = compare(lam.real, rtol)
        if cr > 0:
            (unstable if lam.real > 0 else stable).append(i)
        elif cr < 0:
            critical.append(i)
        else:
            ambiguous.append(i)
    return Spectrum(ev, zero, stable, unstable, critical, ambiguous, ztol, rtol)


# ---------------------------------------------------------------------------
# derivatives


def _step(x, power: float) -> float:
    return EPS**power * (1.0 + float(np.linalg.norm(x)))


def second_directional_derivative(F: Callable, x, p, q, h: float | None = None) -> np.ndarray:
    """Central-difference approximation of the bilinear form F''(x)pq."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if h is None:
        h = _step(x, 0.25)
    a = np.asarray(F(x + h * p + h * q), dtype=float)
    b = np.asarray(F(x + h * p - h * q), dtype=float)
    c = np.asarray(F(x - h * p + h * q), dtype=float)
    d = np.asarray(F(x - h * p - h * q), dtype=float)
    return (a - b - c + d) / (4.0 * h * h)


def jacobian_fd(F: Callable, x, h: float | None = None) -> np.ndarray:
    """Central-difference Jacobian; fallback when no analytic one is given."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = _step(x, 1.0 / 3.0)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((np.asarray(F(x + e), float) - np.asarray(F(x - e), float)) / (2 * h))
    return np.column_stack(cols)


@dataclass
class DetDerivative:
    value: float  # (det J)'(x) q
    scale: float  # product of the n-1 largest singular values of J(x)
    normalized: float  # value / scale

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def det_jacobian_derivative(J: Callable, x, q, h: float | None = None) -> DetDerivative:
    """Derivative of ``det J`` at ``x`` along ``q`` by central differences.

    The raw derivative of a determinant scales like the product of the
    nonzero singular values, so the verdict uses the normalized value.
    """
    x = np.asarray(x, dtype=float)
    q = np.asarray(q, dtype=float)
    if h is None:
        h = _step(x, 1.0 / 3.0)
    with np.errstate(divide="ignore"):  # exactly singular samples give det = 0
        value = (np.linalg.det(J(x + h * q)) - np.linalg.det(J(x - h * q))) / (2 * h)
    s = np.linalg.svd(np.atleast_2d(J(x)), compute_uv=False)
    scale = float(np.prod(s[:-1])) if s.size > 1 else 1.0
    return DetDerivative(float(value), scale, float(value / scale) if scale > 0 else math.inf)


@dataclass
class GeneralizedEigvec:
    q: np.ndarray  # normalized
    raw: np.ndarray  # minimum-norm solution of A q = p
    residual: float  # ||A raw - p|| / ||p||


def generalized_eigvec(A, p, tols: Tolerances = DEFAULT_TOLERANCES, info: RankInfo | None = None):
    """Minimum-norm solution of ``A q = p`` for a corank-one ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    p = np.asarray(p, dtype=float)
    info = info or rank_info(A)
    if info.corank != 1:
        raise IndexStructureError(f"corank {info.corank} != 1")
    s = info.singular_values[: info.rank]
    raw = info.right_basis @ ((info.left_basis.T @ p) / s)
    pn = np.linalg.norm(p)
    residual = float(np.linalg.norm(A @ raw - p) / pn)
    if residual > tols.lsq_tol:
        raise IndexStructureError(
            f"no index-2 structure: A q = p residual {residual:.3e} > {tols.lsq_tol:.1e}"
        )
    return GeneralizedEigvec(raw / np.linalg.norm(raw), raw, residual)


# ---------------------------------------------------------------------------
# Newton and integration


@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iterations: int


def newton_solve(
    residual: Callable,
    jacobian: Callable,
    guess,
    tol: float = 1e-12,
    max_iter: int = 50,
    max_cond: float = 1e14,
) -> NewtonResult:
    """Newton iteration; overdetermined consistent systems use Gauss-Newton steps."""
    x = np.array(guess, dtype=float, copy=True)
    for it in range(max_iter + 1):
        r = np.atleast_1d(np.asarray(residual(x), dtype=float))
        rn = float(np.max(np.abs(r))) if r.size else 0.0
        if not np.isfinite(rn):
            raise NewtonError("non-finite residual")
        if rn <= tol:
            return NewtonResult(x, rn, it)
        if it == max_iter:
            break
        J = np.atleast_2d(np.asarray(jacobian(x), dtype=float))
        if J.shape[0] == J.shape[1]:
            try:
                dx = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                raise NewtonError("singular Jacobian") from None
            if np.linalg.cond(J) > max_cond:
                raise NewtonError(f"singular Jacobian (condition {np.linalg.cond(J):.2e})")
        else:
            dx, _, rank, sv = np.linalg.lstsq(J, -r, rcond=None)
            if rank < J.shape[1] or sv[0] > max_cond * sv[-1]:
                raise NewtonError("rank-deficient Jacobian")
        x = x + dx
    raise NewtonError(f"no convergence in {max_iter} iterations (residual {rn:.3e})")


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # shape (len(t), dim)
    blowup_time: float | None = None
    stopped_early: bool = False


def integrate_rk4(
    field: Callable,
    x0,
    t_end: float,
    step: float,
    stop: Callable | None = None,
) -> Trajectory:
    """Classical fixed-step RK4.

    ``stop(t, x)`` may end the run early; the last step is shortened so the
    final time is exactly ``t_end`` otherwise.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(x0, dtype=float, copy=True)
    ts = [0.0]
    xs = [x.copy()]
    t = 0.0
    n = int(math.ceil(t_end / step - 1e-12))
    for k in range(n):
        hstep = min(step, t_end - t)
        try:
            with np.errstate(over="raise", invalid="raise"):
                k1 = field(x)
                k2 = field(x + 0.5 * hstep * k1)
                k3 = field(x + 0.5 * hstep * k2)
                k4 = field(x + hstep * k3)
                x = x + (hstep / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        except FloatingPointError:
            return Trajectory(np.array(ts), np.array(xs), blowup_time=t)
        t = (k + 1) * step if k + 1 < n else t_end
        if not np.all(np.isfinite(x)):
            return Trajectory(np.array(ts), np.array(xs), blowup_time=t)
        ts.append(t)
        xs.append(x.copy())
        if stop is not None and stop(t, x):
            return Trajectory(np.array(ts), np.array(xs), stopped_early=True)
    return Trajectory(np.array(ts), np.array(xs))
