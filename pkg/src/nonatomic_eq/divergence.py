"""Statistical divergences on the simplex and best-fit points in model sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike

from .simplex import Box, ConvexSet, SimplexError, Vector, VertexHull, simplex_point

SolverCap = 100_000


class DivergenceError(ValueError):
    pass


class CapabilityError(DivergenceError):
    """The divergence does not guarantee a unique best fit."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


def _kl(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s > 0, s * np.log(np.where(s > 0, s, 1.0)) - s + 1.0, 1.0)
    return out


def _kl_d(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(s)


def _chi2(s):
    s = np.asarray(s, dtype=float)
    return (s - 1.0) ** 2 / 2.0


def _chi2_d(s):
    return np.asarray(s, dtype=float) - 1.0


def _hellinger(s):
    s = np.asarray(s, dtype=float)
    return (np.sqrt(s) - 1.0) ** 2


def _hellinger_d(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 - 1.0 / np.sqrt(s)


# name -> (phi, phi', declared strict convexity in the second argument)
_GENERATORS = {
    "kl": (_kl, _kl_d, False),
    "chi-squared": (_chi2, _chi2_d, True),
    "hellinger": (_hellinger, _hellinger_d, True),
}


@dataclass(frozen=True)
class Divergence:
    """A phi-divergence ``sum z_i phi(x_i / z_i)``, optionally perturbed by
    ``kappa * |x - z|^2``.

    ``strict`` declares strict convexity in the second argument, which is what
    makes :func:`argmin_over_model_set` well defined.
    """

    name: str
    phi: Callable = None
    dphi: Callable | None = None
    strict: bool = False
    kappa: float = 0.0

    def __post_init__(self):
        if self.phi is None:
            if self.name not in _GENERATORS:
                raise DivergenceError(f"unknown generator {self.name!r}")
            phi, dphi, strict = _GENERATORS[self.name]
            object.__setattr__(self, "phi", phi)
            object.__setattr__(self, "dphi", dphi)
            object.__setattr__(self, "strict", strict or self.kappa > 0)
        else:
            _check_generator(self.phi)
        if self.kappa < 0:
            raise DivergenceError("kappa must be nonnegative")

    @property
    def base_name(self) -> str:
        return self.name

    def __call__(self, x: ArrayLike, z: ArrayLike) -> float:
        return evaluate(self, x, z)

    def gradient_z(self, x: Vector, z: Vector) -> Vector:
        """Gradient of ``z -> D(x || z)`` on the open simplex."""
        s = x / z
        phi_s = self.phi(s)
        if self.dphi is not None:
            dphi = np.where(s > 0, self.dphi(np.where(s > 0, s, 1.0)), 0.0)
        else:
            dphi = _numeric_derivative(self.phi, s)
        g = phi_s - s * dphi
        if self.kappa:
            g = g - 2.0 * self.kappa * (x - z)
        return g


def _numeric_derivative(phi, s, h=1e-6):
    s = np.asarray(s, dtype=float)
    lo = np.maximum(s - h, 0.0)
    return (phi(s + h) - phi(lo)) / (s + h - lo)


def _check_generator(phi) -> None:
    if abs(float(phi(np.array([1.0]))[0])) > 1e-12:
        raise DivergenceError("generator must satisfy phi(1) = 0")
    s = np.linspace(0.0, 8.0, 161)
    vals = np.asarray(phi(s), dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals < -1e-12):
        raise DivergenceError("generator must be finite and nonnegative on [0, 8]")
    # secant check: midpoint values lie below chords
    mid = np.asarray(phi((s[:-2] + s[2:]) / 2), dtype=float)
    if np.any(mid > (vals[:-2] + vals[2:]) / 2 + 1e-12):
        raise DivergenceError("generator fails the convexity spot check")


def kl() -> Divergence:
    return Divergence("kl")


def chi_squared() -> Divergence:
    return Divergence("chi-squared")


def hellinger() -> Divergence:
    return Divergence("hellinger")


def custom(name: str, phi: Callable, dphi: Callable | None = None, strict: bool = False) -> Divergence:
    return Divergence(name, phi=phi, dphi=dphi, strict=strict)


def perturb(D: Divergence, kappa: float) -> Divergence:
    """``D + kappa * d^2``; always strictly convex in the second argument."""
    if not kappa > 0:
        raise DivergenceError(f"perturbation must be positive, got {kappa}")
    return replace(D, strict=True, kappa=D.kappa + kappa)


def evaluate(D: Divergence, x: ArrayLike, z: ArrayLike) -> float:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise SimplexError(f"dimension mismatch: {x.shape} vs {z.shape}")
    if np.any(z <= 0):
        raise DivergenceError("second argument must lie in the open simplex")
    val = float(np.sum(z * D.phi(x / z)))
    if D.kappa:
        val += D.kappa * float(np.sum((x - z) ** 2))
    return max(val, 0.0)


@dataclass(frozen=True)
class ModelSet:
    """A compact convex set of models bounded away from the simplex boundary."""

    set: ConvexSet
    delta_floor: float

    def __post_init__(self):
        if not self.delta_floor > 0:
            raise DivergenceError("model set floor must be positive")
        if self.set.min_coordinate() < self.delta_floor - 1e-12:
            raise DivergenceError(
                f"model set reaches coordinate {self.set.min_coordinate():.3g} "
                f"below its declared floor {self.delta_floor}"
            )

    @property
    def n(self) -> int:
        return self.set.n

    def contains(self, z: ArrayLike, tol: float = 1e-9) -> bool:
        return self.set.contains(z, tol)


@dataclass
class Fit:
    point: Vector
    value: float
    iterations: int


def _zero_count(x: Vector) -> int:
    return int(np.sum(x <= 0))


def argmin_over_model_set(
    D: Divergence,
    x: ArrayLike,
    Q: ModelSet,
    *,
    start: ArrayLike | None = None,
    grad_tol: float = 1e-9,
    value_tol: float = 1e-12,
    max_iter: int = SolverCap,
) -> Fit:
    """Unique minimizer of ``z -> D(x || z)`` over ``Q``.

    Accelerated projected gradient with backtracking; for vertex hulls the
    iteration runs on barycentric weights.
    """
    x = simplex_point(x)
    if not D.strict:
        raise CapabilityError(f"divergence {D.name!r} is not declared strictly convex in its second argument")
    if D.kappa == 0 and _zero_count(x) >= 2:
        # the phi-part is affine along directions that trade mass between
        # zero coordinates of x, so the minimizer need not be unique
        raise CapabilityError("unperturbed divergence has no unique best fit when x has two or more zero entries")
    S = Q.set
    if isinstance(S, VertexHull):
        return _argmin_hull(D, x, S, grad_tol, value_tol, max_iter)

    def f(z):
        return evaluate(D, x, z)

    z = S.project(start if start is not None else x)
    return _fista(f, lambda z: D.gradient_z(x, z), S.project, z, grad_tol, value_tol, max_iter)


def _fista(f, grad, proj, z0, grad_tol, value_tol, max_iter) -> Fit:
    z = z0
    fz = f(z)
    y, fy = z, fz
    t_mom = 1.0
    L = 1.0
    small_changes = 0
    for it in range(1, max_iter + 1):
        g = grad(y)
        while True:
            z_new = proj(y - g / L)
            d = z_new - y
            f_new = f(z_new)
            if f_new <= fy + g @ d + 0.5 * L * (d @ d) + 1e-15 or L > 1e16:
                break
            L *= 2.0
        gm = L * math.sqrt(d @ d)
        change = fz - f_new
        # near the optimum rounding noise dominates the value change
        small_changes = small_changes + 1 if abs(change) < value_tol else 0
        if f_new > fz:
            # adaptive restart keeps the iteration monotone
            t_mom = 1.0
            y, fy = z, fz
            if gm < grad_tol or small_changes >= 20:
                break
            continue
        t_next = (1 + math.sqrt(1 + 4 * t_mom * t_mom)) / 2
        y = z_new + ((t_mom - 1) / t_next) * (z_new - z)
        y = proj(y)
        z, fz = z_new, f_new
        fy = f(y)
        t_mom = t_next
        L = max(L / 1.5, 1e-6)
        if gm < grad_tol or small_changes >= 20:
            break
    else:
        raise ConvergenceError("best-fit solver hit its iteration cap", best=Fit(z, fz, max_iter))
    return Fit(np.asarray(z), float(fz), it)


def _argmin_hull(D, x, H: VertexHull, grad_tol, value_tol, max_iter) -> Fit:
    from .simplex import project

    V = H.matrix

    def f(w):
        return evaluate(D, x, V.T @ w)

    def grad(w):
        return V @ D.gradient_z(x, V.T @ w)

    k = V.shape[0]
    fit = _fista(f, grad, project, np.full(k, 1.0 / k), grad_tol, value_tol, max_iter)
    return Fit(V.T @ fit.point, fit.value, fit.iterations)


def model_set_from_box(lower, upper, delta_floor: float | None = None) -> ModelSet:
    box = Box(tuple(lower), tuple(upper))
    return ModelSet(box, delta_floor if delta_floor is not None else box.min_coordinate())
