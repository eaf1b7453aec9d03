"""Completion fields in the Heisenberg approximation, their modes, and curve functionals.

Points are ``(x, y, theta)`` with ``theta`` playing the role of the slope
``dy/dx``. The group law is ``(x, y, t)(x', y', t') = (x + x', y + y' + t x', t + t')``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DegenerateSpan, TooShort


@dataclass(frozen=True)
class CompletionSetup:
    g1: tuple
    g2: tuple
    lambda_res: float = 1.0
    d11: float = 0.125
    beta: float = 1.0

    def __post_init__(self):
        if not (self.lambda_res > 0 and self.d11 > 0 and self.beta > 0):
            raise ValueError("lambda_res, d11 and beta must be positive")
        if not self.g2[0] > self.g1[0]:
            raise DegenerateSpan("x2 must exceed x1")


@dataclass(frozen=True)
class LiftedCurve:
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    parameterization: str  # "graph-x" or "arclength"


def _quadratic_coeffs(x, d11):
    """Matrix ``P`` of the Green's-function exponent ``(Y, T) P (Y, T)^T``."""
    x3 = d11 * x**3
    return 3.0 / x3, -1.5 * x / x3, x**2 / x3


def heisenberg_green(x, y, theta, lambda_res: float, d11: float):
    """Resolvent Green's function of the Heisenberg direction process.

    ``R = lambda sqrt(3) / (2 D pi x^2) exp(-lambda x) exp(-(3 (x t - 2 y)^2 + x^2 t^2) / (4 x^3 D))``
    for ``x > 0`` and zero otherwise.
    """
    x, y, theta = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(theta, float))
    out = np.zeros(x.shape)
    pos = x > 0
    xp, yp, tp = x[pos], y[pos], theta[pos]
    pref = lambda_res * np.sqrt(3.0) / (2 * d11 * np.pi * xp**2) * np.exp(-lambda_res * xp)
    expo = (3 * (xp * tp - 2 * yp) ** 2 + xp**2 * tp**2) / (4 * xp**3 * d11)
    out[pos] = pref * np.exp(-expo)
    return out[()] if out.ndim == 0 else out


def _relative_to_source(setup, x, y, theta):
    x1, y1, t1 = setup.g1
    return x - x1, y - y1 - t1 * (x - x1), theta - t1


def _relative_to_sink(setup, x, y, theta):
    """Group element ``g^-1 g2``: the displacement still to travel to the sink."""
    x2, y2, t2 = setup.g2
    return x2 - x, y2 - y - theta * (x2 - x), t2 - theta


def completion_field(setup: CompletionSetup, x, y, theta):
    """``C(g) = R(g1^-1 g) R(g^-1 g2)``: forward times adjoint Green's function."""
    fwd = heisenberg_green(*_relative_to_source(setup, x, y, theta), setup.lambda_res, setup.d11)
    bwd = heisenberg_green(*_relative_to_sink(setup, x, y, theta), setup.lambda_res, setup.d11)
    return fwd * bwd


def completion_field_grid(setup: CompletionSetup, xs, ys, thetas) -> np.ndarray:
    """Field sampled on a tensor grid, indexed ``[x, y, theta]``."""
    X, Y, T = np.meshgrid(xs, ys, thetas, indexing="ij")
    return completion_field(setup, X, Y, T)


def completion_field_h3(setup: CompletionSetup, xs, ys, thetas) -> np.ndarray:
    """Completion field on a tensor grid ``[x, y, theta]`` spanning ``(x1, x2)``."""
    return completion_field_grid(setup, xs, ys, thetas)


def completion_field_reflected_sink(setup: CompletionSetup, x, y, theta):
    """Field with the sink factor written as ``R(X - x, y - Y - T (x - X), -theta)``.

    Coordinates are taken relative to the source frame and ``(X, Y, T)`` is
    the sink in that frame. This agrees with :func:`completion_field` only
    when ``T = 0``; otherwise the sink factor no longer peaks at the sink
    orientation.
    """
    xr, yr, tr = _relative_to_source(setup, x, y, theta)
    X, Y, T = _relative_to_source(setup, *setup.g2)
    fwd = heisenberg_green(xr, yr, tr, setup.lambda_res, setup.d11)
    bwd = heisenberg_green(X - xr, yr - Y - T * (xr - X), -tr, setup.lambda_res, setup.d11)
    return fwd * bwd


def _slice_mode(setup: CompletionSetup, x: float):
    """Stationary point of ``log C`` at abscissa ``x`` from the 2x2 normal equations.

    Both exponents are quadratic in ``v = (y, theta)``: with arguments
    ``(Y, T) = J v + k`` the gradient vanishes where
    ``(sum J^T P J) v = -sum J^T P k``.
    """
    x1, y1, t1 = setup.g1
    x2, y2, t2 = setup.g2
    s1, s2 = x - x1, x2 - x
    a, b, c = _quadratic_coeffs(s1, setup.d11)
    P1 = np.array([[a, b], [b, c]])
    J1 = np.eye(2)
    k1 = np.array([-y1 - t1 * s1, -t1])
    a, b, c = _quadratic_coeffs(s2, setup.d11)
    P2 = np.array([[a, b], [b, c]])
    J2 = np.array([[-1.0, -s2], [0.0, -1.0]])
    k2 = np.array([y2, t2])
    lhs = J1.T @ P1 @ J1 + J2.T @ P2 @ J2
    rhs = -(J1.T @ P1 @ k1 + J2.T @ P2 @ k2)
    return np.linalg.solve(lhs, rhs)


def _grid_mode(setup: CompletionSetup, x: float, y_range, theta_range, n: int = 1001):
    ys = np.linspace(*y_range, n)
    ts = np.linspace(*theta_range, n)
    Y, T = np.meshgrid(ys, ts, indexing="ij")
    field = completion_field(setup, np.full(Y.shape, x), Y, T)
    i, j = np.unravel_index(np.argmax(field), field.shape)
    return np.array([ys[i], ts[j]])


def extract_mode(setup: CompletionSetup, xs=None, n: int = 201, y_range=None, theta_range=None) -> LiftedCurve:
    """Per-slice maximizer of the completion field, as a graph-x lifted curve.

    Interior slices use the exact quadratic solve; if that system is singular
    the slice falls back to a grid argmax (resolution 1e-3 of the ranges).
    The endpoints take the boundary conditions.
    """
    x1, y1, t1 = setup.g1
    x2, y2, t2 = setup.g2
    xs = np.linspace(x1, x2, n) if xs is None else np.asarray(xs, dtype=float)
    ys = np.empty_like(xs)
    ts = np.empty_like(xs)
    span = max(abs(y1), abs(y2), abs(t1) * (x2 - x1), abs(t2) * (x2 - x1), 1.0)
    y_range = y_range or (min(y1, y2) - span, max(y1, y2) + span)
    theta_range = theta_range or (min(t1, t2) - 2 * span / (x2 - x1), max(t1, t2) + 2 * span / (x2 - x1))
    for i, x in enumerate(xs):
        if x <= x1:
            ys[i], ts[i] = y1, t1
        elif x >= x2:
            ys[i], ts[i] = y2, t2
        else:
            try:
                ys[i], ts[i] = _slice_mode(setup, x)
            except np.linalg.LinAlgError:
                ys[i], ts[i] = _grid_mode(setup, x, y_range, theta_range)
    return LiftedCurve(xs, ys, ts, "graph-x")


def cubic_coefficients(g1, g2) -> np.ndarray:
    """Coefficients ``(a, b, c, d)`` of ``y = a x^3 + b x^2 + c x + d`` matching value and slope at both ends."""
    x1, y1, t1 = g1
    x2, y2, t2 = g2
    if x2 == x1:
        raise DegenerateSpan("x1 and x2 coincide")
    A = np.array([
        [x1**3, x1**2, x1, 1.0],
        [3 * x1**2, 2 * x1, 1.0, 0.0],
        [x2**3, x2**2, x2, 1.0],
        [3 * x2**2, 2 * x2, 1.0, 0.0],
    ])
    return np.linalg.solve(A, np.array([y1, t1, y2, t2], dtype=float))


def cubic_hermite(g1, g2, xs=None, n: int = 201) -> LiftedCurve:
    """The cubic through both boundary points with the prescribed slopes, lifted by ``theta = y'``."""
    a, b, c, d = cubic_coefficients(g1, g2)
    xs = np.linspace(g1[0], g2[0], n) if xs is None else np.asarray(xs, dtype=float)
    y = ((a * xs + b) * xs + c) * xs + d
    t = (3 * a * xs + 2 * b) * xs + c
    return LiftedCurve(xs, y, t, "graph-x")


def arc_curve(radius: float, length: float, n: int = 2001) -> LiftedCurve:
    """Circular arc starting at the origin heading along +x (counter-clockwise)."""
    s = np.linspace(0, length, n)
    phi = s / radius
    return LiftedCurve(radius * np.sin(phi), radius * (1 - np.cos(phi)), phi, "arclength")


def _circumcircle_curvature(x, y) -> np.ndarray:
    """Curvature at interior samples from the circle through consecutive triples."""
    ax, ay = x[:-2], y[:-2]
    bx, by = x[1:-1], y[1:-1]
    cx, cy = x[2:], y[2:]
    ab = np.hypot(bx - ax, by - ay)
    bc = np.hypot(cx - bx, cy - by)
    ca = np.hypot(ax - cx, ay - cy)
    cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    denom = ab * bc * ca
    return np.where(denom > 0, 2 * cross / np.where(denom > 0, denom, 1.0), 0.0)


def _curvature_and_arclength(curve: LiftedCurve):
    x, y = np.asarray(curve.x, float), np.asarray(curve.y, float)
    if x.size < 3:
        raise TooShort("need at least three samples")
    ds = np.hypot(np.diff(x), np.diff(y))
    s = np.concatenate([[0.0], np.cumsum(ds)])
    kappa = np.empty_like(x)
    kappa[1:-1] = _circumcircle_curvature(x, y)
    # extend linearly to the ends
    kappa[0] = 2 * kappa[1] - kappa[2] if x.size > 3 else kappa[1]
    kappa[-1] = 2 * kappa[-2] - kappa[-3] if x.size > 3 else kappa[-2]
    return kappa, s


def sr_length(curve: LiftedCurve, beta: float) -> float:
    """Sub-Riemannian length ``int sqrt(kappa^2 + beta^2) ds`` (trapezoid rule)."""
    kappa, s = _curvature_and_arclength(curve)
    return float(integrate.trapezoid(np.sqrt(kappa**2 + beta**2), s))


def elastica_energy(curve: LiftedCurve, beta: float) -> float:
    """Bending energy ``int kappa^2 + beta^2 ds``; graph-x curves use ``int theta'(x)^2 + beta^2 dx``."""
    if curve.parameterization == "graph-x":
        x = np.asarray(curve.x, float)
        if x.size < 3:
            raise TooShort("need at least three samples")
        dtheta = np.gradient(np.asarray(curve.theta, float), x, edge_order=2)
        return float(integrate.trapezoid(dtheta**2 + beta**2, x))
    kappa, s = _curvature_and_arclength(curve)
    return float(integrate.trapezoid(kappa**2 + beta**2, s))


def heisenberg_energy_closed_form(x2: float, y2: float, theta2: float, beta: float) -> float:
    """Minimum of ``int theta'^2 + beta^2 dx`` from the origin (zero slope) to ``(x2, y2, theta2)``.

    Direct integration of the Hermite cubic gives
    ``beta^2 x2 + 4 (3 y2^2 - 3 x2 y2 theta2 + x2^2 theta2^2) / x2^3``.
    """
    return beta**2 * x2 + 4 * (3 * y2**2 - 3 * x2 * y2 * theta2 + x2**2 * theta2**2) / x2**3


def heisenberg_energy_plus_cross_term(x2: float, y2: float, theta2: float, beta: float) -> float:
    """Variant of :func:`heisenberg_energy_closed_form` with ``+3 x2 y2 theta2``.

    Agrees with the true minimum only when ``y2 theta2 = 0``; kept to
    quantify the difference.
    """
    return beta**2 * x2 + 4 * (3 * y2**2 + 3 * x2 * y2 * theta2 + x2**2 * theta2**2) / x2**3


def connection_cost(p1, p2, beta: float, n: int = 65) -> float:
    """Sub-Riemannian length of the Hermite cubic joining two oriented points.

    The points ``(x, y, theta)`` are expressed in the frame of the chord, so
    the cubic is a graph over the chord direction. Orientations nearly
    perpendicular to the chord make the connection infinitely expensive.
    """
    x1, y1, t1 = p1
    x2, y2, t2 = p2
    dx, dy = x2 - x1, y2 - y1
    dist = np.hypot(dx, dy)
    if dist == 0:
        return 0.0
    chord = np.arctan2(dy, dx)
    a1 = np.mod(t1 - chord + np.pi, 2 * np.pi) - np.pi
    a2 = np.mod(t2 - chord + np.pi, 2 * np.pi) - np.pi
    if abs(a1) >= np.deg2rad(80) or abs(a2) >= np.deg2rad(80):
        return np.inf
    local = cubic_hermite((0.0, 0.0, np.tan(a1)), (dist, 0.0, np.tan(a2)), n=n)
    return sr_length(local, beta)
