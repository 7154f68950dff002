"""Steering witnesses from covariance matrices, optimization, and thresholds.

A witness ``E`` below 1/2 certifies steering of the steered mode by the
measured party.  Witnesses are products of two minimized inference standard
deviations; for the covariances produced by this model the X and P inference
variances coincide, so the product equals the single conditional variance
(asserted, not assumed, where it matters).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closedform import collective_steering_value
from .dynamics import OutputCovariance
from .errors import InvalidParams, NoThreshold, ZeroVariance

QuadratureSelector = tuple[str, "str | float"]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _quadrature_vector(oc: OutputCovariance, selector: QuadratureSelector,
                       ) -> np.ndarray:
    """Row vector picking a (possibly rotated) quadrature of one mode."""
    label, quad = selector
    v = np.zeros(oc.sigma.shape[0])
    if quad == "X":
        v[oc.index(label, "X")] = 1.0
    elif quad == "P":
        v[oc.index(label, "P")] = 1.0
    else:
        theta = float(quad)
        v[oc.index(label, "X")] = math.cos(theta)
        v[oc.index(label, "P")] = math.sin(theta)
    return v


def inferred_variance(oc: OutputCovariance, steered: QuadratureSelector,
                      party: QuadratureSelector) -> tuple[float, float]:
    """Minimal inference variance of one quadrature given another.

    Returns ``(Var(steered) - Cov^2/Var(party), u)`` where ``u = -Cov /
    Var(party)`` is the optimal linear gain: the exact minimum over gain of
    ``Var(steered + u * party)``.
    """
    vs = _quadrature_vector(oc, steered)
    vp = _quadrature_vector(oc, party)
    var_s = float(vs @ oc.sigma @ vs)
    var_p = float(vp @ oc.sigma @ vp)
    cov = float(vs @ oc.sigma @ vp)
    if var_p < 1e-15:
        raise ZeroVariance(
            f"party quadrature {party!r} has variance {var_p!r}")
    return var_s - cov * cov / var_p, -cov / var_p


@dataclass(frozen=True)
class SteeringReport:
    """Result of a steering evaluation between two modes."""

    E_value: float
    steered_mode: str
    steering_party: str
    gain_X: float
    gain_P: float
    angle_steered: float
    angle_party: float

    @property
    def is_steering(self) -> bool:
        """Strict criterion: E exactly 1/2 does not count as steering."""
        return self.E_value < 0.5


def _product_witness(oc: OutputCovariance, steered: str, party: str,
                     theta_s: float, theta_p: float,
                     ) -> tuple[float, float, float]:
    """E and the two gains for given steered/party quadrature angles.

    The X-type steered quadrature sits at ``theta_s`` and is inferred from
    the party quadrature at ``theta_p + pi/2``; the conjugate steered
    quadrature at ``theta_s + pi/2`` is inferred from ``theta_p``.  Angles
    zero reproduce the fixed X-against-P pairing.
    """
    vx, ux = inferred_variance(oc, (steered, theta_s),
                               (party, theta_p + 0.5 * math.pi))
    vp, up = inferred_variance(oc, (steered, theta_s + 0.5 * math.pi),
                               (party, theta_p))
    vx = max(vx, 0.0)
    vp = max(vp, 0.0)
    return math.sqrt(vx) * math.sqrt(vp), ux, up


def _golden_minimize(f, lo: float, hi: float, tol: float) -> float:
    """Golden-section minimum location of a unimodal scalar function."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def steering_product(oc: OutputCovariance, steered_mode: str, party_mode: str,
                     optimize_angles: bool = False) -> SteeringReport:
    """Steering witness of ``steered_mode`` given ``party_mode``.

    With ``optimize_angles=False`` the party measures P against the steered
    X and X against the steered P, which is optimal here because the only
    nonzero mirror-field correlations are of X-P type.  With
    ``optimize_angles=True`` both quadrature frames are additionally
    minimized over, by a 64-point coarse grid per angle followed by
    golden-section refinement; for this system the optimized witness must
    reproduce the fixed-quadrature one.
    """
    if not optimize_angles:
        E, ux, up = _product_witness(oc, steered_mode, party_mode, 0.0, 0.0)
        return SteeringReport(E, steered_mode, party_mode, ux, up, 0.0, 0.0)

    grid = np.linspace(0.0, math.pi, 64, endpoint=False)
    best = (math.inf, 0.0, 0.0)
    for ts in grid:
        for tp in grid:
            E, _, _ = _product_witness(oc, steered_mode, party_mode, ts, tp)
            if E < best[0]:
                best = (E, ts, tp)
    _, ts, tp = best
    h = math.pi / 64
    for _ in range(2):  # alternate golden-section refinements per angle
        ts = _golden_minimize(
            lambda a: _product_witness(oc, steered_mode, party_mode, a, tp)[0],
            ts - h, ts + h, 1e-10)
        tp = _golden_minimize(
            lambda a: _product_witness(oc, steered_mode, party_mode, ts, a)[0],
            tp - h, tp + h, 1e-10)
    E, ux, up = _product_witness(oc, steered_mode, party_mode, ts, tp)
    return SteeringReport(E, steered_mode, party_mode, ux, up, ts, tp)


@dataclass(frozen=True)
class MonogamyReport:
    """Single-party witnesses against the same steered mode."""

    steered_mode: str
    parties: tuple[str, str]
    E_values: tuple[float, float]

    @property
    def is_consistent(self) -> bool:
        """Two parties may never steer the same mode simultaneously."""
        return not (self.E_values[0] < 0.5 and self.E_values[1] < 0.5)


def monogamy_check(oc: OutputCovariance, steered_mode: str,
                   parties: tuple[str, str]) -> MonogamyReport:
    """Evaluate both single-party witnesses; a violation signals a covariance
    bug and is reported, never raised."""
    e1 = steering_product(oc, steered_mode, parties[0]).E_value
    e2 = steering_product(oc, steered_mode, parties[1]).E_value
    return MonogamyReport(steered_mode, tuple(parties), (e1, e2))


@dataclass(frozen=True)
class ThresholdResult:
    """Root of a witness-equals-1/2 condition in one variable."""

    variable: str
    value: float
    bracket: tuple[float, float]
    sup_location: float


def _sup_over_r(x: float, n0: float, n: float, r_max: float,
                scan_points: int = 128) -> tuple[float, float]:
    """Supremum of the collective witness over r in (0, r_max].

    Coarse log-spaced scan, then golden-section refinement around the best
    grid point (the witness is smooth; the boundary r -> 0 is included via
    the leftmost grid points where E -> n0 + 1/2 from below or above).
    """
    rs = np.logspace(-3, math.log10(r_max), scan_points)
    vals = [collective_steering_value(r, x, n0, n) for r in rs]
    k = int(np.argmax(vals))
    lo = rs[k - 1] if k > 0 else rs[0] / 2.0
    hi = rs[k + 1] if k + 1 < scan_points else r_max
    r_best = _golden_minimize(
        lambda r: -collective_steering_value(r, x, n0, n), lo, hi, 1e-6)
    candidates = [(vals[k], rs[k]),
                  (collective_steering_value(r_best, x, n0, n), r_best)]
    return max(candidates)


def noise_threshold(gamma_over_G: float, n0: float, r_max: float = 10.0,
                    tol: float = 0.5, *, n_cap: float = 1e6,
                    ) -> ThresholdResult:
    """Largest bath occupation with collective steering at every pulse area.

    Bisect on n for the condition ``sup over r in (0, r_max] of E <= 1/2``.
    Raises ``NoThreshold`` when even n = 0 fails (too much damping) or when
    steering survives past the search cap (damping too weak to set a bound).
    """
    if not 0.0 < gamma_over_G < 1.0:
        raise InvalidParams(
            f"gamma_over_G must be in (0, 1), got {gamma_over_G!r}")
    if not r_max > 0.0:
        raise InvalidParams(f"r_max must be > 0, got {r_max!r}")

    def ok(n: float) -> bool:
        return _sup_over_r(gamma_over_G, n0, n, r_max)[0] <= 0.5

    if not ok(0.0):
        raise NoThreshold(
            f"no collective steering over (0, {r_max}] even at n = 0 "
            f"for gamma/G = {gamma_over_G}")
    lo, hi = 0.0, 1.0
    while ok(hi):
        lo = hi
        hi *= 2.0
        if hi > n_cap:
            raise NoThreshold(
                f"steering survives past the n = {n_cap:.3g} search cap for "
                f"gamma/G = {gamma_over_G}; in the zero-damping limit it "
                "survives any bath occupation")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    value = 0.5 * (lo + hi)
    _, sup_r = _sup_over_r(gamma_over_G, n0, value, r_max)
    return ThresholdResult("n", value, (lo, hi), sup_r)


def r_crossing(gamma_over_G: float, n0: float, n: float,
               r_max: float = 10.0, tol: float = 1e-9) -> ThresholdResult:
    """Smallest pulse area where the collective witness drops below 1/2."""
    if not n0 > 0.0:
        raise InvalidParams(
            f"crossing search needs n0 > 0 (witness starts above 1/2), "
            f"got n0 = {n0!r}")

    def f(r: float) -> float:
        return collective_steering_value(r, gamma_over_G, n0, n) - 0.5

    rs = np.linspace(0.0, r_max, 4097)
    lo, hi = None, None
    for r0, r1 in zip(rs[:-1], rs[1:]):
        if f(r0) > 0.0 >= f(r1):
            lo, hi = r0, r1
            break
    if lo is None:
        raise NoThreshold(
            f"witness never crosses 1/2 on (0, {r_max}] at "
            f"gamma/G = {gamma_over_G}, n0 = {n0}, n = {n}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return ThresholdResult("r", 0.5 * (lo + hi), (lo, hi), math.nan)


@dataclass(frozen=True)
class SteeringRegion:
    """Collective witness over a (pulse area, damping ratio) grid."""

    r_values: np.ndarray
    gamma_over_G_values: np.ndarray
    E: np.ndarray  # shape (len(gamma_over_G_values), len(r_values))
    contour: tuple[tuple[float, float], ...]  # (r, gamma/G) where E = 1/2


def steering_region(r_grid, gamma_over_G_grid, n0: float, n: float,
                    ) -> SteeringRegion:
    """Evaluate the collective witness on a grid and trace its 1/2 contour.

    The contour is found per damping-ratio row by bisection between grid
    points with opposite sign of E - 1/2.
    """
    rs = np.asarray(r_grid, dtype=float)
    xs = np.asarray(gamma_over_G_grid, dtype=float)
    if rs.size == 0 or xs.size == 0:
        raise InvalidParams("grids must be nonempty")
    if (rs < 0).any() or (xs < 0).any():
        raise InvalidParams("grids must be nonnegative")
    E = np.empty((xs.size, rs.size))
    for i, x in enumerate(xs):
        for j, r in enumerate(rs):
            E[i, j] = collective_steering_value(r, x, n0, n)

    contour: list[tuple[float, float]] = []
    for i, x in enumerate(xs):
        row = E[i] - 0.5
        for j in range(rs.size - 1):
            if row[j] == 0.0:
                contour.append((float(rs[j]), float(x)))
            elif row[j] * row[j + 1] < 0.0:
                lo, hi = rs[j], rs[j + 1]
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if (collective_steering_value(mid, x, n0, n) - 0.5) \
                            * row[j] > 0.0:
                        lo = mid
                    else:
                        hi = mid
                contour.append((0.5 * (lo + hi), float(x)))
    return SteeringRegion(rs, xs, E, tuple(contour))
