"""Phase-plane construction of flat-hump stationary states.

A stationary pair (u, v) on (0, l) with the linear reaction
g = gamma*r - beta*s satisfies

    D1(u) D2(v) u' = h1(u) h2(v) v',        -v'' + beta v = gamma u,

with zero Neumann data.  On the set where u < 1 the first equation makes
cell_potential(u) - chem_potential(v) constant, say equal to ``lam``, so u
is slaved to v through the profile map

    profile_density(s) = cell_potential_inv(chem_potential(s) + lam),

which reaches the ceiling u = 1 at the saturation level
v_sat = chem_potential_inv(cell_potential(1) - lam).  Substituting the
clamped profile map into the v-equation leaves a scalar second-order ODE
v'' = stationary_rhs(v), a conservative system with energy
w^2/2 + potential(v).  When the clamped profile map crosses the line
(beta/gamma) s in the pattern encoded by :func:`find_crossings` (two
crossings rho_saddle < rho_center below v_sat), the potential has a well at
rho_center whose closed orbits, run for one period, give even profiles with
a saturated plateau: the flat humps.

The module also houses the two sufficient constructions that produce
admissible ``lam`` values (a tangency-shift window and a slope-matching
interval), the mass-based density bounds available when cell_potential
diverges at 1, and the drift cross-check against the time-dependent solver.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import coefficients as co
from .coefficients import CoefficientSet, GammaBeta
from .errors import (
    ConstructionError,
    CrossingConditionError,
    InputError,
    RangeError,
    StructuralError,
)

ROOT_TOL = 1e-12
SCAN_POINTS = 2048


# ---------------------------------------------------------------------------
# admissible parameters


@dataclass(frozen=True)
class PhaseParams:
    """A (coefficients, reaction, offset) triplet passing the crossing pattern.

    rho_saddle < rho_center are the two crossing levels of the clamped
    profile map with the line (beta/gamma) s; in the phase plane they are a
    saddle and a center of the conservative v-system.  v_sat is the chemical
    level at which the density saturates.
    """

    coeffs: CoefficientSet
    gb: GammaBeta
    lam: float
    v_sat: float
    rho_saddle: float
    rho_center: float

    @property
    def q(self) -> float:
        return self.gb.ratio


def profile_density(p: PhaseParams, s: float) -> float:
    """u as a function of the chemical level on the unsaturated branch."""
    if s > p.v_sat * (1.0 + 1e-13) + 1e-300:
        raise RangeError(f"s={s} above the saturation level v_sat={p.v_sat}")
    return _density_unclamped(p.coeffs, p.lam, min(s, p.v_sat))


def _density_unclamped(c: CoefficientSet, lam: float, s: float) -> float:
    y = co.chem_potential(c, s) + lam
    top = co.cell_potential_at_one(c)
    if y >= top:
        return 1.0
    return co.cell_potential_inv(c, y)


def profile_density_clamped(p: PhaseParams, s: float) -> float:
    """The profile map extended by the ceiling value 1 above v_sat."""
    if s >= p.v_sat:
        return 1.0
    return _density_unclamped(p.coeffs, p.lam, s)


def _clamped_density_fn(c: CoefficientSet, lam: float, v_sat: float) -> Callable[[float], float]:
    sep = c.separable
    if sep is not None and sep.cell_potential_inv is not None and sep.chem_potential is not None:
        inv, pot = sep.cell_potential_inv, sep.chem_potential

        def fast(s: float) -> float:
            if s >= v_sat:
                return 1.0
            return float(inv(float(pot(s)) + lam))

        return fast

    def slow(s: float) -> float:
        if s >= v_sat:
            return 1.0
        return _density_unclamped(c, lam, s)

    return slow


def find_crossings(c: CoefficientSet, lam: float, gb: Optional[GammaBeta] = None) -> PhaseParams:
    """Locate the crossing pattern that enables the flat-hump construction.

    Scans phi(s) = clamped_profile(s) - (beta/gamma) s on (0, gamma/beta)
    densely, refines each sign change by bisection, and verifies all four
    clauses: exactly the ordering rho_saddle < rho_center < v_sat <
    gamma/beta, fixed points at the two crossings, phi < 0 between them and
    phi > 0 between rho_center and gamma/beta.  Raises
    CrossingConditionError naming the violated clause.
    """
    gb = gb or c.linear_reaction
    if gb is None:
        raise InputError("no reaction rates: pass gb or use with_reaction()")
    co.check_separable_structure(c)
    q = gb.ratio
    top = co.cell_potential_at_one(c)
    if not lam < top:
        raise CrossingConditionError(
            "saturation-level", f"lam={lam} >= cell_potential(1)={top}: no saturation level")
    v_sat = co.chem_potential_inv(c, top - lam)
    if not v_sat < q:
        raise CrossingConditionError(
            "ordering", f"v_sat={v_sat:.6g} must lie below gamma/beta={q:.6g}")

    density = _clamped_density_fn(c, lam, v_sat)
    phi = lambda s: density(s) - s / q

    # dense linear scan plus geometric points toward 0: the lower crossing
    # can sit many orders of magnitude below gamma/beta.  phi(0) > 0 always
    # (the profile map is positive at s = 0), so including 0 brackets it.
    s_grid = np.unique(np.concatenate([
        [0.0],
        q * np.logspace(-12.0, 0.0, 257)[:-1],
        np.linspace(q / SCAN_POINTS, q * (1.0 - 1e-9), SCAN_POINTS),
    ]))
    s_grid = s_grid[s_grid <= q * (1.0 - 1e-9)]
    vals = np.array([phi(s) for s in s_grid])
    sign_changes = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    roots = [brentq(phi, s_grid[i], s_grid[i + 1], xtol=ROOT_TOL) for i in sign_changes]
    exact_zeros = s_grid[vals == 0.0]
    roots = sorted(set(roots) | set(float(z) for z in exact_zeros))

    if len(roots) != 2:
        raise CrossingConditionError(
            "two-crossings",
            f"expected exactly 2 crossings of the profile map with (beta/gamma)s "
            f"on (0, gamma/beta); found {len(roots)} at {roots}")
    rho_saddle, rho_center = roots
    if not rho_center < v_sat:
        raise CrossingConditionError(
            "ordering", f"rho_center={rho_center:.6g} must lie below v_sat={v_sat:.6g}")

    between = np.linspace(rho_saddle, rho_center, 64)[1:-1]
    if any(phi(s) >= 0.0 for s in between):
        raise CrossingConditionError(
            "sign-below", "profile map must lie below (beta/gamma)s between the crossings")
    above = np.linspace(rho_center, q, 64)[1:-1]
    if any(phi(s) <= 0.0 for s in above):
        raise CrossingConditionError(
            "sign-above", "profile map must lie above (beta/gamma)s beyond rho_center")

    return PhaseParams(c, gb, lam, v_sat, float(rho_saddle), float(rho_center))


# ---------------------------------------------------------------------------
# conservative structure: rhs, potential, energy


def stationary_rhs(p: PhaseParams, v: float) -> float:
    """Right-hand side of the reduced stationary equation v'' = rhs(v)."""
    return p.gb.beta * v - p.gb.gamma * profile_density_clamped(p, v)


def _rhs_fn(p: PhaseParams) -> Callable[[float], float]:
    density = _clamped_density_fn(p.coeffs, p.lam, p.v_sat)
    beta, gamma = p.gb.beta, p.gb.gamma

    def rhs(v: float) -> float:
        return beta * v - gamma * density(v)

    return rhs


def potential(p: PhaseParams, v: float) -> float:
    """Potential of the conservative system, anchored at the center.

    potential(v) = -integral of (-rhs) ... i.e. G(v) with G' (v) = -rhs(v)
    read against the phase-plane convention v'' = rhs(v) = -G'(v), so
    G(rho_center) = 0, G has a local maximum at rho_saddle and grows toward
    gamma/beta.  Quadrature splits at the derivative kink v_sat.
    """
    rhs = _rhs_fn(p)
    pts = [x for x in (p.rho_saddle, p.v_sat) if min(p.rho_center, v) < x < max(p.rho_center, v)]
    val, _ = quad(rhs, p.rho_center, v, points=pts or None,
                  epsabs=1e-11, epsrel=1e-11, limit=200)
    return -val


def energy(p: PhaseParams, v: float, w: float) -> float:
    return 0.5 * w * w + potential(p, v)


@dataclass(frozen=True)
class EnergyWindow:
    """Admissible energies for closed orbits that reach the plateau."""

    at_saddle: float      # potential(rho_saddle)
    at_ceiling: float     # potential(gamma/beta)
    at_sat: float         # potential(v_sat)

    @property
    def closed_orbit_sup(self) -> float:
        return min(self.at_saddle, self.at_ceiling)

    @property
    def admissible(self) -> tuple[float, float]:
        """Energies producing closed orbits whose max exceeds v_sat."""
        return (self.at_sat, self.closed_orbit_sup)


def energy_window(p: PhaseParams) -> EnergyWindow:
    return EnergyWindow(potential(p, p.rho_saddle), potential(p, p.q),
                        potential(p, p.v_sat))


def hump_energy_margin(p: PhaseParams) -> tuple[bool, float]:
    """Mean inequality that opens the plateau-reaching energy window.

    Returns (holds, margin).  ``holds`` is the strict inequality

        mean of profile_density over [rho_saddle, v_sat]
            < (beta/gamma) (v_sat - rho_saddle) / 2,

    and ``margin`` is the equivalent potential gap
    potential(rho_saddle) - potential(v_sat) =
    integral over [rho_saddle, v_sat] of (beta s - gamma density(s)) ds,
    positive exactly when orbits through energies just under the saddle
    level cross the saturation level.
    """
    density = _clamped_density_fn(p.coeffs, p.lam, p.v_sat)
    integral, _ = quad(density, p.rho_saddle, p.v_sat, epsabs=1e-10, epsrel=1e-10,
                       limit=200)
    width = p.v_sat - p.rho_saddle
    holds = integral / width < (p.gb.beta / p.gb.gamma) * width / 2.0
    margin = 0.5 * p.gb.beta * (p.v_sat ** 2 - p.rho_saddle ** 2) - p.gb.gamma * integral
    return bool(holds), float(margin)


# ---------------------------------------------------------------------------
# orbit integration (symmetric/symplectic, 4th order composition of Verlet)

_YOSHIDA_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_YOSHIDA_W0 = 1.0 - 2.0 * _YOSHIDA_W1
_YOSHIDA = (_YOSHIDA_W1, _YOSHIDA_W0, _YOSHIDA_W1)


@dataclass
class PhaseOrbit:
    """One closed orbit of the reduced system, sampled over a full period."""

    v0: float
    energy: float
    period: float
    x: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def spline(self) -> CubicHermiteSpline:
        """Hermite interpolant of v(x) (with exact derivatives w)."""
        return CubicHermiteSpline(self.x, self.v, self.w)


def _verlet_step(rhs: Callable[[float], float], v: float, w: float, a: float,
                 h: float) -> tuple[float, float, float]:
    """One kick-drift-kick step; returns (v, w, rhs(v)) reusing the force."""
    w_half = w + 0.5 * h * a
    v_new = v + h * w_half
    a_new = rhs(v_new)
    return v_new, w_half + 0.5 * h * a_new, a_new


def _composed_step(rhs, v, w, a, h):
    for c in _YOSHIDA:
        v, w, a = _verlet_step(rhs, v, w, a, c * h)
    return v, w, a


def integrate_orbit(p: PhaseParams, v0: float, dx: Optional[float] = None,
                    n_per_period: int = 100_000) -> PhaseOrbit:
    """Integrate one closed orbit starting at the left turning point (v0, 0).

    Requires potential(v0) inside the closed-orbit energy window and
    v0 < rho_center.  The stepper is a symmetric 4th-order composition of
    velocity-Verlet stages, so the sampled energy stays flat to well below
    the 1e-9-per-unit-length budget at the default resolution.  The half
    period ends where w returns to zero (located by bisection on partial
    steps); the second half is the mirror image.
    """
    window = energy_window(p)
    e0 = potential(p, v0)
    if not (0.0 < e0 < window.closed_orbit_sup):
        raise InputError(
            f"potential(v0)={e0:.6g} outside the closed-orbit window "
            f"(0, {window.closed_orbit_sup:.6g})")
    if not v0 < p.rho_center:
        raise InputError(f"v0={v0} must lie left of the center {p.rho_center}")

    rhs = _rhs_fn(p)
    period_est = _period_quadrature(p, v0, e0)
    h = dx if dx is not None else period_est / n_per_period
    max_steps = int(math.ceil(10_000.0 / h))
    # closed orbits stay strictly between the two potential barriers; past
    # either one the trajectory is unbounded (energy error put it over)
    v_ceiling = p.q + 1e-9 * max(1.0, p.q)
    v_floor = p.rho_saddle - 1e-9 * max(1.0, abs(p.rho_saddle))

    vs = [v0]
    ws = [0.0]
    v, w = v0, 0.0
    a = rhs(v)
    n = 0
    while n < max_steps:
        v_n, w_n, a_n = _composed_step(rhs, v, w, a, h)
        n += 1
        if w_n <= 0.0 and n > 1:
            break
        if not (v_floor <= v_n <= v_ceiling):
            raise ConstructionError(
                f"orbit from v0={v0} escaped the potential well at v={v_n:.6g} "
                "(energy at or above a barrier level)")
        v, w, a = v_n, w_n, a_n
        vs.append(v)
        ws.append(w)
    else:
        raise ConstructionError(
            f"orbit from v0={v0} did not return to w=0 within x={10_000}")

    # locate the turning point by bisection on the step fraction
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        _, w_m, _ = _composed_step(rhs, v, w, a, mid * h)
        if w_m > 0.0:
            lo = mid
        else:
            hi = mid
    frac = 0.5 * (lo + hi)
    v_end, w_end, _ = _composed_step(rhs, v, w, a, frac * h)
    half = (len(vs) - 1) * h + frac * h

    x_half = np.append(np.arange(len(vs)) * h, half)
    v_half = np.append(np.array(vs), v_end)
    w_half = np.append(np.array(ws), w_end)
    w_half[-1] = 0.0
    if x_half.size > 1 and x_half[-1] - x_half[-2] < 1e-9 * h:
        # turning point landed on a grid sample; drop the duplicate abscissa
        x_half = np.delete(x_half, -2)
        v_half = np.delete(v_half, -2)
        w_half = np.delete(w_half, -2)

    # mirror to the full period
    x_full = np.concatenate([x_half, 2.0 * half - x_half[-2::-1]])
    v_full = np.concatenate([v_half, v_half[-2::-1]])
    w_full = np.concatenate([w_half, -w_half[-2::-1]])
    return PhaseOrbit(v0=v0, energy=e0, period=2.0 * half, x=x_full, v=v_full, w=w_full)


def _period_quadrature(p: PhaseParams, v0: float, e0: Optional[float] = None) -> float:
    """Period from the turning-point integral

        P = 2 * integral_{v0}^{v_max} dv / sqrt(2 (E - potential(v))).

    Each half is stretched by v = v_turn -+ y^2, which removes the
    square-root endpoint singularity *and* stays bounded when the turning
    point is nearly degenerate (orbits close to the ceiling equilibrium
    linger there; the naive substitution loses digits).  The energy gap is
    integrated from the nearest turning point so it stays relatively
    accurate where it is small.
    """
    if e0 is None:
        e0 = potential(p, v0)
    v_max = turning_point(p, v0, e0)
    v_mid = 0.5 * (v0 + v_max)
    rhs = _rhs_fn(p)
    kink = p.v_sat if v0 < p.v_sat < v_max else None

    def gap_from(anchor: float, v: float) -> float:
        # e0 - potential(v) as the signed integral of the rhs from the
        # turning point at ``anchor`` (quad handles reversed limits)
        lo, hi = min(anchor, v), max(anchor, v)
        pts = [kink] if (kink is not None and lo < kink < hi) else None
        val, _ = quad(rhs, anchor, v, points=pts, epsabs=1e-13, epsrel=1e-11,
                      limit=100)
        return val

    def half_integral(anchor: float, sign: float, y_end: float) -> float:
        # integral of dv / sqrt(2 gap) over the half, v = anchor + sign y^2
        kink_y = None
        if kink is not None and min(anchor, anchor + sign * y_end ** 2) < kink < max(anchor, anchor + sign * y_end ** 2):
            kink_y = math.sqrt(abs(kink - anchor))

        def integrand(y):
            g = gap_from(anchor, anchor + sign * y * y)
            if g <= 0.0:
                g = 1e-300
            return 2.0 * y / math.sqrt(2.0 * g)

        val, _ = quad(integrand, 0.0, y_end,
                      points=[kink_y] if kink_y else None,
                      epsabs=1e-11, epsrel=1e-10, limit=200)
        return val

    with warnings.catch_warnings():
        # near-degenerate turning points create a sharp but integrable
        # boundary layer; quad resolves it while warning
        warnings.simplefilter("ignore", IntegrationWarning)
        left = half_integral(v0, +1.0, math.sqrt(v_mid - v0))
        right = half_integral(v_max, -1.0, math.sqrt(v_max - v_mid))
    return 2.0 * (left + right)


def orbit_period_oracle(p: PhaseParams, v0: float) -> float:
    """Public alias of the period integral (the independent period check)."""
    return _period_quadrature(p, v0)


def turning_point(p: PhaseParams, v0: float, e0: Optional[float] = None) -> float:
    """The right turning point: potential(v_max) = potential(v0), v_max > center."""
    if e0 is None:
        e0 = potential(p, v0)
    fn = lambda v: potential(p, v) - e0
    return brentq(fn, p.rho_center, p.q, xtol=1e-14, rtol=8.9e-16)


# ---------------------------------------------------------------------------
# flat-hump assembly


@dataclass
class StationaryProfile:
    """Sampled flat-hump pair with its residual diagnostics."""

    params: PhaseParams
    grid: "object"                 # pde.Grid1D; typed loosely to avoid a cycle
    u: np.ndarray
    v: np.ndarray
    x1: float
    lam: float
    length: float
    v0: float
    residual_flux: float = math.nan
    residual_v: float = math.nan

    @property
    def plateau(self) -> tuple[float, float]:
        return (self.x1, self.length - self.x1)


def default_v0(p: PhaseParams, fraction: float = 0.5) -> float:
    """Left turning point at the midpoint of the admissible energy window.

    Bisects potential(v0) = E_sat + fraction * (E_sup - E_sat) on
    (rho_saddle, rho_center), where (E_sat, E_sup) is the window of energies
    whose orbits both close and cross the saturation level.
    """
    if not 0.0 < fraction < 1.0:
        raise InputError("fraction must lie in (0, 1)")
    window = energy_window(p)
    e_lo, e_hi = window.admissible
    if not e_lo < e_hi:
        raise ConstructionError(
            "empty admissible energy window: the mean inequality fails "
            f"(potential at saturation {e_lo:.6g} >= closed-orbit sup {e_hi:.6g})")
    target = e_lo + fraction * (e_hi - e_lo)
    fn = lambda v: potential(p, v) - target
    a = p.rho_saddle + 1e-13 * max(1.0, abs(p.rho_saddle))
    b = p.rho_center - 1e-13 * max(1.0, abs(p.rho_center))
    return brentq(fn, a, b, xtol=1e-14, rtol=8.9e-16)


def v0_for_length(p: PhaseParams, length: float, tol: float = 1e-10) -> float:
    """Find v0 whose orbit period matches a requested domain length.

    The period grows monotonically toward the saddle; bisection on the
    period integral.  Raises ConstructionError when the requested length is
    below the shortest admissible period.
    """
    window = energy_window(p)
    e_lo, e_hi = window.admissible

    def v_of_energy(e):
        fn = lambda v: potential(p, v) - e
        return brentq(fn, p.rho_saddle + 1e-13, p.rho_center - 1e-13,
                      xtol=1e-14, rtol=8.9e-16)

    lo_frac, hi_frac = 1e-6, 1.0 - 1e-9
    p_low = _period_quadrature(p, v_of_energy(e_lo + lo_frac * (e_hi - e_lo)))
    if length < p_low:
        raise ConstructionError(
            f"requested length {length} below the shortest plateau-reaching period {p_low:.6g}")

    def period_of(frac):
        return _period_quadrature(p, v_of_energy(e_lo + frac * (e_hi - e_lo)))

    lo, hi = lo_frac, hi_frac
    while period_of(hi) < length:
        hi = 1.0 - 0.1 * (1.0 - hi)
        if 1.0 - hi < 1e-12:
            raise ConstructionError(f"cannot reach length {length}: period saturates")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if period_of(mid) < length:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    frac = 0.5 * (lo + hi)
    v0 = v_of_energy(e_lo + frac * (e_hi - e_lo))
    if abs(_period_quadrature(p, v0) - length) > max(tol, 1e-8 * length):
        raise ConstructionError("period matching did not converge to the requested length")
    return v0


def edge_position(p: PhaseParams, v0: float, e0: Optional[float] = None) -> float:
    """x1: arc length from the left turning point to the saturation level.

    Same turning-point-regularized quadrature as the period integral,
    stopped at v_sat instead of the far turning point.
    """
    if e0 is None:
        e0 = potential(p, v0)
    if not e0 > potential(p, p.v_sat):
        raise InputError("orbit does not reach the saturation level")
    rhs = _rhs_fn(p)

    def gap(v: float) -> float:
        val, _ = quad(rhs, v0, v, epsabs=1e-13, epsrel=1e-11, limit=100)
        return val if val > 0 else 1e-300

    def integrand(y):
        return 2.0 * y / math.sqrt(2.0 * gap(v0 + y * y))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(integrand, 0.0, math.sqrt(p.v_sat - v0),
                      epsabs=1e-11, epsrel=1e-10, limit=200)
    return val


def v0_for_edge_alignment(p: PhaseParams, n_cells: int, edge_index: int,
                          bracket: tuple[float, float] = (0.95, 1.0 - 1e-8),
                          use_orbit: bool = False) -> float:
    """v0 whose plateau edge lands on a cell interface of an n_cells mesh.

    Solves x1(v0) * n_cells / period(v0) = edge_index over the energy
    window fractions in ``bracket``.  With the edge on an interface at
    n_cells it stays on one at every dyadic refinement, so refinement
    studies of edge-sensitive quantities (like the relaxation drift of the
    time-dependent solver) see clean first-order scaling instead of the
    pseudo-random kink-to-cell offset.

    ``use_orbit`` measures x1 and the period on the discrete orbit that
    :func:`construct_flat_hump` will actually use; near the top of the
    energy window the period is sensitive enough that the quadrature and
    the integrator disagree by a visible fraction of a cell.
    """
    window = energy_window(p)
    e_lo, e_hi = window.admissible

    def v0_of(frac: float) -> float:
        target = e_lo + frac * (e_hi - e_lo)
        return brentq(lambda v: potential(p, v) - target,
                      p.rho_saddle + 1e-13, p.rho_center - 1e-13,
                      xtol=1e-15, rtol=8.9e-16)

    def misfit(frac: float) -> float:
        v0 = v0_of(frac)
        if use_orbit:
            try:
                orbit = integrate_orbit(p, v0)
            except (ConstructionError, InputError):
                # escaped or out-of-window probe: infinite period, so the
                # edge index per cell count is effectively zero
                return -float(edge_index)
            spline = orbit.spline()
            x1 = brentq(lambda x: float(spline(x)) - p.v_sat, 0.0,
                        0.5 * orbit.period, xtol=1e-12)
            return x1 * n_cells / orbit.period - edge_index
        e0 = potential(p, v0)
        return edge_position(p, v0, e0) * n_cells / _period_quadrature(p, v0, e0) - edge_index

    fa, fb = bracket
    ma, mb = misfit(fa), misfit(fb)
    if ma * mb > 0:
        raise ConstructionError(
            f"edge index {edge_index} not bracketed: misfit ({ma:.3g}, {mb:.3g}); "
            "the index corresponds to a period outside the admissible window")
    for _ in range(100):
        fm = 0.5 * (fa + fb)
        mm = misfit(fm)
        if mm * ma > 0:
            fa, ma = fm, mm
        else:
            fb, mb = fm, mm
        if abs(mm) < 1e-10 or fb - fa < 1e-15:
            break
    return v0_of(0.5 * (fa + fb))


def construct_flat_hump(p: PhaseParams, v0: Optional[float] = None,
                        grid_n: int = 4096) -> StationaryProfile:
    """Assemble the flat-hump pair on one orbit period.

    The domain size is an output: l = period(v0).  v(x) is the orbit, u is
    the profile map of v below the saturation level and exactly 1 on the
    plateau [x1, l - x1], where x1 is the first crossing v(x1) = v_sat
    (bisection on the orbit's Hermite interpolant, tol 1e-11).  Residuals of
    both stationary equations are measured on the sampled grid by centered
    differences, skipping the cells whose stencil straddles the plateau
    edges (u has a derivative kink there).
    """
    from .pde import Grid1D

    if v0 is None:
        v0 = default_v0(p)
    e0 = potential(p, v0)
    window = energy_window(p)
    if not e0 > window.at_sat:
        raise InputError(
            f"potential(v0)={e0:.6g} must exceed potential(v_sat)={window.at_sat:.6g} "
            "or the orbit never saturates")

    orbit = integrate_orbit(p, v0)
    length = orbit.period
    spline = orbit.spline()

    half = 0.5 * length
    probe = spline(np.linspace(0.0, half, 4096))
    if probe.max() < p.v_sat:
        raise ConstructionError("orbit maximum stays below the saturation level")
    x1 = brentq(lambda x: float(spline(x)) - p.v_sat, 0.0, half, xtol=1e-11)

    grid = Grid1D(grid_n, length)
    x = grid.centers
    v = np.asarray(spline(x), dtype=float)
    u = np.empty_like(v)
    density = _clamped_density_fn(p.coeffs, p.lam, p.v_sat)
    inside = (x >= x1) & (x <= length - x1)
    u[inside] = 1.0
    u[~inside] = [density(s) for s in v[~inside]]
    # clip roundoff above the ceiling near the plateau edges
    u = np.minimum(u, 1.0)

    profile = StationaryProfile(params=p, grid=grid, u=u, v=v, x1=float(x1),
                                lam=p.lam, length=length, v0=v0)
    profile.residual_flux, profile.residual_v = stationary_residuals(profile)
    return profile


def _centered_first(arr: np.ndarray, dx: float) -> np.ndarray:
    """4th-order centered first derivative on the interior (2 ghost cells)."""
    return (-arr[4:] + 8.0 * arr[3:-1] - 8.0 * arr[1:-3] + arr[:-4]) / (12.0 * dx)


def _centered_second(arr: np.ndarray, dx: float) -> np.ndarray:
    return (-arr[4:] + 16.0 * arr[3:-1] - 30.0 * arr[2:-2]
            + 16.0 * arr[1:-3] - arr[:-4]) / (12.0 * dx ** 2)


def stationary_residuals(profile: StationaryProfile,
                         exclusion_cells: int = 2) -> tuple[float, float]:
    """Sup-norm residuals of the two stationary equations on the grid.

    residual_flux = sup |D1(u) D2(v) u' - h1(u) h2(v) v'| and
    residual_v = sup |-v'' + beta v - gamma u|, derivatives by centered
    differences; cells within ``exclusion_cells`` of the plateau edges are
    excluded (u is only Lipschitz across them, so the difference stencil is
    inconsistent there).
    """
    p = profile.params
    sep = p.coeffs.separable
    dx = profile.grid.dx
    u, v = profile.u, profile.v
    x = profile.grid.centers[2:-2]

    du = _centered_first(u, dx)
    dv = _centered_first(v, dx)
    d2v = _centered_second(v, dx)
    ui, vi = u[2:-2], v[2:-2]

    flux_res = np.abs(np.asarray(sep.d1(ui), dtype=float) * np.asarray(sep.d2(vi), dtype=float) * du
                      - np.asarray(sep.h1(ui), dtype=float) * np.asarray(sep.h2(vi), dtype=float) * dv)
    v_res = np.abs(-d2v + p.gb.beta * vi - p.gb.gamma * ui)

    keep = np.ones(x.size, dtype=bool)
    margin = (exclusion_cells + 0.5) * dx
    for edge in (profile.x1, profile.length - profile.x1):
        keep &= np.abs(x - edge) > margin
    return float(flux_res[keep].max()), float(v_res[keep].max())


# ---------------------------------------------------------------------------
# sufficient conditions producing admissible offsets


def lambda_window_from_tangency(c: CoefficientSet, gb: GammaBeta,
                                shift: float = 1e-2,
                                scan_max: Optional[float] = None) -> tuple[float, float]:
    """Offset window (lam_base, lam_base + width) of crossing-pattern triplets.

    At lam_base = cell_potential(1) - chem_potential(gamma/beta) the clamped
    profile map touches the line (beta/gamma)s exactly at the ceiling
    gamma/beta.  If the profile map rises steeper than the line at that
    contact (checked by a one-sided slope), nudging lam upward by less than

        width = inf_s [chem_potential(s + shift) - chem_potential(s)]

    slides the contact into a transversal crossing pair, so every lam in the
    open window passes :func:`find_crossings`.
    """
    co.check_separable_structure(c)
    q = gb.ratio
    top = co.cell_potential_at_one(c)
    if not math.isfinite(top):
        raise StructuralError("cell potential diverges at 1: no saturation level exists")
    lam_base = top - co.chem_potential(c, q)

    # one-sided slope of the profile map at the tangency level
    s_probe = q * (1.0 - 1e-7)
    u_probe = _density_unclamped(c, lam_base, s_probe)
    slope = co.chem_potential_slope(c, s_probe) / co.cell_potential_slope(c, u_probe)
    if not slope > q:
        raise StructuralError(
            f"profile-map slope {slope:.6g} at the tangency does not exceed gamma/beta={q:.6g}")

    hi = scan_max if scan_max is not None else q + 1.0
    s_grid = np.linspace(0.0, hi, 2049)
    gaps = np.array([co.chem_potential(c, s + shift) - co.chem_potential(c, s)
                     for s in s_grid])
    width = float(gaps.min())
    if width <= 0.0:
        raise StructuralError("chemical potential is not strictly increasing on the scan window")
    return lam_base, width


def lambda_interval_from_slopes(c: CoefficientSet, gb: GammaBeta) -> tuple[float, tuple[float, float]]:
    """Slope-matching interval of admissible offsets.

    Solves cell_potential'(r) = (gamma/beta) chem_potential'((gamma/beta) r)
    for its largest root r_star in (0, 1); every lam strictly inside

        (cell_potential(1) - chem_potential(gamma/beta),
         cell_potential(r_star) - chem_potential((gamma/beta) r_star))

    passes the crossing pattern.  Requires the limiting slope of the cell
    potential at 1 to stay below (gamma/beta) chem_potential'(gamma/beta).
    """
    co.check_separable_structure(c)
    q = gb.ratio
    top = co.cell_potential_at_one(c)
    if not math.isfinite(top):
        raise StructuralError("cell potential diverges at 1: slope matching not applicable")

    def slope_gap(r: float) -> float:
        return q * co.chem_potential_slope(c, q * r) - co.cell_potential_slope(c, r)

    r_hi = 1.0 - 1e-9
    if not slope_gap(r_hi) > 0.0:
        raise StructuralError(
            "limiting slope condition fails: cell potential is too steep at 1")

    r_grid = np.linspace(1e-6, r_hi, 4096)
    vals = np.array([slope_gap(r) for r in r_grid])
    sign_changes = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if sign_changes.size == 0:
        raise StructuralError("no slope-matching point in (0, 1)")
    i = sign_changes[-1]
    r_star = brentq(slope_gap, r_grid[i], r_grid[i + 1], xtol=ROOT_TOL)

    lo = top - co.chem_potential(c, q)
    hi = co.cell_potential(c, r_star) - co.chem_potential(c, q * r_star)
    if not lo < hi:
        raise StructuralError("slope-matching interval is empty")
    return float(r_star), (float(lo), float(hi))


def density_bounds_from_mass(c: CoefficientSet, gb: GammaBeta, mass_m: float,
                             domain_size: float) -> tuple[float, float]:
    """A priori density bounds for stationary states of prescribed mass.

    Applies only when the cell potential diverges at 1 (the profile map then
    never saturates).  Both bounds lie strictly inside (0, 1) and bracket
    the mean density mass_m / domain_size.
    """
    top = co.cell_potential_at_one(c)
    if math.isfinite(top):
        raise InputError(
            "density bounds require a divergent cell potential at 1 "
            f"(got cell_potential(1)={top:.6g})")
    if not 0.0 < mass_m < domain_size:
        raise InputError("mass must lie strictly between 0 and the domain size")
    mean = mass_m / domain_size
    j_mean = co.cell_potential(c, mean)
    spread = co.chem_potential(c, gb.ratio)
    lo = co.cell_potential_inv(c, j_mean - spread)
    hi = co.cell_potential_inv(c, j_mean + spread)
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# cross-check against the time-dependent solver


def stationarity_drift(profile: StationaryProfile, cfg, t_check: float = 0.5) -> float:
    """Sup-norm drift of (u, v) after evolving the profile for t_check.

    Seeds the finite-volume solver with the sampled profile and integrates;
    a genuine stationary state drifts only by the discretization error,
    which must shrink under simultaneous refinement.
    """
    from dataclasses import replace as dc_replace

    from .pde import run

    cfg_run = dc_replace(cfg, t_end=t_check)
    snaps, _ = run(np.clip(profile.u, 0.0, 1.0), profile.v, profile.grid,
                   profile.params.coeffs, cfg_run, sample_times=())
    final = snaps[-1]
    return max(float(np.max(np.abs(final.u - profile.u))),
               float(np.max(np.abs(final.v - profile.v))))
