"""Single traveling fronts by phase-plane shooting.

A monotone front U(z) between stable zeros q_top (at z = -inf) and q_bot
(at z = +inf) corresponds to a heteroclinic orbit of the phase-plane equation

    dP/dv = -c - f(v)/P,   P(q_top) = P(q_bot) = 0,   P < 0 in between,

where P(v) is the slope U' at the point where U = v. Shooting launches on the
unstable manifold of (q_top, 0) and marches v downward. The landing behaviour
is monotone in c: at c = 0 the orbit is Hamiltonian and, under the energy
bias, overshoots q_bot with P(q_bot) = -sqrt(2*int f) < 0; raising c drains
the orbit until P touches zero early inside an f <= 0 well. Bisection on c
pins the connection speed, and the profile follows from the quadrature
z(v) = int dv / P(v), anchored so that U(0) = (q_top + q_bot)/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from terracelab.errors import (
    AmbiguousConnectionError,
    RangeError,
    SingularityError,
    ValidationError,
)
from terracelab.nonlinearity import Nonlinearity, energy_condition

DELTA_LAUNCH_FRAC = 1e-4
TOL_TAIL = 1e-6
TOL_BRACKET = 1e-8
TOL_LANDING = 1e-4
SHOOT_RTOL = 1e-9


def c_max_for(f: Nonlinearity) -> float:
    """Generous upper bound for connection speeds: 2*sqrt(sup|f'| on [0,p]) + 1."""
    hi = f.p if f.p is not None else f.search_interval[1]
    u = np.linspace(0.0, hi, 2001)
    return 2.0 * math.sqrt(float(np.max(np.abs(f.fprime(u))))) + 1.0


def _launch_rate(f: Nonlinearity, q_top: float, c: float) -> float:
    """Positive unstable-manifold slope at q_top: P(v) ~ lam*(v - q_top) < 0."""
    fp = f.fprime(q_top)
    return 0.5 * (-c + math.sqrt(c * c - 4.0 * fp))


def _decay_rate(f: Nonlinearity, q_bot: float, c: float) -> float:
    """Negative eigenvalue governing the approach to q_bot as z -> +inf."""
    fp = f.fprime(q_bot)
    return 0.5 * (-c - math.sqrt(c * c - 4.0 * fp))


@dataclass
class ShootResult:
    """One downward march of the phase-plane equation at fixed speed c."""

    c: float
    v_grid: np.ndarray      # descending values in (q_bot, q_top)
    P_values: np.ndarray    # slopes, <= 0
    outcome: str            # "reached_bottom" | "touched_zero" | "diverged"
    v_star: float | None = None   # touch location when outcome == "touched_zero"
    P_end: float | None = None    # P(q_bot) when outcome == "reached_bottom"


def shoot(f: Nonlinearity, q_top: float, q_bot: float, c: float, *,
          delta_launch_frac: float = DELTA_LAUNCH_FRAC,
          rtol: float = SHOOT_RTOL) -> ShootResult:
    """March the phase-plane orbit from q_top toward q_bot at speed c.

    Returns the orbit samples and the outcome classification: the orbit either
    survives to q_bot (``reached_bottom``, carrying its limit value P(q_bot)),
    or P returns to zero at some v* > q_bot (``touched_zero``).
    """
    if not (f.is_stable_zero(q_top) and f.is_stable_zero(q_bot)):
        raise ValidationError("shoot endpoints must be stable zeros of f")
    if not q_top > q_bot:
        raise ValidationError("need q_top > q_bot")
    cmax = c_max_for(f)
    if c < 0 or c > cmax:
        raise RangeError(f"speed c={c} outside [0, {cmax}]")

    span = q_top - q_bot
    delta = delta_launch_frac * span
    lam = _launch_rate(f, q_top, c)
    v0 = q_top - delta
    p0 = -lam * delta
    # on the overshoot side |P| only shrinks at the very landing, so stopping
    # a quarter of the launch slope early cannot misclassify a clean orbit
    touch_eps = abs(p0) / 4.0

    def rhs(v, y):
        return (-c - f(float(v)) / y[0],)

    def touch(v, y):
        return y[0] + touch_eps

    touch.terminal = True
    touch.direction = 1.0

    sol = solve_ivp(rhs, (v0, q_bot), (p0,), events=(touch,),
                    rtol=rtol, atol=1e-12 * max(1.0, abs(p0)), method="RK45",
                    max_step=span / 8.0)
    if sol.status == -1:
        raise SingularityError(
            f"step underflow near v={sol.t[-1]:.6g} (c={c})", location=float(sol.t[-1]))

    v_grid = np.asarray(sol.t, dtype=float)
    p_vals = np.asarray(sol.y[0], dtype=float)
    if sol.status == 1:  # touched the zero threshold
        v_star = float(sol.t_events[0][0])
        return ShootResult(c, v_grid, p_vals, "touched_zero", v_star=v_star)
    if not np.isfinite(p_vals[-1]):
        return ShootResult(c, v_grid, p_vals, "diverged")
    return ShootResult(c, v_grid, p_vals, "reached_bottom", P_end=float(p_vals[-1]))


@dataclass
class WaveProfile:
    """A monotone front: speed plus sampled profile on an adaptive grid.

    Samples decrease strictly from within tol_tail of q_top down to within
    tol_tail of q_bot, and the grid contains z = 0 with
    U(0) = (q_top + q_bot)/2.
    """

    c: float
    q_top: float
    q_bot: float
    z_samples: np.ndarray
    u_samples: np.ndarray
    residual: float | None = None
    bisection_trace: list = field(default_factory=list, repr=False)

    def evaluate(self, z):
        """Profile value with exact constant tails beyond the sampled range."""
        return np.interp(z, self.z_samples, self.u_samples,
                         left=self.q_top, right=self.q_bot)

    def z_of_value(self, u: float) -> float:
        """Unique coordinate where the profile crosses the value u."""
        if not self.q_bot < u < self.q_top:
            raise ValidationError(f"value {u} outside ({self.q_bot}, {self.q_top})")
        # u_samples descend; interpolate on the reversed arrays
        return float(np.interp(u, self.u_samples[::-1], self.z_samples[::-1]))

    def slope_at_value(self, u: float) -> float:
        """Finite-difference slope dU/dz at the crossing of value u."""
        z = self.z_of_value(u)
        i = int(np.searchsorted(self.z_samples, z))
        i = min(max(i, 1), len(self.z_samples) - 1)
        dz = self.z_samples[i] - self.z_samples[i - 1]
        return float((self.u_samples[i] - self.u_samples[i - 1]) / dz)


def _graded_v_points(q_top, q_bot, delta_top, delta_bot, n_side=420, n_mid=480):
    """Descending v samples, geometrically refined toward both endpoints."""
    span = q_top - q_bot
    gaps_top = np.geomspace(delta_top, 0.45 * span, n_side)
    gaps_bot = np.geomspace(delta_bot, 0.45 * span, n_side)
    pts = np.concatenate([
        q_top - gaps_top,
        np.linspace(q_top - 0.45 * span, q_bot + 0.45 * span, n_mid),
        q_bot + gaps_bot,
        [0.5 * (q_top + q_bot)],
    ])
    pts = np.unique(pts)
    pts = pts[(pts > q_bot) & (pts < q_top)]
    return pts[::-1]


def _reconstruct_profile(f, q_top, q_bot, c, *, delta_launch_frac, tol_tail):
    """Quadrature z(v) = int dv/P along the connecting orbit, plus linear tails."""
    span = q_top - q_bot
    delta = delta_launch_frac * span
    lam = _launch_rate(f, q_top, c)
    nu = _decay_rate(f, q_bot, c)
    v0 = q_top - delta
    p0 = -lam * delta
    v_end_gap = delta  # stop the quadrature symmetrically above q_bot
    v_pts = _graded_v_points(q_top, q_bot, delta * 1.0000001, v_end_gap)

    def rhs(v, y):
        fp = f(float(v))
        return (-c - fp / y[0], 1.0 / y[0])

    sol = solve_ivp(rhs, (v0, v_pts[-1]), (p0, 0.0), t_eval=v_pts,
                    rtol=SHOOT_RTOL, atol=1e-12, method="RK45", max_step=span / 8.0)
    if sol.status != 0:
        raise SingularityError(
            f"profile quadrature stopped at v={sol.t[-1]:.6g}", location=float(sol.t[-1]))
    v_arr = np.asarray(sol.t)
    z_arr = np.asarray(sol.y[1])

    # anchor U(0) at the midpoint value
    v_mid = 0.5 * (q_top + q_bot)
    z_arr = z_arr - np.interp(-v_mid, -v_arr, z_arr)  # v_arr descends

    # z ascends as v descends; assemble ascending-z arrays
    z_core = z_arr
    u_core = v_arr

    # left tail: gap to q_top decays like exp(lam * z)
    gap0 = q_top - u_core[0]
    n_tail = 60
    if gap0 > tol_tail:
        L = math.log(gap0 / tol_tail) / lam
        z_left = z_core[0] - np.linspace(L, L / n_tail, n_tail)
        u_left = q_top - gap0 * np.exp(lam * (z_left - z_core[0]))
        z_core = np.concatenate([z_left, z_core])
        u_core = np.concatenate([u_left, u_core])

    # right tail: gap to q_bot decays like exp(nu * z), nu < 0
    gap1 = u_core[-1] - q_bot
    if gap1 > tol_tail:
        L = math.log(gap1 / tol_tail) / (-nu)
        z_right = z_core[-1] + np.linspace(L / n_tail, L, n_tail)
        u_right = q_bot + gap1 * np.exp(nu * (z_right - z_core[-1]))
        z_core = np.concatenate([z_core, z_right])
        u_core = np.concatenate([u_core, u_right])

    # enforce strict monotonicity (guards against roundoff ties in the tails)
    keep = np.concatenate([[True], np.diff(u_core) < 0])
    return z_core[keep], u_core[keep]


def find_front(f: Nonlinearity, q_top: float, q_bot: float, *,
               tol_bracket: float = TOL_BRACKET,
               tol_landing: float = TOL_LANDING,
               delta_launch_frac: float = DELTA_LAUNCH_FRAC,
               tol_tail: float = TOL_TAIL) -> WaveProfile | None:
    """Find the direct monotone front q_top -> q_bot, or None if there is none.

    Bisects on c in [0, c_max] using the shoot outcome as the sign function
    (a touched orbit means c is too large, an overshoot P(q_bot) < 0 means c is
    too small). On bracket convergence the existence of the connection is
    decided by the landing value |P(q_bot)| <= tol_landing: a chain of slower
    sub-fronts can make the landing detach, in which case the pair admits no
    direct front and None is returned.
    """
    holds, _ = energy_condition(f, q_bot, q_top)
    if not holds:
        return None
    cmax = c_max_for(f)
    trace = []

    def classify(c, rtol=SHOOT_RTOL):
        res = shoot(f, q_top, q_bot, c, delta_launch_frac=delta_launch_frac, rtol=rtol)
        trace.append((c, res.outcome, res.P_end if res.P_end is not None else res.v_star))
        return res

    res_lo = classify(0.0, rtol=1e-6)
    if res_lo.outcome != "reached_bottom":
        raise AmbiguousConnectionError(
            "orbit at c=0 failed to overshoot despite the energy bias; "
            "shooting outcomes are inconsistent", scan_trace=trace)
    res_hi = classify(cmax, rtol=1e-6)
    if res_hi.outcome != "touched_zero":
        return None  # no sign change available in [0, c_max]

    lo, hi = 0.0, cmax
    while hi - lo > tol_bracket:
        mid = 0.5 * (lo + hi)
        # classification far from the root is insensitive to integrator noise,
        # so coarse shots suffice until the bracket tightens
        rtol = SHOOT_RTOL if hi - lo < 1e-4 * cmax else 1e-6
        res = classify(mid, rtol=rtol)
        if res.outcome == "touched_zero":
            hi = mid
        elif res.outcome == "reached_bottom":
            lo = mid
        else:
            raise AmbiguousConnectionError(
                f"divergent orbit at c={mid}", scan_trace=trace)

    final = classify(lo)
    if final.outcome != "reached_bottom":
        raise AmbiguousConnectionError(
            "bracket endpoint flipped outcome; bisection inconsistent", scan_trace=trace)
    if abs(final.P_end) > tol_landing:
        return None  # landing detached: the connection is a multi-front chain

    z, u = _reconstruct_profile(f, q_top, q_bot, lo,
                                delta_launch_frac=delta_launch_frac, tol_tail=tol_tail)
    wave = WaveProfile(c=lo, q_top=q_top, q_bot=q_bot, z_samples=z, u_samples=u,
                       bisection_trace=trace)
    wave.residual = profile_residual(wave, f)
    return wave


def profile_residual(w: WaveProfile, f: Nonlinearity) -> float:
    """Max interior defect |U'' + c U' + f(U)| by second-order differences.

    Uses the standard three-point formulas on the nonuniform grid.
    """
    z, u = w.z_samples, w.u_samples
    if len(z) < 5:
        raise ValidationError("need at least 5 samples for the residual")
    h0 = z[1:-1] - z[:-2]
    h1 = z[2:] - z[1:-1]
    um, uc, up = u[:-2], u[1:-1], u[2:]
    d1 = (-h1 / (h0 * (h0 + h1))) * um + ((h1 - h0) / (h0 * h1)) * uc \
        + (h0 / (h1 * (h0 + h1))) * up
    d2 = 2.0 * (um / (h0 * (h0 + h1)) - uc / (h0 * h1) + up / (h1 * (h0 + h1)))
    fu = f(uc) if np.ndim(uc) else f(float(uc))
    return float(np.max(np.abs(d2 + w.c * d1 + fu)))
