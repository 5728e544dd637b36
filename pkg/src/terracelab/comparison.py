"""Super/subsolution machinery with explicit constants, and the sandwich.

Two constructions are supported. For an exact traveling wave W = Phi(r - ct)
the shifted-and-lifted comparison functions are

    upper(r,t) = Phi(r - ct - r0 + c t0 + (1+c) e^{-bt}) + s e^{-bt},
    lower(r,t) = Phi(r - ct - r0 + c t0 - (1+c) e^{-bt}) - s e^{-bt},

with b = eta0/2 and s <= min(eps, eta0*eta1 / (2 M0)), where eta0 is a
spectral gap of f' near the two endpoint floors, eta1 a slope floor of the
wave outside those floor neighborhoods, and M0 a global bound on -f' - b.

For a radial terrace run V(r, t) the analogous pair is

    upper(x,t) = V(|x|, t + t0 + 1 - e^{-bt}) + s*b*e^{-bt},   t0 >= 1,
    lower(x,t) = V(|x|, t + t0 - 1 + e^{-bt}) - s*b*e^{-bt},

with b = eta (gap over *all* floors) and s <= min(eps/(2b), delta0/M0),
delta0 a positive floor of V_t wherever V sits away from the floors.

verify_supersub evaluates the claimed one-sided inequality residual on a
space-time grid; sandwich_check searches the smallest snapshot-aligned time
shifts (T, T0) bracketing an arbitrary admissible run between shifted copies
of V with the exponential corrections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from terracelab.errors import ExtractionError, ValidationError
from terracelab.front import WaveProfile
from terracelab.nonlinearity import Nonlinearity
from terracelab.radial_pde import RadialTrajectory


@dataclass
class SupersubConstants:
    """Constant pack for one comparison construction."""

    kind: str                 # "wave" | "radial"
    beta0: float
    sigma0: float
    eta0: float
    M0: float
    epsilon_nbhd: float
    eta1: float | None = None     # wave form: interface slope floor
    delta0: float | None = None   # radial form: V_t floor off the floors

    def as_dict(self):
        return {"kind": self.kind, "beta0": self.beta0, "sigma0": self.sigma0,
                "eta0": self.eta0, "M0": self.M0, "epsilon_nbhd": self.epsilon_nbhd,
                "eta1": self.eta1, "delta0": self.delta0}


def _band_gap(f: Nonlinearity, centers, half_width: float) -> float:
    """-max f' over the union of bands [q - h, q + h]; positive = spectral gap."""
    worst = -math.inf
    for q in centers:
        u = np.linspace(q - half_width, q + half_width, 201)
        worst = max(worst, float(np.max(f.fprime(u))))
    return -worst


def compute_constants(f: Nonlinearity, *, wave: WaveProfile | None = None,
                      trajectory: RadialTrajectory | None = None,
                      floors=None, eps_nbhd: float | None = None) -> SupersubConstants:
    """Extract the comparison constants for a wave or a radial trajectory.

    Exactly one of ``wave`` / ``trajectory`` must be given. When eps_nbhd is
    not supplied it starts at 5% of the relevant value span and shrinks until
    the spectral gap reaches 80% of its eps -> 0 limit; an eps_nbhd so wide
    that a floor band swallows an unstable zero raises ExtractionError.
    """
    if (wave is None) == (trajectory is None):
        raise ValidationError("give exactly one of wave= or trajectory=")

    if wave is not None:
        centers = [wave.q_bot, wave.q_top]
        span = wave.q_top - wave.q_bot
    else:
        if floors is None:
            raise ValidationError("radial constants need the terrace floors")
        centers = list(floors)
        span = max(centers) - min(centers)

    gap_limit = -max(float(f.fprime(q)) for q in centers)
    if eps_nbhd is None:
        eps = 0.05 * span
        # bands shrink until the gap is essentially the linearization gap
        while _band_gap(f, centers, 2 * eps) < 0.8 * gap_limit and eps > 1e-6 * span:
            eps *= 0.5
        eta0 = _band_gap(f, centers, 2 * eps)
    else:
        eps = eps_nbhd
        eta0 = _band_gap(f, centers, 2 * eps)
    if eta0 <= 0:
        raise ExtractionError(
            f"no spectral gap on the floor bands (eps_nbhd={eps}); "
            f"an unstable zero sits inside a band")

    if wave is not None:
        beta0 = eta0 / 2.0
        # slope floor of the wave profile on the middle band
        mid = (wave.u_samples >= wave.q_bot + eps) & (wave.u_samples <= wave.q_top - eps)
        z = wave.z_samples
        du = np.gradient(wave.u_samples, z)
        if not np.any(mid):
            raise ExtractionError("middle band holds no profile samples")
        eta1 = (1.0 + wave.c) * float(np.min(-du[mid]))
        if eta1 <= 0:
            raise ExtractionError("nonpositive interface slope floor")
        u_rng = np.linspace(wave.q_bot - 2 * eps, wave.q_top + 2 * eps, 2001)
        M0 = max(float(np.max(f.fprime(u_rng) + beta0)), 1e-12)
        sigma0 = min(eps, eta0 * eta1 / (2.0 * M0))
        return SupersubConstants(kind="wave", beta0=beta0, sigma0=sigma0, eta0=eta0,
                                 M0=M0, epsilon_nbhd=eps, eta1=eta1)

    beta0 = eta0
    traj = trajectory
    lo_q, hi_q = min(centers), max(centers)
    u_rng = np.linspace(lo_q - eps, hi_q + eps, 2001)
    M0 = max(float(np.max(f.fprime(u_rng) + beta0)), 1e-12)

    # The positivity of V_t is only needed where the spectral term can fail,
    # i.e. at values v with f'(v + theta) > -beta0 for some theta in
    # [0, eps/2] (theta <= sigma0*beta0 <= eps/2 by construction). That value
    # region is the numerical surrogate of the geometric interface bands; a
    # fixed eps-band mask would drag in the nearly stationary plateau edge of
    # the seed at early times and collapse delta0 to roundoff.
    uu = np.linspace(lo_q - eps, hi_q + eps, 4001)
    fp = f.fprime(uu)
    m_steps = max(2, int(math.ceil((0.5 * eps) / (uu[1] - uu[0]))))
    fp_max = np.maximum.reduce([np.roll(fp, -s) for s in range(m_steps + 1)])
    fp_max[-m_steps:] = fp[-m_steps:]
    needs_vt = fp_max > -beta0

    def in_delta_region(v):
        return np.interp(v, uu, needs_vt.astype(float)) > 0.0

    delta0 = math.inf
    for k, t in enumerate(traj.times):
        if t < 1.0:
            continue
        v = traj.snapshots[k]
        vt = traj.rhs_field(k)
        sel = in_delta_region(v) & (traj.r <= traj.grid.R_max - traj.grid.dr)
        if np.any(sel):
            delta0 = min(delta0, float(np.min(vt[sel])))
    if not math.isfinite(delta0) or delta0 <= 0:
        raise ExtractionError(
            f"V_t floor on the interface region is not positive (delta0={delta0})")
    sigma0 = min(eps / (2.0 * beta0), delta0 / M0)
    return SupersubConstants(kind="radial", beta0=beta0, sigma0=sigma0, eta0=eta0,
                             M0=M0, epsilon_nbhd=eps, delta0=delta0)


@dataclass
class ViolationReport:
    """Minimum residual of the one-sided inequalities over the audit grid."""

    min_residual_super: float
    argmin_super: tuple
    min_residual_sub: float
    argmin_sub: tuple
    tol: float

    @property
    def min_residual(self):
        return min(self.min_residual_super, self.min_residual_sub)

    @property
    def passed(self):
        return self.min_residual >= -self.tol

    def as_dict(self):
        return {"min_residual_super": self.min_residual_super,
                "argmin_super": list(self.argmin_super),
                "min_residual_sub": self.min_residual_sub,
                "argmin_sub": list(self.argmin_sub),
                "tol": self.tol, "passed": self.passed}


def verify_supersub_wave(f: Nonlinearity, wave: WaveProfile,
                         constants: SupersubConstants, r0: float = 0.0,
                         t0: float = 0.0, *, sigma: float | None = None,
                         beta: float | None = None,
                         r_range=(-50.0, 50.0), t_range=(0.0, 40.0),
                         dr: float = 0.05, dt: float = 0.05,
                         include_shifts: bool = True,
                         profile_fn=None) -> ViolationReport:
    """Finite-difference audit of the wave-form inequalities on a grid.

    Checks upper_t - upper_rr - f(upper) >= -tol and the mirrored bound for
    the lower function; tol = 10 (dr^2 + dt^2) max|f'| separates scheme noise
    from genuine violations. With include_shifts=False and sigma=0 the
    construction degenerates to the exact wave and the residual is pure
    discretization error.
    """
    sigma = constants.sigma0 if sigma is None else sigma
    beta = constants.beta0 if beta is None else beta
    profile = wave.evaluate if profile_fn is None else profile_fn
    c = wave.c
    r = np.arange(r_range[0], r_range[1] + dr / 2, dr)
    t = np.arange(t_range[0], t_range[1] + dt / 2, dt)
    R, T = np.meshgrid(r, t, indexing="xy")
    decay = np.exp(-beta * T)
    shift = (1.0 + c) * decay if include_shifts else 0.0

    u_rng = np.linspace(wave.q_bot - 2 * constants.epsilon_nbhd,
                        wave.q_top + 2 * constants.epsilon_nbhd, 2001)
    tol = 10.0 * (dr**2 + dt**2) * float(np.max(np.abs(f.fprime(u_rng))))

    def audit(sign):
        # sign=+1: upper (>= f), sign=-1: lower (<= f)
        W = profile(R - c * T - r0 + c * t0 + sign * shift) + sign * sigma * decay
        Wt = (W[2:, 1:-1] - W[:-2, 1:-1]) / (2 * dt)
        Wrr = (W[1:-1, 2:] - 2 * W[1:-1, 1:-1] + W[1:-1, :-2]) / dr**2
        fW = f.field.value(W[1:-1, 1:-1])
        res = sign * (Wt - Wrr - fW)
        k, j = np.unravel_index(np.argmin(res), res.shape)
        return float(res[k, j]), (float(t[k + 1]), float(r[j + 1]))

    sup_min, sup_at = audit(+1)
    sub_min, sub_at = audit(-1)
    return ViolationReport(min_residual_super=sup_min, argmin_super=sup_at,
                           min_residual_sub=sub_min, argmin_sub=sub_at, tol=tol)


def verify_supersub_radial(f: Nonlinearity, traj: RadialTrajectory,
                           constants: SupersubConstants, t0: float = 1.0, *,
                           sigma: float | None = None, beta: float | None = None,
                           t_window: float | None = None) -> ViolationReport:
    """Audit the radial-form inequalities along the stored trajectory.

    Uses the semidiscrete identity V_t = Lap_h V + f(V) (exact for the stored
    scheme), which reduces the claimed inequality to the sign of

        J(r,t) = b e^{-bt} V_t(r, tau(t)) * (tau'(t)-1)/(b e^{-bt}) ... >= 0,

    evaluated as: residual = V_t * b e^{-bt} - s b^2 e^{-bt} + f(V) - f(V + s b e^{-bt})
    for the upper bound (mirrored for the lower). The only approximations are
    the spatial discretization of V_t and linear interpolation between
    snapshots; tol = 10 (dr^2 + dt_solver^2) max|f'|.
    """
    if t0 < 1.0:
        raise ValidationError("the radial construction requires t0 >= 1")
    sigma = constants.sigma0 if sigma is None else sigma
    beta = constants.beta0 if beta is None else beta
    times = traj.times
    grid = traj.grid
    if t_window is None:
        t_window = times[-1] - times[0] - t0 - 2.0
    u_rng = np.linspace(-0.1, f.p + 0.1, 2001)
    # every term of the identity-based residual scales with the admissible
    # perturbation beta0*sigma0, so the noise threshold carries that factor
    tol = (10.0 * (grid.dr**2 + grid.dt**2) * float(np.max(np.abs(f.fprime(u_rng))))
           * constants.beta0 * constants.sigma0)
    keep = traj.r <= grid.R_max - grid.dr

    def field_at(tau):
        k = int(np.searchsorted(times, tau)) - 1
        k = min(max(k, 0), len(times) - 2)
        w = (tau - times[k]) / (times[k + 1] - times[k])
        v = (1 - w) * traj.snapshots[k] + w * traj.snapshots[k + 1]
        vt = (1 - w) * traj.rhs_field(k) + w * traj.rhs_field(k + 1)
        return v, vt

    def audit(sign):
        # substituting the semidiscrete identity Lap_h V + f(V) = V_t turns the
        # claimed inequality for V(r, tau(t)) +/- s*b*e^{-bt} into
        #   b e^{-bt} (V_t - s b) + sign * [f(V) - f(V + sign * s b e^{-bt})] >= 0
        worst = math.inf
        where = (0.0, 0.0)
        for tt in np.arange(0.0, t_window, 1.0):
            decay = math.exp(-beta * tt)
            tau = tt + t0 + 1.0 - decay if sign > 0 else tt + t0 - 1.0 + decay
            if tau < times[0] or tau > times[-1]:
                continue
            v, vt = field_at(tau)
            bump = sigma * beta * decay
            res = (beta * decay * (vt - sigma * beta)
                   + sign * (f.field.value(v) - f.field.value(v + sign * bump)))
            res = res[keep]
            j = int(np.argmin(res))
            if res[j] < worst:
                worst = float(res[j])
                where = (float(tt), float(traj.r[keep][j]))
        return worst, where

    sup_min, sup_at = audit(+1)
    sub_min, sub_at = audit(-1)
    return ViolationReport(min_residual_super=sup_min, argmin_super=sup_at,
                           min_residual_sub=sub_min, argmin_sub=sub_at, tol=tol)


@dataclass
class SandwichReport:
    T: float
    T0: float
    worst_slack_lower: float
    worst_slack_upper: float
    where_lower: tuple
    where_upper: tuple
    found: bool

    def as_dict(self):
        return {"T": self.T, "T0": self.T0, "found": self.found,
                "worst_slack_lower": self.worst_slack_lower,
                "worst_slack_upper": self.worst_slack_upper,
                "where_lower": list(self.where_lower),
                "where_upper": list(self.where_upper)}


def _radii_values(traj, k):
    """(radii, values) of snapshot k; radial and planar runs both comply."""
    if hasattr(traj, "radius_and_values"):
        return traj.radius_and_values(k)
    return traj.r, traj.snapshots[k]


def sandwich_check(u_traj, V_traj: RadialTrajectory, constants: SupersubConstants,
                   *, slack_tol: float = 1e-9, min_window: float = 20.0) -> SandwichReport:
    """Smallest snapshot-aligned (T, T0) with
    V(|x|, t-T) - s b e^{-b(t-T)} <= u(x,t) <= V(|x|, t+T0) + s b e^{-b(t-T)}.

    u may be a radial run or a planar run exposing radius_and_values(k).
    Failure to find either shift inside the stored horizon returns
    found=False (inadmissible initial data or broken numerics).
    """
    sb = constants.sigma0 * constants.beta0
    b = constants.beta0
    tu = u_traj.times
    tv = V_traj.times
    dt_snap = tu[1] - tu[0]
    if abs((tv[1] - tv[0]) - dt_snap) > 1e-9:
        raise ValidationError("u and V runs must share the snapshot spacing")
    rv = V_traj.r

    n_u = len(tu)
    n_v = len(tv)
    max_shift = n_v - 1

    def v_on(radii, k):
        return np.interp(radii, rv, V_traj.snapshots[k])

    # lower bound: smallest T = m*dt with V(t - T) - e-term <= u(t) for all t >= T
    T = None
    worst_lower, where_lower = -math.inf, (0.0, 0.0)
    for m in range(0, max_shift + 1):
        ok = True
        worst, where = math.inf, (0.0, 0.0)
        for k in range(m, n_u):
            if k - m >= n_v:
                break
            radii, u = _radii_values(u_traj, k)
            eterm = sb * math.exp(-b * (tu[k] - m * dt_snap))
            slack = u - (v_on(radii, k - m) - eterm)
            j = int(np.argmin(slack))
            if slack[j] < worst:
                worst, where = float(slack[j]), (float(tu[k]), float(np.ravel(radii)[j]))
            if slack[j] < -slack_tol:
                ok = False
                break
        if ok and n_u - m >= 2:
            T = m * dt_snap
            worst_lower, where_lower = worst, where
            break
    if T is None:
        return SandwichReport(T=math.nan, T0=math.nan, found=False,
                              worst_slack_lower=-math.inf, worst_slack_upper=-math.inf,
                              where_lower=(0, 0), where_upper=(0, 0))

    # upper bound: smallest T0 = m*dt with u(t) <= V(t + T0) + e-term, e-term
    # still anchored at t - T
    T0 = None
    worst_upper, where_upper = -math.inf, (0.0, 0.0)
    t_hi = int(round(T / dt_snap))
    for m in range(0, max_shift + 1):
        ok = True
        worst, where = math.inf, (0.0, 0.0)
        usable = 0
        for k in range(t_hi, n_u):
            if k + m >= n_v:
                break
            usable += 1
            radii, u = _radii_values(u_traj, k)
            eterm = sb * math.exp(-b * (tu[k] - T))
            slack = (v_on(radii, k + m) + eterm) - u
            j = int(np.argmin(slack))
            if slack[j] < worst:
                worst, where = float(slack[j]), (float(tu[k]), float(np.ravel(radii)[j]))
            if slack[j] < -slack_tol:
                ok = False
                break
        if ok and usable * dt_snap >= min_window:
            T0 = m * dt_snap
            worst_upper, where_upper = worst, where
            break
    if T0 is None:
        return SandwichReport(T=T, T0=math.nan, found=False,
                              worst_slack_lower=worst_lower, worst_slack_upper=-math.inf,
                              where_lower=where_lower, where_upper=(0, 0))
    return SandwichReport(T=T, T0=T0, found=True,
                          worst_slack_lower=worst_lower, worst_slack_upper=worst_upper,
                          where_lower=where_lower, where_upper=where_upper)
