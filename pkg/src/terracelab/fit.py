"""Shift functions and the terrace-convergence residual.

Each wave of the terrace rides at c_k t plus a slowly varying shift eta_k(t),
anchored through the level track of an unstable zero b interior to the wave:
with r0_k the profile coordinate where U_k = b,

    eta_k(t) = xi_b(t) - r0_k - c_k t,

so that U_k(xi_b(t) - c_k t - eta_k(t)) = b by construction. A trajectory is
certified as organizing into the terrace by the sup-norm residual

    rho(t) = max_r | u(r, t) - sum_k [ U_k(r - c_k t - eta_k(t)) - q_k^bot ] |,

whose tails are exact constants. The absorbing band next to the Dirichlet
boundary is excluded from the maximum (the domain is truncated; the far-field
contract only holds inside it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from terracelab.errors import ValidationError
from terracelab.levelset import LevelTrack, track_level
from terracelab.radial_pde import RadialTrajectory
from terracelab.terrace import Terrace

ABSORB_BAND = 10.0   # grid band [R_max - ABSORB_BAND, R_max] excluded from rho


def anchor_level(f, q_top: float, q_bot: float) -> float:
    """Unstable zero inside (q_bot, q_top) nearest the value midpoint.

    Any interior unstable zero anchors the same shift up to a constant;
    the midpoint choice maximizes |U'| robustness of the track.
    """
    mid = 0.5 * (q_top + q_bot)
    candidates = [z.location for z in f.zeros
                  if z.stability == "unstable" and q_bot < z.location < q_top]
    if not candidates:
        raise ValidationError(f"no unstable zero inside ({q_bot}, {q_top})")
    return min(candidates, key=lambda b: abs(b - mid))


@dataclass
class ShiftSeries:
    """Fitted shift of one wave: eta and its finite-difference derivative."""

    wave_index: int
    anchor: float                # the unstable-zero level b
    r0: float                    # profile coordinate with U_k(r0) = b
    times: np.ndarray
    eta: np.ndarray
    eta_prime: np.ndarray        # central differences; endpoints one-sided

    def eta_at(self, t):
        return np.interp(t, self.times, self.eta)

    def tail_sup_eta_prime(self, tail_fraction: float = 0.25) -> float:
        t0 = self.times[-1] - tail_fraction * (self.times[-1] - self.times[0])
        m = self.times >= t0
        return float(np.max(np.abs(self.eta_prime[m])))


def fit_shifts(traj: RadialTrajectory, terrace: Terrace) -> list[ShiftSeries]:
    """Fit eta_k(t) for every wave of the terrace from its anchor track."""
    f = traj.f
    out = []
    for k, w in enumerate(terrace.waves):
        b = anchor_level(f, w.q_top, w.q_bot)
        r0 = w.z_of_value(b)
        track: LevelTrack = track_level(traj, b)
        m = track.valid_mask & np.isfinite(track.xi)
        t = track.times[m]
        eta = track.xi[m] - r0 - w.c * t
        if len(t) < 3:
            raise ValidationError(f"track of wave {k} holds {len(t)} samples")
        ep = np.gradient(eta, t)
        out.append(ShiftSeries(wave_index=k, anchor=b, r0=r0,
                               times=t, eta=eta, eta_prime=ep))
    return out


def terrace_superposition(terrace: Terrace, shifts, r: np.ndarray, t: float) -> np.ndarray:
    """sum_k [U_k(r - c_k t - eta_k(t)) - q_k^bot] with constant tails."""
    acc = np.zeros_like(r, dtype=float)
    for w, s in zip(terrace.waves, shifts):
        acc += w.evaluate(r - w.c * t - s.eta_at(t)) - w.q_bot
    return acc


def convergence_residual(traj: RadialTrajectory, terrace: Terrace, shifts) -> tuple:
    """Sup-norm residual rho(t) between the run and the shifted terrace.

    Returns (times, rho) over the window where every shift is defined. The
    absorbing band next to R_max is excluded from the sup.
    """
    start = max(s.times[0] for s in shifts)
    r = traj.r
    keep = r <= traj.grid.R_max - ABSORB_BAND
    times, rho = [], []
    for k, t in enumerate(traj.times):
        if t < start:
            continue
        model = terrace_superposition(terrace, shifts, r[keep], t)
        rho.append(float(np.max(np.abs(traj.snapshots[k][keep] - model))))
        times.append(float(t))
    return np.asarray(times), np.asarray(rho)
