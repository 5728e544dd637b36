"""Level-crossing tracks, speed estimates, and the gap dichotomy.

For a monotone radial profile, each level c in (0, p) away from the floors
has a unique downcrossing radius xi_c(t) once the profile has organized
itself; its time series carries the spreading speed. The distance between
the tracks of two *unstable* zeros of f either stays bounded (both ride the
same front) or diverges linearly (a terrace floor separates them) -- that
dichotomy is what identifies the floors from simulation alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from terracelab.errors import MonotonicityViolationError, ValidationError
from terracelab.radial_pde import RadialTrajectory

FLOOR_MARGIN = 1e-3   # minimum distance of a tracked level from any stable zero
TAIL_FRACTION = 0.25


@dataclass
class LevelTrack:
    """Crossing radius time series for one level."""

    level: float
    times: np.ndarray
    xi: np.ndarray               # NaN before valid_from
    valid_from: float

    @property
    def valid_mask(self):
        return self.times >= self.valid_from

    def tail(self, tail_fraction: float = TAIL_FRACTION):
        """(t, xi) over the trailing fraction of the valid window."""
        m = self.valid_mask & np.isfinite(self.xi)
        t, x = self.times[m], self.xi[m]
        t0 = t[-1] - tail_fraction * (t[-1] - t[0])
        sel = t >= t0
        return t[sel], x[sel]


def _crossings(r, u, level):
    """All downcrossing radii of the level by linear interpolation."""
    s = u - level
    idx = np.flatnonzero((s[:-1] > 0) & (s[1:] <= 0))
    return [float(r[j] + (r[j + 1] - r[j]) * s[j] / (s[j] - s[j + 1])) for j in idx]


def track_level(traj: RadialTrajectory, level: float, *,
                floor_margin: float = FLOOR_MARGIN) -> LevelTrack:
    """Extract xi_level(t) from a stored trajectory.

    The level must lie in (0, p) at least floor_margin away from every stable
    zero (tracking at a floor is ill-posed: the profile flattens there).
    valid_from is the first snapshot time with exactly one downcrossing and a
    monotone profile beyond R0; multiple crossings after that point raise
    MonotonicityViolationError since they indicate solver trouble.
    """
    f = traj.f
    if f is None:
        raise ValidationError("trajectory carries no reaction term")
    if not 0.0 < level < f.p:
        raise ValidationError(f"level {level} outside (0, p)")
    for q in f.stable_zeros():
        if abs(level - q) < floor_margin:
            raise ValidationError(
                f"level {level} within {floor_margin} of the stable zero {q}; "
                f"tracking at floors is ill-posed")

    r = traj.r
    r0 = traj.R0 if traj.R0 is not None else 0.0
    times = traj.times
    xi = np.full(len(times), np.nan)
    valid_from = None
    for k, snap in enumerate(traj.snapshots):
        crossings = _crossings(r, snap, level)
        monotone_beyond = bool(np.all(np.diff(snap[r >= r0 - 1e-12]) <= 1e-9))
        if valid_from is None:
            if len(crossings) == 1 and monotone_beyond:
                valid_from = times[k]
                xi[k] = crossings[0]
        else:
            if len(crossings) != 1:
                raise MonotonicityViolationError(
                    f"level {level}: {len(crossings)} crossings at t={times[k]} "
                    f"after the track became valid at t={valid_from}")
            xi[k] = crossings[0]
    if valid_from is None:
        raise ValidationError(
            f"level {level} never acquired a unique crossing; run longer")
    return LevelTrack(level=level, times=times, xi=xi, valid_from=valid_from)


@dataclass
class SpeedEstimate:
    c_hat: float
    ci: float                    # standard error of the fitted slope
    min_xi_prime: float          # must be positive for a healthy track
    stalled: bool
    window: tuple

    def as_dict(self):
        return {"c_hat": self.c_hat, "ci": self.ci,
                "min_xi_prime": self.min_xi_prime, "stalled": self.stalled,
                "window": list(self.window)}


def estimate_speed(track: LevelTrack, tail_fraction: float = TAIL_FRACTION) -> SpeedEstimate:
    """Least-squares slope of xi vs t over the trailing window.

    Requires at least 20 samples in the tail. A nonpositive minimum
    finite-difference slope marks the estimate as stalled (the theory
    guarantees xi' bounded below by a positive constant away from floors).
    """
    t, x = track.tail(tail_fraction)
    if len(t) < 20:
        raise ValidationError(
            f"tail window holds {len(t)} samples; need >= 20")
    A = np.column_stack([t, np.ones_like(t)])
    coef, res, _, _ = np.linalg.lstsq(A, x, rcond=None)
    slope = float(coef[0])
    n = len(t)
    resid = x - A @ coef
    s2 = float(resid @ resid) / (n - 2) if n > 2 else 0.0
    tbar = t.mean()
    ci = float(np.sqrt(s2 / np.sum((t - tbar) ** 2)))
    dxi = np.diff(x) / np.diff(t)
    min_prime = float(np.min(dxi))
    return SpeedEstimate(c_hat=slope, ci=ci, min_xi_prime=min_prime,
                         stalled=min_prime <= 0.0, window=(float(t[0]), float(t[-1])))


@dataclass
class DichotomyReport:
    """Diverging-vs-bounded classification of a level-track gap."""

    b_low: float
    b_high: float
    classification: str          # "diverging" | "bounded" | "inconclusive"
    slope: float
    final_gap: float
    max_gap: float
    slope_min: float
    bound: float
    suggestion: str | None = None

    def as_dict(self):
        return {"b_low": self.b_low, "b_high": self.b_high,
                "classification": self.classification, "slope": self.slope,
                "final_gap": self.final_gap, "max_gap": self.max_gap,
                "slope_min": self.slope_min, "bound": self.bound,
                "suggestion": self.suggestion}


def gap_dichotomy(traj: RadialTrajectory, b_low: float, b_high: float, *,
                  terrace=None, tail_fraction: float = TAIL_FRACTION,
                  slope_min: float | None = None,
                  bound: float | None = None) -> DichotomyReport:
    """Classify the gap between the tracks of two unstable zeros.

    rho(t) = xi_{b_low}(t) - xi_{b_high}(t) >= 0 (the lower level sits
    further out on a decreasing profile). A terrace floor between the levels
    makes rho diverge with slope ~ the speed gap of the adjacent waves;
    otherwise rho stays bounded. Thresholds: slope_min defaults to 0.2x the
    smallest positive speed gap of the supplied terrace (0.01 absolute when
    no terrace is given); bound defaults to 50 grid cells.
    """
    f = traj.f
    if b_low >= b_high:
        raise ValidationError("need b_low < b_high")
    for b in (b_low, b_high):
        if not any(abs(b - z.location) <= 1e-9 and z.stability == "unstable"
                   for z in f.zeros):
            raise ValidationError(f"{b} is not an unstable zero of f")

    if slope_min is None:
        slope_min = 0.01
        if terrace is not None and terrace.n_waves >= 2:
            gaps = [c2 - c1 for c1, c2 in zip(terrace.speeds, terrace.speeds[1:])
                    if c2 - c1 > 0]
            if gaps:
                slope_min = 0.2 * min(gaps)
    if bound is None:
        bound = 50.0 * traj.grid.dr

    lo = track_level(traj, b_low)
    hi = track_level(traj, b_high)
    start = max(lo.valid_from, hi.valid_from)
    m = (lo.times >= start) & np.isfinite(lo.xi) & np.isfinite(hi.xi)
    t = lo.times[m]
    rho = lo.xi[m] - hi.xi[m]
    t0 = t[-1] - tail_fraction * (t[-1] - t[0])
    sel = t >= t0
    A = np.column_stack([t[sel], np.ones(int(sel.sum()))])
    slope = float(np.linalg.lstsq(A, rho[sel], rcond=None)[0][0])
    final_gap = float(rho[-1])
    max_gap = float(np.max(np.abs(rho)))

    if slope >= slope_min:
        cls, sug = "diverging", None
    elif max_gap <= bound and slope < slope_min:
        cls, sug = "bounded", None
    else:
        cls = "inconclusive"
        sug = (f"gap {max_gap:.3g} exceeds the bound {bound:.3g} while the "
               f"slope {slope:.3g} sits under slope_min {slope_min:.3g}; "
               f"double the horizon and rerun")
    return DichotomyReport(b_low=b_low, b_high=b_high, classification=cls,
                           slope=slope, final_gap=final_gap, max_gap=max_gap,
                           slope_min=slope_min, bound=bound, suggestion=sug)
