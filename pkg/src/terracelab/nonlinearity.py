"""Reaction terms and their structural audit.

A reaction term f is represented either by an ascending-coefficient polynomial
or by a monotone-cubic interpolant through user nodes; both are analytically
differentiable and integrable, which the phase-plane and energy computations
rely on. Construction locates all sign-change roots on a search interval,
classifies them by the sign of f', and extracts the constants the rest of the
package consumes: the propagation target p (top stable zero), the negativity
allowances delta1/delta2 around 0 and p, and the extreme unstable zeros
b_star / b_star_upper inside [0, p].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from terracelab.errors import DegenerateZeroError, RangeError, ResolutionError, ValidationError

TOL_ZERO = 1e-12
TOL_NONDEGEN = 1e-6
SCAN_POINTS = 10_000


@dataclass(frozen=True)
class Zero:
    """A nondegenerate root of f with its linearization."""

    location: float
    derivative: float
    stability: str  # "stable" | "unstable"

    def __post_init__(self):
        expected = "stable" if self.derivative < 0 else "unstable"
        if self.stability != expected:
            raise ValidationError(
                f"zero at {self.location}: stability {self.stability!r} "
                f"inconsistent with f'={self.derivative}"
            )


class PolynomialField:
    """Polynomial reaction term, coefficients in ascending degree."""

    kind = "poly"

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ValidationError("polynomial coefficients must be a nonempty 1-D sequence")
        self._dcoeffs = np.polynomial.polynomial.polyder(self.coeffs)
        self._icoeffs = np.polynomial.polynomial.polyint(self.coeffs)

    @staticmethod
    def _horner(u, coeffs):
        # hot path of the PDE steppers; cheaper than np.polynomial.polyval
        acc = np.full_like(u, coeffs[-1], dtype=float) if np.ndim(u) else float(coeffs[-1])
        for c in coeffs[-2::-1]:
            acc = acc * u + c
        return acc

    def value(self, u):
        return self._horner(u, self.coeffs)

    def derivative(self, u):
        return self._horner(u, self._dcoeffs)

    def integral(self, a, b):
        """Exact integral of f over [a, b]."""
        anti = np.polynomial.polynomial.polyval
        return anti(b, self._icoeffs) - anti(a, self._icoeffs)


class InterpolantField:
    """Monotone-cubic (PCHIP) interpolant through (u, f(u)) nodes; C^1."""

    kind = "nodes"

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
            raise ValidationError("nodes must be an (n, 2) array with n >= 3")
        order = np.argsort(pts[:, 0])
        self.nodes_u = pts[order, 0]
        self.nodes_f = pts[order, 1]
        if np.any(np.diff(self.nodes_u) <= 0):
            raise ValidationError("node abscissae must be strictly increasing")
        self._interp = PchipInterpolator(self.nodes_u, self.nodes_f, extrapolate=True)
        self._dinterp = self._interp.derivative()
        self._iinterp = self._interp.antiderivative()

    def value(self, u):
        return self._interp(u)

    def derivative(self, u):
        return self._dinterp(u)

    def integral(self, a, b):
        return float(self._iinterp(b) - self._iinterp(a))


def find_zeros(rep, interval, *, scan_points=SCAN_POINTS, tol_zero=TOL_ZERO,
               tol_nondegen=TOL_NONDEGEN, on_degenerate="raise"):
    """Locate all sign-change roots of a reaction-term representation.

    Scans ``interval`` on a uniform grid, brackets sign changes, and refines
    each bracket with Brent's method until |f| <= tol_zero. Each root carries
    the analytic f' and a stable/unstable classification.

    Raises DegenerateZeroError when a root has |f'| < tol_nondegen (unless
    ``on_degenerate='keep'``, in which case degenerate roots are returned in a
    second list), and ResolutionError when two detected roots are closer than
    the scan resolution.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValidationError(f"empty search interval [{lo}, {hi}]")
    grid = np.linspace(lo, hi, scan_points)
    vals = np.asarray(rep.value(grid), dtype=float)
    step = grid[1] - grid[0]

    roots = []
    # grid points that are roots to within tol_zero count as exact hits
    exact = np.abs(vals) <= tol_zero
    for i in np.flatnonzero(exact):
        roots.append(float(grid[i]))
    sign = np.sign(vals)
    sign[exact] = 0.0
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        r = brentq(lambda u: float(rep.value(u)), grid[i], grid[i + 1],
                   xtol=1e-15, rtol=8.9e-16, maxiter=200)
        roots.append(float(r))

    # tangential roots produce no sign change; catch them at extrema of f
    dvals = np.asarray(rep.derivative(grid), dtype=float)
    dsign = np.sign(dvals)
    scale = max(1.0, float(np.max(np.abs(vals))))
    for i in np.flatnonzero(dsign[:-1] * dsign[1:] < 0):
        ext = brentq(lambda u: float(rep.derivative(u)), grid[i], grid[i + 1],
                     xtol=1e-15, rtol=8.9e-16, maxiter=200)
        if abs(float(rep.value(ext))) <= tol_zero * scale * 100:
            roots.append(float(ext))

    roots = sorted(roots)
    # collapse duplicates from exact hits adjacent to brackets
    merged = []
    for r in roots:
        if merged and abs(r - merged[-1]) <= 10 * tol_zero + 1e-14 * max(1.0, abs(r)):
            continue
        merged.append(r)
    for a, b in zip(merged, merged[1:]):
        if b - a < step:
            raise ResolutionError(
                f"roots {a} and {b} closer than scan resolution {step:.3e}; "
                f"rerun with a finer scan grid"
            )

    good, degenerate = [], []
    for r in merged:
        # one Newton polish pass guards against brentq stopping on xtol
        fr = float(rep.value(r))
        dfr = float(rep.derivative(r))
        if abs(dfr) > 0 and abs(fr) > tol_zero:
            r = r - fr / dfr
            fr = float(rep.value(r))
            dfr = float(rep.derivative(r))
        if abs(dfr) < tol_nondegen:
            degenerate.append((r, dfr))
            continue
        good.append(Zero(r, dfr, "stable" if dfr < 0 else "unstable"))

    if degenerate and on_degenerate == "raise":
        locs = ", ".join(f"{r:.6g} (f'={d:.2e})" for r, d in degenerate)
        raise DegenerateZeroError(f"degenerate zero(s) found: {locs}")
    if on_degenerate == "keep":
        return good, degenerate
    return good


class Nonlinearity:
    """Evaluable reaction term with its structural data.

    Immutable after construction; safe to share across threads.

    Attributes:
        field: underlying PolynomialField or InterpolantField
        search_interval: (u_lo, u_hi) scanned for roots
        zeros: sorted nondegenerate roots
        p: top stable zero (propagation target), or None
        delta1: f > 0 on [-delta1, 0)
        delta2: f < 0 on (p, p+delta2]; math.inf when f < 0 everywhere above p
        b_star, b_star_upper: smallest / largest unstable zero in [0, p]
    """

    def __init__(self, field_obj, search_interval=None, *, scan_points=SCAN_POINTS,
                 tol_zero=TOL_ZERO, tol_nondegen=TOL_NONDEGEN):
        self.field = field_obj
        if search_interval is None:
            search_interval = self._default_interval(field_obj)
        self.search_interval = (float(search_interval[0]), float(search_interval[1]))
        self.tol_zero = tol_zero
        self.tol_nondegen = tol_nondegen
        self.scan_points = scan_points
        self.zeros, self.degenerate_zeros = find_zeros(
            field_obj, self.search_interval, scan_points=scan_points,
            tol_zero=tol_zero, tol_nondegen=tol_nondegen, on_degenerate="keep")
        self._extract_constants()

    # -- constructors ----------------------------------------------------

    @classmethod
    def from_poly(cls, coeffs, search_interval=None, **kw):
        return cls(PolynomialField(coeffs), search_interval, **kw)

    @classmethod
    def from_nodes(cls, points, search_interval=None, **kw):
        return cls(InterpolantField(points), search_interval, **kw)

    @staticmethod
    def _default_interval(field_obj):
        if field_obj.kind == "nodes":
            return (field_obj.nodes_u[0], field_obj.nodes_u[-1])
        roots = np.polynomial.polynomial.polyroots(field_obj.coeffs)
        real = roots.real[np.abs(roots.imag) < 1e-9]
        if real.size == 0:
            return (-1.0, 1.0)
        return (float(real.min()) - 0.5, float(real.max()) + 0.5)

    # -- evaluation --------------------------------------------------------

    def evaluate(self, u):
        """Value and analytic derivative of f at u (scalar or array).

        u must lie within [u_lo - 1, u_hi + 1]; outside raises RangeError.
        """
        arr = np.asarray(u, dtype=float)
        lo, hi = self.search_interval
        if np.any(arr < lo - 1.0) or np.any(arr > hi + 1.0):
            raise RangeError(f"u outside evaluation range [{lo - 1.0}, {hi + 1.0}]")
        val = self.field.value(arr)
        der = self.field.derivative(arr)
        if arr.ndim == 0:
            return float(val), float(der)
        return np.asarray(val, dtype=float), np.asarray(der, dtype=float)

    def __call__(self, u):
        return self.evaluate(u)[0]

    def fprime(self, u):
        return self.evaluate(u)[1]

    # -- structural data ---------------------------------------------------

    def _extract_constants(self):
        stable = [z for z in self.zeros if z.stability == "stable"]
        positive_stable = [z for z in stable if z.location > self.tol_zero * 10]
        self.p = max((z.location for z in positive_stable), default=None)

        self.b_star = None
        self.b_star_upper = None
        if self.p is not None:
            unstable_in = [z.location for z in self.zeros
                           if z.stability == "unstable" and -1e-12 <= z.location <= self.p + 1e-12]
            if unstable_in:
                self.b_star = min(unstable_in)
                self.b_star_upper = max(unstable_in)

        self.delta1 = self._negativity_allowance_below_zero()
        self.delta2 = self._negativity_allowance_above_p()

    def _negativity_allowance_below_zero(self):
        lo = self.search_interval[0]
        if lo >= 0:
            return 0.0
        below = [z.location for z in self.zeros if z.location < -self.tol_zero * 10]
        below += [r for r, _ in self.degenerate_zeros if r < -self.tol_zero * 10]
        edge = max(below) if below else lo
        # shave the endpoint so f > 0 holds on the closed-left interval
        d = 0.99 * (0.0 - edge) if below else (0.0 - lo)
        if d <= 0:
            return 0.0
        probe = np.linspace(-d, -d * 1e-4, 64)
        if np.any(self.field.value(probe) <= 0):
            return 0.0
        return float(d)

    def _negativity_allowance_above_p(self):
        if self.p is None:
            return 0.0
        hi = self.search_interval[1]
        above = [z.location for z in self.zeros if z.location > self.p + self.tol_zero * 10]
        above += [r for r, _ in self.degenerate_zeros if r > self.p + self.tol_zero * 10]
        if not above:
            probe = np.linspace(self.p + 1e-6 * max(1.0, self.p), hi, 256)
            if probe[-1] <= probe[0] or np.any(self.field.value(probe) >= 0):
                return 0.0
            return math.inf
        d = 0.99 * (min(above) - self.p)
        probe = np.linspace(self.p + d * 1e-4, self.p + d, 64)
        if np.any(self.field.value(probe) >= 0):
            return 0.0
        return float(d)

    def stable_zeros(self):
        return [z.location for z in self.zeros if z.stability == "stable"]

    def unstable_zeros(self):
        return [z.location for z in self.zeros if z.stability == "unstable"]

    def integral(self, a, b):
        """Analytic integral of f over [a, b]."""
        return float(self.field.integral(a, b))

    def is_stable_zero(self, q, tol=1e-9):
        return any(z.stability == "stable" and abs(z.location - q) <= tol for z in self.zeros)

    def describe(self):
        """JSON-ready structural summary."""
        return {
            "kind": self.field.kind,
            "search_interval": list(self.search_interval),
            "zeros": [
                {"location": z.location, "derivative": z.derivative, "stability": z.stability}
                for z in self.zeros
            ],
            "degenerate_zeros": [
                {"location": r, "derivative": d} for r, d in self.degenerate_zeros
            ],
            "p": self.p,
            "b_star": self.b_star,
            "b_star_upper": self.b_star_upper,
            "delta1": self.delta1,
            "delta2": None if math.isinf(self.delta2) else self.delta2,
            "delta2_infinite": math.isinf(self.delta2),
        }


def energy_condition(f: Nonlinearity, q_bot: float, q_top: float):
    """Check the energy bias that makes q_top invade q_bot.

    With F(u) = integral of f from q_bot to u, the condition holds iff
    F(q_top) > F(u) for every u in [q_bot, q_top). Since F' = f, the interior
    supremum is attained at zeros of f only, so the check is exact up to the
    root locations. Returns (holds, margin) with
    margin = F(q_top) - sup_{[q_bot, q_top)} F.
    """
    if not q_bot < q_top:
        raise ValidationError(f"need q_bot < q_top, got ({q_bot}, {q_top})")
    if not (f.is_stable_zero(q_bot) and f.is_stable_zero(q_top)):
        raise ValidationError("energy condition endpoints must be stable zeros of f")
    f_top = f.integral(q_bot, q_top)
    edge = 1e-9 * max(1.0, abs(q_top), abs(q_bot))
    interior = [z.location for z in f.zeros
                if q_bot + edge < z.location < q_top - edge]
    sup_interior = 0.0  # F(q_bot) = 0 is always a competitor
    for z in interior:
        sup_interior = max(sup_interior, f.integral(q_bot, z))
    margin = f_top - sup_interior
    return margin > 0.0, float(margin)


@dataclass
class AssumptionReport:
    """Outcome of the structural audit of a reaction term."""

    f1: bool
    f2: bool
    f3: bool
    p: float | None
    b_star: float | None
    b_star_upper: float | None
    delta1: float
    delta2: float
    gamma_margin: float | None
    tol_nondegen: float
    messages: list = field(default_factory=list)

    @property
    def all_pass(self):
        return self.f1 and self.f2 and self.f3

    def as_dict(self):
        return {
            "f1_nondegenerate_zeros": self.f1,
            "f2_zero_stable_at_origin": self.f2,
            "f3_target_exists_with_energy_bias": self.f3,
            "p": self.p,
            "b_star": self.b_star,
            "b_star_upper": self.b_star_upper,
            "delta1": self.delta1,
            "delta2": None if math.isinf(self.delta2) else self.delta2,
            "delta2_infinite": math.isinf(self.delta2),
            "gamma_margin": self.gamma_margin,
            "tol_nondegen": self.tol_nondegen,
            "messages": self.messages,
        }


def check_assumptions(f: Nonlinearity) -> AssumptionReport:
    """Audit the multistability assumptions; failures go in the report.

    f1: every root located is nondegenerate. f2: f(0) = 0 with f'(0) < 0.
    f3: a top stable zero p > 0 exists and the energy condition over (0, p)
    holds. The nondegeneracy gate tol_nondegen is a numerical choice (the
    theory fixes none) and is echoed in the report.
    """
    messages = []

    f1 = not f.degenerate_zeros
    if not f1:
        messages.append(f"degenerate zeros at {[r for r, _ in f.degenerate_zeros]}")

    origin = [z for z in f.zeros if abs(z.location) <= 1e-9]
    f2 = bool(origin) and origin[0].stability == "stable"
    if not f2:
        messages.append("f(0)=0 with f'(0)<0 not satisfied")

    f3 = False
    gamma_margin = None
    if f.p is not None and f2:
        zero_floor = origin[0].location
        try:
            f3, gamma_margin = energy_condition(f, zero_floor, f.p)
        except ValidationError as exc:
            messages.append(str(exc))
        if not f3:
            messages.append(
                f"energy condition over (0, {f.p}) fails (margin {gamma_margin})")
    elif f.p is None:
        messages.append("no positive stable zero found")

    # transversal roots must alternate in stability
    for a, b in zip(f.zeros, f.zeros[1:]):
        if a.stability == b.stability:
            messages.append(
                f"consecutive zeros {a.location}, {b.location} share stability "
                f"(a root was likely missed; refine the scan)")
            break

    return AssumptionReport(
        f1=f1, f2=f2, f3=f3, p=f.p, b_star=f.b_star, b_star_upper=f.b_star_upper,
        delta1=f.delta1, delta2=f.delta2, gamma_margin=gamma_margin,
        tol_nondegen=f.tol_nondegen, messages=messages)


def cubic(a: float) -> Nonlinearity:
    """The bistable cubic u(1-u)(u-a), ascending coefficients [0, -a, 1+a, -1]."""
    return Nonlinearity.from_poly([0.0, -a, 1.0 + a, -1.0], (-0.5, 1.5))


def quintic(b1: float = 0.15, q_mid: float = 0.5, b2: float = 0.6, scale: float = -8.0) -> Nonlinearity:
    """Tristable quintic scale*u*(u-b1)*(u-q_mid)*(u-b2)*(u-1)."""
    c = np.polynomial.polynomial.polyfromroots([0.0, b1, q_mid, b2, 1.0]) * scale
    return Nonlinearity.from_poly(c, (-0.5, 1.5))
