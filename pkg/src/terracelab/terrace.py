"""Terrace assembly from pairwise fronts.

The terrace connecting p to 0 is the unique chain of stable zeros
p = q_0 > q_1 > ... > q_n = 0 coupled with monotone fronts of nondecreasing
speeds. Uniqueness makes clever search pointless: we compute the front (or
its absence) for every ordered pair of stable zeros whose energy condition
holds, enumerate all descending chains by brute force, and keep the chains
whose speeds are nondecreasing. Exactly one must survive; anything else
signals a numerical tie or a broken front table.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from terracelab.errors import AmbiguityError, DecompositionError, ValidationError
from terracelab.front import WaveProfile, find_front
from terracelab.nonlinearity import Nonlinearity, check_assumptions, energy_condition

TOL_SPEED = 1e-6


@dataclass
class Terrace:
    """Ordered stack of fronts from p down to 0.

    floors descend from p to 0; wave k connects floors[k] (top) to
    floors[k+1] (bottom); speeds are strictly positive and nondecreasing.
    """

    floors: list[float]
    waves: list[WaveProfile]

    @property
    def speeds(self):
        return [w.c for w in self.waves]

    @property
    def n_waves(self):
        return len(self.waves)

    def validate(self, f: Nonlinearity, tol_speed: float = TOL_SPEED):
        if len(self.floors) != len(self.waves) + 1:
            raise ValidationError("floor/wave count mismatch")
        for q in self.floors:
            if not f.is_stable_zero(q, tol=1e-6):
                raise ValidationError(f"floor {q} is not a stable zero")
        for k, w in enumerate(self.waves):
            if abs(w.q_top - self.floors[k]) > 1e-9 or abs(w.q_bot - self.floors[k + 1]) > 1e-9:
                raise ValidationError(f"wave {k} endpoints disagree with floors")
            if w.c <= 0:
                raise ValidationError(f"wave {k} has nonpositive speed {w.c}")
        for c_up, c_dn in zip(self.speeds, self.speeds[1:]):
            if c_dn < c_up - tol_speed:
                raise ValidationError(f"speeds decrease along the stack: {self.speeds}")

    def wave_for_level(self, a: float) -> int:
        """Index of the wave whose value range contains the level a."""
        for k, w in enumerate(self.waves):
            if w.q_bot < a < w.q_top:
                return k
        raise ValidationError(f"level {a} is not interior to any wave")

    def as_dict(self):
        return {
            "floors": list(self.floors),
            "speeds": self.speeds,
            "waves": [
                {"q_top": w.q_top, "q_bot": w.q_bot, "c": w.c, "residual": w.residual}
                for w in self.waves
            ],
        }


def pairwise_fronts(f: Nonlinearity, *, workers: int = 1):
    """Front (or None) for every ordered pair of stable zeros in [0, p].

    Pairs failing the energy condition are recorded with status
    "no-energy-bias" and skipped. Returns a dict keyed by (q_top, q_bot) and
    a JSON-ready table of attempts.
    """
    if f.p is None:
        raise ValidationError("no propagation target p; run check_assumptions first")
    stables = sorted((q for q in f.stable_zeros() if -1e-9 <= q <= f.p + 1e-9),
                     reverse=True)
    pairs = [(qt, qb) for i, qt in enumerate(stables) for qb in stables[i + 1:]]

    def attempt(pair):
        qt, qb = pair
        if not energy_condition(f, qb, qt)[0]:
            return pair, None, "no-energy-bias"
        wave = find_front(f, qt, qb)
        return pair, wave, ("front" if wave is not None else "no-direct-front")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(attempt, pairs))
    else:
        results = [attempt(p) for p in pairs]

    fronts = {}
    table = []
    for pair, wave, status in results:
        fronts[pair] = wave
        table.append({
            "q_top": pair[0], "q_bot": pair[1], "status": status,
            "c": None if wave is None else wave.c,
        })
    return fronts, table


def _admissible_chains(stables_desc, fronts, tol_speed):
    """All descending chains p -> 0 with fronts and nondecreasing speeds."""
    top, bottom = stables_desc[0], stables_desc[-1]
    chains = []

    def extend(chain, speeds):
        head = chain[-1]
        if abs(head - bottom) < 1e-12:
            chains.append((list(chain), list(speeds)))
            return
        for nxt in stables_desc:
            if nxt >= head - 1e-12:
                continue
            w = fronts.get((head, nxt))
            if w is None:
                continue
            if speeds and w.c < speeds[-1] - tol_speed:
                continue
            chain.append(nxt)
            speeds.append(w.c)
            extend(chain, speeds)
            chain.pop()
            speeds.pop()

    extend([top], [])
    return chains


def decompose(f: Nonlinearity, *, tol_speed: float = TOL_SPEED, workers: int = 1) -> Terrace:
    """Assemble the unique terrace connecting p to 0.

    Requires the structural assumptions to pass. Raises DecompositionError
    when no admissible chain exists (suspect front table; the pair table is
    attached) and AmbiguityError when several chains survive, which the
    uniqueness theory forbids and therefore flags a numerical speed tie.
    """
    report = check_assumptions(f)
    if not report.all_pass:
        raise ValidationError(f"assumptions fail: {report.messages}")

    fronts, table = pairwise_fronts(f, workers=workers)
    stables = sorted((q for q in f.stable_zeros() if -1e-9 <= q <= f.p + 1e-9),
                     reverse=True)
    chains = _admissible_chains(stables, fronts, tol_speed)

    if not chains:
        raise DecompositionError(
            "no admissible chain of fronts from p to 0", pair_table=table)
    if len(chains) > 1:
        raise AmbiguityError(
            f"{len(chains)} admissible chains found (numerical speed tie?)",
            chains=[c for c, _ in chains])

    floors, _ = chains[0]
    waves = [fronts[(qt, qb)] for qt, qb in zip(floors, floors[1:])]
    terrace = Terrace(floors=floors, waves=waves)
    terrace.validate(f, tol_speed)
    terrace.pair_table = table
    return terrace


@dataclass
class OrderReport:
    """Speed-ordering audit around a three-floor configuration."""

    q_top: float
    q_mid: float
    q_bot: float
    c_direct: float
    c_upper: float | None   # speed of q_top -> q_mid, must exceed c_direct
    c_lower: float | None   # speed of q_mid -> q_bot, must trail c_direct
    tol: float
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(ok for _, ok in self.checks)

    def as_dict(self):
        return {
            "q_top": self.q_top, "q_mid": self.q_mid, "q_bot": self.q_bot,
            "c_direct": self.c_direct, "c_upper": self.c_upper, "c_lower": self.c_lower,
            "tol": self.tol,
            "checks": [{"name": n, "passed": ok} for n, ok in self.checks],
            "passed": self.passed,
        }


def speed_order_check(f: Nonlinearity, q_top: float, q_mid: float, q_bot: float,
                      *, tol: float = TOL_SPEED) -> OrderReport:
    """Verify the partial-front speed ordering around a direct connection.

    With a direct front q_top -> q_bot of speed c, any front q_top -> q_mid
    must be strictly faster and any front q_mid -> q_bot strictly slower.
    Both partial checks are vacuous when the corresponding front is absent.
    """
    if not q_top > q_mid > q_bot:
        raise ValidationError("need q_top > q_mid > q_bot")
    direct = find_front(f, q_top, q_bot)
    if direct is None:
        raise ValidationError(
            f"no direct front {q_top} -> {q_bot}; the ordering check needs one")
    upper = find_front(f, q_top, q_mid)
    lower = find_front(f, q_mid, q_bot)

    checks = []
    if upper is not None:
        checks.append(("c_upper > c_direct", upper.c > direct.c + tol))
    if lower is not None:
        checks.append(("c_lower < c_direct", lower.c < direct.c - tol))
    return OrderReport(
        q_top=q_top, q_mid=q_mid, q_bot=q_bot, c_direct=direct.c,
        c_upper=None if upper is None else upper.c,
        c_lower=None if lower is None else lower.c,
        tol=tol, checks=checks)
