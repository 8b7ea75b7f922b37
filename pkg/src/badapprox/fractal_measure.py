"""Self-similar Cantor sets in [0, 1] given by separated affine IFSs, with exact
support queries, cylinder mass bounds and power-law certificates.

The natural measure gives every branch equal weight, so cylinder masses are
exact rationals ``m**-depth``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from .exact_arith import (
    Exponent,
    RatInterval,
    _ivprec,
    as_fraction,
    frac_str,
    iv,
    iv_of,
    iv_to_interval,
    rpow,
)

UNIT = RatInterval(Fraction(0), Fraction(1))


@dataclass(frozen=True)
class Window:
    """Interval with optionally open ends (used for support queries)."""

    lo: Fraction
    hi: Fraction
    lo_open: bool = False
    hi_open: bool = False

    @classmethod
    def closed(cls, iv_: RatInterval) -> "Window":
        return cls(iv_.lo, iv_.hi)

    def __contains__(self, x) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if self.lo_open and x == self.lo:
            return False
        if self.hi_open and x == self.hi:
            return False
        return True

    def meets(self, iv_: RatInterval) -> bool:
        lo_ok = iv_.hi > self.lo if self.lo_open else iv_.hi >= self.lo
        hi_ok = iv_.lo < self.hi if self.hi_open else iv_.lo <= self.hi
        return lo_ok and hi_ok

    def holds(self, iv_: RatInterval) -> bool:
        return iv_.lo in self and iv_.hi in self

    @property
    def empty(self) -> bool:
        return self.lo > self.hi or (self.lo == self.hi and (self.lo_open or self.hi_open))


def _as_window(window) -> Window:
    if isinstance(window, Window):
        return window
    return Window.closed(window)


@dataclass(frozen=True)
class PowerLawCert:
    """Constants with ``b1 r**beta <= mu(B(x, r)) <= b2 r**beta`` on the support."""

    beta: Exponent
    b1: Fraction
    b2: Fraction

    def __post_init__(self):
        if not isinstance(self.beta, Exponent):
            object.__setattr__(self, "beta", Exponent.rational(self.beta))
        object.__setattr__(self, "b1", as_fraction(self.b1))
        object.__setattr__(self, "b2", as_fraction(self.b2))

    @property
    def valid(self) -> bool:
        beta = self.beta.enclose(32)
        return 0 < self.b1 <= self.b2 and beta.lo > 0 and beta.hi <= 1

    @property
    def ratio(self) -> Fraction:
        return self.b2 / self.b1

    def to_json(self) -> dict:
        return {"beta": str(self.beta), "b1": frac_str(self.b1), "b2": frac_str(self.b2)}


@dataclass(frozen=True)
class Cylinder:
    word: tuple[int, ...]
    interval: RatInterval
    mass: Fraction


@dataclass(frozen=True)
class IFS:
    """Affine contractions ``x -> ratio * x + offset`` with disjoint images."""

    maps: tuple[tuple[Fraction, Fraction], ...]
    separation: Fraction = field(init=False)
    hull: RatInterval = field(init=False)

    def __post_init__(self):
        maps = tuple(sorted((as_fraction(r), as_fraction(b)) for r, b in self.maps))
        maps = tuple(sorted(maps, key=lambda m: m[1]))
        if not maps:
            raise ValueError("IFS needs at least one map")
        for r, b in maps:
            if not 0 < r < 1:
                raise ValueError(f"ratio {r} outside (0, 1)")
            if b < 0 or b + r > 1:
                raise ValueError(f"image of map ({r}, {b}) leaves [0, 1]")
        gaps = [maps[k + 1][1] - (maps[k][1] + maps[k][0]) for k in range(len(maps) - 1)]
        if any(g <= 0 for g in gaps):
            raise ValueError("IFS images overlap or touch")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "separation", min(gaps) if gaps else Fraction(1))
        # extreme points of the attractor: fixed points of the outer maps
        r0, b0 = maps[0]
        r1, b1 = maps[-1]
        object.__setattr__(self, "hull", RatInterval(b0 / (1 - r0), b1 / (1 - r1)))

    @classmethod
    def parse(cls, text: str) -> "IFS":
        """``"ratio,offset;ratio,offset"``."""
        pairs = []
        for chunk in text.split(";"):
            if chunk.strip():
                r, b = chunk.split(",")
                pairs.append((Fraction(r.strip()), Fraction(b.strip())))
        return cls(tuple(pairs))

    def __str__(self) -> str:
        return ";".join(f"{frac_str(r)},{frac_str(b)}" for r, b in self.maps)

    @property
    def m(self) -> int:
        return len(self.maps)

    @property
    def ratio_max(self) -> Fraction:
        return max(r for r, _ in self.maps)

    @property
    def ratio_min(self) -> Fraction:
        return min(r for r, _ in self.maps)

    def image(self, idx: int, iv_: RatInterval) -> RatInterval:
        r, b = self.maps[idx]
        return RatInterval(r * iv_.lo + b, r * iv_.hi + b)

    def root(self) -> Cylinder:
        return Cylinder((), self.hull, Fraction(1))

    def sub_interval(self, idx: int, parent: RatInterval) -> RatInterval:
        """Image of f_idx(hull) under the affine map taking hull onto ``parent``."""
        h = self.hull
        rho = parent.width / h.width
        img = self.image(idx, h)
        return RatInterval(parent.lo + rho * (img.lo - h.lo), parent.lo + rho * (img.hi - h.lo))

    def children(self, cyl: Cylinder) -> list[Cylinder]:
        w = Fraction(1, self.m)
        return [Cylinder(cyl.word + (k,), self.sub_interval(k, cyl.interval), cyl.mass * w) for k in range(self.m)]

    def cylinders(self, depth: int) -> Iterator[Cylinder]:
        level = [self.root()]
        for _ in range(depth):
            level = [ch for c in level for ch in self.children(c)]
        return iter(level)

    def apply_word(self, word: Sequence[int], x: Fraction) -> Fraction:
        for k in reversed(word):
            r, b = self.maps[k]
            x = r * x + b
        return x

    def periodic_point(self, prefix: Sequence[int], period: Sequence[int]) -> Fraction:
        """The attractor point with address prefix + period repeated."""
        # composite f_{p1} o ... o f_{pk} as x -> r x + b
        r, b = Fraction(1), Fraction(0)
        for k in period:
            rk, bk = self.maps[k]
            r, b = r * rk, r * bk + b
        fix = b / (1 - r)
        return self.apply_word(prefix, fix)

    # ---- support queries ----------------------------------------------

    def contains(self, x, max_steps: int = 100_000) -> bool:
        """Exact attractor membership of a rational x via its inverse orbit."""
        x = as_fraction(x)
        seen = set()
        for _ in range(max_steps):
            if x not in self.hull:
                return False
            if x in seen:
                return True
            seen.add(x)
            for r, b in self.maps:
                lo, hi = b + r * self.hull.lo, b + r * self.hull.hi
                if lo <= x <= hi:
                    x = (x - b) / r
                    break
            else:
                return False
        raise RuntimeError("membership undecided: inverse orbit did not cycle")

    def support_point_in(self, window, max_depth: int = 4000) -> Optional[Fraction]:
        """A point of the attractor inside ``window`` or None."""
        win = _as_window(window)
        if win.empty:
            return None
        if win.lo == win.hi:
            return win.lo if self.contains(win.lo) else None
        stack = [self.root()]
        while stack:
            cyl = stack.pop()
            if not win.meets(cyl.interval):
                continue
            if cyl.interval.lo in win:
                return cyl.interval.lo
            if cyl.interval.hi in win:
                return cyl.interval.hi
            if len(cyl.word) >= max_depth:
                raise RuntimeError("support search exceeded depth limit")
            stack.extend(reversed(self.children(cyl)))
        return None

    def support_net(self, window: RatInterval, resolution: Fraction) -> list[Fraction]:
        """Support points in ``window`` forming a ``resolution``-net of supp(mu) there.

        Returns one point per cylinder of width <= resolution meeting the window,
        in increasing order.
        """
        win = _as_window(window)
        out = []
        stack = [self.root()]
        while stack:
            cyl = stack.pop()
            iv_ = cyl.interval
            if not win.meets(iv_):
                continue
            if iv_.width <= resolution:
                if iv_.lo in win:
                    out.append(iv_.lo)
                elif iv_.hi in win:
                    out.append(iv_.hi)
                else:
                    lo, hi = max(iv_.lo, win.lo), min(iv_.hi, win.hi)
                    p = self.support_point_in(Window(lo, hi, win.lo_open and lo == win.lo, win.hi_open and hi == win.hi))
                    if p is not None:
                        out.append(p)
                continue
            stack.extend(reversed(self.children(cyl)))
        return sorted(set(out))

    def mass_bounds(self, window, depth: int) -> tuple[Fraction, Fraction]:
        """Lower/upper bounds of mu(window) from cylinders at ``depth``."""
        win = _as_window(window)
        lower = upper = Fraction(0)
        stack = [self.root()]
        while stack:
            cyl = stack.pop()
            if not win.meets(cyl.interval):
                continue
            if win.holds(cyl.interval):
                lower += cyl.mass
                upper += cyl.mass
            elif len(cyl.word) >= depth:
                upper += cyl.mass
            else:
                stack.extend(self.children(cyl))
        return lower, upper

    def sample_point(self, rng: random.Random, depth: int) -> Fraction:
        prefix = [rng.randrange(self.m) for _ in range(depth)]
        period = [rng.randrange(self.m) for _ in range(rng.randint(1, 3))]
        return self.periodic_point(prefix, period)

    @property
    def natural_scale(self) -> Fraction:
        return 1 / self.ratio_max


QUARTER = IFS(((Fraction(1, 4), Fraction(0)), (Fraction(1, 4), Fraction(3, 4))))
CANTOR = IFS(((Fraction(1, 3), Fraction(0)), (Fraction(1, 3), Fraction(2, 3))))


@dataclass(frozen=True)
class FullInterval:
    """Lebesgue measure on [0, 1] exposing the same query interface as IFS."""

    hull: RatInterval = UNIT

    def contains(self, x) -> bool:
        return x in self.hull

    def support_point_in(self, window, max_depth: int = 0) -> Optional[Fraction]:
        win = _as_window(window)
        lo, hi = max(win.lo, Fraction(0)), min(win.hi, Fraction(1))
        lo_open = win.lo_open and lo == win.lo
        hi_open = win.hi_open and hi == win.hi
        w = Window(lo, hi, lo_open, hi_open)
        if w.empty:
            return None
        if lo_open or hi_open:
            return (lo + hi) / 2
        return lo

    def support_net(self, window: RatInterval, resolution: Fraction) -> list[Fraction]:
        lo, hi = max(window.lo, Fraction(0)), min(window.hi, Fraction(1))
        if lo > hi:
            return []
        out, x = [], lo
        while x < hi:
            out.append(x)
            x += resolution
        out.append(hi)
        return out

    def mass_bounds(self, window, depth: int = 0) -> tuple[Fraction, Fraction]:
        win = _as_window(window)
        lo, hi = max(win.lo, Fraction(0)), min(win.hi, Fraction(1))
        m = max(hi - lo, Fraction(0))
        return m, m

    def sample_point(self, rng: random.Random, depth: int) -> Fraction:
        return Fraction(rng.randrange(1 << 32), 1 << 32)


def moran_exponent(ifs: IFS, tol=Fraction(1, 10**9)) -> Exponent:
    """Solution beta of sum(ratio**beta) = 1 (exact or enclosed to ``tol``)."""
    tol = as_fraction(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not ifs.maps:
        raise ValueError("empty IFS")
    if ifs.m == 1:
        raise ValueError("single-map IFS has a one-point attractor (beta = 0)")
    ratios = [r for r, _ in ifs.maps]
    if len(set(ratios)) == 1 and ratios[0].numerator == 1:
        return Exponent.log_ratio(ifs.m, ratios[0].denominator)

    def moran_sum(beta: Fraction):
        prec = 4 * max(tol.denominator.bit_length(), 64)
        with _ivprec(prec):
            b = iv_of(beta, prec)
            total = iv.mpf(0)
            for r in ratios:
                total += iv.exp(b * iv.log(iv_of(r, prec)))
            return iv_to_interval(total)

    lo, hi = Fraction(0), Fraction(1)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        s = moran_sum(mid)
        if s.lo > 1:
            lo = mid
        elif s.hi < 1:
            hi = mid
        else:
            break
    return Exponent.enclosed(RatInterval(lo, hi))


@dataclass
class PowerLawSample:
    x: Fraction
    r: Fraction
    lower: Fraction
    upper: Fraction
    verdict: str  # pass | fail | inconclusive


@dataclass
class PowerLawReport:
    samples: list[PowerLawSample]

    @property
    def passed(self) -> bool:
        return all(s.verdict == "pass" for s in self.samples)

    @property
    def failed(self) -> bool:
        return any(s.verdict == "fail" for s in self.samples)

    @property
    def first_violation(self) -> Optional[PowerLawSample]:
        return next((s for s in self.samples if s.verdict == "fail"), None)

    def counts(self) -> dict:
        out = {"pass": 0, "fail": 0, "inconclusive": 0}
        for s in self.samples:
            out[s.verdict] += 1
        return out


def judge_power_law(lower: Fraction, upper: Fraction, r: Fraction, cert: PowerLawCert, bits: int = 96) -> str:
    """Three-valued check of ``b1 r^beta <= mass <= b2 r^beta`` given mass bounds."""
    rb = rpow(r, cert.beta, bits)
    if upper < cert.b1 * rb.lo or lower > cert.b2 * rb.hi:
        return "fail"
    if lower >= cert.b1 * rb.hi and upper <= cert.b2 * rb.lo:
        return "pass"
    return "inconclusive"


def sample_radii(scale: Fraction, depth: int) -> list[Fraction]:
    """Radii scale**-n usable at cylinder depth ``depth`` (keeps 3 levels of slack)."""
    top = max(1, depth - 3)
    return [Fraction(1) / scale**n for n in range(1, top + 1)]


def verify_power_law(measure, cert: PowerLawCert, samples: int, depth: int, seed: int = 0, scale=None) -> PowerLawReport:
    """Check the power law on seeded support points x and radii scale**-n."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = random.Random(seed)
    scale = as_fraction(scale) if scale is not None else measure.natural_scale
    radii = sample_radii(scale, depth)
    out = []
    for _ in range(samples):
        x = measure.sample_point(rng, depth)
        r = rng.choice(radii)
        if cert.b2 <= 0 or cert.b1 < 0:
            out.append(PowerLawSample(x, r, Fraction(0), Fraction(1), "fail"))
            break
        lower, upper = measure.mass_bounds(RatInterval.ball(x, r), depth)
        out.append(PowerLawSample(x, r, lower, upper, judge_power_law(lower, upper, r, cert)))
    return PowerLawReport(out)


def natural_cert(ifs: IFS, b1=Fraction(1, 2), b2=Fraction(4)) -> PowerLawCert:
    return PowerLawCert(moran_exponent(ifs), b1, b2)
