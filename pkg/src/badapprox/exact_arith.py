"""Exact rational arithmetic, rational intervals, continued fractions and
lazily refined enclosures of the few irrational quantities the engine needs.

Every predicate in the package is decided either exactly on rationals or on
rational enclosures that are refined until the answer is certain.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Optional, Union

import gmpy2
from mpmath import iv, mpf
from mpmath.libmp import from_rational, to_rational

Rational = Fraction
Number = Union[int, Fraction]

#: hard cap on enclosure refinement; beyond it a decision is reported inconclusive
MAX_BITS = 4096


class InconclusiveError(ArithmeticError):
    """An enclosure could not be refined far enough to decide a predicate."""


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and ``"num/den"`` / decimal strings to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact values")
    return Fraction(value)


def frac_str(x: Fraction) -> str:
    x = as_fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def floor_frac(x: Fraction) -> int:
    return x.numerator // x.denominator


def ceil_frac(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def nearest_int_dist(x: Number) -> Fraction:
    """Distance from ``x`` to the nearest integer, in [0, 1/2]."""
    x = as_fraction(x)
    f = x - floor_frac(x)
    return min(f, 1 - f)


def mpf_to_fraction(x: mpf) -> Fraction:
    return Fraction(*to_rational(x._mpf_))


# ----------------------------------------------------------------------------
# intervals


@dataclass(frozen=True, order=True)
class RatInterval:
    """Closed interval ``[lo, hi]`` with rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def ball(cls, center: Number, radius: Number) -> "RatInterval":
        center, radius = as_fraction(center), as_fraction(radius)
        return cls(center - radius, center + radius)

    @classmethod
    def point(cls, x: Number) -> "RatInterval":
        return cls(x, x)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def center(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def radius(self) -> Fraction:
        return self.width / 2

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "RatInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersects(self, other: "RatInterval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def intersection(self, other: "RatInterval") -> Optional["RatInterval"]:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return RatInterval(lo, hi) if lo <= hi else None

    def dilate(self, factor: Number) -> "RatInterval":
        """``factor * I``: same center, radius scaled."""
        return RatInterval.ball(self.center, self.radius * as_fraction(factor))

    def __add__(self, other: "RatInterval") -> "RatInterval":
        return RatInterval(self.lo + other.lo, self.hi + other.hi)

    def scale(self, k: Number) -> "RatInterval":
        k = as_fraction(k)
        a, b = self.lo * k, self.hi * k
        return RatInterval(min(a, b), max(a, b))

    def shift(self, t: Number) -> "RatInterval":
        t = as_fraction(t)
        return RatInterval(self.lo + t, self.hi + t)

    def to_json(self) -> list:
        return [frac_str(self.lo), frac_str(self.hi)]

    @classmethod
    def from_json(cls, data) -> "RatInterval":
        return cls(as_fraction(data[0]), as_fraction(data[1]))

    def __str__(self) -> str:
        return f"[{frac_str(self.lo)}, {frac_str(self.hi)}]"


def mul_intervals(a: RatInterval, b: RatInterval) -> RatInterval:
    prods = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return RatInterval(min(prods), max(prods))


def dist_to_int_bounds(enc: RatInterval) -> tuple[Fraction, Fraction]:
    """Lower and upper bounds of ``||t||`` for t ranging over ``enc``."""
    lo_int = ceil_frac(enc.lo)
    if lo_int <= enc.hi:
        lower = Fraction(0)
    else:
        lower = min(nearest_int_dist(enc.lo), nearest_int_dist(enc.hi))
    base = floor_frac(enc.lo)
    half = base + Fraction(1, 2)
    if enc.hi - enc.lo >= 1 or (enc.lo <= half <= enc.hi) or (enc.lo <= half + 1 <= enc.hi):
        upper = Fraction(1, 2)
    else:
        upper = max(nearest_int_dist(enc.lo), nearest_int_dist(enc.hi))
    return lower, upper


# ----------------------------------------------------------------------------
# powers


def iroot_floor(n: int, k: int) -> int:
    """floor(n ** (1/k)) for n >= 0."""
    if n < 0:
        raise ValueError("negative radicand")
    r, _ = gmpy2.iroot(gmpy2.mpz(n), k)
    return int(r)


def rational_root_enclosure(x: Fraction, q: int, bits: int) -> RatInterval:
    """Enclosure of ``x ** (1/q)`` for x >= 0 with width <= 2**-bits (exact if perfect)."""
    x = as_fraction(x)
    if q == 1:
        return RatInterval.point(x)
    rn, exact_n = gmpy2.iroot(gmpy2.mpz(x.numerator), q)
    rd, exact_d = gmpy2.iroot(gmpy2.mpz(x.denominator), q)
    if exact_n and exact_d:
        return RatInterval.point(Fraction(int(rn), int(rd)))
    scale = 1 << bits
    k = iroot_floor((x.numerator * scale**q) // x.denominator, q)
    return RatInterval(Fraction(k, scale), Fraction(k + 1, scale))


def pow_enclosure(x: Fraction, e: Fraction, bits: int = 64) -> RatInterval:
    """Enclosure of ``x ** e`` for x > 0 and rational e."""
    x, e = as_fraction(x), as_fraction(e)
    if x <= 0:
        if x == 0 and e > 0:
            return RatInterval.point(Fraction(0))
        raise ValueError("pow_enclosure needs a positive base")
    p, q = e.numerator, e.denominator
    base = x**p
    if q == 1:
        return RatInterval.point(base)
    # root of a number >= 1 keeps relative precision; rescale small bases
    extra = max(0, -(base.numerator.bit_length() - base.denominator.bit_length())) // q + 2
    return rational_root_enclosure(base, q, bits + extra)


def compare_pow(x: Fraction, e: Fraction, y: Fraction) -> int:
    """Sign of ``x**e - y`` for x > 0, y >= 0, rational e (exact)."""
    x, e, y = as_fraction(x), as_fraction(e), as_fraction(y)
    p, q = e.numerator, e.denominator
    if y <= 0:
        return 1
    lhs, rhs = x**p, y**q
    return (lhs > rhs) - (lhs < rhs)


# ----------------------------------------------------------------------------
# exponents: rational, log-ratio or fixed enclosure


@dataclass(frozen=True)
class Exponent:
    """A real exponent ``factor * log(log_num) / log(log_den)``.

    ``log_num``/``log_den`` are both None for plain rationals.  ``fixed`` holds a
    non-refinable enclosure (used for roots of Moran equations found by bisection).
    """

    factor: Fraction = Fraction(1)
    log_num: Optional[int] = None
    log_den: Optional[int] = None
    fixed: Optional[RatInterval] = None

    @classmethod
    def rational(cls, q: Number) -> "Exponent":
        return cls(factor=as_fraction(q))

    @classmethod
    def log_ratio(cls, a: int, b: int) -> "Exponent":
        """log(a)/log(b), simplified to a rational when a and b share a base."""
        if a <= 0 or b <= 1:
            raise ValueError("log ratio needs a > 0 and b > 1")
        if a == 1:
            return cls.rational(0)
        ga, ea = perfect_power(a)
        gb, eb = perfect_power(b)
        if ga == gb:
            return cls.rational(Fraction(ea, eb))
        return cls(factor=Fraction(1), log_num=a, log_den=b)

    @classmethod
    def enclosed(cls, enc: RatInterval) -> "Exponent":
        if enc.width == 0:
            return cls.rational(enc.lo)
        return cls(fixed=enc)

    @property
    def exact(self) -> Optional[Fraction]:
        if self.fixed is None and self.log_num is None:
            return self.factor
        return None

    def scaled(self, k: Number) -> "Exponent":
        k = as_fraction(k)
        if self.fixed is not None:
            return Exponent.enclosed(self.fixed.scale(k))
        return Exponent(self.factor * k, self.log_num, self.log_den)

    def iv(self, prec: int):
        with _ivprec(prec):
            if self.fixed is not None:
                return iv.mpf([mpf_of(self.fixed.lo, prec, "d"), mpf_of(self.fixed.hi, prec, "u")])
            f = iv.mpf(self.factor.numerator) / self.factor.denominator
            if self.log_num is None:
                return f
            return f * iv.log(self.log_num) / iv.log(self.log_den)

    def enclose(self, bits: int = 64) -> RatInterval:
        if self.exact is not None:
            return RatInterval.point(self.exact)
        if self.fixed is not None:
            return self.fixed
        return iv_to_interval(self.iv(bits + 16))

    def __float__(self) -> float:
        e = self.enclose(60)
        return float(e.center)

    def __str__(self) -> str:
        if self.exact is not None:
            return frac_str(self.exact)
        if self.fixed is not None:
            return f"enc{self.fixed}"
        pre = "" if self.factor == 1 else f"{frac_str(self.factor)}*"
        return f"{pre}log({self.log_num})/log({self.log_den})"


def perfect_power(n: int) -> tuple[int, int]:
    """Return (g, e) with n = g**e and e maximal."""
    if n < 2:
        return n, 1
    best = (n, 1)
    for e in range(2, n.bit_length() + 1):
        r, exact = gmpy2.iroot(gmpy2.mpz(n), e)
        if exact:
            best = (int(r), e)
    return best


class _ivprec:
    """Temporarily set the working precision of the interval context."""

    def __init__(self, prec: int):
        self.prec = prec

    def __enter__(self):
        self.saved = iv.prec
        iv.prec = max(self.prec, self.saved)

    def __exit__(self, *exc):
        iv.prec = self.saved


def mpf_of(x: Fraction, prec: int, rounding: str):
    return mpf(from_rational(x.numerator, x.denominator, prec, rounding))


def iv_to_interval(v) -> RatInterval:
    lo, hi = v._mpi_
    return RatInterval(Fraction(*to_rational(lo)), Fraction(*to_rational(hi)))


def iv_of(x: Fraction, prec: int):
    x = as_fraction(x)
    with _ivprec(prec):
        return iv.mpf([mpf_of(x, prec, "d"), mpf_of(x, prec, "u")])


def rpow(x: Number, e: Union[Number, Exponent], bits: int = 64) -> RatInterval:
    """Enclosure of ``x ** e`` (x > 0); exact whenever the value is rational."""
    x = as_fraction(x)
    if not isinstance(e, Exponent):
        return pow_enclosure(x, as_fraction(e), bits)
    if e.exact is not None:
        q = e.exact.denominator
        if q <= 256:
            return pow_enclosure(x, e.exact, bits)
    if x == 1:
        return RatInterval.point(Fraction(1))
    prec = bits + 32
    with _ivprec(prec):
        xv = iv_of(x, prec)
        val = iv.exp(e.iv(prec) * iv.log(xv))
    return iv_to_interval(val)


def decide(pred: Callable[[int], Optional[bool]], bits: int = 64, max_bits: int = MAX_BITS) -> bool:
    """Evaluate a three-valued predicate at increasing precision until decided."""
    while bits <= max_bits:
        out = pred(bits)
        if out is not None:
            return out
        bits *= 2
    raise InconclusiveError("predicate undecided at maximum precision")


def compare_real(enc: Callable[[int], RatInterval], y: Number, bits: int = 64) -> int:
    """Sign of ``v - y`` where v is given by a refinable enclosure."""
    y = as_fraction(y)

    def sign(b):
        e = enc(b)
        if e.lo > y:
            return 1
        if e.hi < y:
            return -1
        if e.width == 0:
            return 0
        return None

    return decide(sign, bits)


# ----------------------------------------------------------------------------
# continued fractions


_CF_RE = re.compile(r"^\s*(-?\d+)\s*;\s*\[([\d,\s]*)\]\s*;\s*\(([\d,\s]+)\)\s*$")


@dataclass(frozen=True)
class ContinuedFraction:
    """Eventually periodic continued fraction ``[a0; pre..., (period)...]``."""

    a0: int
    preperiod: tuple[int, ...]
    period: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "preperiod", tuple(int(a) for a in self.preperiod))
        object.__setattr__(self, "period", tuple(int(a) for a in self.period))
        if not self.period:
            raise ValueError("period must be nonempty")
        if any(a < 1 for a in self.preperiod + self.period):
            raise ValueError("partial quotients must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "ContinuedFraction":
        m = _CF_RE.match(text)
        if not m:
            raise ValueError(f"bad continued fraction {text!r}; expected 'a0;[pre];(period)'")
        split = lambda s: tuple(int(t) for t in s.split(",") if t.strip())
        return cls(int(m.group(1)), split(m.group(2)), split(m.group(3)))

    def __str__(self) -> str:
        pre = ",".join(map(str, self.preperiod))
        per = ",".join(map(str, self.period))
        return f"{self.a0};[{pre}];({per})"

    def partial_quotient(self, k: int) -> int:
        if k == 0:
            return self.a0
        k -= 1
        if k < len(self.preperiod):
            return self.preperiod[k]
        return self.period[(k - len(self.preperiod)) % len(self.period)]

    @property
    def a_max(self) -> int:
        return max(self.preperiod + self.period)

    def convergents(self) -> Iterator[tuple[int, int]]:
        p_prev, q_prev = 1, 0
        p, q = self.a0, 1
        yield p, q
        k = 1
        while True:
            a = self.partial_quotient(k)
            p, p_prev = a * p + p_prev, p
            q, q_prev = a * q + q_prev, q
            yield p, q
            k += 1


GOLDEN = ContinuedFraction(0, (), (1,))
SQRT2_MINUS_1 = ContinuedFraction(0, (), (2,))


@lru_cache(maxsize=4096)
def _convergent_list(cf: ContinuedFraction, k: int) -> tuple[int, int]:
    for idx, pq in enumerate(cf.convergents()):
        if idx == k:
            return pq
    raise AssertionError  # pragma: no cover


def cf_convergent(cf: ContinuedFraction, k: int) -> Fraction:
    """The k-th convergent p_k/q_k."""
    if k < 0:
        raise ValueError("k must be >= 0")
    p, q = _convergent_list(cf, k)
    return Fraction(p, q)


def theta_enclosure(cf: ContinuedFraction, precision: Number) -> RatInterval:
    """Bracket of consecutive convergents of width <= precision (nested as precision drops)."""
    precision = as_fraction(precision)
    if precision <= 0:
        raise ValueError("precision must be positive")
    if precision >= 1:
        return RatInterval(cf.a0, cf.a0 + 1)
    it = cf.convergents()
    p0, q0 = next(it)
    for p1, q1 in it:
        # |p0/q0 - p1/q1| = 1/(q0 q1)
        if Fraction(1, q0 * q1) <= precision:
            a, b = Fraction(p0, q0), Fraction(p1, q1)
            return RatInterval(min(a, b), max(a, b))
        p0, q0 = p1, q1
    raise AssertionError  # pragma: no cover


def theta_quality(cf: ContinuedFraction, Q: int) -> Fraction:
    """Certified lower bound of ``min_{1<=q<=Q} q*||q theta||``, checked for every q."""
    if Q < 1:
        raise ValueError("Q must be >= 1")
    # bracket width <= 2^-s with q * width negligible against the minimum; a
    # fixed floor on s keeps the bound monotone in Q for all practical Q
    s = max(256, 2 * Q.bit_length() + 64)
    enc = theta_enclosure(cf, Fraction(1, 1 << s))
    scale = 1 << s
    t_lo = floor_frac(enc.lo * scale)
    t_hi = ceil_frac(enc.hi * scale)
    best_num, best_den = None, 1
    for q in range(1, Q + 1):
        lo, hi = q * t_lo, q * t_hi
        k = -((-lo) // scale)  # first multiple of scale >= lo
        if k * scale <= hi:
            d = 0
        else:
            below = lo - (lo // scale) * scale
            above = -((-hi) // scale) * scale - hi
            d = min(below, above)
        val = q * d
        if best_num is None or val < best_num:
            best_num = val
    return Fraction(best_num, scale)


@dataclass(frozen=True)
class BadTheta:
    """A quadratic irrational theta with a certified badly-approximable constant."""

    cf: ContinuedFraction
    quality: Fraction
    quality_search_bound: int
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    @classmethod
    def from_cf(cls, cf: Union[str, ContinuedFraction], Q: int = 10**4) -> "BadTheta":
        if isinstance(cf, str):
            cf = ContinuedFraction.parse(cf)
        exhaustive = theta_quality(cf, Q)
        tail = Fraction(1, cf.a_max + 2)
        quality = min(exhaustive, tail)
        if quality <= 0:
            raise ValueError("theta has no positive quality certificate")
        return cls(cf, quality, Q)

    def enclosure(self, bits: int) -> RatInterval:
        """Convergent bracket of width <= 2**-bits (cached)."""
        enc = self._cache.get(bits)
        if enc is None:
            enc = theta_enclosure(self.cf, Fraction(1, 1 << bits))
            self._cache[bits] = enc
        return enc

    def __str__(self) -> str:
        return str(self.cf)
