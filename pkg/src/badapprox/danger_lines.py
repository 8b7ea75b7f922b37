"""Dangerous rational lines ``A x - B y + C = 0``: heights, removed vertical
intervals on the segment x = theta, and the (n, l, k) class decomposition.

Height comparisons are exact: with rational weights every inequality of the
form ``B * max(|A|**(1/i), B**(1/j)) < X`` is cleared to integer powers.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import total_ordering
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

import gmpy2

from .exact_arith import (
    MAX_BITS,
    BadTheta,
    InconclusiveError,
    RatInterval,
    as_fraction,
    ceil_frac,
    floor_frac,
    frac_str,
    rpow,
)


class DegenerateWeightError(ValueError):
    """Weights with i = 0 or j = 0 have no two-dimensional recursion."""


@dataclass(frozen=True)
class WeightPair:
    i: Fraction
    j: Fraction

    def __post_init__(self):
        i, j = as_fraction(self.i), as_fraction(self.j)
        if i + j != 1 or i < 0 or j < 0:
            raise ValueError(f"weights must satisfy i + j = 1, i, j >= 0 (got {i}, {j})")
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)

    @classmethod
    def parse(cls, text: str) -> "WeightPair":
        a, b = text.split(",")
        return cls(Fraction(a.strip()), Fraction(b.strip()))

    @property
    def degenerate(self) -> bool:
        return self.i == 0 or self.j == 0

    def require_proper(self):
        if self.degenerate:
            raise DegenerateWeightError(
                f"weights ({self.i}, {self.j}) are degenerate; use the one-coordinate path"
            )

    def __str__(self) -> str:
        return f"{frac_str(self.i)},{frac_str(self.j)}"


@total_ordering
@dataclass(frozen=True)
class Line:
    """Line ``A x - B y + C = 0``; sorts by (B, A, C)."""

    A: int
    B: int
    C: int

    @classmethod
    def make(cls, A: int, B: int, C: int) -> "Line":
        if B <= 0:
            raise ValueError("B must be positive")
        if math.gcd(math.gcd(A, B), C) != 1:
            raise ValueError("gcd(A, B, C) must be 1")
        return cls(A, B, C)

    def __lt__(self, other: "Line") -> bool:
        return self.key < other.key

    @classmethod
    def parse(cls, text: str) -> "Line":
        a, b, c = (int(t) for t in text.split(","))
        return cls.make(a, b, c)

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.B, self.A, self.C)

    def __str__(self) -> str:
        return f"{self.A},{self.B},{self.C}"


def _int_pow_lt(a: int, e: Fraction, Y: Fraction) -> bool:
    """a**e < Y for a >= 0, e > 0 rational, exactly."""
    if Y <= 0:
        return False
    p, q = e.numerator, e.denominator
    # a^(p/q) < Y  <=>  a^p < Y^q
    return Fraction(a**p) < Y**q


def _root_floor(N: Fraction, q: int) -> int:
    """Largest integer a >= 0 with a**q <= N."""
    if N < 0:
        return -1
    a = int(gmpy2.iroot(gmpy2.mpz(floor_frac(N)), q)[0])
    while (a + 1) ** q <= N:
        a += 1
    while a > 0 and a**q > N:
        a -= 1
    return a


@dataclass(frozen=True)
class Height:
    """H(A, B) = B * max(|A|**(1/i), B**(1/j)) with exact comparisons."""

    A: int
    B: int
    w: WeightPair

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be >= 1")
        self.w.require_proper()

    @property
    def a_dominates(self) -> bool:
        """True iff |A|**(1/i) >= B**(1/j)."""
        # |A|^(1/i) >= B^(1/j)  <=>  |A|^j >= B^i  <=>  |A|^(jn*id) >= B^(in*jd)
        i, j = self.w.i, self.w.j
        return abs(self.A) ** (j.numerator * i.denominator) >= self.B ** (i.numerator * j.denominator)

    def lt(self, X) -> bool:
        """H < X."""
        X = as_fraction(X)
        Y = X / self.B
        return _int_pow_lt(abs(self.A), 1 / self.w.i, Y) and _int_pow_lt(self.B, 1 / self.w.j, Y)

    def ge(self, X) -> bool:
        return not self.lt(X)

    def m_enclosure(self, bits: int = 64) -> RatInterval:
        """Enclosure of max(|A|**(1/i), B**(1/j))."""
        if self.a_dominates:
            return rpow(abs(self.A), 1 / self.w.i, bits)
        return rpow(self.B, 1 / self.w.j, bits)

    def enclosure(self, bits: int = 64) -> RatInterval:
        return self.m_enclosure(bits).scale(self.B)

    @property
    def exact(self) -> Optional[Fraction]:
        e = self.enclosure(64)
        return e.lo if e.width == 0 else None

    def m_floor(self) -> int:
        """floor of max(|A|**(1/i), B**(1/j)) (always >= 1)."""
        if self.a_dominates:
            e = 1 / self.w.i
            return _root_floor(Fraction(abs(self.A) ** e.numerator), e.denominator)
        e = 1 / self.w.j
        return _root_floor(Fraction(self.B**e.numerator), e.denominator)


def height(A: int, B: int, w: WeightPair) -> Height:
    return Height(A, B, w)


def max_abs_A(X: Fraction, B: int, w: WeightPair) -> int:
    """Largest a >= 0 with B * a**(1/i) < X, or -1 if none."""
    Y = as_fraction(X) / B
    if Y <= 0:
        return -1
    p, q = w.i.numerator, w.i.denominator  # a^(q/p) < Y <=> a^q < Y^p
    bound = Y**p
    a = _root_floor(bound, q)
    while a >= 0 and Fraction(a**q) >= bound:
        a -= 1
    return a


def b_limit(X: Fraction, w: WeightPair) -> int:
    """Largest B >= 1 with B * B**(1/j) < X (0 if none)."""
    X = as_fraction(X)
    e = 1 + 1 / w.j  # B^e < X
    B = 0
    hi = 1
    while _int_pow_lt(hi, e, X):
        hi *= 2
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _int_pow_lt(mid, e, X):
            lo = mid
        else:
            hi = mid
    B = lo
    return B


def enumerate_pairs(w: WeightPair, X, X_lo=0) -> Iterator[tuple[int, int]]:
    """All (A, B), B >= 1, with X_lo <= H(A, B) < X, ordered by (B, A)."""
    w.require_proper()
    X, X_lo = as_fraction(X), as_fraction(X_lo)
    for B in range(1, b_limit(X, w) + 1):
        amax = max_abs_A(X, B, w)
        if amax < 0:
            continue
        if X_lo <= 0 or not _int_pow_lt(B, 1 + 1 / w.j, X_lo):
            amin = 0
        else:
            amin = max_abs_A(X_lo, B, w) + 1
        if amin > amax:
            continue
        for A in range(-amax, amax + 1):
            if abs(A) >= amin:
                yield A, B


# ----------------------------------------------------------------------------
# classes


@dataclass(frozen=True)
class LineGeometry:
    """The data line classes and removed intervals depend on."""

    w: WeightPair
    R: int
    c: Fraction

    def __post_init__(self):
        object.__setattr__(self, "c", as_fraction(self.c))
        if self.R < 2:
            raise ValueError("R must be >= 2")

    @property
    def lam(self) -> Fraction:
        return 3 / self.w.j

    @property
    def k_count(self) -> int:
        """ceil(log2 R)."""
        return (self.R - 1).bit_length()

    def l_max(self, n: int) -> Fraction:
        j = self.w.j
        return n * j / (self.lam * (j + 1))


@dataclass(frozen=True, order=True)
class LineClass:
    n: int
    l: int
    k: int


def _R_pow_lt(x: int, R: int, e: Fraction) -> bool:
    """x < R**e exactly, for x >= 1."""
    if e <= 0:
        return x < 1 if e == 0 else False
    p, q = e.numerator, e.denominator  # x^q < R^p
    return x**q < R**p


def classify(line_or_AB, geom: LineGeometry) -> Optional[LineClass]:
    """(n, l, k) of a line, or None when H < 1 (never happens for B >= 1)."""
    if isinstance(line_or_AB, Line):
        A, B = line_or_AB.A, line_or_AB.B
    else:
        A, B = line_or_AB
    h = Height(A, B, geom.w)
    R = geom.R
    n = 0
    while not h.lt(Fraction(R) ** n):
        n += 1
    if n == 0:
        return None
    base = Fraction(R) ** (n - 1)
    k = 0
    while not h.lt(base * 2 ** (k + 1)):
        k += 1
    j = geom.w.j
    top = n * j / (j + 1)
    l = 0
    while not _R_pow_lt(B, R, top - geom.lam * l):
        l += 1
    return LineClass(n, l, k)


def in_class(A: int, B: int, cls: LineClass, geom: LineGeometry) -> bool:
    R = geom.R
    n, l, k = cls.n, cls.l, cls.k
    if n < 1 or k >= geom.k_count or l < 0 or k < 0:
        return False
    h = Height(A, B, geom.w)
    base = Fraction(R) ** (n - 1)
    if not (h.ge(base) and h.lt(Fraction(R) ** n)):
        return False
    if not (h.ge(base * 2**k) and h.lt(base * 2 ** (k + 1))):
        return False
    j = geom.w.j
    top = n * j / (j + 1)
    # R^(top - lam(l+1)) <= B < R^(top - lam l)
    return _R_pow_lt(B, R, top - geom.lam * l) and not _R_pow_lt(B, R, top - geom.lam * (l + 1))


# ----------------------------------------------------------------------------
# removed intervals


@dataclass(frozen=True)
class DangerInterval:
    """The removed vertical interval around y(L) = (A theta + C)/B."""

    line: Line
    w: WeightPair
    theta: BadTheta
    c: Fraction  # effective constant (slack already folded in)

    @property
    def height(self) -> Height:
        return Height(self.line.A, self.line.B, self.w)

    def center(self, bits: int = 64) -> RatInterval:
        L = self.line
        if L.A == 0:
            return RatInterval.point(Fraction(L.C, L.B))
        return self.theta.enclosure(bits).scale(L.A).shift(L.C).scale(Fraction(1, L.B))

    def radius(self, bits: int = 64) -> RatInterval:
        """Enclosure of c / H (exact point when rational)."""
        h = self.height.enclosure(bits + 8)
        if h.width == 0:
            return RatInterval.point(self.c / h.lo)
        return RatInterval(self.c / h.hi, self.c / h.lo)

    @property
    def radius_exact(self) -> Optional[Fraction]:
        r = self.radius()
        return r.lo if r.width == 0 else None

    def outer(self, bits: int = 64) -> RatInterval:
        c, r = self.center(bits), self.radius(bits)
        return RatInterval(c.lo - r.hi, c.hi + r.hi)

    def meets_at(self, J: RatInterval, bits: int) -> Optional[bool]:
        """Three-valued test of closed Delta(L) meeting closed J at a precision."""
        L = self.line
        m = self.height.m_enclosure(bits)
        # Delta meets J <=> A th + C - aB >= -c/m  and  A th + C - bB <= c/m
        th = self.theta.enclosure(bits) if L.A != 0 else RatInterval.point(0)
        s = th.scale(L.A).shift(L.C)
        if m.width == 0:
            rad = RatInterval.point(self.c / m.lo)
        else:
            rad = RatInterval(self.c / m.hi, self.c / m.lo)
        left = s.shift(-J.lo * L.B)  # must be >= -rad
        right = s.shift(-J.hi * L.B)  # must be <= rad
        if left.hi < -rad.hi or right.lo > rad.hi:
            return False
        if left.lo >= -rad.lo and right.hi <= rad.lo:
            return True
        return None

    def meets(self, J: RatInterval, conservative: Optional[bool] = None) -> bool:
        """Exact intersection test; refines theta and roots until decided.

        At the precision cap the result is ``conservative`` if given, otherwise
        InconclusiveError is raised.
        """
        bits = 64
        while bits <= MAX_BITS:
            out = self.meets_at(J, bits)
            if out is not None:
                return out
            bits *= 2
        if conservative is not None:
            return conservative
        raise InconclusiveError(f"cannot decide Delta({self.line}) against {J}")

    def to_json(self) -> dict:
        r = self.radius_exact
        return {
            "A": self.line.A,
            "B": self.line.B,
            "C": self.line.C,
            "radius": frac_str(r) if r is not None else [frac_str(x) for x in self.radius(96).to_json()],
        }


def danger_interval(L: Line, geom: LineGeometry, theta: BadTheta, slack=0) -> DangerInterval:
    """Delta(L) with radius (c + slack)/H; a negative slack deflates."""
    slack = as_fraction(slack)
    c = geom.c + slack
    if c < 0:
        raise ValueError("slack deflates the radius below zero")
    return DangerInterval(L, geom.w, theta, c)


def _check_window(window: RatInterval):
    if window.lo < 0 or window.hi > 1:
        raise ValueError(f"window {window} not inside [0, 1]")


# ----------------------------------------------------------------------------
# fast kernel


class _ScaledTheta:
    """theta in units of 2**-s: theta in [t/S, (t+1)/S]."""

    def __init__(self, theta: BadTheta, s: int):
        self.s = s
        self.S = 1 << s
        enc = theta.enclosure(s + 2)
        self.t = floor_frac(enc.lo * self.S)


def lines_hitting(
    w: WeightPair,
    theta: BadTheta,
    c: Fraction,
    H_lo,
    H_hi,
    windows: Sequence[RatInterval],
    conservative: bool = True,
) -> dict[Line, list[int]]:
    """All lines with H_lo <= H < H_hi whose closed Delta meets some window.

    ``windows`` must be sorted and pairwise disjoint.  Returns a mapping from
    line to the indices of the windows it meets.  Candidates are screened in
    scaled integers and decided exactly.
    """
    c = as_fraction(c)
    if not windows:
        return {}
    los = [wd.lo for wd in windows]
    his = [wd.hi for wd in windows]
    for k in range(len(windows) - 1):
        if his[k] >= los[k + 1]:
            raise ValueError("windows must be sorted and disjoint")
    min_w = min(min(wd.width for wd in windows), c / max(as_fraction(H_hi), 1))
    s = 16
    if min_w > 0:
        s += max(0, min_w.denominator.bit_length() - min_w.numerator.bit_length())
    else:
        s += 64
    st = _ScaledTheta(theta, s)
    S = st.S
    loS = [floor_frac(x * S) for x in los]
    hiS = [ceil_frac(x * S) for x in his]
    # inner bounds: a bracket inside [loIn, hiIn] puts the centre inside the window
    loIn = [ceil_frac(x * S) for x in los]
    hiIn = [floor_frac(x * S) for x in his]
    total_lo, total_hi = loS[0], hiS[-1]
    cS = c * S
    out: dict[Line, list[int]] = {}
    for A, B in enumerate_pairs(w, H_hi, H_lo):
        h = Height(A, B, w)
        m_lo = h.m_floor()
        rS = ceil_frac(cS / m_lo) + 1
        aA = abs(A)
        base = A * st.t
        # A theta S + C S  lies in [base - aA, base + aA] + C S (approx, outward)
        # candidates: [base + CS - aA - rS, base + CS + aA + rS] meets [loS*B, hiS*B]
        g = math.gcd(A, B)
        pad = aA + rS + 1
        c_min = (total_lo * B - base - pad) // S
        c_max = -((-(total_hi * B - base + pad)) // S)
        n_c = c_max - c_min + 1
        if n_c <= 2 * len(windows):
            for C in range(c_min, c_max + 1):
                if g != 1 and math.gcd(g, C) != 1:
                    continue
                ylo = (base + C * S - pad) // B
                yhi = -((-(base + C * S + pad)) // B)
                k = bisect.bisect_left(hiS, ylo)
                hits = []
                while k < len(windows) and loS[k] <= yhi:
                    hits.append(k)
                    k += 1
                if len(hits) == 1 and loIn[hits[0]] <= ylo and yhi <= hiIn[hits[0]]:
                    out.setdefault(Line(A, B, C), []).append(hits[0])
                elif hits:
                    _decide(out, A, B, C, hits, w, theta, c, windows, conservative)
        else:
            for k in range(len(windows)):
                lo_c = (loS[k] * B - base - pad) // S
                hi_c = -((-(hiS[k] * B - base + pad)) // S)
                for C in range(lo_c, hi_c + 1):
                    if g != 1 and math.gcd(g, C) != 1:
                        continue
                    ylo = (base + C * S - pad) // B
                    yhi = -((-(base + C * S + pad)) // B)
                    if loIn[k] <= ylo and yhi <= hiIn[k]:
                        out.setdefault(Line(A, B, C), []).append(k)
                    else:
                        _decide(out, A, B, C, [k], w, theta, c, windows, conservative)
    for L in out:
        out[L] = sorted(set(out[L]))
    return dict(sorted(out.items()))


def _decide(out, A, B, C, hits, w, theta, c, windows, conservative):
    L = Line(A, B, C)
    di = DangerInterval(L, w, theta, c)
    for k in hits:
        if di.meets(windows[k], conservative=conservative):
            out.setdefault(L, []).append(k)


def enumerate_lines(geom: LineGeometry, theta: BadTheta, H_lo, H_hi, window: RatInterval, slack=0) -> list[Line]:
    """Lines with H_lo <= H < H_hi whose Delta meets ``window``, by (B, A, C)."""
    _check_window(window)
    c = geom.c + as_fraction(slack)
    return list(lines_hitting(geom.w, theta, c, H_lo, H_hi, [window], conservative=False))


def enumerate_class(cls: LineClass, window: RatInterval, geom: LineGeometry, theta: BadTheta, slack=0) -> list[Line]:
    """Lines of class C(n, l, k) whose Delta meets ``window``, ordered by (B, A, C)."""
    _check_window(window)
    if cls.n < 1 or cls.k >= geom.k_count or cls.l > geom.l_max(cls.n):
        return []
    R = Fraction(geom.R)
    base = R ** (cls.n - 1)
    lo = base * 2**cls.k
    hi = min(base * 2 ** (cls.k + 1), R**cls.n)
    if lo >= hi:
        return []
    lines = enumerate_lines(geom, theta, lo, hi, window, slack)
    # the height band is already n, k; only the B range of l remains
    j = geom.w.j
    top = cls.n * j / (j + 1)
    e_hi, e_lo = top - geom.lam * cls.l, top - geom.lam * (cls.l + 1)
    return [L for L in lines if _R_pow_lt(L.B, geom.R, e_hi) and not _R_pow_lt(L.B, geom.R, e_lo)]


def classes_for_level(n: int, geom: LineGeometry) -> list[LineClass]:
    """All (n, l, k) classes that can be nonempty."""
    if n < 1:
        return []
    lmax = floor_frac(geom.l_max(n))
    return [LineClass(n, l, k) for l in range(lmax + 1) for k in range(geom.k_count)]
