"""The nested-interval recursion: constants, level-0 seeding by the greedy
5r-covering, shrink-and-subdivide, removal of children met by dangerous lines,
and the multi-weight iteration over tree measures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Optional, Sequence

from .danger_lines import (
    DegenerateWeightError,
    Line,
    LineClass,
    LineGeometry,
    WeightPair,
    classify,
    lines_hitting,
)
from .exact_arith import (
    BadTheta,
    Exponent,
    RatInterval,
    _ivprec,
    as_fraction,
    ceil_frac,
    decide,
    frac_str,
    iv,
    iv_to_interval,
    rpow,
)
from .fractal_measure import IFS, UNIT, PowerLawCert, natural_cert, moran_exponent
from .tree_family import TreeFamily, TreeMeasure

PREC = 256


class ThresholdError(ValueError):
    """Theoretical mode with R below the proven thresholds."""


class ConstructionExhausted(RuntimeError):
    def __init__(self, msg: str, level: int, stats: dict, stage: int = 0):
        super().__init__(msg)
        self.level = level
        self.stats = stats
        self.stage = stage


# ----------------------------------------------------------------------------
# real-valued helpers


def _enc(fn) -> RatInterval:
    with _ivprec(PREC):
        return iv_to_interval(fn())


def _ivq(x) -> object:
    x = as_fraction(x)
    return iv.mpf(x.numerator) / x.denominator


def _enc_json(e: RatInterval, digits: int = 18) -> list[str]:
    """Outward-rounded decimal-free rendering of an enclosure."""
    if e.width == 0:
        return [frac_str(e.lo)]
    s = 1 << 64
    lo = Fraction(math.floor(e.lo * s), s)
    hi = Fraction(math.ceil(e.hi * s), s)
    return [frac_str(lo), frac_str(hi)]


def _floor_pow2(x: Fraction) -> Fraction:
    """Largest power of two <= x (x > 0)."""
    if x <= 0:
        raise ValueError("need x > 0")
    e = x.numerator.bit_length() - x.denominator.bit_length()
    p = Fraction(2) ** e
    while p > x:
        p /= 2
    while p * 2 <= x:
        p *= 2
    return p


def _round_down(x: Fraction, bits: int = 64) -> Fraction:
    """x rounded down to a dyadic with ``bits`` significant bits."""
    if x <= 0:
        raise ValueError("need x > 0")
    e = x.numerator.bit_length() - x.denominator.bit_length()
    s = bits - e
    scale = Fraction(2) ** s
    return Fraction(math.floor(x * scale)) / scale


# ----------------------------------------------------------------------------
# constants


@dataclass
class Params:
    w: WeightPair
    R: int
    cert: PowerLawCert
    theta: BadTheta
    mode: str
    alpha: Exponent
    lam: Fraction
    eps: Exponent
    c1: Fraction
    c: Fraction
    c5: RatInterval
    thresholds: dict  # name -> enclosure of log2 of the threshold
    shortfall: RatInterval  # log2(max threshold) - log2 R
    slack: Fraction = Fraction(0)

    @property
    def beta(self) -> Exponent:
        return self.cert.beta

    @property
    def b1(self) -> Fraction:
        return self.cert.b1

    @property
    def b2(self) -> Fraction:
        return self.cert.b2

    @property
    def geom(self) -> LineGeometry:
        return LineGeometry(self.w, self.R, self.c + self.slack)

    def width(self, n: int) -> Fraction:
        return self.c1 / Fraction(self.R) ** n

    def r_neg_alpha(self, bits: int = 64) -> RatInterval:
        return rpow(self.R, self.alpha.scaled(-1), bits)

    def shrunk_outer(self, I: RatInterval) -> RatInterval:
        """Rational interval containing (1 - R^-alpha) I."""
        f = 1 - self.r_neg_alpha(64).lo
        return RatInterval.ball(I.center, I.radius * f)

    def in_shrunk(self, I: RatInterval, y: Fraction) -> bool:
        """Exact membership of y in the closed ball (1 - R^-alpha) I."""
        d = abs(y - I.center)
        t = 1 - d / I.radius  # need R^-alpha <= t
        if t <= 0:
            return False
        a = self.alpha.exact
        if a is not None:
            p, q = a.numerator, a.denominator
            return t**q * Fraction(self.R) ** p >= 1

        def pred(bits):
            e = self.r_neg_alpha(bits)
            if e.hi <= t:
                return True
            if e.lo > t:
                return False
            return None

        return decide(pred)

    def child_bound(self) -> RatInterval:
        """b1/(10 b2) R^beta."""
        beta = self.beta
        return _enc(lambda: _ivq(self.b1 / (10 * self.b2)) * iv.exp(beta.iv(PREC) * iv.log(self.R)))

    def r_beta_minus_eps(self) -> RatInterval:
        beta, eps = self.beta, self.eps
        return _enc(lambda: iv.exp((beta.iv(PREC) - eps.iv(PREC)) * iv.log(self.R)))

    def K(self, k: int) -> RatInterval:
        """R^(1-alpha) 2^-k if that exceeds 1, else 1."""
        alpha = self.alpha
        v = _enc(lambda: iv.exp((1 - alpha.iv(PREC)) * iv.log(self.R) - k * iv.log(2)))
        if v.lo > 1:
            return v
        if v.hi <= 1:
            return RatInterval.point(Fraction(1))
        raise ArithmeticError("K undecided")

    def K_beta(self, k: int) -> RatInterval:
        K = self.K(k)
        if K.width == 0 and K.lo == 1:
            return K
        beta, alpha = self.beta, self.alpha
        return _enc(lambda: iv.exp(beta.iv(PREC) * ((1 - alpha.iv(PREC)) * iv.log(self.R) - k * iv.log(2))))

    def K_star(self, k: int) -> RatInterval:
        """(b2/b1)(R^(1-alpha) 2^(1-k))^beta + 2."""
        beta, alpha = self.beta, self.alpha
        return _enc(
            lambda: _ivq(self.b2 / self.b1)
            * iv.exp(beta.iv(PREC) * ((1 - alpha.iv(PREC)) * iv.log(self.R) + (1 - k) * iv.log(2)))
            + 2
        )

    def line_capacity(self, k: int) -> int:
        """ceil((4 b2/b1) K^beta) + 2."""
        v = self.K_beta(k).scale(4 * self.b2 / self.b1)
        lo, hi = math.ceil(v.lo), math.ceil(v.hi)
        if lo != hi:
            raise ArithmeticError("capacity ceiling undecided")
        return lo + 2

    def tau(self, l: int, k: int) -> RatInterval:
        alpha, eps, beta = self.alpha, self.eps, self.beta
        K = self.K(k)
        first = not (K.width == 0 and K.lo == 1)

        def fn():
            e = 2 * eps.iv(PREC) / beta.iv(PREC)
            if first:
                return iv.exp((l - alpha.iv(PREC) + e) * iv.log(self.R) - k * iv.log(2)) * _ivq(self.c1)
            return iv.exp((l - 1 + e) * iv.log(self.R)) * _ivq(self.c1)

        return _enc(fn)

    def M_bound(self, l: int, delta) -> RatInterval:
        """2 delta^(-1/i) R^(-5l/(ij)) + 2."""
        delta = as_fraction(delta)
        i, j = self.w.i, self.w.j
        return _enc(
            lambda: 2 * iv.exp(-iv.log(_ivq(delta)) / _ivq(i) - _ivq(5 * l / (i * j)) * iv.log(self.R)) + 2
        )

    def c3(self, l: int) -> RatInterval:
        i, j = self.w.i, self.w.j
        return rpow(self.R, (j - self.lam * l * (j + 1)) / i, 64)

    def c4(self) -> RatInterval:
        i, j = self.w.i, self.w.j
        return _enc(lambda: iv.exp(-_ivq(2 / j) * iv.log(4) - _ivq(i) * iv.log(2)))

    def to_json(self) -> dict:
        return {
            "weights": str(self.w),
            "R": self.R,
            "mode": self.mode,
            "beta": str(self.beta),
            "b1": frac_str(self.b1),
            "b2": frac_str(self.b2),
            "alpha": str(self.alpha),
            "lambda": frac_str(self.lam),
            "epsilon": str(self.eps),
            "c1": frac_str(self.c1),
            "c": frac_str(self.c),
            "slack": frac_str(self.slack),
            "c5": _enc_json(self.c5),
            "log2_thresholds": {k: _enc_json(v) for k, v in self.thresholds.items()},
            "log2_shortfall": _enc_json(self.shortfall),
        }


def _log2_R0(eps: Exponent) -> RatInterval:
    """Largest t with eps * t = log2 t (t = log2 R0), by bisection."""

    def g_sign(t: Fraction) -> Optional[int]:
        v = _enc(lambda: eps.iv(PREC) * _ivq(t) - iv.log(_ivq(t)) / iv.log(2))
        if v.lo > 0:
            return 1
        if v.hi < 0:
            return -1
        return None

    e_lo = eps.enclose(64).lo
    lo = Fraction(2) / e_lo  # past the minimum of eps t - log2 t
    if g_sign(lo) != -1:
        lo = Fraction(2)
    hi = lo * 2
    while g_sign(hi) != 1:
        hi *= 2
    for _ in range(80):
        mid = (lo + hi) / 2
        s = g_sign(mid)
        if s is None:
            break
        if s < 0:
            lo = mid
        else:
            hi = mid
    return RatInterval(lo, hi)


def _r_pow_1_plus(R: int, alpha: Exponent, bits: int) -> RatInterval:
    """R^(1 + alpha)."""
    if alpha.exact is not None:
        return rpow(R, 1 + alpha.exact, bits)
    return rpow(R, alpha, bits).scale(R)


def derive_constants(
    w: WeightPair,
    cert: PowerLawCert,
    theta: BadTheta,
    R: int,
    mode: str = "practical",
    slack=0,
) -> Params:
    """All construction constants for one weight pair."""
    if w.degenerate:
        raise DegenerateWeightError(
            f"weights ({w.i}, {w.j}) are degenerate; use construct_single_coordinate or the trivial certificate"
        )
    if R < 2:
        raise ValueError("R must be >= 2")
    if mode not in ("practical", "theoretical"):
        raise ValueError(f"unknown mode {mode!r}")
    i, j = w.i, w.j
    beta = cert.beta
    alpha = beta.scaled(i * j / 4)
    lam = 3 / j
    b = beta.exact
    if b is not None:
        eps = Exponent.rational(alpha.exact * b * b * i * j / 20)
    else:
        eps = Exponent.enclosed(_enc(lambda: alpha.iv(PREC) * beta.iv(PREC) ** 2 * _ivq(i * j / 20)))

    # c1 = min(c(theta) R^(1+alpha), R^(-3i/j)/4), rounded down to a power of two
    v1 = _r_pow_1_plus(R, alpha, 64).scale(theta.quality)
    v2 = rpow(R, -3 * i / j, 64).scale(Fraction(1, 4))
    c1 = _floor_pow2(min(v1.lo, v2.lo))
    c = _round_down(c1 / _r_pow_1_plus(R, alpha, 96).hi)
    if c > theta.quality:  # pragma: no cover - guaranteed by the min above
        raise AssertionError("c exceeds c(theta)")

    b1, b2 = cert.b1, cert.b2
    c5 = rpow(4, 2 / (i * j) + 2, 64).scale(b2 / b1)
    thresholds = {"R0": _log2_R0(eps)}
    thresholds["R1"] = _enc(
        lambda: iv.mpf(
            [
                max(
                    _ivq(thresholds["R0"].lo).a,
                    (10 / (alpha.iv(PREC) * beta.iv(PREC) ** 2 * _ivq(i * j)) * iv.log(_ivq(64 * b2 * b2 / (b1 * b1))) / iv.log(2)).a,
                    (2 / (alpha.iv(PREC) * beta.iv(PREC)) * iv.log(_ivq(c5.lo)) / iv.log(2)).a,
                ),
                max(
                    _ivq(thresholds["R0"].hi).b,
                    (10 / (alpha.iv(PREC) * beta.iv(PREC) ** 2 * _ivq(i * j)) * iv.log(_ivq(64 * b2 * b2 / (b1 * b1))) / iv.log(2)).b,
                    (2 / (alpha.iv(PREC) * beta.iv(PREC)) * iv.log(_ivq(c5.hi)) / iv.log(2)).b,
                ),
            ]
        )
    )
    thresholds["R2"] = _enc(lambda: 2 / beta.iv(PREC))
    thresholds["R3"] = _enc(lambda: iv.log(_ivq(60 * b2 / b1)) / iv.log(2) / eps.iv(PREC))
    log2R = _enc(lambda: iv.log(R) / iv.log(2))
    top_lo = max(thresholds[k].lo for k in ("R1", "R2", "R3"))
    top_hi = max(thresholds[k].hi for k in ("R1", "R2", "R3"))
    shortfall = RatInterval(top_lo - log2R.hi, top_hi - log2R.lo)
    params = Params(w, R, cert, theta, mode, alpha, lam, eps, c1, c, c5, thresholds, shortfall, as_fraction(slack))
    if mode == "theoretical":
        if shortfall.hi > 0:
            raise ThresholdError(
                f"R = {R} is below max(R1, R2, R3) = 2^{float(top_lo):.6g}; use practical mode"
            )
        if params.r_neg_alpha().hi > Fraction(1, 2):
            raise ThresholdError("R^-alpha > 1/2")
    return params


# ----------------------------------------------------------------------------
# covering


def five_r_cover(candidates: Sequence[RatInterval]) -> list[RatInterval]:
    """Greedy disjoint subfamily: scan by centre, keep a ball iff it misses all kept ones."""
    if not candidates:
        return []
    r = candidates[0].radius
    if any(c.radius != r for c in candidates):
        raise ValueError("candidates must share one radius")
    out: list[RatInterval] = []
    for cand in sorted(candidates, key=lambda b: b.center):
        # equal radii and sorted centres: only the last kept ball can meet it
        if not out or cand.lo > out[-1].hi:
            out.append(cand)
    return out


# ----------------------------------------------------------------------------
# levels


@dataclass(frozen=True)
class RemovalRecord:
    line: Line
    cls: LineClass
    parent: int  # index in the parent level's I list
    ancestor: tuple[int, int]  # (level, index) of the level n - l ancestor
    children: tuple[int, ...]  # indices in this level's I list


@dataclass
class LevelFamily:
    n: int
    width: Fraction
    I: list[RatInterval]
    parent: list[int]
    alive: list[bool]
    prev: Optional["LevelFamily"] = field(default=None, repr=False)
    removals: list[RemovalRecord] = field(default_factory=list)
    report: dict = field(default_factory=dict)

    @property
    def J_index(self) -> list[int]:
        return [k for k, a in enumerate(self.alive) if a]

    @property
    def J(self) -> list[RatInterval]:
        return [self.I[k] for k in self.J_index]

    def chain(self) -> list["LevelFamily"]:
        out, st = [], self
        while st is not None:
            out.append(st)
            st = st.prev
        return out[::-1]

    def ancestor(self, idx: int, up: int) -> tuple[int, int]:
        st, k = self, idx
        for _ in range(up):
            k = st.parent[k]
            st = st.prev
        return st.n, k

    def stats(self) -> dict:
        by_class: dict[str, int] = {}
        for rec in self.removals:
            key = f"{rec.cls.l},{rec.cls.k}"
            by_class[key] = by_class.get(key, 0) + len(rec.children)
        return {
            "level": self.n,
            "I": len(self.I),
            "J": sum(self.alive),
            "removed": len(self.I) - sum(self.alive),
            "lines": len({r.line for r in self.removals}),
            "removals_by_class": dict(sorted(by_class.items())),
            **self.report,
        }

    def to_json(self) -> dict:
        return {
            **self.stats(),
            "width": frac_str(self.width),
            "intervals": [
                {"lo": frac_str(x.lo), "hi": frac_str(x.hi), "parent": p, "alive": a}
                for x, p, a in zip(self.I, self.parent, self.alive)
            ],
            "removals": [
                {
                    "line": str(r.line),
                    "class": [r.cls.n, r.cls.l, r.cls.k],
                    "parent": r.parent,
                    "ancestor": list(r.ancestor),
                    "children": list(r.children),
                }
                for r in self.removals
            ],
        }


def build_level0(params: Params, measure, window: RatInterval = UNIT) -> LevelFamily:
    """Greedy cover of balls of radius c1/2 centred at support points in the window."""
    c1 = params.c1
    net = measure.support_net(window, c1 / 10)
    if not net:
        raise ValueError("measure has no support in the window")
    balls = five_r_cover([RatInterval.ball(y, c1 / 2) for y in net])
    beta = params.beta
    bound = _enc(lambda: iv.exp(-beta.iv(PREC) * iv.log(_ivq(5 * c1 / 2))) / _ivq(params.b2))
    report = {
        "count_bound": _enc_json(bound),
        "count_bound_ok": len(balls) >= bound.hi,
    }
    return LevelFamily(0, c1, balls, [-1] * len(balls), [True] * len(balls), None, [], report)


def _children_of(parent: RatInterval, n: int, params: Params, measure) -> list[RatInterval]:
    """Greedy cover of level-(n+1) balls centred at support points in the shrunk parent."""
    wc = params.width(n + 1)
    net = measure.support_net(params.shrunk_outer(parent), wc / 10)
    pts = [y for y in net if params.in_shrunk(parent, y)]
    return five_r_cover([RatInterval.ball(y, wc / 2) for y in pts])


def _removal_window(params: Params, n: int) -> tuple[Fraction, Fraction]:
    """Height range of C(n): R^(n-1) <= H < R^n."""
    R = Fraction(params.R)
    return R ** (n - 1), R**n


def refine_level(
    state: LevelFamily,
    params: Params,
    measure,
    assert_inhyp1: bool = True,
) -> LevelFamily:
    """Level n+1: children over surviving parents, then removal against C(n)."""
    n = state.n
    if not any(state.alive):
        raise ValueError("refine_level needs a nonempty J_n")
    I, parent = [], []
    counts: dict[int, int] = {}
    for k in state.J_index:
        kids = _children_of(state.I[k], n, params, measure)
        counts[k] = len(kids)
        I.extend(kids)
        parent.extend([k] * len(kids))
    removals: list[RemovalRecord] = []
    alive = [True] * len(I)
    geom = params.geom
    if n >= 1 and I:
        lo, hi = _removal_window(params, n)
        hits = lines_hitting(params.w, params.theta, geom.c, lo, hi, I, conservative=True)
        for L, kids in hits.items():
            cls = classify(L, geom)
            per_parent: dict[int, list[int]] = {}
            for c in kids:
                per_parent.setdefault(parent[c], []).append(c)
                alive[c] = False
            for p, cs in sorted(per_parent.items()):
                anc = state.ancestor(p, cls.l)
                removals.append(RemovalRecord(L, cls, p, anc, tuple(cs)))
    new = LevelFamily(n + 1, params.width(n + 1), I, parent, alive, state, removals)
    bound = params.child_bound()
    min_kids = min(counts.values()) if counts else 0
    new.report = {
        "children_min": min_kids,
        "children_max": max(counts.values()) if counts else 0,
        "children_bound": _enc_json(bound),
        "children_bound_ok": min_kids >= bound.hi,
    }
    if params.mode == "theoretical" and min_kids < bound.hi:
        raise AssertionError(f"level {n + 1}: a parent has {min_kids} children, below b1/(10 b2) R^beta")
    if not any(alive):
        raise ConstructionExhausted(f"J_{n + 1} is empty", n + 1, new.stats())
    if assert_inhyp1:
        bad = check_inhyp1(new, params)
        if bad:
            raise AssertionError(f"level {n + 1}: lines {bad[:3]} meet surviving intervals")
    return new


def check_inhyp1(level: LevelFamily, params: Params) -> list[Line]:
    """Lines with H < R^(n-1) whose removed interval meets some J in J_n (should be none)."""
    n = level.n
    if n < 2:
        return []
    J = level.J
    hits = lines_hitting(params.w, params.theta, params.geom.c, 0, Fraction(params.R) ** (n - 1), J, conservative=True)
    return sorted(hits)


def capacity_violations(level: LevelFamily, params: Params) -> list[RemovalRecord]:
    """Records where one line removes more children of one parent than allowed."""
    cache: dict[int, int] = {}
    bad = []
    for rec in level.removals:
        k = rec.cls.k
        if k not in cache:
            cache[k] = params.line_capacity(k)
        if len(rec.children) > cache[k]:
            bad.append(rec)
    return bad


def removal_diagnostics(state: LevelFamily, params: Params, delta=None) -> dict:
    """Per (ancestor, l, k) counts against the counting-bound formulas (report only)."""
    groups: dict[tuple, dict] = {}
    for rec in state.removals:
        key = (rec.ancestor[0], rec.ancestor[1], rec.cls.l, rec.cls.k)
        g = groups.setdefault(key, {"children": set(), "lines": set(), "max_per_line": 0})
        g["children"].update(rec.children)
        g["lines"].add(rec.line)
        g["max_per_line"] = max(g["max_per_line"], len(rec.children))
    rbe = params.r_beta_minus_eps()
    rows = []
    totals: dict[tuple, set] = {}
    for (al, ai, l, k), g in sorted(groups.items()):
        totals.setdefault((al, ai, l), set()).update(g["children"])
        K = params.K(k)
        row = {
            "ancestor": [al, ai],
            "l": l,
            "k": k,
            "removed": len(g["children"]),
            "lines": len(g["lines"]),
            "max_per_line": g["max_per_line"],
            "K": _enc_json(K),
            "K_star": _enc_json(params.K_star(k)),
            "K_star_bound": _enc_json(params.K_beta(k).scale(4 * params.b2 / params.b1)),
            "line_capacity": params.line_capacity(k),
            "tau": _enc_json(params.tau(l, k)),
            "c3": _enc_json(params.c3(l)),
        }
        if delta is not None:
            row["M"] = _enc_json(params.M_bound(l, delta))
        row["capacity_ok"] = g["max_per_line"] <= row["line_capacity"]
        rows.append(row)
    flags = []
    for (al, ai, l), ch in sorted(totals.items()):
        if len(ch) > rbe.lo:
            flags.append({"ancestor": [al, ai], "l": l, "removed": len(ch)})
    return {
        "level": state.n,
        "R_beta_minus_eps": _enc_json(rbe),
        "c4": _enc_json(params.c4()),
        "c5": _enc_json(params.c5),
        "rows": rows,
        "flags": flags,
    }


def growth_report(levels: Sequence[LevelFamily], params: Params) -> list[dict]:
    """f(n) = #J_n against R^(beta - eps) f(n-1) (reported in practical mode)."""
    rbe = params.r_beta_minus_eps()
    out = []
    for a, b in zip(levels, levels[1:]):
        fa, fb = sum(a.alive), sum(b.alive)
        ok = fb >= rbe.hi * fa
        if params.mode == "theoretical" and not ok:
            raise AssertionError(f"growth bound fails at level {b.n}")
        out.append({"level": b.n, "f": fb, "f_prev": fa, "ok": ok})
    return out


# ----------------------------------------------------------------------------
# single-chain refinement (used when narrowing point enclosures)


def refine_interval(I: RatInterval, n: int, params: Params, measure) -> list[RatInterval]:
    """Surviving level-(n+1) children of a level-n interval."""
    kids = _children_of(I, n, params, measure)
    if n < 1 or not kids:
        return kids
    lo, hi = _removal_window(params, n)
    hits = lines_hitting(params.w, params.theta, params.geom.c, lo, hi, kids, conservative=True)
    dead = {k for ks in hits.values() for k in ks}
    return [x for k, x in enumerate(kids) if k not in dead]


# ----------------------------------------------------------------------------
# the multi-weight pipeline


@dataclass
class StageResult:
    index: int
    w: WeightPair
    params: Optional[Params]
    levels: list[LevelFamily]
    measure: object
    trivial: bool = False

    @property
    def final(self) -> LevelFamily:
        return self.levels[-1]

    def family(self) -> TreeFamily:
        """The J-family as a tree with a virtual root, pruned to full-depth nodes."""
        levels, parents = [], []
        remap: dict[int, int] = {}
        for st in self.levels:
            idx = st.J_index
            new = {old: k for k, old in enumerate(idx)}
            levels.append([st.I[k] for k in idx])
            parents.append([-1 if st.n == 0 else remap[st.parent[k]] for k in idx])
            remap = new
        fam = TreeFamily(levels, parents).pruned()
        lo = min(min(x.lo for x in fam.levels[0]), Fraction(0))
        hi = max(max(x.hi for x in fam.levels[0]), Fraction(1))
        return fam.with_root(RatInterval(lo, hi))


@dataclass
class PointCandidate:
    """A nonempty rational enclosure of a point surviving every stage."""

    enclosure: RatInterval
    leaves: tuple  # one (stage, level, interval) per non-trivial stage
    base_level: int
    base_interval: RatInterval


@dataclass
class ConstructionResult:
    stages: list[StageResult]
    theta: BadTheta
    ambient: object

    def candidates(self) -> Iterator[PointCandidate]:
        """Enclosures in canonical order: last-stage leaves, then earlier-stage leaves inside them."""
        real = [s for s in self.stages if not s.trivial]
        if not real:
            return

        def rec(si: int, enc: RatInterval, acc: tuple):
            st = real[si]
            leaves = st.final.J if si == len(real) - 1 else [x for x in st.final.J if x.intersects(enc)]
            for leaf in leaves:
                sub = leaf if si == len(real) - 1 else enc.intersection(leaf)
                if sub is None:
                    continue
                item = acc + ((st.index, st.final.n, leaf),)
                if si == 0:
                    if self.ambient.support_point_in(sub) is None:
                        continue
                    yield PointCandidate(sub, item, st.final.n, leaf)
                else:
                    yield from rec(si - 1, sub, item)

        yield from rec(len(real) - 1, RatInterval(Fraction(-1), Fraction(2)), ())

    def refiner(self, cand: PointCandidate) -> Callable[[], Optional[PointCandidate]]:
        """Closure that descends the first stage's chain one level per call."""
        real = [s for s in self.stages if not s.trivial]
        p0 = real[0].params
        state = {"cand": cand}

        def step() -> Optional[PointCandidate]:
            cur = state["cand"]
            for kid in refine_interval(cur.base_interval, cur.base_level, p0, self.ambient):
                sub = cur.enclosure.intersection(kid)
                if sub is not None and self.ambient.support_point_in(sub) is not None:
                    nxt = PointCandidate(sub, cur.leaves, cur.base_level + 1, kid)
                    state["cand"] = nxt
                    return nxt
            return None

        return step


def cert_of(measure) -> PowerLawCert:
    if isinstance(measure, IFS):
        return natural_cert(measure)
    if isinstance(measure, TreeMeasure):
        return measure.cert
    if hasattr(measure, "cert"):
        return measure.cert
    raise TypeError("cannot derive a power-law certificate for this measure")


def run_stage(
    w: WeightPair,
    measure,
    theta: BadTheta,
    R: int,
    depth: int,
    mode: str,
    cert: PowerLawCert,
    slack=0,
    assert_inhyp1: bool = True,
    progress: Optional[Callable[[LevelFamily], None]] = None,
    stage: int = 0,
) -> StageResult:
    params = derive_constants(w, cert, theta, R, mode, slack)
    lvl = build_level0(params, measure)
    levels = [lvl]
    if progress:
        progress(lvl)
    for _ in range(depth):
        try:
            lvl = refine_level(lvl, params, measure, assert_inhyp1)
        except ConstructionExhausted as exc:
            exc.stage = stage
            raise
        levels.append(lvl)
        if progress:
            progress(lvl)
    return StageResult(stage, w, params, levels, measure)


def construct(
    w_list: Sequence[WeightPair],
    measure,
    theta: BadTheta,
    R: int,
    depth: int,
    mode: str = "practical",
    cert: Optional[PowerLawCert] = None,
    slack=0,
    assert_inhyp1: bool = True,
    progress: Optional[Callable[[int, LevelFamily], None]] = None,
) -> ConstructionResult:
    """Run the recursion for each weight in turn, each stage on the previous stage's limit measure.

    Constants of later stages use the ambient certificate (see README).
    """
    if not w_list:
        raise ValueError("need at least one weight pair")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    ambient = measure
    if cert is None:
        cert = cert_of(ambient)
    stages: list[StageResult] = []
    current = ambient
    for s, w in enumerate(w_list):
        if w.i == 1:
            stages.append(StageResult(s, w, None, [], current, trivial=True))
            continue
        if w.i == 0:
            raise DegenerateWeightError("weights (0, 1) use construct_single_coordinate")
        cb = (lambda lvl, s=s: progress(s, lvl)) if progress else None
        res = run_stage(w, current, theta, R, depth, mode, cert, slack, assert_inhyp1, cb, s)
        stages.append(res)
        if s + 1 < len(w_list):
            current = TreeMeasure(res.family(), R, n0=1, ambient=ambient)
    return ConstructionResult(stages, theta, ambient)


# ----------------------------------------------------------------------------
# degenerate weights


def construct_single_coordinate(measure, theta: BadTheta, R: int, depth: int, c1=Fraction(1, 4)) -> list[LevelFamily]:
    """Weights (0, 1): avoid the intervals |y - C/B| <= c/B^2 level by level.

    Uses shrink factor 1/2 and c = c1/R since the two-dimensional constants
    degenerate when i = 0.
    """
    c1 = as_fraction(c1)
    c = c1 / R
    Rf = Fraction(R)

    def width(n):
        return c1 / Rf**n

    def hit(J: RatInterval, lo: Fraction, hi: Fraction) -> bool:
        # rationals C/B with lo <= B^2 < hi and |y - C/B| <= c/B^2 for some y in J
        B = 1
        while B * B < hi:
            if B * B >= lo:
                r = c / (B * B)
                C0 = math.floor((J.lo - r) * B)
                C1 = math.ceil((J.hi + r) * B)
                for C in range(C0, C1 + 1):
                    if math.gcd(B, C) != 1:
                        continue
                    y = Fraction(C, B)
                    if y + r >= J.lo and y - r <= J.hi:
                        return True
            B += 1
        return False

    net = measure.support_net(UNIT, c1 / 10)
    I0 = five_r_cover([RatInterval.ball(y, c1 / 2) for y in net])
    lvl = LevelFamily(0, c1, I0, [-1] * len(I0), [True] * len(I0))
    levels = [lvl]
    for _ in range(depth):
        n = lvl.n
        I, parent = [], []
        for k in lvl.J_index:
            P = lvl.I[k]
            wc = width(n + 1)
            pts = measure.support_net(RatInterval.ball(P.center, P.radius / 2), wc / 10)
            kids = five_r_cover([RatInterval.ball(y, wc / 2) for y in pts])
            I.extend(kids)
            parent.extend([k] * len(kids))
        lo, hi = (Rf ** (n - 1), Rf**n) if n >= 1 else (Rf, Rf)
        alive = [not hit(x, lo, hi) for x in I]
        lvl = LevelFamily(n + 1, width(n + 1), I, parent, alive, lvl)
        if not any(alive):
            raise ConstructionExhausted(f"J_{n + 1} is empty", n + 1, lvl.stats())
        levels.append(lvl)
    return levels
