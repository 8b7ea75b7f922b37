"""Tree-like families of intervals, r-ubiquity, regular subtree extraction and
the equal-split measure on the limit set of a tree-like family.
"""
from __future__ import annotations

import bisect
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import gmpy2

from .exact_arith import Exponent, RatInterval, _ivprec, as_fraction, frac_str, iv, iv_to_interval
from .fractal_measure import PowerLawCert, Window, _as_window


# ----------------------------------------------------------------------------
# interval families


@dataclass
class TreeFamily:
    """Levels of closed intervals with parent links (``parents[0]`` is all -1)."""

    levels: list[list[RatInterval]]
    parents: list[list[int]]
    _kids: Optional[list[list[list[int]]]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.levels) != len(self.parents):
            raise ValueError("levels and parents disagree in length")

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def children(self, n: int, idx: int) -> list[int]:
        if self._kids is None:
            kids = []
            for m in range(len(self.levels)):
                row = [[] for _ in self.levels[m]]
                if m + 1 < len(self.levels):
                    for c, p in enumerate(self.parents[m + 1]):
                        row[p].append(c)
                kids.append(row)
            self._kids = kids
        return self._kids[n][idx]

    def to_json(self) -> dict:
        return {
            "levels": [[iv_.to_json() for iv_ in lvl] for lvl in self.levels],
            "parents": self.parents,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TreeFamily":
        levels = [[RatInterval.from_json(x) for x in lvl] for lvl in data["levels"]]
        return cls(levels, [list(p) for p in data["parents"]])

    def pruned(self) -> "TreeFamily":
        """Drop every node without a descendant on the last level."""
        keep = [set(range(len(self.levels[-1])))]
        for n in range(self.depth, 0, -1):
            keep.insert(0, {self.parents[n][k] for k in keep[0]})
        levels, parents, remap = [], [], {}
        for n, lvl in enumerate(self.levels):
            ids = sorted(keep[n])
            new = {old: k for k, old in enumerate(ids)}
            levels.append([lvl[k] for k in ids])
            parents.append([-1 if n == 0 else remap[self.parents[n][k]] for k in ids])
            remap = new
        return TreeFamily(levels, parents)

    def with_root(self, root: RatInterval) -> "TreeFamily":
        """Prepend a single root containing the whole first level."""
        levels = [[root]] + [list(l) for l in self.levels]
        parents = [[-1], [0] * len(self.levels[0])] + [list(p) for p in self.parents[1:]]
        return TreeFamily(levels, parents)


@dataclass
class Verdict:
    ok: bool
    condition: Optional[int] = None
    level: Optional[int] = None
    witness: object = None

    def __bool__(self) -> bool:
        return self.ok


def check_tree_like(family: TreeFamily) -> Verdict:
    """Check the four tree-like conditions on every built level."""
    for n, lvl in enumerate(family.levels):
        for iv_ in lvl:
            if iv_.width <= 0:
                return Verdict(False, 1, n, iv_)
    for n, lvl in enumerate(family.levels):
        order = sorted(lvl, key=lambda x: (x.lo, x.hi))
        for a, b in zip(order, order[1:]):
            # distinct members may share at most one point
            if b.lo < a.hi:
                return Verdict(False, 2, n, (a, b))
    for n in range(1, len(family.levels)):
        prev = sorted(family.levels[n - 1], key=lambda x: x.lo)
        los = [p.lo for p in prev]
        for iv_ in family.levels[n]:
            k = bisect.bisect_right(los, iv_.lo) - 1
            cands = [prev[t] for t in (k - 1, k) if 0 <= t < len(prev)]
            if not any(p.contains_interval(iv_) for p in cands):
                return Verdict(False, 3, n, iv_)
        kids = sorted(family.levels[n], key=lambda x: x.lo)
        klos = [x.lo for x in kids]
        for p in family.levels[n - 1]:
            t = bisect.bisect_left(klos, p.lo)
            # children sharing p's left end may be listed in any order of right ends
            found = False
            while t < len(kids) and kids[t].lo <= p.hi:
                if p.contains_interval(kids[t]):
                    found = True
                    break
                t += 1
            if not found:
                return Verdict(False, 4, n, p)
    return Verdict(True)


# ----------------------------------------------------------------------------
# abstract regular trees: nodes are tuples of child indices


def all_nodes(r0: int, depth: int) -> list[tuple[int, ...]]:
    out = []
    for d in range(depth + 1):
        out.extend(itertools.product(range(r0), repeat=d))
    return out


def ancestor_closed(T: Iterable[tuple[int, ...]]) -> bool:
    T = set(T)
    return all(u[:-1] in T for u in T if u)


def _avoid_table(T: frozenset, r0: int, r: int, depth: int):
    @lru_cache(maxsize=None)
    def avoid(u: tuple, d: int) -> bool:
        if u not in T:
            return True
        if d == 0:
            return False
        good = sum(1 for c in range(r0) if avoid(u + (c,), d - 1))
        return good >= r

    return avoid


def check_ubiquity(T: Iterable[tuple[int, ...]], r0: int, r: int, depth: int) -> bool:
    """Whether every degree-r regular subtree of the full r0-ary tree meets T
    at every generation up to ``depth``.  T must be ancestor-closed."""
    if r > r0 or r < 1:
        raise ValueError("need 1 <= r <= r0")
    T = frozenset(T)
    if not ancestor_closed(T):
        raise ValueError("T must be ancestor-closed")
    avoid = _avoid_table(T, r0, r, depth)
    return not avoid((), depth)


class UbiquityError(ValueError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


def avoiding_subtree(T, r0: int, r: int, depth: int) -> Optional[list[tuple[int, ...]]]:
    """A degree-r regular subtree missing T at generation ``depth`` (or None)."""
    T = frozenset(T)
    avoid = _avoid_table(T, r0, r, depth)
    if not avoid((), depth):
        return None
    out = []

    def build(u, d):
        out.append(u)
        if d == 0:
            return
        if u not in T:
            kids = [u + (c,) for c in range(r)]
        else:
            kids = [u + (c,) for c in range(r0) if avoid(u + (c,), d - 1)][:r]
        for v in kids:
            build(v, d - 1)

    build((), depth)
    return out


def extract_regular(T, r0: int, r: int, depth: int) -> list[tuple[int, ...]]:
    """Regular subtree of degree r0 - r + 1 inside T down to ``depth``.

    At every node the lexicographically first children whose subtrees keep
    r-ubiquity are kept.
    """
    T = frozenset(T)
    if not check_ubiquity(T, r0, r, depth):
        raise UbiquityError("T is not r-ubiquitous", avoiding_subtree(T, r0, r, depth))
    avoid = _avoid_table(T, r0, r, depth)
    keep = r0 - r + 1
    out = []

    def build(u, d):
        out.append(u)
        if d == 0:
            return
        good = [u + (c,) for c in range(r0) if not avoid(u + (c,), d - 1)]
        if len(good) < keep:  # pragma: no cover - excluded by the ubiquity argument
            raise UbiquityError(f"node {u} has only {len(good)} good children")
        for v in good[:keep]:
            build(v, d - 1)

    build((), depth)
    return out


def is_regular_in(S: Iterable[tuple[int, ...]], T, degree: int, depth: int) -> bool:
    """Independent walker: S is an exactly degree-regular tree of given depth inside T."""
    S, T = set(S), set(T)
    if () not in S or not S <= T:
        return False
    for u in S:
        kids = [v for v in S if len(v) == len(u) + 1 and v[:-1] == u]
        if len(u) < depth and len(kids) != degree:
            return False
        if len(u) > depth:
            return False
    return ancestor_closed(S)


# ----------------------------------------------------------------------------
# regular subtrees of interval families


def max_regular_degree(family: TreeFamily) -> int:
    """Largest r such that family (single-root) contains an r-regular subtree of full depth."""
    if len(family.levels[0]) != 1:
        raise ValueError("family must have a single root")
    D = family.depth
    best = 0
    hi = max((len(family.children(n, k)) for n in range(D) for k in range(len(family.levels[n]))), default=0)
    for r in range(1, hi + 1):
        if _regular_feasible(family, r) is not None:
            best = r
        else:
            break
    return best


def _regular_feasible(family: TreeFamily, r: int) -> Optional[dict]:
    D = family.depth
    ok = {(D, k): True for k in range(len(family.levels[D]))}
    for n in range(D - 1, -1, -1):
        for k in range(len(family.levels[n])):
            good = [c for c in family.children(n, k) if ok[(n + 1, c)]]
            ok[(n, k)] = len(good) >= r
    return ok if ok[(0, 0)] else None


def regular_subfamily(family: TreeFamily, r: int) -> TreeFamily:
    """The lexicographically first (by left endpoint) r-regular subfamily."""
    ok = _regular_feasible(family, r)
    if ok is None:
        raise UbiquityError(f"no {r}-regular subfamily")
    levels: list[list[RatInterval]] = [[family.levels[0][0]]]
    parents: list[list[int]] = [[-1]]
    frontier = [0]
    for n in range(family.depth):
        nxt, lvl, par = [], [], []
        for pos, k in enumerate(frontier):
            kids = [c for c in family.children(n, k) if ok[(n + 1, c)]]
            kids.sort(key=lambda c: family.levels[n + 1][c].lo)
            for c in kids[:r]:
                nxt.append(c)
                lvl.append(family.levels[n + 1][c])
                par.append(pos)
        frontier = nxt
        levels.append(lvl)
        parents.append(par)
    return TreeFamily(levels, parents)


@dataclass
class RegularTree:
    """A tree-like family in which every non-leaf node has exactly ``degree`` children."""

    family: TreeFamily
    degree: int

    def __post_init__(self):
        f = self.family
        for n in range(f.depth):
            for k in range(len(f.levels[n])):
                got = len(f.children(n, k))
                if got != self.degree:
                    raise ValueError(f"node ({n}, {k}) has {got} children, expected {self.degree}")

    @property
    def depth(self) -> int:
        return self.family.depth

    @classmethod
    def extract(cls, family: TreeFamily, r: int) -> "RegularTree":
        return cls(regular_subfamily(family, r), r)


# ----------------------------------------------------------------------------
# limit measure


class WidthLawError(ValueError):
    pass


@dataclass
class _Node:
    level: int
    idx: int  # index in the materialized level, -1 when generated by rule
    interval: RatInterval
    mass: Fraction


class TreeMeasure:
    """Equal-split measure on the limit set of a tree-like family.

    Node masses follow ``nu(I) = a(I)/norm_A * (R**-n)**beta`` where a(I) is
    the length of the level-n0 ancestor.  Below the materialized depth the tree
    continues either through ``rule`` (interval -> child intervals) or through
    an ``ambient`` measure restricted to each leaf.
    """

    def __init__(self, tree: TreeFamily, R: int, n0: int = 0, rule=None, ambient=None, check_width: bool = True):
        if isinstance(tree, RegularTree):
            tree = tree.family
        self.tree = tree
        self.R = R
        self.n0 = n0
        self.rule = rule
        self.ambient = ambient
        degs = {
            len(tree.children(n, k))
            for n in range(n0, tree.depth)
            for k in range(len(tree.levels[n]))
        }
        if rule is not None:
            degs.add(len(rule(tree.levels[-1][0])))
        self.regular = len(degs) <= 1
        self.degree = degs.pop() if len(degs) == 1 else None
        if check_width:
            for n in range(n0 + 1, len(tree.levels)):
                for k, iv_ in enumerate(tree.levels[n]):
                    par = tree.levels[n - 1][tree.parents[n][k]]
                    if iv_.width * R != par.width:
                        raise WidthLawError(f"node {n}:{k} width {iv_.width} != parent/{R}")
        base = tree.levels[n0]
        deg = self.degree or 1
        self.norm_A = Fraction(1, deg**n0) * sum((iv_.width for iv_ in base), Fraction(0))
        self._masses = self._compute_masses()

    # ---- exponent and certificate ----

    @property
    def exponent(self) -> Exponent:
        if not self.regular or self.degree is None:
            raise ValueError("exponent defined for regular trees only")
        return Exponent.log_ratio(self.degree, self.R)

    @property
    def cert(self) -> PowerLawCert:
        """b1 = min a/(A R^beta), b2 = 3 max a R^beta / A, with R^beta = degree."""
        rb = Fraction(self.degree)
        widths = [iv_.width for iv_ in self.tree.levels[self.n0]]
        return PowerLawCert(self.exponent, min(widths) / (self.norm_A * rb), 3 * max(widths) * rb / self.norm_A)

    def _compute_masses(self) -> list[list[Fraction]]:
        tree, n0 = self.tree, self.n0
        masses: list[list[Fraction]] = [[Fraction(0)] * len(l) for l in tree.levels]
        if self.regular and self.degree:
            g = self.degree
            # a(I): width of level-n0 ancestor
            anc = list(range(len(tree.levels[n0])))
            for n in range(n0, len(tree.levels)):
                if n > n0:
                    anc = [anc[p] for p in tree.parents[n]]
                for k in range(len(tree.levels[n])):
                    a = tree.levels[n0][anc[k]].width
                    masses[n][k] = a / self.norm_A / Fraction(g) ** n
        else:
            roots = len(tree.levels[n0])
            masses[n0] = [Fraction(1, roots)] * roots
            for n in range(n0 + 1, len(tree.levels)):
                for p in range(len(tree.levels[n - 1])):
                    kids = tree.children(n - 1, p)
                    for c in kids:
                        masses[n][c] = masses[n - 1][p] / len(kids)
        for n in range(n0 - 1, -1, -1):
            for c, p in enumerate(tree.parents[n + 1]):
                masses[n][p] += masses[n + 1][c]
        return masses

    def node_mass(self, n: int, idx: int) -> Fraction:
        return self._masses[n][idx]

    @property
    def hull(self) -> RatInterval:
        lvl = self.tree.levels[0]
        return RatInterval(min(x.lo for x in lvl), max(x.hi for x in lvl))

    @property
    def natural_scale(self) -> Fraction:
        return Fraction(self.R)

    # ---- traversal ----

    def _roots(self) -> list[_Node]:
        return [_Node(0, k, iv_, self._masses[0][k]) for k, iv_ in enumerate(self.tree.levels[0])]

    def _children(self, node: _Node) -> list[_Node]:
        t = self.tree
        if node.idx >= 0 and node.level < t.depth:
            kids = t.children(node.level, node.idx)
            return [_Node(node.level + 1, c, t.levels[node.level + 1][c], self._masses[node.level + 1][c]) for c in kids]
        if self.rule is not None:
            ivs = self.rule(node.interval)
            return [_Node(node.level + 1, -1, x, node.mass / len(ivs)) for x in ivs]
        return []

    def mass_bounds(self, window, depth: int) -> tuple[Fraction, Fraction]:
        win = _as_window(window)
        lower = upper = Fraction(0)
        stack = self._roots()
        while stack:
            nd = stack.pop()
            if not win.meets(nd.interval):
                continue
            if win.holds(nd.interval):
                lower += nd.mass
                upper += nd.mass
                continue
            kids = self._children(nd) if nd.level < depth else []
            if not kids:
                upper += nd.mass
            else:
                stack.extend(kids)
        return lower, upper

    def leaves_meeting(self, window) -> list[_Node]:
        win = _as_window(window)
        out, stack = [], self._roots()
        while stack:
            nd = stack.pop()
            if not win.meets(nd.interval):
                continue
            if nd.level == self.tree.depth:
                out.append(nd)
            else:
                stack.extend(self._children(nd))
        out.sort(key=lambda nd: nd.interval.lo)
        return out

    def _leaf_point(self, leaf: _Node, win: Window) -> Optional[Fraction]:
        if self.ambient is not None:
            lo, hi = max(leaf.interval.lo, win.lo), min(leaf.interval.hi, win.hi)
            if lo > hi:
                return None
            c = leaf.interval.center
            if c in win and self.ambient.contains(c):
                return c
            return self.ambient.support_point_in(
                Window(lo, hi, win.lo_open and lo == win.lo, win.hi_open and hi == win.hi)
            )
        if self.rule is not None:
            return self._rule_point(leaf, win)
        c = leaf.interval.center
        return c if c in win else None

    def _rule_point(self, node: _Node, win: Window, max_depth: int = 400) -> Optional[Fraction]:
        """A limit-set point of ``node`` inside ``win``, for rules that commute
        with affine maps (as ``adic_rule`` does).

        Kept end points are limit points.  Otherwise, when a descendant sees the
        window at the same relative position as an ancestor, the nested nodes
        along that path shrink to the fixed point of the ancestor-to-descendant map.
        """
        path: dict[tuple, RatInterval] = {}

        def rel(I: RatInterval) -> tuple:
            lo, hi = max(win.lo, I.lo), min(win.hi, I.hi)
            w = I.width
            return ((lo - I.lo) / w, (hi - I.lo) / w, win.lo_open and lo == win.lo, win.hi_open and hi == win.hi)

        def dfs(nd: _Node, d: int) -> Optional[Fraction]:
            I = nd.interval
            if not win.meets(I):
                return None
            kids = self.rule(I)
            if kids and kids[0].lo == I.lo and I.lo in win:
                return I.lo
            if kids and kids[-1].hi == I.hi and I.hi in win:
                return I.hi
            key = rel(I)
            if key in path:
                A = path[key]
                s = I.width / A.width
                p = (I.lo - A.lo * s) / (1 - s)
                return p if p in win else None
            if d > max_depth:
                raise RuntimeError("support search exceeded depth limit")
            path[key] = I
            for ch in self._children(nd):
                out = dfs(ch, d + 1)
                if out is not None:
                    return out
            del path[key]
            return None

        return dfs(node, 0)

    def _left_is_limit(self, nd: _Node) -> bool:
        kids = self.rule(nd.interval)
        return bool(kids) and kids[0].lo == nd.interval.lo

    def support_point_in(self, window) -> Optional[Fraction]:
        win = _as_window(window)
        for leaf in self.leaves_meeting(win):
            p = self._leaf_point(leaf, win)
            if p is not None:
                return p
        return None

    def contains(self, x) -> bool:
        x = as_fraction(x)
        leaves = self.leaves_meeting(RatInterval.point(x))
        if not leaves:
            return False
        if self.ambient is not None:
            return self.ambient.contains(x)
        return True

    def support_net(self, window: RatInterval, resolution: Fraction) -> list[Fraction]:
        win = _as_window(window)
        out = []
        for leaf in self.leaves_meeting(win):
            if self.ambient is not None and leaf.interval.width > resolution:
                lo, hi = max(leaf.interval.lo, win.lo), min(leaf.interval.hi, win.hi)
                out.extend(self.ambient.support_net(RatInterval(lo, hi), resolution))
            else:
                p = self._leaf_point(leaf, win)
                if p is not None:
                    out.append(p)
        return sorted(set(out))

    def sample_point(self, rng: random.Random, depth: int) -> Fraction:
        nd = rng.choice(self._roots())
        for _ in range(depth):
            kids = self._children(nd)
            if not kids:
                break
            nd = rng.choice(kids)
        if self.rule is not None:
            p = self._rule_point(nd, Window.closed(nd.interval))
            return p
        p = self._leaf_point(nd, Window.closed(nd.interval))
        return p if p is not None else nd.interval.center


def limit_measure(tree: TreeFamily, R: int, n0: int = 0, rule=None, ambient=None) -> TreeMeasure:
    return TreeMeasure(tree, R, n0, rule=rule, ambient=ambient)


def adic_rule(R: int, picks: Sequence[int]) -> Callable[[RatInterval], list[RatInterval]]:
    """Children: the picked cells of the R-adic subdivision of an interval."""
    picks = sorted(picks)

    def rule(iv_: RatInterval) -> list[RatInterval]:
        w = iv_.width / R
        return [RatInterval(iv_.lo + k * w, iv_.lo + (k + 1) * w) for k in picks]

    return rule


def adic_tree(R: int, picks: Sequence[int], depth: int, root: RatInterval = RatInterval(0, 1)) -> TreeFamily:
    rule = adic_rule(R, picks)
    levels, parents = [[root]], [[-1]]
    for _ in range(depth):
        lvl, par = [], []
        for p, iv_ in enumerate(levels[-1]):
            for ch in rule(iv_):
                lvl.append(ch)
                par.append(p)
        levels.append(lvl)
        parents.append(par)
    return TreeFamily(levels, parents)


def ball_count_ok(family: TreeFamily, R: int, samples: Iterable[tuple[Fraction, Fraction]]) -> bool:
    """A ball of radius r in [R^-n-1, R^-n] meets at most 3 level-n nodes."""
    for x, r in samples:
        for n, lvl in enumerate(family.levels):
            if Fraction(1, R ** (n + 1)) <= r <= Fraction(1, R**n):
                ball = RatInterval.ball(x, r)
                if sum(1 for iv_ in lvl if iv_.intersects(ball)) > 3:
                    return False
    return True


# ----------------------------------------------------------------------------
# exponent of the construction's measure


@dataclass
class BetaC:
    degree: int
    exponent: Exponent
    lower_bound: RatInterval  # enclosure of beta - log_R(20 b2 / b1)


def _exact_power(R: int, e: Fraction) -> Optional[Fraction]:
    """R**e when it is rational, else None."""
    p, q = e.numerator, e.denominator
    root, exact = gmpy2.iroot(gmpy2.mpz(R), q)
    if not exact:
        return None
    return Fraction(int(root)) ** p


def beta_c(R, beta: Optional[Exponent] = None, b1=None, b2=None) -> BetaC:
    """Exponent log_R(ceil(b1/(20 b2) R^beta)) and its lower bound.

    ``R`` may also be a construction ``Params`` object carrying R and the
    power-law constants.
    """
    if beta is None:
        params = R
        R, beta, b1, b2 = params.R, params.beta, params.b1, params.b2
    b1, b2 = as_fraction(b1), as_fraction(b2)
    exact_rb = _exact_power(R, beta.exact) if beta.exact is not None else None
    prec = 200
    with _ivprec(prec):
        rb = iv.exp(beta.iv(prec) * iv.log(R))
        x = iv_to_interval(rb * iv.mpf(b1.numerator) / b1.denominator / 20 * b2.denominator / b2.numerator)
        bound = beta.iv(prec) - iv.log(iv.mpf(20) * b2.numerator * b1.denominator / (b2.denominator * b1.numerator)) / iv.log(R)
        bound = iv_to_interval(bound)
    if exact_rb is not None:
        x = RatInterval.point(exact_rb * b1 / (20 * b2))
    d_lo, d_hi = math.ceil(x.lo), math.ceil(x.hi)
    if d_lo != d_hi:
        raise ArithmeticError("ceil of b1/(20 b2) R^beta undecided")
    degree = max(int(d_lo), 1)
    return BetaC(degree, Exponent.log_ratio(degree, R), bound)
