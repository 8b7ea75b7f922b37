"""Brute-force certificates for weighted bad approximability of a point
enclosure, in the simultaneous and the dual form, plus box-counting evidence.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .danger_lines import WeightPair, _root_floor
from .exact_arith import RatInterval, as_fraction, dist_to_int_bounds, frac_str

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

Refine = Callable[[], Optional[tuple[RatInterval, RatInterval]]]


def _pow_gt(d: Fraction, e: Fraction, t: Fraction) -> bool:
    """d**e > t for d >= 0, e > 0 rational."""
    if t < 0:
        return True
    p, q = e.numerator, e.denominator
    return d**p > t**q


def _term_status(d_lo: Fraction, d_hi: Fraction, q: int, e: Fraction, c: Fraction) -> Optional[bool]:
    """Decide q * d**e > c over d in [d_lo, d_hi]; None if undecided."""
    t = c / q
    if _pow_gt(d_lo, e, t):
        return True
    if not _pow_gt(d_hi, e, t):
        return False
    return None


@dataclass
class Verdict:
    status: str
    checked: int = 0
    blocking: Optional[object] = None  # first failing or undecided item
    worst: Optional[dict] = None
    refinements: int = 0
    items: dict = field(default_factory=dict)  # item -> status, only non-pass items

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "checked": self.checked,
            "blocking": self.blocking,
            "worst": self.worst,
            "refinements": self.refinements,
        }


def _run(items, judge, x_enc, y_enc, refine: Optional[Refine], budget: int) -> Verdict:
    """Shared loop: judge each item, refining enclosures on undecided ones."""
    v = Verdict(PASS)
    for item in items:
        while True:
            st = judge(item, x_enc, y_enc)
            if st is not None or refine is None or v.refinements >= budget:
                break
            nxt = refine()
            v.refinements += 1
            if nxt is None:
                break
            x_enc, y_enc = nxt
        v.checked += 1
        if st is False:
            v.status = FAIL
            v.blocking = item
            v.items[item] = FAIL
            return v
        if st is None:
            v.items[item] = INCONCLUSIVE
            if v.status == PASS:
                v.status = INCONCLUSIVE
                v.blocking = item
    return v


def check_simultaneous(
    x_enc: RatInterval,
    y_enc: RatInterval,
    w: WeightPair,
    c,
    Qmax: int,
    refine: Optional[Refine] = None,
    budget: int = 16,
) -> Verdict:
    """max(q ||qx||^(1/i), q ||qy||^(1/j)) > c for every 1 <= q <= Qmax."""
    c = as_fraction(c)
    if Qmax < 1:
        raise ValueError("Qmax must be >= 1")
    ex = 1 / w.i if w.i > 0 else None
    ey = 1 / w.j if w.j > 0 else None
    worst = {"q": None, "log_margin": math.inf}

    def judge(q, xe, ye):
        results = []
        for enc, e in ((xe, ex), (ye, ey)):
            if e is None:
                # weight 0: the term is q * ||q z||^inf, counted as failing unless z stays off integers
                continue
            lo, hi = dist_to_int_bounds(enc.scale(q))
            results.append(_term_status(lo, hi, q, e, c))
            if results[-1]:
                _track(q, lo, e)
        if any(r is True for r in results):
            return True
        if all(r is False for r in results):
            return False
        return None

    def _track(q, d_lo, e):
        if d_lo > 0 and c > 0:
            lm = math.log(q) + float(e) * math.log(d_lo) - math.log(c)
            if lm < worst["log_margin"]:
                worst.update(q=q, log_margin=lm)

    v = _run(range(1, Qmax + 1), judge, x_enc, y_enc, refine, budget)
    v.worst = worst if worst["q"] is not None else None
    return v


def _dual_pairs(w: WeightPair, boundH: int):
    """(A, B) up to sign with max(|A|^(1/i), B^(1/j)) <= boundH, ordered by (B, A)."""
    X = Fraction(boundH)
    amax = _root_floor(X ** w.i.numerator, w.i.denominator) if w.i > 0 else 0
    bmax = _root_floor(X ** w.j.numerator, w.j.denominator) if w.j > 0 else 0
    for B in range(0, bmax + 1):
        for A in range(-amax, amax + 1):
            if B == 0 and A <= 0:
                continue
            yield A, B


def _m_gt(A: int, B: int, w: WeightPair, t: Fraction) -> bool:
    """max(|A|^(1/i), B^(1/j)) > t, exactly."""
    if t < 0:
        return True
    return (w.i > 0 and _pow_gt(Fraction(abs(A)), 1 / w.i, t)) or (w.j > 0 and _pow_gt(Fraction(B), 1 / w.j, t))


def check_dual(
    x_enc: RatInterval,
    y_enc: RatInterval,
    w: WeightPair,
    c,
    boundH: int,
    refine: Optional[Refine] = None,
    budget: int = 16,
) -> Verdict:
    """max(|A|^(1/i), |B|^(1/j)) |Ax + By + C| > c for all integer (A, B, C) with
    (A, B) != 0 and max(|A|^(1/i), |B|^(1/j)) <= boundH."""
    c = as_fraction(c)
    if boundH < 1:
        raise ValueError("boundH must be >= 1")
    worst = {"item": None, "d_lo": None}

    def judge(AB, xe, ye):
        A, B = AB
        v = xe.scale(A) + ye.scale(B)
        d_lo, d_hi = dist_to_int_bounds(v)
        # m * d > c  <=>  m > c / d
        if d_lo > 0 and _m_gt(A, B, w, c / d_lo):
            if worst["d_lo"] is None or d_lo < worst["d_lo"]:
                worst.update(item=[A, B, -round(v.center)], d_lo=d_lo)
            return True
        if d_hi == 0 or not _m_gt(A, B, w, c / d_hi):
            return False
        return None

    v = _run(_dual_pairs(w, boundH), judge, x_enc, y_enc, refine, budget)
    if v.blocking is not None:
        A, B = v.blocking
        C = -round((x_enc.scale(A) + y_enc.scale(B)).center)
        v.blocking = [A, B, C]
    if worst["item"] is not None:
        v.worst = {"item": worst["item"], "distance_lo": frac_str(worst["d_lo"])}
    return v


# ----------------------------------------------------------------------------
# dimension evidence


@dataclass
class SlopeEstimate:
    slope: float
    intercept: float
    residuals: list[float]
    points: list[tuple[float, float]]

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "residuals": self.residuals}


def box_dimension_estimate(counts: Sequence[tuple], scales: Optional[Sequence[int]] = None) -> SlopeEstimate:
    """Least-squares slope of log(count) against log(1/scale).

    ``counts`` holds (scale, count) pairs; ``scales`` optionally selects indices.
    """
    pts = list(counts) if scales is None else [counts[k] for k in scales]
    xs = [math.log(1 / float(as_fraction(s))) for s, _ in pts]
    if len(set(xs)) < 2:
        raise ValueError("need at least two distinct scales")
    ys = [math.log(n) for _, n in pts]
    slope, intercept = np.polyfit(np.array(xs), np.array(ys), 1)
    res = [float(y - (slope * x + intercept)) for x, y in zip(xs, ys)]
    return SlopeEstimate(float(slope), float(intercept), res, list(zip(xs, ys)))


def family_counts(levels) -> list[tuple[Fraction, int]]:
    """(width, #J_n) per level of a construction run."""
    return [(lv.width, sum(lv.alive)) for lv in levels]


# ----------------------------------------------------------------------------
# certificate records


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class Certificate:
    x_enc: RatInterval
    y_enc: RatInterval
    checks: list[dict]
    status: str
    provenance: str
    candidate: int = 0

    def to_json(self) -> dict:
        return {
            "x": self.x_enc.to_json(),
            "y": self.y_enc.to_json(),
            "checks": self.checks,
            "status": self.status,
            "candidate": self.candidate,
            "config_hash": self.provenance,
        }


def _combine(statuses) -> str:
    statuses = list(statuses)
    if all(s == PASS for s in statuses):
        return PASS
    if any(s == FAIL for s in statuses):
        return FAIL
    return INCONCLUSIVE


def certify_point(
    theta,
    y_enc: RatInterval,
    targets: Sequence[tuple[WeightPair, Fraction]],
    Qmax: int,
    boundH: int,
    refine_y: Optional[Callable[[], Optional[RatInterval]]] = None,
    theta_bits: int = 128,
    budget: int = 16,
    provenance: str = "",
) -> Certificate:
    """Run both checks for each (weights, c) target on x = theta, y in y_enc."""
    state = {"bits": theta_bits, "y": y_enc}

    def refine():
        state["bits"] *= 2
        if refine_y is not None:
            ny = refine_y()
            if ny is None:
                return None
            state["y"] = ny
        return theta.enclosure(state["bits"]), state["y"]

    checks = []
    for w, c in targets:
        sv = check_simultaneous(theta.enclosure(state["bits"]), state["y"], w, c, Qmax, refine, budget)
        dv = check_dual(theta.enclosure(state["bits"]), state["y"], w, c, boundH, refine, budget)
        checks.append(
            {
                "weights": str(w),
                "c": frac_str(as_fraction(c)),
                "Qmax": Qmax,
                "boundH": boundH,
                "simultaneous": sv.to_json(),
                "dual": dv.to_json(),
            }
        )
    status = _combine(s for ch in checks for s in (ch["simultaneous"]["status"], ch["dual"]["status"]))
    return Certificate(theta.enclosure(state["bits"]), state["y"], checks, status, provenance)


def certify_construction(result, Qmax: int, boundH: int, max_candidates: int = 64, budget: int = 16, provenance: str = ""):
    """First candidate (canonical order) whose enclosure passes every check.

    Returns (certificate or None, list of attempt summaries).
    """
    targets = [(st.w, st.params.c) for st in result.stages if not st.trivial]
    attempts = []
    for k, cand in enumerate(result.candidates()):
        if k >= max_candidates:
            break
        step = result.refiner(cand)

        def refine_y(step=step):
            nxt = step()
            return None if nxt is None else nxt.enclosure

        cert = certify_point(result.theta, cand.enclosure, targets, Qmax, boundH, refine_y, budget=budget, provenance=provenance)
        cert.candidate = k
        attempts.append({"candidate": k, "status": cert.status, "y": cand.enclosure.to_json()})
        if cert.status == PASS:
            return cert, attempts
    return None, attempts
