"""Absolute games on a line segment: referee, transcripts, Bob policies, the
N-block to single-block reduction, diffuseness search and Alice's strategy
for badly approximable targets built on a danger-avoiding R-adic tree.
"""
from __future__ import annotations

import bisect
import json
import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .danger_lines import DangerInterval, Line, WeightPair, lines_hitting
from .exact_arith import BadTheta, RatInterval, as_fraction, frac_str
from .fractal_measure import IFS, FullInterval, Window

Block = tuple[Fraction, Fraction]  # (centre, radius), a closed ball
Ball = tuple[Fraction, Fraction]

ONGOING, ALICE_ILLEGAL, BOB_ILLEGAL, DEPTH_REACHED = "ongoing", "alice_illegal", "bob_illegal", "depth_reached"


def _ball_iv(b: Ball) -> RatInterval:
    return RatInterval.ball(b[0], b[1])


# ----------------------------------------------------------------------------
# configuration and state


@dataclass(frozen=True)
class GameConfig:
    beta: Fraction
    N: int = 1
    playable: object = field(default_factory=FullInterval)
    x0: Fraction = Fraction(1, 2)
    r0: Fraction = Fraction(1, 2)
    max_rounds: int = 20
    target: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "beta", as_fraction(self.beta))
        object.__setattr__(self, "x0", as_fraction(self.x0))
        object.__setattr__(self, "r0", as_fraction(self.r0))
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if isinstance(self.playable, FullInterval) and self.beta >= Fraction(1, 3):
            raise ValueError("games on the line need beta < 1/3")
        if self.r0 <= 0 or not self.playable.contains(self.x0):
            raise ValueError("initial ball must have positive radius and centre in the playable set")

    def to_json(self) -> dict:
        play = "interval" if isinstance(self.playable, FullInterval) else str(self.playable)
        return {
            "beta": frac_str(self.beta),
            "N": self.N,
            "playable": play,
            "x0": frac_str(self.x0),
            "r0": frac_str(self.r0),
            "max_rounds": self.max_rounds,
            "target": self.target,
        }


@dataclass(frozen=True)
class GameState:
    n: int
    x: Fraction
    r: Fraction
    alice: tuple = ()  # per round: tuple of blocks
    bob: tuple = ()  # per round: ball
    status: str = ONGOING
    witness: object = None

    @classmethod
    def initial(cls, config: GameConfig) -> "GameState":
        return cls(0, config.x0, config.r0, (), ((config.x0, config.r0),))

    @property
    def ball(self) -> RatInterval:
        return RatInterval.ball(self.x, self.r)


def _blocks_ok(blocks, N: int, cap: Fraction) -> Optional[str]:
    if len(blocks) > N:
        return f"{len(blocks)} blocks exceed N = {N}"
    for c, rad in blocks:
        if rad < 0:
            return f"negative radius {rad}"
        if rad > cap:
            return f"block radius {rad} exceeds {cap}"
    return None


def _disjoint(a: Ball, b: Block) -> bool:
    return abs(a[0] - b[0]) > a[1] + b[1]


def referee_step(state: GameState, config: GameConfig, alice_move, bob_move) -> GameState:
    """Validate one round exactly and return the next state (or a losing state)."""
    if state.status != ONGOING:
        raise ValueError("game is over")
    cap = config.beta * state.r
    try:
        blocks = tuple((as_fraction(c), as_fraction(r)) for c, r in (alice_move or ()))
    except (TypeError, ValueError) as exc:
        return replace(state, status=ALICE_ILLEGAL, witness=f"malformed move: {exc}")
    err = _blocks_ok(blocks, config.N, cap)
    if err:
        return replace(state, alice=state.alice + (blocks,), status=ALICE_ILLEGAL, witness=err)
    try:
        x, r = (as_fraction(v) for v in bob_move)
    except (TypeError, ValueError) as exc:
        return replace(state, alice=state.alice + (blocks,), status=BOB_ILLEGAL, witness=f"malformed move: {exc}")
    new_alice = state.alice + (blocks,)
    bad = None
    if r < config.beta * state.r:
        bad = f"radius {r} below beta * {state.r}"
    elif r <= 0:
        bad = "radius must be positive"
    elif x - r < state.x - state.r or x + r > state.x + state.r:
        bad = "ball leaves the previous ball"
    elif not config.playable.contains(x):
        bad = f"centre {x} outside the playable set"
    else:
        for b in blocks:
            if not _disjoint((x, r), b):
                bad = {"block": [frac_str(b[0]), frac_str(b[1])]}
                break
    if bad is not None:
        return replace(state, alice=new_alice, bob=state.bob + ((x, r),), status=BOB_ILLEGAL, witness=bad)
    n = state.n + 1
    status = DEPTH_REACHED if n >= config.max_rounds else ONGOING
    return GameState(n, x, r, new_alice, state.bob + ((x, r),), status)


# ----------------------------------------------------------------------------
# transcripts


def _fs(x) -> str:
    return frac_str(as_fraction(x))


def transcript_lines(config: GameConfig, state: GameState) -> list[str]:
    """JSON-lines: a header, one record per move, then the outcome."""
    out = [json.dumps({"config": config.to_json()}, sort_keys=True)]
    for k in range(len(state.alice)):
        blocks = [[_fs(c), _fs(r)] for c, r in state.alice[k]]
        out.append(json.dumps({"round": k + 1, "player": "alice", "blocks": blocks}, sort_keys=True))
        if k + 1 < len(state.bob):
            x, r = state.bob[k + 1]
            out.append(json.dumps({"round": k + 1, "player": "bob", "ball": [_fs(x), _fs(r)]}, sort_keys=True))
    out.append(json.dumps({"status": state.status, "witness": state.witness, "rounds": state.n}, sort_keys=True, default=str))
    return out


def parse_transcript(lines: Iterable[str]) -> tuple[dict, list[dict], dict]:
    """(config header, per-round records {round, alice, bob?}, outcome)."""
    header, rounds, tail = None, {}, {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if "config" in rec:
            header = rec["config"]
        elif "player" in rec:
            slot = rounds.setdefault(rec["round"], {"round": rec["round"]})
            if rec["player"] == "alice":
                slot["alice"] = rec["blocks"]
            else:
                slot["bob"] = rec["ball"]
        else:
            tail = rec
    if header is None:
        raise ValueError("transcript has no config header")
    return header, [rounds[k] for k in sorted(rounds)], tail


def validate_transcript(header: dict, rounds: Sequence[dict], playable=None) -> tuple[bool, Optional[str]]:
    """Independent re-check of every round's constraints from raw records."""
    beta = Fraction(header["beta"])
    N = int(header["N"])
    x, r = Fraction(header["x0"]), Fraction(header["r0"])
    play = playable or FullInterval()
    for rec in rounds:
        blocks = [(Fraction(c), Fraction(rad)) for c, rad in rec["alice"]]
        if len(blocks) > N:
            return False, f"round {rec['round']}: too many blocks"
        if any(rad > beta * r or rad < 0 for _, rad in blocks):
            return False, f"round {rec['round']}: block too large"
        if "bob" not in rec:
            return True, None
        nx, nr = Fraction(rec["bob"][0]), Fraction(rec["bob"][1])
        lo, hi = nx - nr, nx + nr
        if nr < beta * r or nr <= 0:
            return False, f"round {rec['round']}: radius too small"
        if lo < x - r or hi > x + r:
            return False, f"round {rec['round']}: not nested"
        if not play.contains(nx):
            return False, f"round {rec['round']}: centre off the playable set"
        for c, rad in blocks:
            # closed intervals [lo, hi] and [c - rad, c + rad] must not meet
            if not (hi < c - rad or lo > c + rad):
                return False, f"round {rec['round']}: ball meets a block"
        x, r = nx, nr
    return True, None


# ----------------------------------------------------------------------------
# Bob policies


def legal_windows(state: GameState, config: GameConfig, blocks: Sequence[Block], rho: Fraction) -> list[Window]:
    """Centres giving a legal ball of radius rho, as windows (before the playable-set test)."""
    lo, hi = state.x - state.r + rho, state.x + state.r - rho
    if lo > hi:
        return []
    cuts = sorted((c - b - rho, c + b + rho) for c, b in blocks)
    out, cur, cur_open = [], lo, False
    for a, b in cuts:
        if b < cur or (b == cur and cur_open):
            continue
        if a > hi:
            break
        if a > cur:
            out.append(Window(cur, a, cur_open, True))
        cur, cur_open = b, True
    if cur < hi or (cur == hi and not cur_open):
        out.append(Window(cur, hi, cur_open, False))
    return [w for w in out if not w.empty]


def _point_in(window: Window, config: GameConfig, prefer: Optional[Fraction] = None) -> Optional[Fraction]:
    play = config.playable
    if isinstance(play, FullInterval):
        lo, hi = max(window.lo, Fraction(0)), min(window.hi, Fraction(1))
        w = Window(lo, hi, window.lo_open and lo == window.lo, window.hi_open and hi == window.hi)
        if w.empty:
            return None
        if prefer is not None:
            p = min(max(prefer, w.lo), w.hi)
            if p in w:
                return p
        return (w.lo + w.hi) / 2 if (w.lo_open or w.hi_open) else w.lo
    return play.support_point_in(window)


class HalvingBob:
    """Halve the radius, keeping the centre as close as possible to the old one."""

    name = "halving"

    def __call__(self, state: GameState, config: GameConfig, blocks) -> Optional[Ball]:
        for rho in (state.r / 2, config.beta * state.r):
            wins = sorted(legal_windows(state, config, blocks, rho), key=lambda w: min(abs(w.lo - state.x), abs(w.hi - state.x)))
            for w in wins:
                p = _point_in(w, config, prefer=state.x)
                if p is not None:
                    return p, rho
        return None


class RandomBob:
    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def __call__(self, state: GameState, config: GameConfig, blocks) -> Optional[Ball]:
        beta = config.beta
        k = self.rng.randint(0, 16)
        for rho in (state.r * (beta + (Fraction(1, 2) - beta) * Fraction(k, 16)), beta * state.r):
            wins = legal_windows(state, config, blocks, rho)
            self.rng.shuffle(wins)
            for w in wins:
                t = Fraction(self.rng.randint(1, 63), 64)
                p = _point_in(w, config, prefer=w.lo + (w.hi - w.lo) * t)
                if p is not None:
                    return p, rho
        return None


class GreedyDangerBob:
    """Shrink as fast as allowed toward the nearest dangerous point in reach."""

    name = "greedy"

    def __init__(self, targets: Sequence[Fraction], seed: Optional[int] = None):
        self.targets = sorted(targets)
        self.rng = random.Random(seed) if seed is not None else None

    def __call__(self, state: GameState, config: GameConfig, blocks) -> Optional[Ball]:
        k = bisect.bisect_left(self.targets, state.x)
        near = sorted((self.targets[t] for t in (k - 1, k) if 0 <= t < len(self.targets)), key=lambda t: abs(t - state.x))
        goal = near[0] if near else state.x
        if self.rng is not None and len(near) > 1 and self.rng.random() < 0.25:
            goal = near[1]  # seeded tie-breaking between the two nearest targets
        for rho in (config.beta * state.r, state.r / 2):
            wins = legal_windows(state, config, blocks, rho)
            best = None
            for w in wins:
                p = _point_in(w, config, prefer=goal)
                if p is not None and (best is None or abs(p - goal) < abs(best - goal)):
                    best = p
            if best is not None:
                return best, rho
        return None


class ReplayBob:
    name = "replay"

    def __init__(self, moves: Sequence[Ball]):
        self.moves = list(moves)

    def __call__(self, state: GameState, config: GameConfig, blocks) -> Optional[Ball]:
        if state.n < len(self.moves):
            return self.moves[state.n]
        return None


class ReplayAlice:
    def __init__(self, moves: Sequence[Sequence[Block]]):
        self.moves = list(moves)

    def __call__(self, state: GameState, config: GameConfig):
        return list(self.moves[state.n]) if state.n < len(self.moves) else []


def empty_alice(state: GameState, config: GameConfig) -> list:
    return []


def danger_targets(theta: BadTheta, w: WeightPair, c, H_max, window: RatInterval) -> list[Fraction]:
    """Centres of the removed intervals of lines with H < H_max meeting the window."""
    hits = lines_hitting(w, theta, as_fraction(c), 0, H_max, [window], conservative=True)
    return sorted(DangerInterval(L, w, theta, as_fraction(c)).center(64).center for L in hits)


# ----------------------------------------------------------------------------
# playing


@dataclass
class GameResult:
    config: GameConfig
    state: GameState
    final: RatInterval

    @property
    def lines(self) -> list[str]:
        return transcript_lines(self.config, self.state)


def play(config: GameConfig, alice, bob, rounds: Optional[int] = None) -> GameResult:
    """Run the refereed game; a policy returning None forfeits the round."""
    rounds = config.max_rounds if rounds is None else rounds
    if rounds != config.max_rounds:
        config = replace(config, max_rounds=rounds)
    state = GameState.initial(config)
    while state.status == ONGOING:
        blocks = alice(state, config)
        if blocks is None:
            state = replace(state, status=ALICE_ILLEGAL, witness="no move")
            break
        move = bob(state, config, blocks)
        if move is None:
            state = replace(state, alice=state.alice + (tuple(blocks),), status=BOB_ILLEGAL, witness="no legal ball found")
            break
        state = referee_step(state, config, blocks, move)
    return GameResult(config, state, state.ball)


def replay(lines: Iterable[str], playable=None) -> GameResult:
    header, rounds, _ = parse_transcript(lines)
    config = GameConfig(
        Fraction(header["beta"]),
        int(header["N"]),
        playable or FullInterval(),
        Fraction(header["x0"]),
        Fraction(header["r0"]),
        int(header["max_rounds"]),
        header.get("target", {}),
    )
    alice = ReplayAlice([[(Fraction(c), Fraction(r)) for c, r in rec["alice"]] for rec in rounds])
    bob = ReplayBob([(Fraction(rec["bob"][0]), Fraction(rec["bob"][1])) for rec in rounds if "bob" in rec])
    return play(config, alice, bob)


# ----------------------------------------------------------------------------
# N-block reduction


def n_absolute_reduction(inner, beta, N: int):
    """Policy for the single-block game with parameter beta built from an
    N-block policy for parameter beta**N.

    Every N-th ball of the outer game is shown to the inner policy; its blocks
    are then played one per round.
    """
    beta = as_fraction(beta)
    if N == 1:
        return inner
    inner_beta = beta**N

    class Reduced:
        def __init__(self):
            self.queue: list = []
            self.inner_state: Optional[GameState] = None
            self.inner_config: Optional[GameConfig] = None

        def __call__(self, state: GameState, config: GameConfig):
            if state.n % N == 0:
                q = state.n // N
                if self.inner_config is None:
                    self.inner_config = replace(config, beta=inner_beta, N=N, max_rounds=max(1, config.max_rounds // N))
                balls = [state.bob[t * N] for t in range(q + 1)]
                self.inner_state = GameState(q, state.x, state.r, (), tuple(balls))
                self.queue = list(inner(self.inner_state, self.inner_config))
            r = state.n % N
            return [self.queue[r]] if r < len(self.queue) else []

    pol = Reduced()
    pol.inner_beta = inner_beta
    return pol


def inner_transcript(state: GameState, N: int) -> tuple[list, list]:
    """Blocks and balls of the inner game read off an outer transcript."""
    q_max = state.n // N
    blocks = [tuple(b for r in range(N) for b in state.alice[q * N + r]) for q in range(q_max)]
    balls = [state.bob[q * N] for q in range(q_max + 1)]
    return blocks, balls


class ScatterAlice:
    """Block up to N maximal balls spread evenly over the current ball."""

    def __init__(self, N: int):
        self.N = N

    def __call__(self, state: GameState, config: GameConfig):
        rad = config.beta * state.r
        out = []
        for k in range(self.N):
            c = state.x - state.r + (2 * k + 1) * state.r / self.N
            out.append((c, rad))
        return out


# ----------------------------------------------------------------------------
# diffuseness


@dataclass
class DiffuseVerdict:
    passed: bool
    trials: int
    witness: Optional[dict] = None
    rho_range: Optional[tuple] = None


def analytic_diffuse_beta(K) -> Fraction:
    """A beta at which K is beta-diffuse for N = 1 (rho <= hull length).

    For an IFS: the cylinder containing x with length <= rho has two support
    endpoints further than r_min * rho apart, so beta = r_min / 2 works.
    """
    if isinstance(K, FullInterval):
        return Fraction(1, 3)
    return K.ratio_min / 2


def grouped_diffuse_beta(beta, N: int) -> Fraction:
    """Grouping exponent used for the N-block variant: (beta/4)**N."""
    return (as_fraction(beta) / 4) ** N


def _cover_attempts(K, x: Fraction, rho: Fraction, brad: Fraction, N: int) -> list[list[Block]]:
    """Adversarial block placements covering as much of K near x as possible."""
    ball = RatInterval.ball(x, rho)
    attempts = []
    # greedy left-to-right, greedy right-to-left, centred
    blocks, cur = [], ball.lo
    for _ in range(N):
        p = _support_min(K, Window(cur, ball.hi, bool(blocks), False))
        if p is None:
            break
        blocks.append((p + brad, brad))
        cur = p + 2 * brad
    attempts.append(blocks)
    blocks, cur = [], ball.hi
    for _ in range(N):
        p = _support_max(K, Window(ball.lo, cur, False, bool(blocks)))
        if p is None:
            break
        blocks.append((p - brad, brad))
        cur = p - 2 * brad
    attempts.append(blocks)
    attempts.append([(x, brad)] + [(x + (k - N // 2) * 2 * brad, brad) for k in range(1, N)])
    return attempts


def _support_min(K, win: Window) -> Optional[Fraction]:
    if isinstance(K, FullInterval):
        lo = max(win.lo, Fraction(0))
        if lo > min(win.hi, Fraction(1)):
            return None
        return lo
    return _support_extreme(K, win, right=False)


def _support_max(K, win: Window) -> Optional[Fraction]:
    if isinstance(K, FullInterval):
        hi = min(win.hi, Fraction(1))
        if hi < max(win.lo, Fraction(0)):
            return None
        return hi
    return _support_extreme(K, win, right=True)


def _support_extreme(K: IFS, win: Window, right: bool) -> Optional[Fraction]:
    """Leftmost or rightmost cylinder endpoint of K inside the window."""
    stack = [K.root()]
    while stack:
        cyl = stack.pop()
        if not win.meets(cyl.interval):
            continue
        end = cyl.interval.hi if right else cyl.interval.lo
        if end in win:
            return end
        if len(cyl.word) > 200:
            return None
        kids = K.children(cyl)
        stack.extend(kids if right else reversed(kids))
    return None


def _remains(K, x: Fraction, rho: Fraction, blocks: Sequence[Block]) -> Optional[Fraction]:
    """A point of K in the closed ball B(x, rho) outside every closed block."""
    ball = RatInterval.ball(x, rho)
    cuts = sorted((c - b, c + b) for c, b in blocks)
    cur, cur_open = ball.lo, False
    for a, b in cuts:
        if b < cur:
            continue
        if a > ball.hi:
            break
        if a > cur:
            p = K.support_point_in(Window(cur, a, cur_open, True))
            if p is not None:
                return p
        if b >= cur:
            cur, cur_open = b, True
    if cur <= ball.hi:
        return K.support_point_in(Window(cur, ball.hi, cur_open, False))
    return None


def _endpoint_distances(K: IFS, x: Fraction, rho: Fraction, level: int) -> list[Fraction]:
    """Distances from x to cylinder endpoints (up to the given level) within rho."""
    out, stack = [], [K.root()]
    near = RatInterval.ball(x, rho)
    while stack:
        cyl = stack.pop()
        if not near.intersects(cyl.interval):
            continue
        for e in (cyl.interval.lo, cyl.interval.hi):
            d = abs(e - x)
            if 0 < d <= rho:
                out.append(d)
        if len(cyl.word) < level:
            stack.extend(K.children(cyl))
    return sorted(set(out))


def diffuse_check(K, beta, N: int = 1, trials: int = 200, seed: int = 0, depth: int = 8) -> DiffuseVerdict:
    """Seeded adversarial search for (x, rho, blocks) swallowing K near x."""
    beta = as_fraction(beta)
    rng = random.Random(seed)
    if isinstance(K, FullInterval):
        ladder = [Fraction(1, 2**k) for k in range(depth)]
    else:
        rmax = K.ratio_max
        ladder = []
        for k in range(depth):
            base = rmax**k
            ladder.extend([base, base * (1 + K.ratio_min), base * K.ratio_min * 2])
        ladder = sorted({p for p in ladder if p <= 1}, reverse=True)
    for t in range(trials):
        if isinstance(K, FullInterval):
            x = Fraction(rng.randrange(0, 1 << 20), 1 << 20) if t % 4 else Fraction(t % 8 == 0)
        else:
            x = K.sample_point(rng, rng.randint(0, depth))
        rho = ladder[t % len(ladder)]
        if t % 2 and not isinstance(K, FullInterval):
            gaps = _endpoint_distances(K, x, rho, rng.randint(1, depth))
            if gaps:
                rho = rng.choice(gaps) * (1 - Fraction(1, 1 << 20))
        brad = beta * rho
        for blocks in _cover_attempts(K, x, rho, brad, N):
            if _remains(K, x, rho, blocks) is None:
                return DiffuseVerdict(
                    False,
                    t + 1,
                    {"x": frac_str(x), "rho": frac_str(rho), "blocks": [[frac_str(c), frac_str(b)] for c, b in blocks]},
                )
    return DiffuseVerdict(True, trials, None, (frac_str(ladder[-1]), frac_str(ladder[0])))


# ----------------------------------------------------------------------------
# Alice's strategy on a danger-avoiding tree


class StrategyContractError(RuntimeError):
    def __init__(self, msg: str, node=None, bad: int = 0):
        super().__init__(msg)
        self.node = node
        self.bad = bad


def strategy_R(beta, fallback: bool = True) -> Fraction:
    """1/beta^2, or 1/beta^4 when beta >= 1/24 and the fallback is enabled."""
    beta = as_fraction(beta)
    if fallback and beta >= Fraction(1, 24):
        return 1 / beta**4
    return 1 / beta**2


def remainder_bound(beta, R, r0, n: int) -> Fraction:
    """(2 r0 / R^(n+1)) (1/beta - 24)."""
    beta, R, r0 = as_fraction(beta), as_fraction(R), as_fraction(r0)
    return 2 * r0 / R ** (n + 1) * (1 / beta - 24)


class DangerTree:
    """Lazy R-adic tree on the root ball; each node keeps its first
    floor(R) - 5 children avoiding every removed interval of a line with
    H below the level's resolution."""

    def __init__(self, root: RatInterval, R: Fraction, theta: BadTheta, w: WeightPair, c, H_cap):
        self.root = root
        self.R = as_fraction(R)
        self.fR = math.floor(self.R)
        if self.R <= 8:
            raise ValueError("tree needs R > 8")
        self.theta, self.w = theta, w
        self.c = as_fraction(c)
        self.H_cap = as_fraction(H_cap)
        self._cache: dict = {}
        self.max_bad = 0

    @property
    def degree(self) -> int:
        return self.fR - 5

    def length(self, n: int) -> Fraction:
        return self.root.width / self.R**n

    def resolution(self, n: int) -> Fraction:
        """Level-n nodes avoid every line with H below this."""
        return min(self.c * self.R ** (n + 1) * 2 / self.root.width, self.H_cap)

    def child(self, n: int, node: RatInterval, t: int) -> RatInterval:
        L = self.length(n + 1)
        return RatInterval(node.lo + t * L, node.lo + (t + 1) * L)

    def split(self, n: int, node: RatInterval) -> tuple[frozenset, list[RatInterval]]:
        """(indices of kept children, blocked children) of a level-n node."""
        key = (n, node.lo)
        if key in self._cache:
            return self._cache[key]
        lo_H, hi_H = self.resolution(n), self.resolution(n + 1)
        dead = set()
        if hi_H > lo_H:
            hits = lines_hitting(self.w, self.theta, self.c, lo_H, hi_H, [node], conservative=True)
            L = self.length(n + 1)
            for line in hits:
                di = DangerInterval(line, self.w, self.theta, self.c)
                out = di.outer(64)
                t0 = max(0, math.floor((out.lo - node.lo) / L) - 1)
                t1 = min(self.fR - 1, math.floor((out.hi - node.lo) / L) + 1)
                for t in range(t0, t1 + 1):
                    if di.meets(self.child(n, node, t), conservative=True):
                        dead.add(t)
        if len(dead) > 5:
            raise StrategyContractError(f"node {n}:{node} has {len(dead)} children meeting removed intervals", (n, node), len(dead))
        self.max_bad = max(self.max_bad, len(dead))
        # the first floor(R) - 5 clean children form the subtree; everything else is blocked
        kept, t = [], 0
        while len(kept) < self.degree:
            if t not in dead:
                kept.append(t)
            t += 1
        kept_set = frozenset(kept)
        blocked = [self.child(n, node, t) for t in range(self.fR) if t not in kept_set]
        self._cache[key] = (kept_set, blocked)
        return kept_set, blocked

    def kept_overlapping(self, n: int, node: RatInterval, ball: RatInterval) -> list[RatInterval]:
        """Kept children of a level-n node overlapping the ball in positive length."""
        kept, _ = self.split(n, node)
        L = self.length(n + 1)
        t0 = max(0, math.floor((ball.lo - node.lo) / L))
        t1 = min(self.fR - 1, math.ceil((ball.hi - node.lo) / L) - 1)
        out = []
        for t in range(t0, t1 + 1):
            k = self.child(n, node, t)
            if t in kept and min(k.hi, ball.hi) > max(k.lo, ball.lo):
                out.append(k)
        return out

    def remainder(self, n: int, node: RatInterval) -> Optional[RatInterval]:
        start = node.lo + self.fR * self.length(n + 1)
        return RatInterval(start, node.hi) if start < node.hi else None


class AliceBAStrategy:
    """Alice's policy: block the non-tree children at the round after Bob's
    radius first falls into [beta r0 / R^n, r0 / R^n]; otherwise play nothing."""

    def __init__(self, config: GameConfig, tree: DangerTree):
        self.config = config
        self.tree = tree
        self.R = tree.R
        beta = config.beta
        if beta >= Fraction(1, 3):
            raise ValueError("strategy needs beta < 1/3")
        self.reset()

    @classmethod
    def build(cls, config: GameConfig, theta: BadTheta, w: WeightPair, c=None, H_cap=20000, fallback=True):
        R = strategy_R(config.beta, fallback)
        if c is None:
            c = 1 / (32 * R * R)
        root = RatInterval.ball(config.x0, config.r0)
        return cls(config, DangerTree(root, R, theta, w, c, H_cap))

    def reset(self):
        self.next_level = 1
        self.level_done = 0  # deepest level whose blocked children have been played
        self.blocks_emitted: list[int] = []

    @staticmethod
    def _blocks_of(intervals: Iterable[RatInterval]) -> list[Block]:
        return [(iv_.center, iv_.radius) for iv_ in intervals]

    def _level_nodes(self, n: int, ball: RatInterval) -> list[RatInterval]:
        """Tree nodes of level n overlapping the ball in positive length."""
        frontier = [self.tree.root]
        for m in range(n):
            nxt = []
            for node in frontier:
                nxt.extend(self.tree.kept_overlapping(m, node, ball))
            frontier = nxt
        return frontier

    def __call__(self, state: GameState, config: GameConfig) -> list[Block]:
        if state.n == 0:
            self.reset()
            root = self.tree.root
            _, blocked = self.tree.split(0, root)
            rem = self.tree.remainder(0, root)
            ivs = blocked + ([rem] if rem else [])
            self.level_done = 1
            out = self._blocks_of(ivs)
            self.blocks_emitted.append(len(out))
            return out
        n = self.next_level
        r, r0 = state.r, config.r0
        lo, hi = config.beta * r0 / self.R**n, r0 / self.R**n
        if r > hi:
            self.blocks_emitted.append(0)
            return []
        if r < lo:  # pragma: no cover - impossible for legal radii
            raise StrategyContractError(f"radius {r} skipped the window of level {n}")
        nodes = self._level_nodes(n, state.ball)
        if len(nodes) > 2:
            raise StrategyContractError(f"{len(nodes)} level-{n} nodes overlap Bob's ball", nodes)
        ivs = []
        for node in nodes:
            _, blocked = self.tree.split(n, node)
            rem = self.tree.remainder(n, node)
            ivs.extend(blocked + ([rem] if rem else []))
        self.next_level += 1
        self.level_done = n + 1
        out = self._blocks_of(ivs)
        self.blocks_emitted.append(len(out))
        return out

    def resolution_reached(self) -> Fraction:
        return self.tree.resolution(self.level_done)


def final_avoids(result: GameResult, strategy: AliceBAStrategy) -> tuple[bool, list[Line], Fraction]:
    """Exhaustive check that the final ball misses every removed interval below
    the resolution the strategy reached."""
    H = strategy.resolution_reached()
    t = strategy.tree
    hits = lines_hitting(t.w, t.theta, t.c, 0, H, [result.final], conservative=True)
    return not hits, sorted(hits, key=lambda L: (L.B, L.A, L.C)), H


def dual_bound_below(w: WeightPair, H) -> int:
    """Largest integer m with m**(1 + j) < H, so every line with
    max(|A|^(1/i), B^(1/j)) <= m has height below H."""
    H = as_fraction(H)
    e = 1 + w.j
    m = max(int(float(H) ** (1 / float(e))) + 2, 1)
    while m > 0 and Fraction(m) ** e.numerator >= H ** e.denominator:
        m -= 1
    return m


def certify_final(result: GameResult, strategy: AliceBAStrategy, theta_bits: int = 128):
    """Dual-form brute-force check of the final ball through certify."""
    from .certify import check_dual

    t = strategy.tree
    m = dual_bound_below(t.w, strategy.resolution_reached())
    if m < 1:
        return None
    return check_dual(t.theta.enclosure(theta_bits), result.final, t.w, t.c, m)


# ----------------------------------------------------------------------------
# tournaments


@dataclass
class GameSummary:
    seed: int
    status: str
    rounds: int
    max_blocks: int
    final: RatInterval
    avoids: Optional[bool] = None
    resolution: Optional[Fraction] = None
    hits: list = field(default_factory=list)
    dual: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "status": self.status,
            "rounds": self.rounds,
            "max_blocks": self.max_blocks,
            "final": self.final.to_json(),
            "avoids": self.avoids,
            "resolution": None if self.resolution is None else frac_str(self.resolution),
            "hits": [list(h) for h in self.hits],
            "dual": self.dual,
        }


def _summarize(seed: int, res: GameResult, strategy=None, check: bool = True) -> GameSummary:
    blocks = max((len(b) for b in res.state.alice), default=0)
    s = GameSummary(seed, res.state.status, res.state.n, blocks, res.final)
    if isinstance(strategy, AliceBAStrategy) and check:
        s.avoids, hits, s.resolution = final_avoids(res, strategy)
        s.hits = [(h.A, h.B, h.C) for h in hits]
        dual = certify_final(res, strategy)
        s.dual = None if dual is None else dual.status
    return s


def tournament(
    config: GameConfig,
    alice_factory: Callable[[], object],
    bob_factory: Callable[[int], object],
    seeds: Iterable[int],
    check: bool = True,
    on_game: Optional[Callable[[GameResult], None]] = None,
) -> list[GameSummary]:
    """Play one game per seed; each seed builds its own Bob."""
    out = []
    for seed in seeds:
        alice = alice_factory()
        res = play(config, alice, bob_factory(seed))
        if on_game is not None:
            on_game(res)
        out.append(_summarize(seed, res, alice, check))
    return out
