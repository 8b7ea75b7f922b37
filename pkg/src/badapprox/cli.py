"""Command-line entry point.

Every subcommand reads an optional TOML config, applies flag overrides,
writes deterministic artifacts into ``<out>/<command>-<hash>`` and exits 0
only when all hard assertions passed.

Exit codes: 0 success, 1 a check failed or was inconclusive, 2 bad config or
arguments, 3 construction exhausted or a strategy contract failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import games as G
from .certify import PASS, certify_construction, certify_point, config_hash
from .construction import (
    ConstructionExhausted,
    ThresholdError,
    capacity_violations,
    construct,
    derive_constants,
    growth_report,
    removal_diagnostics,
    run_stage,
)
from .danger_lines import DangerInterval, DegenerateWeightError, LineGeometry, WeightPair, classify, lines_hitting
from .exact_arith import GOLDEN, SQRT2_MINUS_1, BadTheta, ContinuedFraction, RatInterval, frac_str
from .fractal_measure import CANTOR, IFS, QUARTER, FullInterval, natural_cert, verify_power_law
from .tree_family import TreeFamily, beta_c, check_tree_like, max_regular_degree, regular_subfamily, TreeMeasure

SCHEMA = 1
log = logging.getLogger("badapprox")

DEFAULTS: dict[str, dict[str, Any]] = {
    "run": {"seed": 0, "out": "runs"},
    "target": {"weights": "1/2,1/2", "theta": "golden"},
    "measure": {"set": "quarter"},
    "construct": {"R": 16, "depth": 4, "mode": "practical", "slack": "0"},
    "certify": {"Qmax": 10000, "boundH": 1000, "max_candidates": 64, "budget": 16},
    "lines": {"H_lo": "0", "H_hi": "1000", "window": "0,1", "c": ""},
    "power_law": {"samples": 200, "depth": 6},
    "game": {
        "beta": "1/10",
        "N": 12,
        "rounds": 20,
        "games": 10,
        "alice": "ba",
        "bob": "random",
        "set": "interval",
        "x0": "1/2",
        "r0": "1/2",
        "H_cap": 20000,
        "transcript": "",
    },
}


class ConfigError(ValueError):
    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


# ----------------------------------------------------------------------------
# config handling


def load_config(path: Optional[str], overrides: dict[str, dict[str, Any]]) -> dict[str, dict[str, Any]]:
    cfg = {k: dict(v) for k, v in DEFAULTS.items()}
    if path:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError("config", str(exc)) from exc
        for sec, vals in data.items():
            if sec not in cfg or not isinstance(vals, dict):
                raise ConfigError(sec, "unknown section")
            for key, val in vals.items():
                if key not in cfg[sec]:
                    raise ConfigError(f"{sec}.{key}", "unknown field")
                cfg[sec][key] = val
    for sec, vals in overrides.items():
        for key, val in vals.items():
            if val is not None:
                cfg[sec][key] = val
    return cfg


def _frac(cfg, sec: str, key: str) -> Fraction:
    try:
        return Fraction(str(cfg[sec][key]))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{sec}.{key}", f"not a rational: {cfg[sec][key]!r}") from exc


def _int(cfg, sec: str, key: str, lo: int = 0) -> int:
    val = cfg[sec][key]
    if isinstance(val, bool) or not isinstance(val, int):
        try:
            val = int(str(val))
        except ValueError as exc:
            raise ConfigError(f"{sec}.{key}", f"not an integer: {val!r}") from exc
    if val < lo:
        raise ConfigError(f"{sec}.{key}", f"must be >= {lo}")
    return val


def parse_theta(text: str) -> BadTheta:
    named = {"golden": GOLDEN, "sqrt2-1": SQRT2_MINUS_1}
    try:
        cf = named[text] if text in named else ContinuedFraction.parse(text)
    except ValueError as exc:
        raise ConfigError("target.theta", str(exc)) from exc
    return BadTheta.from_cf(cf)


def parse_set(text: str, field: str = "measure.set"):
    named = {"quarter": QUARTER, "cantor": CANTOR, "interval": FullInterval()}
    if text in named:
        return named[text]
    try:
        return IFS.parse(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(field, f"expected quarter, cantor, interval or 'r,b;r,b': {exc}") from exc


def parse_weights(text: str) -> list[WeightPair]:
    try:
        return [WeightPair.parse(chunk) for chunk in text.split(";") if chunk.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError("target.weights", str(exc)) from exc


def parse_window(text: str) -> RatInterval:
    try:
        lo, hi = (Fraction(t.strip()) for t in text.split(","))
    except ValueError as exc:
        raise ConfigError("lines.window", "expected 'lo,hi'") from exc
    if lo > hi:
        raise ConfigError("lines.window", "lo must not exceed hi")
    return RatInterval(lo, hi)


# ----------------------------------------------------------------------------
# run directory


class RunDir:
    def __init__(self, command: str, cfg: dict, root: Optional[str] = None):
        self.cfg = cfg
        # the output root is where artifacts go, not what they depend on
        cfg = {**cfg, "run": {k: v for k, v in cfg["run"].items() if k != "out"}}
        self.hash = config_hash({"command": command, "config": cfg, "schema": SCHEMA})
        base = Path(root or self.cfg["run"]["out"])
        self.path = base / f"{command}-{self.hash[:12]}"
        self.path.mkdir(parents=True, exist_ok=True)
        self.write_json("config.json", {"command": command, "config": cfg, "schema": SCHEMA, "version": __version__})
        self.counts = {"pass": 0, "fail": 0, "inconclusive": 0}
        self.reasons: list[str] = []

    def write_json(self, name: str, data) -> Path:
        p = self.path / name
        p.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")
        return p

    def write_lines(self, name: str, records) -> Path:
        p = self.path / name
        with p.open("w") as fh:
            for rec in records:
                fh.write((rec if isinstance(rec, str) else json.dumps(rec, sort_keys=True, default=str)) + "\n")
        return p

    def tally(self, status: str, reason: Optional[str] = None):
        self.counts[status] += 1
        if status != PASS and reason:
            self.reasons.append(reason)

    def finish(self, extra: Optional[dict] = None) -> int:
        ok = self.counts["fail"] == 0 and self.counts["inconclusive"] == 0
        summary = {"status": "pass" if ok else "fail", "counts": self.counts, "reasons": self.reasons, "schema": SCHEMA}
        if extra:
            summary.update(extra)
        self.write_json("summary.json", summary)
        print(json.dumps({"run_dir": str(self.path), **summary}, sort_keys=True, default=str))
        return 0 if ok else 1


# ----------------------------------------------------------------------------
# subcommands


def cmd_construct(cfg, args) -> int:
    weights = parse_weights(cfg["target"]["weights"])
    theta = parse_theta(cfg["target"]["theta"])
    measure = parse_set(cfg["measure"]["set"])
    R = _int(cfg, "construct", "R", 2)
    depth = _int(cfg, "construct", "depth", 1)
    mode = cfg["construct"]["mode"]
    if mode not in ("practical", "theoretical"):
        raise ConfigError("construct.mode", "must be practical or theoretical")
    slack = _frac(cfg, "construct", "slack")
    run = RunDir("construct", cfg, args.out)
    level_records = []

    def progress(stage, lvl):
        log.info("stage %d level %d: %d intervals, %d kept", stage, lvl.n, len(lvl.I), sum(lvl.alive))
        level_records.append({"stage": stage, **lvl.to_json()})

    result = construct(weights, measure, theta, R, depth, mode, slack=slack, progress=progress)
    run.write_lines("levels.jsonl", level_records)
    stages = []
    for st in result.stages:
        if st.trivial:
            stages.append({"stage": st.index, "weights": str(st.w), "trivial": True})
            continue
        fam = st.family()
        tl = check_tree_like(fam)
        run.tally(PASS if tl.ok else "fail", f"stage {st.index}: tree-like condition {tl.condition} fails")
        nonempty = sum(st.final.alive) > 0
        run.tally(PASS if nonempty else "fail", f"stage {st.index}: empty final family")
        deg = max_regular_degree(fam)
        tm = TreeMeasure(regular_subfamily(fam, deg), R, n0=1, ambient=measure)
        stages.append(
            {
                "stage": st.index,
                "weights": str(st.w),
                "params": st.params.to_json(),
                "final_J": sum(st.final.alive),
                "tree_like": tl.ok,
                "regular_degree": deg,
                "measure_exponent": str(tm.exponent),
                "capacity_violations": len(capacity_violations(st.final, st.params)),
            }
        )
    run.write_json("stages.json", stages)
    cert, attempts = certify_construction(
        result,
        _int(cfg, "certify", "Qmax", 1),
        _int(cfg, "certify", "boundH", 1),
        _int(cfg, "certify", "max_candidates", 1),
        _int(cfg, "certify", "budget", 0),
        provenance=run.hash,
    )
    run.write_lines("attempts.jsonl", attempts)
    if cert is not None:
        run.write_json("certificate.json", cert.to_json())
        run.tally(PASS)
    else:
        last = attempts[-1]["status"] if attempts else "fail"
        run.tally(last if last in ("fail", "inconclusive") else "fail", "no candidate passed certification")
    return run.finish({"certified": cert is not None})


def cmd_enumerate_lines(cfg, args) -> int:
    w = parse_weights(cfg["target"]["weights"])[0]
    theta = parse_theta(cfg["target"]["theta"])
    window = parse_window(cfg["lines"]["window"])
    H_lo, H_hi = _frac(cfg, "lines", "H_lo"), _frac(cfg, "lines", "H_hi")
    if cfg["lines"]["c"] not in ("", None):
        c = _frac(cfg, "lines", "c")
    else:
        params = derive_constants(w, natural_cert(parse_set(cfg["measure"]["set"])), theta, _int(cfg, "construct", "R", 2))
        c = params.c
    run = RunDir("enumerate-lines", cfg, args.out)
    hits = lines_hitting(w, theta, c, H_lo, H_hi, [window], conservative=True)
    lines = sorted(hits, key=lambda L: (L.B, L.A, L.C))
    geom = LineGeometry(w, _int(cfg, "construct", "R", 2), c)

    def record(L):
        cls = classify(L, geom)
        return {**DangerInterval(L, w, theta, c).to_json(), "class": [cls.n, cls.l, cls.k]}

    run.write_lines("lines.jsonl", (record(L) for L in lines))
    return run.finish({"lines": len(lines), "c": frac_str(c)})


def _parse_enclosure(val, field: str) -> RatInterval:
    try:
        if isinstance(val, dict):
            return RatInterval(Fraction(val["lo"]), Fraction(val["hi"]))
        if isinstance(val, list):
            return RatInterval(Fraction(val[0]), Fraction(val[1]))
        return RatInterval.point(Fraction(str(val)))
    except (KeyError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(field, f"bad enclosure {val!r}") from exc


def cmd_verify(cfg, args) -> int:
    if not args.point:
        raise ConfigError("point", "verify needs --point FILE")
    try:
        rec = json.loads(Path(args.point).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("point", str(exc)) from exc
    if "certificate" in rec:
        rec = rec["certificate"]
    if "checks" in rec and "targets" not in rec:
        # a certificate record: re-run its own targets and bounds
        checks = rec["checks"]
        rec = {**rec, "targets": [{"weights": ch["weights"], "c": ch["c"]} for ch in checks]}
        if checks:
            rec.setdefault("Qmax", checks[0]["Qmax"])
            rec.setdefault("boundH", checks[0]["boundH"])
    theta = parse_theta(rec.get("theta", cfg["target"]["theta"]))
    y = _parse_enclosure(rec.get("y"), "point.y")
    targets = []
    for t in rec.get("targets") or [{"weights": cfg["target"]["weights"], "c": rec.get("c", "1/100")}]:
        for w in parse_weights(t["weights"]):
            targets.append((w, Fraction(str(t["c"]))))
    Qmax = int(rec.get("Qmax", cfg["certify"]["Qmax"]))
    boundH = int(rec.get("boundH", cfg["certify"]["boundH"]))
    run = RunDir("verify", {**cfg, "point": rec}, args.out)
    cert = certify_point(theta, y, targets, Qmax, boundH, provenance=run.hash)
    run.write_json("certificate.json", cert.to_json())
    failing = []
    for ch in cert.checks:
        for kind in ("simultaneous", "dual"):
            st = ch[kind]["status"]
            run.tally(st, f"{ch['weights']} {kind}: {st} at {ch[kind]['blocking']}")
            if st != PASS:
                failing.append({"weights": ch["weights"], "check": kind, "status": st, "blocking": ch[kind]["blocking"]})
    return run.finish({"failing": failing})


def cmd_tree(cfg, args) -> int:
    if not args.input:
        raise ConfigError("input", "tree needs --input FILE")
    try:
        fam = TreeFamily.from_json(json.loads(Path(args.input).read_text()))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigError("input", str(exc)) from exc
    run = RunDir("tree", {**cfg, "input": Path(args.input).name}, args.out)
    v = check_tree_like(fam)
    run.tally(PASS if v.ok else "fail", f"condition {v.condition} fails at level {v.level}")
    extra = {"tree_like": v.ok, "condition": v.condition, "level": v.level, "witness": str(v.witness) if v.witness else None}
    if v.ok and len(fam.levels[0]) == 1:
        deg = max_regular_degree(fam)
        extra["max_regular_degree"] = deg
        if args.extract:
            if args.extract > deg:
                run.tally("fail", f"no {args.extract}-regular subfamily (max {deg})")
            else:
                run.write_json("extracted.json", regular_subfamily(fam, args.extract).to_json())
    return run.finish(extra)


def cmd_measure(cfg, args) -> int:
    K = parse_set(cfg["measure"]["set"])
    if isinstance(K, FullInterval):
        raise ConfigError("measure.set", "power-law verification needs an IFS")
    cert = natural_cert(K)
    run = RunDir("measure", cfg, args.out)
    rep = verify_power_law(
        K, cert, _int(cfg, "power_law", "samples", 1), _int(cfg, "power_law", "depth", 1), seed=_int(cfg, "run", "seed")
    )
    run.write_lines(
        "samples.jsonl",
        ({"x": frac_str(s.x), "r": frac_str(s.r), "lower": frac_str(s.lower), "upper": frac_str(s.upper), "verdict": s.verdict} for s in rep.samples),
    )
    for s in rep.samples:
        run.tally(s.verdict, f"x={frac_str(s.x)} r={frac_str(s.r)}")
    w = parse_weights(cfg["target"]["weights"])[0]
    params = derive_constants(w, cert, parse_theta(cfg["target"]["theta"]), _int(cfg, "construct", "R", 2))
    bc = beta_c(params)
    return run.finish(
        {
            "beta": str(cert.beta),
            "b1": frac_str(cert.b1),
            "b2": frac_str(cert.b2),
            "beta_c": {"degree": bc.degree, "exponent": str(bc.exponent), "lower_bound": bc.lower_bound.to_json()},
        }
    )


def cmd_game(cfg, args) -> int:
    action = args.action
    g = cfg["game"]
    if action == "replay":
        path = args.transcript or g["transcript"]
        if not path:
            raise ConfigError("game.transcript", "replay needs a transcript file")
        src = Path(path).read_text().splitlines()
        header, _, _ = G.parse_transcript(src)
        K = parse_set(header.get("playable", "interval"), "game.set") if header.get("playable") != "interval" else None
        res = G.replay(src, K)
        run = RunDir("game-replay", {**cfg, "source": Path(path).name}, args.out)
        out = res.lines
        run.write_lines("transcript.jsonl", out)
        same = [ln.strip() for ln in src if ln.strip()] == out
        run.tally(PASS if same else "fail", "replayed transcript differs")
        return run.finish({"identical": same})

    beta = _frac(cfg, "game", "beta")
    K = parse_set(g["set"], "game.set")
    try:
        config = G.GameConfig(beta, _int(cfg, "game", "N", 1), K, _frac(cfg, "game", "x0"), _frac(cfg, "game", "r0"), _int(cfg, "game", "rounds", 1))
    except ValueError as exc:
        raise ConfigError("game", str(exc)) from exc
    theta = parse_theta(cfg["target"]["theta"])
    w = parse_weights(cfg["target"]["weights"])[0]
    strategy = None
    if g["alice"] == "ba":
        strategy = G.AliceBAStrategy.build(config, theta, w, H_cap=_int(cfg, "game", "H_cap", 1))
        alice_factory = lambda: strategy  # noqa: E731
    elif g["alice"] == "empty":
        alice_factory = lambda: G.empty_alice  # noqa: E731
    else:
        raise ConfigError("game.alice", "must be ba or empty")
    seed0 = _int(cfg, "run", "seed")
    bob = g["bob"]
    if bob == "random":
        bob_factory = lambda s: G.RandomBob(s)  # noqa: E731
    elif bob == "greedy":
        c = strategy.tree.c if strategy else Fraction(1, 1000)
        targets = G.danger_targets(theta, w, c, 2000, RatInterval.ball(config.x0, config.r0))
        bob_factory = lambda s: G.GreedyDangerBob(targets, s)  # noqa: E731
    elif bob == "halving":
        bob_factory = lambda s: G.HalvingBob()  # noqa: E731
    elif bob == "replay":
        path = args.transcript or g["transcript"]
        if not path:
            raise ConfigError("game.transcript", "replay Bob needs a transcript file")
        _, rounds, _ = G.parse_transcript(Path(path).read_text().splitlines())
        moves = [(Fraction(r["bob"][0]), Fraction(r["bob"][1])) for r in rounds if "bob" in r]
        bob_factory = lambda s: G.ReplayBob(moves)  # noqa: E731
    else:
        raise ConfigError("game.bob", "must be random, greedy, halving or replay")
    n_games = 1 if action == "play" else _int(cfg, "game", "games", 1)
    run = RunDir(f"game-{action}", cfg, args.out)
    transcripts: list[str] = []
    summaries = G.tournament(config, alice_factory, bob_factory, range(seed0, seed0 + n_games), on_game=lambda r: transcripts.extend(r.lines))
    run.write_lines("transcript.jsonl" if action == "play" else "transcripts.jsonl", transcripts)
    run.write_lines("games.jsonl", (s.to_json() for s in summaries))
    for s in summaries:
        run.tally("fail" if s.status == G.ALICE_ILLEGAL else PASS, f"seed {s.seed}: Alice moved illegally")
        if s.avoids is not None:
            run.tally(PASS if s.avoids else "fail", f"seed {s.seed}: final ball meets removed intervals {s.hits}")
    extra = {"games": n_games, "statuses": sorted({s.status for s in summaries})}
    if strategy is not None:
        extra["R"] = frac_str(strategy.R)
        extra["max_bad_children"] = strategy.tree.max_bad
    return run.finish(extra)


def cmd_diagnostics(cfg, args) -> int:
    w = parse_weights(cfg["target"]["weights"])[0]
    theta = parse_theta(cfg["target"]["theta"])
    K = parse_set(cfg["measure"]["set"])
    R = _int(cfg, "construct", "R", 2)
    depth = _int(cfg, "construct", "depth", 0)
    cert = natural_cert(K)
    mode = cfg["construct"]["mode"]
    params = derive_constants(w, cert, theta, R, mode, _frac(cfg, "construct", "slack"))
    run = RunDir("diagnostics", cfg, args.out)
    run.write_json("params.json", params.to_json())
    extra: dict = {"theoretical_ok": params.shortfall.hi <= 0}
    if depth > 0:
        stage = run_stage(w, K, theta, R, depth, mode, cert, _frac(cfg, "construct", "slack"))
        run.write_lines("removals.jsonl", (removal_diagnostics(lv, params) for lv in stage.levels[1:]))
        growth = growth_report(stage.levels, params)
        run.write_lines("growth.jsonl", growth)
        extra["flagged_groups"] = sum(len(removal_diagnostics(lv, params)["flags"]) for lv in stage.levels[1:])
        extra["growth_ok"] = all(g["ok"] for g in growth)
    return run.finish(extra)


COMMANDS = {
    "construct": cmd_construct,
    "enumerate-lines": cmd_enumerate_lines,
    "verify": cmd_verify,
    "tree": cmd_tree,
    "measure": cmd_measure,
    "game": cmd_game,
    "diagnostics": cmd_diagnostics,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="badapprox", description="Exact constructions and certificates for weighted badly approximable points.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        sp.add_argument("--out", help="root directory for run directories")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--weights", help="'i,j' pairs separated by ';'")
        sp.add_argument("--theta", help="golden, sqrt2-1 or 'a0;[pre];(period)'")
        sp.add_argument("--set", dest="measure_set", help="quarter, cantor, interval or 'r,b;r,b'")
        sp.add_argument("--R", type=int)
        sp.add_argument("--depth", type=int)
        sp.add_argument("--mode", choices=["practical", "theoretical"])
        return sp

    common(sub.add_parser("construct", help="constants, levels, extraction, measure and certificate"))
    sp = common(sub.add_parser("enumerate-lines", help="lines whose removed interval meets a window"))
    sp.add_argument("--H-lo")
    sp.add_argument("--H-hi")
    sp.add_argument("--window")
    sp.add_argument("--c")
    sp = common(sub.add_parser("verify", help="certify a point record"))
    sp.add_argument("--point")
    sp.add_argument("--Qmax", type=int)
    sp.add_argument("--boundH", type=int)
    sp = common(sub.add_parser("tree", help="check a tree-like family and extract a regular subfamily"))
    sp.add_argument("--input")
    sp.add_argument("--extract", type=int)
    sp = common(sub.add_parser("measure", help="power-law verification and the construction exponent"))
    sp.add_argument("--samples", type=int)
    sp = common(sub.add_parser("game", help="play, run a tournament or replay a transcript"))
    sp.add_argument("action", choices=["play", "tournament", "replay"])
    sp.add_argument("--beta")
    sp.add_argument("--N", type=int)
    sp.add_argument("--rounds", type=int)
    sp.add_argument("--games", type=int)
    sp.add_argument("--alice", choices=["ba", "empty"])
    sp.add_argument("--bob", choices=["random", "greedy", "halving", "replay"])
    sp.add_argument("--transcript")
    common(sub.add_parser("diagnostics", help="counting-bound formulas and removal reports"))
    return p


def _overrides(args) -> dict:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    game_set = get("measure_set") if args.command == "game" else None
    return {
        "run": {"seed": get("seed"), "out": get("out")},
        "target": {"weights": get("weights"), "theta": get("theta")},
        "measure": {"set": None if args.command == "game" else get("measure_set")},
        "construct": {"R": get("R"), "depth": get("depth"), "mode": get("mode")},
        "certify": {"Qmax": get("Qmax"), "boundH": get("boundH")},
        "lines": {"H_lo": get("H_lo"), "H_hi": get("H_hi"), "window": get("window"), "c": get("c")},
        "power_law": {"samples": get("samples"), "depth": get("depth")},
        "game": {
            "beta": get("beta"),
            "N": get("N"),
            "rounds": get("rounds"),
            "games": get("games"),
            "alice": get("alice"),
            "bob": get("bob"),
            "transcript": get("transcript"),
            "set": game_set,
        },
    }


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, _overrides(args))
        args.out = cfg["run"]["out"]
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "field": exc.field, "message": str(exc)}), file=sys.stderr)
        return 2
    except (DegenerateWeightError, ThresholdError) as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except ConstructionExhausted as exc:
        print(json.dumps({"error": "construction_exhausted", "stage": exc.stage, "level": exc.level, "stats": exc.stats}, default=str), file=sys.stderr)
        return 3
    except G.StrategyContractError as exc:
        print(json.dumps({"error": "strategy_contract", "message": str(exc), "bad_children": exc.bad}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
