from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from badapprox import games as G
from badapprox.exact_arith import RatInterval
from badapprox.fractal_measure import CANTOR, QUARTER, FullInterval
from oracles import HALF

F = Fraction


def cfg(beta=F(1, 5), **kw):
    return G.GameConfig(F(beta), **kw)


# ---------------------------------------------------------------------------
# referee


def test_radius_floor_is_inclusive():
    c = cfg()
    s = G.referee_step(G.GameState.initial(c), c, [], (F(1, 2), F(1, 10)))
    assert s.status == G.ONGOING and s.r == F(1, 10)
    s = G.referee_step(G.GameState.initial(c), c, [], (F(1, 2), F(1, 10) - F(1, 10**9)))
    assert s.status == G.BOB_ILLEGAL


def test_alice_violations():
    c = cfg(N=2)
    s0 = G.GameState.initial(c)
    s = G.referee_step(s0, c, [(F(0), F(0))] * 3, (F(1, 2), F(1, 4)))
    assert s.status == G.ALICE_ILLEGAL
    s = G.referee_step(s0, c, [(F(0), F(1, 10) + F(1, 1000))], (F(1, 2), F(1, 4)))
    assert s.status == G.ALICE_ILLEGAL
    s = G.referee_step(s0, c, [("x", F(1))], (F(1, 2), F(1, 4)))
    assert s.status == G.ALICE_ILLEGAL


def test_bob_overlap_gives_block_witness():
    c = cfg()
    s0 = G.GameState.initial(c)
    s = G.referee_step(s0, c, [(F(1, 2), F(1, 10))], (F(11, 20), F(1, 10)))
    assert s.status == G.BOB_ILLEGAL and s.witness == {"block": ["1/2", "1/10"]}
    # closed sets: touching is a meet
    s = G.referee_step(s0, c, [(F(1, 2), F(1, 10))], (F(7, 10), F(1, 10)))
    assert s.status == G.BOB_ILLEGAL
    s = G.referee_step(s0, c, [(F(1, 2), F(1, 10))], (F(7, 10) + F(1, 100), F(1, 10)))
    assert s.status == G.ONGOING


def test_bob_nesting_and_playable_set():
    c = cfg()
    s0 = G.GameState.initial(c)
    assert G.referee_step(s0, c, [], (F(9, 10), F(1, 5))).status == G.BOB_ILLEGAL
    kc = G.GameConfig(F(1, 20), playable=CANTOR, x0=F(0), r0=F(1))
    s0 = G.GameState.initial(kc)
    assert G.referee_step(s0, kc, [], (F(1, 2), F(1, 5))).status == G.BOB_ILLEGAL
    assert G.referee_step(s0, kc, [], (F(2, 3), F(1, 5))).status == G.ONGOING
    with pytest.raises(ValueError):
        G.GameConfig(F(1, 3))


def test_empty_alice_halving_bob():
    c = cfg(max_rounds=20)
    res = G.play(c, G.empty_alice, G.HalvingBob())
    assert res.state.status == G.DEPTH_REACHED
    assert res.final.width == F(1, 2**20)
    assert res.final.center in RatInterval(F(0), F(1))
    hdr, rounds, _ = G.parse_transcript(res.lines)
    assert G.validate_transcript(hdr, rounds) == (True, None)


move = st.tuples(
    st.lists(st.tuples(st.fractions(0, 1, max_denominator=64), st.fractions(0, F(1, 8), max_denominator=64)), max_size=3),
    st.tuples(st.fractions(0, 1, max_denominator=64), st.fractions(F(1, 64), F(1, 2), max_denominator=64)),
)


@given(st.lists(move, min_size=1, max_size=6))
def test_referee_agrees_with_independent_validator(moves):
    c = cfg(F(1, 4), N=2, max_rounds=len(moves))
    s = G.GameState.initial(c)
    for a, b in moves:
        s = G.referee_step(s, c, a, b)
        if s.status != G.ONGOING:
            break
    hdr, rounds, _ = G.parse_transcript(G.transcript_lines(c, s))
    ok, _ = G.validate_transcript(hdr, rounds)
    assert ok == (s.status in (G.ONGOING, G.DEPTH_REACHED))
    if ok:
        for k, (x, r) in enumerate(s.bob):
            assert c.beta**k * c.r0 <= r <= c.r0


def test_random_bob_replay_is_byte_identical():
    c = cfg(F(1, 10), N=3, max_rounds=15)
    res = G.play(c, G.ScatterAlice(3), G.RandomBob(7))
    assert res.state.status == G.DEPTH_REACHED
    again = G.replay(res.lines)
    assert again.lines == res.lines


# ---------------------------------------------------------------------------
# reduction


def test_reduction_identity_and_parameter():
    inner = G.ScatterAlice(1)
    assert G.n_absolute_reduction(inner, F(1, 10), 1) is inner
    assert G.n_absolute_reduction(G.ScatterAlice(12), F(1, 10), 12).inner_beta == F(1, 10**12)


def test_reduction_transcript_equivalence():
    beta, N = F(1, 10), 12
    outer = G.n_absolute_reduction(G.ScatterAlice(N), beta, N)
    c = cfg(beta, max_rounds=36)
    res = G.play(c, outer, G.RandomBob(3))
    assert res.state.status == G.DEPTH_REACHED
    blocks, balls = G.inner_transcript(res.state, N)
    inner_cfg = G.GameConfig(beta**N, N, FullInterval(), c.x0, c.r0, 3)
    s = G.GameState.initial(inner_cfg)
    for q in range(3):
        s = G.referee_step(s, inner_cfg, blocks[q], balls[q + 1])
    assert s.status == G.DEPTH_REACHED
    assert s.ball == res.final


# ---------------------------------------------------------------------------
# diffuseness


@pytest.mark.parametrize("beta", [F(1, 10), F(3, 10)])
def test_interval_diffuse(beta):
    assert G.diffuse_check(FullInterval(), beta, trials=300).passed


def test_cantor_diffuse_examples():
    bad = G.diffuse_check(CANTOR, F(9, 10), trials=300)
    assert not bad.passed and bad.witness is not None
    x, rho = F(bad.witness["x"]), F(bad.witness["rho"])
    blocks = [(F(a), F(b)) for a, b in bad.witness["blocks"]]
    assert all(b <= F(9, 10) * rho for _, b in blocks)
    # independent confirmation: the level-8 cylinders of K inside B(x, rho) are all covered
    for cyl in CANTOR.cylinders(8):
        I = cyl.interval
        if I.lo >= x - rho and I.hi <= x + rho:
            assert any(abs(I.lo - a) <= b for a, b in blocks)
    beta = G.analytic_diffuse_beta(CANTOR)
    assert beta == F(1, 6)
    assert G.diffuse_check(CANTOR, beta, trials=400).passed
    assert G.analytic_diffuse_beta(QUARTER) == F(1, 8)
    assert G.analytic_diffuse_beta(FullInterval()) == F(1, 3)


def test_grouped_diffuse_on_cantor():
    b = G.grouped_diffuse_beta(F(1, 6), 2)
    assert b == F(1, 576)
    assert G.diffuse_check(CANTOR, b, N=2, trials=300).passed


# ---------------------------------------------------------------------------
# strategy


def test_strategy_scale_examples():
    assert G.strategy_R(F(1, 5), fallback=False) == 25
    assert G.strategy_R(F(1, 12)) == 12**4
    assert G.strategy_R(F(1, 30)) == 900
    assert G.strategy_R(F(1, 10)) == 10**4
    assert G.remainder_bound(F(1, 30), 900, F(1, 2), 0) > 0
    assert G.remainder_bound(F(1, 10), 100, F(1, 2), 0) < 0


def test_danger_tree_degree(golden):
    c = cfg(F(1, 5))
    tree = G.DangerTree(RatInterval(F(0), F(1)), G.strategy_R(F(1, 5), fallback=False), golden, HALF, F(1, 20000), 100)
    assert tree.degree == 20
    kept, blocked = tree.split(0, tree.root)
    assert len(kept) == 20 and len(blocked) == 5


@pytest.mark.parametrize("beta", [F(1, 10), F(1, 30)])
def test_strategy_games_against_both_bobs(beta, golden):
    c = cfg(beta, N=12, x0=F(1, 2), r0=F(1, 2), max_rounds=20)
    for seed in range(4):
        strat = G.AliceBAStrategy.build(c, golden, HALF)
        targets = G.danger_targets(golden, HALF, strat.tree.c, 400, RatInterval(F(0), F(1)))
        for bob in (G.RandomBob(seed), G.GreedyDangerBob(targets, seed)):
            res = G.play(c, strat, bob)
            assert res.state.status == G.DEPTH_REACHED
            assert max(len(b) for b in res.state.alice) <= 12
            for k, blocks in enumerate(res.state.alice):
                assert all(rad <= beta * res.state.bob[k][1] for _, rad in blocks)
            ok, hits, H = G.final_avoids(res, strat)
            assert ok and hits == [] and H > 1
            assert G.certify_final(res, strat).passed


def test_dual_bound_below():
    assert G.dual_bound_below(HALF, 9) == 4  # 4^(3/2) = 8 < 9, 5^(3/2) > 9
    assert G.dual_bound_below(HALF, 8) == 3


def test_tournament_summary_schema(golden):
    c = cfg(F(1, 30), N=12, max_rounds=8)
    out = G.tournament(c, lambda: G.AliceBAStrategy.build(c, golden, HALF), G.RandomBob, range(2))
    row = out[0].to_json()
    assert set(row) == {"seed", "status", "rounds", "max_blocks", "final", "avoids", "resolution", "hits", "dual"}
    assert row["avoids"] is True and row["dual"] in ("pass", None)
