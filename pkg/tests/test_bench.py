import numpy as np
import pytest

from upmdp.bench import PRESETS, UavConfig, example_distribution, example_pmc, gen_uav
from upmdp.mc import BatchChecker, bounded_reach, expected_reward, reach_prob
from upmdp.pmdp import instantiate, instantiate_many, is_pmc
from upmdp.polynomial import Polynomial
from upmdp.sampling import draw


def test_example_structure():
    m = example_pmc()
    assert is_pmc(m) and m.n_states == 8 and m.n_edges == 13
    one = Polynomial.constant(1, m.parameters)
    for row in m.transitions.values():
        assert sum((p for _, p in row), Polynomial.constant(0, m.parameters)) == one


def test_example_v08():
    assert reach_prob(instantiate(example_pmc(), {"v": 0.8})).value == pytest.approx(0.0544, abs=1e-12)


def test_example_distribution_inside():
    s = draw(example_distribution(), ["v"], 1000, 0)
    instantiate_many(example_pmc(), s.values)


def test_trivial_grid():
    cfg = UavConfig(grid=(1, 1, 1), obstacles=frozenset(), target=frozenset({(0, 0, 0)}), zones=1)
    m, dist = gen_uav(cfg)
    for u in draw(dist, m.parameters, 5, 0):
        assert reach_prob(instantiate(m, u), direction="max").value == 1.0


def test_parameter_count():
    m, dist = gen_uav()
    assert len(m.parameters) == 12
    assert set(dist.box) == set(m.parameters)
    m, _ = gen_uav(UavConfig(zones=6))
    assert len(m.parameters) == 24
    assert not is_pmc(m)


CORRIDOR = UavConfig(grid=(3, 1, 1), obstacles=frozenset(), target=frozenset({(2, 0, 0)}),
                     zones=1, wind={"W": 1})


def _corridor_chain(p):
    """Hand-built chain under 'always fly east': start, cell 0, cell 1, goal."""
    P = np.zeros((4, 4))
    P[0, 1] = 1.0
    P[1, 2], P[1, 1] = 1 - p, p  # east lands in cell 1, the west wind may blow it back
    P[2, 3] = 1.0
    P[3, 3] = 1.0
    return P


def test_corridor_oracle():
    m, _ = gen_uav(CORRIDOR)
    p = 0.5
    inst = instantiate(m, {q: p for q in m.parameters})
    P = _corridor_chain(p)
    assert reach_prob(inst, direction="max").value == pytest.approx(1.0)
    for k in range(8):
        ref = np.linalg.matrix_power(P, k)[0, 3]
        assert bounded_reach(inst, k=k, direction="max").value == pytest.approx(ref, abs=1e-12)
    # expected number of moves: rewards 1 per move, 0 for the start step
    assert expected_reward(inst, direction="min").value == pytest.approx((2 - p) / (1 - p), abs=1e-6)


def test_every_valuation_in_range_graph_preserving():
    for preset in PRESETS:
        m, dist = gen_uav(UavConfig(weather_preset=preset))
        corners = np.array([[lo for lo, _ in dist.box.values()], [hi for _, hi in dist.box.values()]])
        instantiate_many(m, corners)
        instantiate_many(m, draw(dist, m.parameters, 200, 3).values)


def test_biased_presets():
    _, d = gen_uav(UavConfig(weather_preset="west-biased"))
    assert d.box["p_z0_W"] == (0.5, 0.95) and d.box["p_z0_N"] == (0.05, 0.95)
    _, d = gen_uav(UavConfig(weather_preset="north-biased"))
    assert d.box["p_z2_N"] == (0.5, 0.95)
    for w in PRESETS.values():
        assert sum(w.values()) == 1


def test_obstacle_monotonicity():
    base = UavConfig()
    m0, dist = gen_uav(base)
    rng = np.random.default_rng(0)
    u = draw(dist, m0.parameters, 1, 5)[0]
    free = [(x, y, z) for x in range(6) for y in range(6) for z in range(3)
            if (x, y, z) not in base.obstacles and (x, y, z) not in base.target and (x, y, z) != base.start]
    prev = reach_prob(instantiate(m0, u), direction="max").value
    obstacles = set(base.obstacles)
    for _ in range(5):
        obstacles |= {free[i] for i in rng.choice(len(free), 3, replace=False)}
        m, _ = gen_uav(UavConfig(obstacles=frozenset(obstacles)))
        cur = reach_prob(instantiate(m, u), direction="max").value
        assert cur <= prev + 1e-6
        prev = cur


def test_default_is_nontrivial():
    m, dist = gen_uav()
    v = BatchChecker(m, "reach", "max").solve(instantiate_many(m, draw(dist, m.parameters, 200, 1).values))
    assert 0.1 < (v >= 0.9).mean() < 0.9


@pytest.mark.parametrize("kw", [
    {"grid": (0, 1, 1)},
    {"zones": 7},
    {"param_range": (0.0, 0.5)},
    {"weather_preset": "stormy"},
    {"target": frozenset({(0, 2, 0)})},  # inside the ridge
    {"start": (0, 2, 0)},
    {"target": frozenset()},
    {"obstacles": frozenset({(9, 9, 9)})},
])
def test_config_errors(kw):
    with pytest.raises(ValueError):
        UavConfig(**kw)
