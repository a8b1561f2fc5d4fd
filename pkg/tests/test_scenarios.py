from dataclasses import replace
from fractions import Fraction as F

import pytest

from p2pmatch.malice import MaliceConfig, apply_malice
from p2pmatch.rng import SplitMix64
from p2pmatch.scenarios import (
    NetworkGenParams,
    gen_grouped_bids,
    gen_network,
    make_toy_instance,
)


def test_splitmix_reference_values():
    # first outputs of the reference SplitMix64 generator seeded with 0
    rng = SplitMix64(0)
    assert [rng.next_u64() for _ in range(3)] == [
        0xE220A8397B1DCDAF,
        0x6E789E6AA1B965F4,
        0x06C45D188009454F,
    ]


def test_streams_are_independent_of_each_other():
    a = SplitMix64.stream(7, "seller", 3)
    b = SplitMix64.stream(7, "seller", 3)
    c = SplitMix64.stream(7, "seller", 4)
    xs = [a.next_u64() for _ in range(5)]
    assert xs == [b.next_u64() for _ in range(5)]
    assert xs != [c.next_u64() for _ in range(5)]


def test_randint_range_and_errors():
    rng = SplitMix64(1)
    draws = {rng.randint(1, 5) for _ in range(500)}
    assert draws == {1, 2, 3, 4, 5}
    with pytest.raises(ValueError):
        rng.randint(3, 2)


def test_grouped_bids_ladder():
    assert sorted(set(gen_grouped_bids("0.8", "0.1", 5, 9))) == [
        F(6, 10), F(7, 10), F(8, 10), F(9, 10), F(1),
    ]
    assert set(gen_grouped_bids("0.8", 0, 5, 2)) == {F(4, 5)}


def test_grouped_bids_rejects_even_groups():
    with pytest.raises(ValueError):
        gen_grouped_bids(1, 0, 4, 1)


def test_network_is_deterministic_and_sized():
    a = gen_network(NetworkGenParams(seed=42))
    b = gen_network(NetworkGenParams(seed=42))
    assert a == b
    assert len(a.sellers) == len(a.consumers) == 45
    for agents in (a.sellers, a.consumers):
        prices = [getattr(x, "ask", None) or getattr(x, "bid") for x in agents]
        for k in range(5):
            assert len(set(prices[9 * k: 9 * k + 9])) == 1
    assert all(1 <= s.supply <= 5 for s in a.sellers)
    assert all(1 <= c.demand <= 5 for c in a.consumers)


def test_growing_the_network_keeps_existing_draws():
    small = gen_network(NetworkGenParams(n_sellers=10, n_consumers=10, seed=3))
    big = gen_network(NetworkGenParams(n_sellers=45, n_consumers=45, seed=3))
    assert [s.supply for s in small.sellers] == [s.supply for s in big.sellers[:10]]
    assert [c.location for c in small.consumers] == [c.location for c in big.consumers[:10]]


def test_network_params_validation():
    with pytest.raises(ValueError):
        NetworkGenParams(n_sellers=44)
    with pytest.raises(ValueError):
        NetworkGenParams(seller_step=-1)


@pytest.mark.parametrize(
    "regime, supply, demand", [("equal", 9, 9), ("surplus", 10, 8), ("deficit", 6, 9)]
)
def test_toy_totals(regime, supply, demand):
    inst = make_toy_instance(regime)
    assert (inst.total_supply, inst.total_demand) == (supply, demand)
    assert [c.bid for c in inst.consumers] == [F(2, 5), F(2, 5), F(3, 5), F(7, 10)]
    assert len({s.ask for s in inst.sellers}) == 1


def test_malice_supply_favor_caps():
    inst = gen_network(NetworkGenParams())
    caps = apply_malice(inst, MaliceConfig("dam_supply_favor")).supply_caps
    assert sorted(caps.values()).count(20.0) == 15
    assert sorted(caps.values()).count(0.0) == 30


def test_malice_hide_sellers_keeps_dearest():
    inst = gen_network(NetworkGenParams())
    visible = apply_malice(inst, MaliceConfig("ffs_hide_sellers")).visible_sellers
    assert len(visible) == 15
    cutoff = min(inst.seller(s).ask for s in visible)
    hidden = [s for s in inst.sellers if s.index not in visible]
    assert all(s.ask <= cutoff for s in hidden)


def test_malice_with_no_favourites_is_empty():
    inst = gen_network(NetworkGenParams())
    for kind in ("dam_supply_favor", "ffs_favor_consumers"):
        assert apply_malice(inst, MaliceConfig(kind, favored_count=0)).is_empty


def test_malice_population_guard():
    inst = gen_network(replace(NetworkGenParams(), n_sellers=10, n_consumers=10))
    with pytest.raises(ValueError):
        apply_malice(inst, MaliceConfig("dam_supply_favor", favored_count=15))
