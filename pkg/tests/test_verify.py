import pytest

from p2pmatch.em import run_em
from p2pmatch.model import Location, MarketInstance, Matching
from p2pmatch.scenarios import make_toy_instance, random_instance, random_small_instance
from p2pmatch.verify import (
    InstanceTooLarge,
    UnknownActorError,
    blocking_actual_pairs,
    check_feasible,
    enumerate_feasible,
    exhaustive_stability_oracle,
    find_blocking_pairs,
    is_stable,
)


def test_empty_matching_is_feasible():
    inst = make_toy_instance("equal")
    assert check_feasible(Matching.from_pairs({}, inst), inst).feasible


def test_quota_breach_is_reported():
    inst = MarketInstance.build([2], [1], [5], [1])
    report = check_feasible(Matching.from_pairs({(0, 0): 3}, inst), inst)
    assert not report.feasible
    assert "sells 3 blocks but has 2" in report.violations[0]


def test_demand_breach_is_reported():
    inst = MarketInstance.build([5], [1], [2], [1])
    report = check_feasible(Matching.from_pairs({(0, 0): 3}, inst), inst)
    assert not report.feasible


def test_toy_output_is_feasible():
    inst = make_toy_instance("equal")
    assert check_feasible(run_em(inst).matching, inst).feasible


def test_unknown_actor_raises():
    inst = MarketInstance.build([1], [1], [1], [1])
    with pytest.raises(UnknownActorError):
        check_feasible(Matching.from_pairs({(9, 0): 1}, inst), inst)


@pytest.mark.parametrize("seed", range(30))
def test_symmetry_mutation_is_caught(seed):
    """Perturb the consumer-side record of one EM pair; the check must fail."""
    inst = random_instance(seed, max_sellers=8, max_consumers=8)
    res = run_em(inst)
    if not res.matching.pairs:
        pytest.skip("nothing matched")
    assert check_feasible(res.matching, inst).feasible
    key = sorted(res.matching.pairs)[seed % len(res.matching.pairs)]
    view = dict(res.matching.consumer_pairs)
    view[key] = view[key] + 1 if seed % 2 else view[key] - 1
    bad = Matching.from_pairs(res.matching.pairs, inst, consumer_pairs=view)
    report = check_feasible(bad, inst)
    assert not report.feasible
    assert any("asymmetric" in v for v in report.violations)


def _two_by_two():
    # seller 0 and consumer 0 are each other's first choice, as are 1 and 1
    return MarketInstance.build(
        [1, 1], ["0.5", "0.6"], [1, 1], ["0.9", "0.8"],
        seller_locations=[(0, 0), (1, 0)],
        consumer_locations=[(0, 0), (1, 0)],
    )


def test_swapped_matching_is_blocked_by_top_pair():
    inst = _two_by_two()
    swapped = Matching.from_pairs({(0, 1): 1, (1, 0): 1}, inst)
    assert blocking_actual_pairs(swapped, inst) == {(0, 0)}
    bp = find_blocking_pairs(swapped, inst)[0]
    assert bp.witness == (1, 1) and bp.pair_ranks == (0, 0)


def test_vacant_market_has_blocking_pairs():
    inst = _two_by_two()
    assert find_blocking_pairs(Matching.from_pairs({}, inst), inst)


def test_price_acceptability_filters_unprofitable_pairs():
    inst = MarketInstance.build([1], ["0.9"], [1], ["0.5"])
    empty = Matching.from_pairs({}, inst)
    assert not is_stable(empty, inst, "any")
    assert is_stable(empty, inst, "price")


def test_oracle_singleton():
    inst = MarketInstance.build([1], [1], [1], [0])
    (m,) = exhaustive_stability_oracle(inst)
    assert m.pairs == {(0, 0): 1}


def test_oracle_aligned_two_by_two_is_unique_and_equals_em():
    inst = _two_by_two()
    stable = exhaustive_stability_oracle(inst)
    assert len(stable) == 1
    assert stable[0].pairs == run_em(inst).matching.pairs == {(0, 0): 1, (1, 1): 1}


def test_oracle_guard():
    inst = MarketInstance.build([5, 5], [1, 1], [1], [1])
    with pytest.raises(InstanceTooLarge):
        exhaustive_stability_oracle(inst)


def test_enumeration_count_matches_independent_formula():
    # one seller with 2 blocks, consumers wanting 1 and 2: tables (x, y) with
    # x <= 1, y <= 2, x + y <= 2 -> (0,0) (0,1) (0,2) (1,0) (1,1)
    inst = MarketInstance.build([2], [1], [1, 2], [1, 1])
    assert len(list(enumerate_feasible(inst))) == 5


@pytest.mark.parametrize("seed", range(40))
def test_em_is_in_oracle_set(seed):
    inst = random_small_instance(seed)
    stable = exhaustive_stability_oracle(inst)
    assert run_em(inst).matching.pairs in [m.pairs for m in stable]
