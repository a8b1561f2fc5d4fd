from fractions import Fraction

import pytest

from p2pmatch.em import (
    ConsumerState,
    Request,
    SellerState,
    consumer_rebid_target,
    request_bound,
    run_em,
    seller_accept,
)
from p2pmatch.model import ActorId, MarketInstance, PreferenceOrder
from p2pmatch.scenarios import make_toy_instance, random_instance
from p2pmatch.verify import check_feasible, is_stable

A, B, C_ = 0, 1, 2


def ranking(seller, *consumers):
    return PreferenceOrder(
        ActorId("seller", seller), tuple(ActorId("consumer", c) for c in consumers)
    )


def test_seller_accept_reallocates_to_higher_ranked():
    state = SellerState(A, 3, [], {1: 2, 2: 1})
    new, refused = seller_accept(state, [Request(3, 2, Fraction(3, 5))], 3, ranking(A, 3, 1, 2))
    assert new.allocation == {3: 2, 1: 1}
    assert refused == {1: 1, 2: 1}


def test_seller_accept_partial_grant():
    state = SellerState(A, 3)
    reqs = [Request(1, 2, Fraction(1)), Request(2, 2, Fraction(1))]
    new, refused = seller_accept(state, reqs, 3, ranking(A, 1, 2))
    assert new.allocation == {1: 2, 2: 1}
    assert refused == {2: 1}


def test_seller_accept_undersubscribed():
    new, refused = seller_accept(SellerState(A, 5), [Request(1, 2, Fraction(1))], 5, ranking(A, 1))
    assert new.allocation == {1: 2}
    assert refused == {}


def test_seller_accept_requires_complete_preference():
    with pytest.raises(ValueError):
        seller_accept(SellerState(A, 1), [Request(7, 1, Fraction(1))], 1, ranking(A, 1))


def test_rebid_returns_latest_provider_after_third_party_revocation():
    st = ConsumerState(1, 2, [C_], latest_provider=B)
    assert consumer_rebid_target(st, A) == B
    assert st.unprocessed == [B, C_]


def test_rebid_moves_on_when_latest_provider_revokes():
    st = ConsumerState(1, 2, [C_], latest_provider=B)
    assert consumer_rebid_target(st, B) == C_


def test_rebid_exhausted():
    st = ConsumerState(1, 2, [], latest_provider=B)
    assert consumer_rebid_target(st, B) is None


def test_rebid_multiple_revokers_reinserts_once():
    st = ConsumerState(1, 2, [C_], latest_provider=B)
    assert consumer_rebid_target(st, {A, B}) == B
    assert st.unprocessed == [B, C_]


def test_singleton_market():
    res = run_em(MarketInstance.build([1], [1], [1], [1]))
    assert res.matching.pairs == {(0, 0): 1}
    assert res.request_count == 1
    assert res.rounds == 1


def test_empty_markets_terminate():
    assert run_em(MarketInstance.build([], [], [2], [1])).matching.pairs == {}
    assert run_em(MarketInstance.build([2], [1], [], [])).request_count == 0


def test_toy_equal_regime_narrative():
    res = run_em(make_toy_instance("equal"))
    r1, r2 = res.traces[0], res.traces[1]
    assert (A, 1, 2) in r1.acceptances and (A, 2, 1) in r1.acceptances
    # C fills consumer 4 completely and consumer 3 only partly
    assert (C_, 4, 1) in r1.acceptances and (C_, 3, 2) in r1.rejections
    lost = {(r.seller, r.lost_by): r.gained_by for r in r2.reallocations}
    assert lost == {(A, 1): (3,), (A, 2): (3,)}
    later = [(c, s) for t in res.traces[1:] for c, s, _ in t.requests if c in (1, 2)]
    assert later and all(s == B for _, s in later)
    assert res.rounds <= 4
    assert all(v == 0 for v in res.matching.unmatched_consumer_blocks.values())


def test_toy_deficit_regime_leaves_consumers_1_and_2_short():
    res = run_em(make_toy_instance("deficit"))
    short = {c: n for c, n in res.matching.unmatched_consumer_blocks.items() if n}
    assert set(short) == {1, 2}
    assert sum(short.values()) == 3


def test_toy_surplus_regime_matches_everyone():
    res = run_em(make_toy_instance("surplus"))
    assert all(v == 0 for v in res.matching.unmatched_consumer_blocks.values())
    assert sum(res.matching.unmatched_seller_blocks.values()) == 2


@pytest.mark.parametrize("seed", range(25))
def test_random_outputs_are_stable_feasible_and_bounded(seed):
    inst = random_instance(seed, max_sellers=12, max_consumers=12)
    res = run_em(inst)
    assert check_feasible(res.matching, inst).feasible
    assert is_stable(res.matching, inst)
    assert res.request_count <= request_bound(inst)


def test_seller_side_monotonicity_in_trace():
    """The worst holder at each seller never gets better between rounds."""
    inst = random_instance(3, max_sellers=10, max_consumers=20)
    res = run_em(inst)
    from p2pmatch.model import seller_preference

    everyone = [c.id for c in inst.consumers]
    worst_prev: dict[int, int] = {}
    for t in res.traces:
        for s, alloc in t.allocations:
            if not alloc:
                continue
            rank = seller_preference(ActorId("seller", s), everyone, inst).rank()
            worst = max(rank[ActorId("consumer", c)] for c, _ in alloc)
            full = sum(n for _, n in alloc) == inst.seller(s).supply
            if s in worst_prev and full:
                assert worst <= worst_prev[s]
            if full:
                worst_prev[s] = worst


def test_determinism():
    inst = random_instance(11)
    a, b = run_em(inst), run_em(inst)
    assert a.matching == b.matching
    assert a.traces == b.traces
