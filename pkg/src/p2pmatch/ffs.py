"""First-come-first-serve baseline: a posted-price board served in arrival order."""

from __future__ import annotations

from typing import NamedTuple, Sequence

from .malice import MaliceConfig, MaliceInputs, apply_malice
from .model import MarketInstance, Matching, validate_instance
from .nem import PriceLedger, Trade
from .rng import SplitMix64


class FfsResult(NamedTuple):
    matching: Matching
    ledger: PriceLedger
    arrival_order: tuple[int, ...]


def seeded_arrival_order(instance: MarketInstance, seed: int) -> tuple[int, ...]:
    order = [c.index for c in instance.consumers]
    SplitMix64.stream(seed, "arrival").shuffle(order)
    return tuple(order)


def run_ffs(
    instance: MarketInstance,
    arrival_order: Sequence[int] | None = None,
    malice: MaliceConfig | MaliceInputs | None = None,
    strict_equality: bool = False,
) -> FfsResult:
    """Serve consumers one at a time from the cheapest board entry they can pay.

    Each arriving consumer keeps buying at the posted ask from the cheapest
    visible seller with stock left until its demand is met or nothing it can
    afford remains.  ``strict_equality`` only lets a consumer buy when its bid
    equals the ask exactly.  Favoured consumers (malice) jump the queue.
    """
    validate_instance(instance)
    if arrival_order is None:
        arrival_order = [c.index for c in instance.consumers]
    order = list(arrival_order)
    known = sorted(c.index for c in instance.consumers)
    if sorted(order) != known:
        raise ValueError("arrival_order must be a permutation of the consumers")
    if isinstance(malice, MaliceConfig):
        malice = apply_malice(instance, malice)
    malice = malice or MaliceInputs()

    if malice.priority_consumers is not None:
        first = set(malice.priority_consumers)
        order = [c for c in order if c in first] + [c for c in order if c not in first]

    visible = (
        set(malice.visible_sellers)
        if malice.visible_sellers is not None
        else {s.index for s in instance.sellers}
    )
    board = sorted(
        (s for s in instance.sellers if s.index in visible and s.supply > 0),
        key=lambda s: (s.ask, s.index),
    )
    stock = {s.index: s.supply for s in board}

    ledger = PriceLedger()
    for c in order:
        consumer = instance.consumer(c)
        need = consumer.demand
        for seller in board:
            if need == 0:
                break
            left = stock[seller.index]
            if left == 0:
                continue
            ok = consumer.bid == seller.ask if strict_equality else consumer.bid >= seller.ask
            if not ok:
                if not strict_equality:
                    break  # the board is sorted, nothing further is affordable
                continue
            n = min(need, left)
            ledger.add(Trade(seller.index, c, n, seller.ask))
            stock[seller.index] -= n
            need -= n

    matching = Matching.from_pairs(ledger.pair_totals(), instance)
    return FfsResult(matching, ledger, tuple(order))
