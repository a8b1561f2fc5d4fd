"""Instance generators: grouped-bid networks, the four-consumer toy market
and small random markets for property checks."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

from .malice import MaliceConfig, MaliceInputs, apply_malice  # noqa: F401  (re-export)
from .model import Consumer, Location, MarketInstance, Seller, to_price
from .rng import SplitMix64


@dataclass(frozen=True)
class NetworkGenParams:
    n_sellers: int = 45
    n_consumers: int = 45
    groups: int = 5
    seller_mean: Fraction = Fraction(4, 5)
    seller_step: Fraction = Fraction(1, 10)
    consumer_mean: Fraction = Fraction(4, 5)
    consumer_step: Fraction = Fraction(1, 10)
    min_blocks: int = 1
    max_blocks: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("seller_mean", "seller_step", "consumer_mean", "consumer_step"):
            object.__setattr__(self, name, to_price(getattr(self, name)))
        if self.groups < 1 or self.groups % 2 == 0:
            raise ValueError("groups must be an odd count >= 1")
        if self.n_sellers % self.groups or self.n_consumers % self.groups:
            raise ValueError("agent counts must divide evenly into groups")
        if self.seller_step < 0 or self.consumer_step < 0:
            raise ValueError("bid steps must be >= 0")
        if not 0 <= self.min_blocks <= self.max_blocks:
            raise ValueError("need 0 <= min_blocks <= max_blocks")


def gen_grouped_bids(mean, step, groups: int, members_per_group: int) -> list[Fraction]:
    """Symmetric price ladder around ``mean``; group ``k`` gets rung ``k``.

    With five groups the rungs are ``mean - 2*step, ..., mean + 2*step``.
    """
    mean, step = to_price(mean), to_price(step)
    if groups < 1 or groups % 2 == 0:
        raise ValueError("groups must be an odd count >= 1")
    half = groups // 2
    ladder = [mean + (k - half) * step for k in range(groups)]
    return [ladder[k] for k in range(groups) for _ in range(members_per_group)]


def gen_network(params: NetworkGenParams) -> MarketInstance:
    asks = gen_grouped_bids(
        params.seller_mean, params.seller_step, params.groups, params.n_sellers // params.groups
    )
    bids = gen_grouped_bids(
        params.consumer_mean,
        params.consumer_step,
        params.groups,
        params.n_consumers // params.groups,
    )
    sellers = []
    for i in range(params.n_sellers):
        rng = SplitMix64.stream(params.seed, "seller", i)
        blocks = rng.randint(params.min_blocks, params.max_blocks)
        sellers.append(Seller(i, blocks, asks[i], Location(rng.random(), rng.random())))
    consumers = []
    for i in range(params.n_consumers):
        rng = SplitMix64.stream(params.seed, "consumer", i)
        blocks = rng.randint(params.min_blocks, params.max_blocks)
        consumers.append(Consumer(i, blocks, bids[i], Location(rng.random(), rng.random())))
    return MarketInstance(tuple(sellers), tuple(consumers))


def random_instance(
    seed: int,
    max_sellers: int = 45,
    max_consumers: int = 45,
    max_blocks: int = 5,
    price_levels: int = 5,
    min_agents: int = 1,
    min_price=Fraction(1, 2),
) -> MarketInstance:
    """Random market with sizes drawn from ``[min_agents, max_*]``.

    Prices come from a coarse grid of tenths starting at ``min_price`` so
    equal-price ties, and hence the distance and index tie-breaks, are
    exercised often.
    """
    meta = SplitMix64.stream(seed, "sizes")
    n_s = meta.randint(min_agents, max_sellers)
    n_c = meta.randint(min_agents, max_consumers)
    grid = [to_price(min_price) + Fraction(k, 10) for k in range(price_levels)]
    sellers = []
    for i in range(n_s):
        rng = SplitMix64.stream(seed, "seller", i)
        sellers.append(
            Seller(
                i,
                rng.randint(1, max_blocks),
                grid[rng.randint(0, price_levels - 1)],
                Location(rng.random(), rng.random()),
            )
        )
    consumers = []
    for i in range(n_c):
        rng = SplitMix64.stream(seed, "consumer", i)
        consumers.append(
            Consumer(
                i,
                rng.randint(1, max_blocks),
                grid[rng.randint(0, price_levels - 1)],
                Location(rng.random(), rng.random()),
            )
        )
    return MarketInstance(tuple(sellers), tuple(consumers))


def random_small_instance(seed: int, max_total: int = 6) -> MarketInstance:
    """Market with at most ``max_total`` blocks per side, for brute force."""
    rng = SplitMix64.stream(seed, "small")

    def split(total: int) -> list[int]:
        parts = []
        while total > 0:
            k = rng.randint(1, total)
            parts.append(k)
            total -= k
        return parts

    supplies = split(rng.randint(1, max_total))
    demands = split(rng.randint(1, max_total))
    levels = [Fraction(5 + k, 10) for k in range(3)]
    sellers = tuple(
        Seller(i, d, levels[rng.randint(0, 2)], Location(rng.random(), rng.random()))
        for i, d in enumerate(supplies)
    )
    consumers = tuple(
        Consumer(i, b, levels[rng.randint(0, 2)], Location(rng.random(), rng.random()))
        for i, b in enumerate(demands)
    )
    return MarketInstance(sellers, consumers)


# Toy market: sellers A, B, C are indices 0, 1, 2; consumers keep their
# narrative numbers 1..4.
TOY_SELLERS = "ABC"
_TOY_SELLER_LOC = {0: (0.0, 0.0), 1: (4.0, 0.0), 2: (2.0, 3.0)}
_TOY_CONSUMER_LOC = {1: (-1.0, -2.0), 2: (1.5, -2.0), 3: (0.5, 3.0), 4: (3.0, 2.5)}
_TOY_BIDS = {1: Fraction(2, 5), 2: Fraction(2, 5), 3: Fraction(3, 5), 4: Fraction(7, 10)}
_TOY_SUPPLY = {
    "equal": (3, 3, 3),
    "surplus": (4, 3, 3),
    "deficit": (3, 1, 2),
}
_TOY_DEMAND = {
    "equal": (2, 2, 4, 1),
    "surplus": (2, 2, 3, 1),
    "deficit": (2, 2, 4, 1),
}


def make_toy_instance(
    regime: Literal["equal", "surplus", "deficit"] = "equal",
    ask=Fraction(1, 2),
) -> MarketInstance:
    """Three equal-price sellers and four consumers placed so that distances
    alone fix the consumers' seller rankings and the sellers' tie-breaks."""
    if regime not in _TOY_SUPPLY:
        raise ValueError(f"unknown regime {regime!r}")
    ask = to_price(ask)
    sellers = tuple(
        Seller(i, d, ask, Location(*_TOY_SELLER_LOC[i]))
        for i, d in enumerate(_TOY_SUPPLY[regime])
    )
    consumers = tuple(
        Consumer(k, b, _TOY_BIDS[k], Location(*_TOY_CONSUMER_LOC[k]))
        for k, b in zip((1, 2, 3, 4), _TOY_DEMAND[regime])
    )
    return MarketInstance(sellers, consumers)
