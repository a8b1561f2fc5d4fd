"""Market domain types, preference construction and virtual-agent expansion.

Prices are held as :class:`fractions.Fraction` so that equality ties between
bids are exact and tie-breaking is reproducible.  Floats given by callers are
quantized to ``PRICE_DECIMALS`` decimal places on the way in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Literal, Mapping, Sequence

PRICE_DECIMALS = 6

Kind = Literal["seller", "consumer"]


class InstanceError(ValueError):
    """Raised when a market instance violates one of its invariants."""

    def __init__(self, message: str, actor: "ActorId | None" = None):
        super().__init__(message)
        self.actor = actor


def to_price(value) -> Fraction:
    """Convert ``value`` to an exact price.

    Rationals pass through unchanged; floats and strings are quantized to
    ``PRICE_DECIMALS`` decimal places.
    """
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InstanceError(f"non-finite price {value!r}")
        value = repr(value)
    dec = Decimal(str(value))
    if not dec.is_finite():
        raise InstanceError(f"non-finite price {value!r}")
    return Fraction(round(dec, PRICE_DECIMALS))


@dataclass(frozen=True, order=True)
class ActorId:
    kind: Kind
    index: int

    def __str__(self) -> str:
        return f"{self.kind[0]}{self.index}"


@dataclass(frozen=True)
class Location:
    x: float = 0.0
    y: float = 0.0

    def distance(self, other: "Location") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Seller:
    index: int
    supply: int
    ask: Fraction
    location: Location = Location()

    @property
    def id(self) -> ActorId:
        return ActorId("seller", self.index)


@dataclass(frozen=True)
class Consumer:
    index: int
    demand: int
    bid: Fraction
    location: Location = Location()

    @property
    def id(self) -> ActorId:
        return ActorId("consumer", self.index)


@dataclass(frozen=True)
class MarketInstance:
    """Sellers and consumers of one market, the input of every algorithm."""

    sellers: tuple[Seller, ...]
    consumers: tuple[Consumer, ...]
    block_size: float = 1.0  # KWh per block, informational only

    def __post_init__(self):
        object.__setattr__(self, "sellers", tuple(self.sellers))
        object.__setattr__(self, "consumers", tuple(self.consumers))

    @classmethod
    def build(
        cls,
        supplies: Sequence[int],
        asks: Sequence,
        demands: Sequence[int],
        bids: Sequence,
        seller_locations: Sequence[tuple[float, float]] | None = None,
        consumer_locations: Sequence[tuple[float, float]] | None = None,
        block_size: float = 1.0,
    ) -> "MarketInstance":
        """Convenience constructor from parallel lists, indices 0..n-1."""
        if len(supplies) != len(asks) or len(demands) != len(bids):
            raise InstanceError("quantity and price lists differ in length")
        sloc = seller_locations or [(0.0, 0.0)] * len(supplies)
        cloc = consumer_locations or [(0.0, 0.0)] * len(demands)
        sellers = tuple(
            Seller(i, int(d), to_price(a), Location(*loc))
            for i, (d, a, loc) in enumerate(zip(supplies, asks, sloc))
        )
        consumers = tuple(
            Consumer(i, int(b), to_price(p), Location(*loc))
            for i, (b, p, loc) in enumerate(zip(demands, bids, cloc))
        )
        return cls(sellers, consumers, block_size)

    def seller(self, index: int) -> Seller:
        return self._seller_map()[index]

    def consumer(self, index: int) -> Consumer:
        return self._consumer_map()[index]

    def _seller_map(self) -> dict[int, Seller]:
        cached = self.__dict__.get("_smap")
        if cached is None:
            cached = {s.index: s for s in self.sellers}
            object.__setattr__(self, "_smap", cached)
        return cached

    def _consumer_map(self) -> dict[int, Consumer]:
        cached = self.__dict__.get("_cmap")
        if cached is None:
            cached = {c.index: c for c in self.consumers}
            object.__setattr__(self, "_cmap", cached)
        return cached

    @property
    def total_supply(self) -> int:
        return sum(s.supply for s in self.sellers)

    @property
    def total_demand(self) -> int:
        return sum(c.demand for c in self.consumers)

    def with_prices(
        self, asks: Mapping[int, Fraction], bids: Mapping[int, Fraction]
    ) -> "MarketInstance":
        """Copy with replaced asks/bids for the given indices."""
        sellers = tuple(
            Seller(s.index, s.supply, asks.get(s.index, s.ask), s.location)
            for s in self.sellers
        )
        consumers = tuple(
            Consumer(c.index, c.demand, bids.get(c.index, c.bid), c.location)
            for c in self.consumers
        )
        return MarketInstance(sellers, consumers, self.block_size)

    def restricted(
        self, supplies: Mapping[int, int], demands: Mapping[int, int]
    ) -> "MarketInstance":
        """Sub-market of the listed agents with residual quantities."""
        sellers = tuple(
            Seller(s.index, supplies[s.index], s.ask, s.location)
            for s in self.sellers
            if s.index in supplies
        )
        consumers = tuple(
            Consumer(c.index, demands[c.index], c.bid, c.location)
            for c in self.consumers
            if c.index in demands
        )
        return MarketInstance(sellers, consumers, self.block_size)


def validate_instance(instance: MarketInstance) -> MarketInstance:
    """Return ``instance`` unchanged if every invariant holds, else raise."""
    for kind, agents in (("seller", instance.sellers), ("consumer", instance.consumers)):
        seen: set[int] = set()
        for a in agents:
            aid = ActorId(kind, a.index)
            if not isinstance(a.index, int) or a.index < 0:
                raise InstanceError(f"invalid index for {aid}", aid)
            if a.index in seen:
                raise InstanceError(f"duplicate id {aid}", aid)
            seen.add(a.index)
            qty = a.supply if kind == "seller" else a.demand
            what = "supply" if kind == "seller" else "demand"
            if not isinstance(qty, int) or isinstance(qty, bool):
                raise InstanceError(f"non-integer {what} for {aid}", aid)
            if qty < 0:
                raise InstanceError(f"negative {what} {qty} for {aid}", aid)
            price = a.ask if kind == "seller" else a.bid
            if not isinstance(price, Fraction):
                raise InstanceError(f"price of {aid} is not exact", aid)
            if price < 0:
                raise InstanceError(f"negative price {price} for {aid}", aid)
            if not (math.isfinite(a.location.x) and math.isfinite(a.location.y)):
                raise InstanceError(f"non-finite location for {aid}", aid)
    if not math.isfinite(instance.block_size) or instance.block_size <= 0:
        raise InstanceError("block_size must be positive and finite")
    return instance


@dataclass(frozen=True)
class PreferenceOrder:
    owner: ActorId
    ranked: tuple[ActorId, ...]

    def rank(self) -> dict[ActorId, int]:
        return {a: r for r, a in enumerate(self.ranked)}

    def __iter__(self):
        return iter(self.ranked)

    def __len__(self):
        return len(self.ranked)


def consumer_preference(consumer: ActorId, instance: MarketInstance) -> PreferenceOrder:
    """Sellers by ask ascending, then distance ascending, then index."""
    c = instance.consumer(consumer.index)
    ordered = sorted(
        instance.sellers,
        key=lambda s: (s.ask, s.location.distance(c.location), s.index),
    )
    return PreferenceOrder(consumer, tuple(s.id for s in ordered))


def seller_preference(
    seller: ActorId, bidders: Iterable[ActorId], instance: MarketInstance
) -> PreferenceOrder:
    """Bidding consumers by bid descending, then distance ascending, then index."""
    s = instance.seller(seller.index)
    people = [instance.consumer(b.index) for b in bidders]
    ordered = sorted(
        people, key=lambda c: (-c.bid, c.location.distance(s.location), c.index)
    )
    return PreferenceOrder(seller, tuple(c.id for c in ordered))


@dataclass(frozen=True)
class VirtualExpansion:
    """One virtual agent per block.  Position ``k`` holds the actual owner of
    virtual agent ``k + 1``."""

    virtual_sellers: tuple[int, ...]
    virtual_consumers: tuple[int, ...]


def expand_virtual(instance: MarketInstance) -> VirtualExpansion:
    vs = tuple(
        s.index
        for s in sorted(instance.sellers, key=lambda s: s.index)
        for _ in range(s.supply)
    )
    vc = tuple(
        c.index
        for c in sorted(instance.consumers, key=lambda c: c.index)
        for _ in range(c.demand)
    )
    return VirtualExpansion(vs, vc)


@dataclass(frozen=True)
class Matching:
    """Per-pair block counts between actual sellers and consumers.

    ``pairs`` maps ``(seller index, consumer index)`` to a positive block
    count as recorded by the sellers.  ``consumer_pairs`` optionally holds the
    same table as recorded by the consumers; when present the verifier checks
    that both views agree.
    """

    pairs: Mapping[tuple[int, int], int] = field(default_factory=dict)
    unmatched_consumer_blocks: Mapping[int, int] = field(default_factory=dict)
    unmatched_seller_blocks: Mapping[int, int] = field(default_factory=dict)
    consumer_pairs: Mapping[tuple[int, int], int] | None = None

    @classmethod
    def from_pairs(
        cls,
        pairs: Mapping[tuple[int, int], int],
        instance: MarketInstance,
        consumer_pairs: Mapping[tuple[int, int], int] | None = None,
    ) -> "Matching":
        clean = {k: int(v) for k, v in sorted(pairs.items()) if v}
        sold: dict[int, int] = {}
        got: dict[int, int] = {}
        for (s, c), n in clean.items():
            sold[s] = sold.get(s, 0) + n
            got[c] = got.get(c, 0) + n
        if consumer_pairs is not None:
            consumer_pairs = {k: int(v) for k, v in sorted(consumer_pairs.items()) if v}
        return cls(
            clean,
            {c.index: c.demand - got.get(c.index, 0) for c in instance.consumers},
            {s.index: s.supply - sold.get(s.index, 0) for s in instance.sellers},
            consumer_pairs,
        )

    @classmethod
    def from_views(
        cls,
        seller_view: Mapping[int, Mapping[int, int]],
        consumer_view: Mapping[int, Mapping[int, int]],
        instance: MarketInstance,
    ) -> "Matching":
        """Build from ``{seller: {consumer: n}}`` and ``{consumer: {seller: n}}``."""
        a = {(s, c): n for s, row in seller_view.items() for c, n in row.items() if n}
        b = {(s, c): n for c, row in consumer_view.items() for s, n in row.items() if n}
        return cls.from_pairs(a, instance, consumer_pairs=b)

    def seller_view(self) -> dict[int, dict[int, int]]:
        out: dict[int, dict[int, int]] = {}
        for (s, c), n in self.pairs.items():
            out.setdefault(s, {})[c] = n
        return out

    def consumer_view(self) -> dict[int, dict[int, int]]:
        src = self.pairs if self.consumer_pairs is None else self.consumer_pairs
        out: dict[int, dict[int, int]] = {}
        for (s, c), n in src.items():
            out.setdefault(c, {})[s] = n
        return out

    def sold(self, seller: int) -> int:
        return sum(n for (s, _), n in self.pairs.items() if s == seller)

    def received(self, consumer: int) -> int:
        return sum(n for (_, c), n in self.pairs.items() if c == consumer)

    @property
    def total_blocks(self) -> int:
        return sum(self.pairs.values())
