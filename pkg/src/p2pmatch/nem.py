"""Negotiated matching: repeated EM runs with bids walking towards limits.

Between iterations every remaining seller lowers its ask by a fixed step and
every remaining consumer raises its bid, so that on the last iteration asks
sit exactly at ``min_sell`` and bids at ``max_buy``.  Pairs that trade in an
iteration leave the market with their settled price fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, NamedTuple

from .em import EmResult, run_em
from .model import MarketInstance, Matching, to_price, validate_instance


class NemParamsError(ValueError):
    pass


@dataclass(frozen=True)
class NemParams:
    iterations: int = 6
    max_buy: Fraction = Fraction(1)
    min_sell: Fraction = Fraction(1, 10)
    force_last_trades: bool = True

    def __post_init__(self):
        object.__setattr__(self, "max_buy", to_price(self.max_buy))
        object.__setattr__(self, "min_sell", to_price(self.min_sell))
        if self.iterations < 2:
            raise NemParamsError(f"need at least 2 iterations, got {self.iterations}")


@dataclass(frozen=True)
class Trade:
    seller: int
    consumer: int
    blocks: int
    price: Fraction


@dataclass
class PriceLedger:
    """Settled price per ``(consumer, seller, block slot)``; slots start at 1."""

    entries: dict[tuple[int, int, int], Fraction] = field(default_factory=dict)
    trades: list[Trade] = field(default_factory=list)

    def add(self, trade: Trade) -> None:
        used = sum(
            1 for (c, s, _) in self.entries if c == trade.consumer and s == trade.seller
        )
        for k in range(1, trade.blocks + 1):
            key = (trade.consumer, trade.seller, used + k)
            if key in self.entries:
                raise RuntimeError(f"ledger slot {key} already settled")
            self.entries[key] = trade.price
        self.trades.append(trade)

    @property
    def blocks(self) -> int:
        return len(self.entries)

    def average_price(self) -> Fraction | None:
        if not self.entries:
            return None
        return sum(self.entries.values(), Fraction(0)) / len(self.entries)

    def pair_totals(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for t in self.trades:
            out[(t.seller, t.consumer)] = out.get((t.seller, t.consumer), 0) + t.blocks
        return out


def delta_seller(initial_ask, min_sell, iterations: int) -> Fraction:
    initial_ask, min_sell = to_price(initial_ask), to_price(min_sell)
    if iterations < 2:
        raise NemParamsError(f"need at least 2 iterations, got {iterations}")
    if initial_ask < min_sell:
        raise NemParamsError(f"initial ask {initial_ask} below minimum {min_sell}")
    return (initial_ask - min_sell) / (iterations - 1)


def delta_consumer(initial_bid, max_buy, iterations: int) -> Fraction:
    initial_bid, max_buy = to_price(initial_bid), to_price(max_buy)
    if iterations < 2:
        raise NemParamsError(f"need at least 2 iterations, got {iterations}")
    if initial_bid > max_buy:
        raise NemParamsError(f"initial bid {initial_bid} above maximum {max_buy}")
    return (max_buy - initial_bid) / (iterations - 1)


def em_price(bid: Fraction, ask: Fraction) -> Fraction:
    return ask if bid < ask else (bid + ask) / 2


def settle_iteration(
    matching: Matching,
    bids: Mapping[int, Fraction],
    asks: Mapping[int, Fraction],
    is_last: bool,
    force_last_trades: bool = True,
) -> list[Trade]:
    """Trades struck from one iteration's matching.

    Before the last iteration a pair trades only if the bid covers the ask,
    at the midpoint.  On the last iteration, unless ``force_last_trades`` is
    off, every matched pair trades at the fixed-price rule.
    """
    trades = []
    for (s, c), n in sorted(matching.pairs.items()):
        bid, ask = bids[c], asks[s]
        if is_last and force_last_trades:
            trades.append(Trade(s, c, n, em_price(bid, ask)))
        elif bid >= ask:
            trades.append(Trade(s, c, n, (bid + ask) / 2))
    return trades


def settle_em_prices(
    matching: Matching, bids: Mapping[int, Fraction], asks: Mapping[int, Fraction]
) -> PriceLedger:
    ledger = PriceLedger()
    for (s, c), n in sorted(matching.pairs.items()):
        ledger.add(Trade(s, c, n, em_price(bids[c], asks[s])))
    return ledger


@dataclass(frozen=True)
class NemIteration:
    iteration: int
    instance: MarketInstance  # residual market with this iteration's prices
    em: EmResult
    trades: tuple[Trade, ...]


class NemResult(NamedTuple):
    matching: Matching
    ledger: PriceLedger
    iterations: list[NemIteration]


def run_nem(instance: MarketInstance, params: NemParams) -> NemResult:
    validate_instance(instance)
    T = params.iterations
    d_sel = {
        s.index: delta_seller(s.ask, params.min_sell, T) for s in instance.sellers
    }
    d_con = {
        c.index: delta_consumer(c.bid, params.max_buy, T) for c in instance.consumers
    }
    asks = {s.index: s.ask for s in instance.sellers}
    bids = {c.index: c.bid for c in instance.consumers}
    supply = {s.index: s.supply for s in instance.sellers if s.supply > 0}
    demand = {c.index: c.demand for c in instance.consumers if c.demand > 0}

    ledger = PriceLedger()
    history: list[NemIteration] = []
    itr = 0
    while itr < T and supply and demand:
        market = instance.restricted(supply, demand).with_prices(asks, bids)
        em = run_em(market, validate=False)
        trades = settle_iteration(
            em.matching, bids, asks, itr == T - 1, params.force_last_trades
        )
        for t in trades:
            ledger.add(t)
            supply[t.seller] -= t.blocks
            demand[t.consumer] -= t.blocks
        supply = {s: n for s, n in supply.items() if n > 0}
        demand = {c: n for c, n in demand.items() if n > 0}
        history.append(NemIteration(itr, market, em, tuple(trades)))
        for s in supply:
            asks[s] = asks[s] - d_sel[s]
        for c in demand:
            bids[c] = bids[c] + d_con[c]
        itr += 1

    final = Matching.from_pairs(ledger.pair_totals(), instance)
    return NemResult(final, ledger, history)
