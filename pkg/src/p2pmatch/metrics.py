"""Per-run price and volume summaries shared by every algorithm."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from fractions import Fraction
from typing import Union

from .dam import DamResult
from .em import EmResult
from .ffs import FfsResult
from .model import MarketInstance, Matching
from .nem import NemResult, settle_em_prices

Price = Union[Fraction, float, None]
RunOutput = Union[EmResult, NemResult, DamResult, FfsResult]


@dataclass(frozen=True)
class MetricsReport:
    algorithm: str
    avg_trade_price: Price
    avg_selling_price: Price
    avg_buying_price: Price
    revenue_loss: Price
    unmatched_consumer_blocks: int | None
    unmatched_seller_blocks: int | None
    traded_volume: Fraction | float
    request_count: int | None = None
    rounds: int | None = None
    runtime_s: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def _unmatched(matching: Matching) -> tuple[int, int]:
    return (
        sum(matching.unmatched_consumer_blocks.values()),
        sum(matching.unmatched_seller_blocks.values()),
    )


def _loss(buy: Price, sell: Price) -> Price:
    return None if buy is None or sell is None else buy - sell


def compute_metrics(
    run: RunOutput,
    instance: MarketInstance | None = None,
    *,
    sell_ratio: float | None = None,
    runtime_s: float | None = None,
) -> MetricsReport:
    """Block-weighted averages for one finished run.

    EM needs ``instance`` to price its matching.  For FFS, consumers pay the
    posted ask; ``sell_ratio`` (a DAM sell/buy ratio) scales that down to the
    sellers' take when the intermediary's cut is to be modelled.  DAM prices
    are per KWh.  A run with no trades reports absent averages.
    """
    if isinstance(run, EmResult):
        if instance is None:
            raise ValueError("EM metrics need the instance to read prices")
        ledger = settle_em_prices(
            run.matching,
            {c.index: c.bid for c in instance.consumers},
            {s.index: s.ask for s in instance.sellers},
        )
        p = ledger.average_price()
        uc, us = _unmatched(run.matching)
        return MetricsReport(
            "em", p, p, p, _loss(p, p), uc, us, Fraction(ledger.blocks),
            run.request_count, run.rounds, runtime_s,
        )
    if isinstance(run, NemResult):
        p = run.ledger.average_price()
        uc, us = _unmatched(run.matching)
        requests = sum(it.em.request_count for it in run.iterations)
        return MetricsReport(
            "nem", p, p, p, _loss(p, p), uc, us, Fraction(run.ledger.blocks),
            requests, len(run.iterations), runtime_s,
        )
    if isinstance(run, FfsResult):
        buy = run.ledger.average_price()
        sell = buy
        if buy is not None and sell_ratio is not None:
            sell = float(buy) * sell_ratio
            buy = float(buy)
        uc, us = _unmatched(run.matching)
        return MetricsReport(
            "ffs", buy, sell, buy, _loss(buy, sell), uc, us, Fraction(run.ledger.blocks),
            None, None, runtime_s,
        )
    if isinstance(run, DamResult):
        buy, sell = run.avg_buying_price, run.avg_selling_price
        return MetricsReport(
            "dam", buy, sell, buy, _loss(buy, sell), None, None, run.energy,
            None, run.rounds_used, runtime_s,
        )
    raise TypeError(f"no metrics for {type(run).__name__}")
