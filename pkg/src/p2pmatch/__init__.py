"""Stable matching engines and centralised baselines for peer-to-peer energy
markets, with an independent stability verifier and experiment scenarios."""

from .dam import DamParams, DamResult, dam_welfare_allocation, run_dam
from .em import EmResult, request_bound, run_em
from .ffs import FfsResult, run_ffs
from .malice import MaliceConfig, apply_malice
from .metrics import MetricsReport, compute_metrics
from .model import (
    ActorId,
    Consumer,
    InstanceError,
    Location,
    MarketInstance,
    Matching,
    Seller,
    consumer_preference,
    expand_virtual,
    seller_preference,
    to_price,
    validate_instance,
)
from .nem import NemParams, NemResult, PriceLedger, run_nem, settle_em_prices
from .scenarios import NetworkGenParams, gen_network, make_toy_instance
from .verify import (
    check_feasible,
    exhaustive_stability_oracle,
    find_blocking_pairs,
    is_stable,
)

__all__ = [
    "ActorId",
    "Consumer",
    "DamParams",
    "DamResult",
    "EmResult",
    "FfsResult",
    "InstanceError",
    "Location",
    "MaliceConfig",
    "MarketInstance",
    "Matching",
    "MetricsReport",
    "NemParams",
    "NemResult",
    "NetworkGenParams",
    "PriceLedger",
    "Seller",
    "apply_malice",
    "check_feasible",
    "compute_metrics",
    "consumer_preference",
    "dam_welfare_allocation",
    "exhaustive_stability_oracle",
    "expand_virtual",
    "find_blocking_pairs",
    "gen_network",
    "is_stable",
    "make_toy_instance",
    "request_bound",
    "run_dam",
    "run_em",
    "run_ffs",
    "run_nem",
    "seller_preference",
    "settle_em_prices",
    "to_price",
    "validate_instance",
]
