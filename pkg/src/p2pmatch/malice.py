"""Ways a central operator can rig the centralised baselines.

The decentralised engines never take these inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .model import MarketInstance

MaliceKind = Literal[
    "dam_supply_favor", "dam_demand_favor", "ffs_hide_sellers", "ffs_favor_consumers"
]
MALICE_KINDS = (
    "dam_supply_favor",
    "dam_demand_favor",
    "ffs_hide_sellers",
    "ffs_favor_consumers",
)


@dataclass(frozen=True)
class MaliceConfig:
    kind: MaliceKind
    favored_count: int = 15
    cap: float = 20.0  # KWh handed to each favoured agent by the auctioneer
    favored: tuple[int, ...] | None = None  # explicit picks, else lowest indices

    def __post_init__(self):
        if self.kind not in MALICE_KINDS:
            raise ValueError(f"unknown malice kind {self.kind!r}")
        if self.favored_count < 0:
            raise ValueError("favored_count must be >= 0")
        if self.cap < 0:
            raise ValueError("cap must be >= 0")


@dataclass(frozen=True)
class MaliceInputs:
    """Overrides consumed by ``run_dam`` / ``run_ffs``; ``None`` = untouched."""

    supply_caps: dict[int, float] | None = None
    demand_caps: dict[int, float] | None = None
    visible_sellers: tuple[int, ...] | None = None
    priority_consumers: tuple[int, ...] | None = None

    @property
    def is_empty(self) -> bool:
        return (
            self.supply_caps is None
            and self.demand_caps is None
            and self.visible_sellers is None
            and self.priority_consumers is None
        )


def _pick(indices: list[int], config: MaliceConfig) -> tuple[int, ...]:
    if config.favored is not None:
        unknown = set(config.favored) - set(indices)
        if unknown:
            raise ValueError(f"favoured agents not in instance: {sorted(unknown)}")
        return tuple(sorted(config.favored))
    return tuple(sorted(indices)[: config.favored_count])


def apply_malice(instance: MarketInstance, config: MaliceConfig | None) -> MaliceInputs:
    if config is None or (config.favored_count == 0 and config.favored is None):
        return MaliceInputs()
    sellers = [s.index for s in instance.sellers]
    consumers = [c.index for c in instance.consumers]
    population = consumers if config.kind in ("dam_demand_favor", "ffs_favor_consumers") else sellers
    if config.favored is None and config.favored_count > len(population):
        raise ValueError(
            f"favored_count {config.favored_count} exceeds population {len(population)}"
        )

    if config.kind == "dam_supply_favor":
        fav = set(_pick(sellers, config))
        return MaliceInputs(supply_caps={s: (config.cap if s in fav else 0.0) for s in sellers})
    if config.kind == "dam_demand_favor":
        fav = set(_pick(consumers, config))
        return MaliceInputs(demand_caps={c: (config.cap if c in fav else 0.0) for c in consumers})
    if config.kind == "ffs_hide_sellers":
        if config.favored is not None:
            return MaliceInputs(visible_sellers=_pick(sellers, config))
        dearest = sorted(instance.sellers, key=lambda s: (-s.ask, s.index))
        return MaliceInputs(
            visible_sellers=tuple(sorted(s.index for s in dearest[: config.favored_count]))
        )
    return MaliceInputs(priority_consumers=_pick(consumers, config))
