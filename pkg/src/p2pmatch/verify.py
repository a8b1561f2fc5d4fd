"""Feasibility, symmetry and blocking-pair checks over virtual agents.

Preferences are re-derived here from the raw instance rather than taken from
the engine, so a bug in the engine's acceptance logic cannot hide itself.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Literal

from .model import MarketInstance, Matching, expand_virtual

Acceptability = Literal["any", "price"]

MAX_ORACLE_BLOCKS = 6


class UnknownActorError(KeyError):
    pass


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.feasible


@dataclass(frozen=True)
class BlockingPair:
    """A virtual seller and virtual consumer that prefer each other.

    ``seller``/``consumer`` are ``(actual index, virtual id)``; virtual ids are
    1-based positions in the expansion.  ``witness`` holds the rank of the
    consumer's current partner in the consumer's list and the rank of the
    seller's current partner in the seller's list (``None`` = unassigned).
    ``pair_ranks`` are the ranks of the blocking partners themselves.
    """

    seller: tuple[int, int]
    consumer: tuple[int, int]
    witness: tuple[int | None, int | None]
    pair_ranks: tuple[int, int]


def check_feasible(matching: Matching, instance: MarketInstance) -> FeasibilityReport:
    supply = {s.index: s.supply for s in instance.sellers}
    demand = {c.index: c.demand for c in instance.consumers}
    violations = []
    for s, c in matching.pairs:
        if s not in supply:
            raise UnknownActorError(f"unknown seller {s}")
        if c not in demand:
            raise UnknownActorError(f"unknown consumer {c}")
    if matching.consumer_pairs is not None:
        for s, c in matching.consumer_pairs:
            if s not in supply:
                raise UnknownActorError(f"unknown seller {s}")
            if c not in demand:
                raise UnknownActorError(f"unknown consumer {c}")
        a = {k: v for k, v in matching.pairs.items() if v}
        b = {k: v for k, v in matching.consumer_pairs.items() if v}
        for key in sorted(set(a) | set(b)):
            if a.get(key, 0) != b.get(key, 0):
                violations.append(
                    f"asymmetric pair seller {key[0]} / consumer {key[1]}: "
                    f"seller records {a.get(key, 0)}, consumer records {b.get(key, 0)}"
                )
    sold: dict[int, int] = {}
    got: dict[int, int] = {}
    for (s, c), n in matching.pairs.items():
        if n < 1:
            violations.append(f"pair seller {s} / consumer {c} has {n} blocks")
        sold[s] = sold.get(s, 0) + n
        got[c] = got.get(c, 0) + n
    for s in sorted(sold):
        if sold[s] > supply[s]:
            violations.append(f"seller {s} sells {sold[s]} blocks but has {supply[s]}")
    for c in sorted(got):
        if got[c] > demand[c]:
            violations.append(f"consumer {c} receives {got[c]} blocks but wants {demand[c]}")
    return FeasibilityReport(not violations, tuple(violations))


def _rank_tables(instance: MarketInstance):
    sellers = sorted(instance.sellers, key=lambda s: s.index)
    consumers = sorted(instance.consumers, key=lambda c: c.index)
    # consumer c ranks seller s: cheaper first, then nearer, then lower index
    c_rank = {}
    for c in consumers:
        order = sorted(
            sellers,
            key=lambda s: (s.ask, (s.location.x - c.location.x) ** 2 + (s.location.y - c.location.y) ** 2, s.index),
        )
        c_rank[c.index] = {s.index: r for r, s in enumerate(order)}
    s_rank = {}
    for s in sellers:
        order = sorted(
            consumers,
            key=lambda c: (-c.bid, (s.location.x - c.location.x) ** 2 + (s.location.y - c.location.y) ** 2, c.index),
        )
        s_rank[s.index] = {c.index: r for r, c in enumerate(order)}
    return c_rank, s_rank


def _virtual_partners(matching: Matching, instance: MarketInstance):
    """Assign virtual agents to each other along the matching's pair counts."""
    exp = expand_virtual(instance)
    s_slots: dict[int, list[int]] = {}
    for vid, s in enumerate(exp.virtual_sellers, start=1):
        s_slots.setdefault(s, []).append(vid)
    c_slots: dict[int, list[int]] = {}
    for vid, c in enumerate(exp.virtual_consumers, start=1):
        c_slots.setdefault(c, []).append(vid)
    s_partner = {vid: None for vid in range(1, len(exp.virtual_sellers) + 1)}
    c_partner = {vid: None for vid in range(1, len(exp.virtual_consumers) + 1)}
    s_next = {s: 0 for s in s_slots}
    c_next = {c: 0 for c in c_slots}
    for (s, c), n in sorted(matching.pairs.items()):
        for _ in range(n):
            vs = s_slots[s][s_next[s]]
            vc = c_slots[c][c_next[c]]
            s_next[s] += 1
            c_next[c] += 1
            s_partner[vs] = (c, vc)
            c_partner[vc] = (s, vs)
    return exp, s_slots, c_slots, s_partner, c_partner


def iter_blocking_pairs(
    matching: Matching, instance: MarketInstance, acceptability: Acceptability = "any"
) -> Iterator[BlockingPair]:
    c_rank, s_rank = _rank_tables(instance)
    exp, s_slots, c_slots, s_partner, c_partner = _virtual_partners(matching, instance)
    asks = {s.index: s.ask for s in instance.sellers}
    bids = {c.index: c.bid for c in instance.consumers}

    # virtual agents of one actual agent differ only by partner, so group them
    def c_groups(c):
        groups: dict[int | None, list[int]] = {}
        for vc in c_slots.get(c, []):
            p = c_partner[vc]
            groups.setdefault(None if p is None else p[0], []).append(vc)
        return groups

    def s_groups(s):
        groups: dict[int | None, list[int]] = {}
        for vs in s_slots.get(s, []):
            p = s_partner[vs]
            groups.setdefault(None if p is None else p[0], []).append(vs)
        return groups

    cg = {c: c_groups(c) for c in c_slots}
    sg = {s: s_groups(s) for s in s_slots}
    for s in sorted(s_slots):
        for c in sorted(c_slots):
            if acceptability == "price" and bids[c] < asks[s]:
                continue
            rc = c_rank[c][s]
            rs = s_rank[s][c]
            cons = [
                (w, vcs) for w, vcs in cg[c].items() if w is None or c_rank[c][w] > rc
            ]
            if not cons:
                continue
            sell = [
                (k, vss) for k, vss in sg[s].items() if k is None or s_rank[s][k] > rs
            ]
            for (w, vcs), (k, vss) in itertools.product(cons, sell):
                wr = None if w is None else c_rank[c][w]
                kr = None if k is None else s_rank[s][k]
                for vc in vcs:
                    for vs in vss:
                        yield BlockingPair((s, vs), (c, vc), (wr, kr), (rc, rs))


def find_blocking_pairs(
    matching: Matching, instance: MarketInstance, acceptability: Acceptability = "any"
) -> list[BlockingPair]:
    """All virtual (seller, consumer) pairs that would both rather trade.

    With ``acceptability="price"`` a pair only counts when the consumer's bid
    covers the seller's ask.
    """
    return list(iter_blocking_pairs(matching, instance, acceptability))


def blocking_actual_pairs(
    matching: Matching, instance: MarketInstance, acceptability: Acceptability = "any"
) -> set[tuple[int, int]]:
    return {
        (bp.seller[0], bp.consumer[0])
        for bp in iter_blocking_pairs(matching, instance, acceptability)
    }


def is_stable(
    matching: Matching, instance: MarketInstance, acceptability: Acceptability = "any"
) -> bool:
    return next(iter_blocking_pairs(matching, instance, acceptability), None) is None


def _bounded_compositions(total_cap: int, caps: list[int]):
    """All integer vectors ``x`` with ``0 <= x_k <= caps[k]`` and ``sum x <= total_cap``."""
    if not caps:
        yield ()
        return
    head, rest = caps[0], caps[1:]
    for v in range(min(head, total_cap) + 1):
        for tail in _bounded_compositions(total_cap - v, rest):
            yield (v,) + tail


def enumerate_feasible(instance: MarketInstance) -> Iterator[Matching]:
    """Every feasible matching, one per distinct block-count table.

    Virtual agents of the same actual agent are interchangeable, so each
    table stands for the class of virtual one-to-one matchings that collapse
    onto it.
    """
    sellers = sorted(instance.sellers, key=lambda s: s.index)
    consumers = sorted(instance.consumers, key=lambda c: c.index)
    demand_left = [c.demand for c in consumers]

    def rec(k: int, left: list[int], acc: dict):
        if k == len(sellers):
            yield Matching.from_pairs(dict(acc), instance)
            return
        s = sellers[k]
        for row in _bounded_compositions(s.supply, left):
            for c, n in zip(consumers, row):
                if n:
                    acc[(s.index, c.index)] = n
            yield from rec(k + 1, [l - n for l, n in zip(left, row)], acc)
            for c, n in zip(consumers, row):
                acc.pop((s.index, c.index), None)

    yield from rec(0, demand_left, {})


def exhaustive_stability_oracle(
    instance: MarketInstance, acceptability: Acceptability = "any"
) -> list[Matching]:
    """Brute force: all feasible matchings with no blocking pair."""
    if instance.total_supply > MAX_ORACLE_BLOCKS or instance.total_demand > MAX_ORACLE_BLOCKS:
        raise InstanceTooLarge(
            f"oracle limited to {MAX_ORACLE_BLOCKS} blocks per side, got "
            f"{instance.total_supply} supply / {instance.total_demand} demand"
        )
    return [
        m for m in enumerate_feasible(instance) if is_stable(m, instance, acceptability)
    ]
