"""Round-synchronised energy matching with per-agent block quotas.

Each round has two barriers: every unmatched consumer sends one request to
the head of its unprocessed seller list, then every seller that received
requests re-decides its allocation over current holders plus new requesters.
A consumer that loses blocks at a seller other than its latest provider puts
the latest provider back at the head of its list before moving on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple

from .model import (
    ActorId,
    MarketInstance,
    Matching,
    PreferenceOrder,
    consumer_preference,
    seller_preference,
    validate_instance,
)


@dataclass
class ConsumerState:
    index: int
    demand: int
    unprocessed: list[int]
    latest_provider: int | None = None
    allocated: dict[int, int] = field(default_factory=dict)

    @property
    def matched_blocks(self) -> int:
        return sum(self.allocated.values())

    @property
    def unmatched_blocks(self) -> int:
        return self.demand - self.matched_blocks


@dataclass
class Request:
    consumer: int
    blocks: int
    bid: Fraction


@dataclass
class SellerState:
    index: int
    supply: int
    requesters: list[Request] = field(default_factory=list)
    allocation: dict[int, int] = field(default_factory=dict)

    @property
    def mapping(self) -> list[int]:
        """Consumer ids with multiplicity, as in ``mu(s)``."""
        return [c for c, n in sorted(self.allocation.items()) for _ in range(n)]

    @property
    def allocated_blocks(self) -> int:
        return sum(self.allocation.values())


@dataclass(frozen=True)
class Reallocation:
    seller: int
    lost_by: int
    blocks: int
    gained_by: tuple[int, ...]


@dataclass(frozen=True)
class RoundTrace:
    round: int
    requests: tuple[tuple[int, int, int], ...]  # (consumer, seller, blocks)
    acceptances: tuple[tuple[int, int, int], ...]  # (seller, consumer, blocks newly granted)
    rejections: tuple[tuple[int, int, int], ...]  # (seller, consumer, blocks refused)
    reallocations: tuple[Reallocation, ...]
    allocations: tuple[tuple[int, tuple[tuple[int, int], ...]], ...]  # per seller after the round

    def as_dict(self) -> dict:
        return {
            "round": self.round,
            "requests": [list(r) for r in self.requests],
            "acceptances": [list(a) for a in self.acceptances],
            "rejections": [list(r) for r in self.rejections],
            "reallocations": [
                {
                    "seller": r.seller,
                    "lost_by": r.lost_by,
                    "blocks": r.blocks,
                    "gained_by": list(r.gained_by),
                }
                for r in self.reallocations
            ],
            "allocations": {str(s): dict(a) for s, a in self.allocations},
        }


class EmResult(NamedTuple):
    matching: Matching
    traces: list[RoundTrace]
    request_count: int

    @property
    def rounds(self) -> int:
        return len(self.traces)


def seller_accept(
    seller: SellerState,
    incoming: Iterable[Request],
    quota: int,
    preference: PreferenceOrder,
) -> tuple[SellerState, dict[int, int]]:
    """Fill ``quota`` blocks greedily down ``preference`` over holders and
    requesters.

    A requester that already holds blocks here asks for its held blocks plus
    the new ones.  Returns the new state (requester list cleared) and the
    refused block count per consumer, which covers both short new requests
    and revoked promises.
    """
    wanted = dict(seller.allocation)
    for req in incoming:
        wanted[req.consumer] = wanted.get(req.consumer, 0) + req.blocks
    left = quota
    granted: dict[int, int] = {}
    for actor in preference.ranked:
        want = wanted.get(actor.index, 0)
        if not want:
            continue
        give = min(want, left)
        if give:
            granted[actor.index] = give
            left -= give
    missing = set(wanted) - {a.index for a in preference.ranked}
    if missing:
        raise ValueError(f"preference of seller {seller.index} misses {sorted(missing)}")
    refused = {c: w - granted.get(c, 0) for c, w in wanted.items() if w > granted.get(c, 0)}
    return SellerState(seller.index, seller.supply, [], granted), refused


def consumer_rebid_target(state: ConsumerState, lost_from) -> int | None:
    """Next seller ``state`` will bid to after losing blocks at ``lost_from``.

    ``lost_from`` is one seller index or a collection of them (several sellers
    may revoke in the same round).  Updates ``state.unprocessed`` in place and
    returns ``None`` when the consumer has nobody left to ask.
    """
    revokers = {lost_from} if isinstance(lost_from, int) else set(lost_from)
    latest = state.latest_provider
    if latest is not None and revokers - {latest}:
        if not state.unprocessed or state.unprocessed[0] != latest:
            if latest in state.unprocessed:
                state.unprocessed.remove(latest)
            state.unprocessed.insert(0, latest)
    return state.unprocessed[0] if state.unprocessed else None


def run_em(instance: MarketInstance, *, validate: bool = True) -> EmResult:
    if validate:
        validate_instance(instance)
    sellers = {
        s.index: SellerState(s.index, s.supply) for s in instance.sellers
    }
    consumers: dict[int, ConsumerState] = {}
    for c in sorted(instance.consumers, key=lambda c: c.index):
        pref = consumer_preference(c.id, instance)
        offering = [a.index for a in pref if instance.seller(a.index).supply > 0]
        consumers[c.index] = ConsumerState(c.index, c.demand, offering)

    traces: list[RoundTrace] = []
    request_count = 0
    rnd = 0
    while True:
        active = [
            cs for cs in consumers.values() if cs.unmatched_blocks > 0 and cs.unprocessed
        ]
        if not active:
            break
        rnd += 1

        # barrier 1: requests
        inbox: dict[int, list[Request]] = {}
        requests = []
        for cs in active:
            target = cs.unprocessed.pop(0)
            blocks = cs.unmatched_blocks
            inbox.setdefault(target, []).append(
                Request(cs.index, blocks, instance.consumer(cs.index).bid)
            )
            requests.append((cs.index, target, blocks))
            request_count += 1

        # barrier 2: seller decisions
        acceptances, rejections, reallocs = [], [], []
        for s_idx in sorted(inbox):
            old = sellers[s_idx]
            incoming = inbox[s_idx]
            bidders = sorted(set(old.allocation) | {r.consumer for r in incoming})
            pref = seller_preference(
                ActorId("seller", s_idx),
                [ActorId("consumer", c) for c in bidders],
                instance,
            )
            new, refused = seller_accept(old, incoming, old.supply, pref)
            sellers[s_idx] = new
            gainers = tuple(
                c for c in bidders if new.allocation.get(c, 0) > old.allocation.get(c, 0)
            )
            for c in gainers:
                acceptances.append((s_idx, c, new.allocation[c] - old.allocation.get(c, 0)))
            for c in sorted(refused):
                rejections.append((s_idx, c, refused[c]))
            for c in bidders:
                lost = old.allocation.get(c, 0) - new.allocation.get(c, 0)
                if lost > 0:
                    reallocs.append(Reallocation(s_idx, c, lost, gainers))

        # consumers learn the outcome
        for cs in consumers.values():
            revokers = []
            before = cs.allocated
            after = {
                s: sellers[s].allocation[cs.index]
                for s in sorted(sellers)
                if sellers[s].allocation.get(cs.index)
            }
            for s in sorted(set(before) | set(after)):
                if after.get(s, 0) > before.get(s, 0):
                    cs.latest_provider = s
                elif after.get(s, 0) < before.get(s, 0):
                    revokers.append(s)
            cs.allocated = after
            if revokers:
                consumer_rebid_target(cs, revokers)

        traces.append(
            RoundTrace(
                rnd,
                tuple(requests),
                tuple(acceptances),
                tuple(rejections),
                tuple(reallocs),
                tuple(
                    (s, tuple(sorted(st.allocation.items())))
                    for s, st in sorted(sellers.items())
                ),
            )
        )

    pairs = {
        (s, c): n for s, st in sellers.items() for c, n in st.allocation.items() if n
    }
    held = {
        (s, c): n for c, cs in consumers.items() for s, n in cs.allocated.items() if n
    }
    return EmResult(
        Matching.from_pairs(pairs, instance, consumer_pairs=held), traces, request_count
    )


def request_bound(instance: MarketInstance) -> int:
    """Worst-case request count: consumers * ((sellers - 1) * L_max + 1)."""
    n_consumers = len(instance.consumers)
    n_sellers = len(instance.sellers)
    l_max = max((c.demand for c in instance.consumers), default=0)
    return n_consumers * ((n_sellers - 1) * l_max + 1)
