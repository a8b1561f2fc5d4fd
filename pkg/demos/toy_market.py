"""Walk through the three-seller, four-consumer toy market round by round.

Run with ``python demos/toy_market.py``.
"""

from p2pmatch import make_toy_instance, run_em
from p2pmatch.scenarios import TOY_SELLERS


def name(s: int) -> str:
    return TOY_SELLERS[s]


for regime in ("equal", "surplus", "deficit"):
    inst = make_toy_instance(regime)
    print(f"== {regime}: supplies {[s.supply for s in inst.sellers]}, "
          f"demands {[c.demand for c in inst.consumers]}")
    res = run_em(inst)
    for t in res.traces:
        asks = ", ".join(f"c{c}->{name(s)}x{n}" for c, s, n in t.requests)
        print(f"  round {t.round}: requests {asks}")
        for r in t.reallocations:
            gainers = ", ".join(f"c{c}" for c in r.gained_by)
            print(f"    {name(r.seller)} takes {r.blocks} from c{r.lost_by} for {gainers}")
    for (s, c), n in sorted(res.matching.pairs.items()):
        print(f"  {name(s)} -> c{c}: {n} block(s)")
    short = {c: n for c, n in res.matching.unmatched_consumer_blocks.items() if n}
    left = {name(s): n for s, n in res.matching.unmatched_seller_blocks.items() if n}
    print(f"  unmet demand {short or 'none'}, unsold supply {left or 'none'}\n")
