"""How the negotiation limits move the average trade price on the 45x45
network, compared to one-shot matching.  Averages over 20 seeds.

Run with ``python demos/negotiation.py``.
"""

from fractions import Fraction
from statistics import mean

from p2pmatch import NemParams, NetworkGenParams, compute_metrics, gen_network, run_em, run_nem

limits = [(Fraction(1), Fraction(1, 10)), (Fraction(1), Fraction(3, 5)),
          (Fraction(2), Fraction(1, 10)), (Fraction(2), Fraction(3, 5))]
prices = {"EM": []} | {f"NEM max_buy={b} min_sell={s}": [] for b, s in limits}

for seed in range(20):
    inst = gen_network(NetworkGenParams(seed=seed))
    prices["EM"].append(compute_metrics(run_em(inst), inst).avg_trade_price)
    for b, s in limits:
        run = run_nem(inst, NemParams(6, b, s))
        prices[f"NEM max_buy={b} min_sell={s}"].append(compute_metrics(run).avg_trade_price)

for label, values in sorted(prices.items(), key=lambda kv: mean(kv[1])):
    print(f"{label:<30} {float(mean(values)):.4f}")
