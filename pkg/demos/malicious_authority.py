"""Centralised double auction and first-come-first-serve against the
decentralised engines, with and without a biased central authority.

Run with ``python demos/malicious_authority.py`` from the repository root.
"""

from pathlib import Path

from p2pmatch import io
from p2pmatch.experiments import compare, run_all

scenarios = io.load_scenarios(Path(__file__).resolve().parent.parent / "scenarios" / "central_authority.json")
result = compare(run_all(scenarios, None, None, jobs=2))
print("cells are (selling price, buying price), averaged over seeds")
print(result.table())
print()
print(result.revenue_loss_summary())
