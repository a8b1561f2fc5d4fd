"""Turn scenario entries into runs, verified outputs and result rows."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

from .dam import DamParams, DamResult, run_dam
from .em import EmResult, run_em
from .ffs import FfsResult, run_ffs, seeded_arrival_order
from .io import LimitReading, Scenario
from .metrics import MetricsReport, RunOutput, compute_metrics
from .model import MarketInstance, to_price
from .nem import NemResult, run_nem
from .scenarios import (
    NetworkGenParams,
    gen_network,
    make_toy_instance,
    random_instance,
)
from .verify import check_feasible, find_blocking_pairs

CSV_COLUMNS = (
    "scenario",
    "seed",
    "algorithm",
    "malice",
    "avg_trade_price",
    "avg_selling_price",
    "avg_buying_price",
    "revenue_loss",
    "unmatched_consumer_blocks",
    "unmatched_seller_blocks",
    "traded_volume",
    "request_count",
    "rounds",
    "verified",
    "wall_ms",
)


@dataclass(frozen=True)
class DamReference:
    """Converged no-malice DAM prices used to rescale the other baselines."""

    avg_sell: float
    avg_buy: float

    @property
    def ratio(self) -> float:
        return self.avg_sell / self.avg_buy


@dataclass
class RunRecord:
    scenario: str
    seed: int
    algorithm: str
    malice: str
    instance: MarketInstance
    output: RunOutput
    metrics: MetricsReport
    verified: bool | None
    problems: list[str] = field(default_factory=list)
    wall_ms: float = 0.0

    def row(self) -> dict[str, str]:
        m = self.metrics
        values = {
            "scenario": self.scenario,
            "seed": self.seed,
            "algorithm": self.algorithm,
            "malice": self.malice,
            "avg_trade_price": m.avg_trade_price,
            "avg_selling_price": m.avg_selling_price,
            "avg_buying_price": m.avg_buying_price,
            "revenue_loss": m.revenue_loss,
            "unmatched_consumer_blocks": m.unmatched_consumer_blocks,
            "unmatched_seller_blocks": m.unmatched_seller_blocks,
            "traded_volume": m.traded_volume,
            "request_count": m.request_count,
            "rounds": m.rounds,
            "verified": {True: "pass", False: "fail", None: "n/a"}[self.verified],
            "wall_ms": f"{self.wall_ms:.3f}",
        }
        return {k: _cell(values[k]) for k in CSV_COLUMNS}


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (Fraction, float)):
        return f"{float(value):.6f}"
    return str(value)


def base_instance(scenario: Scenario, seed: int) -> MarketInstance:
    """The scenario's market for ``seed`` before any DAM-derived re-pricing."""
    src = scenario.source
    if src.kind == "inline":
        return src.instance
    if src.kind == "toy":
        return make_toy_instance(src.regime)
    if src.kind == "random":
        return random_instance(seed, **dict(src.random_args))
    return gen_network(replace(src.network, seed=seed))


@lru_cache(maxsize=256)
def _network_reference(params: NetworkGenParams, dam: DamParams) -> DamReference:
    return dam_reference(gen_network(params), dam)


def dam_reference(instance: MarketInstance, dam: DamParams = DamParams()) -> DamReference:
    res = run_dam(instance, dam)
    return DamReference(res.avg_selling_price, res.avg_buying_price)


def reference_for(scenario: Scenario, seed: int) -> DamReference:
    if scenario.source.kind == "network":
        return _network_reference(replace(scenario.source.network, seed=seed), scenario.dam)
    return dam_reference(base_instance(scenario, seed), scenario.dam)


def dam_ladder_params(params: NetworkGenParams, ref: DamReference) -> NetworkGenParams:
    """Same draws, with ladders centred on the DAM averages and steps of a tenth."""
    sell, buy = to_price(ref.avg_sell), to_price(ref.avg_buy)
    return replace(
        params,
        seller_mean=sell,
        seller_step=to_price(sell / 10),
        consumer_mean=buy,
        consumer_step=to_price(buy / 10),
    )


def scenario_instance(scenario: Scenario, seed: int) -> MarketInstance:
    src = scenario.source
    if src.kind == "network" and src.ladder == "dam" and scenario.algorithm != "dam":
        params = replace(src.network, seed=seed)
        return gen_network(dam_ladder_params(params, _network_reference(params, scenario.dam)))
    return base_instance(scenario, seed)


def _verify_em(em: EmResult, instance: MarketInstance, acceptability: str) -> list[str]:
    problems = [str(v) for v in check_feasible(em.matching, instance).violations]
    blocking = find_blocking_pairs(em.matching, instance, acceptability)
    problems += [f"blocking pair {bp.seller} / {bp.consumer}" for bp in blocking]
    return problems


def run_scenario(
    scenario: Scenario, seed: int, nem_limits: LimitReading | None = None
) -> RunRecord:
    """Run one ``(scenario, seed)`` entry and verify what can be verified.

    EM outputs must be feasible and stable.  Every NEM iteration's matching
    must be feasible and stable on its residual market (pairs count as
    acceptable only when the bid covers the ask).  FFS outputs are checked
    for feasibility only; DAM has no matching to check.
    """
    instance = scenario_instance(scenario, seed)
    malice = scenario.malice.kind if scenario.malice else "none"
    problems: list[str] = []
    verified: bool | None = True
    t0 = time.perf_counter()
    sell_ratio = None

    if scenario.algorithm == "em":
        out = run_em(instance)
        wall = time.perf_counter() - t0
        problems = _verify_em(out, instance, "any")
    elif scenario.algorithm == "nem":
        params = scenario.nem.resolve(instance, nem_limits)
        out = run_nem(instance, params)
        wall = time.perf_counter() - t0
        for it in out.iterations:
            problems += [f"iteration {it.iteration}: {p}" for p in _verify_em(it.em, it.instance, "price")]
        problems += [str(v) for v in check_feasible(out.matching, instance).violations]
    elif scenario.algorithm == "ffs":
        cfg = scenario.ffs
        if cfg.arrival == "seeded":
            order = seeded_arrival_order(instance, seed)
        elif cfg.arrival == "index":
            order = None
        else:
            order = cfg.arrival
        out = run_ffs(instance, order, scenario.malice, cfg.strict_equality)
        wall = time.perf_counter() - t0
        problems = [str(v) for v in check_feasible(out.matching, instance).violations]
        if cfg.normalize_sell:
            sell_ratio = reference_for(scenario, seed).ratio
    else:
        out = run_dam(instance, scenario.dam, scenario.malice)
        wall = time.perf_counter() - t0
        verified = None

    if verified is not None:
        verified = not problems
    metrics = compute_metrics(out, instance, sell_ratio=sell_ratio, runtime_s=wall)
    return RunRecord(
        scenario.id, seed, scenario.algorithm, malice, instance, out, metrics,
        verified, problems, wall * 1000.0,
    )


def _run_task(task):
    scenario, seed, nem_limits = task
    return run_scenario(scenario, seed, nem_limits)


def run_all(
    scenarios: list[Scenario],
    seeds: tuple[int, ...] | None = None,
    nem_limits: LimitReading | None = None,
    jobs: int = 1,
) -> list[RunRecord]:
    """All ``(scenario, seed)`` entries, ordered by scenario then seed.

    With ``jobs > 1`` the entries run in a process pool; the returned order
    does not depend on completion order.
    """
    tasks = [
        (sc, seed, nem_limits)
        for sc in scenarios
        for seed in (seeds if seeds is not None else sc.seeds)
    ]
    if jobs <= 1:
        records = [_run_task(t) for t in tasks]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_task, tasks))
    order = {sc.id: k for k, sc in enumerate(scenarios)}
    records.sort(key=lambda r: (order[r.scenario], r.seed))
    return records


# -- comparison ---------------------------------------------------------------

MALICE_ROWS = {
    "none": "No maliciousness",
    "dam_supply_favor": "Seller preference",
    "ffs_hide_sellers": "Seller preference",
    "dam_demand_favor": "Consumer preference",
    "ffs_favor_consumers": "Consumer preference",
}
ROW_ORDER = ("No maliciousness", "Seller preference", "Consumer preference")
COLUMN_ORDER = ("dam", "ffs", "em", "nem")


class CompareError(ValueError):
    pass


def _fingerprint(inst: MarketInstance) -> tuple:
    """Identity of a market up to prices: quantities and positions."""
    return (
        tuple((s.index, s.supply, s.location) for s in inst.sellers),
        tuple((c.index, c.demand, c.location) for c in inst.consumers),
    )


@dataclass(frozen=True)
class ComparisonCell:
    sell: float | None
    buy: float | None

    @property
    def loss(self) -> float | None:
        if self.sell is None or self.buy is None:
            return None
        return self.buy - self.sell


@dataclass
class Comparison:
    cells: dict[tuple[str, str], ComparisonCell]  # (row label, algorithm)
    seeds: tuple[int, ...]

    @property
    def algorithms(self) -> list[str]:
        present = {a for _, a in self.cells}
        return [a for a in COLUMN_ORDER if a in present]

    @property
    def rows(self) -> list[str]:
        present = {r for r, _ in self.cells}
        return [r for r in ROW_ORDER if r in present]

    def table(self) -> str:
        algos = self.algorithms
        head = ["Central authority's behaviour"] + [a.upper() for a in algos]
        lines = [head]
        for r in self.rows:
            line = [r]
            for a in algos:
                cell = self.cells.get((r, a))
                line.append("-" if cell is None else f"{_fmt(cell.sell)}, {_fmt(cell.buy)}")
            lines.append(line)
        widths = [max(len(l[k]) for l in lines) for k in range(len(head))]
        out = ["  ".join(v.ljust(w) for v, w in zip(l, widths)).rstrip() for l in lines]
        out.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(out)

    def revenue_loss_summary(self) -> str:
        lines = ["Revenue loss (buying - selling), no maliciousness:"]
        for a in self.algorithms:
            cell = self.cells.get(("No maliciousness", a))
            if cell is not None:
                lines.append(
                    f"  {a.upper():<4} sell {_fmt(cell.sell)}  buy {_fmt(cell.buy)}  loss {_fmt(cell.loss)}"
                )
        return "\n".join(lines)


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.3f}"


def _mean(values: list) -> float | None:
    vals = [float(v) for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def compare(records: list[RunRecord]) -> Comparison:
    """Seed-averaged selling/buying prices per (malice row, algorithm).

    Requires at least two algorithms, identical markets (up to prices) for a
    given seed across all entries, and, for EM and NEM, identical results in
    every malice row since those engines never see the malicious inputs.
    """
    algos = {r.algorithm for r in records}
    if len(algos) < 2:
        raise CompareError("nothing to compare: the sweep covers fewer than two algorithms")
    prints: dict[int, tuple] = {}
    for r in records:
        fp = _fingerprint(r.instance)
        if prints.setdefault(r.seed, fp) != fp:
            raise CompareError(
                f"scenario {r.scenario!r} uses a different market for seed {r.seed}"
            )
    groups: dict[tuple[str, str], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((MALICE_ROWS[r.malice], r.algorithm), []).append(r)

    for algo in ("em", "nem"):
        by_seed: dict[int, tuple] = {}
        for (row, a), recs in groups.items():
            if a != algo:
                continue
            for r in recs:
                key = (r.output.matching.pairs, _ledger_key(r.output, r.instance))
                if by_seed.setdefault(r.seed, key) != key:
                    raise CompareError(f"{algo} output changed under malice row {row!r}")

    cells = {
        key: ComparisonCell(
            _mean([r.metrics.avg_selling_price for r in recs]),
            _mean([r.metrics.avg_buying_price for r in recs]),
        )
        for key, recs in groups.items()
    }
    # EM/NEM never see malicious inputs: show their no-malice values in every row
    rows = {row for row, _ in groups}
    for algo in ("em", "nem"):
        base = cells.get(("No maliciousness", algo))
        if base is not None:
            for row in rows:
                cells.setdefault((row, algo), base)
    return Comparison(cells, tuple(sorted({r.seed for r in records})))


def _ledger_key(output, instance) -> tuple:
    if isinstance(output, NemResult):
        return tuple(sorted(output.ledger.entries.items()))
    return ()
