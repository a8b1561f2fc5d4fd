"""Centralised double auction: welfare allocation alternating with bid
updates until the bid sums settle.

Per round the auctioneer solves

    max  sum_ij  b_ij ln c_ij - s_ji c_ij
    s.t. sum_j c_ij  (<= or ==)  total of consumer i
         sum_i c_ij  (<= or ==)  total of seller j

with the energy bought by ``i`` from ``j`` equal to the energy ``j``
delivers to ``i`` (``D = C.T``).  The optimum has the closed form
``c_ij = b_ij / (s_ji + lam_i + nu_j)``; the multipliers are found by exact
coordinate ascent on the dual (non-negative for caps, free for fixed totals).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .malice import MaliceConfig, MaliceInputs, apply_malice
from .model import MarketInstance


class DamError(RuntimeError):
    pass


class DegenerateDemand(DamError):
    pass


class VanishedMarket(DamError):
    pass


class Diverged(DamError):
    def __init__(self, message: str, trace: list[tuple[float, float]]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class DamParams:
    eta: float = 0.8  # charging efficiency
    zeta: float = 0.6  # willingness constant
    sto: float = 0.2  # energy state before charging
    c_min: float = 5.0  # minimum demand, KWh
    l1: float = 0.01
    l2: float = 0.015
    r_min: float = 0.01  # registration reward
    convergence_eps: float = 1e-3
    demand_cap: float = 20.0  # KWh per consumer
    supply_cap: float | None = None  # KWh per seller; None = per-block scaling below
    supply_cap_per_block: float = 4.0
    max_rounds: int = 10_000

    def __post_init__(self):
        for name in ("eta", "zeta", "sto", "l1", "convergence_eps", "supply_cap_per_block"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.c_min < 0 or self.l2 < 0 or self.r_min < 0 or self.demand_cap < 0:
            raise ValueError("c_min, l2, r_min and demand_cap must be >= 0")


def _solve_multiplier(
    b: np.ndarray, a: np.ndarray, target: np.ndarray, tol: float, signed: bool
) -> np.ndarray:
    """Per row ``k``: the ``x`` with ``sum_j b[k,j] / (a[k,j] + x) == target[k]``.

    With ``signed=False`` the root is clipped at 0 (a cap that does not bind
    gets a zero multiplier).  The left side is convex and decreasing in ``x``,
    so Newton started left of the root climbs to it without overshooting.
    """
    n = b.shape[0]
    x = np.zeros(n)
    live = b > 0
    has = live.any(axis=1)
    if signed:
        # start where the cheapest live term alone already meets the target
        a_live = np.where(live, a, np.inf)
        j = np.argmin(a_live, axis=1)
        rows = np.arange(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(has, b[rows, j] / target - a[rows, j], 0.0)
        active = has.copy()
    else:
        active = has & ((b / a).sum(axis=1) > target)
    for _ in range(200):
        if not active.any():
            break
        den = a[active] + x[active, None]
        f = (b[active] / den).sum(axis=1) - target[active]
        fp = -(b[active] / den**2).sum(axis=1)
        x[active] -= f / fp
        done = np.abs(f) <= tol * np.maximum(target[active], 1.0)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return x


def dam_welfare_allocation(
    B: np.ndarray,
    S: np.ndarray,
    demand_caps: np.ndarray | None = None,
    supply_caps: np.ndarray | None = None,
    fixed_totals: bool = False,
    tol: float = 1e-9,
    max_sweeps: int = 10_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Welfare-maximising demand ``C`` (I x J) and supply ``D = C.T`` (J x I).

    ``B`` holds consumer-to-seller bids (I x J), ``S`` seller-to-consumer
    asks (J x I).  By default the caps are upper limits on each consumer's
    and each seller's total; with ``fixed_totals`` they are exact totals and
    must balance.  Pairs with a zero bid or a zero-cap agent get nothing.
    Without caps the optimum is ``c = b / s`` per pair.
    """
    B = np.asarray(B, dtype=float)
    S = np.asarray(S, dtype=float)
    if B.shape != S.T.shape:
        raise ValueError(f"bid shapes {B.shape} and {S.shape} do not transpose")
    I, J = B.shape
    St = S.T
    if np.any(B < 0) or np.any(S < 0):
        raise ValueError("bids must be non-negative")
    U = np.full(I, np.inf) if demand_caps is None else np.asarray(demand_caps, float)
    V = np.full(J, np.inf) if supply_caps is None else np.asarray(supply_caps, float)
    live = (B > 0) & (U[:, None] > 0) & (V[None, :] > 0)
    if fixed_totals:
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
            raise ValueError("fixed totals must be finite")
        if not np.isclose(U.sum(), V.sum(), rtol=1e-9):
            raise ValueError(f"fixed totals do not balance: {U.sum()} vs {V.sum()}")
        if np.any((U > 0) & ~live.any(axis=1)) or np.any((V > 0) & ~live.any(axis=0)):
            raise DamError("an agent with a fixed total has no one to trade with")
    elif np.any(live & (St <= 0)) and (np.isinf(U).any() or np.isinf(V).any()):
        raise DamError("zero ask against a positive bid: welfare is unbounded")
    b = np.where(live, B, 0.0)
    a = np.where(live, St, 1.0)

    lam = np.zeros(I)
    nu = np.zeros(J)
    rows_c = np.isfinite(U) & (U > 0)
    cols_c = np.isfinite(V) & (V > 0)
    signed = fixed_totals
    for _ in range(max_sweeps):
        base = a + nu[None, :]
        lam[rows_c] = _solve_multiplier(b[rows_c], base[rows_c], U[rows_c], tol, signed)
        base = (a + lam[:, None]).T
        nu[cols_c] = _solve_multiplier(b.T[cols_c], base[cols_c], V[cols_c], tol, signed)
        den = a + lam[:, None] + nu[None, :]
        C = np.where(live, b / np.where(live, den, 1.0), 0.0)
        rows = C.sum(axis=1)
        if fixed_totals:
            bad = rows_c & (np.abs(rows - U) > tol * np.maximum(U, 1.0))
        else:
            bad = rows_c & (
                (rows > U * (1 + tol)) | ((lam > 0) & (rows < U * (1 - tol)))
            )
        if not bad.any():
            break
    else:
        raise DamError("welfare allocation did not converge")
    if np.any(C < 0):
        raise DamError("negative allocation")
    return C, C.T.copy()


def dam_consumer_bid_update(C_row: np.ndarray, params: DamParams) -> np.ndarray:
    C_row = np.asarray(C_row, dtype=float)
    den = (params.eta * C_row.sum() - params.c_min + 1.0) * params.sto
    if den <= 0:
        raise DegenerateDemand(
            f"total demand {C_row.sum():.6g} too close to minimum demand {params.c_min}"
        )
    return params.eta * params.zeta * C_row / den


def dam_seller_bid_update(D_row: np.ndarray, params: DamParams) -> np.ndarray:
    return 2.0 * params.l1 * np.asarray(D_row, dtype=float) + params.l2


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    total = float(np.sum(new))
    if total == 0:
        raise VanishedMarket("bid sum vanished")
    return abs(total - float(np.sum(old))) / total


def dam_converged(B_new, B_old, S_new, S_old, eps: float) -> bool:
    return relative_change(B_new, B_old) < eps and relative_change(S_new, S_old) < eps


def dam_payment(B_row: np.ndarray) -> float:
    return float(np.sum(B_row))


def dam_reward(S_row: np.ndarray, params: DamParams) -> float:
    return float(np.sum(np.asarray(S_row, float) ** 2) / (4.0 * params.l1) + params.r_min)


@dataclass
class DamResult:
    consumers: list[int]  # row labels of C / B
    sellers: list[int]  # row labels of D / S
    C: np.ndarray
    D: np.ndarray
    B: np.ndarray
    S: np.ndarray
    payments: dict[int, float]
    rewards: dict[int, float]
    rounds_used: int
    rdb: float
    rds: float
    demand_totals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    supply_totals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    trace: list[tuple[float, float]] = field(default_factory=list)  # (RDB, RDS) per round

    @property
    def energy(self) -> float:
        return float(self.C.sum())

    @property
    def avg_buying_price(self) -> float | None:
        e = self.energy
        return sum(self.payments.values()) / e if e > 0 else None

    @property
    def avg_selling_price(self) -> float | None:
        e = self.energy
        return sum(self.rewards.values()) / e if e > 0 else None


def dam_caps(
    instance: MarketInstance, params: DamParams, malice: MaliceInputs | None = None
) -> tuple[dict[int, float], dict[int, float]]:
    """Auctioneer's per-agent energy limits in KWh, after any rigging."""
    if params.supply_cap is None:
        supply = {
            s.index: params.supply_cap_per_block * s.supply * instance.block_size
            for s in instance.sellers
        }
    else:
        supply = {s.index: params.supply_cap for s in instance.sellers}
    demand = {c.index: params.demand_cap for c in instance.consumers}
    if malice is not None:
        if malice.supply_caps is not None:
            supply.update(malice.supply_caps)
        if malice.demand_caps is not None:
            demand.update(malice.demand_caps)
    return supply, demand


def balanced_totals(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale the long side of the market down so both sides total the same."""
    su, sv = float(U.sum()), float(V.sum())
    if su == 0 or sv == 0:
        raise VanishedMarket("no demand or no supply to allocate")
    if su > sv:
        return U * (sv / su), V.copy()
    return U.copy(), V * (su / sv)


def _bids_from_allocation(C: np.ndarray, D: np.ndarray, demanding: np.ndarray, params):
    B = np.zeros_like(C)
    for i in np.flatnonzero(demanding):
        B[i] = dam_consumer_bid_update(C[i], params)
    return B, dam_seller_bid_update(D, params)


def run_dam(
    instance: MarketInstance,
    params: DamParams = DamParams(),
    malice: MaliceConfig | MaliceInputs | None = None,
) -> DamResult:
    """Iterate allocation and bid updates until RDB and RDS drop below eps.

    The auctioneer fixes each agent's total: its cap, with the long side of
    the market scaled down so supply equals demand.  Every registered agent
    stays in the bid matrices; a zero-total consumer bids nothing and a
    zero-total seller's asks sit at the zero-supply value of the ask update.
    """
    if isinstance(malice, MaliceConfig):
        malice = apply_malice(instance, malice)
    supply_cap, demand_cap = dam_caps(instance, params, malice)
    consumers = [c.index for c in instance.consumers]
    sellers = [s.index for s in instance.sellers]
    I, J = len(consumers), len(sellers)
    if I == 0 or J == 0:
        raise VanishedMarket("no consumers or no sellers")
    U, V = balanced_totals(
        np.array([demand_cap[c] for c in consumers], float),
        np.array([supply_cap[s] for s in sellers], float),
    )
    demanding = U > 0
    bid = np.array([float(instance.consumer(c).bid) for c in consumers])
    ask = np.array([float(instance.seller(s).ask) for s in sellers])
    B = np.where(demanding[:, None], np.repeat(bid[:, None], J, axis=1), 0.0)
    S = np.repeat(ask[:, None], I, axis=1)
    trace: list[tuple[float, float]] = []

    for rnd in range(1, params.max_rounds + 1):
        C, D = dam_welfare_allocation(B, S, U, V, fixed_totals=True)
        B_new, S_new = _bids_from_allocation(C, D, demanding, params)
        rdb, rds = relative_change(B_new, B), relative_change(S_new, S)
        trace.append((rdb, rds))
        B, S = B_new, S_new
        if rdb < params.convergence_eps and rds < params.convergence_eps:
            break
    else:
        raise Diverged(f"no convergence within {params.max_rounds} rounds", trace)

    payments = {consumers[i]: dam_payment(B[i]) for i in range(I)}
    rewards = {sellers[j]: dam_reward(S[j], params) for j in range(J)}
    return DamResult(
        consumers, sellers, C, D, B, S, payments, rewards, rnd, rdb, rds, U, V, trace
    )


def dam_step(result: DamResult, params: DamParams = DamParams()) -> tuple[float, float]:
    """(RDB, RDS) of one further round started from a finished run."""
    C, D = dam_welfare_allocation(
        result.B, result.S, result.demand_totals, result.supply_totals, fixed_totals=True
    )
    B_new, S_new = _bids_from_allocation(C, D, result.demand_totals > 0, params)
    return relative_change(B_new, result.B), relative_change(S_new, result.S)
