from fractions import Fraction as F

import pytest

from p2pmatch.dam import run_dam
from p2pmatch.em import run_em
from p2pmatch.ffs import run_ffs
from p2pmatch.metrics import compute_metrics
from p2pmatch.model import MarketInstance
from p2pmatch.nem import NemParams, run_nem
from p2pmatch.scenarios import NetworkGenParams, gen_network


def test_single_trade_report():
    inst = MarketInstance.build([1], ["0.8"], [1], ["0.8"])
    rep = compute_metrics(run_em(inst), inst)
    assert rep.avg_trade_price == rep.avg_selling_price == rep.avg_buying_price == F(4, 5)
    assert rep.revenue_loss == 0
    assert rep.request_count == 1


def test_no_trades_reports_absent_prices():
    inst = MarketInstance.build([1], ["0.9"], [1], ["0.1"])
    rep = compute_metrics(run_ffs(inst))
    assert rep.avg_buying_price is None and rep.revenue_loss is None
    assert rep.unmatched_consumer_blocks == 1


def test_em_needs_instance():
    inst = MarketInstance.build([1], [1], [1], [1])
    with pytest.raises(ValueError):
        compute_metrics(run_em(inst))


@pytest.mark.parametrize("seed", range(3))
def test_decentralised_runs_have_no_revenue_loss(seed):
    inst = gen_network(NetworkGenParams(seed=seed))
    for rep in (
        compute_metrics(run_em(inst), inst),
        compute_metrics(run_nem(inst, NemParams(6, F(1), F(1, 10)))),
    ):
        assert rep.avg_selling_price == rep.avg_buying_price
        assert rep.revenue_loss == 0
        assert isinstance(rep.avg_selling_price, F)


def test_ffs_normalisation_and_dam_gap():
    inst = gen_network(NetworkGenParams(seed=0))
    dam = compute_metrics(run_dam(inst))
    assert dam.avg_buying_price >= dam.avg_selling_price
    ratio = dam.avg_selling_price / dam.avg_buying_price
    ffs = compute_metrics(run_ffs(inst), sell_ratio=ratio)
    assert ffs.avg_selling_price == pytest.approx(float(ffs.avg_buying_price) * ratio)
    assert ffs.avg_buying_price >= ffs.avg_selling_price


def test_unknown_output_type():
    with pytest.raises(TypeError):
        compute_metrics(object())
