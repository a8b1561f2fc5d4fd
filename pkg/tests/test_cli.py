import csv
import json
from pathlib import Path

import pytest

from p2pmatch import io
from p2pmatch.cli import main

TOY = {
    "schema_version": 1,
    "scenarios": [{"id": "toy", "algorithm": "em", "generator": {"kind": "toy", "regime": "equal"}}],
}


def write(tmp_path: Path, name: str, obj) -> Path:
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2), encoding="utf-8")
    return p


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_run_toy_scenario(tmp_path):
    out = tmp_path / "out.csv"
    assert main(["run", str(write(tmp_path, "s.json", TOY)), "-o", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 1
    assert rows[0]["verified"] == "pass"
    assert rows[0]["avg_trade_price"] == rows[0]["avg_buying_price"]


def test_negotiation_sweep_row_count(tmp_path):
    nem = lambda i, b, s: {"id": i, "algorithm": "nem", "generator": {"kind": "network"},
                           "nem": {"max_buy": b, "min_sell": s}}
    doc = {
        "schema_version": 1,
        "seeds": "0-19",
        "scenarios": [
            {"id": "em", "algorithm": "em", "generator": {"kind": "network"}},
            nem("nem-10-1", 10, 1), nem("nem-10-6", 10, 6),
            nem("nem-20-1", 20, 1), nem("nem-20-6", 20, 6),
        ],
    }
    out = tmp_path / "limits.csv"
    assert main(["run", str(write(tmp_path, "f.json", doc)), "-o", str(out), "--jobs", "2"]) == 0
    rows = read_rows(out)
    assert len(rows) == 100
    assert [r["scenario"] for r in rows[:21]] == ["em"] * 20 + ["nem-10-1"]
    assert all(r["verified"] == "pass" for r in rows)


def test_malformed_scenario_reports_line(tmp_path, capsys):
    bad = '{\n  "schema_version": 1,\n  "scenarios": [\n    {"id": "x", "algorithm": "nope",\n     "generator": {"kind": "toy"}}\n  ]\n}\n'
    assert main(["run", str(write(tmp_path, "bad.json", bad))]) == 2
    err = capsys.readouterr().err
    assert "bad.json:4:" in err and "unknown algorithm" in err


def test_broken_json_reports_line(tmp_path, capsys):
    assert main(["run", str(write(tmp_path, "bad.json", '{\n "schema_version": 1,\n "scenarios": [,]\n}'))]) == 2
    assert "bad.json:3:" in capsys.readouterr().err


def test_wrong_schema_version(tmp_path):
    doc = dict(TOY, schema_version=2)
    assert main(["run", str(write(tmp_path, "s.json", doc))]) == 2


def test_raw_limits_are_a_runtime_error(tmp_path, capsys):
    doc = {"schema_version": 1, "scenarios": [
        {"id": "n", "algorithm": "nem", "generator": {"kind": "network"}, "nem": {"max_buy": 10, "min_sell": 1}}]}
    assert main(["run", str(write(tmp_path, "s.json", doc)), "--nem-limits", "raw"]) == 1
    assert "initial ask" in capsys.readouterr().err


def test_dump_then_verify(tmp_path, capsys):
    dump = tmp_path / "dump"
    assert main(["run", str(write(tmp_path, "s.json", TOY)), "-o", str(tmp_path / "o.csv"), "--dump", str(dump)]) == 0
    inst, match = dump / "toy-seed0.instance.json", dump / "toy-seed0.matching.json"
    capsys.readouterr()
    assert main(["verify", str(match), str(inst)]) == 0
    assert "stable, feasible" in capsys.readouterr().out


def test_verify_quota_breach(tmp_path, capsys):
    inst = io.instance_to_obj(__import__("p2pmatch").make_toy_instance("equal"))
    ip = write(tmp_path, "i.json", inst)
    m = {"schema_version": 1, "pairs": [{"seller": 0, "consumer": 3, "blocks": 4}]}
    assert main(["verify", str(write(tmp_path, "m.json", m)), str(ip)]) == 3
    assert "violation" in capsys.readouterr().out


def test_verify_unknown_seller(tmp_path):
    inst = io.instance_to_obj(__import__("p2pmatch").make_toy_instance("equal"))
    ip = write(tmp_path, "i.json", inst)
    m = {"schema_version": 1, "pairs": [{"seller": 9, "consumer": 3, "blocks": 1}]}
    assert main(["verify", str(write(tmp_path, "m.json", m)), str(ip)]) == 2


def test_verify_unstable_matching(tmp_path, capsys):
    inst = io.instance_to_obj(__import__("p2pmatch").make_toy_instance("equal"))
    ip = write(tmp_path, "i.json", inst)
    m = {"schema_version": 1, "pairs": [{"seller": 0, "consumer": 1, "blocks": 1}]}
    assert main(["verify", str(write(tmp_path, "m.json", m)), str(ip)]) == 3
    assert "blocking pair" in capsys.readouterr().out


def test_trace_output(tmp_path):
    trace = tmp_path / "t.jsonl"
    assert main(["run", str(write(tmp_path, "s.json", TOY)), "-o", str(tmp_path / "o.csv"), "--trace", str(trace)]) == 0
    lines = [json.loads(l) for l in trace.read_text().splitlines()]
    assert [l["round"] for l in lines] == [1, 2, 3]
    assert lines[1]["reallocations"][0]["gained_by"] == [3]


def test_rerun_is_identical_apart_from_timing(tmp_path):
    s = write(tmp_path, "s.json", TOY)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["run", str(s), "-o", str(a), "--seeds", "0-2"])
    main(["run", str(s), "-o", str(b), "--seeds", "0-2"])
    strip = lambda p: [{k: v for k, v in r.items() if k != "wall_ms"} for r in read_rows(p)]
    assert strip(a) == strip(b)


COMPARE = {
    "schema_version": 1,
    "seeds": [0],
    "scenarios": [
        {"id": "dam", "algorithm": "dam", "generator": {"kind": "network"}},
        {"id": "dam-s", "algorithm": "dam", "generator": {"kind": "network"}, "malice": {"kind": "dam_supply_favor"}},
        {"id": "ffs", "algorithm": "ffs", "generator": {"kind": "network", "ladder": "dam"}},
        {"id": "ffs-s", "algorithm": "ffs", "generator": {"kind": "network", "ladder": "dam"}, "malice": {"kind": "ffs_hide_sellers"}},
        {"id": "em", "algorithm": "em", "generator": {"kind": "network", "ladder": "dam"}},
        {"id": "nem", "algorithm": "nem", "generator": {"kind": "network", "ladder": "dam"},
         "nem": {"max_buy": "auto", "min_sell": "auto"}},
    ],
}


def test_compare_table(tmp_path, capsys):
    assert main(["compare", str(write(tmp_path, "c.json", COMPARE))]) == 0
    out = capsys.readouterr().out
    header, rule, none_row, seller_row = out.splitlines()[:4]
    assert header.split()[-4:] == ["DAM", "FFS", "EM", "NEM"]
    assert none_row.startswith("No maliciousness") and seller_row.startswith("Seller preference")
    em_cells = [line.split("  ")[-2] for line in (none_row, seller_row)]
    sell, buy = em_cells[0].strip().split(", ")
    assert sell == buy and em_cells[0] == em_cells[1]
    assert "Revenue loss" in out


def test_compare_needs_two_algorithms(tmp_path, capsys):
    doc = {"schema_version": 1, "scenarios": [COMPARE["scenarios"][0]]}
    assert main(["compare", str(write(tmp_path, "c.json", doc))]) == 1
    assert "nothing to compare" in capsys.readouterr().err


def test_compare_rejects_mismatched_markets(tmp_path, capsys):
    doc = {"schema_version": 1, "scenarios": [
        {"id": "dam", "algorithm": "dam", "generator": {"kind": "network"}},
        {"id": "em", "algorithm": "em", "generator": {"kind": "network", "n_sellers": 15, "n_consumers": 15}},
    ]}
    assert main(["compare", str(write(tmp_path, "c.json", doc))]) == 1
    assert "different market" in capsys.readouterr().err


def test_inline_instance_round_trip(tmp_path):
    inst = __import__("p2pmatch").make_toy_instance("deficit")
    obj = json.loads(json.dumps(io.instance_to_obj(inst)))
    assert io.instance_from_obj(obj) == inst


def test_inline_instance_errors_point_at_actor(tmp_path, capsys):
    doc = {"schema_version": 1, "scenarios": [{"id": "x", "algorithm": "em", "instance": {
        "sellers": [{"index": 0, "supply": 1, "ask": 1}],
        "consumers": [{"index": 0, "demand": -2, "bid": 1}]}}]}
    p = write(tmp_path, "s.json", doc)
    assert main(["run", str(p)]) == 2
    err = capsys.readouterr().err
    line = int(err.split("s.json:")[1].split(":")[0])
    assert '"demand": -2' in p.read_text().splitlines()[line - 1] or "-2" in "\n".join(
        p.read_text().splitlines()[line - 1: line + 3]
    )


def test_seed_list_parser():
    assert io.parse_seed_list("0-3,7") == (0, 1, 2, 3, 7)
    with pytest.raises(ValueError):
        io.parse_seed_list("5-1")
