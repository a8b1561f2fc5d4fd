"""JSON files for instances, matchings and experiment scenarios.

Every file carries ``"schema_version": 1``.  Parse problems are raised as
:class:`ParseError` with the 1-based line of the offending JSON object, so
command-line tools can print ``path:line: message``.
"""

from __future__ import annotations

import json
import json.decoder
import json.scanner
from dataclasses import dataclass, field, fields
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Any, Literal

from .dam import DamParams
from .malice import MALICE_KINDS, MaliceConfig
from .model import (
    Consumer,
    InstanceError,
    Location,
    MarketInstance,
    Matching,
    Seller,
    to_price,
    validate_instance,
)
from .nem import NemParams
from .scenarios import NetworkGenParams

SCHEMA_VERSION = 1
ALGORITHMS = ("em", "nem", "dam", "ffs")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.path = path

    def __str__(self) -> str:
        where = self.path or "<input>"
        if self.line is not None:
            where = f"{where}:{self.line}"
        return f"{where}: {self.message}"


class _Obj(dict):
    """A decoded JSON object that remembers the line it started on."""

    line: int = 0


def _line_decoder() -> json.JSONDecoder:
    dec = json.JSONDecoder()

    def parse_object(s_and_end, *args, **kwargs):
        s, end = s_and_end
        obj, new_end = json.decoder.JSONObject(s_and_end, *args, **kwargs)
        out = _Obj(obj)
        out.line = s.count("\n", 0, end) + 1
        return out, new_end

    dec.parse_object = parse_object
    dec.scan_once = json.scanner.py_make_scanner(dec)
    return dec


def loads(text: str, path: str | None = None) -> Any:
    try:
        return _line_decoder().decode(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None


def load_file(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", None, str(path)) from None
    doc = loads(text, str(path))
    _check_version(doc, str(path))
    return doc


def _line(obj) -> int | None:
    return getattr(obj, "line", None)


def _check_version(doc, path: str | None) -> None:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", 1, path)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(
            f"schema_version must be {SCHEMA_VERSION}, got {doc.get('schema_version')!r}",
            _line(doc),
            path,
        )


def _need(obj, key: str, kind, path, what: str | None = None):
    if not isinstance(obj, dict):
        raise ParseError(f"expected an object for {what or key}", None, path)
    if key not in obj:
        raise ParseError(f"missing field {key!r}", _line(obj), path)
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise ParseError(f"field {key!r} has the wrong type", _line(obj), path)
    return value


def _price(obj, key, path) -> Fraction:
    value = _need(obj, key, (int, float, str), path)
    if isinstance(value, bool):
        raise ParseError(f"field {key!r} must be a number", _line(obj), path)
    try:
        return to_price(value)
    except (ValueError, TypeError, ArithmeticError):
        raise ParseError(f"field {key!r} is not a price: {value!r}", _line(obj), path) from None


def _count(obj, key, path) -> int:
    value = _need(obj, key, int, path)
    if isinstance(value, bool):
        raise ParseError(f"field {key!r} must be an integer", _line(obj), path)
    return value


def _location(obj, path) -> Location:
    loc = obj.get("location", [0.0, 0.0])
    if (
        not isinstance(loc, list)
        or len(loc) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in loc)
    ):
        raise ParseError("location must be [x, y]", _line(obj), path)
    return Location(float(loc[0]), float(loc[1]))


# -- instances --------------------------------------------------------------


def instance_from_obj(obj, path: str | None = None) -> MarketInstance:
    sellers_raw = _need(obj, "sellers", list, path)
    consumers_raw = _need(obj, "consumers", list, path)
    sellers = tuple(
        Seller(_count(s, "index", path), _count(s, "supply", path), _price(s, "ask", path), _location(s, path))
        for s in sellers_raw
    )
    consumers = tuple(
        Consumer(_count(c, "index", path), _count(c, "demand", path), _price(c, "bid", path), _location(c, path))
        for c in consumers_raw
    )
    block = obj.get("block_size", 1.0)
    inst = MarketInstance(sellers, consumers, float(block))
    try:
        validate_instance(inst)
    except InstanceError as exc:
        line = None
        if exc.actor is not None:
            rows = sellers_raw if exc.actor.kind == "seller" else consumers_raw
            for row in rows:
                if isinstance(row, dict) and row.get("index") == exc.actor.index:
                    line = _line(row)
        raise ParseError(str(exc), line or _line(obj), path) from None
    return inst


def _price_text(p: Fraction) -> str:
    if p.denominator == 1:
        return str(p.numerator)
    # prices are quantized to a fixed number of decimals, so this is exact
    return str(Decimal(p.numerator) / Decimal(p.denominator))


def instance_to_obj(inst: MarketInstance) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "block_size": inst.block_size,
        "sellers": [
            {"index": s.index, "supply": s.supply, "ask": _price_text(s.ask), "location": [s.location.x, s.location.y]}
            for s in inst.sellers
        ],
        "consumers": [
            {"index": c.index, "demand": c.demand, "bid": _price_text(c.bid), "location": [c.location.x, c.location.y]}
            for c in inst.consumers
        ],
    }


def load_instance(path: str | Path) -> MarketInstance:
    return instance_from_obj(load_file(path), str(path))


# -- matchings --------------------------------------------------------------


def _pairs(rows, path) -> dict[tuple[int, int], int]:
    out: dict[tuple[int, int], int] = {}
    for row in rows:
        key = (_count(row, "seller", path), _count(row, "consumer", path))
        n = _count(row, "blocks", path)
        if n < 1:
            raise ParseError("blocks must be >= 1", _line(row), path)
        if key in out:
            raise ParseError(f"pair {key} listed twice", _line(row), path)
        out[key] = n
    return out


def matching_from_obj(obj, inst: MarketInstance, path: str | None = None) -> Matching:
    pairs = _pairs(_need(obj, "pairs", list, path), path)
    consumer_view = None
    if "consumer_view" in obj:
        consumer_view = _pairs(_need(obj, "consumer_view", list, path), path)
    sellers = {s.index for s in inst.sellers}
    consumers = {c.index for c in inst.consumers}
    for rows in (obj["pairs"], obj.get("consumer_view", [])):
        for row in rows:
            if row["seller"] not in sellers:
                raise ParseError(f"unknown seller {row['seller']}", _line(row), path)
            if row["consumer"] not in consumers:
                raise ParseError(f"unknown consumer {row['consumer']}", _line(row), path)
    return Matching.from_pairs(pairs, inst, consumer_view)


def matching_to_obj(matching: Matching, acceptability: str = "any") -> dict:
    obj = {
        "schema_version": SCHEMA_VERSION,
        "acceptability": acceptability,
        "pairs": [
            {"seller": s, "consumer": c, "blocks": n} for (s, c), n in sorted(matching.pairs.items())
        ],
    }
    if matching.consumer_pairs is not None:
        obj["consumer_view"] = [
            {"seller": s, "consumer": c, "blocks": n}
            for (s, c), n in sorted(matching.consumer_pairs.items())
        ]
    return obj


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


# -- scenarios --------------------------------------------------------------

LimitReading = Literal["raw", "tenths"]


@dataclass(frozen=True)
class NemConfig:
    """NEM limits as written in a scenario file.

    ``max_buy``/``min_sell`` are numbers, or ``"auto"`` for the instance's
    highest bid and lowest ask.  Under the ``tenths`` reading numeric limits
    are divided by ten, so ``(10, 1)`` becomes ``(1.0, 0.1)``.
    """

    iterations: int = 6
    max_buy: Fraction | str = Fraction(10)
    min_sell: Fraction | str = Fraction(1)
    limits: LimitReading = "tenths"
    force_last_trades: bool = True

    def resolve(self, inst: MarketInstance, reading: LimitReading | None = None) -> NemParams:
        reading = reading or self.limits
        scale = Fraction(1, 10) if reading == "tenths" else Fraction(1)

        def pick(v, auto):
            return auto if v == "auto" else v * scale

        max_bid = max((c.bid for c in inst.consumers), default=Fraction(0))
        min_ask = min((s.ask for s in inst.sellers), default=Fraction(0))
        return NemParams(
            self.iterations,
            pick(self.max_buy, max_bid),
            pick(self.min_sell, min_ask),
            self.force_last_trades,
        )


@dataclass(frozen=True)
class FfsConfig:
    arrival: Literal["index", "seeded"] | tuple[int, ...] = "seeded"
    strict_equality: bool = False
    normalize_sell: bool = True  # scale sellers' take by the DAM sell/buy ratio


@dataclass(frozen=True)
class SourceSpec:
    kind: Literal["network", "toy", "random", "inline"]
    network: NetworkGenParams | None = None
    regime: str = "equal"
    instance: MarketInstance | None = None
    ladder: Literal["fixed", "dam"] = "fixed"  # "dam": means taken from a DAM run
    random_args: tuple[tuple[str, int], ...] = ()


@dataclass(frozen=True)
class Scenario:
    id: str
    algorithm: str
    source: SourceSpec
    seeds: tuple[int, ...] = (0,)
    nem: NemConfig = NemConfig()
    dam: DamParams = DamParams()
    ffs: FfsConfig = FfsConfig()
    malice: MaliceConfig | None = None
    line: int | None = field(default=None, compare=False)


def _opt(obj, key, kind, default, path):
    if key not in obj:
        return default
    value = obj[key]
    kinds = kind if isinstance(kind, tuple) else (kind,)
    if not isinstance(value, kinds) or (isinstance(value, bool) and bool not in kinds):
        raise ParseError(f"field {key!r} has the wrong type", _line(obj), path)
    return value


def _seeds(value, where, path) -> tuple[int, ...]:
    if isinstance(value, str):
        try:
            return parse_seed_list(value)
        except ValueError as exc:
            raise ParseError(str(exc), where, path) from None
    if isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        if not value:
            raise ParseError("seed list is empty", where, path)
        return tuple(value)
    raise ParseError("seeds must be a list of integers or a range string", where, path)


def parse_seed_list(text: str) -> tuple[int, ...]:
    """``"0-19"``, ``"1,4,9"`` or a mix such as ``"0-3,10"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            a, b = int(lo), int(hi)
            if b < a:
                raise ValueError(f"empty seed range {part!r}")
            out.extend(range(a, b + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("seed list is empty")
    return tuple(out)


def _network(obj, path) -> NetworkGenParams:
    allowed = {f.name for f in fields(NetworkGenParams)} - {"seed"}
    kwargs = {}
    for key, value in obj.items():
        if key in ("kind", "ladder"):
            continue
        if key not in allowed:
            raise ParseError(f"unknown generator field {key!r}", _line(obj), path)
        kwargs[key] = value
    try:
        return NetworkGenParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad generator parameters: {exc}", _line(obj), path) from None


def _source(entry, path) -> SourceSpec:
    if "instance" in entry:
        return SourceSpec("inline", instance=instance_from_obj(entry["instance"], path))
    gen = _need(entry, "generator", dict, path)
    kind = _need(gen, "kind", str, path)
    if kind == "network":
        ladder = _opt(gen, "ladder", str, "fixed", path)
        if ladder not in ("fixed", "dam"):
            raise ParseError(f"unknown ladder {ladder!r}", _line(gen), path)
        return SourceSpec("network", network=_network(gen, path), ladder=ladder)
    if kind == "toy":
        regime = _opt(gen, "regime", str, "equal", path)
        if regime not in ("equal", "surplus", "deficit"):
            raise ParseError(f"unknown toy regime {regime!r}", _line(gen), path)
        return SourceSpec("toy", regime=regime)
    if kind == "random":
        allowed = ("max_sellers", "max_consumers", "max_blocks", "price_levels", "min_agents")
        args = []
        for key, value in gen.items():
            if key == "kind":
                continue
            if key not in allowed or not isinstance(value, int):
                raise ParseError(f"bad random generator field {key!r}", _line(gen), path)
            args.append((key, value))
        return SourceSpec("random", random_args=tuple(sorted(args)))
    raise ParseError(f"unknown generator kind {kind!r}", _line(gen), path)


def _nem(obj, path) -> NemConfig:
    if obj is None:
        return NemConfig()
    if not isinstance(obj, dict):
        raise ParseError("nem must be an object", None, path)

    def limit(key, default):
        if key not in obj:
            return default
        if obj[key] == "auto":
            return "auto"
        return _price(obj, key, path)

    limits = _opt(obj, "limits", str, "tenths", path)
    if limits not in ("raw", "tenths"):
        raise ParseError(f"limits must be 'raw' or 'tenths', got {limits!r}", _line(obj), path)
    iterations = _opt(obj, "iterations", int, 6, path)
    if iterations < 2:
        raise ParseError("iterations must be >= 2", _line(obj), path)
    return NemConfig(
        iterations,
        limit("max_buy", Fraction(10)),
        limit("min_sell", Fraction(1)),
        limits,
        _opt(obj, "force_last_trades", bool, True, path),
    )


def _dam(obj, path) -> DamParams:
    if obj is None:
        return DamParams()
    allowed = {f.name for f in fields(DamParams)}
    for key in obj:
        if key not in allowed:
            raise ParseError(f"unknown dam field {key!r}", _line(obj), path)
    try:
        return DamParams(**dict(obj))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad dam parameters: {exc}", _line(obj), path) from None


def _ffs(obj, path) -> FfsConfig:
    if obj is None:
        return FfsConfig()
    arrival = obj.get("arrival", "seeded")
    if isinstance(arrival, list):
        arrival = tuple(arrival)
    elif arrival not in ("index", "seeded"):
        raise ParseError(f"unknown arrival policy {arrival!r}", _line(obj), path)
    return FfsConfig(
        arrival,
        _opt(obj, "strict_equality", bool, False, path),
        _opt(obj, "normalize_sell", bool, True, path),
    )


def _malice(obj, path) -> MaliceConfig | None:
    if obj is None:
        return None
    kind = _need(obj, "kind", str, path)
    if kind not in MALICE_KINDS:
        raise ParseError(f"unknown malice kind {kind!r}", _line(obj), path)
    favored = obj.get("favored")
    return MaliceConfig(
        kind,
        _opt(obj, "favored_count", int, 15, path),
        float(_opt(obj, "cap", (int, float), 20.0, path)),
        tuple(favored) if favored is not None else None,
    )


def scenarios_from_obj(doc, path: str | None = None) -> list[Scenario]:
    entries = _need(doc, "scenarios", list, path)
    if not entries:
        raise ParseError("no scenarios listed", _line(doc), path)
    default_seeds = _seeds(doc["seeds"], _line(doc), path) if "seeds" in doc else (0,)
    out, seen = [], set()
    for entry in entries:
        if not isinstance(entry, dict):
            raise ParseError("each scenario must be an object", _line(doc), path)
        sid = _need(entry, "id", str, path)
        if sid in seen:
            raise ParseError(f"duplicate scenario id {sid!r}", _line(entry), path)
        seen.add(sid)
        algo = _need(entry, "algorithm", str, path)
        if algo not in ALGORITHMS:
            raise ParseError(f"unknown algorithm {algo!r}", _line(entry), path)
        seeds = _seeds(entry["seeds"], _line(entry), path) if "seeds" in entry else default_seeds
        out.append(
            Scenario(
                sid,
                algo,
                _source(entry, path),
                seeds,
                _nem(entry.get("nem"), path),
                _dam(entry.get("dam"), path),
                _ffs(entry.get("ffs"), path),
                _malice(entry.get("malice"), path),
                _line(entry),
            )
        )
    return out


def load_scenarios(path: str | Path) -> list[Scenario]:
    return scenarios_from_obj(load_file(path), str(path))
