"""Dataset serialization: canonical JSON-lines plus a flat CSV fallback.

The JSONL form is canonical: fixed key order, floats rendered with 17
significant decimal digits, no whitespace. Loading a file and saving it
again reproduces the canonical bytes exactly, so datasets diff cleanly.

JSONL layout: an optional first line ``{"meta":{...}}`` (omitted when the
meta map is empty), then one bag per line:

    {"id":"b1","label":1,"instances":[[...],[...]],"truth":["causal",...]}

``truth`` is ``null`` when every role in the bag is unknown.

The CSV fallback is one instance per row, ``bag_id,label,f1,...,fd``, with
consecutive rows of equal bag_id forming one bag; truths and meta are not
representable there.
"""
from __future__ import annotations

import csv
import io
import json

import numpy as np

from .bags import UNKNOWN, Bag, Instance, MILDataset, TRUTH_ROLES
from .errors import DimMismatch, EmptyDataset, ParseError

FORMATS = ("jsonl", "csv")


def format_float(x: float) -> str:
    """Canonical decimal rendering: 17 significant digits (round-trips float64)."""
    return format(float(x), ".17g")


def canonical_json(value) -> str:
    """Compact JSON with sorted object keys and canonical float rendering."""
    if isinstance(value, dict):
        items = ",".join(
            f"{json.dumps(str(k))}:{canonical_json(v)}" for k, v in sorted(value.items())
        )
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in value) + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"cannot canonically serialize {type(value).__name__}")


def _bag_line(bag: Bag) -> str:
    rows = ",".join(
        "[" + ",".join(format_float(v) for v in inst.features) + "]" for inst in bag.instances
    )
    if all(inst.truth == UNKNOWN for inst in bag.instances):
        truth = "null"
    else:
        truth = "[" + ",".join(json.dumps(inst.truth) for inst in bag.instances) + "]"
    return f'{{"id":{json.dumps(bag.id)},"label":{bag.label},"instances":[{rows}],"truth":{truth}}}'


# meta keys describing where a dataset was read from, not what it contains;
# excluded from the canonical bytes so load/save round-trips are exact
VOLATILE_META_KEYS = frozenset({"source"})


def dumps_dataset(dataset: MILDataset) -> str:
    lines = []
    meta = {k: v for k, v in dataset.meta.items() if k not in VOLATILE_META_KEYS}
    if meta:
        lines.append('{"meta":' + canonical_json(meta) + "}")
    lines.extend(_bag_line(b) for b in dataset.bags)
    return "\n".join(lines) + "\n"


def _parse_bag_record(rec, lineno: int) -> Bag:
    if not isinstance(rec, dict):
        raise ParseError("bag record is not an object", lineno)
    for key in ("id", "label", "instances"):
        if key not in rec:
            raise ParseError(f"missing key {key!r}", lineno)
    rows = rec["instances"]
    if not isinstance(rows, list) or not rows:
        raise ParseError("instances must be a nonempty list", lineno)
    truth = rec.get("truth")
    if truth is None:
        truth = [UNKNOWN] * len(rows)
    if len(truth) != len(rows):
        raise ParseError("truth list length differs from instance count", lineno)
    for t in truth:
        if t not in TRUTH_ROLES:
            raise ParseError(f"unknown truth role {t!r}", lineno)
    if rec["label"] not in (0, 1):
        raise ParseError(f"label must be 0 or 1, got {rec['label']!r}", lineno)
    try:
        instances = tuple(Instance(r, t) for r, t in zip(rows, truth))
        return Bag(str(rec["id"]), instances, int(rec["label"]))
    except (ValueError, TypeError) as exc:
        raise ParseError(str(exc), lineno) from exc


def loads_dataset(text: str, source: str = "<string>") -> MILDataset:
    bags = []
    meta = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", lineno) from exc
        if lineno == 1 and isinstance(rec, dict) and set(rec) == {"meta"}:
            if not isinstance(rec["meta"], dict):
                raise ParseError("meta must be an object", lineno)
            meta = rec["meta"]
            continue
        bags.append(_parse_bag_record(rec, lineno))
    if not bags:
        raise EmptyDataset(f"{source}: no bags found")
    dims = {b.dim for b in bags}
    if len(dims) > 1:
        raise DimMismatch(f"{source}: mixed feature dimensions {sorted(dims)}")
    return MILDataset(tuple(bags), meta)


def _dump_csv(dataset: MILDataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bag_id", "label"] + [f"f{i + 1}" for i in range(dataset.dim)])
    for bag in dataset.bags:
        for inst in bag.instances:
            writer.writerow([bag.id, bag.label] + [format_float(v) for v in inst.features])
    return buf.getvalue()


def load_csv_text(text: str, source: str = "<string>") -> MILDataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset(f"{source}: empty file") from None
    if len(header) < 3 or header[:2] != ["bag_id", "label"]:
        raise ParseError("header must be bag_id,label,f1,...,fd", 1)
    d = len(header) - 2
    bags: list[Bag] = []
    cur_id: str | None = None
    cur_label = 0
    cur_rows: list[np.ndarray] = []

    def flush():
        if cur_id is not None:
            bags.append(Bag(cur_id, tuple(Instance(r) for r in cur_rows), cur_label))

    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != d + 2:
            raise ParseError(f"expected {d + 2} columns, got {len(row)}", lineno)
        bag_id, label_s = row[0], row[1]
        try:
            label = int(label_s)
            feats = np.array([float(v) for v in row[2:]], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        if label not in (0, 1):
            raise ParseError(f"label must be 0 or 1, got {label}", lineno)
        if bag_id != cur_id:
            flush()
            cur_id, cur_label, cur_rows = bag_id, label, []
        elif label != cur_label:
            raise ParseError(f"bag {bag_id!r} has inconsistent labels", lineno)
        cur_rows.append(feats)
    flush()
    if not bags:
        raise EmptyDataset(f"{source}: no bags found")
    return MILDataset(tuple(bags), {})


def save_dataset(dataset: MILDataset, path, format: str = "jsonl") -> None:
    """Write a dataset in canonical form; load(save(ds)) is the identity."""
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    text = dumps_dataset(dataset) if format == "jsonl" else _dump_csv(dataset)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def load_dataset(path, format: str = "jsonl") -> MILDataset:
    """Read a dataset; the file's path is recorded in meta["source"]."""
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if format == "jsonl":
        ds = loads_dataset(text, source=str(path))
    else:
        ds = load_csv_text(text, source=str(path))
    meta = dict(ds.meta)
    meta["source"] = str(path)
    return MILDataset(ds.bags, meta)
