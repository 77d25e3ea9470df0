"""Readers and writers for schema, workload, dataset, plan and result files."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .planner import CostModel, Plan, privacy_cost
from .schema import AttrSet, Attribute, DataError, Dataset, Schema, SchemaError, Workload

SEP = "|"
SIG = "%.12g"


def fmt(x: float) -> str:
    return SIG % x


def load_schema(path) -> Schema:
    doc = _load_json(path)
    attrs = doc.get("attributes") if isinstance(doc, dict) else None
    if not isinstance(attrs, list) or not attrs:
        raise SchemaError(f"{path}: expected a non-empty 'attributes' list")
    out = []
    for k, a in enumerate(attrs):
        where = f"{path}: attributes[{k}]"
        if not isinstance(a, dict) or "name" not in a or "size" not in a:
            raise SchemaError(f"{where}: needs 'name' and 'size'")
        name = a["name"]
        if not isinstance(name, str) or not name or SEP in name:
            raise SchemaError(f"{where}: name must be a non-empty string without {SEP!r}")
        size = a["size"]
        if isinstance(size, bool) or not isinstance(size, int):
            raise SchemaError(f"{where}: size must be an integer")
        labels = a.get("labels")
        if labels is not None:
            if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
                raise SchemaError(f"{where}: labels must be a list of strings")
            labels = tuple(labels)
        try:
            out.append(Attribute(name, size, labels))
        except SchemaError as e:
            raise SchemaError(f"{where}: {e}") from None
    return Schema(tuple(out))


def load_workload(path, schema: Schema) -> Workload:
    doc = _load_json(path)
    margs = doc.get("marginals") if isinstance(doc, dict) else None
    if not isinstance(margs, list):
        raise SchemaError(f"{path}: expected a 'marginals' list")
    entries = []
    for k, m in enumerate(margs):
        where = f"{path}: marginals[{k}]"
        if not isinstance(m, dict) or not isinstance(m.get("attrs"), list):
            raise SchemaError(f"{where}: needs an 'attrs' list")
        names = m["attrs"]
        if len(set(names)) != len(names):
            raise SchemaError(f"{where}: repeated attribute")
        try:
            A = schema.attrset(names)
        except SchemaError as e:
            raise SchemaError(f"{where}: {e}") from None
        w = m.get("weight", 1.0)
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise SchemaError(f"{where}: weight must be a number")
        entries.append((A, w))
    try:
        return Workload(tuple(entries))
    except SchemaError as e:
        raise SchemaError(f"{path}: {e}") from None


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise SchemaError(f"{path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None


def load_dataset(path, schema: Schema) -> Dataset:
    """CSV with a header of attribute names; cells are labels or integer codes."""
    try:
        f = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"{path}: {e.strerror}") from None
    with f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        if sorted(header) != sorted(schema.names) or len(set(header)) != len(header):
            raise DataError(f"{path}: header {header} does not match schema attributes {list(schema.names)}")
        order = [header.index(n) for n in schema.names]
        attrs = schema.attributes
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([a.encode(row[j].strip()) for a, j in zip(attrs, order)])
            except DataError as e:
                raise DataError(f"{path}: line {line}: {e}") from None
    return Dataset(schema, np.asarray(rows, dtype=np.int64).reshape(-1, len(schema)))


def attrs_key(schema: Schema, A: AttrSet) -> str:
    return SEP.join(schema.names_of(A))


def parse_attrs_key(schema: Schema, key: str) -> AttrSet:
    return schema.attrset(key.split(SEP)) if key else ()


def header_lines(version: str, seed, pcost: float, rho: float, mu: float, **extra) -> list[str]:
    lines = [f"# resplan {version}", f"# seed: {'none' if seed is None else seed}",
             f"# pcost: {fmt(pcost)}", f"# rho: {fmt(rho)}", f"# mu: {fmt(mu)}"]
    lines += [f"# {k}: {v}" for k, v in extra.items()]
    return lines


def write_plan(path, schema: Schema, plan: Plan, header: list[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        for h in header:
            f.write(h + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["attrs", "sigma2"])
        for A, s in plan.sigma2.items():
            w.writerow([attrs_key(schema, A), fmt(s)])


def read_plan(path, model: CostModel) -> Plan:
    """Read a plan file and check it covers exactly the workload's closure."""
    schema = model.schema
    sigma2 = {}
    meta = {}
    try:
        f = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise SchemaError(f"{path}: {e.strerror}") from None
    with f:
        body = []
        for line in f:
            if line.startswith("#"):
                k, _, v = line[1:].partition(":")
                meta[k.strip()] = v.strip()
            else:
                body.append(line)
    reader = csv.reader(body)
    if next(reader, None) != ["attrs", "sigma2"]:
        raise SchemaError(f"{path}: expected header 'attrs,sigma2'")
    for k, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            A = parse_attrs_key(schema, row[0])
            s = float(row[1])
        except (SchemaError, ValueError, IndexError) as e:
            raise SchemaError(f"{path}: row {k}: {e}") from None
        if not s > 0:
            raise SchemaError(f"{path}: row {k}: sigma2 must be positive")
        sigma2[A] = s
    if set(sigma2) != set(model.members):
        raise SchemaError(f"{path}: plan does not cover exactly the workload closure")
    sigma2 = {B: sigma2[B] for B in model.members}
    objective = meta.get("objective", "sumvar")
    loss = float(meta["predicted_loss"]) if "predicted_loss" in meta else float("nan")
    return Plan(sigma2, privacy_cost(model, sigma2), loss, objective)


def marginal_filename(schema: Schema, A: AttrSet) -> str:
    return "marginal_" + ("__".join(schema.names_of(A)) if A else "total") + ".csv"


def write_marginal(path, schema: Schema, est, header: list[str]) -> None:
    A = est.attrset
    with open(path, "w", newline="", encoding="utf-8") as f:
        for h in header:
            f.write(h + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(schema.names_of(A)) + ["estimate", "variance", "covariance"])
        var, cov = fmt(est.cell_variance), fmt(est.pairwise_covariance)
        for idx, value in enumerate(est.values):
            cell = schema.cell_values(A, idx)
            labels = [schema.attributes[a].decode(v) for a, v in zip(A, cell)]
            w.writerow(labels + [repr(float(value)), var, cov])


def write_residuals(path, schema: Schema, residuals, header: list[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        for h in header:
            f.write(h + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["attrs", "sigma2", "row", "value"])
        for r in residuals:
            key = attrs_key(schema, r.attrset)
            for i, v in enumerate(r.values):
                w.writerow([key, fmt(r.sigma2), i, repr(float(v))])


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
