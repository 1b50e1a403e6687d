"""Bind declared networks, datasets, and parameters to concrete values.

The manifest is a JSON file mapping specification names to model files,
CSV datasets, and literal parameter values. Numeric literals in manifests
and CSV files are parsed as exact decimal rationals, never through float64,
so downstream queries carry exactly the values that were written.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

from . import model as M
from .lang import ast as A
from .lang.typecheck import TypedModule
from .rat import Rat, rat
from .values import TensorValue, shape_size


class BindError(Exception):
    pass


@dataclass
class Bindings:
    networks: dict[str, M.Network] = field(default_factory=dict)
    datasets: dict[str, list] = field(default_factory=dict)  # name -> rows
    parameters: dict[str, Rat] = field(default_factory=dict)
    inferred: dict[str, int] = field(default_factory=dict)

    def dim(self, d: A.Dim) -> int:
        if isinstance(d, int):
            return d
        if d in self.inferred:
            return self.inferred[d]
        value = self.parameters.get(d)
        if value is None:
            raise BindError(f"dimension parameter {d!r} is not bound")
        if value.denominator != 1 or value < 1:
            raise BindError(f"dimension parameter {d!r} must be a positive integer")
        return int(value)


@dataclass(frozen=True)
class Violation:
    dataset: str
    row: int
    feature: tuple[int, ...]
    value: Rat
    bound: str  # human-readable violated bound


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _read_manifest(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f, parse_float=rat, parse_int=rat)
    except (OSError, json.JSONDecodeError) as exc:
        raise BindError(f"cannot read manifest {path}: {exc}") from exc


def _read_csv(path: str, header: bool) -> list[list[str]]:
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as exc:
        raise BindError(f"cannot read dataset {path}: {exc}") from exc
    if header and rows:
        rows = rows[1:]
    return [row for row in rows if row]


def bind(tm: TypedModule, manifest_path: str) -> Bindings:
    """Resolve every declared binding; infer dataset-length parameters."""
    doc = _read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))

    def resolve_path(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    b = Bindings()
    env = tm.env

    for name, pd in env.parameters.items():
        entry = doc.get("parameters", {}).get(name)
        if entry is None:
            if not pd.infer:
                raise BindError(f"missing binding for parameter {name!r}")
            continue
        value = rat(entry) if isinstance(entry, (int, str)) else entry
        if isinstance(pd.ty, A.NatType) and (
            value.denominator != 1 or value < 0
        ):
            raise BindError(f"parameter {name!r} must be a natural number")
        b.parameters[name] = value

    for name in env.networks:
        entry = doc.get("networks", {}).get(name)
        if entry is None:
            raise BindError(f"missing binding for network {name!r}")
        try:
            net = M.load_network(resolve_path(entry))
        except M.FormatError as exc:
            raise BindError(f"network {name!r}: {exc}") from exc
        in_ty, out_ty = env.networks[name]
        declared_in = _declared_size(in_ty, b, name)
        declared_out = _declared_size(out_ty, b, name)
        if declared_in != net.input_dim or declared_out != net.output_dim:
            raise BindError(
                f"network {name!r} is declared"
                f" {declared_in} -> {declared_out} but the model file is"
                f" {net.input_dim} -> {net.output_dim}"
            )
        b.networks[name] = M.Network(
            input_dim=net.input_dim, output_dim=net.output_dim,
            layers=net.layers, name=name, metadata=net.metadata,
        )

    # Datasets last so length inference can cross-check every source.
    for name, ds in env.datasets.items():
        entry = doc.get("datasets", {}).get(name)
        if entry is None:
            raise BindError(f"missing binding for dataset {name!r}")
        if isinstance(entry, str):
            entry = {"path": entry}
        rows = _read_csv(resolve_path(entry["path"]), bool(entry.get("header")))
        select = entry.get("select", "all")
        label_col = int(entry.get("label_column", -1))
        parsed = _parse_rows(name, rows, select, label_col)
        elements = _rows_to_elements(name, parsed, ds.elem_ty, b)
        b.datasets[name] = elements
        _record_length(name, ds, len(elements), b, env)

    return b


def _parse_rows(name, rows, select, label_col):
    parsed = []
    for r, row in enumerate(rows):
        try:
            values = [rat(cell.strip()) for cell in row]
        except (ValueError, ZeroDivisionError) as exc:
            raise BindError(f"dataset {name!r} row {r}: {exc}") from exc
        col = label_col if label_col >= 0 else len(values) + label_col
        if select == "features":
            values = values[:col] + values[col + 1:]
        elif select == "label":
            if not -len(values) <= label_col < len(values):
                raise BindError(
                    f"dataset {name!r} row {r}: no label column {label_col}"
                )
            values = [values[col]]
        elif select != "all":
            raise BindError(
                f"dataset {name!r}: unknown select mode {select!r}"
            )
        parsed.append(values)
    return parsed


def _rows_to_elements(name, parsed, elem_ty: A.TensorType, b: Bindings):
    shape = tuple(b.dim(d) for d in elem_ty.shape)
    size = shape_size(shape)
    elements = []
    for r, values in enumerate(parsed):
        if len(values) != size:
            raise BindError(
                f"dataset {name!r} row {r} has {len(values)} values, but the"
                f" declared element shape {list(shape)} needs {size}"
            )
        if shape:
            elements.append(TensorValue(shape, tuple(values)))
        else:
            elements.append(values[0])
    return elements


def _record_length(name, ds, count, b: Bindings, env):
    length = ds.length
    if isinstance(length, int):
        if count != length:
            raise BindError(
                f"dataset {name!r} has {count} rows, declared {length}"
            )
        return
    pd = env.parameters.get(length)
    if pd is not None and pd.infer:
        known = b.inferred.get(length)
        if known is not None and known != count:
            raise BindError(
                f"inferred parameter {length!r} is inconsistent:"
                f" {known} vs {count} rows in {name!r}"
            )
        b.inferred[length] = count
    else:
        declared = b.dim(length)
        if count != declared:
            raise BindError(
                f"dataset {name!r} has {count} rows, but {length} = {declared}"
            )


def _declared_size(ty: A.Type, b: Bindings, name: str) -> int:
    if not isinstance(ty, A.TensorType) or ty.elem.kind != "rat":
        raise BindError(f"network {name!r} must map Rat tensors")
    return shape_size(tuple(b.dim(d) for d in ty.shape))


def validate(b: Bindings, tm: TypedModule) -> ValidationReport:
    """Check every dataset element against its declared bounds.

    Violations are reported, not raised: dirty data is a property of the
    data, and the caller decides whether it is fatal.
    """
    report = ValidationReport()
    for name, ds in tm.env.datasets.items():
        elements = b.datasets.get(name)
        if elements is None:
            continue
        elem = ds.elem_ty
        lower, upper = ds.lower, ds.upper
        if elem.elem.kind == "index":
            bound = elem.elem.bound
            bound = bound if isinstance(bound, int) else b.dim(bound)
            lo, hi = rat(0), rat(bound - 1)
            label = f"Index {bound} (valid 0..{bound - 1})"
            _scan(report, name, elements, lo, hi, label, integral=True)
        elif lower is not None or upper is not None:
            label = f"[{lower if lower is not None else '-inf'}," \
                    f" {upper if upper is not None else 'inf'}]"
            _scan(report, name, elements, lower, upper, label, integral=False)
    return report


def _scan(report, name, elements, lo, hi, label, integral):
    for r, element in enumerate(elements):
        values = (
            element.data if isinstance(element, TensorValue) else (element,)
        )
        shape = element.shape if isinstance(element, TensorValue) else ()
        for flat, value in enumerate(values):
            bad = (
                (lo is not None and value < lo)
                or (hi is not None and value > hi)
                or (integral and value.denominator != 1)
            )
            if bad:
                report.violations.append(Violation(
                    dataset=name, row=r, feature=_unflatten(flat, shape),
                    value=value, bound=label,
                ))


def _unflatten(flat: int, shape: tuple[int, ...]) -> tuple[int, ...]:
    if not shape:
        return ()
    coords = []
    for d in reversed(shape):
        coords.append(flat % d)
        flat //= d
    return tuple(reversed(coords))


__all__ = [
    "Bindings", "BindError", "TensorValue", "ValidationReport", "Violation",
    "bind", "validate",
]
