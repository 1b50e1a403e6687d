"""Network representation with fully specified evaluation semantics.

A Network is a sequence of dense affine layers interleaved with ReLU, with
an optional terminal Softmax. Weights are float64 literals exactly as they
appear in the model file; the two evaluation modes interpret them as

  * float32 fixed-order: every operand is rounded to float32 and every
    operation rounds to float32; dot products accumulate strictly left to
    right, with the bias added after the accumulated product sum. This
    order is part of the format's semantics, so results are reproducible
    bit for bit.
  * exact rational: weights and inputs are promoted exactly and evaluated
    in arbitrary-precision rational arithmetic. Softmax is transcendental
    and therefore rejected in this mode.

Formats: a JSON schema (docs/model-format.md) and the classic NNet text
layout used for ACAS-style controller networks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .rat import Rat, rat

F32 = np.float32


class FormatError(Exception):
    pass


class EvalError(Exception):
    pass


@dataclass(frozen=True)
class Affine:
    """Dense layer y = W x + b; W rows are output neurons."""

    W: tuple[tuple[float, ...], ...]
    b: tuple[float, ...]

    @property
    def out_dim(self) -> int:
        return len(self.b)

    @property
    def in_dim(self) -> int:
        return len(self.W[0]) if self.W else 0


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class Softmax:
    pass


Layer = Union[Affine, ReLU, Softmax]

MODE_F32 = "f32"
MODE_EXACT = "exact"


@dataclass(frozen=True)
class Network:
    input_dim: int
    output_dim: int
    layers: tuple[Layer, ...]
    name: str = "network"
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def is_piecewise_linear(self) -> bool:
        return not any(isinstance(l, Softmax) for l in self.layers)

    def affine_layers(self):
        return [l for l in self.layers if isinstance(l, Affine)]


def _validate(input_dim: int, layers: Sequence[Layer], name: str) -> Network:
    if input_dim < 1:
        raise FormatError(f"input_dim must be at least 1, found {input_dim}")
    width = input_dim
    for pos, layer in enumerate(layers):
        if isinstance(layer, Affine):
            if not layer.W or not layer.b:
                raise FormatError(f"layer {pos}: empty weight matrix or bias")
            if len(layer.W) != len(layer.b):
                raise FormatError(
                    f"layer {pos}: {len(layer.W)} weight rows but"
                    f" {len(layer.b)} biases"
                )
            for i, row in enumerate(layer.W):
                if len(row) != width:
                    raise FormatError(
                        f"layer {pos}: weight row {i} has {len(row)} entries,"
                        f" expected {width}"
                    )
            for value in (*layer.b, *(v for row in layer.W for v in row)):
                if not math.isfinite(value):
                    raise FormatError(
                        f"layer {pos}: non-finite weight {value!r}"
                    )
            width = layer.out_dim
        elif isinstance(layer, Softmax):
            if pos != len(layers) - 1:
                raise FormatError("softmax is only allowed as the final layer")
        elif not isinstance(layer, ReLU):
            raise FormatError(f"unknown layer kind {layer!r}")
    return Network(
        input_dim=input_dim, output_dim=width, layers=tuple(layers), name=name
    )


# --------------------------------------------------------------------------
# Loading / saving
# --------------------------------------------------------------------------

def load_network(path: str) -> Network:
    """Load a model file; `.nnet` selects the NNet reader, JSON otherwise."""
    if str(path).endswith(".nnet"):
        return load_nnet(path)
    return load_json(path)


def network_from_dict(doc: dict, name: str = "network") -> Network:
    if not isinstance(doc, dict) or "input_dim" not in doc or "layers" not in doc:
        raise FormatError("model JSON must have input_dim and layers")
    layers: list[Layer] = []
    for pos, spec in enumerate(doc["layers"]):
        kind = spec.get("type") if isinstance(spec, dict) else None
        if kind == "dense":
            try:
                W = tuple(tuple(float(v) for v in row) for row in spec["W"])
                b = tuple(float(v) for v in spec["b"])
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"layer {pos}: malformed dense layer") from exc
            layers.append(Affine(W=W, b=b))
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "softmax":
            layers.append(Softmax())
        else:
            raise FormatError(f"layer {pos}: unknown layer kind {kind!r}")
    return _validate(int(doc["input_dim"]), layers, doc.get("name", name))


def load_json(path: str) -> Network:
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read model file {path}: {exc}") from exc
    return network_from_dict(doc)


def network_to_dict(net: Network) -> dict:
    layers = []
    for layer in net.layers:
        if isinstance(layer, Affine):
            layers.append({
                "type": "dense",
                "W": [[float(v) for v in row] for row in layer.W],
                "b": [float(v) for v in layer.b],
            })
        elif isinstance(layer, ReLU):
            layers.append({"type": "relu"})
        else:
            layers.append({"type": "softmax"})
    return {
        "schema_version": 1,
        "name": net.name,
        "input_dim": net.input_dim,
        "layers": layers,
    }


def save_json(net: Network, path: str):
    with open(path, "w") as f:
        json.dump(network_to_dict(net), f, indent=1)
        f.write("\n")


def load_nnet(path: str) -> Network:
    """Read the classic comma-separated NNet layout.

    Header: numLayers,inputSize,outputSize,maxLayerSize / layer sizes /
    symmetric flag / input mins / input maxs / means / ranges, then per
    layer the weight matrix rows followed by one bias per line. The
    normalization lines are not applied, only exposed as metadata.
    """
    try:
        with open(path) as f:
            lines = [
                ln.strip() for ln in f
                if ln.strip() and not ln.strip().startswith("//")
            ]
    except OSError as exc:
        raise FormatError(f"cannot read model file {path}: {exc}") from exc

    def numbers(line: str) -> list[float]:
        return [float(tok) for tok in line.split(",") if tok.strip()]

    try:
        header = [int(v) for v in numbers(lines[0])]
        num_layers, input_size, output_size = header[0], header[1], header[2]
        sizes = [int(v) for v in numbers(lines[1])]
        metadata = {
            "symmetric": int(numbers(lines[2])[0]),
            "input_min": numbers(lines[3]),
            "input_max": numbers(lines[4]),
            "mean": numbers(lines[5]),
            "range": numbers(lines[6]),
        }
        flat = [v for line in lines[7:] for v in numbers(line)]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"malformed NNet header in {path}") from exc

    if len(sizes) != num_layers + 1 or sizes[0] != input_size:
        raise FormatError("NNet layer size list disagrees with the header")
    layers: list[Layer] = []
    pos = 0
    for k in range(num_layers):
        n_in, n_out = sizes[k], sizes[k + 1]
        need = n_out * n_in + n_out
        chunk = flat[pos:pos + need]
        if len(chunk) < need:
            raise FormatError(
                f"NNet weight block for layer {k} is truncated"
            )
        pos += need
        W = tuple(
            tuple(chunk[r * n_in:(r + 1) * n_in]) for r in range(n_out)
        )
        b = tuple(chunk[n_out * n_in:])
        layers.append(Affine(W=W, b=b))
        if k < num_layers - 1:
            layers.append(ReLU())
    if pos != len(flat):
        raise FormatError("NNet file has trailing weight data")
    if sizes[-1] != output_size:
        raise FormatError("NNet output size disagrees with the header")
    net = _validate(input_size, layers, name="nnet")
    return Network(
        input_dim=net.input_dim, output_dim=net.output_dim,
        layers=net.layers, name=net.name, metadata=metadata,
    )


def save_nnet(net: Network, path: str):
    if not net.is_piecewise_linear:
        raise FormatError("NNet export supports ReLU networks only")
    affines = net.affine_layers()
    expected: list[Layer] = []
    for i, a in enumerate(affines):
        expected.append(a)
        if i < len(affines) - 1:
            expected.append(ReLU())
    if tuple(expected) != net.layers:
        raise FormatError(
            "NNet export requires alternating dense/ReLU layers with a"
            " dense final layer"
        )
    sizes = [net.input_dim] + [a.out_dim for a in affines]
    meta = net.metadata or {}
    mins = meta.get("input_min", [0.0] * net.input_dim)
    maxs = meta.get("input_max", [0.0] * net.input_dim)
    means = meta.get("mean", [0.0] * (net.input_dim + 1))
    ranges = meta.get("range", [1.0] * (net.input_dim + 1))
    with open(path, "w") as f:
        f.write("// exported network\n")
        f.write(f"{len(affines)},{net.input_dim},{net.output_dim},{max(sizes)},\n")
        f.write(",".join(str(s) for s in sizes) + ",\n")
        f.write("0,\n")
        for row in (mins, maxs, means, ranges):
            f.write(",".join(repr(float(v)) for v in row) + ",\n")
        for a in affines:
            for row in a.W:
                f.write(",".join(repr(float(v)) for v in row) + ",\n")
            for v in a.b:
                f.write(f"{v!r},\n")


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def eval_f32(net: Network, x: Sequence) -> list:
    """Float32 fixed-order evaluation; returns numpy float32 scalars."""
    if len(x) != net.input_dim:
        raise EvalError(
            f"input has {len(x)} entries, expected {net.input_dim}"
        )
    vec = [F32(float(v)) for v in x]
    for layer in net.layers:
        if isinstance(layer, Affine):
            out = []
            for row, bias in zip(layer.W, layer.b):
                acc = F32(0.0)
                for w, v in zip(row, vec):
                    acc = F32(acc + F32(F32(w) * v))
                out.append(F32(acc + F32(bias)))
            vec = out
        elif isinstance(layer, ReLU):
            vec = [v if v > 0 else F32(0.0) for v in vec]
        else:
            vec = _softmax_f32(vec)
    return vec


def _softmax_f32(vec):
    # Shift-stabilized: softmax(x) = softmax(x - max(x)), which avoids
    # overflow and is invariant under constant shifts of the input.
    m = vec[0]
    for v in vec[1:]:
        if v > m:
            m = v
    exps = [F32(np.exp(F32(v - m))) for v in vec]
    total = F32(0.0)
    for e in exps:
        total = F32(total + e)
    return [F32(e / total) for e in exps]


def eval_exact(net: Network, x: Sequence) -> list:
    """Exact rational evaluation; rejects Softmax (transcendental)."""
    if len(x) != net.input_dim:
        raise EvalError(
            f"input has {len(x)} entries, expected {net.input_dim}"
        )
    vec = [rat(v) if isinstance(v, (int, float, str)) else v for v in x]
    for layer in net.layers:
        if isinstance(layer, Affine):
            out = []
            for row, bias in zip(layer.W, layer.b):
                acc = rat(bias)
                for w, v in zip(row, vec):
                    acc += rat(w) * v
                out.append(acc)
            vec = out
        elif isinstance(layer, ReLU):
            zero = rat(0)
            vec = [v if v > 0 else zero for v in vec]
        else:
            raise EvalError(
                "softmax has no exact rational semantics; the exact pipeline"
                " supports piecewise-linear networks only"
            )
    return vec


def eval(net: Network, x: Sequence, mode: str):  # noqa: A001 - spec name
    if mode == MODE_F32:
        return eval_f32(net, x)
    if mode == MODE_EXACT:
        return eval_exact(net, x)
    raise EvalError(f"unknown evaluation mode {mode!r}")


@dataclass(frozen=True)
class GapReport:
    f32_out: list
    rat_out: list
    max_abs_diff: Rat


def eval_gap(net: Network, x: Sequence) -> GapReport:
    """Evaluate both modes and report the exact max componentwise gap."""
    if not net.is_piecewise_linear:
        raise EvalError("eval_gap requires a piecewise-linear network")
    xs = [rat(v) if isinstance(v, (int, float, str)) else v for v in x]
    rat_out = eval_exact(net, xs)
    f32_out = eval_f32(net, [float(v) for v in xs])
    diff = max(
        (abs(rat(float(f)) - r) for f, r in zip(f32_out, rat_out)),
        default=rat(0),
    )
    return GapReport(f32_out=f32_out, rat_out=rat_out, max_abs_diff=diff)


__all__ = [
    "Network", "Affine", "ReLU", "Softmax", "Layer",
    "MODE_F32", "MODE_EXACT",
    "FormatError", "EvalError", "GapReport",
    "load_network", "load_json", "load_nnet", "network_from_dict",
    "network_to_dict", "save_json", "save_nnet",
    "eval", "eval_f32", "eval_exact", "eval_gap",
]
