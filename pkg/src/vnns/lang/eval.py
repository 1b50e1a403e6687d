"""Reference evaluator for ground (finitely quantified) expressions.

Evaluates type-checked expressions to exact rational values, inlining
definitions and running bound networks in exact mode. Quantifiers over
Index ranges expand by enumeration; quantifiers over continuous tensor
domains cannot be evaluated and raise. The lowering tests use this as the
semantic oracle the compiled queries are compared against.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import model as M
from ..rat import Rat, rat
from ..values import TensorValue, shape_size, stack
from . import ast as A
from .typecheck import GlobalEnv


class GroundEvalError(Exception):
    pass


@dataclass
class EvalContext:
    env: GlobalEnv
    networks: dict  # name -> model.Network
    dims: dict  # Nat parameter name -> int

    def dim(self, d: A.Dim) -> int:
        if isinstance(d, int):
            return d
        if d not in self.dims:
            raise GroundEvalError(f"unresolved dimension {d!r}")
        return self.dims[d]

    def shape(self, ty: A.TensorType) -> tuple[int, ...]:
        return tuple(self.dim(d) for d in ty.shape)


def eval_ground(expr: A.Expr, scope: dict, ctx: EvalContext):
    """Evaluate an expression; scope maps bound names to values."""
    e = expr
    if isinstance(e, A.RatLit):
        return e.value
    if isinstance(e, A.IntLit):
        return e.value
    if isinstance(e, A.BoolLit):
        return e.value
    if isinstance(e, A.Var):
        if e.name in scope:
            return scope[e.name]
        d = ctx.env.defs.get(e.name)
        if d is not None and not d.params:
            return eval_ground(d.body, {}, ctx)
        raise GroundEvalError(f"no value for {e.name!r}")
    if isinstance(e, A.TensorIndex):
        tensor = eval_ground(e.tensor, scope, ctx)
        index = eval_ground(e.index, scope, ctx)
        return tensor.index(int(index))
    if isinstance(e, A.Arith):
        return _eval_arith(e, scope, ctx)
    if isinstance(e, A.Cmp):
        lhs = eval_ground(e.lhs, scope, ctx)
        rhs = eval_ground(e.rhs, scope, ctx)
        return _compare(e.op, lhs, rhs)
    if isinstance(e, A.Logic):
        args = [eval_ground(a, scope, ctx) for a in e.args]
        if e.op == "and":
            return args[0] and args[1]
        if e.op == "or":
            return args[0] or args[1]
        if e.op == "not":
            return not args[0]
        return (not args[0]) or args[1]
    if isinstance(e, A.Quant):
        return _eval_quant(e, scope, ctx)
    if isinstance(e, A.Foreach):
        n = ctx.dim(e.ty.shape[0])
        bits = []
        for i in range(n):
            inner = dict(scope)
            inner[e.binder] = i
            bits.append(eval_ground(e.body, inner, ctx))
        return stack(bits, ())
    if isinstance(e, A.Apply):
        args = [eval_ground(a, scope, ctx) for a in e.args]
        if e.is_network:
            return _eval_network(e, args[0], ctx)
        d = ctx.env.defs[e.fn]
        inner = dict(zip(d.params, args))
        return eval_ground(d.body, inner, ctx)
    if isinstance(e, A.Let):
        inner = dict(scope)
        inner[e.name] = eval_ground(e.value, scope, ctx)
        return eval_ground(e.body, inner, ctx)
    raise GroundEvalError(f"cannot evaluate {e!r}")


def _eval_arith(e: A.Arith, scope, ctx):
    if e.op == "neg":
        return _map_scalar(eval_ground(e.args[0], scope, ctx), lambda v: -v)
    lhs = eval_ground(e.args[0], scope, ctx)
    rhs = eval_ground(e.args[1], scope, ctx)
    if e.op == "+":
        return _zip_scalar(lhs, rhs, lambda a, b: a + b)
    if e.op == "-":
        return _zip_scalar(lhs, rhs, lambda a, b: a - b)
    if e.op == "*":
        if isinstance(lhs, TensorValue):
            return _map_scalar(lhs, lambda v: v * rhs)
        if isinstance(rhs, TensorValue):
            return _map_scalar(rhs, lambda v: lhs * v)
        return lhs * rhs
    if e.op == "/":
        if rhs == 0:
            raise GroundEvalError("division by zero")
        return _map_scalar(lhs, lambda v: rat(v) / rhs)
    raise GroundEvalError(f"unknown operator {e.op!r}")


def _map_scalar(v, f):
    if isinstance(v, TensorValue):
        return TensorValue(v.shape, tuple(f(x) for x in v.data))
    return f(v)


def _zip_scalar(a, b, f):
    if isinstance(a, TensorValue) != isinstance(b, TensorValue):
        raise GroundEvalError("tensor/scalar shape mismatch")
    if isinstance(a, TensorValue):
        if a.shape != b.shape:
            raise GroundEvalError("tensor shape mismatch")
        return TensorValue(a.shape, tuple(f(x, y) for x, y in zip(a.data, b.data)))
    return f(a, b)


def _compare(op, lhs, rhs) -> bool:
    if op == "<=":
        return lhs <= rhs
    if op == "<":
        return lhs < rhs
    if op == ">=":
        return lhs >= rhs
    if op == ">":
        return lhs > rhs
    if op == "==":
        return lhs == rhs
    if op == "!=":
        return lhs != rhs
    raise GroundEvalError(f"unknown comparison {op!r}")


def _eval_quant(e: A.Quant, scope, ctx) -> bool:
    domains = []
    for name, _ in e.binders:
        ty = _binder_type(e, name)
        if not (isinstance(ty, A.TensorType) and ty.elem.kind == "index"
                and ty.is_scalar):
            raise GroundEvalError(
                f"cannot enumerate quantifier variable {name!r} of type {ty}"
            )
        domains.append((name, ctx.dim(ty.elem.bound)))

    def go(i: int, local: dict) -> bool:
        if i == len(domains):
            return eval_ground(e.body, local, ctx)
        name, bound = domains[i]
        results = []
        for v in range(bound):
            inner = dict(local)
            inner[name] = v
            results.append(go(i + 1, inner))
        return all(results) if e.kind == "forall" else any(results)

    return go(0, dict(scope))


def _binder_type(e: A.Quant, name: str) -> A.Type:
    types = getattr(e, "binder_types", None)
    if types is None or name not in types:
        raise GroundEvalError("quantifier was not type checked")
    return types[name]


def _eval_network(e: A.Apply, arg, ctx: EvalContext):
    net = ctx.networks.get(e.fn)
    if net is None:
        raise GroundEvalError(f"network {e.fn!r} is not bound")
    flat = arg.data if isinstance(arg, TensorValue) else (arg,)
    if len(flat) != net.input_dim:
        raise GroundEvalError(
            f"network {e.fn!r} input has {len(flat)} entries,"
            f" expected {net.input_dim}"
        )
    out = M.eval_exact(net, list(flat))
    out_shape = ctx.shape(e.ty) if isinstance(e.ty, A.TensorType) else ()
    if shape_size(out_shape) != len(out):
        out_shape = (len(out),)
    if not out_shape:
        return out[0]
    return TensorValue(out_shape, tuple(out))


def dataset_value(rows: list, ctx_shape: tuple[int, ...]) -> TensorValue:
    """Materialize a bound dataset as one stacked tensor value."""
    elem_shape = (
        rows[0].shape if rows and isinstance(rows[0], TensorValue) else ()
    )
    return stack(rows, elem_shape)


__all__ = ["EvalContext", "eval_ground", "dataset_value", "GroundEvalError"]
