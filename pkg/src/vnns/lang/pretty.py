"""Pretty printer for specification ASTs.

`parse(pretty(m)) == m` holds structurally (source spans excluded from
equality); this is exercised by a randomized round-trip property test.
Parentheses are inserted exactly where the parse would otherwise regroup,
so printing is structure-preserving rather than minimal-by-value.
"""

from __future__ import annotations

from ..rat import decimal_str, rat_str
from . import ast as A

# Precedence levels, loosest to tightest. An expression is parenthesized
# when printed into a context requiring a higher level than its own.
_QUANT, _IMPL, _OR, _AND, _NOT, _CMP, _ADD, _MUL, _NEG, _INDEX, _APP, _ATOM = (
    range(12)
)


def pretty_type(ty: A.Type) -> str:
    if isinstance(ty, A.NatType):
        return "Nat"
    if isinstance(ty, A.FunType):
        parts = [*ty.params, ty.result]
        return " -> ".join(
            f"({pretty_type(p)})" if isinstance(p, A.FunType) else pretty_type(p)
            for p in parts
        )
    if isinstance(ty, A.TensorType):
        elem = _pretty_elem(ty.elem)
        if not ty.shape:
            return elem
        dims = ", ".join(str(d) for d in ty.shape)
        return f"Tensor {elem} [{dims}]"
    raise ValueError(f"cannot print type {ty!r}")


def _pretty_elem(elem: A.Elem) -> str:
    if elem.kind == "alias":
        return str(elem.bound)
    if elem.kind == "index":
        return f"Index {elem.bound}"
    return {"rat": "Rat", "bool": "Bool"}[elem.kind]


def _lit(value) -> str:
    s = decimal_str(value)
    if s is not None:
        return s
    return f"({value.numerator}/{value.denominator})"


def pretty_expr(e: A.Expr, level: int = _QUANT) -> str:
    text, prec = _render(e)
    if prec < level:
        return f"({text})"
    return text


def _render(e: A.Expr) -> tuple[str, int]:
    if isinstance(e, A.IntLit):
        return str(e.value), _ATOM
    if isinstance(e, A.RatLit):
        return _lit(e.value), _ATOM
    if isinstance(e, A.BoolLit):
        return ("True" if e.value else "False"), _ATOM
    if isinstance(e, A.Var):
        return e.name, _ATOM
    if isinstance(e, A.TensorIndex):
        return (
            f"{pretty_expr(e.tensor, _INDEX)} ! {pretty_expr(e.index, _ATOM)}",
            _INDEX,
        )
    if isinstance(e, A.Apply):
        args = " ".join(pretty_expr(a, _ATOM) for a in e.args)
        return f"{e.fn} {args}", _APP
    if isinstance(e, A.Arith):
        if e.op == "neg":
            # The argument is printed one level tighter so nested negation
            # becomes -(-x); adjacent minus signs would lex as a comment.
            return f"-{pretty_expr(e.args[0], _NEG + 1)}", _NEG
        left_lv, self_lv = {"+": (_ADD, _ADD), "-": (_ADD, _ADD),
                            "*": (_MUL, _MUL), "/": (_MUL, _MUL)}[e.op]
        lhs = pretty_expr(e.args[0], left_lv)
        rhs = pretty_expr(e.args[1], self_lv + 1)
        return f"{lhs} {e.op} {rhs}", self_lv
    if isinstance(e, A.Cmp):
        lhs = pretty_expr(e.lhs, _CMP + 1)
        rhs = pretty_expr(e.rhs, _CMP + 1)
        return f"{lhs} {e.op} {rhs}", _CMP
    if isinstance(e, A.Logic):
        if e.op == "not":
            return f"not {pretty_expr(e.args[0], _NOT)}", _NOT
        if e.op == "=>":
            lhs = pretty_expr(e.args[0], _IMPL + 1)
            rhs = pretty_expr(e.args[1], _IMPL)
            return f"{lhs} => {rhs}", _IMPL
        lv = _OR if e.op == "or" else _AND
        lhs = pretty_expr(e.args[0], lv)
        rhs = pretty_expr(e.args[1], lv + 1)
        return f"{lhs} {e.op} {rhs}", lv
    if isinstance(e, A.Quant):
        binders = " ".join(
            name if ty is None else f"({name} : {pretty_type(ty)})"
            for name, ty in e.binders
        )
        return f"{e.kind} {binders} . {pretty_expr(e.body)}", _QUANT
    if isinstance(e, A.Foreach):
        return f"foreach {e.binder} . {pretty_expr(e.body)}", _QUANT
    if isinstance(e, A.Let):
        value = pretty_expr(e.value, _IMPL)
        return f"let {e.name} = {value} in {pretty_expr(e.body)}", _QUANT
    raise ValueError(f"cannot print expression {e!r}")


def pretty_decl(d: A.Decl) -> str:
    if isinstance(d, A.TypeAlias):
        return f"type {d.name} = {pretty_type(d.ty)}"
    if isinstance(d, A.NetworkDecl):
        return (
            f"@network\n{d.name} : {pretty_type(d.in_ty)}"
            f" -> {pretty_type(d.out_ty)}"
        )
    if isinstance(d, A.DatasetDecl):
        args = []
        if d.lower is not None:
            args.append(f"lower={_lit(d.lower)}")
        if d.upper is not None:
            args.append(f"upper={_lit(d.upper)}")
        annot = f"@dataset({', '.join(args)})" if args else "@dataset"
        elem = d.elem_ty
        full = A.TensorType(elem.elem, (d.length, *elem.shape))
        return f"{annot}\n{d.name} : {pretty_type(full)}"
    if isinstance(d, A.ParameterDecl):
        annot = "@parameter(infer=True)" if d.infer else "@parameter"
        return f"{annot}\n{d.name} : {pretty_type(d.ty)}"
    if isinstance(d, A.PropertyDecl):
        return (
            f"@property\n{d.name} : {pretty_type(d.ty)}\n"
            f"{d.name} = {pretty_expr(d.body)}"
        )
    if isinstance(d, A.Def):
        annot = f"@{d.role}\n" if d.role else ""
        params = "".join(f" {p}" for p in d.params)
        return (
            f"{annot}{d.name} : {pretty_type(d.sig)}\n"
            f"{d.name}{params} = {pretty_expr(d.body)}"
        )
    raise ValueError(f"cannot print declaration {d!r}")


def pretty(module: A.SpecModule) -> str:
    return "\n\n".join(pretty_decl(d) for d in module.decls) + "\n"


__all__ = ["pretty", "pretty_decl", "pretty_expr", "pretty_type"]
