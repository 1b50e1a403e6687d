"""AST for the specification language.

Every node carries a source span (excluded from equality so that round-trip
tests compare structure only) and, after type checking, a resolved type.

Types are normalized: a scalar is a TensorType with an empty shape, and the
element is one of "rat", "bool", or an index bound. Nat is a separate type
used only for inferable parameters that appear in tensor shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from ..rat import Rat

# Shape dimensions are either concrete naturals or names of Nat parameters
# resolved at bind time.
Dim = Union[int, str]


@dataclass(frozen=True)
class Span:
    line: int = 0
    col: int = 0
    end_line: int = 0
    end_col: int = 0

    def __str__(self):
        return f"{self.line}:{self.col}"


NO_SPAN = Span()


# --------------------------------------------------------------------------
# Types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Elem:
    """Tensor element kind: 'rat', 'bool', or 'index' with a bound."""

    kind: str
    bound: Optional[Dim] = None

    def __str__(self):
        if self.kind == "index":
            return f"Index {self.bound}"
        return {"rat": "Rat", "bool": "Bool"}[self.kind]


RAT = Elem("rat")
BOOL = Elem("bool")


def index_elem(bound: Dim) -> Elem:
    return Elem("index", bound)


@dataclass(frozen=True)
class TensorType:
    elem: Elem
    shape: tuple[Dim, ...] = ()

    @property
    def is_scalar(self) -> bool:
        return not self.shape

    def __str__(self):
        if self.is_scalar:
            return str(self.elem)
        dims = ", ".join(str(d) for d in self.shape)
        return f"Tensor {self.elem} [{dims}]"


@dataclass(frozen=True)
class NatType:
    def __str__(self):
        return "Nat"


@dataclass(frozen=True)
class FunType:
    params: tuple["Type", ...]
    result: "Type"

    def __str__(self):
        parts = [*self.params, self.result]
        return " -> ".join(_fun_operand_str(p) for p in parts)


def _fun_operand_str(t: "Type") -> str:
    return f"({t})" if isinstance(t, FunType) else str(t)


@dataclass(frozen=True)
class TypeVar:
    """Placeholder for an unannotated quantifier binder or numeric literal."""

    id: int

    def __str__(self):
        return f"?{self.id}"


Type = Union[TensorType, NatType, FunType, TypeVar]

RAT_SCALAR = TensorType(RAT)
BOOL_SCALAR = TensorType(BOOL)


def index_type(bound: Dim) -> TensorType:
    return TensorType(index_elem(bound))


# --------------------------------------------------------------------------
# Expressions
# --------------------------------------------------------------------------

@dataclass(eq=False)
class Expr:
    span: Span = field(default=NO_SPAN, repr=False)
    ty: Optional[Type] = field(default=None, repr=False)

    def _key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self):
        return hash((type(self).__name__,))


@dataclass(eq=False)
class RatLit(Expr):
    value: Rat = None

    def _key(self):
        return (self.value,)


@dataclass(eq=False)
class IntLit(Expr):
    """Integer literal; resolves to Rat, Index k, or Nat during checking."""

    value: int = 0

    def _key(self):
        return (self.value,)


@dataclass(eq=False)
class BoolLit(Expr):
    value: bool = False

    def _key(self):
        return (self.value,)


@dataclass(eq=False)
class Var(Expr):
    name: str = ""

    def _key(self):
        return (self.name,)


@dataclass(eq=False)
class TensorIndex(Expr):
    """`t ! i` extracts the slice/scalar at index i of the first dimension."""

    tensor: Expr = None
    index: Expr = None

    def _key(self):
        return (self.tensor, self.index)


@dataclass(eq=False)
class Arith(Expr):
    op: str = "+"  # '+', '-', '*', '/', 'neg'
    args: tuple[Expr, ...] = ()

    def _key(self):
        return (self.op, self.args)


@dataclass(eq=False)
class Cmp(Expr):
    op: str = "<="  # '<=', '<', '>=', '>', '==', '!='
    lhs: Expr = None
    rhs: Expr = None

    def _key(self):
        return (self.op, self.lhs, self.rhs)


@dataclass(eq=False)
class Logic(Expr):
    op: str = "and"  # 'and', 'or', 'not', '=>'
    args: tuple[Expr, ...] = ()

    def _key(self):
        return (self.op, self.args)


@dataclass(eq=False)
class Quant(Expr):
    kind: str = "forall"  # 'forall' | 'exists'
    binders: tuple[tuple[str, Optional[Type]], ...] = ()
    body: Expr = None

    def _key(self):
        return (self.kind, self.binders, self.body)


@dataclass(eq=False)
class Foreach(Expr):
    """`foreach i . e` builds an indexed Bool tensor (property bodies only)."""

    binder: str = ""
    body: Expr = None

    def _key(self):
        return (self.binder, self.body)


@dataclass(eq=False)
class Apply(Expr):
    """Application of a top-level Def or a declared network."""

    fn: str = ""
    args: tuple[Expr, ...] = ()
    is_network: bool = field(default=False, compare=False)

    def _key(self):
        return (self.fn, self.args)


@dataclass(eq=False)
class Let(Expr):
    name: str = ""
    value: Expr = None
    body: Expr = None

    def _key(self):
        return (self.name, self.value, self.body)


# --------------------------------------------------------------------------
# Declarations
# --------------------------------------------------------------------------

@dataclass(eq=False)
class Decl:
    span: Span = field(default=NO_SPAN, repr=False)

    def _key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()


@dataclass(eq=False)
class TypeAlias(Decl):
    name: str = ""
    ty: Type = None

    def _key(self):
        return (self.name, self.ty)


@dataclass(eq=False)
class NetworkDecl(Decl):
    name: str = ""
    in_ty: Type = None
    out_ty: Type = None

    def _key(self):
        return (self.name, self.in_ty, self.out_ty)


@dataclass(eq=False)
class DatasetDecl(Decl):
    name: str = ""
    elem_ty: Type = None
    length: Dim = 0
    lower: Optional[Rat] = None
    upper: Optional[Rat] = None

    def _key(self):
        return (self.name, self.elem_ty, self.length, self.lower, self.upper)


@dataclass(eq=False)
class ParameterDecl(Decl):
    name: str = ""
    ty: Type = None  # Rat scalar or Nat
    infer: bool = False

    def _key(self):
        return (self.name, self.ty, self.infer)


@dataclass(eq=False)
class Def(Decl):
    """Top-level definition: `name : T1 -> ... -> R` then `name p1 ... = body`.

    role marks the optional @embedding / @unembedding annotation.
    """

    name: str = ""
    sig: Type = None
    params: tuple[str, ...] = ()
    body: Expr = None
    role: Optional[str] = None

    def _key(self):
        return (self.name, self.sig, self.params, self.body, self.role)


@dataclass(eq=False)
class PropertyDecl(Decl):
    name: str = ""
    ty: Type = None
    body: Expr = None

    def _key(self):
        return (self.name, self.ty, self.body)


@dataclass(eq=False)
class SpecModule(Decl):
    decls: tuple[Decl, ...] = ()

    def _key(self):
        return (self.decls,)

    def find(self, name: str) -> Optional[Decl]:
        for d in self.decls:
            if getattr(d, "name", None) == name:
                return d
        return None


def with_type(e: Expr, ty: Type) -> Expr:
    e.ty = ty
    return e


__all__ = [
    "Span", "NO_SPAN", "Dim", "Elem", "RAT", "BOOL", "index_elem",
    "TensorType", "NatType", "FunType", "TypeVar", "Type",
    "RAT_SCALAR", "BOOL_SCALAR", "index_type",
    "Expr", "RatLit", "IntLit", "BoolLit", "Var", "TensorIndex", "Arith",
    "Cmp", "Logic", "Quant", "Foreach", "Apply", "Let",
    "Decl", "TypeAlias", "NetworkDecl", "DatasetDecl", "ParameterDecl",
    "Def", "PropertyDecl", "SpecModule", "with_type", "replace",
]
