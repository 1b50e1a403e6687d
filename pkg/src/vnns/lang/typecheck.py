"""Type checker for specification modules.

Checking is total and collects every violation instead of stopping at the
first: each declaration is checked independently, and within a declaration
an error node gets the wildcard type so follow-on noise is suppressed.

Inference is deliberately small: quantifier binders without annotations and
integer literals receive type variables which are resolved by first use
(shape and literal propagation only, no polymorphism). Binders that remain
unresolved at the end of their scope are reported.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ast as A

MAX_RANK = 4


@dataclass(frozen=True)
class TypeCheckError:
    message: str
    span: A.Span

    def __str__(self):
        return f"{self.span}: {self.message}"


class TypeCheckFailure(Exception):
    def __init__(self, errors: list[TypeCheckError]):
        super().__init__(
            "; ".join(str(e) for e in errors[:5])
            + (f" (+{len(errors) - 5} more)" if len(errors) > 5 else "")
        )
        self.errors = errors


# Wildcard type assigned to error nodes; unifies with anything.
_ERROR = A.TypeVar(-1)


@dataclass
class GlobalEnv:
    aliases: dict
    networks: dict  # name -> (in_ty, out_ty)
    datasets: dict  # name -> DatasetDecl with resolved types
    parameters: dict  # name -> ParameterDecl with resolved type
    defs: dict  # name -> Def with resolved signature
    properties: dict  # name -> PropertyDecl


class _Checker:
    def __init__(self):
        self.errors: list[TypeCheckError] = []
        self.subst: dict[int, A.Type] = {}
        self.next_var = 0
        self.numeric_lits: list[A.IntLit] = []
        self.env = GlobalEnv({}, {}, {}, {}, {}, {})

    # -- error and substitution plumbing ------------------------------------

    def error(self, message: str, span: A.Span) -> A.Type:
        self.errors.append(TypeCheckError(message, span))
        return _ERROR

    def fresh(self) -> A.TypeVar:
        self.next_var += 1
        return A.TypeVar(self.next_var)

    def resolve(self, ty: A.Type) -> A.Type:
        while isinstance(ty, A.TypeVar) and ty.id in self.subst:
            ty = self.subst[ty.id]
        return ty

    def unify(self, a: A.Type, b: A.Type, span: A.Span, what: str) -> A.Type:
        a, b = self.resolve(a), self.resolve(b)
        if a is _ERROR or b is _ERROR:
            return _ERROR
        if isinstance(a, A.TypeVar):
            self.subst[a.id] = b
            return b
        if isinstance(b, A.TypeVar):
            self.subst[b.id] = a
            return a
        if isinstance(a, A.NatType) and isinstance(b, A.NatType):
            return a
        if isinstance(a, A.TensorType) and isinstance(b, A.TensorType):
            if a.elem == b.elem and a.shape == b.shape:
                return a
        return self.error(f"{what}: expected {b}, found {a}", span)

    # -- type resolution ------------------------------------------------------

    def resolve_type(self, ty: A.Type, span: A.Span) -> A.Type:
        """Expand aliases, validate dimensions, ranks, and index bounds."""
        if isinstance(ty, A.NatType):
            return ty
        if isinstance(ty, A.FunType):
            return A.FunType(
                tuple(self.resolve_type(p, span) for p in ty.params),
                self.resolve_type(ty.result, span),
            )
        if isinstance(ty, A.TensorType):
            elem, shape = ty.elem, ty.shape
            if elem.kind == "alias":
                target = self.env.aliases.get(elem.bound)
                if target is None:
                    return self.error(f"unknown type {elem.bound!r}", span)
                elem = target.elem
                shape = shape + target.shape
            for dim in shape:
                bad = self.check_dim(dim, span, "dimension")
                if bad:
                    return _ERROR
            if elem.kind == "index":
                bad = self.check_dim(elem.bound, span, "index bound")
                if bad:
                    return _ERROR
            if len(shape) > MAX_RANK:
                return self.error(
                    f"tensor rank {len(shape)} exceeds the maximum {MAX_RANK}",
                    span,
                )
            return A.TensorType(elem, shape)
        return self.error(f"unsupported type {ty}", span)

    def check_dim(self, dim: A.Dim, span: A.Span, what: str) -> bool:
        if isinstance(dim, int):
            if dim < 1:
                self.error(f"{what} must be at least 1, found {dim}", span)
                return True
            return False
        param = self.env.parameters.get(dim)
        if param is None or not isinstance(param.ty, A.NatType):
            self.error(f"{what} {dim!r} is not a declared Nat parameter", span)
            return True
        return False

    # -- declarations ------------------------------------------------------

    def declare(self, name: str, span: A.Span) -> bool:
        taken = (
            name in self.env.aliases or name in self.env.networks
            or name in self.env.datasets or name in self.env.parameters
            or name in self.env.defs or name in self.env.properties
        )
        if taken:
            self.error(f"duplicate declaration of {name!r}", span)
            return False
        return True

    def check_module(self, module: A.SpecModule) -> GlobalEnv:
        for decl in module.decls:
            self.check_decl(decl)
        return self.env

    def check_decl(self, d: A.Decl):
        if isinstance(d, A.TypeAlias):
            ty = self.resolve_type(d.ty, d.span)
            if self.declare(d.name, d.span) and isinstance(ty, A.TensorType):
                self.env.aliases[d.name] = ty
            elif not isinstance(ty, A.TensorType) and ty is not _ERROR:
                self.error("type aliases must name tensor or scalar types", d.span)
            return
        if isinstance(d, A.NetworkDecl):
            in_ty = self.resolve_type(d.in_ty, d.span)
            out_ty = self.resolve_type(d.out_ty, d.span)
            ok = True
            for ty, side in ((in_ty, "input"), (out_ty, "output")):
                if isinstance(ty, A.TensorType) and ty.elem.kind != "rat":
                    self.error(f"network {side} must be a Rat tensor", d.span)
                    ok = False
            if self.declare(d.name, d.span) and ok:
                self.env.networks[d.name] = (in_ty, out_ty)
            return
        if isinstance(d, A.DatasetDecl):
            elem_ty = self.resolve_type(d.elem_ty, d.span)
            self.check_dim(d.length, d.span, "dataset length")
            if isinstance(elem_ty, A.TensorType) and len(elem_ty.shape) >= MAX_RANK:
                self.error("dataset elements exceed the maximum rank", d.span)
            if self.declare(d.name, d.span):
                resolved = A.DatasetDecl(
                    name=d.name, elem_ty=elem_ty, length=d.length,
                    lower=d.lower, upper=d.upper, span=d.span,
                )
                self.env.datasets[d.name] = resolved
            return
        if isinstance(d, A.ParameterDecl):
            ty = self.resolve_type(d.ty, d.span)
            if isinstance(ty, A.TensorType) and ty != A.RAT_SCALAR:
                self.error("parameters must have type Rat or Nat", d.span)
                ty = _ERROR
            if d.infer and not isinstance(ty, A.NatType):
                self.error("only Nat parameters can be inferred", d.span)
            if self.declare(d.name, d.span) and ty is not _ERROR:
                self.env.parameters[d.name] = A.ParameterDecl(
                    name=d.name, ty=ty, infer=d.infer, span=d.span
                )
            return
        if isinstance(d, A.Def):
            self.check_def(d)
            return
        if isinstance(d, A.PropertyDecl):
            self.check_property(d)
            return
        raise AssertionError(f"unhandled declaration {d!r}")

    def check_def(self, d: A.Def):
        sig = self.resolve_type(d.sig, d.span)
        if isinstance(sig, A.FunType):
            params, result = sig.params, sig.result
        else:
            params, result = (), sig
        if len(params) != len(d.params):
            self.error(
                f"{d.name!r} declares {len(params)} parameter type(s) but"
                f" binds {len(d.params)} name(s)",
                d.span,
            )
            self.declare(d.name, d.span)
            return
        scope = {}
        ok = True
        for name, ty in zip(d.params, params):
            if not isinstance(ty, A.TensorType):
                self.error(
                    f"parameter {name!r} must have a tensor or scalar type",
                    d.span,
                )
                ok = False
                continue
            scope[name] = (ty, True)  # parameters are variable-dependent
        if d.role is not None:
            self.check_embedding_sig(d, params, result)
        if not self.declare(d.name, d.span):
            return
        if ok:
            body_ty, _dep = self.check_expr(d.body, scope)
            self.unify(body_ty, result, d.body.span, f"body of {d.name!r}")
            self.finalize(d.body)
        self.env.defs[d.name] = A.Def(
            name=d.name, sig=sig, params=d.params, body=d.body,
            role=d.role, span=d.span,
        )

    def check_embedding_sig(self, d: A.Def, params, result):
        kind = d.role
        shapes_ok = (
            len(params) == 1
            and isinstance(params[0], A.TensorType)
            and isinstance(result, A.TensorType)
            and params[0].elem.kind == "rat"
            and result.elem.kind == "rat"
        )
        if not shapes_ok:
            self.error(
                f"@{kind} definitions must map one Rat tensor to a Rat tensor",
                d.span,
            )

    def check_property(self, d: A.PropertyDecl):
        ty = self.resolve_type(d.ty, d.span)
        is_bool = ty == A.BOOL_SCALAR
        is_bool_vec = (
            isinstance(ty, A.TensorType)
            and ty.elem.kind == "bool"
            and len(ty.shape) == 1
        )
        if ty is not _ERROR and not (is_bool or is_bool_vec):
            self.error(
                f"property {d.name!r} must have type Bool or Tensor Bool [n],"
                f" found {ty}",
                d.span,
            )
        if not self.declare(d.name, d.span):
            return
        if isinstance(d.body, A.Foreach):
            if not is_bool_vec:
                self.error(
                    "foreach requires the property type Tensor Bool [n]",
                    d.body.span,
                )
            else:
                scope = {
                    d.body.binder: (A.index_type(ty.shape[0]), True)
                }
                body_ty, _ = self.check_expr(d.body.body, scope)
                self.unify(body_ty, A.BOOL_SCALAR, d.body.span, "foreach body")
                d.body.ty = ty
                self.finalize(d.body.body)
        else:
            body_ty, _ = self.check_expr(d.body, {})
            self.unify(body_ty, ty, d.body.span, f"property {d.name!r}")
            self.finalize(d.body)
        self.env.properties[d.name] = A.PropertyDecl(
            name=d.name, ty=ty, body=d.body, span=d.span
        )

    # -- expressions ---------------------------------------------------------
    # check_expr returns (type, variable_dependent); the dependence bit backs
    # the linearity restriction: products need at least one closed side and
    # divisors must be closed.

    def check_expr(self, e: A.Expr, scope: dict) -> tuple[A.Type, bool]:
        ty, dep = self._check(e, scope)
        e.ty = ty
        return ty, dep

    def _check(self, e: A.Expr, scope: dict) -> tuple[A.Type, bool]:
        if isinstance(e, A.RatLit):
            return A.RAT_SCALAR, False
        if isinstance(e, A.BoolLit):
            return A.BOOL_SCALAR, False
        if isinstance(e, A.IntLit):
            if e.value < 0:
                return self.error("negative literal", e.span), False
            tv = self.fresh()
            self.numeric_lits.append(e)
            return tv, False
        if isinstance(e, A.Var):
            return self.check_var(e, scope)
        if isinstance(e, A.Apply):
            return self.check_apply(e, scope)
        if isinstance(e, A.TensorIndex):
            return self.check_index(e, scope)
        if isinstance(e, A.Arith):
            return self.check_arith(e, scope)
        if isinstance(e, A.Cmp):
            return self.check_cmp(e, scope)
        if isinstance(e, A.Logic):
            dep = False
            for arg in e.args:
                ty, d = self.check_expr(arg, scope)
                self.unify(ty, A.BOOL_SCALAR, arg.span, f"operand of {e.op!r}")
                dep = dep or d
            return A.BOOL_SCALAR, dep
        if isinstance(e, A.Quant):
            return self.check_quant(e, scope)
        if isinstance(e, A.Foreach):
            return (
                self.error("foreach is only allowed as a property body", e.span),
                False,
            )
        if isinstance(e, A.Let):
            if e.name in scope:
                self.error(f"{e.name!r} is already bound", e.span)
            val_ty, val_dep = self.check_expr(e.value, scope)
            inner = dict(scope)
            inner[e.name] = (val_ty, val_dep)
            return self.check_expr(e.body, inner)
        raise AssertionError(f"unhandled expression {e!r}")

    def check_var(self, e: A.Var, scope: dict) -> tuple[A.Type, bool]:
        if e.name in scope:
            return scope[e.name]
        env = self.env
        if e.name in env.parameters:
            ty = env.parameters[e.name].ty
            if isinstance(ty, A.NatType):
                return (
                    self.error(
                        f"Nat parameter {e.name!r} can only appear in"
                        " tensor shapes",
                        e.span,
                    ),
                    False,
                )
            return ty, False
        if e.name in env.datasets:
            ds = env.datasets[e.name]
            elem = ds.elem_ty
            return A.TensorType(elem.elem, (ds.length, *elem.shape)), False
        if e.name in env.defs:
            d = env.defs[e.name]
            if isinstance(d.sig, A.FunType):
                return (
                    self.error(
                        f"{e.name!r} must be fully applied to"
                        f" {len(d.sig.params)} argument(s)",
                        e.span,
                    ),
                    False,
                )
            return d.sig, self._def_body_dependent(d)
        if e.name in env.networks:
            return (
                self.error(f"network {e.name!r} must be applied", e.span),
                False,
            )
        return self.error(f"unbound name {e.name!r}", e.span), False

    def _def_body_dependent(self, d: A.Def) -> bool:
        return False  # zero-parameter defs close over constants only

    def check_apply(self, e: A.Apply, scope: dict) -> tuple[A.Type, bool]:
        env = self.env
        if e.fn in scope:
            return self.error(f"{e.fn!r} is not a definition", e.span), False
        if e.fn in env.networks:
            e.is_network = True
            in_ty, out_ty = env.networks[e.fn]
            if len(e.args) != 1:
                return (
                    self.error(
                        f"network {e.fn!r} takes one argument,"
                        f" found {len(e.args)}",
                        e.span,
                    ),
                    False,
                )
            arg_ty, dep = self.check_expr(e.args[0], scope)
            self.unify(arg_ty, in_ty, e.args[0].span, f"argument of {e.fn!r}")
            return out_ty, dep
        if e.fn in env.defs:
            d = env.defs[e.fn]
            params = d.sig.params if isinstance(d.sig, A.FunType) else ()
            result = d.sig.result if isinstance(d.sig, A.FunType) else d.sig
            if len(e.args) != len(params):
                return (
                    self.error(
                        f"{e.fn!r} takes {len(params)} argument(s),"
                        f" found {len(e.args)}",
                        e.span,
                    ),
                    False,
                )
            dep = False
            for arg, pty in zip(e.args, params):
                arg_ty, d_arg = self.check_expr(arg, scope)
                self.unify(arg_ty, pty, arg.span, f"argument of {e.fn!r}")
                dep = dep or d_arg
            return result, dep
        if e.fn in env.datasets or e.fn in env.parameters:
            return (
                self.error(f"{e.fn!r} is not applicable; use `!` to index", e.span),
                False,
            )
        return self.error(f"unbound name {e.fn!r}", e.span), False

    def check_index(self, e: A.TensorIndex, scope: dict) -> tuple[A.Type, bool]:
        t_ty, t_dep = self.check_expr(e.tensor, scope)
        t_ty = self.resolve(t_ty)
        if t_ty is _ERROR:
            self.check_expr(e.index, scope)
            return _ERROR, t_dep
        if isinstance(t_ty, A.TypeVar):
            return (
                self.error(
                    "cannot infer the shape of the indexed expression;"
                    " annotate the quantifier binder",
                    e.span,
                ),
                t_dep,
            )
        if not isinstance(t_ty, A.TensorType) or t_ty.is_scalar:
            self.check_expr(e.index, scope)
            return self.error(f"cannot index a value of type {t_ty}", e.span), t_dep
        ix_ty, ix_dep = self.check_expr(e.index, scope)
        self.unify(ix_ty, A.index_type(t_ty.shape[0]), e.index.span, "index")
        return A.TensorType(t_ty.elem, t_ty.shape[1:]), t_dep or ix_dep

    def check_arith(self, e: A.Arith, scope: dict) -> tuple[A.Type, bool]:
        if e.op == "neg":
            ty, dep = self.check_expr(e.args[0], scope)
            ty = self.resolve(ty)
            if isinstance(ty, A.TypeVar):
                ty = self.unify(ty, A.RAT_SCALAR, e.span, "negation")
            if isinstance(ty, A.TensorType) and ty.elem.kind != "rat":
                return self.error(f"cannot negate a value of type {ty}", e.span), dep
            return ty, dep
        (lhs, rhs) = e.args
        lty, ldep = self.check_expr(lhs, scope)
        rty, rdep = self.check_expr(rhs, scope)
        dep = ldep or rdep
        if e.op in ("+", "-"):
            ty = self.unify(lty, rty, e.span, f"operands of {e.op!r}")
            ty = self.resolve(ty)
            if isinstance(ty, A.TypeVar):
                ty = self.unify(ty, A.RAT_SCALAR, e.span, "arithmetic")
            if isinstance(ty, A.TensorType) and ty.elem.kind != "rat":
                return (
                    self.error(f"{e.op!r} requires Rat operands, found {ty}", e.span),
                    dep,
                )
            return ty, dep
        if e.op == "*":
            if ldep and rdep:
                return (
                    self.error(
                        "nonlinear arithmetic: both factors depend on"
                        " quantified variables",
                        e.span,
                    ),
                    dep,
                )
            return self._check_scaling(e, lty, rty, dep)
        if e.op == "/":
            if rdep:
                return (
                    self.error(
                        "division by a quantified-variable-dependent"
                        " expression",
                        e.span,
                    ),
                    dep,
                )
            rty = self.unify(rty, A.RAT_SCALAR, rhs.span, "divisor")
            lty = self.resolve(lty)
            if isinstance(lty, A.TypeVar):
                lty = self.unify(lty, A.RAT_SCALAR, lhs.span, "dividend")
            if isinstance(lty, A.TensorType) and lty.elem.kind != "rat":
                return self.error("division requires Rat operands", e.span), dep
            return lty, dep
        raise AssertionError(e.op)

    def _check_scaling(self, e, lty, rty, dep):
        lty, rty = self.resolve(lty), self.resolve(rty)
        l_tensor = isinstance(lty, A.TensorType) and not lty.is_scalar
        r_tensor = isinstance(rty, A.TensorType) and not rty.is_scalar
        if l_tensor and r_tensor:
            return (
                self.error("tensor * tensor is not supported", e.span),
                dep,
            )
        if l_tensor or r_tensor:
            tensor_ty, scalar_ty = (lty, rty) if l_tensor else (rty, lty)
            self.unify(scalar_ty, A.RAT_SCALAR, e.span, "scalar factor")
            if tensor_ty.elem.kind != "rat":
                return (
                    self.error("scaling requires a Rat tensor", e.span),
                    dep,
                )
            return tensor_ty, dep
        lty = self.unify(lty, A.RAT_SCALAR, e.span, "factor")
        self.unify(rty, A.RAT_SCALAR, e.span, "factor")
        return A.RAT_SCALAR, dep

    def check_cmp(self, e: A.Cmp, scope: dict) -> tuple[A.Type, bool]:
        lty, ldep = self.check_expr(e.lhs, scope)
        rty, rdep = self.check_expr(e.rhs, scope)
        ty = self.resolve(self.unify(lty, rty, e.span, f"operands of {e.op!r}"))
        if isinstance(ty, A.TensorType):
            if not ty.is_scalar:
                self.error(
                    "comparisons are scalar; quantify over indices instead",
                    e.span,
                )
            elif ty.elem.kind == "bool":
                self.error("comparisons on Bool are not supported", e.span)
        return A.BOOL_SCALAR, ldep or rdep

    def check_quant(self, e: A.Quant, scope: dict) -> tuple[A.Type, bool]:
        inner = dict(scope)
        binder_vars = []
        for name, ann in e.binders:
            if name in inner:
                self.error(f"{name!r} is already bound", e.span)
            if ann is not None:
                ty = self.resolve_type(ann, e.span)
                if isinstance(ty, A.TensorType) and ty.elem.kind == "bool":
                    ty = self.error(
                        "quantification over Bool is not supported", e.span
                    )
            else:
                ty = self.fresh()
            binder_vars.append((name, ty))
            inner[name] = (ty, True)
        body_ty, dep = self.check_expr(e.body, inner)
        self.unify(body_ty, A.BOOL_SCALAR, e.body.span, "quantifier body")
        resolved_binders = {}
        for name, ty in binder_vars:
            resolved = self.resolve(ty)
            if isinstance(resolved, A.TypeVar) and resolved is not _ERROR:
                self.error(
                    f"cannot infer the type of quantifier variable {name!r};"
                    f" annotate it as ({name} : T)",
                    e.span,
                )
                if isinstance(ty, A.TypeVar):
                    self.subst[ty.id] = _ERROR
                resolved = _ERROR
            elif (
                isinstance(resolved, A.TensorType)
                and resolved.elem.kind == "bool"
            ):
                self.error(
                    "quantification over Bool is not supported", e.span
                )
            resolved_binders[name] = resolved
        # Side table for downstream passes; not part of structural equality.
        e.binder_types = resolved_binders
        return A.BOOL_SCALAR, False

    # -- finalization --------------------------------------------------------

    def finalize(self, e: A.Expr):
        """Resolve remaining type variables and check index literal bounds."""
        for node in walk(e):
            ty = self.resolve(node.ty) if node.ty is not None else None
            if isinstance(ty, A.TypeVar) and ty is not _ERROR:
                ty = A.RAT_SCALAR
                self.subst[node.ty.id] = ty
            node.ty = ty
            if isinstance(node, A.IntLit) and isinstance(ty, A.TensorType):
                if ty.elem.kind == "index" and isinstance(ty.elem.bound, int):
                    if node.value >= ty.elem.bound:
                        self.error(
                            f"index literal {node.value} out of range;"
                            f" valid indices 0..{ty.elem.bound - 1}",
                            node.span,
                        )


def walk(e: A.Expr):
    yield e
    if isinstance(e, (A.Arith, A.Logic, A.Apply)):
        for a in e.args:
            yield from walk(a)
    elif isinstance(e, A.Cmp):
        yield from walk(e.lhs)
        yield from walk(e.rhs)
    elif isinstance(e, A.TensorIndex):
        yield from walk(e.tensor)
        yield from walk(e.index)
    elif isinstance(e, (A.Quant, A.Foreach)):
        yield from walk(e.body)
    elif isinstance(e, A.Let):
        yield from walk(e.value)
        yield from walk(e.body)


@dataclass
class TypedModule:
    """Type-checked module plus the resolved global environment."""

    module: A.SpecModule
    env: GlobalEnv


def typecheck(module: A.SpecModule) -> TypedModule:
    """Check a parsed module; raises TypeCheckFailure with every violation."""
    checker = _Checker()
    env = checker.check_module(module)
    if checker.errors:
        raise TypeCheckFailure(checker.errors)
    return TypedModule(module=module, env=env)


def assert_well_typed(tm: TypedModule):
    """AST walk asserting the headline invariants of a checked module.

    Verifies that no index literal is out of range and that every network
    application argument matches the declared input shape.
    """
    for decl in tm.module.decls:
        body = getattr(decl, "body", None)
        if body is None:
            continue
        for node in walk(body):
            assert node.ty is not None, f"untyped node {node!r}"
            if isinstance(node, A.IntLit) and isinstance(node.ty, A.TensorType):
                elem = node.ty.elem
                if elem.kind == "index" and isinstance(elem.bound, int):
                    assert 0 <= node.value < elem.bound
            if isinstance(node, A.Apply) and node.is_network:
                in_ty, _ = tm.env.networks[node.fn]
                assert node.args[0].ty == in_ty


__all__ = [
    "typecheck", "TypedModule", "TypeCheckError", "TypeCheckFailure",
    "GlobalEnv", "assert_well_typed", "walk",
]
