"""Lower bound properties to network-level verification queries.

A property of the shape

    forall v . inputConstraints(v)  =>  outputCondition(net (A v + t))

is compiled, per dataset instance, into a Query over the network's input
space: the input constraints are pushed through the affine argument map
(change of variables z = A v + t, supported when A acts diagonally with a
per-dimension nonzero scale), and the whole implication is negated into
counterexample-search form, the only form verifiers and VNN-LIB accept.
Strict comparisons are weakened to non-strict during negation; this keeps
"no counterexample" verdicts sound and is recorded as a query note since
boundary points may then appear as spurious counterexamples.

Finite quantifiers (foreach over datasets, forall/exists over Index ranges)
are expanded, so the number of emitted queries scales with the data, not
with the textual size of the property.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import model as M
from .binding import Bindings
from .lang import ast as A
from .lang.eval import EvalContext, eval_ground
from .lang.typecheck import TypedModule
from .rat import ONE, ZERO, Rat, rat, rat_str
from .values import TensorValue, shape_size, stack


class LowerError(Exception):
    pass


# --------------------------------------------------------------------------
# Query data model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LinIneq:
    """coeffs . x + const  op  0, with op one of '<=' or '>='."""

    coeffs: tuple[Rat, ...]
    const: Rat
    op: str

    def evaluate(self, x) -> bool:
        value = sum((c * v for c, v in zip(self.coeffs, x)), self.const)
        return value <= 0 if self.op == "<=" else value >= 0

    def key(self):
        return (self.op, tuple(map(rat_str, self.coeffs)), rat_str(self.const))


@dataclass(frozen=True)
class PostLeaf:
    ineq: LinIneq

    def evaluate(self, y) -> bool:
        return self.ineq.evaluate(y)

    def key(self):
        return ("leaf", self.ineq.key())


@dataclass(frozen=True)
class PostAnd:
    children: tuple

    def evaluate(self, y) -> bool:
        return all(c.evaluate(y) for c in self.children)

    def key(self):
        return ("and", tuple(sorted(c.key() for c in self.children)))


@dataclass(frozen=True)
class PostOr:
    children: tuple

    def evaluate(self, y) -> bool:
        return any(c.evaluate(y) for c in self.children)

    def key(self):
        return ("or", tuple(sorted(c.key() for c in self.children)))


PostCondition = "PostLeaf | PostAnd | PostOr"


def post_leaves(post):
    if isinstance(post, PostLeaf):
        yield post.ineq
    else:
        for c in post.children:
            yield from post_leaves(c)


@dataclass(frozen=True)
class EmbeddingSpec:
    """Per-network-input-dimension affine embedding z_j = scale * v_k + shift.

    var_index is the flattened index k of the quantified problem-space
    variable feeding dimension j, or None for a point dimension. onehot
    maps dimensions whose problem-space values range over a finite set
    that was relaxed to its interval hull (values are in network-input
    coordinates). unembed is ('argmax', label) for class-dominance
    postconditions and ('identity',) otherwise.
    """

    scale: tuple[Rat, ...]
    shift: tuple[Rat, ...]
    var_index: tuple
    onehot: tuple[tuple[int, tuple[Rat, ...]], ...] = ()
    unembed: tuple = ("identity",)

    def invert(self, x):
        """Map a network-input point back to the problem-space variable."""
        dims = [i for i in self.var_index if i is not None]
        v = [ZERO] * (max(dims) + 1 if dims else 0)
        for j, k in enumerate(self.var_index):
            if k is not None:
                v[k] = (rat(x[j]) - self.shift[j]) / self.scale[j]
        return v

    def onehot_violations(self, x):
        bad = []
        for j, values in self.onehot:
            if all(rat(x[j]) != val for val in values):
                bad.append((j, x[j]))
        return bad


def identity_embedding(m: int) -> EmbeddingSpec:
    return EmbeddingSpec(
        scale=(ONE,) * m, shift=(ZERO,) * m, var_index=tuple(range(m))
    )


@dataclass(frozen=True)
class Query:
    name: str
    network: str
    input_box: tuple[tuple[Rat, Rat], ...]
    input_linear: tuple[LinIneq, ...]
    post: object  # negated postcondition, NNF, non-strict leaves
    polarity: str = "find_counterexample"
    embedding: EmbeddingSpec = None
    property_name: str = ""
    instance: int = 0
    warnings: tuple[str, ...] = ()

    @property
    def input_dim(self) -> int:
        return len(self.input_box)

    def point_in_precondition(self, x) -> bool:
        for (lo, hi), v in zip(self.input_box, x):
            if not lo <= v <= hi:
                return False
        return all(ineq.evaluate(x) for ineq in self.input_linear)

    def semantically_equal(self, other: "Query") -> bool:
        return (
            self.input_dim == other.input_dim
            and all(
                a[0] == b[0] and a[1] == b[1]
                for a, b in zip(self.input_box, other.input_box)
            )
            and sorted(i.key() for i in self.input_linear)
            == sorted(i.key() for i in other.input_linear)
            and self.post.key() == other.post.key()
        )


TRIVIAL_FALSE = PostLeaf(LinIneq((), rat(-1), ">="))
TRIVIAL_TRUE = PostLeaf(LinIneq((), rat(1), ">="))


# --------------------------------------------------------------------------
# Affine forms and formula IR
# --------------------------------------------------------------------------

class Aff:
    """Affine form over symbols ('in', i) and ('out', app_id, j)."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const=ZERO):
        self.coeffs = coeffs or {}
        self.const = const

    @staticmethod
    def of(value) -> "Aff":
        return value if isinstance(value, Aff) else Aff(const=rat(value))

    @staticmethod
    def sym(symbol) -> "Aff":
        return Aff(coeffs={symbol: ONE})

    @property
    def is_const(self) -> bool:
        return not self.coeffs

    def __add__(self, other):
        other = Aff.of(other)
        coeffs = dict(self.coeffs)
        for s, c in other.coeffs.items():
            coeffs[s] = coeffs.get(s, ZERO) + c
            if coeffs[s] == 0:
                del coeffs[s]
        return Aff(coeffs, self.const + other.const)

    def __sub__(self, other):
        return self + Aff.of(other).scale(rat(-1))

    def scale(self, r) -> "Aff":
        if r == 0:
            return Aff()
        return Aff(
            {s: c * r for s, c in self.coeffs.items()}, self.const * r
        )

    def symbols(self):
        return self.coeffs.keys()


class FTrue:
    pass


class FFalse:
    pass


F_TRUE, F_FALSE = FTrue(), FFalse()


@dataclass(frozen=True)
class FAtom:
    op: str  # '<=', '<', '>=', '>', '==', '!='
    aff: Aff  # aff op 0


@dataclass(frozen=True)
class FAnd:
    children: tuple


@dataclass(frozen=True)
class FOr:
    children: tuple


@dataclass(frozen=True)
class FNot:
    child: object


def f_and(a, b):
    if isinstance(a, FFalse) or isinstance(b, FFalse):
        return F_FALSE
    if isinstance(a, FTrue):
        return b
    if isinstance(b, FTrue):
        return a
    return FAnd((a, b))


def f_or(a, b):
    if isinstance(a, FTrue) or isinstance(b, FTrue):
        return F_TRUE
    if isinstance(a, FFalse):
        return b
    if isinstance(b, FFalse):
        return a
    return FOr((a, b))


def f_not(a):
    if isinstance(a, FTrue):
        return F_FALSE
    if isinstance(a, FFalse):
        return F_TRUE
    return FNot(a)


_NEG_OP = {"<=": ">", "<": ">=", ">=": "<", ">": "<=", "==": "!=", "!=": "=="}


def nnf(phi, negate: bool):
    """Negation normal form; atoms absorb the negation by flipping ops."""
    if isinstance(phi, FTrue):
        return F_FALSE if negate else F_TRUE
    if isinstance(phi, FFalse):
        return F_TRUE if negate else F_FALSE
    if isinstance(phi, FAtom):
        return FAtom(_NEG_OP[phi.op], phi.aff) if negate else phi
    if isinstance(phi, FNot):
        return nnf(phi.child, not negate)
    if isinstance(phi, FAnd):
        kids = tuple(nnf(c, negate) for c in phi.children)
        return FOr(kids) if negate else FAnd(kids)
    if isinstance(phi, FOr):
        kids = tuple(nnf(c, negate) for c in phi.children)
        return FAnd(kids) if negate else FOr(kids)
    raise AssertionError(phi)


# --------------------------------------------------------------------------
# Atomizer: partial evaluation of a typed body into the formula IR
# --------------------------------------------------------------------------

class _Atomizer:
    def __init__(self, ctx: EvalContext, ground_point_apps: bool):
        self.ctx = ctx
        self.apps: list[tuple[str, tuple]] = []  # (network, arg affs)
        self._app_keys: dict = {}
        self.ground_point_apps = ground_point_apps

    def atomize(self, e: A.Expr, scope: dict):
        if isinstance(e, (A.RatLit, A.IntLit, A.BoolLit)):
            return e.value
        if isinstance(e, A.Var):
            if e.name in scope:
                return scope[e.name]
            d = self.ctx.env.defs.get(e.name)
            if d is not None and not d.params:
                return self.atomize(d.body, {})
            raise LowerError(f"no value for {e.name!r}")
        if isinstance(e, A.TensorIndex):
            tensor = self.atomize(e.tensor, scope)
            index = self.atomize(e.index, scope)
            if isinstance(index, Aff) or isinstance(tensor, Aff):
                raise LowerError("indices must be concrete after expansion")
            return tensor.index(int(index))
        if isinstance(e, A.Arith):
            return self._arith(e, scope)
        if isinstance(e, A.Cmp):
            lhs = self.atomize(e.lhs, scope)
            rhs = self.atomize(e.rhs, scope)
            return self._cmp(e.op, lhs, rhs)
        if isinstance(e, A.Logic):
            return self._logic(e, scope)
        if isinstance(e, A.Quant):
            return self._quant(e, scope)
        if isinstance(e, A.Apply):
            return self._apply(e, scope)
        if isinstance(e, A.Let):
            inner = dict(scope)
            inner[e.name] = self.atomize(e.value, scope)
            return self.atomize(e.body, inner)
        if isinstance(e, A.Foreach):
            raise LowerError("foreach may only appear at the property head")
        raise AssertionError(f"cannot lower {e!r}")

    def _arith(self, e: A.Arith, scope):
        if e.op == "neg":
            return _map_value(self.atomize(e.args[0], scope),
                              lambda v: Aff.of(v).scale(rat(-1))
                              if isinstance(v, Aff) else -v)
        lhs = self.atomize(e.args[0], scope)
        rhs = self.atomize(e.args[1], scope)
        if e.op == "+":
            return _zip_value(lhs, rhs, _add)
        if e.op == "-":
            return _zip_value(lhs, rhs, _sub)
        if e.op == "*":
            if isinstance(lhs, TensorValue) or _is_symbolic(lhs):
                lhs, rhs = rhs, lhs
            # lhs is now the constant scalar side (checked at type time)
            if _is_symbolic(lhs) or isinstance(lhs, TensorValue):
                raise LowerError("nonlinear product survived type checking")
            return _map_value(rhs, lambda v: _scale(v, rat(lhs)))
        if e.op == "/":
            if _is_symbolic(rhs) or isinstance(rhs, TensorValue):
                raise LowerError("division by a symbolic value")
            if rhs == 0:
                raise LowerError("division by zero while lowering")
            inv = ONE / rat(rhs)
            return _map_value(lhs, lambda v: _scale(v, inv))
        raise AssertionError(e.op)

    def _cmp(self, op, lhs, rhs):
        if isinstance(lhs, TensorValue) or isinstance(rhs, TensorValue):
            raise LowerError("tensor comparison survived type checking")
        if not (_is_symbolic(lhs) or _is_symbolic(rhs)):
            return _const_cmp(op, lhs, rhs)
        aff = Aff.of(lhs) - Aff.of(rhs)
        if aff.is_const:
            return _const_cmp(op, aff.const, ZERO)
        return FAtom(op, aff)

    def _logic(self, e: A.Logic, scope):
        if e.op == "not":
            return f_not(self._as_formula(self.atomize(e.args[0], scope)))
        lhs = self._as_formula(self.atomize(e.args[0], scope))
        rhs = self._as_formula(self.atomize(e.args[1], scope))
        if e.op == "and":
            return f_and(lhs, rhs)
        if e.op == "or":
            return f_or(lhs, rhs)
        return f_or(f_not(lhs), rhs)  # implication

    @staticmethod
    def _as_formula(v):
        if isinstance(v, bool):
            return F_TRUE if v else F_FALSE
        if isinstance(v, (FTrue, FFalse, FAtom, FAnd, FOr, FNot)):
            return v
        raise LowerError("expected a Bool expression")

    def _quant(self, e: A.Quant, scope):
        binder_types = getattr(e, "binder_types", {})
        # Expand one binder at a time, left to right.
        name, _ = e.binders[0]
        rest = e.binders[1:]
        body = A.Quant(kind=e.kind, binders=rest, body=e.body) if rest else e.body
        if rest:
            body.binder_types = binder_types
        ty = binder_types.get(name)
        if not isinstance(ty, A.TensorType):
            raise LowerError(f"quantifier variable {name!r} has no usable type")
        if ty.elem.kind == "index" and ty.is_scalar:
            bound = self.ctx.dim(ty.elem.bound)
            result = F_TRUE if e.kind == "forall" else F_FALSE
            for i in range(bound):
                inner = dict(scope)
                inner[name] = i
                sub = self._as_formula(self.atomize(body, inner))
                result = f_and(result, sub) if e.kind == "forall" else f_or(result, sub)
            return result
        raise LowerError(
            "nested quantification over continuous variables is not"
            " supported; one universal input block per property"
        )

    def _apply(self, e: A.Apply, scope):
        args = [self.atomize(a, scope) for a in e.args]
        if not e.is_network:
            d = self.ctx.env.defs[e.fn]
            return self.atomize(d.body, dict(zip(d.params, args)))
        arg = args[0]
        flat = arg.data if isinstance(arg, TensorValue) else (arg,)
        affs = tuple(Aff.of(v) for v in flat)
        symbolic = any(not a.is_const for a in affs)
        if any(
            sym[0] == "out" for a in affs for sym in a.symbols()
        ):
            raise LowerError(
                "network applied to another network's output; constraints"
                " on hidden compositions are not supported"
            )
        if not symbolic and not (self.ground_point_apps and not self.apps):
            # Constant argument: evaluate exactly and fold the result.
            net = self._network(e.fn)
            out = M.eval_exact(net, [a.const for a in affs])
            return self._shape_output(e, out)
        key = (e.fn, tuple(
            (tuple(sorted(a.coeffs.items())), a.const) for a in affs
        ))
        app_id = self._app_keys.get(key)
        if app_id is None:
            app_id = len(self.apps)
            self.apps.append((e.fn, affs))
            self._app_keys[key] = app_id
        net = self._network(e.fn)
        out = [Aff.sym(("out", app_id, j)) for j in range(net.output_dim)]
        return self._shape_output(e, out)

    def _network(self, name: str) -> M.Network:
        net = self.ctx.networks.get(name)
        if net is None:
            raise LowerError(f"network {name!r} is not bound")
        return net

    def _shape_output(self, e: A.Apply, out):
        shape = (
            self.ctx.shape(e.ty) if isinstance(e.ty, A.TensorType) else ()
        )
        if shape_size(shape) != len(out):
            shape = (len(out),)
        if not shape:
            return out[0]
        return TensorValue(shape, tuple(out))


def _is_symbolic(v) -> bool:
    return isinstance(v, Aff) and not v.is_const


def _add(a, b):
    if isinstance(a, Aff) or isinstance(b, Aff):
        return Aff.of(a) + Aff.of(b)
    return a + b


def _sub(a, b):
    if isinstance(a, Aff) or isinstance(b, Aff):
        return Aff.of(a) - Aff.of(b)
    return a - b


def _scale(v, r):
    if isinstance(v, Aff):
        return v.scale(r)
    return v * r


def _map_value(v, f):
    if isinstance(v, TensorValue):
        return TensorValue(v.shape, tuple(f(x) for x in v.data))
    return f(v)


def _zip_value(a, b, f):
    a_t, b_t = isinstance(a, TensorValue), isinstance(b, TensorValue)
    if a_t != b_t:
        raise LowerError("tensor/scalar mismatch survived type checking")
    if a_t:
        if a.shape != b.shape:
            raise LowerError("tensor shape mismatch survived type checking")
        return TensorValue(a.shape, tuple(f(x, y) for x, y in zip(a.data, b.data)))
    return f(a, b)


def _const_cmp(op, lhs, rhs) -> bool:
    lhs = lhs.const if isinstance(lhs, Aff) else lhs
    rhs = rhs.const if isinstance(rhs, Aff) else rhs
    return {
        "<=": lhs <= rhs, "<": lhs < rhs, ">=": lhs >= rhs,
        ">": lhs > rhs, "==": lhs == rhs, "!=": lhs != rhs,
    }[op]


# --------------------------------------------------------------------------
# Property expansion
# --------------------------------------------------------------------------

@dataclass
class Universal:
    """One peeled universal block: a quantified variable and its body."""

    var: str | None  # None for ground instances
    var_shape: tuple[int, ...] | None  # resolved tensor shape, () for scalar
    body: A.Expr
    scope: dict

    @property
    def var_dims(self) -> int:
        return shape_size(self.var_shape) if self.var_shape is not None else 0


def make_context(tm: TypedModule, b: Bindings) -> EvalContext:
    dims = dict(b.inferred)
    for name, value in b.parameters.items():
        if isinstance(tm.env.parameters[name].ty, A.NatType):
            dims[name] = int(value)
    return EvalContext(env=tm.env, networks=b.networks, dims=dims)


def global_scope(tm: TypedModule, b: Bindings) -> dict:
    scope = {}
    for name, value in b.parameters.items():
        if not isinstance(tm.env.parameters[name].ty, A.NatType):
            scope[name] = value
    for name, rows in b.datasets.items():
        elem_shape = rows[0].shape if rows and isinstance(rows[0], TensorValue) else ()
        scope[name] = stack(rows, elem_shape)
    return scope


def expand_property(tm: TypedModule, b: Bindings, prop_name: str):
    """Expand foreach into (instance index, scope) pairs."""
    prop = tm.env.properties.get(prop_name)
    if prop is None:
        raise LowerError(f"unknown property {prop_name!r}")
    ctx = make_context(tm, b)
    base = global_scope(tm, b)
    if isinstance(prop.body, A.Foreach):
        n = ctx.dim(prop.ty.shape[0])
        out = []
        for i in range(n):
            scope = dict(base)
            scope[prop.body.binder] = i
            out.append((i, scope, prop.body.body))
        return ctx, out
    return ctx, [(0, dict(base), prop.body)]


def peel_universals(ctx: EvalContext, body: A.Expr, scope: dict) -> list[Universal]:
    """Split an instance body into its universal input blocks.

    The universal quantifier over a continuous variable must sit at the
    head of the instance, possibly under definition applications, finite
    quantifier expansions, lets, and conjunctions.
    """
    e = body
    if isinstance(e, A.Apply) and not e.is_network:
        d = ctx.env.defs[e.fn]
        atomizer = _Atomizer(ctx, ground_point_apps=False)
        args = [atomizer.atomize(a, scope) for a in e.args]
        if atomizer.apps:
            raise LowerError(
                "network applications in instance arguments are not supported"
            )
        return peel_universals(ctx, d.body, dict(zip(d.params, args)))
    if isinstance(e, A.Let):
        atomizer = _Atomizer(ctx, ground_point_apps=False)
        value = atomizer.atomize(e.value, scope)
        inner = dict(scope)
        inner[e.name] = value
        return peel_universals(ctx, e.body, inner)
    if isinstance(e, A.Logic) and e.op == "and":
        lhs = peel_universals(ctx, e.args[0], scope)
        rhs = peel_universals(ctx, e.args[1], scope)
        return lhs + rhs
    if isinstance(e, A.Quant):
        types = getattr(e, "binder_types", {})
        name, _ = e.binders[0]
        ty = types.get(name)
        rest = e.binders[1:]
        tail = A.Quant(kind=e.kind, binders=rest, body=e.body) if rest else e.body
        if rest:
            tail.binder_types = types
        if isinstance(ty, A.TensorType) and ty.elem.kind == "index" and ty.is_scalar:
            out = []
            for i in range(ctx.dim(ty.elem.bound)):
                inner = dict(scope)
                inner[name] = i
                if e.kind != "forall":
                    raise LowerError(
                        "existential quantification cannot be lowered to"
                        " universal queries"
                    )
                out.extend(peel_universals(ctx, tail, inner))
            return out
        if isinstance(ty, A.TensorType) and ty.elem.kind == "rat":
            if e.kind != "forall":
                raise LowerError(
                    "existential quantification over inputs is not supported"
                )
            shape = tuple(ctx.dim(d) for d in ty.shape)
            return [Universal(var=name, var_shape=shape, body=tail, scope=scope)]
        raise LowerError(f"cannot lower quantifier over type {ty}")
    return [Universal(var=None, var_shape=None, body=e, scope=scope)]


# --------------------------------------------------------------------------
# Query construction
# --------------------------------------------------------------------------

def lower(tm: TypedModule, b: Bindings, properties=None) -> list[Query]:
    """Lower every property (or the named subset) to queries."""
    names = properties if properties is not None else list(tm.env.properties)
    queries = []
    for prop_name in names:
        ctx, instances = expand_property(tm, b, prop_name)
        for index, scope, body in instances:
            blocks = peel_universals(ctx, body, scope)
            for k, block in enumerate(blocks):
                name = f"{prop_name}_{index}"
                if len(blocks) > 1:
                    name += f"_{k}"
                queries.append(_lower_block(ctx, block, name, prop_name, index))
    return queries


def _lower_block(ctx, block: Universal, name, prop_name, index) -> Query:
    atomizer = _Atomizer(ctx, ground_point_apps=block.var is None)
    scope = dict(block.scope)
    if block.var is not None:
        units = tuple(Aff.sym(("in", i)) for i in range(block.var_dims))
        scope[block.var] = (
            units[0] if block.var_shape == ()
            else TensorValue(block.var_shape, units)
        )
    formula = atomizer._as_formula(atomizer.atomize(block.body, scope))
    goal = nnf(formula, negate=True)  # search target: counterexamples to F

    if not atomizer.apps:
        raise LowerError(
            f"property {prop_name!r} does not constrain any network output"
        )
    if len(atomizer.apps) > 1:
        raise LowerError(
            "a query can reference a single network at a single application"
            " point; multi-network properties are a recorded extension"
        )
    net_name, affs = atomizer.apps[0]
    net = ctx.networks[net_name]

    warnings: list[str] = []
    v_cons, post = _classify(goal, net.output_dim, warnings)
    emb = _embedding(affs, block.var_dims, net.input_dim)
    box, linear, onehot, empty = _push_through_embedding(
        v_cons, emb, block.var_dims, net.input_dim, warnings
    )
    if empty:
        post = TRIVIAL_FALSE
        warnings.append(
            "the precondition is unsatisfiable; the property holds vacuously"
        )
    emb = EmbeddingSpec(
        scale=emb.scale, shift=emb.shift, var_index=emb.var_index,
        onehot=onehot, unembed=_detect_unembedding(post),
    )
    return Query(
        name=name, network=net_name, input_box=box,
        input_linear=tuple(linear), post=post,
        embedding=emb, property_name=prop_name, instance=index,
        warnings=tuple(warnings),
    )


def _atom_space(aff: Aff):
    spaces = {sym[0] for sym in aff.symbols()}
    return spaces


def _classify(goal, out_dim, warnings):
    """Split the negated formula into input constraints and postcondition."""
    conjuncts = _flatten_and(goal)
    v_cons: list[FAtom | FOr] = []
    out_parts = []
    for part in conjuncts:
        if isinstance(part, FFalse):
            return [], TRIVIAL_FALSE
        if isinstance(part, FTrue):
            continue
        spaces = _part_spaces(part)
        if spaces <= {"in"}:
            v_cons.append(part)
        elif spaces <= {"out"}:
            out_parts.append(_to_post(part, out_dim, warnings))
        else:
            raise LowerError(
                "a constraint mixes network inputs and outputs; such"
                " queries are not representable"
            )
    if not out_parts:
        post = TRIVIAL_TRUE
        warnings.append(
            "negated property has no output constraint; any point of the"
            " input region is a counterexample candidate"
        )
    elif len(out_parts) == 1:
        post = out_parts[0]
    else:
        post = PostAnd(tuple(out_parts))
    return v_cons, post


def _flatten_and(phi):
    if isinstance(phi, FAnd):
        out = []
        for c in phi.children:
            out.extend(_flatten_and(c))
        return out
    return [phi]


def _flatten_or(phi):
    if isinstance(phi, FOr):
        out = []
        for c in phi.children:
            out.extend(_flatten_or(c))
        return out
    return [phi]


def _part_spaces(part) -> set:
    if isinstance(part, FAtom):
        return _atom_space(part.aff)
    if isinstance(part, (FAnd, FOr)):
        spaces = set()
        for c in part.children:
            spaces |= _part_spaces(c)
        return spaces
    if isinstance(part, FNot):
        raise AssertionError("negation below NNF")
    return set()


def _weaken(op: str, warnings, side: str) -> str:
    if op == "<":
        note = f"strict comparison weakened to non-strict in the {side}"
        if note not in warnings:
            warnings.append(note)
        return "<="
    if op == ">":
        note = f"strict comparison weakened to non-strict in the {side}"
        if note not in warnings:
            warnings.append(note)
        return ">="
    return op


def _to_post(part, out_dim, warnings):
    """Convert an output-space NNF subtree into a PostCondition."""
    if isinstance(part, FAtom):
        return _post_atom(part, out_dim, warnings)
    if isinstance(part, FAnd):
        return PostAnd(tuple(_to_post(c, out_dim, warnings)
                             for c in part.children))
    if isinstance(part, FOr):
        return PostOr(tuple(_to_post(c, out_dim, warnings)
                            for c in part.children))
    raise AssertionError(part)


def _post_atom(atom: FAtom, out_dim, warnings):
    op, aff = atom.op, atom.aff
    if op == "==":
        leq = PostLeaf(_dense_out(aff, out_dim, "<="))
        geq = PostLeaf(_dense_out(aff, out_dim, ">="))
        return PostAnd((leq, geq))
    if op == "!=":
        warnings.append(
            "negated equality weakened to a trivially satisfiable"
            " disjunction; counterexamples on the boundary may be spurious"
        )
        leq = PostLeaf(_dense_out(aff, out_dim, "<="))
        geq = PostLeaf(_dense_out(aff, out_dim, ">="))
        return PostOr((leq, geq))
    op = _weaken(op, warnings, "postcondition")
    return PostLeaf(_dense_out(aff, out_dim, op))


def _dense_out(aff: Aff, out_dim, op) -> LinIneq:
    coeffs = [ZERO] * out_dim
    for sym, c in aff.coeffs.items():
        coeffs[sym[2]] = c
    return LinIneq(tuple(coeffs), aff.const, op)


def _embedding(affs, var_dims, in_dim) -> EmbeddingSpec:
    """Derive the per-dimension affine map z_j = s_j * v_k + t_j."""
    scale, shift, var_index = [], [], []
    used = {}
    for j, aff in enumerate(affs):
        syms = list(aff.coeffs.items())
        if len(syms) == 0:
            scale.append(ONE)
            shift.append(aff.const)
            var_index.append(None)
            continue
        if len(syms) > 1:
            raise LowerError(
                "network argument mixes several input variable components;"
                " only per-dimension affine embeddings are supported"
            )
        (sym, coeff), = syms
        k = sym[1]
        if k in used:
            raise LowerError(
                "input variable component feeds several network inputs;"
                " the embedding is not invertible"
            )
        used[k] = j
        scale.append(coeff)
        shift.append(aff.const)
        var_index.append(k)
    if var_dims and len(used) != var_dims:
        raise LowerError(
            "some components of the quantified variable do not reach the"
            " network; the embedding is not invertible"
        )
    return EmbeddingSpec(
        scale=tuple(scale), shift=tuple(shift), var_index=tuple(var_index)
    )


def _push_through_embedding(v_cons, emb: EmbeddingSpec, var_dims, in_dim,
                            warnings):
    """Turn v-space constraints into a network-input box plus extras."""
    lo = [None] * var_dims
    hi = [None] * var_dims
    finite_sets: dict[int, set] = {}
    linear_v: list[LinIneq] = []

    for part in v_cons:
        if isinstance(part, FAtom):
            _accumulate_atom(part, lo, hi, linear_v, var_dims, warnings)
        elif isinstance(part, FOr):
            dim, values = _onehot_set(part)
            if dim is None:
                raise LowerError(
                    "disjunctive input constraints are only supported as"
                    " finite value sets on a single dimension"
                )
            finite_sets.setdefault(dim, set()).update(values)
            values_sorted = sorted(finite_sets[dim])
            warnings.append(
                f"input component {dim} constrained to the finite set"
                f" {{{', '.join(rat_str(v) for v in values_sorted)}}} was"
                " relaxed to its interval hull; exact encoding needs one"
                " disjunct per value, and each disjunct multiplies"
                " verification cost (counterexamples off the set are"
                " reported as spurious)"
            )
            lo[dim] = min(values_sorted) if lo[dim] is None else max(
                lo[dim], min(values_sorted))
            hi[dim] = max(values_sorted) if hi[dim] is None else min(
                hi[dim], max(values_sorted))
        else:
            raise LowerError("unsupported input constraint structure")

    # Map v-space to network-input space per dimension.
    box = []
    for j in range(in_dim):
        k = emb.var_index[j]
        s, t = emb.scale[j], emb.shift[j]
        if k is None:
            box.append((t, t))
            continue
        if lo[k] is None or hi[k] is None:
            raise LowerError(
                f"input component {k} is unbounded; verification queries"
                " require a bounded input box"
            )
        a, b_ = s * lo[k] + t, s * hi[k] + t
        box.append((min(a, b_), max(a, b_)))
    if any(l > h for l, h in box):
        # Empty precondition: no inputs satisfy it.
        box = [(l, l) if l <= h else (l, l) for l, h in box]
        return tuple(box), [LinIneq((ZERO,) * in_dim, rat(-1), ">=")], ()

    linear = [_push_linear(ineq, emb, in_dim) for ineq in linear_v]
    onehot = tuple(
        (used_j, tuple(sorted(emb.scale[used_j] * v + emb.shift[used_j]
                              for v in values)))
        for used_j, values in sorted(
            (_dim_to_net(emb, dim), vals) for dim, vals in finite_sets.items()
        )
    )
    return tuple(box), linear, onehot


def _dim_to_net(emb: EmbeddingSpec, k: int) -> int:
    for j, idx in enumerate(emb.var_index):
        if idx == k:
            return j
    raise LowerError("finite-set constraint on a variable the network ignores")


def _accumulate_atom(atom: FAtom, lo, hi, linear_v, var_dims, warnings):
    op = atom.op
    aff = atom.aff
    if op == "!=":
        warnings.append(
            "input disequality dropped after weakening; the search region"
            " includes the excluded point"
        )
        return
    if op == "==":
        for sub_op in ("<=", ">="):
            _accumulate_atom(FAtom(sub_op, aff), lo, hi, linear_v,
                             var_dims, warnings)
        return
    op = _weaken(op, warnings, "precondition")
    syms = list(aff.coeffs.items())
    if len(syms) == 1:
        (sym, c), = syms
        k = sym[1]
        bound = -aff.const / c
        # c*v + d <= 0  <=>  v <= -d/c (c>0) or v >= -d/c (c<0)
        upper = (op == "<=") == (c > 0)
        if upper:
            hi[k] = bound if hi[k] is None else min(hi[k], bound)
        else:
            lo[k] = bound if lo[k] is None else max(lo[k], bound)
        return
    coeffs = [ZERO] * var_dims
    for sym, c in aff.coeffs.items():
        coeffs[sym[1]] = c
    linear_v.append(LinIneq(tuple(coeffs), aff.const, op))


def _onehot_set(part: FOr):
    """Recognize a disjunction of equalities pinning one dimension."""
    dim = None
    values = []
    for leaf in _flatten_or(part):
        if not isinstance(leaf, FAtom) or leaf.op != "==":
            return None, None
        syms = list(leaf.aff.coeffs.items())
        if len(syms) != 1:
            return None, None
        (sym, c), = syms
        if dim is None:
            dim = sym[1]
        elif dim != sym[1]:
            return None, None
        values.append(-leaf.aff.const / c)
    return dim, values


def _push_linear(ineq: LinIneq, emb: EmbeddingSpec, in_dim) -> LinIneq:
    coeffs = [ZERO] * in_dim
    const = ineq.const
    for k, c in enumerate(ineq.coeffs):
        if c == 0:
            continue
        j = _dim_to_net(emb, k)
        s, t = emb.scale[j], emb.shift[j]
        coeffs[j] = c / s
        const = const - c * t / s
    return LinIneq(tuple(coeffs), const, ineq.op)


def _detect_unembedding(post) -> tuple:
    """Recognize the argmax/class-dominance pattern in the negated post.

    The negation of "class L strictly dominates" is a disjunction of
    y_j - y_L >= 0 leaves sharing L; for it, witnesses unembed by argmax.
    """
    leaves = list(post_leaves(post)) if not isinstance(post, PostLeaf) else [
        post.ineq]
    label = None
    for ineq in leaves:
        if ineq.op != ">=" or ineq.const != 0:
            return ("identity",)
        pos = [i for i, c in enumerate(ineq.coeffs) if c == 1]
        neg = [i for i, c in enumerate(ineq.coeffs) if c == -1]
        others = [c for c in ineq.coeffs if c not in (0, 1, -1)]
        if others or len(pos) != 1 or len(neg) != 1:
            return ("identity",)
        if label is None:
            label = neg[0]
        elif label != neg[0]:
            return ("identity",)
    if label is None:
        return ("identity",)
    return ("argmax", label)


# --------------------------------------------------------------------------
# Lifting verdicts back to the problem space
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpaceVerdict:
    query: str
    property_name: str
    instance: int
    status: str  # 'holds' | 'violated' | 'spurious' | 'unknown'
    detail: str
    counterexample: dict | None = None


def lift_verdict(q: Query, verdict, emb: EmbeddingSpec | None = None
                 ) -> ProblemSpaceVerdict:
    """Interpret a verifier verdict in problem-space terms."""
    emb = emb or q.embedding
    kind = verdict.kind
    if kind == "unsat":
        return ProblemSpaceVerdict(
            query=q.name, property_name=q.property_name, instance=q.instance,
            status="holds",
            detail=f"property {q.property_name!r} holds on instance"
                   f" {q.instance}",
        )
    if kind == "unknown":
        return ProblemSpaceVerdict(
            query=q.name, property_name=q.property_name, instance=q.instance,
            status="unknown", detail="search budget exhausted",
        )
    x = verdict.witness
    bad = emb.onehot_violations(x)
    if bad:
        dims = ", ".join(f"x[{j}]={rat_str(rat(v))}" for j, v in bad)
        return ProblemSpaceVerdict(
            query=q.name, property_name=q.property_name, instance=q.instance,
            status="spurious",
            detail=f"counterexample lies off the finite problem-space values"
                   f" ({dims}); spurious under the interval relaxation",
        )
    v = emb.invert(x)
    ce = {
        "problem_point": [rat_str(val) for val in v],
        "network_input": [rat_str(rat(val)) for val in x],
    }
    detail = f"counterexample for instance {q.instance}"
    outputs = getattr(verdict, "witness_output", None)
    if outputs is not None:
        ce["network_output"] = [rat_str(rat(val)) for val in outputs]
        if emb.unembed[0] == "argmax":
            predicted = max(range(len(outputs)), key=lambda j: (outputs[j], -j))
            ce["predicted_class"] = predicted
            ce["expected_class"] = emb.unembed[1]
            detail = (
                f"instance {q.instance}: class {predicted} overtakes the"
                f" expected class {emb.unembed[1]}"
            )
    return ProblemSpaceVerdict(
        query=q.name, property_name=q.property_name, instance=q.instance,
        status="violated", detail=detail, counterexample=ce,
    )


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def post_to_obj(post):
    if isinstance(post, PostLeaf):
        return {
            "op": post.ineq.op,
            "coeffs": [rat_str(c) for c in post.ineq.coeffs],
            "const": rat_str(post.ineq.const),
        }
    kind = "and" if isinstance(post, PostAnd) else "or"
    return {kind: [post_to_obj(c) for c in post.children]}


def post_from_obj(obj):
    if "op" in obj:
        return PostLeaf(LinIneq(
            tuple(rat(c) for c in obj["coeffs"]), rat(obj["const"]), obj["op"]
        ))
    if "and" in obj:
        return PostAnd(tuple(post_from_obj(c) for c in obj["and"]))
    return PostOr(tuple(post_from_obj(c) for c in obj["or"]))


def query_to_obj(q: Query) -> dict:
    return {
        "name": q.name,
        "network": q.network,
        "property": q.property_name,
        "instance": q.instance,
        "polarity": q.polarity,
        "input_box": [[rat_str(lo), rat_str(hi)] for lo, hi in q.input_box],
        "input_linear": [
            {"op": i.op, "coeffs": [rat_str(c) for c in i.coeffs],
             "const": rat_str(i.const)}
            for i in q.input_linear
        ],
        "post": post_to_obj(q.post),
        "embedding": {
            "scale": [rat_str(s) for s in q.embedding.scale],
            "shift": [rat_str(t) for t in q.embedding.shift],
            "var_index": list(q.embedding.var_index),
            "onehot": [
                [j, [rat_str(v) for v in values]]
                for j, values in q.embedding.onehot
            ],
            "unembed": list(q.embedding.unembed),
        } if q.embedding else None,
        "warnings": list(q.warnings),
    }


def query_from_obj(obj: dict) -> Query:
    emb_obj = obj.get("embedding")
    emb = None
    if emb_obj:
        emb = EmbeddingSpec(
            scale=tuple(rat(s) for s in emb_obj["scale"]),
            shift=tuple(rat(t) for t in emb_obj["shift"]),
            var_index=tuple(emb_obj["var_index"]),
            onehot=tuple(
                (j, tuple(rat(v) for v in values))
                for j, values in emb_obj.get("onehot", [])
            ),
            unembed=tuple(emb_obj.get("unembed", ("identity",))),
        )
    return Query(
        name=obj["name"], network=obj["network"],
        input_box=tuple(
            (rat(lo), rat(hi)) for lo, hi in obj["input_box"]
        ),
        input_linear=tuple(
            LinIneq(tuple(rat(c) for c in i["coeffs"]), rat(i["const"]),
                    i["op"])
            for i in obj.get("input_linear", [])
        ),
        post=post_from_obj(obj["post"]),
        polarity=obj.get("polarity", "find_counterexample"),
        embedding=emb,
        property_name=obj.get("property", ""),
        instance=obj.get("instance", 0),
        warnings=tuple(obj.get("warnings", ())),
    )


__all__ = [
    "LinIneq", "PostLeaf", "PostAnd", "PostOr", "post_leaves",
    "EmbeddingSpec", "identity_embedding", "Query", "LowerError",
    "lower", "lift_verdict", "ProblemSpaceVerdict",
    "expand_property", "peel_universals", "make_context", "global_scope",
    "query_to_obj", "query_from_obj", "post_to_obj", "post_from_obj",
    "TRIVIAL_TRUE", "TRIVIAL_FALSE",
]
