"""Recursive-descent parser for the specification language.

The grammar is LL with bounded lookahead and layout-insensitive: a new
top-level item is recognized by the token shape `name :` (a signature) or
`name p1 .. pk =` (a definition), which is what ends the previous item's
body expression. The full grammar is documented in docs/language.md.
"""

from __future__ import annotations

from ..rat import rat
from . import ast as A
from .lexer import ParseError, Token, tokenize


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at_sym(self, text: str, ahead: int = 0) -> bool:
        tok = self.peek(ahead)
        return tok.kind == "SYM" and tok.text == text

    def at_kw(self, text: str, ahead: int = 0) -> bool:
        tok = self.peek(ahead)
        return tok.kind == "KW" and tok.text == text

    def expect_sym(self, text: str) -> Token:
        if not self.at_sym(text):
            self.fail(f"expected {text!r}", [text])
        return self.next()

    def expect_kw(self, text: str) -> Token:
        if not self.at_kw(text):
            self.fail(f"expected keyword {text!r}", [text])
        return self.next()

    def expect_ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok.kind != "IDENT":
            self.fail(f"expected {what}", ["identifier"])
        return self.next()

    def fail(self, message: str, expected=()):
        tok = self.peek()
        raise ParseError(f"{message}, found {tok}", tok.line, tok.col, expected)

    def span_from(self, start: Token) -> A.Span:
        last = self.toks[max(self.pos - 1, 0)]
        return A.Span(start.line, start.col, last.line, last.col + len(last.text))

    # -- module / declarations ---------------------------------------------

    def parse_module(self) -> A.SpecModule:
        decls = []
        while self.peek().kind != "EOF":
            decls.append(self.parse_decl())
        return A.SpecModule(decls=tuple(decls))

    def parse_decl(self) -> A.Decl:
        start = self.peek()
        if self.at_kw("type"):
            return self.parse_type_alias()
        if start.kind == "AT":
            return self.parse_annotated()
        return self.parse_def(role=None)

    def parse_type_alias(self) -> A.TypeAlias:
        start = self.expect_kw("type")
        name = self.expect_ident("type name").text
        self.expect_sym("=")
        ty = self.parse_type()
        return A.TypeAlias(name=name, ty=ty, span=self.span_from(start))

    def parse_annotated(self) -> A.Decl:
        at = self.next()
        args = self.parse_annotation_args()
        name_tok = self.expect_ident()
        self.expect_sym(":")
        ty = self.parse_type()
        span = self.span_from(at)
        kind = at.text

        if kind == "network":
            self._no_args(args, at)
            if not isinstance(ty, A.FunType) or len(ty.params) != 1:
                raise ParseError(
                    "@network requires a type of the form In -> Out",
                    at.line, at.col,
                )
            return A.NetworkDecl(
                name=name_tok.text, in_ty=ty.params[0], out_ty=ty.result, span=span
            )
        if kind == "dataset":
            allowed = {"lower", "upper"}
            self._check_args(args, allowed, at)
            if not (isinstance(ty, A.TensorType) and ty.shape):
                raise ParseError(
                    "@dataset requires a type of the form Tensor T [n]",
                    at.line, at.col,
                )
            elem = A.TensorType(ty.elem, ty.shape[1:])
            return A.DatasetDecl(
                name=name_tok.text,
                elem_ty=elem,
                length=ty.shape[0],
                lower=args.get("lower"),
                upper=args.get("upper"),
                span=span,
            )
        if kind == "parameter":
            self._check_args(args, {"infer"}, at)
            return A.ParameterDecl(
                name=name_tok.text,
                ty=ty,
                infer=bool(args.get("infer", False)),
                span=span,
            )
        if kind == "property":
            self._no_args(args, at)
            body_name = self.expect_ident("property body")
            if body_name.text != name_tok.text:
                raise ParseError(
                    f"property body must define {name_tok.text!r},"
                    f" found {body_name.text!r}",
                    body_name.line, body_name.col,
                )
            self.expect_sym("=")
            body = self.parse_expr()
            return A.PropertyDecl(
                name=name_tok.text, ty=ty, body=body, span=self.span_from(at)
            )
        # embedding / unembedding are ordinary Defs with a role marker
        self._no_args(args, at)
        return self._finish_def(at, name_tok, ty, role=kind)

    def parse_def(self, role) -> A.Def:
        start = self.peek()
        name_tok = self.expect_ident()
        self.expect_sym(":")
        ty = self.parse_type()
        return self._finish_def(start, name_tok, ty, role)

    def _finish_def(self, start, name_tok, ty, role) -> A.Def:
        body_name = self.expect_ident("definition")
        if body_name.text != name_tok.text:
            raise ParseError(
                f"definition must repeat the name {name_tok.text!r},"
                f" found {body_name.text!r}",
                body_name.line, body_name.col,
            )
        params = []
        while self.peek().kind == "IDENT":
            params.append(self.next().text)
        self.expect_sym("=")
        body = self.parse_expr()
        return A.Def(
            name=name_tok.text, sig=ty, params=tuple(params), body=body,
            role=role, span=self.span_from(start),
        )

    def parse_annotation_args(self) -> dict:
        if not self.at_sym("("):
            return {}
        self.next()
        args = {}
        while True:
            key = self.expect_ident("annotation argument").text
            self.expect_sym("=")
            args[key] = self.parse_annotation_value()
            if self.at_sym(","):
                self.next()
                continue
            break
        self.expect_sym(")")
        return args

    def parse_annotation_value(self):
        if self.at_kw("True"):
            self.next()
            return True
        if self.at_kw("False"):
            self.next()
            return False
        neg = False
        if self.at_sym("-"):
            self.next()
            neg = True
        tok = self.peek()
        if tok.kind in ("NAT", "DECIMAL"):
            self.next()
            value = rat(tok.text)
            return -value if neg else value
        self.fail("expected annotation value")

    def _no_args(self, args, at):
        if args:
            raise ParseError(
                f"@{at.text} takes no arguments", at.line, at.col
            )

    def _check_args(self, args, allowed, at):
        for key in args:
            if key not in allowed:
                raise ParseError(
                    f"unknown @{at.text} argument {key!r}", at.line, at.col
                )

    # -- types ---------------------------------------------------------------

    def parse_type(self) -> A.Type:
        left = self.parse_atomic_type()
        if self.at_sym("->"):
            self.next()
            rest = self.parse_type()
            if isinstance(rest, A.FunType):
                return A.FunType((left, *rest.params), rest.result)
            return A.FunType((left,), rest)
        return left

    def parse_atomic_type(self) -> A.Type:
        tok = self.peek()
        if self.at_kw("Rat"):
            self.next()
            return A.RAT_SCALAR
        if self.at_kw("Bool"):
            self.next()
            return A.BOOL_SCALAR
        if self.at_kw("Nat"):
            self.next()
            return A.NatType()
        if self.at_kw("Index"):
            self.next()
            return A.TensorType(A.index_elem(self.parse_dim()))
        if self.at_kw("Tensor"):
            self.next()
            elem_ty = self.parse_atomic_type()
            self.expect_sym("[")
            dims = [self.parse_dim()]
            while self.at_sym(","):
                self.next()
                dims.append(self.parse_dim())
            self.expect_sym("]")
            if isinstance(elem_ty, A.TensorType):
                return A.TensorType(elem_ty.elem, tuple(dims) + elem_ty.shape)
            self.fail("tensor element must be a tensor or scalar type")
        if tok.kind == "IDENT":
            # Type alias reference, resolved during checking.
            self.next()
            return A.TensorType(A.Elem("alias", tok.text))
        if self.at_sym("("):
            self.next()
            ty = self.parse_type()
            self.expect_sym(")")
            return ty
        self.fail("expected a type")

    def parse_dim(self) -> A.Dim:
        tok = self.peek()
        if tok.kind == "NAT":
            self.next()
            return int(tok.text)
        if tok.kind == "IDENT":
            self.next()
            return tok.text
        self.fail("expected a dimension (number or parameter name)")

    # -- expressions ---------------------------------------------------------

    def parse_expr(self) -> A.Expr:
        if self.at_kw("forall") or self.at_kw("exists"):
            return self.parse_quant()
        if self.at_kw("foreach"):
            return self.parse_foreach()
        if self.at_kw("let"):
            return self.parse_let()
        return self.parse_implies()

    def parse_quant(self) -> A.Quant:
        start = self.next()
        binders = []
        while True:
            if self.peek().kind == "IDENT":
                binders.append((self.next().text, None))
            elif self.at_sym("("):
                self.next()
                name = self.expect_ident("binder").text
                self.expect_sym(":")
                ty = self.parse_type()
                self.expect_sym(")")
                binders.append((name, ty))
            else:
                break
        if not binders:
            self.fail("expected at least one quantifier binder")
        self.expect_sym(".")
        body = self.parse_expr()
        return A.Quant(
            kind=start.text, binders=tuple(binders), body=body,
            span=self.span_from(start),
        )

    def parse_foreach(self) -> A.Foreach:
        start = self.expect_kw("foreach")
        binder = self.expect_ident("foreach binder").text
        self.expect_sym(".")
        body = self.parse_expr()
        return A.Foreach(binder=binder, body=body, span=self.span_from(start))

    def parse_let(self) -> A.Let:
        start = self.expect_kw("let")
        name = self.expect_ident("let binder").text
        self.expect_sym("=")
        value = self.parse_implies()
        self.expect_kw("in")
        body = self.parse_expr()
        return A.Let(name=name, value=value, body=body, span=self.span_from(start))

    def parse_implies(self) -> A.Expr:
        start = self.peek()
        left = self.parse_or()
        if self.at_sym("=>"):
            self.next()
            right = (
                self.parse_expr()
                if self.peek().kind == "KW"
                and self.peek().text in ("forall", "exists", "let")
                else self.parse_implies()
            )
            return A.Logic(op="=>", args=(left, right), span=self.span_from(start))
        return left

    def parse_or(self) -> A.Expr:
        start = self.peek()
        left = self.parse_and()
        while self.at_kw("or"):
            self.next()
            right = self.parse_and()
            left = A.Logic(op="or", args=(left, right), span=self.span_from(start))
        return left

    def parse_and(self) -> A.Expr:
        start = self.peek()
        left = self.parse_not()
        while self.at_kw("and"):
            self.next()
            right = self.parse_not()
            left = A.Logic(op="and", args=(left, right), span=self.span_from(start))
        return left

    def parse_not(self) -> A.Expr:
        if self.at_kw("not"):
            start = self.next()
            arg = self.parse_not()
            return A.Logic(op="not", args=(arg,), span=self.span_from(start))
        return self.parse_cmp()

    _CMP_OPS = ("<=", "<", ">=", ">", "==", "!=")

    def parse_cmp(self) -> A.Expr:
        start = self.peek()
        first = self.parse_add()
        comparisons = []
        operand = first
        while self.peek().kind == "SYM" and self.peek().text in self._CMP_OPS:
            op = self.next().text
            rhs = self.parse_add()
            comparisons.append(
                A.Cmp(op=op, lhs=operand, rhs=rhs, span=self.span_from(start))
            )
            operand = rhs
        if not comparisons:
            return first
        if len(comparisons) == 1:
            return comparisons[0]
        # Chained comparison sugar: a <= b <= c is (a <= b) and (b <= c).
        result = comparisons[0]
        for nxt in comparisons[1:]:
            result = A.Logic(op="and", args=(result, nxt), span=self.span_from(start))
        return result

    def parse_add(self) -> A.Expr:
        start = self.peek()
        left = self.parse_mul()
        while self.at_sym("+") or self.at_sym("-"):
            op = self.next().text
            right = self.parse_mul()
            left = A.Arith(op=op, args=(left, right), span=self.span_from(start))
        return left

    def parse_mul(self) -> A.Expr:
        start = self.peek()
        left = self.parse_neg()
        while self.at_sym("*") or self.at_sym("/"):
            op = self.next().text
            right = self.parse_neg()
            left = A.Arith(op=op, args=(left, right), span=self.span_from(start))
        return left

    def parse_neg(self) -> A.Expr:
        if self.at_sym("-"):
            start = self.next()
            arg = self.parse_neg()
            return A.Arith(op="neg", args=(arg,), span=self.span_from(start))
        return self.parse_index()

    def parse_index(self) -> A.Expr:
        start = self.peek()
        left = self.parse_app()
        while self.at_sym("!"):
            self.next()
            idx = self.parse_atom()
            left = A.TensorIndex(tensor=left, index=idx, span=self.span_from(start))
        return left

    def parse_app(self) -> A.Expr:
        start = self.peek()
        head = self.parse_atom()
        args = []
        while self._starts_atom() and not self._starts_new_item():
            args.append(self.parse_atom())
        if not args:
            return head
        if not isinstance(head, A.Var):
            self.fail("only named definitions and networks can be applied")
        return A.Apply(
            fn=head.name, args=tuple(args), span=self.span_from(start)
        )

    def _starts_atom(self) -> bool:
        tok = self.peek()
        if tok.kind in ("IDENT", "NAT", "DECIMAL"):
            return True
        if tok.kind == "KW" and tok.text in ("True", "False"):
            return True
        return self.at_sym("(")

    def _starts_new_item(self) -> bool:
        """Lookahead: does the upcoming identifier begin a new declaration?

        Every top-level item opens with a signature (`name :`), a `type`
        alias, or an annotation; definition lines are consumed right after
        their signature. So one token of lookahead for `:` suffices.
        """
        return self.peek().kind == "IDENT" and self.at_sym(":", 1)

    def parse_atom(self) -> A.Expr:
        tok = self.peek()
        if tok.kind == "NAT":
            self.next()
            return A.IntLit(value=int(tok.text), span=tok.span)
        if tok.kind == "DECIMAL":
            self.next()
            return A.RatLit(value=rat(tok.text), span=tok.span)
        if self.at_kw("True") or self.at_kw("False"):
            self.next()
            return A.BoolLit(value=tok.text == "True", span=tok.span)
        if tok.kind == "IDENT":
            self.next()
            return A.Var(name=tok.text, span=tok.span)
        if self.at_sym("("):
            self.next()
            inner = self.parse_expr()
            self.expect_sym(")")
            return inner
        self.fail("expected an expression")


def parse(source: str) -> A.SpecModule:
    """Parse specification source text into an untyped SpecModule."""
    parser = _Parser(tokenize(source))
    return parser.parse_module()


def parse_expr(source: str) -> A.Expr:
    """Parse a single expression (used by tests and tooling)."""
    parser = _Parser(tokenize(source))
    expr = parser.parse_expr()
    if parser.peek().kind != "EOF":
        parser.fail("unexpected trailing input")
    return expr


__all__ = ["parse", "parse_expr", "ParseError"]
