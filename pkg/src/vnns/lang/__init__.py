"""Specification language front end: lexer, parser, types, printer."""

from .lexer import ParseError, tokenize
from .parser import parse, parse_expr
from .pretty import pretty, pretty_decl, pretty_expr, pretty_type
from .typecheck import (
    TypeCheckError,
    TypeCheckFailure,
    TypedModule,
    assert_well_typed,
    typecheck,
)

__all__ = [
    "parse", "parse_expr", "ParseError", "tokenize",
    "pretty", "pretty_decl", "pretty_expr", "pretty_type",
    "typecheck", "TypedModule", "TypeCheckError", "TypeCheckFailure",
    "assert_well_typed",
]
