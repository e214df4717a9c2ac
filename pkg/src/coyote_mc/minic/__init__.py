"""MiniC frontend: lexer, parser, linker, and the typed AST."""

from .parser import SourceUnit, parse_text, parse_unit
from .linker import Program, link_program, list_functions

__all__ = [
    "SourceUnit",
    "parse_text",
    "parse_unit",
    "Program",
    "link_program",
    "list_functions",
]
