"""Errors raised by the mini-language front end and interpreter."""
from __future__ import annotations


class MiniLangError(Exception):
    pass


class SourceError(MiniLangError):
    """An error attributable to a source position."""

    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"{message} (line {line}, col {col})")
        self.message = message
        self.line = line
        self.col = col


class SyntaxErrorML(SourceError):
    pass


class UndeclaredIdentifierError(SourceError):
    pass


class ValidationErrorML(SourceError):
    """Static violations other than undeclared identifiers (arity, redeclaration)."""


class UnknownEntryError(MiniLangError):
    def __init__(self, entry: str) -> None:
        super().__init__(f"unknown entry function: {entry!r}")
        self.entry = entry
