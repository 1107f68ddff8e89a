"""Fragment extraction: the units a detector classifies.

Two granularities:

* "function": one fragment per function, text is the whole function.
* "slice": one fragment per array-indexing statement, text is the
  backward closure over statements that define any name the slice
  already mentions (all occurrences, not just reaching definitions),
  rendered in source order.  Only simple statements participate;
  loop and branch headers are control context and stay out.

A fragment is labeled 1 when it contains a flagged statement.  The
fragment carries its program's split so later stages can refuse to fit
anything on test data.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .corpus import CorpusProgram
from .lang.nodes import (
    ArrayAssign,
    ArrayDecl,
    Assign,
    CallStmt,
    FunctionDef,
    Index,
    Return,
    Stmt,
    VarDecl,
    expr_names,
    stmt_expressions,
    walk_expr,
    walk_statements,
)
from .lang.printer import format_function, format_statements

FUNCTION_GRANULARITY = "function"
SLICE_GRANULARITY = "slice"
GRANULARITIES = (FUNCTION_GRANULARITY, SLICE_GRANULARITY)

_SIMPLE = (VarDecl, ArrayDecl, Assign, ArrayAssign, Return, CallStmt)


class FragmentError(Exception):
    pass


@dataclass(slots=True)
class Fragment:
    id: str
    program_id: str
    function: str
    granularity: str
    text: str
    label: int
    split: str


def _defined_names(st: Stmt) -> set[str]:
    if isinstance(st, (VarDecl, ArrayDecl, Assign)):
        return {st.name}
    if isinstance(st, ArrayAssign):
        # an element write defines (part of) the array
        return {st.name}
    return set()


def _used_names(st: Stmt) -> set[str]:
    used: set[str] = set()
    for e in stmt_expressions(st):
        used |= expr_names(e)
    if isinstance(st, ArrayAssign):
        used.add(st.name)
    return used


def _indexes_array(st: Stmt) -> bool:
    if isinstance(st, ArrayAssign):
        return True
    return any(
        isinstance(sub, Index) for e in stmt_expressions(st) for sub in walk_expr(e)
    )


def slice_statements(fn: FunctionDef) -> list[list[Stmt]]:
    """One backward slice per array-indexing simple statement."""
    simple = [st for st in walk_statements(fn.body) if isinstance(st, _SIMPLE)]
    defs: dict[str, list[Stmt]] = {}
    for st in simple:
        for name in _defined_names(st):
            defs.setdefault(name, []).append(st)

    slices: list[list[Stmt]] = []
    seen_keys: set[frozenset] = set()
    for crit in simple:
        if not _indexes_array(crit):
            continue
        acc = {id(crit): crit}
        work = [crit]
        while work:
            st = work.pop()
            for name in _used_names(st):
                for d in defs.get(name, []):
                    if id(d) not in acc:
                        acc[id(d)] = d
                        work.append(d)
        ordered = sorted(acc.values(), key=lambda s: s.line_id)
        key = frozenset(s.line_id for s in ordered)
        if key in seen_keys:
            continue
        seen_keys.add(key)
        slices.append(ordered)
    return slices


def extract_fragments(item: CorpusProgram, granularity: str) -> list[Fragment]:
    if granularity not in GRANULARITIES:
        raise FragmentError(f"unknown granularity {granularity!r}")
    program = item.program()
    out: list[Fragment] = []
    if granularity == FUNCTION_GRANULARITY:
        for fn in program.functions:
            label = int(any(st.vuln for st in walk_statements(fn.body)))
            out.append(
                Fragment(
                    id=f"{item.id}/{fn.name}",
                    program_id=item.id,
                    function=fn.name,
                    granularity=granularity,
                    text=format_function(fn),
                    label=label,
                    split=item.split,
                )
            )
        return out
    for fn in program.functions:
        for k, stmts in enumerate(slice_statements(fn)):
            label = int(any(st.vuln for st in stmts))
            out.append(
                Fragment(
                    id=f"{item.id}/{fn.name}/s{k}",
                    program_id=item.id,
                    function=fn.name,
                    granularity=granularity,
                    text=format_statements(stmts),
                    label=label,
                    split=item.split,
                )
            )
    return out


def extract_corpus_fragments(
    programs: Iterable[CorpusProgram], granularity: str
) -> list[Fragment]:
    out: list[Fragment] = []
    for item in programs:
        out.extend(extract_fragments(item, granularity))
    return out
