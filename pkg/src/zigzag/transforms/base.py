"""Shared machinery for the code transformation passes.

A pass receives a parsed program whose statements carry LineIds and
returns a draft program in which every statement's ``origin`` slot
names the input statement it was derived from (None for generated
scaffolding).  ``finalize`` renumbers the draft, validates it, and
builds the LineMap original-LineId -> set of new LineIds.  Passes never
mutate their input.
"""
from __future__ import annotations

import logging
from typing import Callable, Iterable, Optional

from ..lang.nodes import (
    ArrayAssign,
    ArrayDecl,
    Assign,
    BinOp,
    BUILTINS,
    Call,
    CallStmt,
    Expr,
    For,
    FunctionDef,
    If,
    Index,
    IntLit,
    Program,
    Return,
    Stmt,
    StrLit,
    Var,
    VarDecl,
    While,
    walk_program,
    walk_statements,
)
from ..lang.parser import validate_program

log = logging.getLogger("zigzag.transforms")

LineMap = dict[int, set[int]]

ENTRY_NAME = "main"
GENERATED_PREFIX = "__zz_"


class TransformError(Exception):
    pass


class InapplicableTransform(TransformError):
    def __init__(self, kind: str, reason: str) -> None:
        super().__init__(f"{kind} not applicable: {reason}")
        self.kind = kind
        self.reason = reason


# --------------------------------------------------------------------------
# cloning with origin bookkeeping

def clone_expr(e: Expr) -> Expr:
    t = type(e)
    if t is IntLit:
        return IntLit(e.value)
    if t is StrLit:
        return StrLit(e.value)
    if t is Var:
        return Var(e.name)
    if t is BinOp:
        return BinOp(e.op, clone_expr(e.left), clone_expr(e.right))
    if t is Index:
        return Index(e.name, clone_expr(e.index))
    if t is Call:
        return Call(e.name, [clone_expr(a) for a in e.args])
    raise TypeError(f"unknown expression node {t.__name__}")


def source_origin(st: Stmt) -> Optional[int]:
    """Input LineId a statement descends from, chaining through drafts.

    Statements that were never numbered (generated, line_id < 1) have no
    origin; mapping them would invent LineMap keys.
    """
    if st.origin is not None:
        return st.origin
    return st.line_id if st.line_id >= 1 else None


def _book(new: Stmt, src: Stmt) -> Stmt:
    new.vuln = src.vuln
    new.origin = source_origin(src)
    return new


def clone_stmt(st: Stmt) -> Stmt:
    t = type(st)
    if t is VarDecl:
        new: Stmt = VarDecl(st.name, None if st.init is None else clone_expr(st.init))
    elif t is ArrayDecl:
        new = ArrayDecl(st.name, st.size)
    elif t is Assign:
        new = Assign(st.name, clone_expr(st.value))
    elif t is ArrayAssign:
        new = ArrayAssign(st.name, clone_expr(st.index), clone_expr(st.value))
    elif t is If:
        new = If(clone_expr(st.cond), clone_block(st.then_body), clone_block(st.else_body))
    elif t is While:
        new = While(clone_expr(st.cond), clone_block(st.body))
    elif t is For:
        new = For(
            None if st.init is None else clone_stmt(st.init),
            None if st.cond is None else clone_expr(st.cond),
            None if st.step is None else clone_stmt(st.step),
            clone_block(st.body),
        )
    elif t is Return:
        new = Return(None if st.value is None else clone_expr(st.value))
    elif t is CallStmt:
        new = CallStmt(clone_expr(st.call))  # type: ignore[arg-type]
    else:
        raise TypeError(f"unknown statement node {t.__name__}")
    return _book(new, st)


def clone_block(stmts: list[Stmt]) -> list[Stmt]:
    return [clone_stmt(s) for s in stmts]


def clone_function(fn: FunctionDef) -> FunctionDef:
    return FunctionDef(fn.name, list(fn.params), clone_block(fn.body))


def clone_program(program: Program) -> Program:
    return Program([clone_function(f) for f in program.functions])


def generated(st: Stmt) -> Stmt:
    """Mark a freshly built statement as transform scaffolding."""
    st.origin = None
    st.vuln = False
    return st


# --------------------------------------------------------------------------
# identifiers

def collect_identifiers(program: Program) -> set[str]:
    names: set[str] = set(BUILTINS)
    for fn in program.functions:
        names.add(fn.name)
        names.update(fn.params)
        for st in walk_statements(fn.body):
            if isinstance(st, (VarDecl, ArrayDecl)):
                names.add(st.name)
    return names


class Namer:
    """Deterministic generator of fresh __zz_ names for one output program."""

    def __init__(self, program: Program) -> None:
        self.taken = collect_identifiers(program)

    def fresh(self, base: str) -> str:
        n = 0
        while True:
            name = f"{GENERATED_PREFIX}{base}{n}"
            if name not in self.taken:
                self.taken.add(name)
                return name
            n += 1


# --------------------------------------------------------------------------
# expression rewriting over statement expression slots

def map_stmt_exprs(st: Stmt, f: Callable[[Expr], Expr]) -> None:
    """Apply f to each expression slot of st, in place (statement-local)."""
    t = type(st)
    if t is VarDecl:
        if st.init is not None:
            st.init = f(st.init)
    elif t is Assign:
        st.value = f(st.value)
    elif t is ArrayAssign:
        st.index = f(st.index)
        st.value = f(st.value)
    elif t is If:
        st.cond = f(st.cond)
    elif t is While:
        st.cond = f(st.cond)
    elif t is For:
        if st.cond is not None:
            st.cond = f(st.cond)
    elif t is Return:
        if st.value is not None:
            st.value = f(st.value)
    elif t is CallStmt:
        st.call = f(st.call)  # type: ignore[assignment]


def rewrite_expressions(program: Program, f: Callable[[Expr], Expr]) -> None:
    for fn in program.functions:
        for st in walk_statements(fn.body):
            map_stmt_exprs(st, f)


def mentioned_names(stmts: Iterable[Stmt]) -> set[str]:
    """Names used by statements: expression reads plus assignment targets.

    Declaration names are not uses; nested statements are included.
    """
    from ..lang.nodes import expr_names, stmt_expressions

    out: set[str] = set()
    for st in stmts:
        for sub in walk_statements([st]):
            for e in stmt_expressions(sub):
                out |= expr_names(e)
            if isinstance(sub, (Assign, ArrayAssign)):
                out.add(sub.name)
    return out


# --------------------------------------------------------------------------
# finalize

def finalize(draft: Program, kind: str, input_line_ids: Iterable[int]) -> tuple[Program, LineMap]:
    """Renumber a draft, build its LineMap, and validate the result."""
    from ..lang.nodes import renumber

    renumber(draft)
    line_map: LineMap = {}
    for st in walk_program(draft):
        if st.origin is not None:
            line_map.setdefault(st.origin, set()).add(st.line_id)
        st.origin = None
    missing = set(input_line_ids) - set(line_map)
    if missing:
        raise TransformError(f"{kind} dropped statements with LineIds {sorted(missing)}")
    validate_program(draft)
    for fn in draft.functions:
        if fn.name.startswith("__zz") and not fn.name.startswith(GENERATED_PREFIX):
            raise TransformError(f"generated name {fn.name!r} outside the documented prefix")
    return draft, line_map
