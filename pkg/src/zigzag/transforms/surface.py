"""Surface-level passes: string literal encoding and call-signature noise.

ct1 (EncodeStrings): every string literal occurrence becomes a call to
a generated zero-argument builder function that reassembles the literal
from concatenated pieces.

ct2 (RndArgs): every non-entry function gets its parameter list
permuted and a bogus trailing parameter appended; all call sites are
rewritten to match, passing seeded literal values for the bogus slot.
"""
from __future__ import annotations

import numpy as np

from ..lang.nodes import (
    BinOp,
    Call,
    Expr,
    FunctionDef,
    Index,
    IntLit,
    Program,
    Return,
    StrLit,
    walk_statements,
)
from .base import (
    ENTRY_NAME,
    InapplicableTransform,
    Namer,
    clone_program,
    generated,
    map_stmt_exprs,
)


def _split_points(rng: np.random.Generator, length: int) -> list[int]:
    if length < 2:
        return []
    pieces = int(rng.integers(2, min(3, length) + 1))
    cuts = sorted(int(c) for c in rng.choice(np.arange(1, length), size=pieces - 1, replace=False))
    return cuts


def _builder_body(value: str, cuts: list[int]) -> Expr:
    bounds = [0] + cuts + [len(value)]
    pieces = [value[a:b] for a, b in zip(bounds, bounds[1:])]
    expr: Expr = StrLit(pieces[0])
    for piece in pieces[1:]:
        expr = BinOp("+", expr, StrLit(piece))
    return expr


def pass_ct1(program: Program, rng: np.random.Generator) -> Program:
    draft = clone_program(program)
    builders: list[FunctionDef] = []
    namer = Namer(draft)
    counter = 0

    def encode(e: Expr) -> Expr:
        nonlocal counter
        if isinstance(e, StrLit):
            name = namer.fresh("s")
            ret = generated(Return(_builder_body(e.value, _split_points(rng, len(e.value)))))
            builders.append(FunctionDef(name, [], [ret]))
            counter += 1
            return Call(name, [])
        if isinstance(e, BinOp):
            e.left = encode(e.left)
            e.right = encode(e.right)
        elif isinstance(e, Call):
            e.args = [encode(a) for a in e.args]
        elif isinstance(e, Index):
            e.index = encode(e.index)
        return e

    for fn in draft.functions:
        for st in walk_statements(fn.body):
            map_stmt_exprs(st, encode)
    if counter == 0:
        raise InapplicableTransform("ct1", "program has no string literals")
    draft.functions.extend(builders)
    return draft


def pass_ct2(program: Program, rng: np.random.Generator) -> Program:
    draft = clone_program(program)
    namer = Namer(draft)
    targets = [fn for fn in draft.functions if fn.name != ENTRY_NAME]
    if not targets:
        raise InapplicableTransform("ct2", "no function other than the entry")

    plans: dict[str, np.ndarray] = {}
    for fn in targets:
        perm = rng.permutation(len(fn.params))
        plans[fn.name] = perm
        fn.params = [fn.params[i] for i in perm] + [namer.fresh("x")]

    def rewrite(e: Expr) -> Expr:
        if isinstance(e, Call) and e.name in plans:
            e.args = [rewrite(a) for a in e.args]
            perm = plans[e.name]
            e.args = [e.args[i] for i in perm] + [IntLit(int(rng.integers(0, 100)))]
            return e
        if isinstance(e, BinOp):
            e.left = rewrite(e.left)
            e.right = rewrite(e.right)
        elif isinstance(e, Call):
            e.args = [rewrite(a) for a in e.args]
        elif isinstance(e, Index):
            e.index = rewrite(e.index)
        return e

    for fn in draft.functions:
        for st in walk_statements(fn.body):
            map_stmt_exprs(st, rewrite)
    return draft
