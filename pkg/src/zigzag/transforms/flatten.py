"""Control-flow flattening (ct3).

Each eligible function body is lowered to numbered basic blocks driven
by a dispatch loop over a program-counter variable; block numbering is
shuffled with the pass seed.  Declarations are hoisted to a prologue
and their initializations stay in place as assignments, so declarations
inside loop bodies keep their per-iteration reset semantics.  A
function is eligible when it contains control flow and none of its
arrays are declared inside a loop or share a name across sibling
scopes.
"""
from __future__ import annotations

import numpy as np

from ..lang.nodes import (
    ArrayDecl,
    Assign,
    BinOp,
    For,
    FunctionDef,
    If,
    IntLit,
    Program,
    Return,
    Stmt,
    Var,
    VarDecl,
    While,
    walk_statements,
)
from .base import (
    InapplicableTransform,
    Namer,
    clone_block,
    clone_expr,
    clone_program,
    clone_stmt,
    generated,
    source_origin,
)


def has_control_flow(fn: FunctionDef) -> bool:
    return any(isinstance(st, (If, While, For)) for st in walk_statements(fn.body))


def _arrays_ok(fn: FunctionDef) -> bool:
    names: set[str] = set()

    def scan(stmts: list[Stmt], in_loop: bool) -> bool:
        for st in stmts:
            if isinstance(st, ArrayDecl):
                if in_loop or st.name in names:
                    return False
                names.add(st.name)
            elif isinstance(st, If):
                if not scan(st.then_body, in_loop) or not scan(st.else_body, in_loop):
                    return False
            elif isinstance(st, While):
                if not scan(st.body, True):
                    return False
            elif isinstance(st, For):
                if st.init is not None and not scan([st.init], in_loop):
                    return False
                if not scan(st.body, True):
                    return False
        return True

    return scan(fn.body, False)


def flattenable(fn: FunctionDef) -> bool:
    return has_control_flow(fn) and _arrays_ok(fn)


class _Lowerer:
    """Compiles a statement list into jump-threaded basic blocks."""

    EXIT = -1

    def __init__(self, pc: str, ret: str) -> None:
        self.pc = pc
        self.ret = ret
        self.blocks: list[list[Stmt]] = []
        self.jumps: list[tuple[IntLit, int]] = []  # literal to patch -> provisional block id

    def new_block(self) -> int:
        self.blocks.append([])
        return len(self.blocks) - 1

    def _jump_stmt(self, target: int) -> Stmt:
        lit = IntLit(target)
        if target != self.EXIT:
            self.jumps.append((lit, target))
        return generated(Assign(self.pc, lit))

    def jump(self, block: int, target: int) -> None:
        self.blocks[block].append(self._jump_stmt(target))

    def cond_jump(self, block: int, cond, then_target: int, else_target: int, src: Stmt) -> None:
        st = If(clone_expr(cond), [self._jump_stmt(then_target)], [self._jump_stmt(else_target)])
        st.origin = source_origin(src)
        st.vuln = src.vuln
        self.blocks[block].append(st)

    def compile(self, stmts: list[Stmt], block: int, follow: int, hoist: dict[str, Stmt]) -> None:
        """Emit stmts into `block`, ending with a jump to `follow`."""
        cur = block
        for i, st in enumerate(stmts):
            rest = stmts[i + 1 :]
            if isinstance(st, VarDecl):
                if st.name not in hoist:
                    decl = VarDecl(st.name)
                    decl.origin = source_origin(st)
                    hoist[st.name] = decl
                reset = Assign(st.name, clone_expr(st.init) if st.init is not None else IntLit(0))
                reset.origin = source_origin(st)
                reset.vuln = st.vuln
                self.blocks[cur].append(reset)
            elif isinstance(st, ArrayDecl):
                if st.name not in hoist:
                    hoist[st.name] = clone_stmt(st)
                # eligibility guarantees single declaration outside loops
            elif isinstance(st, If):
                then_b = self.new_block()
                else_b = self.new_block()
                cont = self.new_block()
                self.cond_jump(cur, st.cond, then_b, else_b, st)
                self.compile(st.then_body, then_b, cont, hoist)
                self.compile(st.else_body, else_b, cont, hoist)
                self.compile(rest, cont, follow, hoist)
                return
            elif isinstance(st, While):
                header = self.new_block()
                body_b = self.new_block()
                cont = self.new_block()
                self.jump(cur, header)
                self.cond_jump(header, st.cond, body_b, cont, st)
                self.compile(st.body, body_b, header, hoist)
                self.compile(rest, cont, follow, hoist)
                return
            elif isinstance(st, For):
                if st.init is not None:
                    self.compile([st.init], cur, -2, hoist)  # -2: no jump, see below
                header = self.new_block()
                body_b = self.new_block()
                cont = self.new_block()
                self.jump(cur, header)
                cond = st.cond if st.cond is not None else IntLit(1)
                self.cond_jump(header, cond, body_b, cont, st)
                body = list(st.body) + ([st.step] if st.step is not None else [])
                self.compile(body, body_b, header, hoist)
                self.compile(rest, cont, follow, hoist)
                return
            elif isinstance(st, Return):
                if st.value is not None:
                    ret = Assign(self.ret, clone_expr(st.value))
                    ret.origin = source_origin(st)
                    ret.vuln = st.vuln
                    self.blocks[cur].append(ret)
                    exit_jump = self._jump_stmt(self.EXIT)
                    exit_jump.origin = ret.origin
                else:
                    exit_jump = self._jump_stmt(self.EXIT)
                    exit_jump.origin = source_origin(st)
                    exit_jump.vuln = st.vuln
                self.blocks[cur].append(exit_jump)
                if rest:
                    # statically unreachable tail keeps its LineMap images
                    dead = self.new_block()
                    self.compile(rest, dead, follow, hoist)
                return
            else:
                self.blocks[cur].append(clone_stmt(st))
        if follow != -2:
            self.jump(cur, follow)


def _dispatch_tree(pc: str, ids: list[int], blocks: dict[int, list[Stmt]]) -> list[Stmt]:
    if len(ids) == 1:
        return blocks[ids[0]]
    mid = ids[len(ids) // 2]
    node = If(
        BinOp("<", Var(pc), IntLit(mid)),
        _dispatch_tree(pc, ids[: len(ids) // 2], blocks),
        _dispatch_tree(pc, ids[len(ids) // 2 :], blocks),
    )
    return [generated(node)]


def flatten_function(fn: FunctionDef, rng: np.random.Generator, namer: Namer) -> FunctionDef:
    pc = namer.fresh("pc")
    ret = namer.fresh("ret")
    lower = _Lowerer(pc, ret)
    entry = lower.new_block()
    hoist: dict[str, Stmt] = {}
    lower.compile(clone_block(fn.body), entry, _Lowerer.EXIT, hoist)

    perm = rng.permutation(len(lower.blocks))
    new_id = {old: int(perm[old]) for old in range(len(lower.blocks))}
    for lit, target in lower.jumps:
        lit.value = new_id[target]
    numbered = {new_id[old]: stmts for old, stmts in enumerate(lower.blocks)}

    body: list[Stmt] = list(hoist.values())
    body.append(generated(VarDecl(pc, IntLit(new_id[entry]))))
    body.append(generated(VarDecl(ret, IntLit(0))))
    loop = While(
        BinOp(">=", Var(pc), IntLit(0)),
        _dispatch_tree(pc, sorted(numbered), numbered),
    )
    body.append(generated(loop))
    body.append(generated(Return(Var(ret))))
    return FunctionDef(fn.name, list(fn.params), body)


def pass_ct3(program: Program, rng: np.random.Generator) -> Program:
    draft = clone_program(program)
    namer = Namer(draft)
    eligible = [fn for fn in draft.functions if flattenable(fn)]
    if not eligible:
        raise InapplicableTransform("ct3", "no function with control flow to remove")
    replaced = {fn.name: flatten_function(fn, rng, namer) for fn in eligible}
    draft.functions = [replaced.get(fn.name, fn) for fn in draft.functions]
    return draft
