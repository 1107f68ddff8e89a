"""Synthetic corpus of small programs with known out-of-bounds defects.

Each program reads two integers, wires them through padding helpers and
one target helper, and prints a few values plus a tag string.  In the
vulnerable variant the target helper indexes an array with a raw
input-derived value and the offending statement carries a //@vuln flag;
the benign variant keeps the sanitizing arithmetic inside the indexing
expression itself, so the distinction travels with the sink statement
no matter how the surrounding code is split, merged, or flattened.
Around the sink, helpers carry class-correlated but semantically inert
texture (guard-style conditionals in benign code, raw arithmetic chains
with stray `%` in vulnerable code) that gives shortcut learners an easy
separator on untransformed programs.

Every generated program is self-checked: its benign inputs must run to
completion, and for vulnerable programs the witness inputs must trap
out of bounds exactly at a flagged statement.  Benign programs must
survive the same hostile vector untouched.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .lang import interpret, parse, pretty_print
from .lang.interp import COMPLETED, OUT_OF_BOUNDS, RUNTIME_ERROR
from .lang.nodes import Program, flagged_lines
from .seeds import derive_rng, derive_seed
from .transforms import InapplicableTransform, apply_transform

CORPUS_VERSION = 1
SELF_CHECK_FUEL = 6000

# input domain the generator guarantees bounded runtimes for
INPUT_LOW = -3
INPUT_HIGH = 12


class CorpusError(Exception):
    pass


@dataclass(slots=True)
class CorpusProgram:
    id: str
    source: str
    split: str
    labels: dict[str, int]
    witness_inputs: Optional[list[int]]
    provenance: dict = field(default_factory=dict)

    def program(self) -> Program:
        return parse(self.source)

    @property
    def vulnerable(self) -> bool:
        return any(self.labels.values())


def function_labels(program: Program) -> dict[str, int]:
    """1 for functions containing a flagged statement, else 0."""
    out: dict[str, int] = {}
    for fn in program.functions:
        flagged = any(st.vuln for st in _walk(fn.body))
        out[fn.name] = 1 if flagged else 0
    return out


def _walk(stmts):
    from .lang.nodes import walk_statements

    return walk_statements(stmts)


def assign_split(pid: str, train_fraction: float = 0.8) -> str:
    digest = hashlib.sha256(pid.encode("utf-8")).digest()
    bucket = int.from_bytes(digest[:8], "little") % 1000
    return "train" if bucket < int(train_fraction * 1000) else "test"


# --------------------------------------------------------------------------
# padding helpers: benign, bounded for any int input

_PAD_POOL = (
    (
        "step_parity",
        "func step_parity(v) {\n"
        "    if (v % 2 == 0) {\n"
        "        return 1;\n"
        "    }\n"
        "    return 0;\n"
        "}\n",
    ),
    (
        "wrap_gap",
        "func wrap_gap(v) {\n"
        "    if (v < 0) {\n"
        "        return 0 - v;\n"
        "    }\n"
        "    return v;\n"
        "}\n",
    ),
    (
        "scale_mix",
        "func scale_mix(v) {{\n"
        "    return v * {m} + {c};\n"
        "}}\n",
    ),
    (
        "tri_small",
        "func tri_small(v) {\n"
        "    var r = v % 5;\n"
        "    if (r < 0) {\n"
        "        r = r + 5;\n"
        "    }\n"
        "    var s = 0;\n"
        "    var i = 0;\n"
        "    while (i < r) {\n"
        "        s = s + i;\n"
        "        i = i + 1;\n"
        "    }\n"
        "    return s;\n"
        "}\n",
    ),
)


def _padding(rng) -> list[tuple[str, str]]:
    count = int(rng.integers(1, 3))
    picks = rng.choice(len(_PAD_POOL), size=count, replace=False)
    out = []
    for idx in picks:
        name, text = _PAD_POOL[int(idx)]
        if "{m}" in text:
            text = text.format(m=int(rng.integers(2, 5)), c=int(rng.integers(0, 7)))
        out.append((name, text))
    return out


# --------------------------------------------------------------------------
# template families: each returns helper source, main body lines, witness
# vector, benign vector, and the hostile vector a benign variant must survive


def _texture(rng, vulnerable: bool, v: str, size: int) -> list[str]:
    """Inert filler statements for a helper body, correlated with its class.

    Benign helpers get guard-style conditionals that only touch scratch
    variables; vulnerable ones get arithmetic chains.  Vulnerable chains
    carry stray `%` so modulo counts overlap between classes and the only
    dependable separator is the wrap inside the sink expression.
    """
    a = int(rng.integers(2, 6))
    b = int(rng.integers(1, 9))
    m = int(rng.integers(3, 12))
    if vulnerable:
        pools = (
            [f"var t = {v} * {a} + {b};", f"var r = t % {m};"],
            [
                f"var t = {v} * {a} + {b};",
                f"t = t % {m} + t;",
                f"var r = {v} % {m + 1};",
            ],
            [
                f"var t = {v} * {a} + {b};",
                f"t = t % {m} + t;",
                f"var w = t * {a} - {v};",
                f"var r = w % {m + 2};",
            ],
        )
    else:
        pools = (
            ["var ok = 1;", f"if ({v} < 0) {{", "    ok = 0;", "}"],
            [
                "var ok = 1;",
                f"if ({v} < 0) {{",
                "    ok = 0;",
                "}",
                f"if ({v} > {size}) {{",
                "    ok = ok - 1;",
                "}",
            ],
            [
                f"var lim = {size};",
                f"if ({v} >= lim) {{",
                "    lim = lim + 1;",
                "}",
                "var ok = 1;",
                f"if ({v} < 0) {{",
                "    ok = 0;",
                "}",
            ],
        )
    return list(pools[int(rng.integers(0, len(pools)))])


def _t_copy(rng, vulnerable: bool, size: int) -> dict:
    bias = int(rng.integers(0, 4))
    if vulnerable:
        sink = f"        dst[i] = src[i] + {bias}; //@vuln"
    else:
        sink = f"        dst[i % {size}] = src[i % {size}] + {bias};"
    seeded = rng.random() < 0.35  # loop counter arrives as a parameter
    lines = [] if seeded else ["    var i = 0;"]
    if rng.random() < 0.65:
        lines += [f"    {t}" for t in _texture(rng, vulnerable, "n", size)]
    lines += [
        "    while (i < n) {",
        sink,
        "        i = i + 1;",
        "    }",
        "    return i;",
    ]
    params = "dst, src, n, i" if seeded else "dst, src, n"
    helper = f"func copy_take({params}) {{\n" + "\n".join(lines) + "\n}\n"
    entry = "copy_take"
    if rng.random() < 0.3:  # route the call through a forwarding helper
        helper += f"\nfunc copy_go({params}) {{\n    return copy_take({params});\n}}\n"
        entry = "copy_go"
    call = f"{entry}(dst, src, n, 0)" if seeded else f"{entry}(dst, src, n)"
    probe = int(rng.integers(0, size))
    fill_m = int(rng.integers(1, 4))
    main = [
        f"var src[{size}];",
        f"var dst[{size}];",
        "var f = 0;",
        f"while (f < {size}) {{",
        f"    src[f % {size}] = f * {fill_m} + 1;",
        "    f = f + 1;",
        "}",
        "var n = input();",
        "var k = input();",
        "PAD",
        f"var moved = {call};",
        "output(moved);",
        f"output(dst[{probe} % {size}]);",
    ]
    return {
        "name": "copy",
        "helper": helper,
        "main": main,
        "witness": [size + 2, 1],
        "benign": [max(1, size - 2), 3],
    }


def _t_lookup(rng, vulnerable: bool, size: int) -> dict:
    if vulnerable:
        ret = "    return table[k]; //@vuln"
    else:
        ret = f"    return table[(k % {size} + {size}) % {size}];"
    body = [f"    {t}" for t in _texture(rng, vulnerable, "k", size)] + [ret]
    helper = "func pick_slot(table, k) {\n" + "\n".join(body) + "\n}\n"
    entry = "pick_slot"
    step = int(rng.integers(2, 6))
    main = [
        f"var table[{size}];",
        "var f = 0;",
        f"while (f < {size}) {{",
        f"    table[f % {size}] = {step} * f;",
        "    f = f + 1;",
        "}",
        "var k = input();",
        "var d = input();",
        "PAD",
        f"output({entry}(table, k));",
    ]
    return {
        "name": "lookup",
        "helper": helper,
        "main": main,
        "witness": [size + 1, 0],
        "benign": [2, 5],
    }


def _t_window(rng, vulnerable: bool, size: int) -> dict:
    if vulnerable:
        acc_line = "        acc = acc + buf[start + j]; //@vuln"
    else:
        acc_line = (
            f"        acc = acc + buf[((start + j) % {size} + {size}) % {size}];"
        )
    body = [f"    {t}" for t in _texture(rng, vulnerable, "start", size)]
    body += [
        "    var acc = 0;",
        "    var j = 0;",
        "    while (j < width) {",
        acc_line,
        "        j = j + 1;",
        "    }",
        "    return acc;",
    ]
    helper = "func window_sum(buf, start, width) {\n" + "\n".join(body) + "\n}\n"
    fill_c = int(rng.integers(1, 5))
    main = [
        f"var buf[{size}];",
        "var f = 0;",
        f"while (f < {size}) {{",
        f"    buf[f % {size}] = f + {fill_c};",
        "    f = f + 1;",
        "}",
        "var start = input();",
        "var width = input();",
        "PAD",
        "output(window_sum(buf, start, width));",
    ]
    return {
        "name": "window",
        "helper": helper,
        "main": main,
        "witness": [size, 2],
        "benign": [1, 3],
    }


def _t_store(rng, vulnerable: bool, size: int) -> dict:
    if vulnerable:
        sink = "    buf[pos] = v; //@vuln"
    else:
        sink = f"    buf[(pos % {size} + {size}) % {size}] = v;"
    lines = []
    if rng.random() < 0.5:
        lines += [f"    {t}" for t in _texture(rng, vulnerable, "pos", size)]
    lines += [sink, "    return pos;"]
    helper = "func put_slot(buf, pos, v) {\n" + "\n".join(lines) + "\n}\n"
    entry = "put_slot"
    fill_c = int(rng.integers(2, 6))
    probe = int(rng.integers(0, size))
    main = [
        f"var buf[{size}];",
        "var f = 0;",
        f"while (f < {size}) {{",
        f"    buf[f % {size}] = f * {fill_c};",
        "    f = f + 1;",
        "}",
        "var pos = input();",
        "var v = input();",
        "PAD",
        f"output({entry}(buf, pos, v));",
        f"output(buf[{probe} % {size}]);",
    ]
    return {
        "name": "store",
        "helper": helper,
        "main": main,
        "witness": [size + 3, 4],
        "benign": [3, 9],
    }


def _t_tagged(rng, vulnerable: bool, size: int) -> dict:
    thr = int(rng.integers(4, 9))
    pfx = ["lvl", "grade", "rank"][int(rng.integers(0, 3))]
    namer_fn = (
        f'func level_name(grade) {{\n'
        f'    var msg = "{pfx}-";\n'
        f"    if (grade >= {thr}) {{\n"
        f'        msg = msg + "high";\n'
        f"    }} else {{\n"
        f'        msg = msg + "low";\n'
        f"    }}\n"
        f"    return msg;\n"
        f"}}\n"
    )
    if vulnerable:
        ret = "    return marks[slot]; //@vuln"
    else:
        ret = f"    return marks[(slot % {size} + {size}) % {size}];"
    body = [f"    {t}" for t in _texture(rng, vulnerable, "slot", size)] + [ret]
    score_fn = "func score_of(marks, slot) {\n" + "\n".join(body) + "\n}\n"
    main = [
        f"var marks[{size}];",
        "var f = 0;",
        f"while (f < {size}) {{",
        f"    marks[f % {size}] = f * 2 + 1;",
        "    f = f + 1;",
        "}",
        "var g = input();",
        "var s = input();",
        "PAD",
        "output(level_name(g));",
        "output(score_of(marks, s));",
    ]
    return {
        "name": "tagged",
        "helper": namer_fn + "\n" + score_fn,
        "main": main,
        "witness": [1, size + 4],
        "benign": [8, 2],
    }


_TEMPLATES = (_t_copy, _t_lookup, _t_window, _t_tagged, _t_store)


def _assemble(rng, vulnerable: bool) -> dict:
    size = int(rng.integers(5, 10))
    template = _TEMPLATES[int(rng.integers(0, len(_TEMPLATES)))]
    spec = template(rng, vulnerable, size)
    pads = _padding(rng)

    # wire padding helpers into main at the PAD slot, chaining when two
    seed_var = next(
        l.split()[1] for l in spec["main"] if l.startswith("var ") and l.endswith("= input();")
    )
    pad_lines: list[str] = []
    if len(pads) == 1:
        pad_lines.append(f"output({pads[0][0]}({seed_var}));")
    else:
        first, second = pads[0][0], pads[1][0]
        pad_lines.append(f"var u = {first}({seed_var});")
        pad_lines.append(f"output({second}(u));")

    main_lines: list[str] = []
    for line in spec["main"]:
        if line == "PAD":
            main_lines.extend(pad_lines)
        else:
            main_lines.append(line)
    main_lines.append(f'output("{spec["name"]}");')
    main_lines.append("return 0;")

    helper_blocks = [spec["helper"]] + [text for _, text in pads]
    order = rng.permutation(len(helper_blocks))
    body = "\n\n".join(helper_blocks[int(i)].rstrip() for i in order)
    main_src = "func main() {\n" + "\n".join(f"    {l}" for l in main_lines) + "\n}\n"
    source = body + "\n\n" + main_src
    return {
        "source": source,
        "template": spec["name"],
        "witness": spec["witness"],
        "benign": spec["benign"],
    }


def _self_check(program: Program, vulnerable: bool, witness, benign) -> None:
    r = interpret(program, "main", list(benign), fuel=SELF_CHECK_FUEL)
    if r.status != COMPLETED:
        raise CorpusError(f"benign inputs did not complete: {r.status}/{r.error_kind}")
    w = interpret(program, "main", list(witness), fuel=SELF_CHECK_FUEL)
    if vulnerable:
        flags = flagged_lines(program)
        if not flags:
            raise CorpusError("vulnerable program lost its flag")
        if w.status != RUNTIME_ERROR or w.error_kind != OUT_OF_BOUNDS:
            raise CorpusError(f"witness did not trap: {w.status}/{w.error_kind}")
        if w.error_line not in flags:
            raise CorpusError(f"witness trapped at {w.error_line}, flags at {sorted(flags)}")
    else:
        if w.status != COMPLETED:
            raise CorpusError(f"benign variant trapped on hostile vector: {w.status}/{w.error_kind}")
        if flagged_lines(program):
            raise CorpusError("benign program carries a flag")


def generate_synthetic(count: int, vulnerable_fraction: float = 0.4, seed: int = 0) -> list[CorpusProgram]:
    """Generate `count` self-checked programs, exactly
    round(count * vulnerable_fraction) of them vulnerable."""
    if count <= 0:
        raise CorpusError("count must be positive")
    if not 0.0 <= vulnerable_fraction <= 1.0:
        raise CorpusError("vulnerable_fraction must be within [0, 1]")
    n_vuln = int(round(count * vulnerable_fraction))
    order = derive_rng(seed, "corpus", "roles").permutation(count)
    vulnerable_idx = {int(i) for i in order[:n_vuln]}

    out: list[CorpusProgram] = []
    for i in range(count):
        rng = derive_rng(seed, "corpus", "program", i)
        vulnerable = i in vulnerable_idx
        made = _assemble(rng, vulnerable)
        program = parse(made["source"])
        _self_check(program, vulnerable, made["witness"], made["benign"])
        pid = f"p{i:04d}"
        out.append(
            CorpusProgram(
                id=pid,
                source=made["source"],
                split=assign_split(pid),
                labels=function_labels(program),
                witness_inputs=list(made["witness"]) if vulnerable else None,
                provenance={
                    "generator": "synthetic",
                    "template": made["template"],
                    "seed": int(seed),
                    "index": i,
                    "benign_inputs": list(made["benign"]),
                },
            )
        )
    return out


# --------------------------------------------------------------------------
# transformed variants

def transform_variant(item: CorpusProgram, kind: str, seed: int) -> Optional[CorpusProgram]:
    """One transformed copy of a corpus program, or None if inapplicable."""
    stage_seed = derive_seed(seed, "variant", item.id, kind)
    try:
        out, _ = apply_transform(item.program(), kind, stage_seed)
    except InapplicableTransform:
        return None
    source = pretty_print(out)
    return CorpusProgram(
        id=f"{item.id}::{kind}",
        source=source,
        split=item.split,
        labels=function_labels(out),
        witness_inputs=list(item.witness_inputs) if item.witness_inputs else None,
        provenance={"base": item.id, "transform": kind},
    )


def augment_corpus(programs: Iterable[CorpusProgram], kinds: Iterable[str], seed: int) -> list[CorpusProgram]:
    """Originals plus one variant per (program, kind); empty kinds is a no-op."""
    out = list(programs)
    for kind in kinds:
        for item in list(out):
            if "::" in item.id:
                continue  # variants are built from originals only
            variant = transform_variant(item, kind, seed)
            if variant is not None:
                out.append(variant)
    return out


def build_attack_targets(
    programs: Iterable[CorpusProgram], kinds: Iterable[str], seed: int
) -> dict[str, list[CorpusProgram]]:
    """Per-kind transformed copies used to probe a trained detector."""
    targets: dict[str, list[CorpusProgram]] = {}
    base = list(programs)
    for kind in kinds:
        bucket = []
        for item in base:
            variant = transform_variant(item, kind, seed)
            if variant is not None:
                bucket.append(variant)
        targets[kind] = bucket
    return targets


# --------------------------------------------------------------------------
# persistence

def save_corpus(path: str | Path, programs: Iterable[CorpusProgram]) -> None:
    items = list(programs)
    with open(path, "w", encoding="utf-8") as fh:
        header = {"version": CORPUS_VERSION, "kind": "program-corpus", "count": len(items)}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for item in items:
            record = {
                "id": item.id,
                "split": item.split,
                "source": item.source,
                "labels": item.labels,
                "witness_inputs": item.witness_inputs,
                "provenance": item.provenance,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_corpus(path: str | Path) -> list[CorpusProgram]:
    with open(path, encoding="utf-8") as fh:
        lines = [l for l in fh.read().splitlines() if l.strip()]
    if not lines:
        raise CorpusError(f"{path}: empty corpus file")
    header = json.loads(lines[0])
    if header.get("version") != CORPUS_VERSION or header.get("kind") != "program-corpus":
        raise CorpusError(f"{path}: not a corpus file or unsupported version")
    out: list[CorpusProgram] = []
    for line in lines[1:]:
        rec = json.loads(line)
        item = CorpusProgram(
            id=rec["id"],
            source=rec["source"],
            split=rec["split"],
            labels={k: int(v) for k, v in rec["labels"].items()},
            witness_inputs=rec.get("witness_inputs"),
            provenance=rec.get("provenance", {}),
        )
        # integrity: stored labels must match the flags in the source
        if function_labels(item.program()) != item.labels:
            raise CorpusError(f"{item.id}: labels do not match source flags")
        out.append(item)
    if len(out) != header.get("count"):
        raise CorpusError(f"{path}: header count {header.get('count')} != {len(out)} records")
    return out
