"""Semantics-preserving program transforms.

Eight passes, addressed as ct1..ct8:

    ct1  wrap string literals in builder functions
    ct2  permute parameters and add a bogus argument
    ct3  flatten control flow into a dispatch loop
    ct4  merge function pairs behind a selector parameter
    ct5  merge function pairs, then flatten the merged body
    ct6  split functions at top level with tail-call threading
    ct7  outline one straight-line block per function
    ct8  outline blocks, then outline the outlined call sites

``apply_transform`` runs one pass and returns the transformed program
plus a LineMap sending each input statement id to the set of statement
ids derived from it.  ``apply_pipeline`` chains passes left to right,
skipping inapplicable stages, and composes the LineMaps.
"""
from __future__ import annotations

import logging

from ..lang.nodes import Program, collect_line_ids
from ..seeds import derive_seed
from .base import (
    ENTRY_NAME,
    GENERATED_PREFIX,
    InapplicableTransform,
    LineMap,
    TransformError,
    finalize,
)
from .flatten import flattenable, pass_ct3
from .merge import pass_ct4, pass_ct5
from .split import pass_ct6, pass_ct7, pass_ct8
from .surface import pass_ct1, pass_ct2

log = logging.getLogger(__name__)

_PASSES = {
    "ct1": pass_ct1,
    "ct2": pass_ct2,
    "ct3": pass_ct3,
    "ct4": pass_ct4,
    "ct5": pass_ct5,
    "ct6": pass_ct6,
    "ct7": pass_ct7,
    "ct8": pass_ct8,
}

ALL_KINDS = tuple(sorted(_PASSES))

KIND_LABELS = {
    "ct1": "encode-strings",
    "ct2": "randomize-arguments",
    "ct3": "flatten-control-flow",
    "ct4": "merge-simple",
    "ct5": "merge-flatten",
    "ct6": "split-top-level",
    "ct7": "split-block",
    "ct8": "split-recursive",
}

# named transform sets used for training-side augmentation
CT_SETS: dict[str, tuple[str, ...]] = {
    "md0": (),
    "md1": ("ct2", "ct7", "ct8"),
    "md2": ("ct3", "ct4", "ct6"),
    "md3": ("ct2", "ct4", "ct5", "ct6"),
    "md4": ("ct1", "ct2", "ct3", "ct4", "ct6", "ct7"),
    "md5": ALL_KINDS,
}


def resolve_kinds(spec: str) -> tuple[str, ...]:
    """Resolve a user-facing transform selector to a kind tuple.

    Accepts a single kind ("ct3"), a comma list ("ct1,ct6"), "all", or a
    named set ("md2").  Case-insensitive.
    """
    text = spec.strip().lower()
    if not text:
        raise TransformError("empty transform selector")
    if text == "all":
        return ALL_KINDS
    if text in CT_SETS:
        return CT_SETS[text]
    kinds = tuple(part.strip() for part in text.split(","))
    for kind in kinds:
        if kind not in _PASSES:
            raise TransformError(f"unknown transform kind {kind!r}")
    return kinds


def identity_line_map(program: Program) -> LineMap:
    return {i: {i} for i in collect_line_ids(program)}


def compose_line_maps(first: LineMap, second: LineMap) -> LineMap:
    return {
        orig: {nid for mid in mids for nid in second[mid]}
        for orig, mids in first.items()
    }


def apply_transform(program: Program, kind: str, seed: int) -> tuple[Program, LineMap]:
    """Apply one pass under a seed derived from (seed, kind).

    Raises InapplicableTransform when the program has no site for the
    pass, TransformError for unknown kinds or internal invariant breaks.
    """
    key = kind.strip().lower()
    if key not in _PASSES:
        raise TransformError(f"unknown transform kind {kind!r}")
    from ..seeds import derive_rng

    rng = derive_rng(seed, "transform", key)
    input_ids = collect_line_ids(program)
    draft = _PASSES[key](program, rng)
    return finalize(draft, key, input_ids)


def apply_pipeline(
    program: Program, kinds: tuple[str, ...] | list[str], seed: int
) -> tuple[Program, LineMap]:
    """Chain passes left to right, composing LineMaps.

    Stages whose pass is inapplicable to the current program are skipped
    (logged at debug level); if every stage is skipped the pipeline as a
    whole is inapplicable.
    """
    if not kinds:
        raise TransformError("empty transform pipeline")
    current = program
    line_map = identity_line_map(program)
    applied = 0
    reasons: list[str] = []
    for i, kind in enumerate(kinds):
        stage_seed = derive_seed(seed, "stage", i, kind.strip().lower())
        try:
            current, stage_map = apply_transform(current, kind, stage_seed)
        except InapplicableTransform as exc:
            log.debug("pipeline stage %d (%s) skipped: %s", i, kind, exc.reason)
            reasons.append(f"{kind}: {exc.reason}")
            continue
        line_map = compose_line_maps(line_map, stage_map)
        applied += 1
    if applied == 0:
        raise InapplicableTransform(
            "+".join(kinds), "every stage was inapplicable (" + "; ".join(reasons) + ")"
        )
    return current, line_map


__all__ = [
    "ALL_KINDS",
    "CT_SETS",
    "ENTRY_NAME",
    "GENERATED_PREFIX",
    "KIND_LABELS",
    "InapplicableTransform",
    "LineMap",
    "TransformError",
    "apply_pipeline",
    "apply_transform",
    "compose_line_maps",
    "flattenable",
    "identity_line_map",
    "resolve_kinds",
]
