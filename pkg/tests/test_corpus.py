"""Generator invariants: counts, self-checks, persistence, variants."""
import json

import pytest

from zigzag.corpus import (
    CorpusError,
    CorpusProgram,
    assign_split,
    augment_corpus,
    build_attack_targets,
    function_labels,
    generate_synthetic,
    load_corpus,
    save_corpus,
    transform_variant,
)
from zigzag.lang import interpret, parse
from zigzag.lang.interp import COMPLETED, OUT_OF_BOUNDS, RUNTIME_ERROR
from zigzag.lang.nodes import flagged_lines
from zigzag.lang.interp import count_input_reads


def test_vulnerable_count_is_exact():
    for count, frac, expect in ((20, 0.4, 8), (10, 0.45, 4), (7, 0.5, 4)):
        corpus = generate_synthetic(count, frac, seed=1)
        assert sum(1 for p in corpus if p.vulnerable) == expect


def test_generation_is_deterministic():
    a = generate_synthetic(12, 0.5, seed=7)
    b = generate_synthetic(12, 0.5, seed=7)
    assert [p.source for p in a] == [p.source for p in b]
    assert [p.witness_inputs for p in a] == [p.witness_inputs for p in b]
    c = generate_synthetic(12, 0.5, seed=8)
    assert [p.source for p in a] != [p.source for p in c]


def test_split_depends_only_on_id():
    corpus = generate_synthetic(30, 0.4, seed=2)
    for p in corpus:
        assert p.split == assign_split(p.id)
    assert {p.split for p in corpus} == {"train", "test"}


def test_every_program_reads_two_inputs():
    for p in generate_synthetic(16, 0.5, seed=3):
        assert count_input_reads(p.program()) == 2


def test_witness_traps_at_flagged_line():
    for p in generate_synthetic(16, 0.5, seed=4):
        prog = p.program()
        if p.vulnerable:
            w = interpret(prog, "main", list(p.witness_inputs), fuel=6000)
            assert w.status == RUNTIME_ERROR and w.error_kind == OUT_OF_BOUNDS
            assert w.error_line in flagged_lines(prog)
        else:
            assert p.witness_inputs is None
            assert not flagged_lines(prog)


def test_benign_inputs_complete():
    for p in generate_synthetic(16, 0.5, seed=5):
        r = interpret(p.program(), "main", list(p.provenance["benign_inputs"]), fuel=6000)
        assert r.status == COMPLETED


def test_vulnerable_programs_flag_exactly_one_helper():
    for p in generate_synthetic(20, 0.5, seed=6):
        flagged = [name for name, v in p.labels.items() if v]
        if p.vulnerable:
            assert len(flagged) == 1 and flagged[0] != "main"
        else:
            assert not flagged
        assert p.labels == function_labels(p.program())


def test_corpus_round_trip(tmp_path):
    corpus = generate_synthetic(10, 0.4, seed=7)
    path = tmp_path / "c.jsonl"
    save_corpus(path, corpus)
    back = load_corpus(path)
    assert len(back) == len(corpus)
    for a, b in zip(corpus, back):
        assert (a.id, a.split, a.source, a.labels, a.witness_inputs) == (
            b.id,
            b.split,
            b.source,
            b.labels,
            b.witness_inputs,
        )


def test_load_rejects_tampered_labels(tmp_path):
    corpus = generate_synthetic(3, 0.5, seed=8)
    path = tmp_path / "c.jsonl"
    save_corpus(path, corpus)
    lines = path.read_text().splitlines()
    rec = json.loads(lines[1])
    name = next(iter(rec["labels"]))
    rec["labels"][name] = 1 - rec["labels"][name]
    lines[1] = json.dumps(rec)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorpusError):
        load_corpus(path)


def test_load_rejects_foreign_files(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"version": 99}\n')
    with pytest.raises(CorpusError):
        load_corpus(path)


def test_augment_adds_variants_with_inherited_metadata():
    corpus = generate_synthetic(8, 0.5, seed=9)
    aug = augment_corpus(corpus, ("ct2",), seed=0)
    originals = [p for p in aug if "::" not in p.id]
    variants = [p for p in aug if "::" in p.id]
    assert len(originals) == 8 and len(variants) == 8
    by_id = {p.id: p for p in corpus}
    for v in variants:
        base = by_id[v.provenance["base"]]
        assert v.split == base.split
        assert v.witness_inputs == base.witness_inputs
        assert v.vulnerable == base.vulnerable


def test_augment_never_stacks_variants():
    corpus = generate_synthetic(4, 0.5, seed=10)
    aug = augment_corpus(corpus, ("ct2", "ct7"), seed=0)
    assert all(p.id.count("::") <= 1 for p in aug)
    assert len(aug) == 4 + 4 + 4


def test_attack_targets_keyed_by_kind():
    corpus = generate_synthetic(6, 0.5, seed=11)
    targets = build_attack_targets(corpus, ("ct3", "ct6"), seed=1)
    assert set(targets) == {"ct3", "ct6"}
    for kind, bucket in targets.items():
        assert all(p.id.endswith(f"::{kind}") for p in bucket)


def test_inapplicable_variant_returns_none():
    src = "func main() {\n    output(input());\n    return 0;\n}\n"
    item = CorpusProgram(
        id="x", source=src, split="test", labels={"main": 0}, witness_inputs=None
    )
    assert transform_variant(item, "ct1", 0) is None


def test_generation_rejects_bad_arguments():
    with pytest.raises(CorpusError):
        generate_synthetic(0, 0.5, seed=0)
    with pytest.raises(CorpusError):
        generate_synthetic(5, 1.5, seed=0)
