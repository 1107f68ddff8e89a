"""Tests for the two training schemes and their phase contracts."""
from __future__ import annotations

import math
from dataclasses import asdict

import numpy as np
import pytest

from zigzag.corpus import augment_corpus, generate_synthetic
from zigzag.encoding import build_vocab, encode_fragments
from zigzag.fragments import extract_corpus_fragments
from zigzag.nn.model import feature_keys, features_forward, head_forward, head_keys, make_config, model_fingerprint
from zigzag.seeds import derive_rng
from zigzag.training import (
    TrainConfig,
    TrainingError,
    _Trainer,
    binary_prediction,
    hard_mask,
    load_trace,
    mine_hard_examples,
    save_trace,
    train_original,
    train_zigzag,
)

TRACE_FIELDS = {"round", "phase", "epoch", "L_c", "L_h", "mean_disc", "gamma", "val_f1"}


@pytest.fixture(scope="module")
def pools():
    corpus = generate_synthetic(40, seed=3)
    train_items = [c for c in corpus if c.split == "train"]
    variants = [c for c in augment_corpus(train_items, ("ct2", "ct7"), seed=5) if "::" in c.id]
    clean = extract_corpus_fragments(train_items, "function")
    varied = extract_corpus_fragments(variants, "function")
    val = extract_corpus_fragments([c for c in corpus if c.split == "test"], "function")
    for frag in val:
        frag.split = "train"  # only so the vocab guard accepts them as inputs elsewhere
    return clean, varied, val


def quick_config(**overrides) -> TrainConfig:
    base = dict(e1=8, beta=2, e2=2, e3=2, batch_size=32, seed=7)
    base.update(overrides)
    return TrainConfig(**base)


# ---- hard-example predicate ------------------------------------------------


def test_hard_when_second_head_misses_positive():
    mask = hard_mask(np.array([0.7]), np.array([0.3]), np.array([1.0]), 0.4)
    assert mask.tolist() == [True]


def test_not_hard_when_both_heads_agree_with_negative():
    mask = hard_mask(np.array([0.1]), np.array([0.2]), np.array([0.0]), 0.4)
    assert mask.tolist() == [False]


def test_threshold_is_strict():
    # p == delta counts as a negative prediction
    assert binary_prediction(np.array([0.4]), 0.4).tolist() == [0]
    assert hard_mask(np.array([0.4]), np.array([0.4]), np.array([0.0]), 0.4).tolist() == [False]
    assert hard_mask(np.array([0.4]), np.array([0.4]), np.array([1.0]), 0.4).tolist() == [True]


def test_hard_mask_matches_bruteforce():
    rng = derive_rng(0, "hard-tables")
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        p1 = rng.uniform(size=n)
        p2 = rng.uniform(size=n)
        y = rng.integers(0, 2, size=n).astype(np.float64)
        delta = float(rng.uniform(0.05, 0.95))
        expected = [
            (1 if a > delta else 0) != int(t) or (1 if b > delta else 0) != int(t)
            for a, b, t in zip(p1, p2, y)
        ]
        assert hard_mask(p1, p2, y, delta).tolist() == expected


def test_mine_hard_examples_agrees_with_manual_forward(pools):
    clean, varied, _ = pools
    vocab = build_vocab(clean + varied)
    mc = make_config()
    out = train_original(clean, train_config=quick_config(e1=3))
    X, y = encode_fragments(varied, vocab, mc["length"])
    params = out.model.params
    mask = mine_hard_examples(params, out.model.config, X, y, 0.4)
    F, _ = features_forward(params, out.model.config, X)
    p1, _ = head_forward(params, "c1", F)
    p2, _ = head_forward(params, "c2", F)
    assert np.array_equal(mask, hard_mask(p1, p2, y, 0.4))


# ---- phase freezing ---------------------------------------------------------


def make_trainer(pools, **cfg):
    clean, varied, _ = pools
    vocab = build_vocab(clean + varied)
    mc = make_config()
    Xc, yc = encode_fragments(clean, vocab, mc["length"])
    trainer = _Trainer(mc, quick_config(**cfg), vocab, Xc, yc, None)
    Xv, yv = encode_fragments(varied, vocab, mc["length"])
    return trainer, Xv, yv


def test_classifier_epoch_keeps_features_frozen(pools):
    trainer, Xv, _ = make_trainer(pools)
    before = {k: trainer.params[k].tobytes() for k in feature_keys(trainer.mc)}
    heads_before = {k: trainer.params[k].tobytes() for k in (*head_keys("c1"), *head_keys("c2"))}
    trainer.classifier_epoch(Xv[:16], 1, 0)
    for k, raw in before.items():
        assert trainer.params[k].tobytes() == raw
    assert any(trainer.params[k].tobytes() != raw for k, raw in heads_before.items())


def test_classifier_epoch_accepts_empty_hard_set(pools):
    trainer, Xv, _ = make_trainer(pools)
    empty = Xv[:0]
    before = {k: trainer.params[k].tobytes() for k in feature_keys(trainer.mc)}
    trainer.classifier_epoch(empty, 1, 0)
    for k, raw in before.items():
        assert trainer.params[k].tobytes() == raw


def test_feature_epoch_keeps_heads_frozen(pools):
    trainer, Xv, _ = make_trainer(pools)
    before = {k: trainer.params[k].tobytes() for k in (*head_keys("c1"), *head_keys("c2"))}
    features_before = {k: trainer.params[k].tobytes() for k in feature_keys(trainer.mc)}
    trainer.feature_epoch(Xv, 1, 0)
    for k, raw in before.items():
        assert trainer.params[k].tobytes() == raw
    assert any(trainer.params[k].tobytes() != raw for k, raw in features_before.items())


# ---- joint warm-up ----------------------------------------------------------


def test_warmup_loss_decreases_over_first_five_epochs(pools):
    clean, _, _ = pools
    out = train_original(clean, train_config=quick_config(e1=6, tau_loss=1e-9))
    losses = [rec.L_c for rec in out.trace[:5]]
    assert len(losses) == 5
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_warmup_plateau_stops_before_cap(pools):
    clean, _, _ = pools
    out = train_original(clean, train_config=quick_config(e1=50, tau_loss=0.5))
    # a huge tolerance plateaus immediately after the second epoch
    assert len(out.trace) == 2


# ---- zigzag loop ------------------------------------------------------------


def test_zigzag_trace_schema_and_dynamics(pools):
    clean, varied, val = pools
    out = train_zigzag(clean, varied, train_config=quick_config(), val_fragments=val)
    assert out.rounds_run >= 1
    phases = {rec.phase for rec in out.trace}
    assert phases == {"joint", "classifier", "feature"}
    seen = set()
    for rec in out.trace:
        row = asdict(rec)
        assert set(row) == TRACE_FIELDS
        for name in ("L_c", "L_h", "mean_disc", "gamma"):
            assert math.isfinite(row[name])
        assert 0.0 <= rec.gamma <= 1.0
        assert rec.val_f1 is not None and 0.0 <= rec.val_f1 <= 1.0
        seen.add((rec.round, rec.phase, rec.epoch))
    assert len(seen) == len(out.trace)
    for rnd in range(1, out.rounds_run + 1):
        for phase, cap in (("classifier", 2), ("feature", 2)):
            epochs = [rec.epoch for rec in out.trace if rec.round == rnd and rec.phase == phase]
            assert epochs == list(range(cap))
        gammas = {rec.gamma for rec in out.trace if rec.round == rnd}
        assert len(gammas) == 1


def test_zigzag_without_validation_records_none(pools):
    clean, varied, _ = pools
    out = train_zigzag(clean, varied, train_config=quick_config(beta=1))
    assert all(rec.val_f1 is None for rec in out.trace)


def test_zigzag_model_uses_mean_fusion_and_delta(pools):
    clean, varied, _ = pools
    out = train_zigzag(clean, varied, train_config=quick_config(beta=1, delta=0.45))
    assert out.model.config["fusion"] == "mean"
    assert out.model.config["delta"] == 0.45


def test_original_model_uses_first_head(pools):
    clean, _, _ = pools
    out = train_original(clean, train_config=quick_config(e1=2))
    assert out.model.config["fusion"] == "c1"


def test_zigzag_requires_variant_pool(pools):
    clean, _, _ = pools
    with pytest.raises(TrainingError, match="train_original"):
        train_zigzag(clean, [], train_config=quick_config())


def test_zigzag_early_stops_when_nothing_moves(pools):
    clean, varied, _ = pools
    out = train_zigzag(clean, varied, train_config=quick_config(lr=1e-12, beta=6, e1=2))
    assert out.stopped_early
    assert out.rounds_run == 1


def test_zigzag_runs_all_rounds_with_tight_tolerances(pools):
    clean, varied, _ = pools
    out = train_zigzag(
        clean, varied, train_config=quick_config(beta=2, tau_disc=1e-12, tau_loss=1e-12)
    )
    assert out.rounds_run == 2
    assert not out.stopped_early


def test_mining_with_pretrained_features_is_supported(pools):
    clean, varied, _ = pools
    out = train_zigzag(clean, varied, train_config=quick_config(beta=1, mine_with="pretrained"))
    assert out.rounds_run == 1


# ---- determinism ------------------------------------------------------------


def test_same_seed_reproduces_model_bytes(pools):
    clean, varied, _ = pools
    a = train_zigzag(clean, varied, train_config=quick_config())
    b = train_zigzag(clean, varied, train_config=quick_config())
    assert model_fingerprint(a.model) == model_fingerprint(b.model)
    assert [asdict(r) for r in a.trace] == [asdict(r) for r in b.trace]


def test_different_seed_changes_model_bytes(pools):
    clean, varied, _ = pools
    a = train_zigzag(clean, varied, train_config=quick_config(seed=7, beta=1))
    b = train_zigzag(clean, varied, train_config=quick_config(seed=8, beta=1))
    assert model_fingerprint(a.model) != model_fingerprint(b.model)


# ---- validation and serialization -------------------------------------------


def test_rejects_single_class_training_set(pools):
    clean, _, _ = pools
    benign = [f for f in clean if f.label == 0]
    with pytest.raises(TrainingError, match="both classes"):
        train_original(benign, train_config=quick_config())


def test_rejects_empty_training_set():
    with pytest.raises(TrainingError, match="empty"):
        train_original([], train_config=quick_config())


def test_rejects_non_training_fragments(pools):
    clean, _, _ = pools
    tampered = [*clean]
    tampered[0] = type(clean[0])(
        id=clean[0].id,
        program_id=clean[0].program_id,
        function=clean[0].function,
        granularity=clean[0].granularity,
        text=clean[0].text,
        label=clean[0].label,
        split="test",
    )
    with pytest.raises(TrainingError, match="non-training"):
        train_original(tampered, train_config=quick_config())


@pytest.mark.parametrize(
    "overrides",
    [dict(optimizer="rmsprop"), dict(mine_with="frozen"), dict(delta=0.0), dict(e2=0), dict(beta=0)],
)
def test_config_validation_rejects(overrides):
    with pytest.raises(TrainingError):
        quick_config(**overrides).validate()


def test_trace_round_trip(tmp_path, pools):
    clean, varied, _ = pools
    out = train_zigzag(clean, varied, train_config=quick_config(beta=1))
    path = tmp_path / "trace.jsonl"
    save_trace(path, out.trace)
    loaded = load_trace(path)
    assert [asdict(r) for r in loaded] == [asdict(r) for r in out.trace]
