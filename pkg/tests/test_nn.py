"""Numeric checks for the model: gradients, backends, losses, serialization."""
from __future__ import annotations

import numpy as np
import pytest

from zigzag.nn.kernels import KernelError, _HAVE_NUMBA, active_backend, set_backend
from zigzag.nn.losses import EPS, bce_loss, discrepancy_loss
from zigzag.nn.model import (
    DetectorModel,
    ModelError,
    features_backward,
    features_forward,
    head_backward,
    head_forward,
    init_params,
    load_model,
    make_config,
    model_fingerprint,
    save_model,
)
from zigzag.nn.optim import Adam, Sgd, TrainingDiverged
from zigzag.seeds import derive_rng

VOCAB = 12
BATCH = 3
LENGTH = 7


@pytest.fixture
def numpy_backend():
    prev = active_backend()
    set_backend("numpy")
    yield
    set_backend(prev)


def tiny_setup(encoder: str, seed: int = 5):
    config = make_config(
        encoder=encoder, emb_dim=4, feature_dim=6, head_hidden=5, rnn_hidden=5, length=LENGTH
    )
    params = init_params(config, VOCAB, seed)
    rng = derive_rng(seed, "tiny-data")
    X = rng.integers(1, VOCAB, size=(BATCH, LENGTH)).astype(np.int32)
    X[0, 4:] = 0  # padded tail
    X[2, 6:] = 0
    y = rng.integers(0, 2, size=BATCH).astype(np.float64)
    return config, params, X, y


def total_bce(params, config, X, y) -> float:
    F, _ = features_forward(params, config, X)
    p1, _ = head_forward(params, "c1", F)
    p2, _ = head_forward(params, "c2", F)
    return bce_loss(p1, y)[0] + bce_loss(p2, y)[0]


def grads_bce(params, config, X, y) -> dict:
    F, fc = features_forward(params, config, X)
    p1, h1 = head_forward(params, "c1", F)
    p2, h2 = head_forward(params, "c2", F)
    _, dp1 = bce_loss(p1, y)
    _, dp2 = bce_loss(p2, y)
    g1, dF1 = head_backward(params, "c1", h1, dp1)
    g2, dF2 = head_backward(params, "c2", h2, dp2)
    return {**g1, **g2, **features_backward(params, config, fc, dF1 + dF2)}


def total_disc(params, config, X) -> float:
    F, _ = features_forward(params, config, X)
    p1, _ = head_forward(params, "c1", F)
    p2, _ = head_forward(params, "c2", F)
    return discrepancy_loss(p1, p2)[0]


def grads_disc(params, config, X) -> dict:
    F, fc = features_forward(params, config, X)
    p1, h1 = head_forward(params, "c1", F)
    p2, h2 = head_forward(params, "c2", F)
    _, d1, d2 = discrepancy_loss(p1, p2)
    g1, dF1 = head_backward(params, "c1", h1, d1)
    g2, dF2 = head_backward(params, "c2", h2, d2)
    return {**g1, **g2, **features_backward(params, config, fc, dF1 + dF2)}


def fd_worst_rel(params, loss_fn, grads, h=1e-4) -> float:
    worst = 0.0
    for key, g in grads.items():
        tensor = params[key]
        it = np.nditer(g, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            saved = tensor[idx]
            tensor[idx] = saved + h
            hi = loss_fn()
            tensor[idx] = saved - h
            lo = loss_fn()
            tensor[idx] = saved
            fd = (hi - lo) / (2.0 * h)
            rel = abs(g[idx] - fd) / max(abs(g[idx]) + abs(fd), 1e-6)
            worst = max(worst, rel)
    return worst


@pytest.mark.parametrize("encoder", ["mean", "rnn"])
def test_bce_gradients_match_finite_differences(numpy_backend, encoder):
    config, params, X, y = tiny_setup(encoder)
    grads = grads_bce(params, config, X, y)
    worst = fd_worst_rel(params, lambda: total_bce(params, config, X, y), grads)
    assert worst <= 1e-4


@pytest.mark.parametrize("encoder", ["mean", "rnn"])
def test_discrepancy_gradients_match_finite_differences(numpy_backend, encoder):
    config, params, X, y = tiny_setup(encoder)
    F, _ = features_forward(params, config, X)
    p1, _ = head_forward(params, "c1", F)
    p2, _ = head_forward(params, "c2", F)
    # keep well away from the |p1 - p2| kink so central differences are valid
    assert np.abs(p1 - p2).min() > 1e-3
    grads = grads_disc(params, config, X)
    worst = fd_worst_rel(params, lambda: total_disc(params, config, X), grads)
    assert worst <= 1e-4


# ---- backends ----------------------------------------------------------------


@pytest.mark.parametrize("encoder", ["mean", "rnn"])
def test_numba_and_numpy_backends_agree(encoder):
    if not _HAVE_NUMBA:
        pytest.skip("numba not importable")
    config, params, X, y = tiny_setup(encoder)
    prev = active_backend()
    try:
        set_backend("numpy")
        f_np, _ = features_forward(params, config, X)
        g_np = grads_bce(params, config, X, y)
        set_backend("numba")
        f_nb, _ = features_forward(params, config, X)
        g_nb = grads_bce(params, config, X, y)
    finally:
        set_backend(prev)
    np.testing.assert_allclose(f_np, f_nb, rtol=1e-9, atol=1e-12)
    assert g_np.keys() == g_nb.keys()
    for key in g_np:
        np.testing.assert_allclose(g_np[key], g_nb[key], rtol=1e-9, atol=1e-12)


def test_each_backend_is_deterministic():
    config, params, X, _ = tiny_setup("mean")
    for name in ("numpy", "numba") if _HAVE_NUMBA else ("numpy",):
        prev = active_backend()
        try:
            set_backend(name)
            a, _ = features_forward(params, config, X)
            b, _ = features_forward(params, config, X)
        finally:
            set_backend(prev)
        assert a.tobytes() == b.tobytes()


def test_set_backend_rejects_unknown():
    with pytest.raises(KernelError):
        set_backend("tensorflow")


# ---- losses ------------------------------------------------------------------


def test_bce_golden_at_half():
    loss, dp = bce_loss(np.array([0.5]), np.array([1.0]))
    assert loss == pytest.approx(np.log(2.0))
    assert dp[0] == pytest.approx(-2.0)


def test_bce_clamps_and_zeroes_gradient_outside():
    loss, dp = bce_loss(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    assert loss == pytest.approx(-2.0 * np.log(EPS) / 2.0, rel=1e-6)
    assert dp.tolist() == [0.0, 0.0]


def test_discrepancy_golden():
    loss, d1, d2 = discrepancy_loss(np.array([0.8, 0.2]), np.array([0.6, 0.2]))
    assert loss == pytest.approx(0.1)
    assert d1.tolist() == [0.5, 0.0]  # sign / n; ties get subgradient zero
    assert d2.tolist() == [-0.5, 0.0]


# ---- optimizers ----------------------------------------------------------------


def test_sgd_updates_only_given_keys():
    params = {"a": np.array([1.0, 2.0]), "b": np.array([3.0])}
    Sgd(1.0).step(params, {"a": np.array([0.5, 0.5])})
    assert params["a"].tolist() == [0.5, 1.5]
    assert params["b"].tolist() == [3.0]


def test_adam_first_step_is_signed_lr():
    params = {"a": np.array([1.0, 1.0])}
    Adam(0.1).step(params, {"a": np.array([0.5, -0.25])})
    np.testing.assert_allclose(params["a"], [0.9, 1.1], atol=1e-6)


def test_optimizers_reject_non_finite_gradients():
    params = {"a": np.array([1.0])}
    with pytest.raises(TrainingDiverged):
        Sgd(0.1).step(params, {"a": np.array([np.nan])})
    with pytest.raises(TrainingDiverged):
        Adam(0.1).step(params, {"a": np.array([np.inf])})


# ---- model container ------------------------------------------------------------


def test_init_embedding_pad_row_is_zero():
    config = make_config(emb_dim=4)
    params = init_params(config, VOCAB, 0)
    assert params["emb"][0].tolist() == [0.0] * 4
    assert params["f_b"].tolist() == [0.0] * config["feature_dim"]


def test_padding_does_not_change_pooled_features(numpy_backend):
    config, params, _, _ = tiny_setup("mean")
    row = np.array([[3, 4, 5, 0, 0, 0, 0]], dtype=np.int32)
    trimmed = np.array([[3, 4, 5]], dtype=np.int32)
    full, _ = features_forward(params, config, row)
    short, _ = features_forward(params, config, trimmed)
    np.testing.assert_allclose(full, short, rtol=1e-12)


def test_fused_prediction_goldens(monkeypatch):
    _, params, _, _ = tiny_setup("mean")
    model = DetectorModel(config=make_config(fusion="mean", delta=0.4), vocab={"t": 2}, params=params)
    monkeypatch.setattr(
        DetectorModel, "predict_proba", lambda self, X: (np.array([0.8, 0.5]), np.array([0.6, 0.3]))
    )
    np.testing.assert_allclose(model.fused_proba(None), [0.7, 0.4])
    pred = model.predict(None)
    assert pred.dtype == np.int64
    assert pred.tolist() == [1, 0]  # 0.7 > 0.4; 0.4 is not strictly greater


def test_first_head_fusion_ignores_second_head(monkeypatch):
    _, params, _, _ = tiny_setup("mean")
    model = DetectorModel(config=make_config(fusion="c1", delta=0.4), vocab={"t": 2}, params=params)
    monkeypatch.setattr(
        DetectorModel, "predict_proba", lambda self, X: (np.array([0.45]), np.array([0.0]))
    )
    assert model.predict(None).tolist() == [1]


def test_save_load_round_trip(tmp_path):
    config, params, X, _ = tiny_setup("mean")
    model = DetectorModel(config=config, vocab={"func": 2, "VAR_0": 3}, params=params)
    path = tmp_path / "model.zzm"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == model.config
    assert loaded.vocab == model.vocab
    for key in params:
        assert loaded.params[key].tobytes() == params[key].tobytes()
    assert model_fingerprint(loaded) == model_fingerprint(model)
    again = tmp_path / "model2.zzm"
    save_model(loaded, again)
    assert again.read_bytes() == path.read_bytes()


def test_load_rejects_foreign_bytes(tmp_path):
    path = tmp_path / "bogus.zzm"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ModelError):
        load_model(path)


def test_load_rejects_trailing_garbage(tmp_path):
    config, params, _, _ = tiny_setup("mean")
    model = DetectorModel(config=config, vocab={"t": 2}, params=params)
    path = tmp_path / "model.zzm"
    save_model(model, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(ModelError):
        load_model(path)


def test_make_config_validation():
    with pytest.raises(ModelError):
        make_config(hidden_layers=3)
    with pytest.raises(ModelError):
        make_config(encoder="transformer")
    with pytest.raises(ModelError):
        make_config(fusion="max")
