import numpy as np
import pytest

import scott_jepa as sj


def test_masked_count_and_masks():
    assert sj.masked_count(196, 0.6) == 117
    m = sj.blockwise_mask(14, 14, 0.6, seed=3)
    assert len(m) == 117
    assert m == sorted(set(m))
    r = sj.random_mask(14, 14, 0.6, seed=3)
    assert sj.mask_contiguity(14, 14, m) > sj.mask_contiguity(14, 14, r)


def test_dense_conv_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1, 6, 6, 2))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    feats, act = sj.sparse_conv2d(x, w, b, stride=1, padding=1)
    assert act.all()
    xp = np.pad(x[0], ((1, 1), (1, 1), (0, 0)))
    ref = np.zeros((6, 6, 3))
    for i in range(6):
        for j in range(6):
            win = xp[i:i + 3, j:j + 3, :]
            ref[i, j] = np.einsum("yxc,ocyx->o", win, w) + b
    np.testing.assert_allclose(feats[0], ref, atol=1e-10)


def test_masked_pixels_stay_inactive():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(1, 32, 32, 3))
    feats, act = sj.sparse_max_blur_pool(x, masked=[[1, 2]], patch=16)
    assert act.shape == (1, 16, 16)
    assert not act[0, :8, 8:].any()
    assert (feats[0][act[0] == 0] == 0).all()


def test_masked_loss_ignores_visible_rows():
    rng = np.random.default_rng(2)
    target = rng.normal(size=(1, 4, 5))
    pred = rng.normal(size=(1, 4, 5))
    base = sj.masked_loss(pred, target, [[0, 3]], 2, 2)
    pred[0, 1] += 50.0
    assert sj.masked_loss(pred, target, [[0, 3]], 2, 2) == base
    assert sj.masked_loss(target, target, [[0, 3]], 2, 2) == 0.0


def test_schedules():
    assert sj.lr_at(0.0) == 1e-6
    cfg = sj.ScheduleConfig()
    assert sj.lr_at(cfg.warmup_end, cfg) == 5e-4
    assert sj.lr_at(1.0) == 1e-5
    assert sj.wd_at(1.0) == 0.4
    assert sj.ema_at(0.0) == 0.996


def test_pca_against_numpy():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(50, 8)) * np.arange(1, 9)
    comps, proj, var = sj.pca(x, 3)
    cov = np.cov(x, rowvar=False, bias=True)
    w, v = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1][:3]
    np.testing.assert_allclose(var, w[order], rtol=1e-9)
    for c in range(3):
        assert abs(abs(comps[c] @ v[:, order[c]]) - 1.0) < 1e-9
    fg = sj.foreground_split(proj)
    assert len(fg) == 50


def test_parameter_counts():
    assert abs(sj.encoder_parameter_count("scott7_16") / 13.6e6 - 1) < 0.05
    assert abs(sj.encoder_parameter_count("scott12_16") / 22.4e6 - 1) < 0.05


def test_config_errors():
    with pytest.raises(sj.ConfigError):
        sj.validate_config("model.depth=3")
    assert "model.dim=192" in sj.desk_config()


def test_tiny_pretrain(tmp_path):
    cfg = "\n".join([
        "image.size=32", "batch=4", "epochs=1", "optim.warmup_epochs=0",
        "model.dim=16", "model.blocks=1", "model.heads=2", "stem.hidden=4",
        "predictor.dim=16", "predictor.blocks=1", "predictor.heads=2",
        "mask.min_block=1", "aug.blur_kernel=3", "probe.heads=2",
    ])
    ckpt, losses = sj.pretrain(cfg, "synth:8x2x32", str(tmp_path))
    assert len(losses) == 2
    assert all(np.isfinite(losses))
    meta = sj.read_checkpoint_meta(ckpt)
    assert meta["step"] == "2"
