import numpy as np
import pytest

import ella


def test_arch_roundtrip():
    arch = ella.parse_arch("2", "dense:8,tanh,dense:3")
    assert arch.param_count() == 2 * 8 + 8 + 8 * 3 + 3
    assert arch.output_dim() == 3
    assert "dense:8" in repr(arch)


def test_jvp_matches_jacobian():
    arch = ella.parse_arch("2", "dense:8,tanh,dense:3")
    p = ella.FlatParams(arch, ella.init_params(arch, 7))
    rng = ella.Rng(3)
    x = np.array([rng.normal(), rng.normal()])
    v = np.array([rng.normal() for _ in range(arch.param_count())])
    J = ella.jacobian(p, x)
    value, tangent = ella.jvp(p, x, v)
    assert np.allclose(value, ella.forward(p, x), atol=0, rtol=0)
    assert np.allclose(tangent, J @ v, atol=1e-12)


def test_regression_pipeline():
    ds = ella.gen_sine_regression(16, 11)
    arch = ella.parse_arch("1", "dense:16,tanh,dense:16,tanh,dense:16,tanh,dense:1")
    head = ella.GaussianHead(0.2)
    cfg = ella.TrainConfig()
    cfg.iters = 300
    cfg.gamma = 0.05
    cfg.seed = 5
    p = ella.train_map(arch, ds, head, cfg)
    s0 = ella.prior_variance(16, 0.05)
    lm = ella.sample_landmarks(ds, 1, 16, 21)
    sk = ella.build_sketch(ella.landmark_jacobian(p, ds, lm), 5)
    assert sk.K <= 5
    post = ella.fit(sk, p, ds, head, s0)
    pred = ella.predict_f(post, p, np.array([0.5]))
    assert pred.cov.shape == (1, 1) and pred.cov[0, 0] > 0
    k = ella.kappa_ella(post, p, np.array([0.5]), np.array([0.5]))
    assert k[0, 0] == pred.cov[0, 0]

    oracle = ella.make_lla_oracle(p, ds, head, s0)
    exact = ella.kappa_lla_exact(oracle, np.array([0.5]), np.array([0.5]))
    assert exact[0, 0] > 0


def test_classification_probs_sum_to_one(tmp_path):
    ds = ella.gen_digit_glyphs(40, 2)
    arch = ella.parse_arch("1x28x28", "conv:2:3:2:1,relu,flatten,dense:10")
    head = ella.CategoricalHead()
    cfg = ella.TrainConfig()
    cfg.iters = 30
    cfg.batch = 16
    cfg.seed = 9
    p = ella.train_map(arch, ds, head, cfg)
    lm = ella.sample_landmarks(ds, 10, 32, 13)
    sk = ella.build_sketch(ella.landmark_jacobian(p, ds, lm), 8)
    post = ella.fit(sk, p, ds, head, 1.0)
    probs = ella.posterior_probs(post, p, ds, 64, 17)
    assert probs.shape == (40, 10)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    rep = ella.classification_report(probs, ds.labels)
    assert 0.0 <= rep["ece"] <= 1.0 and rep["n"] == 40

    ckpt = tmp_path / "net.ckpt"
    ella.save_checkpoint(str(ckpt), p)
    q = ella.load_checkpoint(str(ckpt))
    assert np.array_equal(q.values, p.values)

    post_path = tmp_path / "net.post"
    ella.save_posterior(str(post_path), post, ella.arch_fingerprint(arch))
    loaded, arch_hash = ella.load_posterior(str(post_path))
    assert arch_hash == ella.arch_fingerprint(arch)
    assert np.array_equal(loaded.G_chol, post.G_chol)


def test_bound_report_holds():
    for seed in range(5):
        rep = ella.check_random_instance(seed)
        assert rep["holds_thm0"]
        assert rep["E"] <= rep["bound_thm0"] + 1e-8


def test_rejects_rank_mismatch():
    ds = ella.gen_sine_regression(8, 3)
    arch = ella.parse_arch("1", "dense:4,tanh,dense:1")
    p = ella.FlatParams(arch, ella.init_params(arch, 1))
    lm = ella.sample_landmarks(ds, 1, 4, 5)
    sk = ella.build_sketch(ella.landmark_jacobian(p, ds, lm), 2)
    with pytest.raises(Exception):
        ella.fit(sk, p, ds, ella.GaussianHead(0.2), -1.0)
