import numpy as np
import pytest

import helpers
from sketchgen.model import (
    ModelConfig,
    ModelError,
    build_model,
    gradient_check,
    load_checkpoint,
    nucleus_filter,
    save_checkpoint,
    train,
)
from sketchgen.tokens import (
    COMMAND_IDS,
    PAD,
    ROW_WIDTH,
    encode_turtle,
    encode_vertices,
    sorted_vertex_order,
    encode_curves,
)
from sketchgen.turtle import encode as turtle_encode

TINY = dict(blocks=1, heads=2, hidden_dim=16, output_dim=8, max_len=24)


def tiny(kind, **kw):
    return build_model(ModelConfig(kind=kind, **{**TINY, **kw}))


def corpus_item(g, kind):
    if kind == "vertex":
        return encode_vertices(g)
    if kind == "curve":
        order = sorted_vertex_order(g)
        return ([g.vertices[i] for i in order], encode_curves(g))
    return encode_turtle(turtle_encode(g))


class TestNucleusFilter:
    def test_documented_example(self):
        out = nucleus_filter([0.5, 0.3, 0.15, 0.05], 0.8)
        assert np.allclose(out, [0.625, 0.375, 0.0, 0.0], atol=1e-12)

    def test_p_one_keeps_all(self):
        probs = [0.4, 0.3, 0.2, 0.1]
        assert np.allclose(nucleus_filter(probs, 1.0), probs)

    def test_tiny_p_is_greedy(self):
        out = nucleus_filter([0.1, 0.6, 0.3], 1e-9)
        assert np.allclose(out, [0.0, 1.0, 0.0])

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = rng.dirichlet(np.ones(20))
            out = nucleus_filter(p, rng.uniform(0.05, 1.0))
            assert out.sum() == pytest.approx(1.0, abs=1e-12)
            assert (out >= 0).all()

    def test_bad_p(self):
        with pytest.raises(ModelError):
            nucleus_filter([1.0], 0.0)
        with pytest.raises(ModelError):
            nucleus_filter([1.0], 1.5)


class TestCausality:
    def test_vertex_model(self):
        m = tiny("vertex", vocab=16, seed=1)
        a = m.step_distributions([1, 2, 3, 4])
        b = m.step_distributions([1, 2, 3, 9])
        for t in range(4):  # distributions conditioned on the shared prefix
            assert np.allclose(a[t], b[t], atol=1e-7)
        assert not np.allclose(a[4], b[4], atol=1e-7)

    def test_turtle_model(self):
        m = tiny("turtle", seed=1)
        start = (COMMAND_IDS["start"],) + (PAD,) * (ROW_WIDTH - 1)
        r1 = (COMMAND_IDS["loopstart"], 260, 260, PAD, PAD, PAD, PAD)
        r2a = (COMMAND_IDS["line"], 300, 255, PAD, PAD, PAD, PAD)
        r2b = (COMMAND_IDS["line"], 200, 255, PAD, PAD, PAD, PAD)
        a = m.step_distributions([start, r1, r2a])
        b = m.step_distributions([start, r1, r2b])
        for branch in range(ROW_WIDTH):
            assert np.allclose(a[0][branch], b[0][branch], atol=1e-7)
            assert np.allclose(a[1][branch], b[1][branch], atol=1e-7)


class TestGradients:
    def test_vertex_gradcheck(self):
        m = tiny("vertex", vocab=8, seed=0)
        assert gradient_check(m, [1, 5, 2, 7]) < 1e-4

    def test_curve_gradcheck(self):
        m = tiny("curve", seed=0, max_vertices=8)
        item = ([(0, 0), (9, 0), (5, 8)], [0, 1, 3, 1, 2, 3, 4])
        assert gradient_check(m, item) < 1e-4


class TestTraining:
    def test_deterministic(self):
        g = helpers.random_sketches(171, 4)
        corpus = [corpus_item(x, "vertex") for x in g]
        results = []
        for _ in range(2):
            m = tiny("vertex", seed=3, max_len=64)
            train(m, corpus, steps=5, seed=3)
            results.append(
                {k: v.clone() for k, v in m.state_dict().items()}
            )
        for k in results[0]:
            assert (results[0][k] == results[1][k]).all()

    def test_loss_decreases(self):
        g = helpers.random_sketches(181, 1)[0]
        m = tiny("turtle", seed=0, max_len=32)
        res = train(m, [corpus_item(g, "turtle")], steps=60, seed=0)
        assert res.losses[-1] < res.losses[0]

    def test_empty_corpus(self):
        with pytest.raises(ModelError):
            train(tiny("vertex"), [], steps=1, seed=0)

    def test_validation_tracking(self):
        g = helpers.random_sketches(191, 2)
        corpus = [corpus_item(x, "vertex") for x in g]
        m = tiny("vertex", seed=0, max_len=64)
        res = train(
            m, corpus[:1], steps=20, seed=0,
            val_corpus=corpus[1:], val_every=10,
        )
        assert len(res.val_losses) == 2
        assert res.best_val == min(res.val_losses)


class TestSampling:
    def test_seeded_determinism(self):
        m = tiny("vertex", seed=5)
        a = m.sample(top_p=0.9, seed=11)
        b = m.sample(top_p=0.9, seed=11)
        c = m.sample(top_p=0.9, seed=12)
        assert a.tokens == b.tokens
        assert a.tokens != c.tokens or a.truncated != c.truncated

    def test_turtle_sample_shape(self):
        m = tiny("turtle", seed=5)
        res = m.sample(top_p=0.95, seed=2, max_len=6)
        assert all(len(r) == ROW_WIDTH for r in res.tokens)
        assert res.tokens[0][0] == COMMAND_IDS["start"]

    def test_curve_sample_terminates_or_truncates(self):
        m = tiny("curve", seed=5, max_vertices=8)
        verts = [(0, 0), (9, 0), (5, 8)]
        res = m.sample(verts, top_p=0.9, seed=3, max_len=10)
        assert res.truncated or res.tokens[-1] == len(verts) + 1


class TestCheckpoints:
    def test_round_trip(self, tmp_path):
        m = tiny("vertex", seed=9)
        path = tmp_path / "m.npz"
        save_checkpoint(m, path)
        m2 = load_checkpoint(path)
        assert m2.cfg == m.cfg
        for k, v in m.state_dict().items():
            assert (m2.state_dict()[k] == v).all()

    def test_rejects_plain_npz(self, tmp_path):
        path = tmp_path / "x.npz"
        np.savez(path, a=np.zeros(3))
        with pytest.raises(ModelError):
            load_checkpoint(path)
