import itertools
import json
import math
import os
import subprocess

import numpy as np
import pytest

import lft


def brute_force_min(cost):
    n = cost.shape[0]
    return min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def test_ot_assign_matches_exhaustive_search():
    rng = np.random.default_rng(0)
    for n in range(1, 7):
        for _ in range(10):
            cost = rng.random((n, n))
            perm, total = lft.ot_assign(cost)
            assert sorted(perm) == list(range(n))
            assert total == pytest.approx(brute_force_min(cost), abs=1e-12)
            assert total == pytest.approx(sum(cost[i, perm[i]] for i in range(n)), abs=1e-12)


def test_cost_matrix_is_squared_distance():
    src = np.array([[0.0, 0.0], [1.0, 1.0]])
    dst = np.array([[3.0, 4.0], [1.0, 1.0]])
    c = lft.cost_matrix(src, dst)
    assert c.shape == (2, 2)
    assert c[0, 0] == 25.0
    assert c[1, 1] == 0.0
    assert lft.cost_matrix(src, dst, "euclidean")[0, 0] == 5.0


def test_recoupling_ratio_extremes():
    rng = np.random.default_rng(1)
    src = rng.normal(size=(32, 4))
    assert lft.recoupling_ratio([(src, src + 2.0)])["ratio"] == 0.0
    x = lft.recoupling_ratio([(np.array([[0.0, 0.0], [0.0, 1.0]]), np.array([[1.0, 1.0], [1.0, 0.0]]))])
    assert x["ratio"] == 1.0
    assert x["n_batches"] == 1


def test_metric_values():
    x = np.random.default_rng(2).normal(size=(5, 3))
    assert lft.nmse(x, x) == 0.0
    assert lft.nmse(np.zeros_like(x), x) == pytest.approx(1.0, abs=1e-15)
    kl = lft.kl_categorical(np.array([[math.log(2.0), 0.0]]), np.zeros((1, 2)))
    p = np.array([2 / 3, 1 / 3])
    assert kl == pytest.approx(float(np.sum(p * np.log(p / 0.5))), abs=1e-15)
    assert lft.perplexity(np.zeros((4, 64)), np.array([1, 2, 3, 4], dtype=np.int32)) == pytest.approx(64.0, abs=1e-9)


def test_bad_input_raises_value_error():
    with pytest.raises(ValueError):
        lft.ot_assign(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        lft.nmse(np.zeros((2, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        lft.gen_pairs("spiral")


def test_toy_pairs_and_short_run_are_deterministic():
    x0, x1 = lft.gen_pairs("swapped_clusters", 8, 0.1, 3)
    assert x0.shape == (8, 2) and x1.shape == (8, 2)
    y0, _ = lft.gen_pairs("swapped_clusters", 8, 0.1, 3)
    assert np.array_equal(x0, y0)

    a = lft.run_toy("fw", k_train=2, n_pairs=8, steps=60, hidden=16, k_infer=[1, 2])
    b = lft.run_toy("fw", k_train=2, n_pairs=8, steps=60, hidden=16, k_infer=[1, 2])
    assert a.diagnostics == b.diagnostics
    assert [d["k_infer"] for d in a.diagnostics] == [1, 2]
    states = a.trajectory(2)
    assert len(states) == 3
    assert np.array_equal(states[-1], a.infer(states[0], 2))
    assert lft.straightness(states) == pytest.approx(a.diagnostics[1]["straightness"], abs=1e-12)


def test_corpus_is_seeded():
    c = lft.make_corpus(vocab_size=16, n_tokens=1000, seed=4)
    assert c["tokens"].dtype == np.int32
    assert c["train_end"] == 900
    assert np.array_equal(c["tokens"], lft.make_corpus(vocab_size=16, n_tokens=1000, seed=4)["tokens"])
    assert 0.0 < c["heldout_entropy"] < math.log(16)


@pytest.mark.skipif(not os.environ.get("LFT_CLI"), reason="needs the lft command-line tool")
def test_teacher_checkpoint_round_trip(tmp_path):
    cfg = tmp_path / "teacher.json"
    cfg.write_text(json.dumps({
        "corpus": {"vocab_size": 16, "n_tokens": 4000},
        "model": {"d_model": 8, "n_layers": 2, "n_heads": 2, "context": 8, "d_ff": 16},
        "steps": 3, "seq_len": 8, "batch_seqs": 2, "warmup": 1, "log_every": 3, "eval_windows": 2,
    }))
    subprocess.run([os.environ["LFT_CLI"], "teacher", str(cfg), "--out", str(tmp_path / "t")], check=True,
                   capture_output=True)
    t = lft.load_teacher(tmp_path / "t" / "teacher.lftm")
    assert t.config["n_layers"] == 2 and t.step == 3
    tokens = np.arange(16, dtype=np.int32) % 16
    logits, latents = t.forward(tokens, 8)
    assert logits.shape == (16, 16)
    assert len(latents) == 3 and latents[0].shape == (16, 8)
    params = lft.load_checkpoint(tmp_path / "t" / "teacher.lftm")
    assert params["embed.tok"].shape == (16, 8)
    corpus = lft.make_corpus(vocab_size=16, n_tokens=4000)
    assert t.heldout_perplexity(corpus["tokens"][corpus["train_end"]:], 8, 2) > 1.0
