"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines. The end-to-end criteria share one synthetic corpus of 20 sessions
x 60 s (2 latent classes) built once per session.
"""

import time

import numpy as np
import pytest
import scipy.fft
import scipy.linalg

from bmanifold import corpus, evaluate, functionals, lld, net, persist
from bmanifold.cli import main as cli_main

SEED = 42


def extract_windows(manifest, window_s):
    wins = []
    for rec in manifest.records:
        seq = lld.extract_lld(corpus.read_audio(rec.audio_path))
        wins += functionals.window_functionals(seq, window_s, 1.0,
                                               rec.session_id, rec.group_id)
    return wins


def group_vectors(windows):
    by = {}
    for w in windows:
        by.setdefault(w.session_id, []).append(w.vector)
    return {k: np.stack(v) for k, v in by.items()}


def train_pipeline(windows):
    stats = functionals.fit_stats(windows)
    by = group_vectors(functionals.standardize(windows, stats))
    dataset = net.build_dataset(by, w=6, n_ctx=5, seed=0)
    model = net.init_mlp(net.DEFAULT_LAYERS, seed=0)
    model, history = net.train(model, dataset,
                               net.TrainConfig(epochs=50, seed=0))
    embeddings = {sid: net.embed(model, mat) for sid, mat in by.items()}
    return {"stats": stats, "model": model, "history": history,
            "embeddings": embeddings}


@pytest.fixture(scope="session")
def corpus20(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance_corpus")
    manifest = corpus.synth_corpus(20, 60, 2, seed=SEED, out_dir=out)
    return {
        "manifest": manifest,
        "groups": {rec.session_id: rec.group_id for rec in manifest.records},
        "labels": corpus.binarize_ratings(manifest, "synthetic", 0.5),
        "wins5": extract_windows(manifest, 5.0),
        "wins20": extract_windows(manifest, 20.0),
    }


@pytest.fixture(scope="session")
def trained5(corpus20):
    return train_pipeline(corpus20["wins5"])


@pytest.fixture(scope="session")
def trained20(corpus20):
    return train_pipeline(corpus20["wins20"])


def test_criterion_1_gradient_check():
    t0 = time.time()
    worst = 0.0
    for seed in range(10):
        worst = max(worst, net.gradient_check([10, 8, 4, 8, 10], seed=seed))
        worst = max(worst, net.gradient_check(
            [420, 300, 200, 64, 200, 300, 420], seed=seed, n_coords=200))
    elapsed = time.time() - t0
    assert worst < 1e-4
    assert elapsed < 60
    print(f"\nPASS criterion 1: gradient check, max rel err {worst:.2e} "
          f"< 1e-4 over 10 seeds ({elapsed:.1f}s)")


def test_criterion_2_dsp_oracles():
    t0 = time.time()
    rng = np.random.default_rng(SEED)

    # lpc vs direct Toeplitz solve, 1000 random frames
    worst_lpc = 0.0
    for _ in range(1000):
        frame = rng.standard_normal(400)
        r = np.array([frame[: 400 - k] @ frame[k:] for k in range(9)])
        oracle = np.linalg.solve(scipy.linalg.toeplitz(r[:8]), r[1:9])
        worst_lpc = max(worst_lpc, np.max(np.abs(lld.lpc(frame, 8) - oracle)))
    assert worst_lpc < 1e-8

    # AR(1) with coefficient 0.9
    x = np.zeros(8000)
    e = rng.standard_normal(8000)
    for i in range(1, 8000):
        x[i] = 0.9 * x[i - 1] + e[i]
    a = lld.lpc(x, 8)
    assert abs(a[0] - 0.9) < 0.05
    assert np.all(np.abs(a[1:]) < 0.05)

    # pitch of a 220 Hz sine
    t = np.arange(16000) / 16000
    sig = corpus.AudioSignal(np.sin(2 * np.pi * 220 * t), 16000)
    f0 = lld.extract_lld(sig).values[:, lld.COL_PITCH]
    assert np.all(np.abs(f0 - 220) <= 3)

    # percentile vs independent brute-force oracle, exact
    def oracle_pct(vals, p):
        srt = sorted(vals)
        r = (p / 100.0) * (len(srt) - 1)
        lo, hi = int(np.floor(r)), int(np.ceil(r))
        return srt[lo] + (r - lo) * (srt[hi] - srt[lo])

    for _ in range(1000):
        vals = rng.standard_normal(int(rng.integers(1, 60)))
        p = float(rng.uniform(0, 100))
        assert functionals.percentile(vals, p) == oracle_pct(vals, p)

    # MFCC of a constant log-mel spectrum: c1..c12 vanish
    c = scipy.fft.dct(np.full(26, 3.7), type=2, norm="ortho")[:13]
    assert np.all(np.abs(c[1:]) < 1e-10)
    assert c[0] == pytest.approx(np.sqrt(26) * 3.7)

    elapsed = time.time() - t0
    assert elapsed < 60
    print(f"\nPASS criterion 2: DSP oracles (lpc diff {worst_lpc:.1e}, "
          f"AR(1) a1 {a[0]:.3f}, pitch within 3 Hz) ({elapsed:.1f}s)")


def test_criterion_3_dimensional_contract(corpus20, trained5):
    rec = corpus20["manifest"].records[0]
    seq = lld.extract_lld(corpus.read_audio(rec.audio_path))
    assert seq.values.shape[1] == 70
    assert all(w.vector.size == 420 for w in corpus20["wins5"][:50])
    emb = next(iter(trained5["embeddings"].values()))
    assert emb.shape[1] == 64
    print("\nPASS criterion 3: dims 70 per LLD frame, 420 per window, "
          "64 per embedding")


def test_criterion_4_training_sanity(trained5):
    history = trained5["history"]
    assert all(np.isfinite(history))
    assert history[-1] <= 0.5 * history[0]
    print(f"\nPASS criterion 4: epoch loss {history[0]:.4f} -> "
          f"{history[-1]:.4f} (ratio {history[-1] / history[0]:.3f} <= 0.5), no NaN")


def test_criterion_5_class_recovery(corpus20, trained5, trained20):
    groups, labels = corpus20["groups"], corpus20["labels"]
    acc5, _ = evaluate.leave_one_group_out(trained5["embeddings"], groups, labels)
    acc20, _ = evaluate.leave_one_group_out(trained20["embeddings"], groups, labels)
    raw5 = group_vectors(corpus20["wins5"])
    baseline, _ = evaluate.leave_one_group_out(raw5, groups, labels)
    assert acc5 >= 0.80
    assert acc5 >= baseline
    assert acc5 >= acc20
    print(f"\nPASS criterion 5: embedding acc {acc5:.2f} >= 0.80, "
          f">= baseline {baseline:.2f}; 5s acc {acc5:.2f} >= 20s acc {acc20:.2f}")


def test_criterion_6_scenario_similarity(tmp_path_factory, trained5):
    out = tmp_path_factory.mktemp("scenario_corpus")
    manifest = corpus.synth_corpus(4, 60, 2, seed=SEED + 1, out_dir=out)
    stats, model = trained5["stats"], trained5["model"]
    probes, refs = {}, {}
    scenario_of = {}
    for rec in manifest.records:
        seq = lld.extract_lld(corpus.read_audio(rec.audio_path))
        ws = functionals.window_functionals(seq, 5.0, 1.0,
                                            rec.session_id, rec.group_id)
        emb = net.embed(model, np.stack(
            [w.vector for w in functionals.standardize(ws, stats)]))
        probes[rec.session_id] = emb
        refs[rec.session_id] = (emb, rec.scenario)
        scenario_of[rec.session_id] = rec.scenario

    sim = evaluate.similarity_matrix(probes, refs)
    assert np.allclose(sim.scores.sum(axis=1), 1.0, atol=1e-9)
    correct = sum(
        sim.scenarios[int(np.argmax(sim.scores[i]))] == scenario_of[pid]
        for i, pid in enumerate(sim.probe_ids))
    assert correct >= 3
    print(f"\nPASS criterion 6: {correct}/4 probes peak on their own "
          "scenario; rows sum to 1")


def test_criterion_7_determinism_and_persistence(tmp_path):
    corpus.synth_corpus(2, 30, 2, seed=5, out_dir=tmp_path / "c")
    manifest = str(tmp_path / "c" / "manifest.csv")

    paths = {}
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        feats = str(d / "f.bmf")
        model = str(d / "m.bmm")
        emb = str(d / "e.bmf")
        assert cli_main(["features", manifest, "--window", "5",
                         "--out", feats]) == 0
        assert cli_main(["train", feats, "--layers", "420,200,64,200,420",
                         "--epochs", "2", "--seed", "3", "--out", model]) == 0
        assert cli_main(["embed", model, feats, "--out", emb]) == 0
        paths[run] = (feats, model, emb)
    for fa, fb in zip(paths["a"], paths["b"]):
        with open(fa, "rb") as x, open(fb, "rb") as y:
            assert x.read() == y.read()

    # round trips are lossless
    feats, model, emb = paths["a"]
    persist.write_features(persist.read_features(feats), tmp_path / "f2.bmf")
    assert (tmp_path / "f2.bmf").read_bytes() == open(feats, "rb").read()
    m, s = persist.read_model(model)
    persist.write_model(m, tmp_path / "m2.bmm", stats=s)
    assert (tmp_path / "m2.bmm").read_bytes() == open(model, "rb").read()

    # nn_search vs an independent brute-force argmin, 1000 instances
    rng = np.random.default_rng(SEED)
    for _ in range(1000):
        refs = rng.standard_normal((int(rng.integers(2, 30)), 6))
        q = rng.standard_normal(6)
        idx = evaluate.ReferenceIndex(
            vectors=refs, labels=np.array(["x"] * len(refs)),
            group_ids=np.array([f"g{i}" for i in range(len(refs))]),
            session_ids=np.array([f"s{i}" for i in range(len(refs))]))
        oracle = int(np.argmin([np.sqrt(np.sum((r - q) ** 2)) for r in refs]))
        assert evaluate.nn_search(q, idx) == oracle

    print("\nPASS criterion 7: byte-identical reruns, lossless round trips, "
          "nn_search == brute force on 1000 instances")
