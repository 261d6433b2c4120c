"""Command-line pipeline: synth -> features -> train -> embed -> classify /
similarity, plus a gradient self-check.

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

import argparse
import csv
import sys

import numpy as np

from . import corpus, evaluate, functionals, net, persist
from .lld import extract_lld

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2


def _group_windows(windows):
    """Ordered mapping session_id -> (list of windows), preserving file order."""
    by_session = {}
    for w in windows:
        by_session.setdefault(w.session_id, []).append(w)
    return by_session


def cmd_features(args):
    manifest = corpus.load_manifest(args.manifest)
    all_windows = []
    failures = 0
    for rec in manifest.records:
        try:
            signal = corpus.read_audio(rec.audio_path)
            llds = extract_lld(signal)
            windows = functionals.window_functionals(
                llds, args.window, args.shift, rec.session_id, rec.group_id)
        except (ValueError, OSError) as exc:
            print(f"warning: session {rec.session_id}: {exc}", file=sys.stderr)
            failures += 1
            continue
        if not windows:
            print(f"warning: session {rec.session_id}: shorter than one "
                  f"{args.window:g}s window", file=sys.stderr)
        all_windows.extend(windows)
    if not all_windows:
        print("error: no session produced any feature window", file=sys.stderr)
        return EXIT_INPUT
    persist.write_features(all_windows, args.out)
    print(f"wrote {len(all_windows)} windows ({failures} session failures) to {args.out}")
    return EXIT_OK


def cmd_train(args):
    windows = persist.read_features(args.features)
    dim = windows[0].vector.size
    if dim != functionals.FEATURE_DIM:
        print(f"error: training needs {functionals.FEATURE_DIM}-dim features, "
              f"got {dim}", file=sys.stderr)
        return EXIT_INPUT
    layers = [int(s) for s in args.layers.split(",")]
    stats = functionals.fit_stats(windows)
    standardized = functionals.standardize(windows, stats)
    by_session = {sid: np.stack([w.vector for w in ws])
                  for sid, ws in _group_windows(standardized).items()}
    dataset = net.build_dataset(by_session, w=args.w, n_ctx=args.nctx, seed=args.seed)
    if not dataset:
        print("error: no trainable sessions (each needs >= 2 windows)", file=sys.stderr)
        return EXIT_INPUT
    model = net.init_mlp(layers, seed=args.seed)
    config = net.TrainConfig(learning_rate=args.lr, batch_size=args.batch,
                             epochs=args.epochs, seed=args.seed,
                             optimizer=args.optimizer)
    try:
        model, history = net.train(model, dataset, config)
    except net.TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    persist.write_model(model, args.out, stats=stats)
    print(f"trained {len(dataset)} samples, epoch loss "
          f"{history[0]:.6f} -> {history[-1]:.6f}, model at {args.out}")
    return EXIT_OK


def cmd_embed(args):
    model, stats = persist.read_model(args.model)
    if stats is None:
        print("error: model file carries no normalization stats", file=sys.stderr)
        return EXIT_INPUT
    windows = persist.read_features(args.features)
    dim = windows[0].vector.size
    if dim != model.layer_sizes[0]:
        print(f"error: feature dim {dim} != model input {model.layer_sizes[0]}",
              file=sys.stderr)
        return EXIT_INPUT
    standardized = functionals.standardize(windows, stats)
    mat = np.stack([w.vector for w in standardized])
    emb = net.embed(model, mat)
    out_windows = [
        functionals.FeatureWindow(vector=emb[i], session_id=w.session_id,
                                  group_id=w.group_id, start_time_s=w.start_time_s,
                                  window_len_s=w.window_len_s)
        for i, w in enumerate(windows)]
    persist.write_features(out_windows, args.out)
    print(f"embedded {len(out_windows)} windows to dim {emb.shape[1]} at {args.out}")
    return EXIT_OK


def cmd_classify(args):
    manifest = corpus.load_manifest(args.manifest)
    labels = corpus.binarize_ratings(manifest, args.behavior, args.fraction)
    windows = persist.read_features(args.features)
    by_session = _group_windows(windows)
    frames_by_session = {sid: np.stack([w.vector for w in ws])
                         for sid, ws in by_session.items()}
    groups_by_session = {sid: ws[0].group_id for sid, ws in by_session.items()}
    accuracy, predictions = evaluate.leave_one_group_out(
        frames_by_session, groups_by_session, labels)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["session_id", "group_id", "truth", "predicted"])
        for sid in sorted(predictions):
            pred, truth = predictions[sid]
            writer.writerow([sid, groups_by_session[sid], truth, pred])
        writer.writerow(["accuracy", "", "", repr(accuracy)])
    print(f"behavior {args.behavior}: accuracy {accuracy:.4f} "
          f"over {len(predictions)} sessions, results at {args.out}")
    return EXIT_OK


def cmd_similarity(args):
    manifest = corpus.load_manifest(args.manifest)
    windows = persist.read_features(args.embeddings)
    by_session = _group_windows(windows)
    frames = {sid: np.stack([w.vector for w in ws])
              for sid, ws in by_session.items()}
    references = {}
    for rec in manifest.records:
        if rec.scenario and rec.session_id in frames:
            references[rec.session_id] = (frames[rec.session_id], rec.scenario)
    if not references:
        print("error: no sessions with scenario tags and embeddings", file=sys.stderr)
        return EXIT_INPUT
    probes = {sid: frames[sid] for sid in references}
    sim = evaluate.similarity_matrix(probes, references)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["probe_id"] + sim.scenarios)
        for i, pid in enumerate(sim.probe_ids):
            writer.writerow([pid] + [repr(float(v)) for v in sim.scores[i]])
    print(f"similarity matrix {len(sim.probe_ids)}x{len(sim.scenarios)} at {args.out}")
    return EXIT_OK


GRADCHECK_TOPOLOGIES = (
    ([10, 8, 4, 8, 10], None),      # full coordinate sweep
    (net.DEFAULT_LAYERS, 200),      # seeded coordinate sample
)


def cmd_gradcheck(args):
    worst = 0.0
    for sizes, n_coords in GRADCHECK_TOPOLOGIES:
        for s in range(args.seeds):
            err = net.gradient_check(sizes, seed=args.seed + s, n_coords=n_coords)
            worst = max(worst, err)
            print(f"layers {sizes} seed {args.seed + s}: max rel err {err:.3e}")
    if worst >= args.tol:
        print(f"FAIL: max relative gradient error {worst:.3e} >= {args.tol:g}",
              file=sys.stderr)
        return EXIT_NUMERIC
    print(f"OK: max relative gradient error {worst:.3e} < {args.tol:g}")
    return EXIT_OK


def cmd_synth(args):
    manifest = corpus.synth_corpus(args.sessions, args.seconds, args.classes,
                                   args.seed, args.out)
    print(f"wrote {len(manifest.records)} sessions to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bmanifold",
        description="Unsupervised behavior-manifold toolkit for audio")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="extract 420-dim windowed functionals")
    p.add_argument("manifest")
    p.add_argument("--window", type=float, default=20.0, help="window length s")
    p.add_argument("--shift", type=float, default=1.0, help="window shift s")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train the context-reconstruction network")
    p.add_argument("features")
    p.add_argument("--layers", default=",".join(map(str, net.DEFAULT_LAYERS)))
    p.add_argument("--w", type=int, default=net.DEFAULT_CONTEXT_W)
    p.add_argument("--nctx", type=int, default=net.DEFAULT_N_CTX)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="extract 64-dim bottleneck embeddings")
    p.add_argument("model")
    p.add_argument("features")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("classify", help="leave-one-group-out NN classification")
    p.add_argument("features", help="420-dim features or 64-dim embeddings")
    p.add_argument("manifest")
    p.add_argument("--behavior", required=True)
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("similarity", help="cross-scenario similarity matrix")
    p.add_argument("embeddings")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("gradcheck", help="verify backprop against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=3, help="seeds per topology")
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--sessions", type=int, required=True)
    p.add_argument("--seconds", type=float, required=True)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except net.TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
