"""Nearest-neighbor behavior evaluation.

Frame-level labels come from the nearest labeled reference frame (Euclidean
distance), with the query's own group excluded from the index; session
labels by majority vote. Cross-scenario similarity scores are per-scenario
fractions of nearest-frame hits.
"""

from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import kernels

LABEL_POSITIVE = "positive"
LABEL_NEGATIVE = "negative"


@dataclass
class ReferenceIndex:
    vectors: np.ndarray          # (n, d)
    labels: np.ndarray           # (n,) str
    group_ids: np.ndarray        # (n,) str
    session_ids: np.ndarray      # (n,) str

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        self.group_ids = np.asarray(self.group_ids)
        self.session_ids = np.asarray(self.session_ids)
        n = self.vectors.shape[0]
        if not (len(self.labels) == len(self.group_ids) == len(self.session_ids) == n):
            raise ValueError("index fields must have equal length")

    def group_codes(self, exclude_group):
        """Integer group codes plus the code of exclude_group (-1 if absent)."""
        uniq, codes = np.unique(self.group_ids, return_inverse=True)
        where = np.nonzero(uniq == exclude_group)[0]
        excl = int(where[0]) if where.size else -1
        return codes.astype(np.int64), excl


def nn_search(query, index, exclude_group=None):
    """Position of the nearest reference, skipping exclude_group; ties to
    the lowest position."""
    codes, excl = index.group_codes(exclude_group)
    if exclude_group is not None and np.all(codes == excl):
        raise ValueError(f"excluding group {exclude_group!r} empties the index")
    pos, _ = kernels.nn_argmin(np.asarray(query, dtype=np.float64)[None, :],
                               index.vectors, codes,
                               excl if exclude_group is not None else -1)
    return int(pos[0])


def classify_session(frames, index, group):
    """Majority vote over per-frame nearest-reference labels.

    Ties go to the class with the smaller summed nearest distances, then to
    the lexicographically smaller label. Returns (label, vote_counts).
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError("need a non-empty (n_frames, d) array")
    codes, excl = index.group_codes(group)
    if np.all(codes == excl):
        raise ValueError(f"excluding group {group!r} empties the index")
    pos, dist = kernels.nn_argmin(frames, index.vectors, codes, excl)
    assert not np.any(index.group_ids[pos] == group), "reference leaked from excluded group"

    votes = Counter(index.labels[pos].tolist())
    dist_by_label = {}
    for label in votes:
        dist_by_label[label] = float(dist[index.labels[pos] == label].sum())
    winner = min(votes, key=lambda lb: (-votes[lb], dist_by_label[lb], lb))
    return winner, dict(votes)


def build_index(frames_by_session, groups_by_session, labels):
    """Reference index over all frames of labeled (positive/negative) sessions."""
    vecs, labs, groups, sids = [], [], [], []
    for sid, frames in frames_by_session.items():
        if sid in labels.positive:
            label = LABEL_POSITIVE
        elif sid in labels.negative:
            label = LABEL_NEGATIVE
        else:
            continue
        frames = np.asarray(frames, dtype=np.float64)
        vecs.append(frames)
        labs += [label] * frames.shape[0]
        groups += [groups_by_session[sid]] * frames.shape[0]
        sids += [sid] * frames.shape[0]
    if not vecs:
        raise ValueError("no labeled sessions with frames")
    return ReferenceIndex(vectors=np.vstack(vecs), labels=np.array(labs),
                          group_ids=np.array(groups), session_ids=np.array(sids))


def leave_one_group_out(frames_by_session, groups_by_session, labels):
    """Classify every labeled session with its own group excluded.

    Returns (accuracy, predictions) where predictions maps session_id to
    (predicted, truth).
    """
    index = build_index(frames_by_session, groups_by_session, labels)
    if len(set(index.group_ids.tolist())) < 2:
        raise ValueError("need labeled sessions from at least 2 groups")
    predictions = {}
    correct = 0
    for sid, frames in frames_by_session.items():
        if sid in labels.positive:
            truth = LABEL_POSITIVE
        elif sid in labels.negative:
            truth = LABEL_NEGATIVE
        else:
            continue
        pred, _ = classify_session(np.asarray(frames), index, groups_by_session[sid])
        predictions[sid] = (pred, truth)
        correct += pred == truth
    accuracy = correct / len(predictions)
    return accuracy, predictions


@dataclass
class SimilarityMatrix:
    probe_ids: list
    scenarios: list
    scores: np.ndarray           # (n_probes, n_scenarios), rows sum to 1


def similarity_matrix(probe_frames, reference_frames):
    """Per-scenario nearest-frame fractions for each probe file.

    probe_frames: mapping probe_id -> (n, d) frames.
    reference_frames: mapping file_id -> (frames, scenario_tag). A probe's
    own file is excluded from its reference pool.
    """
    scenarios = sorted({scen for _, scen in reference_frames.values()})
    scen_pos = {s: i for i, s in enumerate(scenarios)}

    file_ids = list(reference_frames)
    ref_mat = np.vstack([np.asarray(reference_frames[f][0], dtype=np.float64)
                         for f in file_ids])
    ref_file_codes = np.concatenate([
        np.full(len(reference_frames[f][0]), i, dtype=np.int64)
        for i, f in enumerate(file_ids)])
    ref_scen_idx = np.concatenate([
        np.full(len(reference_frames[f][0]), scen_pos[reference_frames[f][1]],
                dtype=np.int64)
        for f in file_ids])

    probe_ids = list(probe_frames)
    scores = np.zeros((len(probe_ids), len(scenarios)))
    for pi, pid in enumerate(probe_ids):
        frames = np.asarray(probe_frames[pid], dtype=np.float64)
        if frames.shape[0] == 0:
            continue
        excl = file_ids.index(pid) if pid in reference_frames else -1
        if excl >= 0 and np.all(ref_file_codes == excl):
            raise ValueError(f"probe {pid!r} has no references outside its own file")
        pos, _ = kernels.nn_argmin(frames, ref_mat, ref_file_codes, excl)
        hits = np.bincount(ref_scen_idx[pos], minlength=len(scenarios))
        scores[pi] = hits / frames.shape[0]
    return SimilarityMatrix(probe_ids=probe_ids, scenarios=scenarios, scores=scores)
