"""Windowed statistical functionals over LLD sequences.

Each window of LLD frames becomes one 420-dim vector: for every one of the
70 LLDs, in order, the six functionals [min (1st pct), max (99th pct),
range, mean, median, population std] laid out contiguously.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .lld import LLD_DIM

log = logging.getLogger(__name__)

N_FUNCTIONALS = 6
FEATURE_DIM = LLD_DIM * N_FUNCTIONALS  # 420
FRAME_RATE_HZ = 100
STD_FLOOR = 1e-8


@dataclass
class FeatureWindow:
    vector: np.ndarray           # (420,)
    session_id: str
    group_id: str
    start_time_s: float
    window_len_s: float


@dataclass
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray              # floored at STD_FLOOR, strictly positive


def percentile(values, p):
    """Linear-interpolation percentile: rank r = (p/100)*(n-1)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty input")
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"percentile {p} outside [0, 100]")
    return float(_percentile_cols(values.reshape(-1, 1), p)[0])


def _percentile_cols(mat, p):
    """Percentile down axis 0 of a 2-D array, one value per column."""
    srt = np.sort(mat, axis=0)
    n = mat.shape[0]
    r = (p / 100.0) * (n - 1)
    lo = int(np.floor(r))
    hi = int(np.ceil(r))
    frac = r - lo
    return srt[lo] + frac * (srt[hi] - srt[lo])


def window_functionals(llds, window_s, shift_s, session_id, group_id):
    """Summarize an LldSequence into FeatureWindows.

    Windows cover exactly window_s*100 frames with a shift_s*100 frame hop;
    a trailing incomplete window is dropped. A session shorter than one
    window yields an empty list (logged, not an error).
    """
    if window_s <= 0 or shift_s <= 0:
        raise ValueError("window_s and shift_s must be positive")
    values = llds.values
    win_frames = int(round(window_s * FRAME_RATE_HZ))
    hop_frames = int(round(shift_s * FRAME_RATE_HZ))
    n = values.shape[0]
    if n < win_frames:
        log.warning("session %s: %d frames < one %d-frame window, skipping",
                    session_id, n, win_frames)
        return []

    n_windows = (n - win_frames) // hop_frames + 1
    windows = []
    for w in range(n_windows):
        block = values[w * hop_frames : w * hop_frames + win_frames]
        lo = _percentile_cols(block, 1.0)
        hi = _percentile_cols(block, 99.0)
        med = _percentile_cols(block, 50.0)
        vec = np.empty(FEATURE_DIM)
        vec[0::N_FUNCTIONALS] = lo
        vec[1::N_FUNCTIONALS] = hi
        vec[2::N_FUNCTIONALS] = hi - lo
        vec[3::N_FUNCTIONALS] = block.mean(axis=0)
        vec[4::N_FUNCTIONALS] = med
        vec[5::N_FUNCTIONALS] = block.std(axis=0)
        windows.append(FeatureWindow(
            vector=vec,
            session_id=session_id,
            group_id=group_id,
            start_time_s=float(llds.times[w * hop_frames]),
            window_len_s=window_s,
        ))
    return windows


def fit_stats(windows):
    """Per-dimension mean/std over a training set of FeatureWindows."""
    if not windows:
        raise ValueError("cannot fit stats on an empty window set")
    mat = np.stack([w.vector for w in windows])
    return FeatureStats(mean=mat.mean(axis=0),
                        std=np.maximum(mat.std(axis=0), STD_FLOOR))


def standardize(windows, stats):
    return [replace(w, vector=(w.vector - stats.mean) / stats.std) for w in windows]


def destandardize(windows, stats):
    return [replace(w, vector=w.vector * stats.std + stats.mean) for w in windows]
