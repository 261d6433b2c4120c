"""Hot numeric kernels: numba-jitted loops with pure-numpy fallbacks.

Set BMANIFOLD_NO_NUMBA=1 to force the numpy path (also used automatically
when numba is not importable). Both paths compute the same quantities; the
numpy path may differ in the last float bits due to summation order.
"""

import os

import numpy as np

_EPS_ENERGY = 1e-20

_disabled = os.environ.get("BMANIFOLD_NO_NUMBA", "").strip() not in ("", "0")
if _disabled:
    HAVE_NUMBA = False
else:
    try:
        from numba import njit, prange
        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# pitch: normalized autocorrelation peak per frame

def _pitch_peaks_np(frames, lag_min, lag_max):
    n_frames, n = frames.shape
    hi = min(lag_max, n - 1)
    lags = np.zeros(n_frames)
    peaks = np.zeros(n_frames)
    if hi < lag_min:
        return lags, peaks

    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(frames, nfft)
    acf = np.fft.irfft(spec * np.conj(spec), nfft)[:, : hi + 2]
    r0 = acf[:, 0]
    ok = r0 > _EPS_ENERGY

    rn = np.zeros_like(acf)
    rn[ok] = acf[ok] / r0[ok, None]
    search = rn[:, lag_min : hi + 1]
    best = np.argmax(search, axis=1)
    rows = np.arange(n_frames)
    peak = search[rows, best]
    lag = (lag_min + best).astype(np.float64)

    # parabolic interpolation around interior peaks
    interior = (best > 0) & (best < search.shape[1] - 1)
    y0 = rn[rows, np.clip(lag_min + best - 1, 0, None)]
    y1 = peak
    y2 = rn[rows, np.minimum(lag_min + best + 1, hi + 1)]
    den = y0 - 2.0 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(den != 0.0, 0.5 * (y0 - y2) / den, 0.0)
    delta = np.clip(delta, -1.0, 1.0)
    lag = np.where(interior, lag + delta, lag)

    lags[ok] = lag[ok]
    peaks[ok] = peak[ok]
    return lags, peaks


if HAVE_NUMBA:

    @njit(cache=True)
    def _pitch_peaks_jit(frames, lag_min, lag_max):  # pragma: no cover
        n_frames, n = frames.shape
        lags = np.zeros(n_frames)
        peaks = np.zeros(n_frames)
        hi = min(lag_max, n - 1)
        if hi < lag_min:
            return lags, peaks
        m = hi - lag_min + 1
        for f in range(n_frames):
            x = frames[f]
            r0 = 0.0
            for i in range(n):
                r0 += x[i] * x[i]
            if r0 <= _EPS_ENERGY:
                continue
            rn = np.empty(m)
            for t in range(m):
                tau = lag_min + t
                s = 0.0
                for i in range(n - tau):
                    s += x[i] * x[i + tau]
                rn[t] = s / r0
            b = 0
            for t in range(1, m):
                if rn[t] > rn[b]:
                    b = t
            peak = rn[b]
            lag = float(lag_min + b)
            if 0 < b < m - 1:
                y0 = rn[b - 1]
                y2 = rn[b + 1]
                den = y0 - 2.0 * peak + y2
                if den != 0.0:
                    d = 0.5 * (y0 - y2) / den
                    if d > 1.0:
                        d = 1.0
                    elif d < -1.0:
                        d = -1.0
                    lag += d
            lags[f] = lag
            peaks[f] = peak
        return lags, peaks


def pitch_peaks(frames, lag_min, lag_max):
    """Per frame: interpolated lag of the normalized-ACF peak and its height.

    frames: (n_frames, n) float64. Returns (lags, peaks); lag 0 / peak 0 for
    zero-energy frames or an empty lag range.
    """
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    if HAVE_NUMBA:
        return _pitch_peaks_jit(frames, lag_min, lag_max)
    return _pitch_peaks_np(frames, lag_min, lag_max)


# ---------------------------------------------------------------------------
# Levinson-Durbin, convention x_hat[t] = sum_i a[i] * x[t-i]

def _levinson_batch_np(r):
    n_frames, p1 = r.shape
    order = p1 - 1
    out = np.zeros((n_frames, order))
    for f in range(n_frames):
        rf = r[f]
        if rf[0] <= _EPS_ENERGY:
            continue
        a = out[f]
        err = rf[0]
        for i in range(1, order + 1):
            acc = rf[i]
            for j in range(1, i):
                acc -= a[j - 1] * rf[i - j]
            k = acc / err
            prefix = a[: i - 1].copy()
            for j in range(1, i):
                a[j - 1] = prefix[j - 1] - k * prefix[i - j - 1]
            a[i - 1] = k
            err *= 1.0 - k * k
            if err <= 0.0:
                break
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _levinson_batch_jit(r):  # pragma: no cover
        n_frames, p1 = r.shape
        order = p1 - 1
        out = np.zeros((n_frames, order))
        tmp = np.empty(order)
        for f in range(n_frames):
            rf = r[f]
            if rf[0] <= _EPS_ENERGY:
                continue
            a = out[f]
            err = rf[0]
            for i in range(1, order + 1):
                acc = rf[i]
                for j in range(1, i):
                    acc -= a[j - 1] * rf[i - j]
                k = acc / err
                for j in range(i - 1):
                    tmp[j] = a[j]
                for j in range(1, i):
                    a[j - 1] = tmp[j - 1] - k * tmp[i - j - 1]
                a[i - 1] = k
                err *= 1.0 - k * k
                if err <= 0.0:
                    break
        return out


def levinson_batch(r):
    """Predictor coefficients from autocorrelations r[:, 0..order].

    Returns (n_frames, order). Rows with r[0] ~ 0 are all-zero; the
    recursion stops early (remaining coefficients 0) if the prediction
    error power drops to <= 0.
    """
    r = np.ascontiguousarray(r, dtype=np.float64)
    if HAVE_NUMBA:
        return _levinson_batch_jit(r)
    return _levinson_batch_np(r)


# ---------------------------------------------------------------------------
# brute-force nearest neighbor with group exclusion

def _nn_argmin_np(queries, refs, ref_groups, exclude_group):
    nq = queries.shape[0]
    pos = np.empty(nq, dtype=np.int64)
    dist = np.empty(nq)
    excluded = ref_groups == exclude_group
    for i in range(nq):
        d2 = np.sum((refs - queries[i]) ** 2, axis=1)
        d2[excluded] = np.inf
        p = int(np.argmin(d2))
        if np.isinf(d2[p]):
            pos[i] = -1
            dist[i] = np.inf
        else:
            pos[i] = p
            dist[i] = np.sqrt(d2[p])
    return pos, dist


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _nn_argmin_jit(queries, refs, ref_groups, exclude_group):  # pragma: no cover
        nq, d = queries.shape
        nr = refs.shape[0]
        pos = np.empty(nq, dtype=np.int64)
        dist = np.empty(nq)
        for i in prange(nq):
            best = -1
            best_d2 = np.inf
            for j in range(nr):
                if ref_groups[j] == exclude_group:
                    continue
                s = 0.0
                for k in range(d):
                    diff = queries[i, k] - refs[j, k]
                    s += diff * diff
                if s < best_d2:
                    best_d2 = s
                    best = j
            pos[i] = best
            dist[i] = np.sqrt(best_d2)
        return pos, dist


def nn_argmin(queries, refs, ref_groups, exclude_group=-1):
    """Euclidean nearest reference for each query row.

    ref_groups: int codes per reference; references whose code equals
    exclude_group are skipped (-1 excludes nothing). Ties go to the lowest
    position. Returns (positions, distances); position -1 if everything is
    excluded.
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    refs = np.ascontiguousarray(refs, dtype=np.float64)
    ref_groups = np.ascontiguousarray(ref_groups, dtype=np.int64)
    if HAVE_NUMBA:
        return _nn_argmin_jit(queries, refs, ref_groups, exclude_group)
    return _nn_argmin_np(queries, refs, ref_groups, exclude_group)
