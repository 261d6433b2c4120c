"""Frame-level low-level descriptors: 70 values per 10 ms frame.

Layout (fixed, 70 dims):
    0-12   MFCC (13)          13-25  delta MFCC
    26-35  log mel-filterbank energies (10)   36-45  delta MFB
    46-53  LPC coefficients (8)               54-61  delta LPC
    62 pitch Hz (0 = unvoiced)   63 delta pitch
    64 intensity dB              65 delta intensity
    66 jitter                    67 delta jitter
    68 shimmer                   69 delta shimmer

Intensity, peak amplitude (for shimmer) come from the raw frames; pitch,
spectral and LPC descriptors from the Hamming-windowed frames.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from . import kernels

LLD_DIM = 70
N_MFCC = 13
N_MFB = 10
N_MEL_FILTERS_MFCC = 26
LPC_ORDER = 8
FFT_LEN = 512

FRAME_MS = 25.0
HOP_MS = 10.0

PITCH_MIN_HZ = 75.0
PITCH_MAX_HZ = 500.0
VOICING_THRESHOLD = 0.3

LOG_FLOOR = 1e-10

# column offsets into the 70-dim layout
COL_MFCC = 0
COL_DMFCC = 13
COL_MFB = 26
COL_DMFB = 36
COL_LPC = 46
COL_DLPC = 54
COL_PITCH = 62
COL_DPITCH = 63
COL_INTENSITY = 64
COL_DINTENSITY = 65
COL_JITTER = 66
COL_DJITTER = 67
COL_SHIMMER = 68
COL_DSHIMMER = 69


@dataclass
class LldSequence:
    """LLD matrix (n_frames, 70) with per-frame start times in seconds."""
    values: np.ndarray
    times: np.ndarray


def _frame_raw(samples, frame_len, hop_len):
    n = samples.size
    if n < frame_len:
        raise ValueError(f"signal of {n} samples shorter than one {frame_len}-sample frame")
    n_frames = (n - frame_len) // hop_len + 1
    strides = (samples.strides[0] * hop_len, samples.strides[0])
    view = np.lib.stride_tricks.as_strided(
        samples, shape=(n_frames, frame_len), strides=strides)
    return np.ascontiguousarray(view)


def frame_signal(signal, frame_ms=FRAME_MS, hop_ms=HOP_MS):
    """Slice a signal into Hamming-windowed frames (trailing partial dropped)."""
    if not frame_ms > hop_ms > 0:
        raise ValueError(f"need frame_ms > hop_ms > 0, got {frame_ms}, {hop_ms}")
    fs = signal.sample_rate_hz
    frame_len = int(round(frame_ms * fs / 1000.0))
    hop_len = int(round(hop_ms * fs / 1000.0))
    return _frame_raw(signal.samples, frame_len, hop_len) * np.hamming(frame_len)


def intensity_db(frame):
    """Mean-power level in dB with a 1e-10 floor (silence -> -100 dB)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size == 0:
        raise ValueError("empty frame")
    return 10.0 * np.log10(np.mean(frame ** 2) + LOG_FLOOR)


def _lag_range(sample_rate_hz):
    lag_min = int(np.ceil(sample_rate_hz / PITCH_MAX_HZ))
    lag_max = int(np.floor(sample_rate_hz / PITCH_MIN_HZ))
    return lag_min, lag_max


def _lags_to_f0(lags, peaks, sample_rate_hz):
    voiced = (peaks >= VOICING_THRESHOLD) & (lags > 0)
    f0 = np.zeros_like(lags)
    f0[voiced] = np.clip(sample_rate_hz / lags[voiced], PITCH_MIN_HZ, PITCH_MAX_HZ)
    return f0


def pitch_acf(frame, sample_rate_hz):
    """F0 in Hz via the normalized-autocorrelation peak; 0 when unvoiced."""
    frame = np.asarray(frame, dtype=np.float64)
    lag_min, lag_max = _lag_range(sample_rate_hz)
    lags, peaks = kernels.pitch_peaks(frame[None, :], lag_min, lag_max)
    return float(_lags_to_f0(lags, peaks, sample_rate_hz)[0])


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(sample_rate_hz, n_filters, n_fft=FFT_LEN):
    """Triangular filters equally spaced on the mel scale over [0, fs/2].

    Returns (n_filters, n_fft//2 + 1) weights.
    """
    mel_pts = np.linspace(0.0, _hz_to_mel(sample_rate_hz / 2.0), n_filters + 2)
    hz_pts = _mel_to_hz(mel_pts)
    bin_freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate_hz)
    fb = np.zeros((n_filters, bin_freqs.size))
    for i in range(n_filters):
        lo, mid, hi = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        rising = (bin_freqs - lo) / (mid - lo)
        falling = (hi - bin_freqs) / (hi - mid)
        fb[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def _power_spectrum(frames, n_fft=FFT_LEN):
    return np.abs(scipy.fft.rfft(frames, n_fft, axis=-1)) ** 2


def _log_mel(power, sample_rate_hz, n_filters):
    fb = mel_filterbank(sample_rate_hz, n_filters)
    return np.log(np.maximum(power @ fb.T, LOG_FLOOR))


def mel_spectrum(frame, sample_rate_hz, n_filters):
    """Log mel-filterbank energies (natural log, floor 1e-10)."""
    if n_filters < 1:
        raise ValueError("n_filters must be >= 1")
    frame = np.asarray(frame, dtype=np.float64)
    return _log_mel(_power_spectrum(frame), sample_rate_hz, n_filters)


def mfcc(frame, sample_rate_hz):
    """First 13 coefficients of the orthonormal DCT-II of 26 log mel energies."""
    logmel = mel_spectrum(frame, sample_rate_hz, N_MEL_FILTERS_MFCC)
    return scipy.fft.dct(logmel, type=2, norm="ortho", axis=-1)[..., :N_MFCC]


def _autocorr(frames, order):
    n = frames.shape[-1]
    r = np.empty(frames.shape[:-1] + (order + 1,))
    for k in range(order + 1):
        r[..., k] = np.sum(frames[..., : n - k] * frames[..., k:], axis=-1)
    return r


def lpc(frame, order=LPC_ORDER):
    """Linear-prediction coefficients a with x_hat[t] = sum_i a[i]*x[t-i]."""
    frame = np.asarray(frame, dtype=np.float64)
    if order < 1 or order >= frame.shape[-1]:
        raise ValueError(f"invalid LPC order {order} for frame length {frame.shape[-1]}")
    r = _autocorr(frame[None, :], order)
    return kernels.levinson_batch(r)[0]


def jitter_shimmer(pitch_contour, peak_amplitudes):
    """Frame-difference surrogates for cycle-level jitter and shimmer.

    jitter[k] compares pitch periods of adjacent voiced frames; shimmer[k]
    compares adjacent positive peak amplitudes. Index 0 and any frame whose
    pair member is unvoiced / silent get 0.
    """
    f0 = np.asarray(pitch_contour, dtype=np.float64)
    amp = np.asarray(peak_amplitudes, dtype=np.float64)
    if f0.shape != amp.shape:
        raise ValueError("pitch and amplitude contours must have equal length")
    n = f0.size
    jitter = np.zeros(n)
    shimmer = np.zeros(n)
    if n < 2:
        return jitter, shimmer

    both_voiced = (f0[1:] > 0) & (f0[:-1] > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        period = np.where(f0 > 0, 1.0 / np.where(f0 > 0, f0, 1.0), 0.0)
        dperiod = np.abs(period[1:] - period[:-1])
        mperiod = 0.5 * (period[1:] + period[:-1])
        jitter[1:] = np.where(both_voiced, dperiod / np.where(mperiod > 0, mperiod, 1.0), 0.0)

        both_pos = (amp[1:] > 0) & (amp[:-1] > 0)
        damp = np.abs(amp[1:] - amp[:-1])
        mamp = 0.5 * (amp[1:] + amp[:-1])
        shimmer[1:] = np.where(both_pos, damp / np.where(mamp > 0, mamp, 1.0), 0.0)
    return jitter, shimmer


def delta(contour):
    """Two-point regression derivative with edge replication.

    delta[t] = sum_{n=1,2} n*(x[t+n] - x[t-n]) / 10; constant input -> 0,
    linear input -> slope at interior points.
    """
    x = np.asarray(contour, dtype=np.float64)
    if x.shape[0] < 1:
        raise ValueError("empty contour")
    pad = ((2, 2),) + ((0, 0),) * (x.ndim - 1)
    xp = np.pad(x, pad, mode="edge")
    return (1.0 * (xp[3:-1] - xp[1:-3]) + 2.0 * (xp[4:] - xp[:-4])) / 10.0


def extract_lld(signal):
    """Full 70-dim LLD sequence at 100 Hz (10 ms hop, 25 ms frames)."""
    fs = signal.sample_rate_hz
    frame_len = int(round(FRAME_MS * fs / 1000.0))
    hop_len = int(round(HOP_MS * fs / 1000.0))
    raw = _frame_raw(signal.samples, frame_len, hop_len)
    win = raw * np.hamming(frame_len)
    n_frames = raw.shape[0]

    intensity = 10.0 * np.log10(np.mean(raw ** 2, axis=1) + LOG_FLOOR)
    peak_amp = np.max(np.abs(raw), axis=1)

    lag_min, lag_max = _lag_range(fs)
    lags, peaks = kernels.pitch_peaks(win, lag_min, lag_max)
    f0 = _lags_to_f0(lags, peaks, fs)

    power = _power_spectrum(win)
    mfb = _log_mel(power, fs, N_MFB)
    logmel26 = _log_mel(power, fs, N_MEL_FILTERS_MFCC)
    cc = scipy.fft.dct(logmel26, type=2, norm="ortho", axis=-1)[:, :N_MFCC]

    a = kernels.levinson_batch(_autocorr(win, LPC_ORDER))

    jit, shim = jitter_shimmer(f0, peak_amp)

    values = np.empty((n_frames, LLD_DIM))
    values[:, COL_MFCC:COL_MFCC + N_MFCC] = cc
    values[:, COL_DMFCC:COL_DMFCC + N_MFCC] = delta(cc)
    values[:, COL_MFB:COL_MFB + N_MFB] = mfb
    values[:, COL_DMFB:COL_DMFB + N_MFB] = delta(mfb)
    values[:, COL_LPC:COL_LPC + LPC_ORDER] = a
    values[:, COL_DLPC:COL_DLPC + LPC_ORDER] = delta(a)
    values[:, COL_PITCH] = f0
    values[:, COL_DPITCH] = delta(f0)
    values[:, COL_INTENSITY] = intensity
    values[:, COL_DINTENSITY] = delta(intensity)
    values[:, COL_JITTER] = jit
    values[:, COL_DJITTER] = delta(jit)
    values[:, COL_SHIMMER] = shim
    values[:, COL_DSHIMMER] = delta(shim)

    times = np.arange(n_frames) * (hop_len / fs)
    return LldSequence(values=values, times=times)
