"""Bit-exact binary persistence for feature windows and models.

Feature file ("BMF1"): header = magic, version u16, dim u32, count u64;
then per record: session_id and group_id as u16-length-prefixed UTF-8,
start_time_ms u32, dim float32 values. All little-endian.

Model file ("BMM1"): magic, version u16, n_layers u16, layer sizes u32
each, activation tag u8 (0 = tanh hidden / linear output), bottleneck
index u16, per-layer row-major float32 weights then biases, then a u8
stats flag followed (if 1) by input_dim float32 means and stds.

Values are float32 on disk and float64 in memory; a write/read/write
round trip reproduces identical bytes.
"""

import struct

import numpy as np

from .functionals import FeatureStats, FeatureWindow
from .net import MlpModel

FEATURE_MAGIC = b"BMF1"
MODEL_MAGIC = b"BMM1"
FORMAT_VERSION = 1
ACTIVATION_TANH = 0


class FormatError(ValueError):
    pass


def _write_str(fh, s):
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("string too long for u16 length prefix")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)


def _read_exact(fh, n):
    raw = fh.read(n)
    if len(raw) != n:
        raise FormatError("truncated file")
    return raw


def _read_str(fh):
    (n,) = struct.unpack("<H", _read_exact(fh, 2))
    return _read_exact(fh, n).decode("utf-8")


def write_features(windows, path):
    if not windows:
        raise ValueError("no feature windows to write")
    dim = windows[0].vector.size
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<HIQ", FORMAT_VERSION, dim, len(windows)))
        for w in windows:
            if w.vector.size != dim:
                raise ValueError("inconsistent feature dimensions")
            _write_str(fh, w.session_id)
            _write_str(fh, w.group_id)
            fh.write(struct.pack("<I", int(round(w.start_time_s * 1000.0))))
            fh.write(np.asarray(w.vector, dtype="<f4").tobytes())


def read_features(path):
    """Read a feature file back into FeatureWindows.

    window_len_s is not persisted and comes back as 0.0.
    """
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4)
        if magic != FEATURE_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
        version, dim, count = struct.unpack("<HIQ", _read_exact(fh, 14))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported feature-file version {version}")
        windows = []
        for _ in range(count):
            session_id = _read_str(fh)
            group_id = _read_str(fh)
            (start_ms,) = struct.unpack("<I", _read_exact(fh, 4))
            vec = np.frombuffer(_read_exact(fh, 4 * dim), dtype="<f4").astype(np.float64)
            windows.append(FeatureWindow(
                vector=vec, session_id=session_id, group_id=group_id,
                start_time_s=start_ms / 1000.0, window_len_s=0.0))
        if fh.read(1):
            raise FormatError("trailing bytes after last record")
    return windows


def write_model(model, path, stats=None):
    sizes = model.layer_sizes
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<HH", FORMAT_VERSION, len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        fh.write(struct.pack("<BH", ACTIVATION_TANH, model.bottleneck_index))
        for w, b in zip(model.weights, model.biases):
            fh.write(np.asarray(w, dtype="<f4").tobytes())
            fh.write(np.asarray(b, dtype="<f4").tobytes())
        if stats is None:
            fh.write(struct.pack("<B", 0))
        else:
            fh.write(struct.pack("<B", 1))
            fh.write(np.asarray(stats.mean, dtype="<f4").tobytes())
            fh.write(np.asarray(stats.std, dtype="<f4").tobytes())


def read_model(path):
    """Returns (MlpModel, FeatureStats or None)."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4)
        if magic != MODEL_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}")
        version, n_layers = struct.unpack("<HH", _read_exact(fh, 4))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported model-file version {version}")
        sizes = list(struct.unpack(f"<{n_layers}I", _read_exact(fh, 4 * n_layers)))
        activation, bottleneck_index = struct.unpack("<BH", _read_exact(fh, 3))
        if activation != ACTIVATION_TANH:
            raise FormatError(f"unknown activation tag {activation}")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(np.frombuffer(
                _read_exact(fh, 4 * fan_in * fan_out), dtype="<f4"
            ).astype(np.float64).reshape(fan_in, fan_out))
            biases.append(np.frombuffer(
                _read_exact(fh, 4 * fan_out), dtype="<f4").astype(np.float64))
        (has_stats,) = struct.unpack("<B", _read_exact(fh, 1))
        stats = None
        if has_stats:
            dim = sizes[0]
            mean = np.frombuffer(_read_exact(fh, 4 * dim), dtype="<f4").astype(np.float64)
            std = np.frombuffer(_read_exact(fh, 4 * dim), dtype="<f4").astype(np.float64)
            stats = FeatureStats(mean=mean, std=std)
        if fh.read(1):
            raise FormatError("trailing bytes after model payload")
    model = MlpModel(layer_sizes=sizes, weights=weights, biases=biases,
                     bottleneck_index=bottleneck_index)
    return model, stats
