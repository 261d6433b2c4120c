"""Dataset manifests, WAV ingestion, label binarization, synthetic corpus.

Manifest CSV format: header ``session_id,wav_path,group_id,scenario`` plus
any number of ``rating:<code>`` columns; empty cells mean "absent". Audio
is RIFF/WAVE PCM, 16-bit little-endian.
"""

import csv
import math
import wave
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

PCM_SCALE = 32768.0
RATING_MIN = 1.0
RATING_MAX = 9.0
SYNTH_BEHAVIOR_CODE = "synthetic"


@dataclass
class AudioSignal:
    samples: np.ndarray          # float64 in [-1, 1], mono
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("audio must be a non-empty 1-D sample sequence")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio contains non-finite samples")
        if self.sample_rate_hz < 8000:
            raise ValueError(f"sample rate {self.sample_rate_hz} Hz below 8000 Hz minimum")

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


@dataclass
class SessionRecord:
    session_id: str
    audio_path: str
    group_id: str
    scenario: str | None = None
    ratings: dict[str, float] = field(default_factory=dict)


@dataclass
class Manifest:
    records: list[SessionRecord]

    def __post_init__(self):
        if not self.records:
            raise ValueError("empty manifest")
        seen_ids = set()
        seen_paths = set()
        for rec in self.records:
            if rec.session_id in seen_ids:
                raise ValueError(f"duplicate session_id {rec.session_id!r}")
            if rec.audio_path in seen_paths:
                raise ValueError(f"duplicate audio path {rec.audio_path!r}")
            seen_ids.add(rec.session_id)
            seen_paths.add(rec.audio_path)

    def by_id(self, session_id):
        for rec in self.records:
            if rec.session_id == session_id:
                return rec
        raise KeyError(session_id)


@dataclass
class BinaryLabelSet:
    behavior_code: str
    positive: set[str]
    negative: set[str]
    excluded: set[str]


REQUIRED_COLUMNS = ("session_id", "wav_path", "group_id", "scenario")
RATING_PREFIX = "rating:"


def load_manifest(path):
    """Parse a manifest CSV into a Manifest; errors name the offending row."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty manifest") from None
        header = [h.strip() for h in header]
        for col in REQUIRED_COLUMNS:
            if col not in header:
                raise ValueError(f"missing required column {col!r}")
        idx = {name: header.index(name) for name in REQUIRED_COLUMNS}
        rating_cols = [(i, h[len(RATING_PREFIX):]) for i, h in enumerate(header)
                       if h.startswith(RATING_PREFIX)]

        records = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ValueError(f"row {row_no}: expected {len(header)} cells, got {len(row)}")
            ratings = {}
            for i, code in rating_cols:
                cell = row[i].strip()
                if not cell:
                    continue
                value = float(cell)
                if not RATING_MIN <= value <= RATING_MAX:
                    raise ValueError(
                        f"row {row_no}: rating:{code}={value} outside "
                        f"[{RATING_MIN:g}, {RATING_MAX:g}]")
                ratings[code] = value
            scenario = row[idx["scenario"]].strip() or None
            wav = Path(row[idx["wav_path"]].strip())
            if not wav.is_absolute():
                wav = path.parent / wav  # relative to the manifest location
            records.append(SessionRecord(
                session_id=row[idx["session_id"]].strip(),
                audio_path=str(wav),
                group_id=row[idx["group_id"]].strip(),
                scenario=scenario,
                ratings=ratings,
            ))
    if not records:
        raise ValueError("empty manifest")
    return Manifest(records)


def save_manifest(manifest, path):
    codes = sorted({c for rec in manifest.records for c in rec.ratings})
    header = list(REQUIRED_COLUMNS) + [RATING_PREFIX + c for c in codes]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in manifest.records:
            row = [rec.session_id, rec.audio_path, rec.group_id, rec.scenario or ""]
            row += [repr(rec.ratings[c]) if c in rec.ratings else "" for c in codes]
            writer.writerow(row)


def read_audio(path):
    """Read a 16-bit PCM WAV file; multi-channel input is averaged to mono."""
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getsampwidth() != 2:
                raise ValueError(
                    f"{path}: unsupported encoding (need 16-bit PCM, "
                    f"got {8 * wf.getsampwidth()}-bit)")
            n_channels = wf.getnchannels()
            n_frames = wf.getnframes()
            rate = wf.getframerate()
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        raise ValueError(f"{path}: not a readable WAV file ({exc})") from exc
    if len(raw) < 2 * n_channels * n_frames:
        raise ValueError(f"{path}: truncated file")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return AudioSignal(samples=data / PCM_SCALE, sample_rate_hz=rate)


def write_audio(signal, path):
    """Write a mono AudioSignal as 16-bit PCM WAV (values clipped to range)."""
    pcm = np.clip(np.round(signal.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(signal.sample_rate_hz)
        wf.writeframes(pcm.tobytes())


def binarize_ratings(manifest, behavior_code, fraction=0.2):
    """Split rated sessions into extremes: the bottom and top ``fraction``.

    Ties at either cut are broken by ascending session_id, so the result is
    deterministic for any rating distribution.
    """
    if not 0.0 < fraction <= 0.5:
        raise ValueError(f"fraction must be in (0, 0.5], got {fraction}")
    rated = [(rec.ratings[behavior_code], rec.session_id)
             for rec in manifest.records if behavior_code in rec.ratings]
    if not rated:
        raise ValueError(f"no session rated for behavior {behavior_code!r}")
    rated.sort()
    n = len(rated)
    m = math.floor(fraction * n)
    if m == 0:
        raise ValueError(
            f"fraction {fraction} of {n} rated sessions selects 0 per extreme")
    negative = {sid for _, sid in rated[:m]}
    positive = {sid for _, sid in rated[-m:]}
    excluded = {sid for _, sid in rated[m:n - m]}
    return BinaryLabelSet(behavior_code=behavior_code, positive=positive,
                          negative=negative, excluded=excluded)


# ---------------------------------------------------------------------------
# synthetic corpus

SYNTH_SAMPLE_RATE = 16000
_SYNTH_N_HARMONICS = 6
_SYNTH_SNR_DB = 20.0
_SYNTH_WALK_HZ = 4.0      # control-point rate of the pitch random walk
_SYNTH_WALK_SPAN = 0.1    # +-10% around the class fundamental


def _class_fundamental(cls):
    return 110.0 * (cls + 1)


def _class_tilt(cls):
    # spectral rolloff exponent; higher class -> steeper harmonic decay
    return 0.8 + 0.7 * cls


def _render_session(rng, n_samples, cls):
    fs = SYNTH_SAMPLE_RATE
    center = _class_fundamental(cls)

    n_ctrl = max(int(math.ceil(n_samples / fs * _SYNTH_WALK_HZ)), 2) + 1
    walk = np.cumsum(rng.standard_normal(n_ctrl))
    walk /= max(1.0, np.max(np.abs(walk)))
    t_ctrl = np.linspace(0.0, n_samples, n_ctrl)
    f0 = center * (1.0 + _SYNTH_WALK_SPAN * np.interp(np.arange(n_samples), t_ctrl, walk))

    phase = 2.0 * np.pi * np.cumsum(f0) / fs
    tilt = _class_tilt(cls)
    sig = np.zeros(n_samples)
    for k in range(1, _SYNTH_N_HARMONICS + 1):
        sig += k ** (-tilt) * np.sin(k * phase + rng.uniform(0.0, 2.0 * np.pi))

    power = np.mean(sig ** 2)
    noise_std = math.sqrt(power / 10.0 ** (_SYNTH_SNR_DB / 10.0))
    sig += noise_std * rng.standard_normal(n_samples)

    sig *= 0.5 / np.max(np.abs(sig))
    return AudioSignal(samples=sig, sample_rate_hz=fs)


def synth_corpus(n_sessions, session_len_s, n_classes, seed, out_dir):
    """Generate a deterministic labeled corpus of harmonic-source sessions.

    Each session gets a latent class (round-robin), a distinct group_id, a
    scenario tag naming the class, and a rating under the "synthetic"
    behavior code spread over [1, 9] by class. Returns the Manifest; WAV
    files and manifest.csv are written under out_dir.
    """
    if n_classes < 1 or n_sessions < max(n_classes, 2):
        raise ValueError(
            f"need n_sessions >= max(n_classes, 2), got {n_sessions} and {n_classes}")
    if session_len_s < 30:
        raise ValueError(f"session_len_s must be >= 30, got {session_len_s}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_samples = int(round(session_len_s * SYNTH_SAMPLE_RATE))

    records = []
    for i in range(n_sessions):
        cls = i % n_classes
        rng = np.random.default_rng([seed, i])
        signal = _render_session(rng, n_samples, cls)
        session_id = f"s{i:03d}"
        wav_name = f"{session_id}.wav"
        write_audio(signal, out_dir / wav_name)
        if n_classes == 1:
            rating = RATING_MIN
        else:
            rating = RATING_MIN + (RATING_MAX - RATING_MIN) * cls / (n_classes - 1)
        records.append(SessionRecord(
            session_id=session_id,
            audio_path=wav_name,
            group_id=f"g{i:03d}",
            scenario=f"class{cls}",
            ratings={SYNTH_BEHAVIOR_CODE: rating},
        ))
    # manifest.csv carries paths relative to itself so the corpus relocates;
    # the returned Manifest resolves them for direct use
    save_manifest(Manifest(records), out_dir / "manifest.csv")
    resolved = [replace(rec, audio_path=str(out_dir / rec.audio_path))
                for rec in records]
    return Manifest(resolved)
