import wave

import numpy as np
import pytest

from bmanifold import corpus, lld


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadManifest:
    def test_two_rows(self, tmp_path):
        p = write_csv(tmp_path / "m.csv",
                      "session_id,wav_path,group_id,scenario\n"
                      "s1,a.wav,g1,\n"
                      "s2,b.wav,g2,talk\n")
        m = corpus.load_manifest(p)
        assert len(m.records) == 2
        assert m.records[0].scenario is None
        assert m.records[1].scenario == "talk"

    def test_ratings_parsed(self, tmp_path):
        p = write_csv(tmp_path / "m.csv",
                      "session_id,wav_path,group_id,scenario,rating:acceptance\n"
                      "s1,a.wav,g1,,3.5\n"
                      "s2,b.wav,g2,,\n")
        m = corpus.load_manifest(p)
        assert m.records[0].ratings == {"acceptance": 3.5}
        assert m.records[1].ratings == {}

    def test_rating_out_of_bounds_names_row(self, tmp_path):
        p = write_csv(tmp_path / "m.csv",
                      "session_id,wav_path,group_id,scenario,rating:acceptance\n"
                      "s1,a.wav,g1,,9.5\n")
        with pytest.raises(ValueError, match=r"row 2.*9\.5"):
            corpus.load_manifest(p)

    def test_empty_data_section(self, tmp_path):
        p = write_csv(tmp_path / "m.csv", "session_id,wav_path,group_id,scenario\n")
        with pytest.raises(ValueError, match="empty manifest"):
            corpus.load_manifest(p)

    def test_missing_column(self, tmp_path):
        p = write_csv(tmp_path / "m.csv", "session_id,wav_path\ns1,a.wav\n")
        with pytest.raises(ValueError, match="group_id"):
            corpus.load_manifest(p)

    def test_duplicate_session_id(self, tmp_path):
        p = write_csv(tmp_path / "m.csv",
                      "session_id,wav_path,group_id,scenario\n"
                      "s1,a.wav,g1,\ns1,b.wav,g2,\n")
        with pytest.raises(ValueError, match="duplicate session_id"):
            corpus.load_manifest(p)

    def test_roundtrip(self, tmp_path):
        m = corpus.Manifest([
            corpus.SessionRecord("s1", "/data/a.wav", "g1", "talk", {"acceptance": 2.0}),
            corpus.SessionRecord("s2", "/data/b.wav", "g1", None, {}),
        ])
        corpus.save_manifest(m, tmp_path / "m.csv")
        back = corpus.load_manifest(tmp_path / "m.csv")
        assert back == m


class TestReadAudio:
    def test_mono_passthrough(self, tmp_path):
        sig = corpus.AudioSignal(np.linspace(-0.5, 0.5, 16000), 16000)
        corpus.write_audio(sig, tmp_path / "a.wav")
        back = corpus.read_audio(tmp_path / "a.wav")
        assert back.sample_rate_hz == 16000
        assert back.samples.size == 16000

    def test_stereo_opposite_channels_cancel(self, tmp_path):
        x = (np.random.default_rng(0).integers(-32767, 32768, 1000)
             .astype("<i2"))
        inter = np.empty(2000, dtype="<i2")
        inter[0::2] = x
        inter[1::2] = -x
        with wave.open(str(tmp_path / "st.wav"), "wb") as wf:
            wf.setnchannels(2)
            wf.setsampwidth(2)
            wf.setframerate(16000)
            wf.writeframes(inter.tobytes())
        back = corpus.read_audio(tmp_path / "st.wav")
        assert np.array_equal(back.samples, np.zeros(1000))

    def test_max_amplitude_scaling(self, tmp_path):
        pcm = np.array([32767, 0, -32768], dtype="<i2")
        with wave.open(str(tmp_path / "m.wav"), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(16000)
            wf.writeframes(pcm.tobytes())
        back = corpus.read_audio(tmp_path / "m.wav")
        assert back.samples[0] == pytest.approx(32767 / 32768)
        assert back.samples[2] == -1.0

    def test_roundtrip_lossless_at_16bit(self, tmp_path):
        rng = np.random.default_rng(3)
        sig = corpus.AudioSignal(rng.uniform(-0.99, 0.99, 8000), 16000)
        corpus.write_audio(sig, tmp_path / "a.wav")
        once = corpus.read_audio(tmp_path / "a.wav")
        corpus.write_audio(once, tmp_path / "b.wav")
        twice = corpus.read_audio(tmp_path / "b.wav")
        assert np.array_equal(once.samples, twice.samples)

    def test_rejects_non_16bit(self, tmp_path):
        with wave.open(str(tmp_path / "w8.wav"), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(1)
            wf.setframerate(16000)
            wf.writeframes(b"\x80" * 100)
        with pytest.raises(ValueError, match="16-bit"):
            corpus.read_audio(tmp_path / "w8.wav")

    def test_rejects_garbage(self, tmp_path):
        (tmp_path / "x.wav").write_bytes(b"not a wav")
        with pytest.raises(ValueError):
            corpus.read_audio(tmp_path / "x.wav")


def _rated_manifest(ratings):
    return corpus.Manifest([
        corpus.SessionRecord(f"r{i + 1}", f"r{i + 1}.wav", f"g{i + 1}",
                             ratings={"code": r})
        for i, r in enumerate(ratings)])


class TestBinarizeRatings:
    def test_ten_sessions_fraction_02(self):
        m = _rated_manifest([float(v) for v in range(1, 11)])
        ls = corpus.binarize_ratings(m, "code", 0.2)
        assert ls.negative == {"r1", "r2"}
        assert ls.positive == {"r9", "r10"}
        assert len(ls.excluded) == 6

    def test_all_equal_tie_broken_by_session_id(self):
        m = _rated_manifest([5.0] * 10)
        ls = corpus.binarize_ratings(m, "code", 0.2)
        assert ls.negative == {"r1", "r10"}  # ascending session_id order
        assert ls.positive == {"r8", "r9"}

    def test_m_zero_rejected(self):
        m = _rated_manifest([1.0, 5.0, 9.0])
        with pytest.raises(ValueError, match="0 per extreme"):
            corpus.binarize_ratings(m, "code", 0.2)

    def test_no_rated_sessions(self):
        m = _rated_manifest([1.0, 9.0])
        with pytest.raises(ValueError, match="no session rated"):
            corpus.binarize_ratings(m, "other", 0.5)

    def test_partition_sizes(self):
        for n in (5, 7, 12, 23):
            m = _rated_manifest(list(np.linspace(1, 9, n)))
            ls = corpus.binarize_ratings(m, "code", 0.3)
            mm = int(np.floor(0.3 * n))
            assert len(ls.positive) == len(ls.negative) == mm
            assert len(ls.positive | ls.negative | ls.excluded) == n
            assert not (ls.positive & ls.negative)


class TestSynthCorpus:
    def test_deterministic(self, tmp_path):
        corpus.synth_corpus(2, 30, 2, seed=7, out_dir=tmp_path / "a")
        corpus.synth_corpus(2, 30, 2, seed=7, out_dir=tmp_path / "b")
        for name in ("s000.wav", "s001.wav", "manifest.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                   (tmp_path / "b" / name).read_bytes()

    def test_one_session_per_class(self, tmp_path):
        m = corpus.synth_corpus(2, 30, 2, seed=1, out_dir=tmp_path)
        assert [r.scenario for r in m.records] == ["class0", "class1"]
        assert m.records[0].ratings["synthetic"] == 1.0
        assert m.records[1].ratings["synthetic"] == 9.0

    def test_class0_pitch_contour(self, small_corpus):
        manifest, _ = small_corpus
        rec = manifest.records[0]
        assert rec.scenario == "class0"
        sig = corpus.read_audio(rec.audio_path)
        f0 = lld.extract_lld(sig).values[:, lld.COL_PITCH]
        voiced = f0[f0 > 0]
        assert voiced.size > 0.5 * f0.size
        in_range = np.mean((voiced >= 90) & (voiced <= 130))
        assert in_range >= 0.9

    def test_invalid_sizes(self, tmp_path):
        with pytest.raises(ValueError):
            corpus.synth_corpus(1, 30, 2, seed=0, out_dir=tmp_path)
        with pytest.raises(ValueError):
            corpus.synth_corpus(4, 10, 2, seed=0, out_dir=tmp_path)
