import numpy as np
import pytest
from hypothesis import given, strategies as st

from rgbspo2 import ingest
from rgbspo2.errors import CorruptInputError, InvalidHeaderError, InvalidTraceError, EmptySessionError
from rgbspo2.ingest import FrameSequence, ReferenceTrace, RgbTrace


def _raw(tmp_path, n, h, w, fps=30, count=None, data=None):
    p = tmp_path / "clip.rgb"
    data = np.arange(n * h * w * 3, dtype=np.uint8) if data is None else data
    p.write_bytes(data.tobytes())
    (tmp_path / "clip.rgb.json").write_text(
        '{"width": %d, "height": %d, "fps": %s, "count": %d}' % (w, h, fps, n if count is None else count))
    return p


def test_load_two_frames(tmp_path):
    p = _raw(tmp_path, 2, 2, 2)
    assert p.stat().st_size == 24
    seq = ingest.load_frames(p)
    assert len(seq) == 2 and seq.width == 2 and seq.height == 2 and seq.fps == 30
    assert seq.frames[1, 0, 0].tolist() == [12, 13, 14]


def test_load_short_file_is_corrupt(tmp_path):
    p = _raw(tmp_path, 2, 2, 2, count=3)
    with pytest.raises(CorruptInputError):
        ingest.load_frames(p)


def test_bad_fps_header(tmp_path):
    p = _raw(tmp_path, 2, 2, 2, fps=0)
    with pytest.raises(InvalidHeaderError):
        ingest.load_frames(p)


def test_missing_header(tmp_path):
    p = tmp_path / "x.rgb"
    p.write_bytes(b"\0" * 12)
    with pytest.raises(InvalidHeaderError):
        ingest.load_frames(p)


def test_frames_round_trip_bytes(tmp_path, rng):
    data = rng.integers(0, 256, size=5 * 3 * 4 * 3, dtype=np.uint8)
    p = _raw(tmp_path, 5, 3, 4, data=data)
    seq = ingest.load_frames(p)
    q = tmp_path / "copy.rgb"
    ingest.write_frames(seq, q)
    assert q.read_bytes() == p.read_bytes()
    assert ingest.load_frames(q).fps == 30


def test_frame_sequence_invariants():
    with pytest.raises(Exception):
        FrameSequence(2, 2, 30, np.zeros((1, 3, 2, 3), np.uint8))
    with pytest.raises(Exception):
        FrameSequence(2, 2, 30, np.full((1, 2, 2, 3), 300))


def test_trace_fps_from_timestamps(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("t,r,g,b\n0,1,2,3\n%r,1,2,3\n%r,1,2,3\n" % (1 / 30, 2 / 30))
    tr = ingest.load_trace(p)
    assert tr.fps == pytest.approx(30)
    assert tr.n == 3


def test_trace_non_monotone(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("t,r,g,b\n0,1,2,3\n1,1,2,3\n0.5,1,2,3\n")
    with pytest.raises(InvalidTraceError):
        ingest.load_trace(p)


def test_trace_csv_round_trip(tmp_path, rng):
    tr = RgbTrace(30.0, *rng.uniform(50, 200, size=(3, 100)), t0=2.5)
    ingest.save_trace(tr, tmp_path / "a.csv")
    back = ingest.load_trace(tmp_path / "a.csv")
    assert back.fps == pytest.approx(30.0, abs=1e-9)
    assert back.t0 == pytest.approx(2.5, abs=1e-9)
    np.testing.assert_allclose(back.matrix, tr.matrix, atol=1e-9)


def test_reference_csv_round_trip(tmp_path):
    ref = ReferenceTrace(1.0, [97, 96, 95.5], hr=[70, 71, 72])
    ingest.save_reference(ref, tmp_path / "r.csv")
    back = ingest.load_reference(tmp_path / "r.csv")
    np.testing.assert_allclose(back.spo2, ref.spo2)
    np.testing.assert_allclose(back.hr, ref.hr)


def test_reference_range_checked():
    with pytest.raises(InvalidTraceError):
        ReferenceTrace(1.0, [97, 101])


def test_align_interval_arithmetic():
    tr = RgbTrace(30.0, np.ones(3600), np.ones(3600), np.ones(3600))
    ref = ReferenceTrace(1.0, np.full(90, 97.0))
    s = ingest.align(tr, ref, video_lead=30.0, oximeter_delay=1.8)
    # oximeter clock: video covers [-30, 90), reference [-1.8, 88.2)
    assert s.duration == pytest.approx(min(120 - 30, 90 - 1.8))
    assert s.trace.n == int(np.floor(88.2 * 30 + 1e-9))
    assert s.reference.spo2.size == 88


def test_align_identity():
    tr = RgbTrace(30.0, np.arange(300.0) + 1, np.ones(300), np.ones(300))
    ref = ReferenceTrace(1.0, np.arange(10.0) + 90)
    s = ingest.align(tr, ref, 0.0, 0.0)
    np.testing.assert_array_equal(s.trace.r, tr.r)
    np.testing.assert_array_equal(s.reference.spo2, ref.spo2)


def test_default_delay_value():
    import inspect
    assert ingest.OXIMETER_DELAY == 1.8
    assert inspect.signature(ingest.align).parameters["oximeter_delay"].default == 1.8


def test_align_shifts_reference_earlier():
    tr = RgbTrace(1.0, np.ones(20), np.ones(20), np.ones(20))
    ref = ReferenceTrace(1.0, np.arange(20.0) + 80)
    s = ingest.align(tr, ref, 0.0, 2.0)
    # the reading at oximeter time 2 describes t = 0
    assert s.reference.spo2[0] == 82
    assert s.trace.n == 18


def test_align_no_overlap():
    tr = RgbTrace(30.0, np.ones(30), np.ones(30), np.ones(30))
    with pytest.raises(EmptySessionError):
        ingest.align(tr, ReferenceTrace(1.0, [97.0]), video_lead=2.0)


@given(lead=st.floats(0, 20), delay=st.floats(0, 5), n_ref=st.integers(30, 80))
def test_align_overlap_property(lead, delay, n_ref):
    tr = RgbTrace(10.0, np.ones(600), np.ones(600), np.ones(600))
    ref = ReferenceTrace(1.0, np.full(n_ref, 95.0))
    s = ingest.align(tr, ref, lead, delay)
    # both signals cover the span within one reference sample period
    assert abs(s.trace.duration - s.duration) <= 1.0 / tr.fps + 1e-9
    assert abs(s.reference.duration - s.duration) <= 1.0 + 1e-9
    assert s.trace.t0 == s.reference.t0


def test_resample_reference():
    ref = ReferenceTrace(2.0, [90, 91, 92, 93, 94, 95])
    out = ingest.resample_reference(ref, 1.0)
    assert out.spo2.tolist() == [90, 92, 94]
