import numpy as np
import pytest

from surgery_lab.cones import ReturnSequence
from surgery_lab.hyperbolic import build_genus2_surface, frame_flow
from surgery_lab.trace import MAX_TRACE_LENGTH, crossing_trace, flight_times

SURF = build_genus2_surface()


def _start(tilt=0.0, back=1.0):
    # reaches the axis of g_0 at time `back`, at angle pi/2 + tilt to it
    return frame_flow("V", np.pi / 2 + tilt) @ frame_flow("X", -back)


def test_orthogonal_crossing():
    (t, w), = crossing_trace(SURF, _start(), 2.0)
    assert t == pytest.approx(1.0, abs=1e-12)
    assert w == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("tilt", [0.01, -0.03])
def test_tilt_is_reported_as_w(tilt):
    (t, w), = crossing_trace(SURF, _start(tilt), 2.0)
    assert w == pytest.approx(tilt, abs=1e-10)


def test_window_filters_oblique_crossings():
    assert crossing_trace(SURF, _start(0.2), 2.0) == []


def test_length_guard():
    with pytest.raises(ValueError):
        crossing_trace(SURF, _start(), MAX_TRACE_LENGTH + 1)


def test_traced_sequence_feeds_the_cocycle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        start = frame_flow("V", rng.uniform(0, 4 * np.pi)) @ frame_flow("H", rng.normal()) @ frame_flow("X", rng.normal())
        cr = crossing_trace(SURF, start, 40.0, window=0.5)
        if len(cr) >= 3:
            break
    seq = ReturnSequence.traced(cr)
    assert seq.generator == "traced"
    assert np.all(flight_times(cr) > 0)
    assert np.all(np.abs(seq.w) < 0.5)
