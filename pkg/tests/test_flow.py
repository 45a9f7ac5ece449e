"""Taylor integrator: accuracy, dense output, events, angle tracking."""

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from hopfzero.errors import NumericalFailure
from hopfzero.flow import EventSpec, PolyField, find_crossing, integrate, track_angle
from hopfzero.precision import mpf, working_precision

ROTATION = PolyField.from_dicts(
    {(0, 1, 0): 1}, {(1, 0, 0): -1}, {}
)
# z' = -1 + z^2 has the explicit orbit z(t) = -tanh(t) from z(0) = 0
VERTICAL = PolyField.from_dicts({}, {}, {(0, 0, 0): -1, (0, 0, 2): 1})


def test_rotation_accuracy_at_high_precision():
    with working_precision(40):
        traj = integrate(ROTATION, (mpf(1), mpf(0), mpf(0)), mpf(10))
        x, y, z = traj.end_state()
        assert abs(x - gmpy2.cos(mpf(10))) < mpf(10) ** -34
        assert abs(y + gmpy2.sin(mpf(10))) < mpf(10) ** -34
        assert z == 0


def test_vertical_orbit_matches_tanh():
    with working_precision(40):
        traj = integrate(VERTICAL, (mpf(0), mpf(0), mpf(0)), mpf(5))
        _, _, z = traj.state(mpf(3))
        assert abs(z + gmpy2.tanh(mpf(3))) < mpf(10) ** -34


def test_dense_output_agrees_with_direct_integration():
    with working_precision(30):
        traj = integrate(ROTATION, (mpf(1), mpf(0), mpf(0)), mpf(4))
        for t in (mpf("0.7"), mpf("1.9"), mpf("3.3")):
            short = integrate(ROTATION, (mpf(1), mpf(0), mpf(0)), t)
            a = traj.state(t)
            b = short.end_state()
            assert max(abs(u - v) for u, v in zip(a, b)) < mpf(10) ** -24


def test_backward_integration_inverts_forward():
    with working_precision(30):
        fwd = integrate(VERTICAL, (mpf(0), mpf(0), mpf("-0.3")), mpf(2))
        end = fwd.end_state()
        back = integrate(VERTICAL, end, mpf(2), backward=True)
        start = back.end_state()
        assert abs(start[2] + mpf("0.3")) < mpf(10) ** -24


small_coeff = st.integers(-4, 4).map(lambda n: mpf(n) / 8)
small_idx = st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1))
small_dict = st.dictionaries(small_idx, small_coeff, max_size=3)


@given(small_dict, small_dict, small_dict)
@settings(max_examples=20, deadline=None)
def test_forward_backward_round_trip(dx, dy, dz):
    fld = PolyField.from_dicts(dx, dy, dz)
    p0 = (mpf("0.1"), mpf("-0.2"), mpf("0.15"))
    with working_precision(25):
        fwd = integrate(fld, p0, mpf(1))
        back = integrate(fld, fwd.end_state(), mpf(1), backward=True)
        p1 = back.end_state()
        assert max(abs(u - v) for u, v in zip(p0, p1)) < mpf(10) ** -18


def test_event_plane_crossing_with_direction_filter():
    with working_precision(30):
        # z falls from 0.5 through 0 toward -1; "down" must fire, "up" not
        traj = integrate(VERTICAL, (mpf(0), mpf(0), mpf("0.5")), mpf(4))
        down = find_crossing(traj, EventSpec(surface=("z", 0), direction="down"))
        up = find_crossing(traj, EventSpec(surface=("z", 0), direction="up"))
        assert down is not None
        assert up is None
        # z(t) = tanh(atanh(0.5) - t) crosses zero at t = atanh(0.5)
        t_exact = gmpy2.atanh(mpf("0.5"))
        assert abs(down.t - t_exact) < mpf(10) ** -22
        assert down.slope < 0


def test_event_occurrence_counting():
    with working_precision(30):
        traj = integrate(ROTATION, (mpf(1), mpf(0), mpf(0)), mpf(8))
        second = find_crossing(
            traj, EventSpec(surface=lambda p: p[1], direction="any", occurrence=3)
        )
        # y = -sin t: zeros at pi and 2 pi; third crossing counts from dwell
        assert second is not None
        assert abs(second.t - 3 * gmpy2.const_pi()) < mpf(10) ** -20


def test_stop_event_halts_integration():
    with working_precision(30):
        traj = integrate(
            VERTICAL, (mpf(0), mpf(0), mpf("0.5")), mpf(50),
            stop_event=EventSpec(surface=("z", 0), direction="down"),
        )
        assert traj.t_end < 1  # atanh(0.5) = 0.549
        assert traj.status == "event" and traj.event is not None


def test_equilibrium_capture_prevents_endless_integration():
    with working_precision(25):
        traj = integrate(
            VERTICAL, (mpf(0), mpf(0), mpf(0)), mpf(200),
            eq_points=[(mpf(0), mpf(0), mpf(-1))], eq_tol=mpf("1e-8"),
        )
        assert traj.status == "equilibrium"
        assert traj.t_end < 50


def test_track_angle_counts_turns():
    with working_precision(30):
        traj = integrate(ROTATION, (mpf(1), mpf(0), mpf(0)), mpf(10))
        track = track_angle(traj)
        assert abs(track.total_change + mpf(10)) < mpf(10) ** -20
        assert abs(track.min_radius - 1) < mpf(10) ** -20


def test_track_angle_radius_floor_raises():
    fld = PolyField.from_dicts(
        {(1, 0, 0): -1}, {(0, 1, 0): -1}, {}
    )  # straight contraction to the axis
    with working_precision(25):
        traj = integrate(fld, (mpf("1e-20"), mpf(0), mpf(0)), mpf(40))
        with pytest.raises(NumericalFailure):
            track_angle(traj, radius_floor="1e-25")


def test_escape_radius_raises():
    grow = PolyField.from_dicts({(1, 0, 0): 1}, {}, {(0, 0, 2): 1})
    with working_precision(25):
        traj = integrate(grow, (mpf(1), mpf(0), mpf("0.9")), mpf(100),
                         escape_radius=mpf(10))
        assert traj.status == "escape"
        assert traj.t_end < 100
