"""Semi-implicit Euler integration, ground clamp, inertia validation."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmsim.geometry import QUAT_IDENTITY, quat_from_axis_angle, vnorm
from swarmsim.rigidbody import (
    DragModel,
    MassProperties,
    RigidBodyState,
    SingularInertia,
    is_landed,
    net_wrench,
    step,
)

MP = MassProperties.diagonal(1.5, 0.029, 0.029, 0.055)
NO_DRAG = DragModel()


def rest(p=(0.0, 0.0, 10.0)):
    return RigidBodyState(p=p, v=(0.0, 0.0, 0.0), q=QUAT_IDENTITY, Omega=(0.0, 0.0, 0.0))


# --- mass properties ---------------------------------------------------------


def test_diagonal_inverse_is_exact_reciprocal():
    assert MP.J_inv[0][0] == 1.0 / 0.029
    assert MP.J_inv[1][1] == 1.0 / 0.029
    assert MP.J_inv[2][2] == 1.0 / 0.055
    assert MP.J_inv[0][1] == 0.0


def test_asymmetric_inertia_rejected():
    with pytest.raises(SingularInertia):
        MassProperties(1.0, ((0.03, 0.01, 0.0), (0.0, 0.03, 0.0), (0.0, 0.0, 0.05)))


def test_indefinite_inertia_rejected():
    with pytest.raises(SingularInertia):
        MassProperties.diagonal(1.0, 0.03, -0.03, 0.05)


def test_nonpositive_mass_rejected():
    with pytest.raises(ValueError):
        MassProperties.diagonal(0.0, 0.03, 0.03, 0.05)


def test_nonfinite_state_rejected():
    with pytest.raises(ValueError):
        RigidBodyState(
            p=(0.0, 0.0, float("nan")), v=(0.0, 0.0, 0.0),
            q=QUAT_IDENTITY, Omega=(0.0, 0.0, 0.0),
        )


# --- net wrench --------------------------------------------------------------


def test_gravity_only():
    F, M = net_wrench(rest(), (0.0, 0.0, 0.0), (0.1, 0.2, 0.3), MP, NO_DRAG)
    assert F == (0.0, 0.0, -1.5 * 9.81)
    assert M == (0.1, 0.2, 0.3)  # gravity acts at the CoG, no moment


def test_thrust_rotates_into_world_frame():
    # 90 deg roll: body +z points along world -y
    s = RigidBodyState(
        p=(0.0, 0.0, 10.0), v=(0.0, 0.0, 0.0),
        q=quat_from_axis_angle((1.0, 0.0, 0.0), math.pi / 2.0),
        Omega=(0.0, 0.0, 0.0),
    )
    F, _ = net_wrench(s, (0.0, 0.0, 8.0), (0.0, 0.0, 0.0), MP, NO_DRAG)
    assert abs(F[0]) < 1e-15
    assert abs(F[1] + 8.0) < 1e-14
    assert abs(F[2] + 1.5 * 9.81) < 1e-14


def test_quadratic_drag_oracle():
    drag = DragModel(enabled=True, Cd_body=1.0, area=0.02, rho=1.225)
    s = RigidBodyState(
        p=(0.0, 0.0, 10.0), v=(3.0, 4.0, 0.0), q=QUAT_IDENTITY, Omega=(0.0, 0.0, 0.0)
    )
    F, _ = net_wrench(s, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), MP, drag, g=0.0)
    k = -0.5 * 1.225 * 1.0 * 0.02 * 5.0  # |v| = 5
    assert F == (k * 3.0, k * 4.0, 0.0)


def test_drag_validation():
    with pytest.raises(ValueError):
        DragModel(enabled=True, Cd_body=-1.0, area=0.02)


# --- integration -------------------------------------------------------------


def test_free_fall_matches_closed_form():
    # n steps of semi-implicit Euler displace by -g dt^2 n(n+1)/2 exactly
    s = rest()
    for _ in range(1000):
        F, M = net_wrench(s, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), MP, NO_DRAG)
        s = step(s, F, M, MP, 1e-3, ground_clamp=False)
    assert math.isclose(s.p[2] - 10.0, -9.81e-6 * 500500, rel_tol=1e-12)
    assert math.isclose(s.v[2], -9.81, rel_tol=1e-12)


def test_velocity_updates_before_position():
    # one step from rest already displaces: p1 = (F/m) dt^2, not 0
    mp = MassProperties.diagonal(2.0, 0.03, 0.03, 0.05)
    s = step(rest(), (4.0, 0.0, 0.0), (0.0, 0.0, 0.0), mp, 1e-3, ground_clamp=False)
    assert s.v[0] == 2e-3
    assert s.p[0] == 2e-6


def test_torque_free_spherical_spin_is_preserved_exactly():
    # spherical inertia with power-of-two values: the gyroscopic term
    # cancels exactly in IEEE double, so Omega never drifts
    j = 2.0**-5
    mp = MassProperties.diagonal(1.0, j, j, j)
    s = RigidBodyState(
        p=(0.0, 0.0, 10.0), v=(0.0, 0.0, 0.0), q=QUAT_IDENTITY, Omega=(0.5, 0.25, 1.0)
    )
    for _ in range(10000):
        s = step(s, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), mp, 1e-3, ground_clamp=False)
    assert s.Omega == (0.5, 0.25, 1.0)
    assert math.sqrt(sum(c * c for c in s.q)) == 1.0


def test_torque_free_momentum_drift_is_small():
    s = RigidBodyState(
        p=(0.0, 0.0, 10.0), v=(0.0, 0.0, 0.0), q=QUAT_IDENTITY, Omega=(2.0, 0.1, 3.0)
    )
    def L(state):
        return vnorm((0.029 * state.Omega[0], 0.029 * state.Omega[1], 0.055 * state.Omega[2]))

    L0 = L(s)
    for _ in range(1000):
        s = step(s, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), MP, 1e-3, ground_clamp=False)
    assert abs(L(s) - L0) / L0 < 1e-3


def test_bad_dt_rejected():
    with pytest.raises(ValueError):
        step(rest(), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), MP, 0.0)


# --- ground clamp ------------------------------------------------------------


def test_descent_through_ground_parks_vehicle():
    s = RigidBodyState(
        p=(1.0, 2.0, 0.0005), v=(0.5, 0.0, -1.0), q=QUAT_IDENTITY, Omega=(0.1, 0.0, 0.0)
    )
    F, M = net_wrench(s, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), MP, NO_DRAG)
    s = step(s, F, M, MP, 1e-3)
    assert s.p[2] == 0.0
    assert s.v == (0.0, 0.0, 0.0)
    assert s.Omega == (0.0, 0.0, 0.0)
    assert is_landed(s)


def test_clamp_requires_descent():
    # rising through z=0 from below is not a landing
    s = RigidBodyState(
        p=(0.0, 0.0, 0.001), v=(0.0, 0.0, 2.0), q=QUAT_IDENTITY, Omega=(0.0, 0.0, 0.0)
    )
    out = step(s, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), MP, 1e-3)
    assert out.p[2] > 0.0
    assert not is_landed(out)


def test_clamp_can_be_disabled():
    s = RigidBodyState(
        p=(0.0, 0.0, 0.0001), v=(0.0, 0.0, -1.0), q=QUAT_IDENTITY, Omega=(0.0, 0.0, 0.0)
    )
    out = step(s, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), MP, 1e-3, ground_clamp=False)
    assert out.p[2] < 0.0


# --- determinism -------------------------------------------------------------

small = st.floats(min_value=-10.0, max_value=10.0)


@given(
    st.tuples(small, small, st.floats(min_value=1.0, max_value=50.0)),
    st.tuples(small, small, small),
    st.tuples(small, small, small),
    st.tuples(small, small, small),
)
def test_step_is_a_pure_function(p, v, F, M):
    s = RigidBodyState(p=p, v=v, q=QUAT_IDENTITY, Omega=(0.0, 0.0, 0.0))
    a = step(s, F, M, MP, 1e-3)
    b = step(s, F, M, MP, 1e-3)
    assert a == b
