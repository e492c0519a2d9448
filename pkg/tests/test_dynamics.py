import numpy as np
import pytest

from greyhull._errors import ConfigurationError, SimulationFault
from greyhull.dynamics import (
    ControlInput,
    HydroCoefficients,
    Trajectory,
    VesselState,
    rollout,
    simulate,
    solve_accelerations,
    step,
)
from greyhull.forces import ForceTriple, KeyParams
from greyhull.scenarios import equilibrium_speed


def _full_system(s, forces, h):
    x, y, psi, u, v, r, n, delta = s
    X, Y, N = forces
    U = np.hypot(u, v)
    M = np.array([
        [h.m - h.X_udot, 0.0, 0.0],
        [0.0, h.m - h.Y_vdot, h.m * h.x_G - h.Y_rdot],
        [0.0, h.m * h.x_G - h.N_vdot, h.I_zz - h.N_rdot],
    ])
    rhs = np.array([
        X - (h.Y_vdot - h.X_vr - h.m) * v * r - (h.Y_rdot - h.m * h.x_G) * r**2,
        Y - (-h.Y_v * U * v + (h.m * u - h.Y_r * U) * r
             - h.Y_vv * v * abs(v) - h.Y_vr * v * abs(r) - h.Y_rr * r * abs(r)),
        N - (-h.N_v * U * v + (h.m * h.x_G * u - h.N_r * U) * r
             - h.N_rr * r * abs(r) - h.N_rrv * r * r * v / U - h.N_vvr * v * v * r / U),
    ])
    return np.linalg.solve(M, rhs)


def test_accelerations_match_full_solve(preset):
    h = preset.config.hydro
    rng = np.random.default_rng(0)
    for _ in range(1000):
        s = np.zeros(8)
        s[3] = rng.uniform(0.5, 9.0)
        s[4] = rng.uniform(-2.0, 2.0)
        s[5] = rng.uniform(-0.04, 0.04)
        forces = ForceTriple(*rng.normal(0.0, [3e5, 2e5, 1e7]))
        got = np.array(solve_accelerations(s, forces, h), dtype=np.float64)
        expected = _full_system(s, forces, h)
        assert np.linalg.norm(got - expected) <= 1e-10 * np.linalg.norm(expected)


def test_accelerations_at_rest_are_zero(preset):
    acc = solve_accelerations(VesselState(), ForceTriple(0.0, 0.0, 0.0), preset.config.hydro)
    assert all(a == 0 for a in acc)


def test_accelerations_reject_non_finite(preset):
    with pytest.raises(SimulationFault):
        solve_accelerations(VesselState(u=np.nan), ForceTriple(0.0, 0.0, 0.0), preset.config.hydro)


def test_singular_inertia_rejected(preset):
    h = preset.config.hydro
    kwargs = {f: getattr(h, f) for f in h.__dataclass_fields__}
    kwargs["Y_rdot"] = h.m * h.x_G - (h.m - h.Y_vdot) * (h.I_zz - h.N_rdot) / (h.m * h.x_G - h.N_vdot)
    with pytest.raises(ConfigurationError):
        HydroCoefficients(**kwargs)


def test_rest_is_equilibrium(preset):
    s = VesselState(x=10.0, y=-5.0, psi=1.0)
    out = step(s, ControlInput(0.0, 0.0), None, preset.fitted, preset.config)
    assert out == s


def test_pure_surge(preset):
    p = preset.fitted.replace(p0=0.0, p4=0.0)
    out = step(VesselState(u=2.0), ControlInput(0.0, 0.0), None, p, preset.config, dt=1.0)
    assert out.x == 2.0
    assert out.y == 0.0
    assert out.psi == 0.0
    assert out.v == 0.0 and out.r == 0.0
    assert out.u < 2.0


def test_actuator_rate_limits(preset):
    config = preset.config
    s = VesselState(u=5.0, n=0.0, delta=config.delta_max)
    out = step(s, ControlInput(config.n_max, -config.delta_max), None, preset.fitted, config, dt=1.0)
    assert out.delta == config.delta_max - np.deg2rad(2.32)
    assert out.n == 10.0


def test_actuator_saturation(preset):
    config = preset.config
    s = VesselState(u=5.0, n=config.n_max, delta=config.delta_max)
    out = step(s, ControlInput(2 * config.n_max, 2 * config.delta_max), None, preset.fitted, config)
    assert out.delta == config.delta_max
    assert out.n == config.n_max


def test_single_step_trajectory(preset):
    traj = simulate(VesselState(u=3.0, n=100.0), [ControlInput(100.0, 0.0)], None, preset.fitted, preset.config)
    assert len(traj) == 2
    assert traj.K == 1
    assert traj.states[1].tolist() == list(step(traj.initial, ControlInput(100.0, 0.0), None, preset.fitted, preset.config))


def _turning_inputs(rpm, K, rudder_deg=10.0):
    c = np.empty((K, 2))
    c[:, 0] = rpm
    c[:, 1] = np.deg2rad(rudder_deg)
    return c


def test_simulation_is_deterministic(preset):
    u0 = equilibrium_speed(200.0, preset.fitted, preset.config)
    s0 = VesselState(u=u0, n=200.0)
    c = _turning_inputs(200.0, 60)
    a = simulate(s0, c, None, preset.fitted, preset.config)
    b = simulate(s0, c, None, preset.fitted, preset.config)
    assert np.array_equal(a.states, b.states)


def test_heading_periodicity(preset):
    u0 = equilibrium_speed(200.0, preset.fitted, preset.config)
    c = _turning_inputs(200.0, 60)
    a = simulate(VesselState(psi=0.4, u=u0, n=200.0), c, None, preset.fitted, preset.config)
    b = simulate(VesselState(psi=0.4 + 2 * np.pi, u=u0, n=200.0), c, None, preset.fitted, preset.config)
    assert np.array_equal(a.states[:, 3:], b.states[:, 3:])
    np.testing.assert_allclose(a.states[1:, :3], b.states[1:, :3], rtol=1e-9, atol=1e-9)


def test_heading_stays_wrapped(preset):
    u0 = equilibrium_speed(230.0, preset.fitted, preset.config)
    c = _turning_inputs(230.0, 400, rudder_deg=30.0)
    traj = simulate(VesselState(u=u0, n=230.0), c, None, preset.fitted, preset.config)
    psi = traj.channel("psi")
    assert np.all(psi > -np.pi) and np.all(psi <= np.pi)


def test_mirror_symmetry(preset):
    p = preset.fitted.replace(p0=0.0, p4=0.0, p6=0.0, p9=0.0)
    u0 = equilibrium_speed(200.0, p, preset.config)
    s0 = VesselState(u=u0, n=200.0)
    port = simulate(s0, _turning_inputs(200.0, 80, 20.0), None, p, preset.config)
    stbd = simulate(s0, _turning_inputs(200.0, 80, -20.0), None, p, preset.config)
    flip = np.array([1, -1, -1, 1, -1, -1, 1, -1])
    np.testing.assert_allclose(port.states, stbd.states * flip, rtol=1e-9, atol=1e-9)


def test_coasting_loses_speed(preset):
    p = preset.fitted.replace(p0=0.0, p4=0.0)
    c = np.zeros((200, 2))
    traj = simulate(VesselState(u=8.0), c, None, p, preset.config)
    u = traj.channel("u")
    assert np.all(np.diff(u) <= 0)
    assert np.all(u >= 0)
    assert np.all(traj.channel("v") == 0) and np.all(traj.channel("r") == 0)


def test_euler_first_order_convergence(preset):
    config = preset.config
    u0 = equilibrium_speed(200.0, preset.fitted, config)
    s0 = VesselState(u=u0, n=200.0)
    T = 60.0
    finals = []
    for dt in (1.0, 0.5, 0.25, 0.125):
        K = int(round(T / dt))
        traj = simulate(s0, _turning_inputs(200.0, K), None, preset.fitted, config, dt=dt)
        finals.append(traj.states[-1, :2])
    errors = [np.linalg.norm(finals[i] - finals[i + 1]) for i in range(3)]
    for e_coarse, e_fine in zip(errors[:-1], errors[1:]):
        assert 1.5 <= e_coarse / e_fine <= 2.5


def test_rollout_batches_match_single_runs(preset):
    config = preset.config
    u0 = equilibrium_speed(200.0, preset.fitted, config)
    s0 = VesselState(u=u0, n=200.0).asarray()
    c = _turning_inputs(200.0, 30)
    P = np.stack([preset.fitted, preset.baseline, preset.initial_guess])
    batch = rollout(s0, c, P, config)
    assert batch.shape == (3, 31, 8)
    for i in range(3):
        single = simulate(s0, c, None, P[i], config)
        np.testing.assert_allclose(batch[i], single.states, rtol=1e-12, atol=1e-12)


def test_fault_reports_step(preset):
    p = preset.fitted.replace(p3=1e300)
    s0 = VesselState(u=8.0, n=200.0)
    c = _turning_inputs(200.0, 20, 0.0)
    with pytest.raises(SimulationFault) as e:
        simulate(s0, c, None, p, preset.config)
    assert e.value.step is not None and 0 <= e.value.step < 20
    states = rollout(s0, c, p, preset.config)
    assert not np.all(np.isfinite(states))


def test_invalid_inputs(preset):
    with pytest.raises(ValueError):
        simulate(VesselState(), np.zeros((0, 2)), None, preset.fitted, preset.config)
    with pytest.raises(ValueError):
        step(VesselState(), ControlInput(), None, preset.fitted, preset.config, dt=0.0)


def test_trajectory_shapes():
    with pytest.raises(ValueError):
        Trajectory(np.zeros((3, 8)), np.zeros((3, 2)), 1.0)
    traj = Trajectory(np.zeros((4, 8)), np.zeros((3, 2)), 0.5)
    assert traj.K == 3
    np.testing.assert_array_equal(traj.time, [0.0, 0.5, 1.0, 1.5])


def test_key_params_pass_through_step(preset):
    s = VesselState(u=4.0, n=120.0)
    a = step(s, ControlInput(120.0, 0.1), None, preset.fitted, preset.config)
    b = step(s, ControlInput(120.0, 0.1), None, KeyParams(*preset.fitted).asarray(), preset.config)
    assert a == b
