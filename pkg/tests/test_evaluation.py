import math
import re
import numpy as np
import pytest

from greyhull._errors import KnotMismatchError
from greyhull.dynamics import Trajectory, VesselState, simulate
from greyhull.evaluation import compare, cvdm, evaluate_protocol, manhattan_distance
from greyhull.identification import WeightSpec, trajectory_cost
from greyhull.scenarios import equilibrium_speed


def _straight(K=10, speed=2.0):
    states = np.zeros((K + 1, 8))
    states[:, 0] = speed * np.arange(K + 1)
    states[:, 3] = speed
    return Trajectory(states, np.zeros((K, 2)), 1.0, "straight")


def _shifted(traj, channel, offset):
    states = traj.states.copy()
    states[:, channel] += offset
    return traj.with_states(states)


def test_identical_trajectories():
    t = _straight()
    np.testing.assert_array_equal(manhattan_distance(t, t), np.zeros(6))
    assert cvdm(t, t) == 0.0


def test_constant_offset():
    t = _straight()
    np.testing.assert_array_equal(manhattan_distance(t, _shifted(t, 1, 2.0)), [0.0, 2.0, 0.0, 0.0, 0.0, 0.0])


def test_quarter_turn_heading():
    t = _straight()
    turned = _shifted(t, 2, np.pi / 2)
    assert cvdm(t, turned) == pytest.approx(50.0, abs=1e-12)
    assert manhattan_distance(t, turned)[2] == pytest.approx(np.pi / 2)


def test_heading_deviation_is_wrapped():
    t = _straight()
    spun = _shifted(t, 2, 2 * np.pi - 0.2)
    assert manhattan_distance(t, spun)[2] == pytest.approx(0.2, rel=1e-9)


def test_initial_knot_is_excluded():
    t = _straight()
    states = t.states.copy()
    states[0, 0] += 100.0
    assert manhattan_distance(t, t.with_states(states))[0] == 0.0


def _oracle(meas, pred, r_max=0.0314):
    K = meas.K
    md = [0.0] * 6
    for k in range(1, K + 1):
        for j in range(6):
            d = meas.states[k, j] - pred.states[k, j]
            if j == 2:
                d = math.atan2(math.sin(d), math.cos(d))
            md[j] += abs(d) / K
    length = sum(
        math.hypot(meas.states[k + 1, 0] - meas.states[k, 0], meas.states[k + 1, 1] - meas.states[k, 1])
        for k in range(K)
    )
    speed = sum(math.hypot(meas.states[k, 3], meas.states[k, 4]) for k in range(K + 1)) / (K + 1)
    norms = [length, length, math.pi, speed, speed, r_max]
    return md, 100.0 * sum(m / n for m, n in zip(md, norms))


def _random_trajectory(rng, K):
    states = np.zeros((K + 1, 8))
    states[:, :2] = np.cumsum(rng.normal(0, 5, (K + 1, 2)), axis=0)
    states[:, 2] = rng.uniform(-np.pi, np.pi, K + 1)
    states[:, 3] = rng.uniform(1, 8, K + 1)
    states[:, 4] = rng.normal(0, 0.5, K + 1)
    states[:, 5] = rng.normal(0, 0.02, K + 1)
    return Trajectory(states, np.zeros((K, 2)), 1.0)


def test_measures_against_loop_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        K = int(rng.integers(1, 30))
        meas = _random_trajectory(rng, K)
        pred = _random_trajectory(rng, K)
        pred.states[0] = meas.states[0]
        md, cv = _oracle(meas, pred)
        np.testing.assert_allclose(manhattan_distance(meas, pred), md, rtol=1e-10, atol=1e-12)
        assert cvdm(meas, pred) == pytest.approx(cv, rel=1e-10)


def test_symmetry_and_asymmetry():
    rng = np.random.default_rng(3)
    a = _random_trajectory(rng, 20)
    b = _random_trajectory(rng, 20)
    np.testing.assert_allclose(manhattan_distance(a, b), manhattan_distance(b, a), rtol=1e-14)
    assert cvdm(a, b) != pytest.approx(cvdm(b, a), rel=1e-6)


def test_translation_invariance():
    rng = np.random.default_rng(5)
    a = _random_trajectory(rng, 20)
    b = _random_trajectory(rng, 20)
    shift = np.zeros(8)
    shift[:2] = [1234.5, -678.0]
    a2 = a.with_states(a.states + shift)
    b2 = b.with_states(b.states + shift)
    np.testing.assert_allclose(manhattan_distance(a2, b2), manhattan_distance(a, b), rtol=1e-9)
    assert cvdm(a2, b2) == pytest.approx(cvdm(a, b), rel=1e-9)


def test_heading_offset_leaves_speed_distances(preset):
    inputs = np.zeros((60, 2))
    inputs[:, 0] = 200.0
    inputs[5:, 1] = np.deg2rad(15.0)
    u0 = equilibrium_speed(200.0, preset.fitted, preset.config)
    md = []
    for psi0 in (0.0, 1.1):
        initial = VesselState(psi=psi0, u=u0, n=200.0)
        measured = simulate(initial, inputs, None, preset.fitted, preset.config)
        predicted = simulate(initial, inputs, None, preset.baseline, preset.config)
        md.append(manhattan_distance(measured, predicted))
    np.testing.assert_array_equal(md[1][3:], md[0][3:])
    assert md[1][2] == pytest.approx(md[0][2], rel=1e-9)


def test_cost_and_cvdm_vanish_together(dataset):
    measured = dataset[0]
    W = WeightSpec.from_trajectory(measured)
    same = measured.with_states(measured.states.copy())
    assert trajectory_cost(same, measured, W) == 0.0
    assert cvdm(measured, same) == 0.0

    actuators = measured.states.copy()
    actuators[1:, 6] += 5.0
    actuators[1:, 7] += 0.1
    other = measured.with_states(actuators)
    assert trajectory_cost(other, measured, W) == 0.0
    assert cvdm(measured, other) == 0.0

    for channel in range(6):
        states = measured.states.copy()
        states[3, channel] += 1e-3
        other = measured.with_states(states)
        assert trajectory_cost(other, measured, W) > 0
        assert cvdm(measured, other) > 0


def test_knot_mismatch():
    with pytest.raises(KnotMismatchError):
        manhattan_distance(_straight(10), _straight(11))


def test_compare_records_normalisers():
    t = _straight(10, 2.0)
    c = compare(t, _shifted(t, 0, 1.0))
    assert c.length == 20.0
    assert c.speed == 2.0
    assert c.md[0] == 1.0
    assert c.cvdm == pytest.approx(100.0 / 20.0)


def test_fitted_equal_to_baseline(preset, dataset):
    report = evaluate_protocol(dataset.trajectories, preset.baseline, preset.baseline, preset.config)
    np.testing.assert_array_equal(report.md_improvement, np.zeros((len(dataset), 6)))
    np.testing.assert_array_equal(report.cvdm_improvement, np.zeros(len(dataset)))
    assert report.mari == 0.0
    assert report.consistency == 0.0


def test_fitted_equal_to_truth(preset, dataset):
    report = evaluate_protocol(dataset.trajectories, preset.baseline, preset.fitted, preset.config)
    np.testing.assert_allclose(report.md_improvement, 100.0, atol=1e-6)
    np.testing.assert_allclose(report.cvdm_improvement, 100.0, atol=1e-6)
    assert report.mari == pytest.approx(100.0, abs=1e-6)
    assert report.consistency == pytest.approx(100.0, abs=1e-6)
    assert report.scenarios == dataset.names
    assert len(report.fitted_runs) == len(dataset)


def test_report_outputs(preset, dataset):
    report = evaluate_protocol(dataset.trajectories, preset.baseline, preset.initial_guess, preset.config)
    table = report.table()
    assert len(table) == len(dataset)
    assert {"scenario", "ari", "cvdm_improvement", "md_baseline_x"} <= set(table.columns)
    np.testing.assert_allclose(table["ari"], np.nanmean(report.md_improvement, axis=1))
    pattern = (
        r"^MD\(%\) per dimension is: x:-?\d+\.\d, y:-?\d+\.\d, psi:-?\d+\.\d, "
        r"u:-?\d+\.\d, v:-?\d+\.\d, r:-?\d+\.\d, and cVDM\(%\) is -?\d+\.\d$"
    )
    for caption in report.captions():
        assert re.match(pattern, caption)
    best, moderate = report.select_examples()
    assert report.cvdm_improvement[best] == np.max(report.cvdm_improvement)
    assert report.cvdm_improvement[moderate] <= report.cvdm_improvement[best]
    summary = report.summary()
    assert summary["mari"] == report.mari


def test_empty_test_split(preset):
    with pytest.raises(ValueError):
        evaluate_protocol([], preset.baseline, preset.fitted, preset.config)
