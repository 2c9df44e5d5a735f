import numpy as np
import pytest

from todalab import (IntegratorConfig, LatticeState, SolitonSpec, Trajectory,
                     background_state, hamiltonian_ab, integrate,
                     random_localized_state, soliton_state)
from todalab.integrators import sample_times, solve_vector
from todalab.state import toda_rhs


def test_integrator_config_validation():
    IntegratorConfig()
    IntegratorConfig(method="rk4-fixed", step=0.05)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(tolerance=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="rk4-fixed", step=-0.1)


def test_sample_times():
    t = sample_times(2.0, sample_dt=0.5)
    assert np.allclose(t, [0.0, 0.5, 1.0, 1.5, 2.0])
    t = sample_times(1.0, n_samples=11)
    assert t.size == 11 and t[0] == 0.0 and t[-1] == 1.0
    # default: 51 samples
    assert sample_times(5.0).size == 51
    with pytest.raises(ValueError):
        sample_times(0.0)


def test_solve_vector_linear_exact():
    # y' = A y with nilpotent-free A: compare against expm
    from scipy.linalg import expm
    rng = np.random.default_rng(0)
    A = rng.normal(0.0, 0.3, (4, 4))
    y0 = rng.normal(0.0, 1.0, 4)
    times = np.linspace(0.0, 2.0, 5)
    ys = solve_vector(lambda t, y: A @ y, y0, times, IntegratorConfig())
    for i, t in enumerate(times):
        ref = expm(A * t) @ y0
        assert np.max(np.abs(ys[i] - ref)) < 1e-8


def test_rk4_fixed_step_order():
    # halving the step should shrink the error by about 2^4
    from scipy.linalg import expm
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    y0 = np.array([1.0, 0.0])
    times = np.array([0.0, 1.0])
    ref = expm(A) @ y0
    errs = []
    for step in (0.1, 0.05):
        ys = solve_vector(lambda t, y: A @ y, y0, times, IntegratorConfig(method="rk4-fixed", step=step))
        errs.append(np.max(np.abs(ys[1] - ref)))
    ratio = errs[0] / errs[1]
    print(errs, ratio)
    assert 12.0 < ratio < 20.0


def test_adaptive_matches_fixed_on_soliton():
    x = soliton_state(SolitonSpec(kappa=0.8), 61)
    t_final = 1.5
    ta = integrate(x, toda_rhs, t_final, IntegratorConfig(), n_samples=4)
    tf = integrate(x, toda_rhs, t_final, IntegratorConfig(method="rk4-fixed", step=0.005), n_samples=4)
    diff = max(np.max(np.abs(ta.a - tf.a)), np.max(np.abs(ta.b - tf.b)))
    print(diff)
    assert diff < 1e-8


def test_trajectory_boundary_margin_and_clean():
    x = background_state(41)
    traj = integrate(x, toda_rhs, 1.0, IntegratorConfig(), n_samples=3, guard=10)
    # nothing ever deviates: margin is the full half width
    assert traj.clean
    assert traj.boundary_margin >= 10
    # a deviation parked next to the edge is flagged
    a = x.a.copy()
    a[1] = 0.7
    bad = LatticeState(a, x.b, x.offset)
    traj2 = integrate(bad, toda_rhs, 0.1, IntegratorConfig(), n_samples=2, guard=10)
    print(traj2.boundary_margin)
    assert not traj2.clean


def test_energy_drift_small():
    x = random_localized_state(121, seed=2)
    traj = integrate(x, toda_rhs, 3.0, IntegratorConfig(), n_samples=13)
    drift = traj.energy_drift(hamiltonian_ab)
    print(drift)
    assert traj.clean
    assert drift < 1e-8


def test_trajectory_csv_roundtrip(tmp_path):
    x = random_localized_state(31, seed=6)
    traj = integrate(x, toda_rhs, 0.5, IntegratorConfig(), n_samples=3)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "t,n,a,b"
    back = Trajectory.from_csv(path)
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.a, traj.a)
    assert np.array_equal(back.b, traj.b)
    assert back.offset == traj.offset


def test_integrate_state_accessor():
    x = random_localized_state(31, seed=8)
    traj = integrate(x, toda_rhs, 0.3, IntegratorConfig(), n_samples=2)
    s0 = traj.state(0)
    assert isinstance(s0, LatticeState)
    assert np.array_equal(s0.a, x.a)
    assert s0.offset == x.offset
