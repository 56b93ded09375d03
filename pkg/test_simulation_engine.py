import numpy as np
import pytest

from conftest import A1
from errors import InvalidInputError, PreconditionError
from linalg_core import matrix_power, spectral_norm
from models import SubsystemFamily
from signals import signal_from_blocks, synthesize_signal
from simulation_engine import SimulationEngine, calibrate_certificate, prefix_norms, simulate, verify_ges
from stability_certificates import search_certificate


def brute_force_prefix(family, indices, t):
    product = np.eye(family.dimension)
    for index in indices[:t]:
        product = family.matrix(index) @ product
    return np.linalg.norm(product, 2)


def random_case(rng):
    family = SubsystemFamily.from_lists([rng.uniform(-1.2, 1.2, (2, 2)) for _ in range(3)])
    blocks = [(int(rng.integers(1, 4)), int(rng.integers(1, 4))) for _ in range(int(rng.integers(2, 10)))]
    return family, signal_from_blocks(blocks)


def test_identity_family_keeps_state():
    family = SubsystemFamily.from_lists([np.eye(2), np.eye(2)])
    signal = signal_from_blocks([(1, 2), (2, 3)] * 4)
    traj = simulate(family, signal, [0.3, -0.7])
    assert traj.states.shape == (21, 2)
    np.testing.assert_array_equal(traj.states, np.tile([0.3, -0.7], (21, 1)))
    assert all(n == pytest.approx(1.0) for _, n in prefix_norms(family, signal))


def test_dominant_eigenvector_grows_by_eigenvalue():
    family = SubsystemFamily.from_lists([A1, np.eye(2) * 2])
    vals, vecs = np.linalg.eig(np.array(A1))
    x0 = np.real(vecs[:, np.argmax(np.abs(vals))])
    traj = simulate(family, signal_from_blocks([(1, 10)]), x0)
    ratios = traj.norms[1:] / traj.norms[:-1]
    assert ratios == pytest.approx(np.full(10, 1.3276544), rel=1e-5)


def test_simulate_rejects_wrong_dimension(family):
    with pytest.raises(InvalidInputError):
        simulate(family, signal_from_blocks([(1, 2)]), [1.0, 2.0, 3.0])


def test_single_block_prefix_norms_match_powers(family):
    norms = prefix_norms(family, signal_from_blocks([(1, 3)]))
    for t, norm in norms:
        assert norm == pytest.approx(spectral_norm(matrix_power(family.matrix(1), t)), rel=1e-12)


def test_example_trajectories_decay(family, certificate):
    signal = synthesize_signal(certificate, 500)
    engine = SimulationEngine(family, seed=2019)
    norms = dict(engine.prefix_norms(signal, 500))
    for traj in engine.trajectories(signal, 100, 500):
        assert traj.norms[-1] < 0.5 * traj.norms[0]
        for t in (1, 50, 250, 500):
            assert traj.norms[t] <= norms[t] * traj.norms[0] * (1 + 1e-9) + 1e-9


def test_verify_ges_example(family, certificate):
    signal = synthesize_signal(certificate, 500)
    estimate = verify_ges(family, signal, certificate, T=500, trials=100)
    assert estimate.satisfied, estimate.reasons
    assert estimate.lam == certificate.lam
    assert np.isfinite(estimate.c_hat) and estimate.c_hat >= 1.0
    assert estimate.lambda_hat > 0
    assert estimate.trial_violations == 0


def test_verify_ges_growing_signal_not_satisfied(family):
    signal = signal_from_blocks([(2, 2)] * 20)
    estimate = verify_ges(family, signal, lam=0.0001, T=40, trials=10)
    assert not estimate.satisfied
    assert estimate.reasons


def test_verify_ges_requires_positive_lambda():
    family = SubsystemFamily.from_lists([np.eye(2), np.eye(2)])
    signal = signal_from_blocks([(1, 2), (2, 2)] * 5)
    with pytest.raises(PreconditionError):
        verify_ges(family, signal, lam=0.0, T=20)


def test_verify_ges_requires_two_super_blocks(family, certificate):
    signal = synthesize_signal(certificate, 500)
    with pytest.raises(PreconditionError):
        verify_ges(family, signal, certificate, T=30)


def test_random_initial_states_are_seeded(family):
    a = SimulationEngine(family, seed=7).random_initial_states(5)
    b = SimulationEngine(family, seed=7).random_initial_states(5)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a) <= 1.0)


def test_prefix_norms_match_brute_force(rng):
    for _ in range(50):
        family, signal = random_case(rng)
        indices = signal.indices()
        for t, norm in prefix_norms(family, signal):
            assert norm == pytest.approx(brute_force_prefix(family, indices, t), rel=1e-9, abs=1e-300)


def test_states_bounded_by_prefix_norms(rng):
    for _ in range(20):
        family, signal = random_case(rng)
        engine = SimulationEngine(family)
        norms = [1.0] + [n for _, n in engine.prefix_norms(signal)]
        for x0 in rng.uniform(-1, 1, (5, 2)):
            traj = engine.simulate(signal, x0)
            bound = np.array(norms) * np.linalg.norm(x0)
            assert np.all(traj.norms <= bound * (1 + 1e-9) + 1e-9)


def test_prefix_norms_split(rng):
    for _ in range(20):
        family, signal = random_case(rng)
        indices = signal.indices()
        norms = dict(prefix_norms(family, signal))
        T = len(indices)
        for t1 in range(1, T):
            for t in range(t1 + 1, T + 1):
                segment = np.eye(2)
                for index in indices[t1:t]:
                    segment = family.matrix(index) @ segment
                assert norms[t] <= spectral_norm(segment) * norms[t1] * (1 + 1e-9) + 1e-9


def test_trajectory_frame(family):
    traj = simulate(family, signal_from_blocks([(1, 2), (2, 2)]), [1.0, 0.0])
    frame = traj.to_frame()
    assert list(frame.columns) == ['t', 'norm']
    assert len(frame) == 5


def test_unpinned_certificate_overstates_signal_decay(family, instance):
    cert = search_certificate(instance).certificate
    estimate = verify_ges(family, synthesize_signal(cert, 500), cert, T=500, trials=100)
    assert not estimate.satisfied
    assert estimate.reasons[0].startswith("envelope still growing")


def test_calibrated_certificate_passes_verification(family, instance):
    cert = search_certificate(instance).certificate
    calibrated = calibrate_certificate(family, cert, 500)
    assert 0 < calibrated.lam < 0.025
    assert calibrated.lambda_signal == calibrated.lam
    assert calibrated.lambda_max == cert.lambda_max
    assert calibrated.lhs < cert.lhs
    estimate = verify_ges(family, synthesize_signal(calibrated, 500), calibrated, T=500, trials=100)
    assert estimate.satisfied, estimate.reasons
    assert estimate.trial_violations == 0
    assert estimate.lambda_hat == pytest.approx(0.01836, abs=0.005)


def test_calibration_keeps_lambda_the_signal_supports(family, certificate):
    calibrated = calibrate_certificate(family, certificate, 500)
    assert calibrated.lam == certificate.lam
    assert calibrated.lambda_signal == certificate.lam
    assert calibrated.lhs == certificate.lhs


def test_signal_lambda_none_for_growing_signal(family):
    signal = signal_from_blocks([(2, 2)] * 20)
    assert SimulationEngine(family).signal_lambda(signal, 0.1) is None
