import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchcs import sensing
from patchcs.errors import ConfigurationError, FormatError, UsageError
from patchcs.sensing import SensingConfig, gen_measurement_matrix


@pytest.mark.parametrize("rate,m", [(0.25, 256), (0.10, 102), (0.04, 40), (0.01, 10)])
def test_measurement_counts_for_32px_patches(rate, m):
    assert SensingConfig(32, rate).m == m
    phi = gen_measurement_matrix(SensingConfig(32, rate, seed=3))
    assert phi.phi.shape == (m, 1024)


@pytest.mark.parametrize("rate", [0.25, 0.10, 0.04, 0.01, 1.0])
def test_rows_orthonormal(rate):
    phi = gen_measurement_matrix(SensingConfig(32, rate, seed=11)).phi
    assert np.abs(phi @ phi.T - np.eye(len(phi))).max() < 1e-8


def test_seed_determinism():
    a = gen_measurement_matrix(SensingConfig(16, 0.3, seed=5))
    b = gen_measurement_matrix(SensingConfig(16, 0.3, seed=5))
    c = gen_measurement_matrix(SensingConfig(16, 0.3, seed=6))
    assert a.phi.tobytes() == b.phi.tobytes()
    assert a.digest() == b.digest() != c.digest()


def test_invalid_configs():
    with pytest.raises(ConfigurationError):
        SensingConfig(32, 0.0)
    with pytest.raises(ConfigurationError):
        SensingConfig(32, 1.5)
    with pytest.raises(ConfigurationError):
        SensingConfig(0, 0.5)
    with pytest.raises(ConfigurationError):
        SensingConfig(4, 0.01)  # floor(0.16) = 0 measurements


def test_full_rate_is_isometry_and_round_trip():
    rng = np.random.default_rng(0)
    phi = gen_measurement_matrix(SensingConfig(8, 1.0, seed=1))
    x = rng.uniform(size=(8, 8))
    y = sensing.sense_patch(phi, x)
    assert abs(np.linalg.norm(y) - np.linalg.norm(x)) < 1e-10
    np.testing.assert_allclose(sensing.adjoint_reconstruct(phi, y), x, atol=1e-10)


def test_zero_patch_and_zero_measurement():
    phi = gen_measurement_matrix(SensingConfig(4, 0.5, seed=1))
    assert not sensing.sense_patch(phi, np.zeros((4, 4))).any()
    assert not sensing.adjoint_reconstruct(phi, np.zeros(phi.m)).any()


def test_sense_matches_naive_matvec():
    rng = np.random.default_rng(2)
    phi = gen_measurement_matrix(SensingConfig(4, 0.25, seed=2))
    x = rng.uniform(size=(4, 4))
    naive = [sum(phi.phi[r, 4 * i + j] * x[i, j] for i in range(4) for j in range(4)) for r in range(phi.m)]
    np.testing.assert_allclose(sensing.sense_patch(phi, x), naive, rtol=0, atol=1e-12)


def test_vectorisation_is_row_major():
    phi = sensing.MeasurementMatrix(np.eye(4)[[1]], 2, 0.25, 0)
    assert sensing.sense_patch(phi, np.array([[1.0, 2.0], [3.0, 4.0]]))[0] == 2.0


def test_adjoint_never_increases_norm():
    rng = np.random.default_rng(3)
    phi = gen_measurement_matrix(SensingConfig(32, 0.25, seed=3))
    for _ in range(5):
        x = rng.uniform(size=(32, 32))
        xh = sensing.adjoint_reconstruct(phi, sensing.sense_patch(phi, x))
        assert np.linalg.norm(xh) <= np.linalg.norm(x) + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    phi = gen_measurement_matrix(SensingConfig(6, 0.4, seed=seed))
    x, z = rng.normal(size=(6, 6)), rng.normal(size=(6, 6))
    lhs = sensing.sense_patch(phi, a * x + b * z)
    rhs = a * sensing.sense_patch(phi, x) + b * sensing.sense_patch(phi, z)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_shape_errors():
    phi = gen_measurement_matrix(SensingConfig(4, 0.5, seed=1))
    with pytest.raises(UsageError):
        sensing.sense_patch(phi, np.zeros((4, 5)))
    with pytest.raises(UsageError):
        sensing.adjoint_reconstruct(phi, np.zeros(phi.m + 1))


def test_batch_sensing_matches_single():
    rng = np.random.default_rng(4)
    phi = gen_measurement_matrix(SensingConfig(8, 0.1, seed=4))
    xs = rng.uniform(size=(5, 8, 8))
    ys = sensing.sense_patches(phi, xs)
    for x, y in zip(xs, ys):
        np.testing.assert_allclose(y, sensing.sense_patch(phi, x), atol=1e-14)


def test_phi_file_round_trip(tmp_path):
    phi = gen_measurement_matrix(SensingConfig(32, 0.10, seed=7))
    sensing.save_phi(phi, tmp_path / "a.phi")
    sensing.save_phi(phi, tmp_path / "b.phi")
    assert (tmp_path / "a.phi").read_bytes() == (tmp_path / "b.phi").read_bytes()
    back = sensing.load_phi(tmp_path / "a.phi")
    assert back.phi.tobytes() == phi.phi.tobytes()
    assert (back.m, back.patch_size, back.rate, back.seed) == (102, 32, 0.10, 7)


def test_phi_file_corruption(tmp_path):
    phi = gen_measurement_matrix(SensingConfig(8, 0.5, seed=7))
    path = tmp_path / "p.phi"
    sensing.save_phi(phi, path)
    data = path.read_bytes()
    path.write_bytes(b"X" + data[1:])
    with pytest.raises(FormatError, match="magic"):
        sensing.load_phi(path)
    path.write_bytes(data[:-8])
    with pytest.raises(FormatError, match="truncated"):
        sensing.load_phi(path)
