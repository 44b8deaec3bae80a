import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from clm.baselines import finite_diff_grad, gradient_rel_error
from clm.core import DomainError, ConfigurationError
from clm.io import read_dataset_csv, read_xyz, write_dataset_csv, write_xyz
from clm.problems import (
    Dataset,
    InitialPrior,
    LJCluster,
    MLPShape,
    double_well,
    double_well_grad,
    gen_sine_dataset,
    generalization_mse,
    lj_cost,
    lj_grad,
    lj_problem,
    lj_shifted,
    mlp_forward,
    mlp_problem,
    mlp_sse,
    mlp_sse_regularized,
    multimodal10,
    multimodal10_grad,
    multimodal10_problem,
    offset_cost,
    sample_initial_states,
    shifted_energy,
    sine_test_grid,
)

R0 = 2 ** (1 / 6)


def random_cluster(rng, n_atoms, min_dist=0.9):
    box = 1.2 * n_atoms ** (1 / 3)
    while True:
        pos = rng.uniform(0, box, (n_atoms, 3))
        d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
        if n_atoms == 1 or d[np.triu_indices(n_atoms, 1)].min() > min_dist:
            return pos.ravel()


def test_double_well_values():
    assert double_well(0.0) == 100.0
    assert double_well_grad(0.0) == 5.0


def test_double_well_global_minimum_near_minus_2_90():
    from scipy.optimize import brentq

    root = brentq(double_well_grad, -3.5, -2.5)
    assert abs(root + 2.90) < 0.005
    grid = np.linspace(-6, 6, 200001)
    assert abs(grid[np.argmin(double_well(grid))] - root) < 1e-4


def test_multimodal_origin():
    assert multimodal10(np.zeros(10)) == 0.0
    np.testing.assert_array_equal(multimodal10_grad(np.zeros(10)), 0.0)


def test_multimodal_batch_matches_single():
    rng = np.random.default_rng(0)
    X = rng.uniform(-20, 20, (7, 10))
    np.testing.assert_allclose(multimodal10(X), [multimodal10(x) for x in X], rtol=1e-14)
    np.testing.assert_allclose(multimodal10_grad(X), [multimodal10_grad(x) for x in X], rtol=1e-14)


def test_multimodal_gradient_with_exact_zero_cosine():
    # a coordinate where cos(w2 x) == 0 exactly exercises the prefix/suffix products
    x = np.zeros(4)
    x[1] = np.pi / 2
    p = multimodal10_problem(n=4)
    assert gradient_rel_error(p.gradient(x), finite_diff_grad(p, x)) < 1e-6


def test_multimodal_even_symmetry():
    rng = np.random.default_rng(1)
    for x in rng.uniform(-20, 20, (50, 10)):
        assert multimodal10(x, a=0.0) == pytest.approx(multimodal10(-x, a=0.0), rel=1e-13, abs=1e-12)
        assert multimodal10(x) == pytest.approx(multimodal10(-x), rel=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_multimodal_gradient_fd(seed):
    rng = np.random.default_rng(seed)
    p = multimodal10_problem()
    x = rng.uniform(-20, 20, 10)
    assert gradient_rel_error(p.gradient(x), finite_diff_grad(p, x)) < 1e-6


def test_lj_pair_minimum():
    assert lj_cost(LJCluster([0, 0, 0, R0, 0, 0])) == pytest.approx(-1.0, abs=1e-14)
    assert lj_cost(LJCluster([0, 0, 0, 1.0, 0, 0])) == 0.0


def test_lj_equilateral_and_tetrahedron():
    tri = np.array([[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]]) * R0
    assert lj_cost(tri.ravel()) == pytest.approx(-3.0, abs=1e-13)
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) * R0 / np.sqrt(8)
    assert lj_cost(tet.ravel()) == pytest.approx(-6.0, abs=1e-13)
    np.testing.assert_allclose(lj_grad(tet.ravel()), 0.0, atol=1e-12)


def test_lj_coincident_atoms():
    with pytest.raises(DomainError):
        lj_cost([0, 0, 0, 0, 0, 0])
    with pytest.raises(DomainError):
        lj_grad([1, 2, 3, 1, 2, 3])
    with pytest.raises(DomainError):
        LJCluster([0.0, 1.0])


@pytest.mark.parametrize("n_atoms", [3, 5, 13])
def test_lj_gradient_fd(n_atoms):
    rng = np.random.default_rng(n_atoms)
    p = lj_problem(n_atoms)
    for _ in range(5):
        x = random_cluster(rng, n_atoms)
        assert gradient_rel_error(p.gradient(x), finite_diff_grad(p, x)) < 1e-5


def test_lj_rigid_motion_invariance():
    rng = np.random.default_rng(7)
    for _ in range(10):
        x = random_cluster(rng, 8).reshape(-1, 3)
        rot = Rotation.random(random_state=rng).as_matrix()
        moved = x @ rot.T + rng.normal(0, 5, 3)
        e0 = lj_cost(x.ravel())
        assert lj_cost(moved.ravel()) == pytest.approx(e0, rel=1e-10)
        # gradient rotates with the frame
        np.testing.assert_allclose(
            lj_grad(moved.ravel()).reshape(-1, 3), lj_grad(x.ravel()).reshape(-1, 3) @ rot.T,
            rtol=1e-8, atol=1e-9,
        )


def test_shifted_degenerates_to_plain():
    rng = np.random.default_rng(2)
    x = random_cluster(rng, 6)
    e, g = lj_shifted(x, mu=0.0, nu=6)
    assert e == lj_cost(x)
    np.testing.assert_array_equal(g, lj_grad(x))


def test_shifted_pair_minimum():
    r = 2 ** (1 / 3) - 0.1
    e, g = lj_shifted([0, 0, 0, r, 0, 0], mu=0.1, nu=3)
    assert e == pytest.approx(-1.0, abs=1e-14)
    np.testing.assert_allclose(g, 0.0, atol=1e-12)
    rs = np.linspace(0.05, 3, 20001)
    es = [shifted_energy([0, 0, 0, ri, 0, 0]) for ri in rs]
    assert abs(rs[int(np.argmin(es))] - r) < 2e-4


def test_shifted_bounded_at_contact():
    assert np.isfinite(shifted_energy(np.zeros(6), mu=0.1, nu=3))


@pytest.mark.parametrize("seed", range(3))
def test_shifted_gradient_fd(seed):
    rng = np.random.default_rng(seed)
    p = lj_problem(7, mu=0.1, nu=3)
    x = random_cluster(rng, 7, min_dist=0.3)
    assert gradient_rel_error(p.gradient(x), finite_diff_grad(p, x)) < 1e-6


def test_offset_cost():
    p = lj_problem(2)
    x = np.array([0, 0, 0, R0, 0, 0.0])
    assert offset_cost(p, 0.0).cost(x) == p.cost(x)
    assert offset_cost(p, 200.0).cost(x) == pytest.approx(199.0, abs=1e-12)
    rng = np.random.default_rng(0)
    y = random_cluster(rng, 2)
    np.testing.assert_array_equal(offset_cost(p, 200.0).gradient(y), p.gradient(y))
    q = offset_cost(multimodal10_problem(), 5.0)
    X = rng.uniform(-3, 3, (4, 10))
    np.testing.assert_allclose(q.costs(X), multimodal10(X) + 5.0)


def test_mlp_zero_output_weights():
    shape = MLPShape(1, 10)
    rng = np.random.default_rng(0)
    theta = rng.normal(size=30)
    theta[:10] = 0
    assert mlp_forward(shape, theta, 0.7) == 0.0


def test_mlp_scalar_evaluation():
    shape = MLPShape(1, 1)
    theta = shape.pack([1.0], [[0.0]], [np.arctanh(0.5)])
    assert mlp_forward(shape, theta, 3.0) == pytest.approx(0.5, abs=1e-15)


def test_mlp_parameter_count_and_layout():
    shape = MLPShape(1, 10)
    assert shape.n_params == 30
    shape = MLPShape(3, 4)
    w, V, b = np.arange(4.0), np.arange(12.0).reshape(4, 3), np.arange(4.0) + 100
    theta = shape.pack(w, V, b)
    w2, V2, b2 = shape.unpack(theta)
    np.testing.assert_array_equal(V2, V)
    assert theta[4:7].tolist() == V[0].tolist()
    u = np.array([0.1, -0.2, 0.3])
    assert mlp_forward(shape, theta, u) == pytest.approx(w @ np.tanh(V @ u + b), rel=1e-14)
    with pytest.raises(ConfigurationError):
        shape.unpack(np.zeros(5))


def test_sse_perfect_fit_and_single_sample():
    shape = MLPShape(1, 3)
    rng = np.random.default_rng(0)
    theta = rng.normal(size=shape.n_params)
    u = np.linspace(-1, 1, 5)
    d = mlp_forward(shape, theta, u)
    J, _ = mlp_sse(shape, theta, Dataset(u, d))
    assert J == 0.0
    theta[:3] = 0
    J, _ = mlp_sse(shape, theta, Dataset([0.3], [1.0]))
    assert J == 0.5


@pytest.mark.parametrize("seed", range(3))
def test_sse_gradient_fd(seed):
    rng = np.random.default_rng(seed)
    shape = MLPShape(1, 10)
    data = gen_sine_dataset(rng=seed)
    p = mlp_problem(shape, data)
    theta = rng.normal(0, 1, 30)
    assert gradient_rel_error(p.gradient(theta), finite_diff_grad(p, theta)) < 1e-6


def test_sse_batch_matches_single():
    rng = np.random.default_rng(4)
    shape = MLPShape(2, 5)
    data = Dataset(rng.normal(size=(8, 2)), rng.normal(size=8))
    T = rng.normal(size=(6, shape.n_params))
    J, G = mlp_sse(shape, T, data)
    for k in range(6):
        j, g = mlp_sse(shape, T[k], data)
        assert J[k] == pytest.approx(j, rel=1e-14)
        np.testing.assert_allclose(G[k], g, rtol=1e-13, atol=1e-14)


def test_regularized_cost():
    rng = np.random.default_rng(5)
    shape = MLPShape(1, 10)
    data = gen_sine_dataset(rng=1)
    theta = rng.normal(size=30)
    J, g = mlp_sse(shape, theta, data)
    Jr, gr = mlp_sse_regularized(shape, theta, data, mu=0.0, zeta=1.0)
    assert Jr == J
    np.testing.assert_array_equal(gr, g)
    J0, _ = mlp_sse(shape, np.zeros(30), data)
    assert mlp_sse_regularized(shape, np.zeros(30), data, mu=3.0, zeta=0.4)[0] == pytest.approx(0.4 * J0)
    p = mlp_problem(shape, data, mu=0.5, zeta=2.0)
    assert gradient_rel_error(p.gradient(theta), finite_diff_grad(p, theta)) < 1e-6
    with pytest.raises(ConfigurationError):
        mlp_sse_regularized(shape, theta, data, mu=-1.0)


def test_sine_dataset():
    data = gen_sine_dataset(noise_std=0.0)
    assert len(data) == 20
    np.testing.assert_array_equal(data.targets, np.sin(data.inputs[:, 0]))
    a, b = gen_sine_dataset(rng=3), gen_sine_dataset(rng=3)
    np.testing.assert_array_equal(a.targets, b.targets)
    noise = np.concatenate([gen_sine_dataset(rng=s).targets - np.sin(data.inputs[:, 0]) for s in range(500)])
    assert np.std(noise) == pytest.approx(0.4, rel=0.03)
    grid = sine_test_grid()
    assert len(grid) == 500
    assert generalization_mse(MLPShape(1, 10), np.zeros(30), grid) == pytest.approx(np.mean(np.sin(grid.inputs) ** 2))


def test_initial_states_statistics():
    q, n = 5, 4
    for sigma in (0.1, 1.0, 5.0):
        draws = np.stack([sample_initial_states(InitialPrior(sigma), q, n, rng=s).x for s in range(2000)])
        # norm scales linearly with sigma; chi distribution mean for n dof
        from scipy.special import gamma as G
        chi_mean = np.sqrt(2) * G((n + 1) / 2) / G(n / 2)
        assert np.mean(np.linalg.norm(draws, axis=-1)) / sigma == pytest.approx(chi_mean, rel=0.02)
        assert abs(draws.mean()) < 4 * sigma / np.sqrt(draws.size)
    ens = sample_initial_states(InitialPrior(0.1), 3, 2, rng=9)
    np.testing.assert_array_equal(ens.lam, 0.0)
    np.testing.assert_array_equal(ens.x, sample_initial_states(InitialPrior(0.1), 3, 2, rng=9).x)
    with pytest.raises(ConfigurationError):
        InitialPrior(0.0)


def test_xyz_round_trip(tmp_path):
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) * R0 / np.sqrt(8)
    e = lj_cost(tet.ravel())
    write_xyz(tmp_path / "c.xyz", tet, energy=e)
    text = (tmp_path / "c.xyz").read_text().splitlines()
    assert text[0] == "4" and text[2].startswith("Ar ")
    el, pos, e2 = read_xyz(tmp_path / "c.xyz")
    assert el == ["Ar"] * 4 and e2 == e
    assert lj_cost(pos.ravel()) == pytest.approx(e, abs=1e-6)


def test_dataset_csv_round_trip(tmp_path):
    data = gen_sine_dataset(rng=2)
    write_dataset_csv(tmp_path / "d.csv", data)
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "u,d"
    back = read_dataset_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.inputs, data.inputs)
    np.testing.assert_array_equal(back.targets, data.targets)
