import numpy as np
import pytest

from conftest import EXAMPLE_COINS
from oqwalk import montecarlo as mc
from oqwalk.coin import maximally_mixed, pure_density, validate_coin
from oqwalk.dynamics import absorption_series, first_return_series
from oqwalk.errors import InvalidStart
from oqwalk.reproduce import load_fixture

E1 = pure_density([1, 0])


def test_splitmix64_reference_outputs():
    # published SplitMix64 stream for seed 0
    assert mc.mix64(0 + 1 * mc.GOLDEN_GAMMA) == 0xE220A8397B1DCDAF
    assert mc.mix64(0 + 2 * mc.GOLDEN_GAMMA) == 0x6E789E6AA1B965F4
    assert mc.mix64(0 + 3 * mc.GOLDEN_GAMMA) == 0x06C45D188009454F
    assert mc.uniform(0, 0) == (0xE220A8397B1DCDAF >> 11) * 2.0 ** -53


def test_vector_and_scalar_generators_agree():
    idx = np.arange(50)
    seeds = mc.child_seeds(2**64 - 5, idx)
    assert [int(s) for s in seeds] == [mc.child_seed(2**64 - 5, i) for i in range(50)]
    for n in (0, 1, 999):
        u = mc.uniforms(seeds, n)
        assert list(u) == [mc.uniform(int(s), n) for s in seeds]
        assert np.all((u >= 0) & (u < 1))


def test_step_moves_left_below_left_probability():
    c = load_fixture("pq_diagonal")
    s = mc.TrajectoryState(0, E1)
    left = mc.step_trajectory(s, c, 0.2)
    assert left.position == -1 and left.time == 1
    assert np.allclose(left.internal.matrix, E1.matrix)
    right = mc.step_trajectory(s, c, 0.9)
    assert right.position == 1
    assert np.allclose(right.internal.matrix, E1.matrix)


def test_step_renormalises_the_branch():
    c = load_fixture("unbalanced")
    rho = maximally_mixed(2).matrix
    s = mc.step_trajectory(mc.TrajectoryState(3, maximally_mixed(2)), c, 0.0)
    expected = c.left @ rho @ c.left.conj().T
    assert s.position == 2
    assert np.allclose(s.internal.matrix, expected / np.trace(expected))


def test_degenerate_branch_is_never_taken():
    c = validate_coin(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    s = mc.step_trajectory(mc.TrajectoryState(0, E1), c, 0.999999)
    assert s.position == -1
    assert np.all(np.isfinite(s.internal.matrix))
    s = mc.step_trajectory(mc.TrajectoryState(0, pure_density([0, 1])), c, 0.0)
    assert s.position == 1


def test_batch_paths_equal_scalar_reference_bit_for_bit():
    c = load_fixture("unbalanced")
    rho = maximally_mixed(2)
    cfg = mc.SimConfig(99, 6, 300, rho)
    tr = mc.simulate(c, cfg, target=0)
    for i in range(6):
        path = [p for p, _, _ in mc.run_trajectory(c, rho, 99, 300, index=i)]
        assert tr.final_position[i] == path[-1]
        visits = [n + 1 for n, p in enumerate(path) if p == 0]
        assert tr.visits[i] == len(visits)
        assert tr.t0[i] == (visits[0] if visits else -1)


@pytest.mark.parametrize("quantity", ["drift", "absorb"])
def test_results_independent_of_worker_count(quantity):
    c = load_fixture("shear")
    runs = []
    for workers in (1, 2, 5):
        cfg = mc.SimConfig(2024, 37, 200, maximally_mixed(2), site=1, workers=workers)
        if quantity == "drift":
            runs.append(mc.estimate_drift(c, cfg))
        else:
            runs.append(mc.estimate_absorption(c, 1, cfg))
    assert len({(r.point_estimate, r.std_error) for r in runs}) == 1


def test_common_eigenvector_is_preserved_along_trajectories():
    c = load_fixture("pq_diagonal")
    for _, xr, xi in mc.run_trajectory(c, E1, 5, 2000):
        assert abs(xr[0] - 1) <= 1e-12 and max(abs(v) for v in xr[1:] + xi) <= 1e-12


@pytest.mark.slow
def test_trace_stays_one_over_a_million_steps():
    c = load_fixture("shear")
    worst = 0.0
    for _, xr, _ in mc.run_trajectory(c, maximally_mixed(2), 31, 10**6):
        worst = max(worst, abs(xr[0] + xr[3] - 1))
    assert worst <= 1e-9


def test_std_error_is_sample_std_over_sqrt_n():
    c = load_fixture("classical_fair")
    cfg = mc.SimConfig(1, 500, 50, np.eye(1))
    r = mc.estimate_drift(c, cfg)
    x = mc.simulate(c, cfg).final_position / 50
    assert r.point_estimate == pytest.approx(x.mean(), abs=1e-15)
    assert r.std_error == pytest.approx(x.std(ddof=1) / np.sqrt(500), rel=1e-12)
    assert r.n_samples == 500


def test_drift_of_classical_fair_walk_is_zero():
    r = mc.estimate_drift(load_fixture("classical_fair"), mc.SimConfig(8, 4000, 400, np.eye(1)))
    assert abs(r.point_estimate) <= 3 * r.std_error


def test_classical_third_return_and_absorption():
    c = load_fixture("classical_third")
    cfg = mc.SimConfig(17, 4000, 2000, np.eye(1))
    ret = mc.estimate_return(c, cfg)
    # 1 - |1 - 2p| with p = 1/3
    assert abs(ret.point_estimate - 2 / 3) <= 3 * ret.std_error + 1e-3
    assert ret.related["mean_visits"].quantity is mc.Quantity.MEAN_VISITS
    ab = mc.estimate_absorption(c, 1, mc.SimConfig(17, 4000, 2000, np.eye(1), site=1))
    # gambler's ruin: p / (1 - p)
    assert abs(ab.point_estimate - 0.5) <= 3 * ab.std_error + 1e-3


@pytest.mark.parametrize("name", EXAMPLE_COINS)
def test_return_frequency_matches_exact_first_return(name):
    c = load_fixture(name)
    rho = maximally_mixed(c.dim)
    horizon = 200
    r = mc.estimate_return(c, mc.SimConfig(4242, 3000, horizon, rho))
    exact = first_return_series(c, rho, horizon).partial_sums[-1]
    assert abs(r.point_estimate - exact) <= 4 * r.std_error + 1e-9


def test_absorption_frequency_matches_exact_series():
    c = load_fixture("diagonal_fair_line")
    cfg = mc.SimConfig(5, 3000, 500, E1, site=2)
    r = mc.estimate_absorption(c, 2, cfg)
    exact = absorption_series(c, E1, 2, 500).partial_sums[-1]
    assert abs(r.point_estimate - exact) <= 4 * r.std_error


def test_invalid_start_and_config():
    c = load_fixture("shear")
    cfg = mc.SimConfig(0, 10, 10, maximally_mixed(2))
    with pytest.raises(InvalidStart):
        mc.estimate_absorption(c, 0, cfg)
    with pytest.raises(ValueError):
        mc.SimConfig(0, 0, 10, maximally_mixed(2))
    with pytest.raises(ValueError):
        mc.SimConfig(0, 10, 0, maximally_mixed(2))
    with pytest.raises(ValueError):
        mc.SimConfig(-1, 10, 10, maximally_mixed(2))


def test_trajectory_csv_and_report_dict():
    c = load_fixture("shear")
    cfg = mc.SimConfig(3, 4, 20, maximally_mixed(2), site=1)
    tr = mc.simulate(c, cfg, start=1, absorbing=True)
    lines = tr.to_csv("m").splitlines()
    assert lines[1] == "trajectory_index,t0_or_-1,visits,final_position"
    assert len(lines) == 6
    rep = mc.estimate_absorption(c, 1, cfg, tr).to_dict()
    assert rep["label"] == "AbsorbedByHorizon by horizon 20"
    assert rep["seed"] == 3
