from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from residual_lab import maps, process
from residual_lab.errors import BitBudgetError, ConfigError
from residual_lab.process import InitialDistribution as Init
from residual_lab.process import SimulationConfig

F = Fraction


def test_step_examples(doubling):
    assert process.step(doubling, 0.3, 0.0, 123.0) == pytest.approx(0.6)
    assert process.step(doubling, 0.3, 0.1, 1.0) == pytest.approx(0.7)
    assert process.step(maps.identity_map(), 0.5, 1.0, -0.25) == pytest.approx(0.25)


@pytest.mark.parametrize("x_prev,x_next,dS,dJ", [(0.6, 1.2, 1, 0), (0.3, 0.95, 0, 0),
                                                 (0.3, 1.05, 0, 1)])
def test_decompose_update_examples(doubling, x_prev, x_next, dS, dJ):
    st = process.DecompositionState.start(np.array([x_prev]))
    new = process.decompose_update(doubling, np.array([x_prev]), np.array([x_next]), st)
    assert new.S[0] == dS and new.J[0] == dJ
    assert new.R[0] == pytest.approx(x_next - dS - dJ)


def test_initial_distribution_parse():
    assert Init.parse("uniform") == Init.uniform()
    assert Init.parse("point(0.37)").x0 == (0.37,)
    g = Init.parse("gaussian(0,5)")
    assert g.kind == "gaussian" and g.x0 == (0.0,) and g.sigma == 5.0
    assert Init.parse({"kind": "point", "x0": [0.1, 0.2]}).coords(2).tolist() == [0.1, 0.2]
    assert Init.parse("point(0.37)").coords(3).tolist() == [0.37] * 3
    for bad in ("cauchy", "gaussian(1)", "point(a)"):
        with pytest.raises(ConfigError):
            Init.parse(bad)
    with pytest.raises(ConfigError):
        Init.gaussian(0, 0)


def test_config_invariants(doubling):
    with pytest.raises(ConfigError):
        SimulationConfig(doubling, 1.5, 10, 10)
    with pytest.raises(ConfigError):
        SimulationConfig(doubling, 0.1, 0, 10)
    with pytest.raises(ConfigError):
        SimulationConfig(doubling, 0.1, 10, 10, v=(0.0,))
    cfg = SimulationConfig(maps.doubling_1d(), 0.1, 10, 10, v=(-3.0,), seed=-1)
    assert cfg.v == (-1.0,) and cfg.seed == 2**64 - 1
    cfg2 = SimulationConfig(maps.product_map([doubling, doubling]), 0.1, 10, 10, v=(3, 4))
    assert cfg2.v == pytest.approx((0.6, 0.8))


def test_point_start_noiseless_has_zero_variance(doubling, shifted):
    for m in (doubling, shifted):
        cfg = SimulationConfig(m, 0.0, 30, 5000, Init.point(0.37))
        mom = process.simulate_ensemble(cfg)
        assert np.all(mom.var_of() == 0)


def test_doubling_first_step_variance(doubling):
    cfg = SimulationConfig(doubling, 0.0, 1, 400_000, seed=5, record_decomposition=True)
    mom = process.simulate_ensemble(cfg)
    # X_1 = 2U: variance 4/12, which splits as var(floor) 1/4 + var(frac) 1/12
    se = np.sqrt(2 / cfg.n_paths) * 1 / 3
    assert abs(mom.var_of()[1] - 1 / 3) < 5 * se
    assert abs(mom.var_of("S")[1] - 0.25) < 0.005
    assert abs(mom.var_of("R")[1] - 1 / 12) < 0.002


def test_identity_map_is_random_walk():
    cfg = SimulationConfig(maps.identity_map(), 0.1, 50, 100_000, Init.point(0.0), seed=1)
    mom = process.simulate_ensemble(cfg)
    n = np.arange(51)
    rel = mom.var_of()[1:] / (0.01 * n[1:])
    assert np.all(np.abs(rel - 1) < 0.03)


def test_thread_count_reproducibility(shifted):
    cfg = SimulationConfig(shifted, 0.05, 40, 20_000, seed=9, record_decomposition=True,
                           block_size=700)
    outs = [process.simulate_ensemble(cfg, threads=t) for t in (1, 2, 5)]
    for o in outs[1:]:
        np.testing.assert_array_equal(o.mean, outs[0].mean)
        np.testing.assert_array_equal(o.var, outs[0].var)
        assert o.to_csv() == outs[0].to_csv()


def test_threads_env(monkeypatch):
    monkeypatch.setenv("RESIDUAL_LAB_THREADS", "3")
    assert process.default_threads() == 3
    monkeypatch.setenv("RESIDUAL_LAB_THREADS", "x")
    with pytest.raises(ConfigError):
        process.default_threads()


def test_moment_invariants(doubling):
    cfg = SimulationConfig(doubling, 0.2, 60, 30_000, Init.gaussian(0.5, 2.0), seed=4,
                           record_decomposition=True)
    mom = process.simulate_ensemble(cfg)
    assert np.all(mom.var >= 0)
    assert mom.count == 30_000 and mom.batch_count.sum() == 30_000
    total = mom.mean_of("S") + mom.mean_of("J") + mom.mean_of("R")
    np.testing.assert_allclose(total, mom.mean_of("X"), rtol=1e-9, atol=1e-12)
    csv = mom.to_csv().splitlines()
    assert csv[0] == "n,count,mean_vX,var_vX,mean_vS,var_vS,mean_vJ,var_vJ,mean_vR,var_vR"
    assert len(csv) == 62


def test_kernel_matches_float_reference(shifted):
    for m, init in ((shifted, Init.uniform()), (maps.product_map([shifted, maps.doubling_1d()]),
                                                Init.gaussian((0.2, -1.0), 3.0))):
        cfg = SimulationConfig(m, 0.07, 10, 500, init, seed=21)
        tr = process.simulate_paths(cfg)
        x, state = process.simulate_float_reference(cfg)
        np.testing.assert_allclose(tr.X[:, -1, :], x, atol=1e-10)


def test_stationarity_of_projection(doubling):
    # pi_0 start: the torus projection stays uniform at every step
    cfg = SimulationConfig(doubling, 0.05, 4, 10**6, seed=2)
    counts = np.zeros((5, 64), np.int64)
    for tr in process.iter_path_chunks(cfg):
        cells = np.minimum((tr.u[:, :, 0] * 64).astype(int), 63)
        for n in range(5):
            counts[n] += np.bincount(cells[:, n], minlength=64)
    for n in range(5):
        assert stats.chisquare(counts[n]).pvalue > 1e-3


def test_split_state_identity(shifted):
    cfg = SimulationConfig(shifted, 0.3, 200, 2000, seed=3)
    tr = process.simulate_paths(cfg)
    S = np.concatenate([np.zeros_like(tr.D[:, :1]), np.cumsum(tr.D, axis=1)], axis=1)
    J = np.concatenate([np.zeros_like(tr.Delta[:, :1]), np.cumsum(tr.Delta, axis=1)], axis=1)
    np.testing.assert_array_equal(tr.K - tr.K[:, :1], S + J)
    # R_n = K_0 + u_n, so R_n - R_0 = u_n - u_0
    assert np.all(np.abs(tr.u - tr.u[:, :1]) < 1)


def test_noiseless_orbit_examples(doubling, shifted):
    assert process.noiseless_orbit(doubling, F(1, 3), 4) == [F(1, 3), F(2, 3), F(4, 3), F(5, 3),
                                                             F(7, 3)]
    assert process.noiseless_orbit(shifted, 0, 2) == [0, F(-1, 2), F(-1, 2)]
    assert process.noiseless_orbit(doubling, F(2, 7), 0) == [F(2, 7)]
    with pytest.raises(BitBudgetError):
        process.noiseless_orbit(maps.MapSpec(1, (maps.AffinePiece.build([0], [1], [["1/3"]],
                                                                          [0]),)), F(1, 2), 50,
                                max_bits=32)


def test_exact_orbits_agree_with_scalar_orbit(shifted):
    pts = [F(1, 7), F(3, 11), F(5, 13)]
    den = 7 * 11 * 13
    orb = process.ExactOrbits(shifted, [[int(p * den)] for p in pts], den)
    for n in range(1, 40):
        orb.step()
        exact = [process.noiseless_orbit(shifted, p, n)[-1] for p in pts]
        got = [F(int(v), orb.den) for v in orb.num[:, 0]]
        assert got == exact


def test_noiseless_ensemble_limits(doubling):
    # from pi_0 the zero-noise walk diffuses; from a point it does not
    uni = process.noiseless_ensemble(SimulationConfig(doubling, 0.0, 200, 4000, seed=1))
    slope = np.polyfit(np.arange(100, 201), uni.var_of()[100:], 1)[0]
    assert abs(slope - 0.25) < 0.05
    pt = process.noiseless_ensemble(SimulationConfig(doubling, 0.0, 200, 4000, Init.point(0.37)))
    assert np.all(pt.var_of() == 0)
    with pytest.raises(ConfigError):
        process.noiseless_ensemble(SimulationConfig(doubling, 0.1, 5, 10))


def test_sim_config_file(tmp_path):
    (tmp_path / "m.yaml").write_text(maps.dump_map(maps.shifted_doubling_1d()))
    (tmp_path / "c.yaml").write_text(
        "schema: sim/v1\nmap: m.yaml\nepsilon: 0.01\nn_steps: 5\nn_paths: 10\n"
        "initial: point(0.5)\nrecord_decomposition: true\n")
    cfg = process.load_config(tmp_path / "c.yaml")
    assert cfg.map.name == "shifted_doubling" and cfg.initial.x0 == (0.5,)
    (tmp_path / "bad.yaml").write_text("schema: sim/v1\nmap: doubling\n")
    with pytest.raises(ConfigError):
        process.load_config(tmp_path / "bad.yaml")
