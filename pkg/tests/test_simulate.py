"""Monte Carlo harness: seeding, synthetic series, truth records, panel
materialization and the study driver."""

import numpy as np
import pytest
from numpy.random import default_rng

from premia.design import dimensions, true_beta
from premia.firstpass import TuningConfig
from premia.simulate import (
    SimulationConfig,
    TruthRecord,
    ar1_standardized,
    block_cholesky,
    default_truth_study1,
    draw_block_errors,
    draw_truth_study2,
    mc_tuning,
    replicate_rng,
    run_study,
    simulate_study1,
    simulate_study2,
    simulation_panel,
)

STUDY1_SUPPORT = frozenset({1, 2, 3, 8, 29, 42, 56, 120, 121, 127, 134,
                            141, 148, 155, 169})


def small_cfg(**kw):
    base = dict(study=1, replicates=2, K=2, p=1, q=2, T=80, train=60,
                sigma=0.05, master_seed=123)
    base.update(kw)
    return SimulationConfig(**base)


def custom_truth(spec):
    Bb = np.array([[1.0, 0.5], [0.7, 0.0]])
    C = np.array([[0.6, 0.0], [0.0, 0.0]])
    L = np.array([[0.03, 0.0], [0.0, 0.01]])
    return TruthRecord(spec=spec, B_breve=Bb, C=C, Lambda=L,
                       F=np.zeros_like(L)).finalize()


# ---------------------------------------------------------------------------
# seeding and synthetic series
# ---------------------------------------------------------------------------

class TestSeeding:
    def test_replicate_rng_reproducible_and_distinct(self):
        a = replicate_rng(42, 3).standard_normal(8)
        b = replicate_rng(42, 3).standard_normal(8)
        c = replicate_rng(42, 4).standard_normal(8)
        d = replicate_rng(43, 3).standard_normal(8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)

    def test_ar1_moments(self):
        x = ar1_standardized(default_rng(7), 20_000, 3, rho=0.95)
        assert x.shape == (20_000, 3)
        assert np.max(np.abs(x.mean(axis=0))) < 1e-12
        assert np.allclose(x.std(axis=0), 1.0, atol=1e-12)
        for j in range(3):
            ac = np.corrcoef(x[:-1, j], x[1:, j])[0, 1]
            assert abs(ac - 0.95) < 0.02

    def test_mc_tuning_defaults_and_override(self):
        cfg = small_cfg()
        t = mc_tuning(cfg)
        assert t.chi1 == np.inf and t.chi2 == np.inf
        assert t.gamma == 2.0
        assert t.ridge_level == pytest.approx(0.2)
        custom = TuningConfig(gamma=1.0)
        cfg2 = small_cfg(tuning=custom)
        assert mc_tuning(cfg2) is custom


# ---------------------------------------------------------------------------
# truth records
# ---------------------------------------------------------------------------

class TestTruth:
    def test_frozen_single_asset_truth(self):
        spec = dimensions(5, 6, 13)
        truth = default_truth_study1(spec)
        assert truth.support == STUDY1_SUPPORT
        recomputed = true_beta(spec, truth.B_breve, truth.C,
                               truth.Lambda - truth.F)
        assert np.array_equal(truth.beta, recomputed)
        assert truth.B_breve.shape == (5, 7)
        assert np.all(truth.F == 0.0)
        with pytest.raises(ValueError):
            default_truth_study1(dimensions(4, 6, 13))

    def test_cross_section_truth_shares(self):
        spec = dimensions(3, 2, 3)
        rng = default_rng(11)
        truth = draw_truth_study2(spec, rng, n=40, ti_share=0.35)
        n_ti = 14
        assert truth.B_breve.shape == (40, 3, 3)
        # constant loadings always dense
        assert np.all(truth.B_breve[:, :, 0] != 0.0)
        for i in range(n_ti):
            assert np.all(truth.B_breve[i, :, 1:] == 0.0)
            assert np.all(truth.C[i] == 0.0)
        tv_has_exposure = [
            np.any(truth.B_breve[i, :, 1:] != 0.0) or np.any(truth.C[i] != 0.0)
            for i in range(n_ti, 40)
        ]
        assert all(tv_has_exposure)
        assert np.all(truth.Lambda[:, 0] != 0.0)
        assert np.all(truth.F == 0.0)
        # per-asset loadings keep beta/support unset until a caller picks one
        assert truth.finalize().beta is None


# ---------------------------------------------------------------------------
# error structure
# ---------------------------------------------------------------------------

class TestErrors:
    def test_block_cholesky_reconstruction(self):
        cfg = small_cfg(study=2, n_assets=25, block_size=10, block_count=3,
                        corr_base=0.3, error_variance=0.04)
        chols, ragged = block_cholesky(cfg)
        assert ragged
        assert [c.shape[0] for c in chols] == [10, 10, 5]
        for c in chols:
            s = c.shape[0]
            idx = np.arange(s)
            target = 0.04 * 0.3 ** np.abs(idx[:, None] - idx[None, :])
            assert np.allclose(c @ c.T, target, atol=1e-12)

    def test_block_errors_match_designed_moments(self):
        cfg = small_cfg(study=2, n_assets=60, block_size=30, block_count=2,
                        corr_base=0.3, error_variance=0.04)
        chols, ragged = block_cholesky(cfg)
        assert not ragged
        e = draw_block_errors(default_rng(5), cfg, chols, 30_000)
        assert e.shape == (60, 30_000)
        assert np.allclose(e.var(axis=1), 0.04, rtol=0.1)
        within = np.corrcoef(e[0], e[1])[0, 1]
        across = np.corrcoef(e[0], e[30])[0, 1]
        assert abs(within - 0.3) < 0.05
        assert abs(across) < 0.05


# ---------------------------------------------------------------------------
# replicate datasets
# ---------------------------------------------------------------------------

class TestReplicateData:
    def test_study1_shapes_and_split(self):
        cfg = small_cfg()
        spec = cfg.spec
        truth = custom_truth(spec)
        cfg.coefficients = truth
        train, test, got = simulate_study1(cfg, replicate_rng(1, 0))
        assert got is truth
        assert train["X"].shape == (60, spec.d)
        assert test["X"].shape == (20, spec.d)
        assert train["R"].shape == (60,)
        noise_tr = train["R"] - train["X"] @ truth.beta
        assert abs(noise_tr.std() - cfg.sigma) < 0.02

    def test_study2_shapes(self):
        cfg = small_cfg(study=2, K=2, p=1, q=2, T=30, n_assets=6,
                        block_size=3, block_count=2, ti_share=0.5)
        data, truth = simulate_study2(cfg, replicate_rng(2, 0))
        assert data["R_train"].shape == (6, 30)
        assert data["R_test"].shape == (6, 30)
        assert len(data["designs"]) == 6
        assert data["designs"][0].shape == (30, cfg.spec.d)
        assert truth.B_breve.shape == (6, 2, 2)
        # fresh errors, same clean component
        assert not np.allclose(data["R_train"], data["R_test"])


class TestPanelBridge:
    def test_study1_panel_stitches_the_split(self):
        cfg = small_cfg()
        cfg.coefficients = custom_truth(cfg.spec)
        panel, train_end, truth = simulation_panel(cfg, 0)
        assert panel.returns.shape == (1, 80)
        assert panel.factors.shape == (80, 2)
        assert panel.instruments.shape == (80, 1)
        assert panel.characteristics.shape == (1, 80, 2)
        assert panel.assets == ["A0000"]
        assert train_end == "1994-12"  # 1990-01 plus 59 months
        train, test, _ = simulate_study1(cfg, replicate_rng(cfg.master_seed, 0))
        assert np.allclose(panel.returns[0, :60], train["R"], atol=0)
        assert np.allclose(panel.returns[0, 60:], test["R"], atol=0)

    def test_study2_panel_tiles_conditioning(self):
        cfg = small_cfg(study=2, K=2, p=1, q=2, T=30, n_assets=6,
                        block_size=3, block_count=2, ti_share=0.5)
        panel, train_end, truth = simulation_panel(cfg, 1)
        assert panel.returns.shape == (6, 60)
        assert train_end == "1992-06"  # 1990-01 plus 29 months
        assert np.array_equal(panel.factors[:30], panel.factors[30:])
        assert np.array_equal(panel.instruments[:30], panel.instruments[30:])
        assert np.array_equal(panel.characteristics[:, :30],
                              panel.characteristics[:, 30:])
        data, _ = simulate_study2(cfg, replicate_rng(cfg.master_seed, 1))
        assert np.array_equal(panel.returns[:, :30], data["R_train"])
        assert np.array_equal(panel.returns[:, 30:], data["R_test"])

    def test_panel_is_reproducible(self):
        cfg = small_cfg()
        cfg.coefficients = custom_truth(cfg.spec)
        p1, label1, _ = simulation_panel(cfg, 0)
        p2, label2, _ = simulation_panel(cfg, 0)
        assert label1 == label2
        assert np.array_equal(p1.returns, p2.returns)
        assert np.array_equal(p1.characteristics, p2.characteristics)


# ---------------------------------------------------------------------------
# study driver
# ---------------------------------------------------------------------------

class TestRunStudy:
    def test_small_study1_run_is_deterministic(self):
        cfg = small_cfg()
        cfg.coefficients = custom_truth(cfg.spec)
        out1 = run_study(cfg, methods=("aogl", "alasso"))
        out2 = run_study(cfg, methods=("aogl", "alasso"))
        assert out1.failures == [] and out2.failures == []
        for m in ("aogl", "alasso"):
            for name in ("rmspe_r", "rmse_beta", "true_pos", "nbreg", "arb"):
                v1 = out1.per_replicate[m][name]
                v2 = out2.per_replicate[m][name]
                assert np.array_equal(v1, v2, equal_nan=True)
        tp = out1.per_replicate["aogl"]["true_pos"]
        nb = out1.per_replicate["aogl"]["nbreg"]
        assert np.all(tp <= nb)
        assert np.all(out1.per_replicate["aogl"]["rmse_beta"] >= 0)

    def test_summary_and_rows(self):
        cfg = small_cfg()
        cfg.coefficients = custom_truth(cfg.spec)
        out = run_study(cfg, methods=("aogl",))
        s = out.summary()
        assert set(s) == {"aogl"}
        mean, se = s["aogl"]["rmspe_r"]
        assert mean > 0 and np.isfinite(se)
        rows = out.table_rows()
        assert {r["metric"] for r in rows} == {"rmspe_r", "rmse_beta", "arb",
                                               "true_pos", "nbreg"}
        assert all(r["replicates"] <= 2 for r in rows)

    def test_failures_recorded_not_fatal(self):
        cfg = small_cfg(T=10, train=3)  # too short for K + 2 observations
        cfg.coefficients = custom_truth(cfg.spec)
        out = run_study(cfg, methods=("aogl",))
        assert len(out.failures) == 2
        assert all("skipped" in tb for _, tb in out.failures)
        assert np.all(np.isnan(out.per_replicate["aogl"]["rmspe_r"]))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimulationConfig(study=3).validate()
        with pytest.raises(ValueError):
            small_cfg(train=80).validate()
        with pytest.raises(ValueError):
            small_cfg(replicates=0).validate()
        with pytest.raises(ValueError):
            small_cfg(corr_base=1.0).validate()
