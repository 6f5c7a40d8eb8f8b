import math

import numpy as np
import pytest

from cgle_feedback import certificates as C
from cgle_feedback.experiments import (
    ConfigError,
    ExperimentConfig,
    InitialCondition,
    certificate_for,
    convergence_study,
    random_smooth,
    run_experiment,
    sweep,
)
from cgle_feedback.spectral import build_domain, to_modal

from conftest import load_raw


def config(name, **overrides):
    return ExperimentConfig.from_dict({**load_raw(name), **overrides})


@pytest.mark.parametrize("name,theorem", [
    ("a2_volume", C.VOLUME), ("a3_modal", C.MODAL_L2), ("a4_modal_h1", C.MODAL_H1),
    ("a5_steering_any", C.STEERING1), ("a6_steering_stable_case1", C.STEERING2),
    ("a6_steering_stable_case2", C.STEERING2), ("a7_nodal", C.NODAL),
])
def test_shipped_configs_are_certified(name, theorem):
    cert = certificate_for(config(name))
    assert cert.theorem == theorem and cert.satisfied


class TestConfigParsing:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            config("a3_modal", lamda=2.0)

    @pytest.mark.parametrize("missing", ["lambda", "M", "length"])
    def test_required_keys(self, missing):
        raw = load_raw("a3_modal")
        del raw[missing]
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(raw)

    @pytest.mark.parametrize("key,value", [
        ("scheme", "rk4"), ("t_final", 0.0), ("theorem", "nope"), ("ic", "gaussian"),
        ("controller", "pid"), ("lambda", -1.0), ("bc", "robin"),
    ])
    def test_invalid_values(self, key, value):
        with pytest.raises(ConfigError):
            config("a3_modal", **{key: value})

    def test_steering_needs_target_ic(self):
        raw = load_raw("a5_steering_any")
        del raw["target_ic"]
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(raw)

    def test_gamma_tilde_too_large(self):
        with pytest.raises(ConfigError):
            certificate_for(config("a6_steering_stable_case1", gamma_tilde=1.0))

    def test_with_value(self):
        cfg = config("a3_modal").with_value("N", 3)
        assert cfg.params.N == 3 and cfg.raw["N"] == 3


class TestInitialConditions:
    def test_random_smooth_spectrum(self):
        d = build_domain("interval", math.pi, 63)
        u = random_smooth(d, seed=7, decay=2.0, modes=16)
        c = to_modal(u, 20).coeffs
        np.testing.assert_allclose(np.abs(c[:16]), np.arange(1, 17.0) ** -2, atol=1e-12)
        np.testing.assert_allclose(c[16:], 0, atol=1e-12)

    def test_seeded(self):
        d = build_domain("interval", 1.0, 65, "neumann")
        a, b = random_smooth(d, 3), random_smooth(d, 3)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, random_smooth(d, 4).values)

    def test_single_mode_and_constant(self):
        d = build_domain("interval", math.pi, 63)
        u = InitialCondition("single_mode", mode=2, amplitude=3.0).build(d)
        assert abs(to_modal(u, 3).coeffs[1]) == pytest.approx(3.0)
        assert np.all(InitialCondition("constant", value=0.5).build(d).values == 0.5)


def test_run_experiment_h1_rate_check():
    res = run_experiment(config("a4_modal_h1", t_final=3.0, M=63))
    assert res.reports == [] and res.rate_check["passed"]
    assert res.rate_check["fitted_rate"] >= 0.875


def test_run_experiment_steering_two_checks_both_quantities():
    res = run_experiment(config("a6_steering_stable_case2", t_final=2.0, M=63))
    assert [r.quantity for r in res.reports] == ["z_l2_sq", "l2_sq"]
    assert res.passed


def test_sweep_without_simulation():
    rows = sweep(config("a7_nodal"), "N", [1, 2, 4], simulate_runs=False)
    assert [r["satisfied"] for r in rows] == [False, False, True]
    assert rows[2]["exponent"] == pytest.approx(2 * (1 - math.pi**2 / 16 + 0.05))


def test_convergence_study_needs_linear_mode():
    with pytest.raises(C.CertificateError):
        convergence_study(config("a3_modal"), [1e-2])
