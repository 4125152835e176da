import io
import math
from dataclasses import replace

import numpy as np
import pytest

from tamedspde.errors import ConfigurationError, IntegrationError
from tamedspde.noise import NoiseSource, sample_path
from tamedspde.operators import NoiseSpec, ginzburg_landau, scalar_toy
from tamedspde.spectral import SpectralField, unit, zeros
from tamedspde.stepper import (
    LevelConfig,
    check_stability,
    integrate,
    step_reference,
    step_tamed,
    step_untamed,
    timestep_gap,
    write_snapshots,
)

QUIET = NoiseSpec(scale=0.0)
GL = ginzburg_landau()
HEAT = replace(ginzburg_landau(noise=QUIET), reaction_sign=0.0)  # A2 = 0, no noise
TOY = scalar_toy()
FLAT = replace(TOY, reaction_sign=0.0)  # zero drift


def toy_field(u):
    return SpectralField(TOY.basis(0), np.array([float(u)]))


def test_zero_drift_zero_noise_is_stationary():
    cfg = LevelConfig(0, 10, 1)
    for step in (step_tamed, step_untamed, step_reference):
        assert step(FLAT, toy_field(3.0), cfg).coeffs[0] == 3.0


def test_heat_mode_one_step():
    b = HEAT.basis(4)
    cfg = LevelConfig(4, 10, 4)
    for step in (step_tamed, step_untamed):
        np.testing.assert_allclose(step(HEAT, unit(b, 0), cfg).coeffs, [0.9, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(step_reference(HEAT, unit(b, 0), cfg).coeffs, [1 / 1.1, 0, 0, 0], atol=1e-15)
    assert not np.any(step_reference(HEAT, zeros(b), cfg).coeffs)


def test_reference_is_stable_on_stiff_modes():
    b = HEAT.basis(8)
    for n in (1, 3, 1000):
        out = step_reference(HEAT, unit(b, 7), LevelConfig(8, n, 8))
        assert out.coeffs[7] == pytest.approx(1 / (1 + 64 / n), rel=1e-15)


def test_tamed_toy_step_formula():
    cfg = LevelConfig(0, 100, 1, T=10.0)  # dt = 0.1, n = 100
    got = step_tamed(TOY, toy_field(5.0), cfg).coeffs[0]
    assert got == pytest.approx(5 + 0.1 * (-125 / 13.5), rel=1e-15)


def test_untamed_toy_iteration():
    cfg = LevelConfig(0, 20, 1, T=2.0)
    u1 = step_untamed(TOY, toy_field(5.0), cfg)
    assert u1.coeffs[0] == pytest.approx(-7.5, rel=1e-15)
    u2 = step_untamed(TOY, u1, cfg)
    assert u2.coeffs[0] == pytest.approx(34.6875, rel=1e-15)
    rec = integrate(TOY, cfg, None, toy_field(5.0), "untamed", override_guard=True)
    assert rec.any_diverged and 0 <= rec.divergence_step[()] < 20


def test_small_data_contracts():
    cfg = LevelConfig(0, 20, 1, T=2.0)
    for scheme in ("untamed", "tamed"):
        rec = integrate(TOY, cfg, None, toy_field(0.1), scheme, override_guard=True, keep_snapshots=True)
        traj = np.abs(rec.snapshots[:, 0])
        assert np.all(np.diff(traj) < 0) and not rec.any_diverged


def test_zero_state_stays_zero():
    cfg = LevelConfig(0, 10, 1)
    for step in (step_tamed, step_untamed, step_reference):
        assert step(TOY, toy_field(0.0), cfg).coeffs[0] == 0


def test_integrate_single_step_matches_step():
    b = GL.basis(4)
    cfg = LevelConfig(4, 1, 4, T=0.01)
    path = sample_path(0, 0, 1, 4, T=0.01)
    rec = integrate(GL, cfg, path, unit(b, 0), override_guard=True)
    one = step_tamed(GL, unit(b, 0), cfg, path.increments[:, 0])
    np.testing.assert_array_equal(rec.endpoint.coeffs, one.coeffs)


def test_tamed_toy_endpoint_bounded():
    rec = integrate(TOY, LevelConfig(0, 100, 1, T=1.0), None, toy_field(5.0))
    u = rec.endpoint.coeffs[0]
    assert math.isfinite(u) and abs(u) < 5


def test_tamed_never_flags_large_data():
    cfg = LevelConfig(0, 1000, 1, T=100.0)  # dt = 0.1
    u0 = SpectralField(TOY.basis(0), np.array([[1e3], [-1e3], [37.0]]))
    rec = integrate(TOY, cfg, None, u0, override_guard=True)
    assert not rec.any_diverged
    assert np.all(np.sqrt(rec.max_sq) <= 1e3 + math.sqrt(cfg.T * cfg.dt) * cfg.n)


def test_non_finite_state_raises_with_step():
    cfg = LevelConfig(0, 1, 1)
    with pytest.raises(IntegrationError) as err:
        integrate(TOY, cfg, None, toy_field(1e200), "reference")
    assert err.value.step == 0


def test_stability_guard():
    cfg = LevelConfig(8, 4, 8)
    with pytest.raises(ConfigurationError, match="stability guard"):
        integrate(GL, cfg, None, unit(GL.basis(8), 0))
    assert check_stability(GL, LevelConfig(8, 256, 8)) < 1
    integrate(GL, cfg, None, unit(GL.basis(8), 0), override_guard=True)


def test_path_and_source_agree():
    b = GL.basis(4)
    cfg = LevelConfig(4, 32, 4)
    path = sample_path(3, 0, 128, 4)
    src = NoiseSource(3, [0], 128, 4)
    a = integrate(GL, cfg, path, unit(b, 0)).endpoint.coeffs
    s = integrate(GL, cfg, src, unit(b, 0)).endpoint.coeffs
    np.testing.assert_array_equal(a, s[0])


def test_reference_agrees_with_tamed_at_fine_resolution():
    b = GL.basis(8)
    cfg = LevelConfig(8, 2**14, 8)
    src = NoiseSource(1, [0, 1, 2], 2**14, 8)
    t = integrate(GL, cfg, src, unit(b, 0)).endpoint.coeffs
    r = integrate(GL, cfg, src, unit(b, 0), "reference").endpoint.coeffs
    assert np.max(np.linalg.norm(t - r, axis=-1)) <= 1e-2


def test_gap_zero_without_drift_or_noise():
    cfg = LevelConfig(0, 16, 1)
    assert timestep_gap(FLAT, cfg, None, toy_field(2.0)) == 0


def test_gap_closed_form_for_heat_mode():
    cfg = LevelConfig(4, 10, 4)
    got = timestep_gap(HEAT, cfg, None, unit(HEAT.basis(4), 0), override_guard=True)
    tau = 0.1
    want = tau**3 / 3 * sum((1 - tau) ** (2 * i) for i in range(10))
    assert float(got) == pytest.approx(want, rel=1e-13)


def test_gap_halves_when_n_doubles():
    b = GL.basis(8)
    src = NoiseSource(0, np.arange(200), 2048, 8)
    m = [float(np.mean(timestep_gap(GL, LevelConfig(8, n, 8), src, unit(b, 0)))) for n in (512, 1024)]
    assert 0.7 * 0.5 <= m[1] / m[0] <= 1.3 * 0.5


def test_snapshot_csv():
    cfg = LevelConfig(0, 4, 1)
    rec = integrate(TOY, cfg, None, toy_field(1.0), keep_snapshots=True)
    buf = io.StringIO()
    write_snapshots(rec, buf)
    rows = buf.getvalue().strip().splitlines()
    assert rows[0] == "t,c_1" and len(rows) == 6
    t, c = rows[-1].split(",")
    assert float(t) == 1.0 and float(c) == rec.endpoint.coeffs[0]
    with pytest.raises(ConfigurationError):
        write_snapshots(integrate(TOY, cfg, None, toy_field(1.0)), io.StringIO())


def test_level_config_validation():
    with pytest.raises(ConfigurationError):
        LevelConfig(4, 0, 4)
    with pytest.raises(ConfigurationError):
        LevelConfig(4, 4, 4, T=-1.0)
    with pytest.raises(ConfigurationError):
        integrate(GL, LevelConfig(4, 64, 4), None, unit(GL.basis(4), 0), "heun")
