from dataclasses import replace

import numpy as np
import pytest

from tamedspde.errors import ConfigurationError
from tamedspde.experiments import (
    CSV_COLUMNS,
    coupling_target,
    fixed_cutoff_schedule,
    fmt,
    make_schedule,
    run_convergence,
    run_divergence_contrast,
    run_gap_study,
    run_moments,
    smallest_divisor_at_least,
)
from tamedspde.operators import NoiseSpec, ginzburg_landau, swift_hohenberg

GL = ginzburg_landau()
HEAT = replace(ginzburg_landau(noise=NoiseSpec(scale=0.0)), reaction_sign=0.0)


def test_m2_targets_before_adjustment():
    s = make_schedule((2, 4, 8), 0.5, "paper_m2", n_max=2**14)
    assert [lv.n_target for lv in s.levels] == [5, 32, 181]
    assert [lv.n for lv in s.levels] == [8, 32, 256]
    assert [lv.k for lv in s.levels] == [2, 4, 8]
    assert len(s.adjustments) == 2


def test_divisor_search():
    assert smallest_divisor_at_least(2**14, 181) == 256
    assert smallest_divisor_at_least(1000, 181) == 200
    assert smallest_divisor_at_least(64, 65) is None


@pytest.mark.parametrize("m", range(1, 40))
def test_m2_target_is_floor_power(m):
    want = int(np.floor(m**2.5))
    # exact powers of two land on the integer, not just below it
    assert coupling_target(m, 0.5, "paper_m2") == want


def test_single_level_and_default_n_max():
    s = make_schedule((6,), 0.5)
    assert len(s.levels) == 1 and s.n_max == 128 and s.levels[0].n == 128


def test_schedule_rejections():
    with pytest.raises(ConfigurationError, match="delta"):
        make_schedule((2, 4), 0.0)
    with pytest.raises(ConfigurationError, match="too small"):
        make_schedule((2, 4, 8), 0.5, n_max=64)
    with pytest.raises(ConfigurationError, match="increasing"):
        make_schedule((4, 2), 0.5)
    with pytest.raises(ConfigurationError, match="rule"):
        make_schedule((2, 4), 0.5, "paper_m3")


def test_exact_rule_uses_exact_constant():
    sh = swift_hohenberg()
    s = make_schedule((2, 4), 0.5, "exact_c4", model=sh)
    for lv in s.levels:
        assert lv.n_target == int(np.floor(lv.c_exact**1.25 * (1 + 1e-12)))
        assert s.c_m(lv) == lv.c_exact
    ratios = [s.c_m(lv) / lv.n for lv in s.levels]
    assert ratios[1] < ratios[0]


def test_m2_rule_fails_for_swift_hohenberg_with_small_delta():
    # paper_form grows like m^2 while n ~ m^(2+delta): fine for GL, but the
    # divisor rounding makes c(m)/n flat for SH at delta = 0.5
    with pytest.raises(ConfigurationError, match="decrease"):
        make_schedule((2, 4), 0.5, "paper_m2", model=swift_hohenberg())


def test_zero_noise_zero_data_moments_vanish():
    s = make_schedule((2, 4), 0.5, model=HEAT)
    r = run_moments(HEAT, s, samples=3, u0_scale=0.0)
    assert all(row.estimate == 0 and row.stderr == 0 for row in r.rows)
    assert r.passed


def test_moments_small_run():
    s = make_schedule((2, 4), 0.5)
    r = run_moments(GL, s, samples=40, seed=1)
    assert r.divergences == 0 and r.jensen_ok()
    est, se = r.estimate(0, "sup_sq_q1")
    assert est >= 1.0 and se > 0  # the sup includes |u0|^2 = 1
    csv = r.to_csv().splitlines()
    assert csv[0] == "level,quantity," + ",".join(CSV_COLUMNS[1:])
    assert len(csv) == 1 + 2 * 4


def test_identical_reference_gives_zero_error():
    s = make_schedule((8,), 0.5, n_max=256)
    r = run_convergence(GL, s, samples=5, reference_level=(8, 256))
    assert r.errors[0] == 0


def test_reference_must_dominate():
    s = make_schedule((2, 4, 8), 0.5, n_max=2**10)
    with pytest.raises(ConfigurationError, match="dominate"):
        run_convergence(GL, s, samples=2, reference_level=(4, 2**10))


def test_convergence_small_run():
    s = make_schedule((2, 4, 8), 0.5, n_max=2**12)
    r = run_convergence(GL, s, samples=20, reference_level=(16, 2**12))
    assert r.strictly_decreasing() and r.passed
    assert r.errors[0] >= 1.5 * r.errors[1]


def test_implicit_reference_cross_check():
    s = make_schedule((2, 4), 0.5, n_max=2**12)
    a = run_convergence(GL, s, samples=20, reference_level=(16, 2**12))
    b = run_convergence(GL, s, samples=20, reference_level=(16, 2**12), reference_scheme="reference")
    np.testing.assert_allclose(a.errors, b.errors, rtol=0.05)


def test_divergence_contrast():
    r = run_divergence_contrast(u0_scale=5.0)
    assert r.untamed_fraction == 1.0 and r.untamed_steps[0] < 20
    assert r.tamed_flags == 0 and r.tamed_bounded and r.passed
    quiet = run_divergence_contrast(u0_scale=0.1)
    assert quiet.untamed_fraction == 0.0 and quiet.tamed_flags == 0


def test_contrast_large_data_many_steps():
    r = run_divergence_contrast(u0_scale=1e3, dt=0.1, steps=1000)
    assert r.tamed_flags == 0 and r.tamed_max_abs <= r.bound


def test_gap_zero_without_drift_and_noise():
    s = fixed_cutoff_schedule(4, (64, 128), HEAT)
    r = run_gap_study(HEAT, s, samples=2, u0_scale=0.0)
    assert all(row.estimate == 0 for row in r.rows)
    assert r.slope_ok is None


def test_deterministic_gap_slope_is_two():
    s = fixed_cutoff_schedule(4, (64, 128, 256, 512), HEAT)
    r = run_gap_study(HEAT, s, samples=1)
    assert r.slope == pytest.approx(2.0, abs=0.05)
    assert r.slope_ok is None and r.passed


def test_noisy_gap_slope_small_run():
    s = fixed_cutoff_schedule(8, (256, 512, 1024), GL)
    r = run_gap_study(GL, s, samples=30)
    assert r.slope_ok


def test_worker_and_chunk_independence():
    s = make_schedule((2, 4), 0.5, n_max=2**10)
    a = run_convergence(GL, s, samples=12, reference_level=(8, 2**10), workers=1, chunk_size=5)
    b = run_convergence(GL, s, samples=12, reference_level=(8, 2**10), workers=3, chunk_size=5)
    c = run_convergence(GL, s, samples=12, reference_level=(8, 2**10), workers=1, chunk_size=12)
    assert a.to_csv() == b.to_csv() == c.to_csv()


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 2.0**-40, 123456789.123):
        assert float(fmt(x)) == x
    assert fmt(np.int64(7)) == "7"
