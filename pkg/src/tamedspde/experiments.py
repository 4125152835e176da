"""Monte Carlo studies: moment bounds, time-step gap, strong convergence, divergence contrast.

Samples are split into chunks of fixed size; a chunk's results depend only on
its sample indices, never on which worker ran it, and per-sample results are
concatenated in sample order before any averaging.  Reports are therefore
bit-identical for any worker count.
"""

import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .noise import NoiseSource
from .operators import scalar_toy
from .spectral import SpectralField, embed, galerkin_constant
from .stepper import LevelConfig, integrate, one_step_drift_bound

log = logging.getLogger(__name__)

RULES = ("paper_m2", "exact_c4", "fixed")
CSV_COLUMNS = ("level", "m", "n", "k", "c_m", "c_m_tau", "estimate", "stderr", "samples")


def fmt(x):
    """Decimal with 17 significant digits."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


# schedules ------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleLevel:
    m: int
    n: int
    k: int
    n_target: int
    c_exact: float
    c_paper: float


@dataclass(frozen=True)
class Schedule:
    """Discretization levels ``(m_l, n_l, k_l)`` sharing one noise resolution ``n_max``."""

    levels: tuple
    delta: float
    rule: str
    n_max: int
    T: float = 1.0
    adjustments: tuple = ()

    def c_m(self, level):
        """The Galerkin constant that drives this schedule's coupling rule."""
        return level.c_exact if self.rule == "exact_c4" else level.c_paper

    def config(self, level):
        return LevelConfig(level.m, level.n, level.k, self.T)

    def describe(self):
        lines = [f"rule = {self.rule}", f"delta = {fmt(self.delta)}", f"n_max = {self.n_max}"]
        for i, lv in enumerate(self.levels):
            lines.append(
                f"level {i}: m={lv.m} n_target={lv.n_target} n={lv.n} k={lv.k} "
                f"c_exact={fmt(lv.c_exact)} c_paper={fmt(lv.c_paper)} "
                f"c_m_tau={fmt(self.c_m(lv) * self.T / lv.n)}"
            )
        lines += [f"adjusted: {a}" for a in self.adjustments]
        return "\n".join(lines)


def coupling_target(m, delta, rule, c_exact=None):
    """Target step count before divisor adjustment."""
    if rule == "paper_m2":
        return int(math.floor(m ** (2.0 + delta) * (1 + 1e-12)))
    if rule == "exact_c4":
        return int(math.floor(c_exact ** (1.0 + delta / 2.0) * (1 + 1e-12)))
    raise ConfigurationError(f"rule {rule!r} has no coupling target")


def smallest_divisor_at_least(n_max, target):
    for n in range(max(1, target), n_max + 1):
        if n_max % n == 0:
            return n
    return None


def _default_model():
    from .operators import ginzburg_landau

    return ginzburg_landau()


def make_schedule(m_list, delta=0.5, rule="paper_m2", n_max=None, model=None, T=1.0):
    """Levels with ``n_l`` the smallest divisor of ``n_max`` at or above the coupling target.

    ``paper_m2`` targets ``floor(m^(2 + delta))``; ``exact_c4`` targets
    ``floor(c(m)^(1 + delta/2))`` with the exact Galerkin constant, which keeps
    ``c(m)/n ~ c(m)^(-delta/2) -> 0``.  ``n_max`` defaults to the smallest
    power of two covering the finest target.
    """
    if rule not in ("paper_m2", "exact_c4"):
        raise ConfigurationError(f"unknown rule {rule!r}; expected paper_m2 or exact_c4")
    if not delta > 0:
        raise ConfigurationError(f"delta must be > 0, got {delta}")
    m_list = [int(m) for m in m_list]
    if not m_list:
        raise ConfigurationError("at least one level is required")
    if any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise ConfigurationError(f"m values must be strictly increasing, got {m_list}")
    model = model or _default_model()
    consts = [galerkin_constant(model.basis(m)) for m in m_list]
    targets = [coupling_target(m, delta, rule, c[0]) for m, c in zip(m_list, consts)]
    if n_max is None:
        n_max = 1 << max(0, math.ceil(math.log2(max(targets))))
    levels, notes = [], []
    for m, (ce, cp), target in zip(m_list, consts, targets):
        n = smallest_divisor_at_least(n_max, target)
        if n is None:
            raise ConfigurationError(
                f"n_max={n_max} is too small for level m={m} (target n={target})"
            )
        if n != target:
            notes.append(f"m={m}: n {target} -> {n}")
            log.info("schedule: m=%d target n=%d adjusted to divisor %d of n_max", m, target, n)
        levels.append(ScheduleLevel(m, n, model.noise_modes(model.basis(m)), target, ce, cp))
    sched = Schedule(tuple(levels), float(delta), rule, int(n_max), float(T), tuple(notes))
    ratios = [sched.c_m(lv) / lv.n for lv in levels]
    if any(b >= a for a, b in zip(ratios, ratios[1:])):
        raise ConfigurationError(f"c(m)/n must decrease along levels, got {ratios}")
    if any(b.k < a.k for a, b in zip(levels, levels[1:])):
        raise ConfigurationError("noise truncation k must be nondecreasing")
    return sched


def fixed_cutoff_schedule(m, n_list, model=None, T=1.0, n_max=None):
    """Levels with a common cutoff ``m`` and varying step counts (time-step studies)."""
    model = model or _default_model()
    n_list = [int(n) for n in n_list]
    n_max = n_max or int(np.lcm.reduce(n_list))
    ce, cp = galerkin_constant(model.basis(m))
    k = model.noise_modes(model.basis(m))
    for n in n_list:
        if n_max % n:
            raise ConfigurationError(f"n={n} does not divide n_max={n_max}")
    levels = tuple(ScheduleLevel(m, n, k, n, ce, cp) for n in n_list)
    return Schedule(levels, 0.0, "fixed", n_max, float(T))


# execution helpers ----------------------------------------------------------


def default_initial(model, basis, scale=1.0):
    """Smooth deterministic data: ``scale`` times the lowest mode."""
    c = np.zeros(basis.size)
    c[0] = scale
    return SpectralField(basis, c)


def _chunks(samples, chunk_size):
    return [
        np.arange(s, min(samples, s + chunk_size), dtype=np.int64)
        for s in range(0, samples, chunk_size)
    ]


def _map(func, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(func, tasks))


def _concat(parts, key):
    return np.concatenate([p[key] for p in parts], axis=0)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    n = len(x)
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


@dataclass
class LevelRow:
    level: int
    m: int
    n: int
    k: int
    c_m: float
    c_m_tau: float
    estimate: float
    stderr: float
    samples: int
    quantity: str = ""

    def cells(self, with_quantity=False):
        head = [str(self.level)] + ([self.quantity] if with_quantity else [])
        return head + [
            str(self.m), str(self.n), str(self.k), fmt(self.c_m), fmt(self.c_m_tau),
            fmt(self.estimate), fmt(self.stderr), str(self.samples),
        ]


def _csv(rows, with_quantity=False):
    cols = list(CSV_COLUMNS)
    if with_quantity:
        cols.insert(1, "quantity")
    out = io.StringIO()
    out.write(",".join(cols) + "\n")
    for r in rows:
        out.write(",".join(r.cells(with_quantity)) + "\n")
    return out.getvalue()


# moments --------------------------------------------------------------------


def _moment_chunk(task):
    model, schedule, sample_ids, seed, u0_scale, epsilon, override = task
    k_max = max(lv.k for lv in schedule.levels)
    source = NoiseSource(seed, sample_ids, schedule.n_max, k_max, schedule.T)
    out = []
    for lv in schedule.levels:
        basis = model.basis(lv.m)
        rec = integrate(
            model, schedule.config(lv), source, default_initial(model, basis, u0_scale),
            "tamed", epsilon=epsilon, override_guard=override, galerkin=schedule.c_m(lv),
        )
        out.append({"max_sq": rec.max_sq, "v1": rec.v1_integral, "diverged": rec.diverged})
    return out


@dataclass
class MomentReport:
    """Monte Carlo estimates of ``E sup|u|^{2q}`` and ``E (int ||u||_V1^2)^q`` per level."""

    model: str
    schedule: Schedule
    rows: list
    q_list: tuple
    divergences: int
    seed: int
    samples: int

    def estimate(self, level, quantity):
        for r in self.rows:
            if r.level == level and r.quantity == quantity:
                return r.estimate, r.stderr
        raise KeyError((level, quantity))

    def uniformity_ratio(self, q=1):
        vals = [self.estimate(i, f"sup_sq_q{q}")[0] for i in range(len(self.schedule.levels))]
        return max(vals) / min(vals)

    def jensen_ok(self):
        """``E X^2 >= (E X)^2 - stderr`` for ``X = sup |u|^2`` on every level."""
        if not {1, 2} <= set(self.q_list):
            return True
        ok = True
        for i in range(len(self.schedule.levels)):
            e1, _ = self.estimate(i, "sup_sq_q1")
            e2, se2 = self.estimate(i, "sup_sq_q2")
            ok &= e2 >= e1 * e1 - se2
        return bool(ok)

    @property
    def passed(self):
        return self.divergences == 0 and self.jensen_ok()

    def to_csv(self):
        return _csv(self.rows, with_quantity=True)


def run_moments(model, schedule, samples=500, seed=0, q_list=(1, 2), *, u0_scale=1.0,
                workers=1, chunk_size=50, epsilon=1.0, override_guard=False):
    """A priori moment estimates of the tamed scheme on every level of ``schedule``."""
    tasks = [
        (model, schedule, ids, seed, u0_scale, epsilon, override_guard)
        for ids in _chunks(samples, chunk_size)
    ]
    parts = _map(_moment_chunk, tasks, workers)
    rows, divergences = [], 0
    for i, lv in enumerate(schedule.levels):
        max_sq = np.concatenate([p[i]["max_sq"] for p in parts])
        v1 = np.concatenate([p[i]["v1"] for p in parts])
        divergences += int(np.sum(np.concatenate([p[i]["diverged"] for p in parts])))
        c_m = schedule.c_m(lv)
        base = dict(level=i, m=lv.m, n=lv.n, k=lv.k, c_m=c_m,
                    c_m_tau=c_m * schedule.T / lv.n, samples=samples)
        for q in q_list:
            est, se = _mean_se(max_sq**q)
            rows.append(LevelRow(estimate=est, stderr=se, quantity=f"sup_sq_q{q}", **base))
        for q in q_list:
            est, se = _mean_se(v1**q)
            rows.append(LevelRow(estimate=est, stderr=se, quantity=f"v1_int_q{q}", **base))
    return MomentReport(model.name, schedule, rows, tuple(q_list), divergences, seed, samples)


# strong convergence ---------------------------------------------------------


def _convergence_chunk(task):
    model, schedule, ref, ref_scheme, sample_ids, seed, n_noise, u0_scale, epsilon, override = task
    m_ref, n_ref = ref
    ref_basis = model.basis(m_ref)
    k_ref = model.noise_modes(ref_basis)
    source = NoiseSource(seed, sample_ids, n_noise, k_ref, schedule.T)
    ref_cfg = LevelConfig(m_ref, n_ref, k_ref, schedule.T)
    ref_rec = integrate(
        model, ref_cfg, source, default_initial(model, ref_basis, u0_scale), ref_scheme,
        epsilon=epsilon, override_guard=override,
    )
    u_ref = ref_rec.endpoint.coeffs
    errors, flags = [], [ref_rec.diverged]
    for lv in schedule.levels:
        basis = model.basis(lv.m)
        rec = integrate(
            model, schedule.config(lv), source, default_initial(model, basis, u0_scale), "tamed",
            epsilon=epsilon, override_guard=override, galerkin=schedule.c_m(lv),
        )
        diff = embed(rec.endpoint, ref_basis).coeffs - u_ref
        errors.append(np.sum(diff * diff, axis=-1))
        flags.append(rec.diverged)
    return {"errors": np.stack(errors, axis=0), "diverged": np.stack(flags, axis=0)}


@dataclass
class ConvergenceReport:
    """Strong errors ``E |u_l(T) - u_ref(T)|^2`` under a common driving noise."""

    model: str
    schedule: Schedule
    rows: list
    reference: tuple
    reference_scheme: str
    divergences: int
    seed: int
    samples: int

    @property
    def errors(self):
        return np.array([r.estimate for r in self.rows])

    @property
    def stderrs(self):
        return np.array([r.stderr for r in self.rows])

    def strictly_decreasing(self):
        """Each error exceeds the next by more than the sum of their standard errors."""
        e, s = self.errors, self.stderrs
        return bool(np.all(e[:-1] - s[:-1] > e[1:] + s[1:]))

    @property
    def passed(self):
        return self.divergences == 0 and self.strictly_decreasing()

    def to_csv(self):
        return _csv(self.rows)


def run_convergence(model, schedule, samples=200, seed=0, reference_level=None, *,
                    reference_scheme="tamed", u0_scale=1.0, workers=1, chunk_size=25,
                    epsilon=1.0, override_guard=False):
    """Strong error of each level against a finer reference driven by the same noise.

    ``reference_level`` is ``(m_ref, n_ref)``; it defaults to twice the finest
    cutoff with ``n_ref = n_max``.  The noise is generated once per sample at
    the least common multiple of all step counts.
    """
    finest = schedule.levels[-1]
    m_ref, n_ref = reference_level or (2 * finest.m, schedule.n_max)
    for lv in schedule.levels:
        if lv.m > m_ref or lv.n > n_ref:
            raise ConfigurationError(
                f"reference (m={m_ref}, n={n_ref}) does not dominate level (m={lv.m}, n={lv.n})"
            )
    n_noise = int(np.lcm.reduce([n_ref] + [lv.n for lv in schedule.levels]))
    tasks = [
        (model, schedule, (m_ref, n_ref), reference_scheme, ids, seed, n_noise, u0_scale,
         epsilon, override_guard)
        for ids in _chunks(samples, chunk_size)
    ]
    parts = _map(_convergence_chunk, tasks, workers)
    errors = np.concatenate([p["errors"] for p in parts], axis=1)
    divergences = int(np.sum(np.concatenate([p["diverged"] for p in parts], axis=1)))
    rows = []
    for i, lv in enumerate(schedule.levels):
        est, se = _mean_se(errors[i])
        c_m = schedule.c_m(lv)
        rows.append(LevelRow(i, lv.m, lv.n, lv.k, c_m, c_m * schedule.T / lv.n, est, se, samples))
    return ConvergenceReport(model.name, schedule, rows, (m_ref, n_ref), reference_scheme,
                             divergences, seed, samples)


# time-step gap --------------------------------------------------------------


def _gap_chunk(task):
    model, schedule, sample_ids, seed, substeps, u0_scale, epsilon, override = task
    k_max = max(lv.k for lv in schedule.levels)
    source = NoiseSource(seed, sample_ids, schedule.n_max, k_max, schedule.T)
    out = []
    for lv in schedule.levels:
        basis = model.basis(lv.m)
        r = schedule.n_max // lv.n
        sub = max(d for d in range(1, min(substeps, r) + 1) if r % d == 0)
        rec = integrate(
            model, schedule.config(lv), source, default_initial(model, basis, u0_scale),
            "tamed", epsilon=epsilon, override_guard=override, galerkin=schedule.c_m(lv),
            substeps=sub,
        )
        out.append(rec.gap)
    return np.stack(out, axis=0)


@dataclass
class GapReport:
    """Mean of ``int_0^T |u_l(s) - u_l(kappa(s))|^2 ds`` per level and its log-log slope in tau."""

    model: str
    schedule: Schedule
    rows: list
    slope: float
    noisy: bool
    seed: int
    samples: int
    band: tuple = (0.7, 1.3)

    @property
    def slope_ok(self):
        if not self.noisy:
            return None
        return self.band[0] <= self.slope <= self.band[1]

    @property
    def passed(self):
        return self.slope_ok is not False

    def to_csv(self):
        return _csv(self.rows)


def fit_slope(taus, values):
    """Least-squares slope of ``log values`` against ``log taus``."""
    return float(np.polyfit(np.log(taus), np.log(values), 1)[0])


def run_gap_study(model, schedule, samples=200, seed=0, *, substeps=4, u0_scale=1.0,
                  workers=1, chunk_size=50, epsilon=1.0, override_guard=False):
    tasks = [
        (model, schedule, ids, seed, substeps, u0_scale, epsilon, override_guard)
        for ids in _chunks(samples, chunk_size)
    ]
    gaps = np.concatenate(_map(_gap_chunk, tasks, workers), axis=1)
    rows, taus, means = [], [], []
    for i, lv in enumerate(schedule.levels):
        est, se = _mean_se(gaps[i])
        c_m = schedule.c_m(lv)
        tau = schedule.T / lv.n
        rows.append(LevelRow(i, lv.m, lv.n, lv.k, c_m, c_m * tau, est, se, samples))
        taus.append(tau)
        means.append(est)
    positive = all(v > 0 for v in means)
    slope = fit_slope(taus, means) if positive and len(means) > 1 else float("nan")
    return GapReport(model.name, schedule, rows, slope, model.has_noise, seed, samples)


# divergence contrast --------------------------------------------------------


@dataclass
class ContrastReport:
    """Untamed blow-up versus tamed boundedness on the scalar cubic model."""

    u0: float
    dt: float
    steps: int
    samples: int
    untamed_fraction: float
    untamed_steps: np.ndarray
    tamed_max_abs: float
    tamed_flags: int
    bound: float
    threshold: float
    noisy: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def tamed_bounded(self):
        return self.noisy or self.tamed_max_abs <= self.bound

    @property
    def passed(self):
        return self.tamed_flags == 0 and self.tamed_bounded

    def to_csv(self):
        cols = ["scheme", "u0", "dt", "steps", "samples", "divergence_fraction", "max_abs", "bound"]
        rows = [
            ["untamed", fmt(self.u0), fmt(self.dt), str(self.steps), str(self.samples),
             fmt(self.untamed_fraction), "nan", fmt(self.bound)],
            ["tamed", fmt(self.u0), fmt(self.dt), str(self.steps), str(self.samples),
             fmt(self.tamed_flags / self.samples), fmt(self.tamed_max_abs), fmt(self.bound)],
        ]
        return "\n".join(",".join(r) for r in [cols] + rows) + "\n"


def run_divergence_contrast(model=None, u0_scale=5.0, dt=0.1, steps=20, samples=1, seed=0,
                            threshold=1e10):
    """Run both explicit schemes from ``u0`` with the stability guard overridden."""
    model = model or scalar_toy()
    T = dt * steps
    basis = model.basis(0)
    cfg = LevelConfig(basis.m, steps, 1, T)
    u0 = default_initial(model, basis, u0_scale)
    source = NoiseSource(seed, np.arange(samples), steps, 1, T) if model.has_noise else None
    if source is None:
        u0 = SpectralField(basis, np.broadcast_to(u0.coeffs, (samples, basis.size)))
    untamed = integrate(model, cfg, source, u0, "untamed", override_guard=True,
                        divergence_threshold=threshold)
    tamed = integrate(model, cfg, source, u0, "tamed", override_guard=True,
                      divergence_threshold=threshold)
    return ContrastReport(
        float(u0_scale), float(dt), int(steps), int(samples),
        float(np.mean(untamed.diverged)),
        untamed.divergence_step,
        float(np.sqrt(np.max(tamed.max_sq))),
        int(np.sum(tamed.diverged)),
        abs(u0_scale) + one_step_drift_bound(cfg) * steps,
        threshold,
        noisy=model.has_noise,
    )
