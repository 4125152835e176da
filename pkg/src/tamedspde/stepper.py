"""Time integrators for the Galerkin systems.

``tamed``      fully explicit Euler with the tamed reaction (the scheme studied here)
``untamed``    the same recursion without taming, for divergence demonstrations
``reference``  linearly implicit Euler: the non-positive part of the diagonal
               linear multiplier is implicit, everything else explicit

All integrators act on batches: coefficient arrays carry leading sample axes
and the noise increments supply matching axes.
"""

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, IntegrationError
from .noise import NoisePath, NoiseSource, block_sum, coarsen, truncate_modes
from .operators import (
    a1_coeffs,
    a2_from_grid,
    linear_multiplier,
    noise_term,
    v1_norm,
    v2_norm_from_grid,
)
from .spectral import SpectralField, galerkin_constant
from .taming import factor_from_norm

SCHEMES = ("tamed", "untamed", "reference")


@dataclass(frozen=True)
class LevelConfig:
    """Galerkin cutoff ``m``, step count ``n``, noise modes ``k`` and horizon ``T``."""

    m: int
    n: int
    k: int
    T: float = 1.0

    def __post_init__(self):
        if self.m < 0 or self.n < 1 or self.k < 1:
            raise ConfigurationError(f"invalid level m={self.m}, n={self.n}, k={self.k}")
        if not self.T > 0:
            raise ConfigurationError(f"horizon T must be positive, got {self.T}")

    @property
    def dt(self):
        return self.T / self.n


@dataclass
class TrajectoryRecord:
    """Per-sample statistics of one integration.

    ``max_sq`` is the maximum of ``|u(t_i)|^2`` over all grid times including
    ``T``; ``v1_integral`` and ``v2_integral`` are ``sum_i ||u(t_i)||^2_V1 dt``
    and ``sum_i ||u(t_i)||^p_V2 dt`` over ``i < n`` (the piecewise-constant
    interpolant).  Diverged samples carry NaN endpoints and the step index at
    which they left the threshold.
    """

    scheme: str
    endpoint: SpectralField
    max_sq: np.ndarray
    v1_integral: np.ndarray
    v2_integral: np.ndarray
    diverged: np.ndarray
    divergence_step: np.ndarray
    snapshots: Optional[np.ndarray] = None
    gap: Optional[np.ndarray] = None
    dt: float = 0.0

    @property
    def any_diverged(self):
        return bool(np.any(self.diverged))


class _Stepper:
    """One level's precomputed operators; ``advance`` performs a single step on raw arrays."""

    def __init__(self, model, cfg, scheme):
        if scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        self.model = model
        self.cfg = cfg
        self.scheme = scheme
        self.basis = model.basis(cfg.m)
        size = model.noise_modes(self.basis)
        if cfg.k > size:
            raise ConfigurationError(f"k={cfg.k} exceeds the {size} noise-capable modes at m={cfg.m}")
        self.dt = cfg.dt
        if scheme == "reference":
            lam = linear_multiplier(model, self.basis)
            self.implicit = np.minimum(lam, 0.0)
            denom = 1.0 - self.dt * self.implicit
            assert np.all(denom > 0)
            self.denom = denom

    def drift(self, c):
        """Drift coefficients ``Pi_m [A1 u + A2_l u]`` and the state's grid values."""
        b = self.basis
        g = b.synthesize(c)
        a2, _ = a2_from_grid(self.model, b, g)
        if self.scheme == "tamed":
            x = np.sqrt(np.sum(a2 * a2, axis=-1))
            a2 = a2 * np.asarray(factor_from_norm(x, self.cfg.n))[..., None]
        return a1_coeffs(self.model, b, c) + a2, g

    def advance(self, c, dw):
        """Return ``(u_{i+1}, drift(u_i), grid(u_i))``."""
        drift, g = self.drift(c)
        noise = noise_term(self.model, self.basis, c, dw) if dw is not None else 0.0
        if self.scheme == "reference":
            new = (c + self.dt * (drift - self.implicit * c) + noise) / self.denom
        else:
            new = c + self.dt * drift + noise
        return new, drift, g


def _single_step(model, u, cfg, dw, scheme, step_index):
    st = _Stepper(model, cfg, scheme)
    dw = None if dw is None else np.asarray(dw, dtype=float)
    new, _, _ = st.advance(u.coeffs, dw)
    if scheme != "untamed" and not np.all(np.isfinite(new)):
        raise IntegrationError(f"non-finite state after step {step_index}", step=step_index)
    return SpectralField(st.basis, new)


def step_tamed(model, u, cfg, dw=None, step_index=0):
    """``u + dt Pi_m[A1 u + A2_l u] + sum_j Pi_m(B u chi_j) dw_j``."""
    return _single_step(model, u, cfg, dw, "tamed", step_index)


def step_untamed(model, u, cfg, dw=None, step_index=0):
    """Explicit Euler without taming; overflow is returned, not raised."""
    with np.errstate(over="ignore", invalid="ignore"):
        return _single_step(model, u, cfg, dw, "untamed", step_index)


def step_reference(model, u, cfg, dw=None, step_index=0):
    """Linearly implicit Euler step (diagonal solve for the dissipative linear part)."""
    return _single_step(model, u, cfg, dw, "reference", step_index)


def check_stability(model, cfg, epsilon=1.0, galerkin=None):
    """The constraint ``c(m) * dt <= epsilon`` under which the explicit schemes run.

    ``galerkin`` overrides the constant; by default the closed form
    ``m^d (1 + d + c_p)`` of the level's basis is used.
    """
    if galerkin is None:
        galerkin = galerkin_constant(model.basis(cfg.m))[1]
    value = galerkin * cfg.dt
    if value > epsilon:
        raise ConfigurationError(
            f"stability guard: c(m)*dt = {value:.4g} exceeds epsilon = {epsilon:g} "
            f"(m={cfg.m}, n={cfg.n}); refine the time grid or override the guard"
        )
    return value


def _noise_blocks(path, cfg, batch_shape, block, sub=1):
    """Yield ``(start, stop, increments)`` with increments at resolution ``n * sub``."""
    n, k = cfg.n, cfg.k
    if path is None:
        for start in range(0, n, block):
            stop = min(n, start + block)
            yield start, stop, np.zeros(batch_shape + (k, (stop - start) * sub))
        return
    if isinstance(path, NoiseSource):
        if abs(path.T - cfg.T) > 1e-12 * cfg.T:
            raise ConfigurationError(f"noise horizon {path.T} differs from level horizon {cfg.T}")
        for start in range(0, n, block):
            stop = min(n, start + block)
            yield start, stop, path.increments(k, n * sub, start * sub, stop * sub)
        return
    if not isinstance(path, NoisePath):
        raise ConfigurationError(f"unsupported noise object {type(path).__name__}")
    if abs(path.T - cfg.T) > 1e-12 * cfg.T:
        raise ConfigurationError(f"noise horizon {path.T} differs from level horizon {cfg.T}")
    base = path.fine if path.fine is not None else path
    if base.n % (n * sub):
        raise ConfigurationError(f"path with {base.n} intervals cannot drive n={n * sub}")
    if k > path.k:
        raise ConfigurationError(f"path has {path.k} modes, level needs k={k}")
    inc = truncate_modes(coarsen(path, n * sub), k).increments
    for start in range(0, n, block):
        stop = min(n, start + block)
        yield start, stop, inc[..., start * sub: stop * sub]


def _batch_shape(path, u0):
    if isinstance(path, NoiseSource):
        return (len(path.samples),)
    if isinstance(path, NoisePath):
        return path.increments.shape[:-2]
    return u0.coeffs.shape[:-1]


def integrate(
    model,
    cfg,
    path,
    u0,
    scheme="tamed",
    *,
    epsilon=1.0,
    override_guard=False,
    galerkin=None,
    keep_snapshots=False,
    divergence_threshold=1e10,
    substeps=None,
    block=512,
):
    """Run ``n`` steps of the chosen scheme from ``u0`` driven by ``path``.

    ``path`` may be a :class:`NoisePath` (coarsened and truncated to the level),
    a :class:`NoiseSource` or ``None`` for deterministic runs.  The explicit
    schemes refuse to start when ``c(m) dt > epsilon`` unless
    ``override_guard`` is set.  With ``substeps`` the time-step gap
    ``int |u(s) - u(kappa(s))|^2 ds`` is accumulated on a sub-grid of the noise.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme != "reference" and not override_guard:
        check_stability(model, cfg, epsilon, galerkin)
    st = _Stepper(model, cfg, scheme)
    basis = st.basis
    if not u0.basis.compatible(basis):
        raise ConfigurationError("initial value is not on the level's basis")
    batch = _batch_shape(path, u0)
    c = np.broadcast_to(u0.coeffs, batch + (basis.size,)).astype(float, copy=True)
    if not model.has_noise:
        path = None
    dt = cfg.dt
    p = model.p
    v1i = np.zeros(batch)
    v2i = np.zeros(batch)
    diverged = np.zeros(batch, dtype=bool)
    div_step = np.full(batch, -1, dtype=np.int64)
    snaps = [c.copy()] if keep_snapshots else None
    sub = int(substeps) if substeps else 1
    gap = np.zeros(batch) if substeps else None
    thr_sq = divergence_threshold**2
    # non-finite states are detected explicitly below
    with np.errstate(over="ignore", invalid="ignore"):
        max_sq = np.sum(c * c, axis=-1)
        for start, stop, inc in _noise_blocks(path, cfg, batch, block, sub):
            dws = block_sum(inc, sub) if sub > 1 else inc
            for i in range(start, stop):
                dw = dws[..., i - start]
                new, drift, g = st.advance(c, dw)
                v1i += v1_norm(model, basis, c) ** 2 * dt
                v2i += v2_norm_from_grid(model, basis, c, g) ** p * dt
                if gap is not None:
                    gap += _interval_gap(model, basis, c, drift, inc[..., (i - start) * sub:(i - start + 1) * sub], dt)
                h2 = np.sum(new * new, axis=-1)
                bad = ~np.isfinite(h2)
                if scheme != "untamed" and np.any(bad):
                    raise IntegrationError(f"non-finite state after step {i} ({scheme})", step=i)
                fresh = (bad | (h2 > thr_sq)) & ~diverged
                if np.any(fresh):
                    div_step[fresh] = i
                    diverged |= fresh
                    if scheme == "untamed":
                        new[diverged] = np.nan
                        h2 = np.where(diverged, np.nan, h2)
                max_sq = np.fmax(max_sq, h2)
                c = new
                if snaps is not None:
                    snaps.append(c.copy())
                if scheme == "untamed" and np.all(diverged):
                    break
            else:
                continue
            break
    return TrajectoryRecord(
        scheme,
        SpectralField(basis, c),
        max_sq,
        v1i,
        v2i,
        diverged,
        div_step,
        None if snaps is None else np.stack(snaps),
        gap,
        dt,
    )


def _interval_gap(model, basis, c, drift, sub_inc, dt):
    """``int_0^dt |s a + N(s)|^2 ds`` for one interval.

    The drift part ``dt^3 |a|^2 / 3`` is exact; the cross and noise parts use
    the trapezoid rule on the noise sub-grid, where ``N(s)`` is the noise
    contribution accumulated up to ``s``.
    """
    r = sub_inc.shape[-1]
    h = dt / r
    total = dt**3 * np.sum(drift * drift, axis=-1) / 3.0
    if not model.has_noise:
        return total
    w = np.cumsum(sub_inc, axis=-1)
    acc = 0.0
    for q in range(1, r + 1):
        nq = noise_term(model, basis, c, w[..., q - 1])
        val = 2 * q * h * np.sum(drift * nq, axis=-1) + np.sum(nq * nq, axis=-1)
        acc = acc + (0.5 * val if q == r else val)
    return total + h * acc


def timestep_gap(model, cfg, path, u0, substeps=4, **kwargs):
    """Per-sample ``int_0^T |u(s) - u(kappa(s))|^2 ds`` of the tamed scheme."""
    if isinstance(path, NoisePath):
        base = path.fine if path.fine is not None else path
        substeps = _fit_substeps(base.n // cfg.n if base.n % cfg.n == 0 else 0, substeps)
    elif isinstance(path, NoiseSource):
        substeps = _fit_substeps(path.n_max // cfg.n if path.n_max % cfg.n == 0 else 0, substeps)
    rec = integrate(model, cfg, path, u0, "tamed", substeps=substeps, **kwargs)
    return rec.gap


def _fit_substeps(ratio, wanted):
    if ratio < 1:
        raise ConfigurationError("noise resolution must be a multiple of the level's n")
    for r in range(min(wanted, ratio), 0, -1):
        if ratio % r == 0:
            return r
    return 1


def write_snapshots(record, file, sample=None):
    """CSV with columns ``t, c_1 .. c_M`` for one sample of a snapshot record."""
    if record.snapshots is None:
        raise ConfigurationError("trajectory was integrated without snapshots")
    snaps = record.snapshots
    if sample is not None:
        snaps = snaps[:, sample]
    elif snaps.ndim > 2:
        raise ConfigurationError("batched snapshots need an explicit sample index")
    times = record.dt * np.arange(len(snaps))
    header = ["t"] + [f"c_{j + 1}" for j in range(snaps.shape[-1])]
    close = False
    if not hasattr(file, "write"):
        file = open(file, "w", newline="")
        close = True
    try:
        writer = csv.writer(file)
        writer.writerow(header)
        for t, row in zip(times, snaps):
            writer.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in row])
    finally:
        if close:
            file.close()


def one_step_drift_bound(cfg):
    """``dt * sqrt(n) = sqrt(T dt)``, the largest tamed reaction displacement per step."""
    return math.sqrt(cfg.T * cfg.dt)
