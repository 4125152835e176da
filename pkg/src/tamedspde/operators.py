"""Drift and diffusion operators of the example models, plus assumption checkers.

Each model splits its drift as ``A = A1 + A2``: ``A1`` is the linear or
divergence-form part (coercive in V1) and ``A2`` the superlinear reaction
(growing like ``|u|^(p-1)`` in V2).  All noise is placed in ``B1``.

The ``check_*`` functions sample random elements of V_m and evaluate each
inequality; they can refute an assumption but never prove it.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .spectral import (
    DualField,
    Domain,
    SpectralField,
    constant_basis,
    embed,
    make_basis,
    project,
    sobolev_weights,
)

MODEL_NAMES = ("ginzburg_landau", "swift_hohenberg", "fitzhugh_nagumo", "scalar_toy")
NOISE_KINDS = ("additive", "diagonal_multiplicative", "pointwise_multiplicative")
FLUXES = ("identity", "sigmoid")

# admissible exponent ranges [2, upper) per spatial dimension
P_RANGES = {1: 6.0, 2: 4.0}


@dataclass(frozen=True)
class NoiseSpec:
    """Column amplitudes ``sigma_j = scale * j**(-decay)`` of the diffusion B."""

    kind: str = "additive"
    scale: float = 1.0
    decay: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigurationError(
                f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}"
            )
        if self.scale < 0 or not math.isfinite(self.scale):
            raise ConfigurationError(f"noise scale must be finite and >= 0, got {self.scale}")
        if self.kind == "diagonal_multiplicative":
            if self.decay < 0:
                raise ConfigurationError("diagonal noise needs decay >= 0 (bounded amplitudes)")
        elif self.scale > 0 and self.decay <= 0.5:
            raise ConfigurationError(
                f"{self.kind} noise needs decay > 1/2 for square-summable amplitudes, "
                f"got {self.decay}"
            )

    def amplitudes(self, k):
        j = np.arange(1, k + 1, dtype=float)
        return self.scale * j ** (-self.decay)


@dataclass(frozen=True)
class ModelSpec:
    """A complete SPDE instance ``du = (A1 u + A2 u) dt + B u dW``.

    ``reaction_sign`` multiplies the superlinear term; the physical models use
    ``-1`` (dissipative) and ``+1`` gives a deliberately broken model for
    exercising the checkers.
    """

    name: str
    domain: Domain
    p: float = 4.0
    flux: str = "identity"
    gamma: float = 1.0
    c1: float = 0.08
    c2: float = 0.8
    c3: float = 0.7
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    K: float = 2.0
    mu: float = 1.0
    reaction_sign: float = -1.0

    def __post_init__(self):
        if self.name not in MODEL_NAMES:
            raise ConfigurationError(
                f"unknown model {self.name!r}; expected one of {MODEL_NAMES}"
            )
        check_exponent(self.domain.dimension, self.p)
        if self.flux not in FLUXES:
            raise ConfigurationError(f"unknown flux {self.flux!r}; expected one of {FLUXES}")
        if not self.K > 0:
            raise ConfigurationError(f"K must be positive, got {self.K}")
        if not self.mu > 0:
            raise ConfigurationError(f"mu must be positive, got {self.mu}")
        expected = 2 if self.name == "fitzhugh_nagumo" else 1
        if self.domain.n_unknowns != expected:
            raise ConfigurationError(
                f"{self.name} has {expected} unknown(s), domain declares {self.domain.n_unknowns}"
            )

    @property
    def sobolev_order(self):
        """Sobolev order of V1: 2 for Swift-Hohenberg, 1 otherwise."""
        return 2 if self.name == "swift_hohenberg" else 1

    @property
    def has_noise(self):
        return self.noise.scale > 0

    def basis(self, m):
        if self.name == "scalar_toy":
            return constant_basis(self.domain.lengths[0])
        return make_basis(self.domain, m, self.p)

    def noise_modes(self, basis):
        """Number of U-directions that can act on this basis (size of the driven block)."""
        return basis.blocks[0].size


def check_exponent(d, p):
    if d not in P_RANGES:
        raise ConfigurationError(f"dimension {d} is not supported (no basis for d={d})")
    upper = P_RANGES[d]
    if not (2 <= p < upper):
        raise ConfigurationError(
            f"exponent p={p} is outside the admissible range [2,{upper:g}) for d={d}"
        )


def ginzburg_landau(d=1, p=4.0, length=math.pi, flux="identity", noise=None, K=2.0, mu=1.0):
    return ModelSpec(
        "ginzburg_landau",
        Domain(d, (length,), ("dirichlet",)),
        p=p,
        flux=flux,
        noise=noise or NoiseSpec(),
        K=K,
        mu=mu,
    )


def swift_hohenberg(p=3.0, gamma=1.0, length=math.pi, noise=None, K=8.0, mu=0.5):
    return ModelSpec(
        "swift_hohenberg",
        Domain(2, (length,), ("dirichlet",)),
        p=p,
        gamma=gamma,
        noise=noise or NoiseSpec(),
        K=K,
        mu=mu,
    )


def fitzhugh_nagumo(c1=0.08, c2=0.8, c3=0.7, length=1.0, noise=None, K=5.0, mu=0.1):
    return ModelSpec(
        "fitzhugh_nagumo",
        Domain(1, (length,), ("neumann", "neumann")),
        p=4.0,
        c1=c1,
        c2=c2,
        c3=c3,
        noise=noise or NoiseSpec(),
        K=K,
        mu=mu,
    )


def scalar_toy(noise=None, K=2.0, mu=1.0):
    """``du = -u^3 dt + sigma dW`` on a single constant mode."""
    return ModelSpec(
        "scalar_toy",
        Domain(1, (1.0,), ("neumann",)),
        p=4.0,
        noise=noise or NoiseSpec(scale=0.0),
        K=K,
        mu=mu,
    )


SHIPPED_MODELS = {
    "ginzburg_landau": ginzburg_landau,
    "swift_hohenberg": swift_hohenberg,
    "fitzhugh_nagumo": fitzhugh_nagumo,
    "scalar_toy": scalar_toy,
}


def _check_basis(model, basis):
    if model.name == "scalar_toy":
        ok = basis.size == 1
    else:
        ok = basis.domain == model.domain
    if not ok:
        raise ConfigurationError(f"field basis {basis!r} does not belong to model {model.name}")


def linear_multiplier(model, basis):
    """Eigenvalues of the diagonal linear part of A1 (per coefficient)."""
    k2 = basis.k2
    if model.name == "ginzburg_landau":
        slope = 1.0 if model.flux == "identity" else 0.25
        return -slope * k2
    if model.name == "swift_hohenberg":
        return model.gamma**2 - (1.0 - k2) ** 2
    if model.name == "fitzhugh_nagumo":
        lam = np.zeros(basis.size)
        u = basis.block_slice(0)
        lam[u] = -k2[u]
        return lam
    return np.zeros(basis.size)


def divergence_form(model, basis, c):
    """Dual coefficients of ``div a(grad v)`` via the weak form ``-<a(grad v), grad phi_j>``."""
    d = basis.domain.dimension
    out = 0.0
    for axis in range(d):
        z = basis.synthesize(c, deriv=axis)
        if model.flux == "identity":
            az = z
        else:
            e = np.exp(-z)
            az = (2.0 + e) / (1.0 + e)
        out = out - basis.analyze(az, deriv=axis)
    return out


def a1_coeffs(model, basis, c):
    if model.name == "ginzburg_landau":
        if model.flux == "identity":
            return -basis.k2 * c
        return divergence_form(model, basis, c)
    if model.name == "swift_hohenberg":
        return linear_multiplier(model, basis) * c
    if model.name == "fitzhugh_nagumo":
        su, sw = basis.block_slice(0), basis.block_slice(1)
        u, w = c[..., su], c[..., sw]
        out = np.empty_like(c)
        out[..., su] = -basis.k2[su] * u + u - w
        out[..., sw] = model.c1 * (u - model.c2 * w) + _constant_offset(model, basis)
        return out
    return np.zeros_like(c)


def _constant_offset(model, basis):
    """Dual coefficients of the constant ``c1 * c3`` tested against the second block."""
    block = basis.blocks[1]
    ones = np.ones(basis.grid_shape)
    return model.c1 * model.c3 * block.analyze(ones)


def a2_grid(model, g):
    """Pointwise values of the superlinear reaction on the quadrature grid."""
    s = model.reaction_sign
    if model.name == "fitzhugh_nagumo":
        out = np.zeros_like(g)
        u = g[..., 0, :]
        out[..., 0, :] = s * u**3
        return out
    p = model.p
    if p == 4.0:
        return s * g * g * g
    return s * np.abs(g) ** (p - 2) * g


def a2_from_grid(model, basis, g):
    """Dual coefficients and pointwise values of A2 given the state's grid values."""
    fg = a2_grid(model, g)
    return basis.analyze(fg), fg


def apply_A1(model, v):
    _check_basis(model, v.basis)
    return DualField(v.basis, a1_coeffs(model, v.basis, v.coeffs))


def apply_A2(model, v):
    _check_basis(model, v.basis)
    coeffs, fg = a2_from_grid(model, v.basis, v.basis.synthesize(v.coeffs))
    return DualField(v.basis, coeffs, fg)


def apply_A(model, v):
    a1 = apply_A1(model, v)
    a2 = apply_A2(model, v)
    return DualField(v.basis, a1.coeffs + a2.coeffs)


# diffusion ------------------------------------------------------------------


def noise_columns(model, basis, c, k):
    """All columns ``B v chi_j`` for ``j = 1..k``, shape ``(..., k, size)``."""
    size = model.noise_modes(basis)
    if k > size:
        raise ConfigurationError(f"noise index {k} exceeds the {size} available modes")
    sigma = model.noise.amplitudes(k)
    c = np.asarray(c, dtype=float)
    cols = np.zeros(c.shape[:-1] + (k, basis.size))
    j = np.arange(k)
    kind = model.noise.kind
    if kind == "additive":
        cols[..., j, j] = sigma
    elif kind == "diagonal_multiplicative":
        cols[..., j, j] = sigma * c[..., :k]
    else:
        block = basis.blocks[0]
        vg = block.synth(c[..., : block.size])
        phis = block.synth(np.eye(block.size)[:k])
        prod = vg[..., None, :] * phis if basis.domain.dimension == 1 else vg[..., None, :, :] * phis
        cols[..., : block.size] = sigma[:, None] * block.analyze(prod)
    return cols


def noise_term(model, basis, c, dw):
    """``sum_j Pi_m (B v chi_j) dw_j`` for increments ``dw`` of shape ``(..., k)``."""
    dw = np.asarray(dw, dtype=float)
    k = dw.shape[-1]
    size = model.noise_modes(basis)
    if k > size:
        raise ConfigurationError(f"noise index {k} exceeds the {size} available modes")
    sigma = model.noise.amplitudes(k)
    shape = np.broadcast_shapes(np.shape(c)[:-1], dw.shape[:-1]) + (basis.size,)
    out = np.zeros(shape)
    kind = model.noise.kind
    if kind == "additive":
        out[..., :k] = sigma * dw
    elif kind == "diagonal_multiplicative":
        out[..., :k] = sigma * dw * c[..., :k]
    else:
        block = basis.blocks[0]
        weights = np.zeros(shape[:-1] + (block.size,))
        weights[..., :k] = sigma * dw
        g = block.synth(c[..., : block.size]) * block.synth(weights)
        out[..., : block.size] = block.analyze(g)
    return out


def apply_B(model, v, j):
    """The ``j``-th (1-based) column ``B v chi_j`` as a field."""
    _check_basis(model, v.basis)
    size = model.noise_modes(v.basis)
    if not 1 <= j <= size:
        raise ConfigurationError(f"noise index {j} outside 1..{size}")
    cols = noise_columns(model, v.basis, v.coeffs, j)
    return SpectralField(v.basis, cols[..., j - 1, :])


def hilbert_schmidt_sq(model, basis, c, k=None):
    """``||B v||^2_{L2(U,H)}`` with the noise truncated to ``k`` directions."""
    k = model.noise_modes(basis) if k is None else k
    cols = noise_columns(model, basis, c, k)
    return np.sum(cols * cols, axis=(-2, -1))


# model norms ----------------------------------------------------------------


def h_norm(model, basis, c):
    return np.sqrt(np.sum(c * c, axis=-1))


def v1_norm(model, basis, c):
    if model.name == "fitzhugh_nagumo":
        su, sw = basis.block_slice(0), basis.block_slice(1)
        wts = np.ones(basis.size)
        wts[su] = 1.0 + basis.k2[su]
        return np.sqrt(np.sum(wts * c * c, axis=-1))
    return np.sqrt(np.sum(sobolev_weights(basis, model.sobolev_order) * c * c, axis=-1))


def v2_norm_from_grid(model, basis, c, g):
    if model.name == "fitzhugh_nagumo":
        u = g[..., 0, :]
        w = c[..., basis.block_slice(1)]
        return basis.integrate(u**4) ** 0.25 + np.sqrt(np.sum(w * w, axis=-1))
    return basis.integrate(np.abs(g) ** model.p) ** (1.0 / model.p)


def v2_norm(model, basis, c):
    return v2_norm_from_grid(model, basis, c, basis.synthesize(c))


def v1_dual_norm(model, basis, f):
    """``||f||_{V1*}`` from dual coefficients via the inverse Sobolev multiplier."""
    if model.name == "fitzhugh_nagumo":
        wts = np.ones(basis.size)
        su = basis.block_slice(0)
        wts[su] = 1.0 / (1.0 + basis.k2[su])
        return np.sqrt(np.sum(wts * f * f, axis=-1))
    wts = sobolev_weights(basis, -model.sobolev_order)
    return np.sqrt(np.sum(wts * f * f, axis=-1))


def v2_dual_norm(model, basis, f):
    """``||f||_{V2*}`` as the L^{p*} quadrature norm of the pointwise values.

    ``f`` is a :class:`DualField`; without pointwise values the grid
    representation of the projected coefficients is used instead.
    """
    g = f.grid if f.grid is not None else basis.synthesize(f.coeffs)
    if model.name == "fitzhugh_nagumo":
        u = g[..., 0, :]
        w = f.coeffs[..., basis.block_slice(1)]
        return basis.integrate(np.abs(u) ** (4.0 / 3.0)) ** 0.75 + np.sqrt(np.sum(w * w, axis=-1))
    q = model.p / (model.p - 1.0)
    return basis.integrate(np.abs(g) ** q) ** (1.0 / q)


def model_norm(model, v, space="H"):
    """Norm of a model state in H, V1, V2 or V = V1 + V2."""
    b, c = v.basis, v.coeffs
    if space == "H":
        return h_norm(model, b, c)
    if space == "V1":
        return v1_norm(model, b, c)
    if space == "V2":
        return v2_norm(model, b, c)
    if space == "V":
        return v1_norm(model, b, c) + v2_norm(model, b, c)
    raise ConfigurationError(f"unknown space {space!r}")


# assumption checkers --------------------------------------------------------


@dataclass
class CheckReport:
    """Outcome of one numerical falsification attempt.

    ``violations`` maps each checked inequality to the maximum of
    ``left side - right side`` over the samples (``<= 0`` means not refuted).
    """

    check: str
    model: str
    samples: int
    violations: dict
    worst: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    tolerance: float = 0.0

    @property
    def max_violation(self):
        return max(self.violations.values()) if self.violations else 0.0

    @property
    def passed(self):
        return self.max_violation <= self.tolerance

    def to_text(self, prefix=None):
        prefix = prefix or self.check
        lines = [f"{prefix}.model = {self.model}", f"{prefix}.samples = {self.samples}"]
        for key, val in self.violations.items():
            lines.append(f"{prefix}.{key}.max_violation = {val:.17g}")
        for key, val in self.extras.items():
            if isinstance(val, float):
                val = f"{val:.17g}"
            lines.append(f"{prefix}.{key} = {val}")
        lines.append(f"{prefix}.passed = {str(self.passed).lower()}")
        return "\n".join(lines)


def random_coeffs(basis, count, radius, rng):
    return rng.uniform(-radius, radius, size=(count, basis.size))


def _pair(f, c):
    return np.sum(f * c, axis=-1)


def _record(viol, key, values, samples):
    i = int(np.argmax(values))
    viol[key] = float(values[i])
    return {key: samples[i]}


def check_projection(model, sample_count=500, radius=5.0, m=8, seed=0, tol=1e-12):
    """Idempotence, self-adjointness and H-contraction of ``Pi_m`` seen from ``V_{2m}``."""
    fine = model.basis(2 * m) if model.name != "scalar_toy" else model.basis(0)
    mm = m if model.name != "scalar_toy" else 0
    rng = np.random.default_rng(seed)
    f = random_coeffs(fine, sample_count, radius, rng)
    g = random_coeffs(fine, sample_count, radius, rng)

    def P(c):
        return embed(project(SpectralField(fine, c), mm), fine).coeffs

    pf, pg = P(f), P(g)
    scale = np.sum(f * f, axis=-1) + np.sum(g * g, axis=-1)
    viol = {
        "idempotence": float(np.max(np.abs(P(pf) - pf))),
        "self_adjointness": float(np.max(np.abs(_pair(pf, g) - _pair(f, pg)) / scale)),
        "contraction": float(np.max(np.linalg.norm(pf, axis=-1) - np.linalg.norm(f, axis=-1))),
    }
    return CheckReport("projection", model.name, sample_count, viol,
                       extras={"m": mm, "fine_m": fine.m}, tolerance=tol)


def check_monotonicity(model, sample_count=500, radius=5.0, m=8, seed=0, pairs=None):
    """``2<Av - Aw, v - w> + ||Bv - Bw||^2 - K|v - w|^2`` maximised over random pairs."""
    basis = model.basis(m)
    if pairs is None:
        rng = np.random.default_rng(seed)
        v = random_coeffs(basis, sample_count, radius, rng)
        w = random_coeffs(basis, sample_count, radius, rng)
    else:
        v, w = (np.atleast_2d(np.asarray(x.coeffs if hasattr(x, "coeffs") else x)) for x in pairs)
    av = apply_A(model, SpectralField(basis, v)).coeffs
    aw = apply_A(model, SpectralField(basis, w)).coeffs
    d = v - w
    cv = noise_columns(model, basis, v, model.noise_modes(basis))
    cw = noise_columns(model, basis, w, model.noise_modes(basis))
    hs = np.sum((cv - cw) ** 2, axis=(-2, -1))
    lhs = 2 * _pair(av - aw, d) + hs - model.K * np.sum(d * d, axis=-1)
    viol = {}
    i = int(np.argmax(lhs))
    viol["monotonicity"] = float(lhs[i])
    return CheckReport(
        "monotonicity", model.name, len(v), viol,
        worst={"v": v[i], "w": w[i]},
        extras={"K": float(model.K), "radius": float(radius), "m": m},
        tolerance=_roundoff(lhs, av, v),
    )


def _roundoff(lhs, f, c):
    """Slack for floating-point cancellation in pairings of large numbers."""
    scale = np.max(np.abs(f) * np.abs(c).max(axis=-1, keepdims=True)) * f.shape[-1]
    return float(1e-12 * max(scale, 1.0))


def check_coercivity(model, sample_count=500, radius=5.0, m=8, seed=0):
    """Both coercivity lines: the A1/B1 line with ``-mu ||v||_V1^2`` and the weak A2 line."""
    basis = model.basis(m)
    rng = np.random.default_rng(seed)
    v = random_coeffs(basis, sample_count, radius, rng)
    hsq = np.sum(v * v, axis=-1)
    a1 = a1_coeffs(model, basis, v)
    a2, _ = a2_from_grid(model, basis, basis.synthesize(v))
    b1 = hilbert_schmidt_sq(model, basis, v)
    line1 = 2 * _pair(a1, v) + b1 + model.mu * v1_norm(model, basis, v) ** 2 - model.K * (1 + hsq)
    line2 = 2 * _pair(a2, v) - model.K * (1 + hsq)
    viol, worst = {}, {}
    worst.update(_record(viol, "coercivity_A1", line1, v))
    worst.update(_record(viol, "coercivity_A2", line2, v))
    return CheckReport(
        "coercivity", model.name, sample_count, viol, worst,
        extras={"K": float(model.K), "mu": float(model.mu), "radius": float(radius), "m": m},
        tolerance=_roundoff(line1, np.abs(a1) + np.abs(a2), v),
    )


def check_growth(model, sample_count=500, radius=5.0, m=8, seed=0):
    """Growth of A1 in V1*, of A2 in V2* (power p*) and of B in L2(U,H)."""
    basis = model.basis(m)
    rng = np.random.default_rng(seed)
    v = random_coeffs(basis, sample_count, radius, rng)
    g = basis.synthesize(v)
    p = model.p
    q = p / (p - 1)
    a1 = a1_coeffs(model, basis, v)
    a2c, a2g = a2_from_grid(model, basis, g)
    a2 = DualField(basis, a2c, a2g)
    hsq = np.sum(v * v, axis=-1)
    line1 = v1_dual_norm(model, basis, a1) ** 2 - model.K * (1 + v1_norm(model, basis, v) ** 2)
    v2 = v2_norm_from_grid(model, basis, v, g)
    line2 = v2_dual_norm(model, basis, a2) ** q - model.K * (1 + v2**p)
    line3 = hilbert_schmidt_sq(model, basis, v) - model.K * (1 + hsq)
    viol, worst = {}, {}
    worst.update(_record(viol, "growth_A1", line1, v))
    worst.update(_record(viol, "growth_A2", line2, v))
    worst.update(_record(viol, "growth_B", line3, v))
    scale = max(1.0, float(np.max(v2**p)))
    return CheckReport(
        "growth", model.name, sample_count, viol, worst,
        extras={"K": float(model.K), "radius": float(radius), "m": m},
        tolerance=1e-12 * scale,
    )


def check_hemicontinuity(model, v, w, z, epsilons=None, tol=1e-6):
    """Tabulate ``|<A(v + eps w), z> - <A v, z>|`` for a decreasing sequence of ``eps``.

    Passes when the differences decay monotonically and the last one is at
    most twice its first-order prediction ``slope * eps_min`` (plus ``tol``
    absolute slack), where ``slope = diff(eps_0) / eps_0``.
    """
    if epsilons is None:
        epsilons = 10.0 ** -np.arange(1, 7)
    eps = np.asarray(epsilons, dtype=float)
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ConfigurationError("epsilons must be a decreasing positive sequence")
    base = float(_pair(apply_A(model, v).coeffs, z.coeffs))
    diffs = np.array(
        [abs(float(_pair(apply_A(model, v + w * e).coeffs, z.coeffs)) - base) for e in eps]
    )
    slope = diffs[0] / eps[0]
    monotone = bool(np.all(np.diff(diffs) <= 1e-15 * max(1.0, abs(base))))
    excess = diffs[-1] - (2.0 * slope * eps[-1] + tol)
    ok = monotone and excess <= 0
    return CheckReport(
        "hemicontinuity", model.name, len(eps),
        {"hemicontinuity": 0.0 if ok else max(float(excess), 1e-300)},
        extras={"epsilons": eps.tolist(), "differences": diffs.tolist(), "monotone": monotone,
                "slope": float(slope)},
    )


def interpolation_exponent(d, p):
    """Gagliardo-Nirenberg exponent ``d (1/2 - 1/p)``; rejects ``lambda >= 2/p``."""
    lam = d * (0.5 - 1.0 / p)
    if not lam < 2.0 / p:
        upper = P_RANGES.get(d, 2.0 * (d + 2) / d)
        raise ConfigurationError(
            f"interpolation exponent {lam:g} >= 2/p = {2 / p:g}: p={p} is outside "
            f"the admissible range [2,{upper:g}) for d={d}"
        )
    return lam


def interpolation_ratio(model, basis, c, lam):
    v1 = v1_norm(model, basis, c)
    h = h_norm(model, basis, c)
    v2 = v2_norm(model, basis, c)
    return v2 / (v1**lam * h ** (1 - lam))


def _neg_log_ratio(model, basis, lam):
    """Objective ``-log ratio`` and its gradient for scalar models."""
    p = model.p
    wts = sobolev_weights(basis, model.sobolev_order)

    def fun(c):
        g = basis.synthesize(c)
        ip = basis.integrate(np.abs(g) ** p)
        v1sq = np.sum(wts * c * c)
        hsq = np.sum(c * c)
        val = np.log(ip) / p - 0.5 * lam * np.log(v1sq) - 0.5 * (1 - lam) * np.log(hsq)
        grad = (
            basis.analyze(np.abs(g) ** (p - 2) * g) / ip
            - lam * wts * c / v1sq
            - (1 - lam) * c / hsq
        )
        return -val, -grad

    return fun


def estimate_lambda_constant(model, m, lam, sample_count=200, seed=0, refine=8):
    """Largest observed interpolation ratio over random trigonometric polynomials on V_m.

    Random fields with coefficient profiles ``j**(-s)`` of random slope are
    screened, then the best candidates are locally maximised.
    """
    from scipy.optimize import minimize

    basis = model.basis(m)
    rng = np.random.default_rng(seed)
    slopes = rng.uniform(0.0, 3.0, size=(sample_count, 1))
    j = np.arange(1, basis.size + 1, dtype=float)
    c = rng.uniform(-1, 1, size=(sample_count, basis.size)) * j ** (-slopes)
    ratios = interpolation_ratio(model, basis, c, lam)
    best = float(ratios.max())
    if basis.n_unknowns == 1:
        fun, jac = _neg_log_ratio(model, basis, lam), True
    else:
        fun = lambda x: -float(np.log(interpolation_ratio(model, basis, x, lam)))
        jac = None
    for i in np.argsort(ratios)[::-1][:refine]:
        res = minimize(fun, c[i], jac=jac, method="L-BFGS-B", options={"maxiter": 500})
        best = max(best, float(np.exp(-res.fun)))
    return best


def check_interpolation(model, sample_count=200, m_list=(4, 8, 16, 32), seed=0, tolerance=0.05):
    """Estimate the interpolation constant across cutoffs and check it stays bounded."""
    lam = interpolation_exponent(model.domain.dimension, model.p)
    if model.name == "scalar_toy":
        m_list = (0,)
    estimates = [estimate_lambda_constant(model, m, lam, sample_count, seed) for m in m_list]
    growth = estimates[-1] / estimates[0] - 1.0
    spread = max(estimates) / min(estimates) - 1.0
    return CheckReport(
        "interpolation", model.name, sample_count,
        {"interpolation": growth - tolerance},
        extras={
            "lambda": lam,
            "lambda_bound": 2.0 / model.p,
            "Lambda_hat": max(estimates),
            "Lambda_by_m": dict(zip(m_list, estimates)),
            "relative_growth": growth,
            "relative_spread": spread,
        },
    )


def assumption_report(model, sample_count=500, radius=5.0, m=8, seed=0):
    """Run every checker and return ``(reports, text)`` with a flat key-value summary."""
    reports = [
        check_monotonicity(model, sample_count, radius, m, seed),
        check_coercivity(model, sample_count, radius, m, seed),
        check_growth(model, sample_count, radius, m, seed),
        check_projection(model, sample_count, radius, m, seed),
    ]
    head = [
        f"name = {model.name}",
        f"K = {model.K:.17g}",
        f"mu = {model.mu:.17g}",
        f"p = {model.p:.17g}",
    ]
    if model.name != "scalar_toy":
        interp = check_interpolation(model, seed=seed)
        reports.append(interp)
        head += [
            f"lambda = {interp.extras['lambda']:.17g}",
            f"Lambda_hat = {interp.extras['Lambda_hat']:.17g}",
        ]
    body = []
    for r in reports:
        for key, val in r.violations.items():
            body.append(f"{key}.max_violation = {val:.17g}")
    return reports, "\n".join(head + body) + "\n"


def broken(model):
    """Copy of ``model`` whose reaction term has the anti-dissipative sign."""
    return replace(model, reaction_sign=-model.reaction_sign)
