"""The tamed reaction ``A2_l v = A2 v / (1 + n^{-1/2} |Pi_m A2 v|)`` and checks of its properties."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError
from .operators import (
    CheckReport,
    a2_from_grid,
    apply_A2,
    random_coeffs,
    v2_dual_norm,
    v2_norm_from_grid,
)
from .spectral import DualField


@dataclass(frozen=True)
class TamingContext:
    """Time-step count ``n`` and Galerkin cutoff ``m`` of one discretization level."""

    n: int
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ConfigurationError(f"invalid taming context n={self.n}, m={self.m}")


def factor_from_norm(a2_norm, n):
    """``1 / (1 + a2_norm / sqrt(n))``, the taming factor given ``|Pi_m A2 v|``.

    For huge ``a2_norm`` the rounded factor is nudged down by an ulp where
    needed so that ``factor * a2_norm <= sqrt(n)`` also holds in floating point.
    """
    root = math.sqrt(n)
    x = np.asarray(a2_norm, dtype=float)
    t = root / (root + x)
    for _ in range(4):
        over = t * x > root
        if not np.any(over):
            break
        t = np.where(over, np.nextafter(t, 0.0), t)
    return t if t.ndim else float(t)


def _projected(dual, ctx):
    basis = dual.basis
    if ctx.m >= basis.m:
        return dual.coeffs
    return dual.coeffs[..., basis.prefix_index(basis.restrict(ctx.m))]


def _factor(model, dual, ctx):
    pc = _projected(dual, ctx)
    if not np.all(np.isfinite(pc)):
        bad = np.argwhere(~np.isfinite(pc))[0]
        raise NumericError(f"non-finite A2 v for {model.name} (first bad entry at {tuple(bad)})")
    return factor_from_norm(np.sqrt(np.sum(pc * pc, axis=-1)), ctx.n)


def taming_factor(model, v, ctx):
    """``T_l(v)`` in ``(0, 1]``; an array over the batch axes of ``v``."""
    return _factor(model, apply_A2(model, v), ctx)


def apply_tamed_A2(model, v, ctx):
    dual = apply_A2(model, v)
    return dual * _factor(model, dual, ctx)


def _samples(model, ctx, sample_count, radius, seed):
    basis = model.basis(ctx.m)
    rng = np.random.default_rng(seed)
    return basis, random_coeffs(basis, sample_count, radius, rng)


def verify_tame_bound(model, ctx, sample_count=1000, radius=5.0, seed=0, scale=1.0):
    """Check ``|Pi_m A2_l v| <= sqrt(n)`` on random fields (no tolerance)."""
    basis, c = _samples(model, ctx, sample_count, radius, seed)
    c = c * scale
    a2c, _ = a2_from_grid(model, basis, basis.synthesize(c))
    x = np.sqrt(np.sum(a2c * a2c, axis=-1))
    tamed = factor_from_norm(x, ctx.n) * x
    bound = math.sqrt(ctx.n)
    viol = {"tame_bound": float(np.max(tamed - bound))}
    return CheckReport(
        "tame_bound", model.name, sample_count, viol,
        extras={"n": ctx.n, "m": ctx.m, "max_ratio": float(np.max(tamed) / bound)},
    )


def verify_growth_preserved(model, ctx, sample_count=500, radius=5.0, seed=0):
    """``||A2_l v||_{V2*} <= ||A2 v||_{V2*}`` and ``||A2_l v||^{p*} <= K (1 + ||v||_{V2}^p)``."""
    basis, c = _samples(model, ctx, sample_count, radius, seed)
    g = basis.synthesize(c)
    a2c, a2g = a2_from_grid(model, basis, g)
    dual = DualField(basis, a2c, a2g)
    t = _factor(model, dual, ctx)
    q = model.p / (model.p - 1.0)
    raw = v2_dual_norm(model, basis, dual)
    tamed = v2_dual_norm(model, basis, dual * t)
    v2 = v2_norm_from_grid(model, basis, c, g)
    viol = {
        "tamed_le_untamed": float(np.max(tamed - raw)),
        "tamed_growth": float(np.max(tamed**q - model.K * (1 + v2**model.p))),
    }
    return CheckReport(
        "growth_preserved", model.name, sample_count, viol,
        extras={"n": ctx.n, "m": ctx.m, "K": float(model.K)},
        tolerance=1e-12 * max(1.0, float(np.max(v2**model.p))),
    )


def verify_weak_coercivity(model, ctx, sample_count=500, radius=5.0, seed=0, fields=None):
    """``2 <A2_l v, v> <= K (1 + |v|^2)`` on random fields (or the given coefficient rows)."""
    if fields is None:
        basis, c = _samples(model, ctx, sample_count, radius, seed)
    else:
        basis = model.basis(ctx.m)
        c = np.atleast_2d(np.asarray(fields, dtype=float))
    a2c, a2g = a2_from_grid(model, basis, basis.synthesize(c))
    t = _factor(model, DualField(basis, a2c, a2g), ctx)
    lhs = 2 * t * np.sum(a2c * c, axis=-1)
    excess = lhs - model.K * (1 + np.sum(c * c, axis=-1))
    i = int(np.argmax(excess))
    return CheckReport(
        "weak_coercivity", model.name, len(c), {"weak_coercivity": float(excess[i])},
        worst={"v": c[i]},
        extras={"n": ctx.n, "m": ctx.m, "K": float(model.K), "excess": excess.tolist()},
    )
