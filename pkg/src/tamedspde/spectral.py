"""Trigonometric Galerkin spaces on boxes in one and two dimensions.

A field is a coefficient vector over an L2-orthonormal tensor-product basis:
sines for homogeneous Dirichlet conditions, cosines (including the constant
mode) for homogeneous Neumann conditions.  Pointwise nonlinearities are
evaluated on a uniform midpoint grid whose size is chosen so that products
of degree ``p`` are integrated exactly against the retained modes.

Modes of a two-dimensional basis are stored shell by shell (ordered by
``max(n1, n2)``), so the cutoff-``m`` space is always a prefix of the
cutoff-``m + 1`` space.  Projection onto a coarser space is therefore plain
truncation of the coefficient vector.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConfigurationError

BOUNDARY_KINDS = ("dirichlet", "neumann")
SPACES = ("H", "V1", "V2", "V")


@dataclass(frozen=True)
class Domain:
    """A box ``(0, L1) x ... x (0, Ld)`` with one boundary condition per unknown."""

    dimension: int = 1
    lengths: tuple = (math.pi,)
    bc: tuple = ("dirichlet",)

    def __post_init__(self):
        lengths = self.lengths
        if np.isscalar(lengths):
            lengths = (lengths,)
        lengths = tuple(float(x) for x in lengths)
        bc = (self.bc,) if isinstance(self.bc, str) else tuple(self.bc)
        if self.dimension not in (1, 2):
            raise ConfigurationError(
                f"dimension must be 1 or 2, got {self.dimension}"
            )
        if len(lengths) == 1 and self.dimension == 2:
            lengths = lengths * 2
        if len(lengths) != self.dimension:
            raise ConfigurationError(
                f"expected {self.dimension} side lengths, got {len(lengths)}"
            )
        if any(not (x > 0 and math.isfinite(x)) for x in lengths):
            raise ConfigurationError(f"side lengths must be positive, got {lengths}")
        if not bc:
            raise ConfigurationError("at least one boundary condition is required")
        for kind in bc:
            if kind not in BOUNDARY_KINDS:
                raise ConfigurationError(
                    f"unknown boundary condition {kind!r}; expected one of {BOUNDARY_KINDS}"
                )
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "bc", bc)

    @property
    def n_unknowns(self):
        return len(self.bc)

    @property
    def volume(self):
        return float(np.prod(self.lengths))


def dealiased_grid_size(m, p):
    """Nodes per axis that integrate degree-``p`` products of modes up to ``m`` exactly."""
    return max(2 * m, math.ceil((p / 2 + 1) * m), 2)


def _axis_modes(kind, m):
    return np.arange(1, m + 1) if kind == "dirichlet" else np.arange(0, m + 1)


def _axis_table(kind, m, length, nq):
    """Values and derivatives of the 1D orthonormal functions at the midpoints."""
    x = (np.arange(nq) + 0.5) * (length / nq)
    n = _axis_modes(kind, m)
    k = n * (math.pi / length)
    arg = np.outer(x, k)
    amp = np.full(n.shape, math.sqrt(2.0 / length))
    if kind == "dirichlet":
        vals = amp * np.sin(arg)
        ders = amp * k * np.cos(arg)
    else:
        amp[n == 0] = math.sqrt(1.0 / length)
        vals = amp * np.cos(arg)
        ders = -amp * k * np.sin(arg)
    return x, n, k, vals, ders


def _shell_order(n_axis, dimension):
    """Mode multi-indices ordered so every lower cutoff is a prefix."""
    if dimension == 1:
        return np.arange(len(n_axis))[:, None]
    idx = [(i, j) for i in range(len(n_axis)) for j in range(len(n_axis))]
    idx.sort(key=lambda t: (max(n_axis[t[0]], n_axis[t[1]]), t[0], t[1]))
    return np.array(idx, dtype=int)


class _Block:
    """Scalar basis of one boundary kind on the shared quadrature grid."""

    def __init__(self, kind, m, domain, nq):
        self.kind = kind
        self.dimension = domain.dimension
        tables = [_axis_table(kind, m, L, nq) for L in domain.lengths]
        self.nodes = tuple(t[0] for t in tables)
        self.axis_modes = tables[0][1]
        self.vals = tuple(t[3] for t in tables)
        self.ders = tuple(t[4] for t in tables)
        self.index = _shell_order(self.axis_modes, self.dimension)
        self.modes = np.stack(
            [self.axis_modes[self.index[:, a]] for a in range(self.dimension)], axis=1
        )
        ks = [t[2] for t in tables]
        self.k2 = sum(ks[a][self.index[:, a]] ** 2 for a in range(self.dimension))
        self.size = len(self.index)
        self.cell = float(np.prod([L / nq for L in domain.lengths]))
        if self.dimension == 1:
            self._v = self.vals[0][:, self.index[:, 0]]
            self._d = self.ders[0][:, self.index[:, 0]]
        for arr in (self.modes, self.k2):
            arr.setflags(write=False)

    def _dense(self, c):
        na = len(self.axis_modes)
        dense = np.zeros(c.shape[:-1] + (na, na))
        dense[..., self.index[:, 0], self.index[:, 1]] = c
        return dense

    def synth(self, c, deriv=None):
        if self.dimension == 1:
            mat = self._v if deriv is None else self._d
            return c @ mat.T
        mx = self.ders[0] if deriv == 0 else self.vals[0]
        my = self.ders[1] if deriv == 1 else self.vals[1]
        return mx @ self._dense(c) @ my.T

    def analyze(self, g, deriv=None):
        if self.dimension == 1:
            mat = self._v if deriv is None else self._d
            return self.cell * (g @ mat)
        mx = self.ders[0] if deriv == 0 else self.vals[0]
        my = self.ders[1] if deriv == 1 else self.vals[1]
        dense = self.cell * (mx.T @ g @ my)
        return dense[..., self.index[:, 0], self.index[:, 1]]


class Basis:
    """Orthonormal trigonometric basis for every unknown of a domain.

    Coefficient vectors concatenate one block per unknown.  Grid arrays have
    shape ``(..., nq)`` or ``(..., nq, nq)`` for a single unknown and an extra
    unknown axis before the spatial axes for systems.
    """

    def __init__(self, domain, m, p, nq=None):
        self.domain = domain
        self.m = int(m)
        self.p = float(p)
        self.nq = int(nq if nq is not None else dealiased_grid_size(self.m, self.p))
        cache = {}
        blocks = []
        for kind in domain.bc:
            if kind not in cache:
                cache[kind] = _Block(kind, self.m, domain, self.nq)
            blocks.append(cache[kind])
        self.blocks = tuple(blocks)
        sizes = [b.size for b in self.blocks]
        self.offsets = tuple(int(x) for x in np.concatenate([[0], np.cumsum(sizes)]))
        self.size = self.offsets[-1]
        self.k2 = np.concatenate([b.k2 for b in self.blocks])
        self.k2.setflags(write=False)
        self.nodes = self.blocks[0].nodes
        self.cell = self.blocks[0].cell

    def __repr__(self):
        return (
            f"Basis(d={self.domain.dimension}, bc={self.domain.bc}, m={self.m}, "
            f"size={self.size}, nq={self.nq})"
        )

    def compatible(self, other):
        return (
            self is other
            or (self.domain == other.domain and self.m == other.m and self.nq == other.nq)
        )

    @property
    def n_unknowns(self):
        return len(self.blocks)

    @property
    def grid_shape(self):
        return (self.nq,) * self.domain.dimension

    @property
    def modes(self):
        """Mode multi-indices of the first unknown, shape ``(size, d)``."""
        return self.blocks[0].modes

    def block_slice(self, unknown):
        return slice(self.offsets[unknown], self.offsets[unknown + 1])

    def restrict(self, m):
        """Basis with a smaller cutoff; its coefficients are prefixes of each block."""
        if m == self.m:
            return self
        if m > self.m or m < 0:
            raise ConfigurationError(f"cannot restrict cutoff {self.m} to {m}")
        return make_basis(self.domain, m, self.p, _allow_zero=True)

    def prefix_index(self, coarse):
        """Positions of ``coarse``'s coefficients inside this basis' vector."""
        parts = [
            np.arange(self.offsets[u], self.offsets[u] + coarse.blocks[u].size)
            for u in range(self.n_unknowns)
        ]
        return np.concatenate(parts)

    # raw array transforms; public wrappers live at module level

    def synthesize(self, c, deriv=None):
        c = np.asarray(c, dtype=float)
        out = [
            b.synth(c[..., self.block_slice(u)], deriv) for u, b in enumerate(self.blocks)
        ]
        if self.n_unknowns == 1:
            return out[0]
        return np.stack(out, axis=-1 - self.domain.dimension)

    def analyze(self, g, deriv=None):
        g = np.asarray(g, dtype=float)
        if self.n_unknowns == 1:
            return self.blocks[0].analyze(g, deriv)
        axis = -1 - self.domain.dimension
        parts = [
            b.analyze(np.take(g, u, axis=axis), deriv) for u, b in enumerate(self.blocks)
        ]
        return np.concatenate(parts, axis=-1)

    def integrate(self, g):
        """Quadrature of grid values over the domain (last ``d`` axes)."""
        axes = tuple(range(-self.domain.dimension, 0))
        return self.cell * np.sum(g, axis=axes)


@lru_cache(maxsize=128)
def _cached_basis(domain, m, p):
    return Basis(domain, m, p)


def make_basis(domain, m, p=2.0, _allow_zero=False):
    """Orthonormal basis with cutoff ``m`` per axis and a grid dealiased for exponent ``p``.

    Dirichlet unknowns get modes ``1..m`` per axis, Neumann unknowns ``0..m``.
    Bases are cached and treated as immutable.
    """
    if isinstance(m, bool) or int(m) != m:
        raise ConfigurationError(f"cutoff m must be an integer, got {m!r}")
    m = int(m)
    lowest = 0 if _allow_zero else 1
    if m < lowest:
        raise ConfigurationError(f"cutoff m must be >= 1, got {m}")
    if m == 0 and "dirichlet" in domain.bc:
        raise ConfigurationError("a Dirichlet basis needs m >= 1")
    if not (p >= 2 and math.isfinite(p)):
        raise ConfigurationError(f"exponent p must be >= 2, got {p}")
    return _cached_basis(domain, m, float(p))


def constant_basis(length=1.0):
    """One-mode Neumann basis spanned by the constant function (an ODE in disguise)."""
    return make_basis(Domain(1, (length,), ("neumann",)), 0, 2.0, _allow_zero=True)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients of an element of V_m; leading axes are batch axes."""

    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 0 or c.shape[-1] != self.basis.size:
            raise ConfigurationError(
                f"coefficient length {c.shape[-1:]} does not match basis size {self.basis.size}"
            )
        object.__setattr__(self, "coeffs", c)

    def _check(self, other):
        if not self.basis.compatible(other.basis):
            raise ConfigurationError("fields live on different bases")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.basis, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField(self.basis, -self.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.basis, self.coeffs * scalar)

    __rmul__ = __mul__

    def block(self, unknown):
        return self.coeffs[..., self.basis.block_slice(unknown)]


@dataclass(frozen=True, eq=False)
class DualField:
    """A functional tested against the basis: ``coeffs[j] = <f, phi_j>``.

    ``grid`` optionally keeps the pointwise values of ``f`` on the quadrature
    grid, which dual norms use in preference to the projected coefficients.
    """

    basis: Basis
    coeffs: np.ndarray
    grid: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 0 or c.shape[-1] != self.basis.size:
            raise ConfigurationError(
                f"dual coefficient length {c.shape[-1:]} does not match basis size {self.basis.size}"
            )
        object.__setattr__(self, "coeffs", c)

    def __mul__(self, scalar):
        s = np.asarray(scalar, dtype=float)
        coeffs = self.coeffs * s[..., None]
        grid = None
        if self.grid is not None:
            grid = self.grid * s.reshape(s.shape + (1,) * (self.grid.ndim - s.ndim))
        return DualField(self.basis, coeffs, grid)

    __rmul__ = __mul__

    def __sub__(self, other):
        if not self.basis.compatible(other.basis):
            raise ConfigurationError("dual fields live on different bases")
        grid = None
        if self.grid is not None and other.grid is not None:
            grid = self.grid - other.grid
        return DualField(self.basis, self.coeffs - other.coeffs, grid)


def zeros(basis, batch=()):
    return SpectralField(basis, np.zeros(tuple(batch) + (basis.size,)))


def unit(basis, j):
    """The basis function with (0-based) position ``j`` as a field."""
    c = np.zeros(basis.size)
    c[j] = 1.0
    return SpectralField(basis, c)


def to_physical(f):
    """Nodal values of a field on its basis' quadrature grid."""
    return f.basis.synthesize(f.coeffs)


def to_spectral(values, basis):
    """Quadrature inner products of grid values with every basis function."""
    values = np.asarray(values, dtype=float)
    expected = basis.grid_shape
    if basis.n_unknowns > 1:
        expected = (basis.n_unknowns,) + expected
    if values.shape[values.ndim - len(expected):] != expected:
        raise ConfigurationError(
            f"grid of shape {values.shape} does not match quadrature grid {expected}"
        )
    return SpectralField(basis, basis.analyze(values))


def project(f, m):
    """Orthogonal projection onto the span of the first ``m``-block of modes.

    Accepts a :class:`SpectralField` or a :class:`DualField`; the result is a
    field on the restricted basis (Riesz identification on V_m).
    """
    basis = f.basis
    if m > basis.m:
        raise ConfigurationError(
            f"cannot project onto cutoff {m}: only {basis.m} available"
        )
    coarse = basis.restrict(m)
    idx = basis.prefix_index(coarse)
    return SpectralField(coarse, np.asarray(f.coeffs)[..., idx])


def embed(f, basis):
    """Inclusion of a field into a finer basis (zero padding)."""
    out = np.zeros(f.coeffs.shape[:-1] + (basis.size,))
    out[..., basis.prefix_index(f.basis)] = f.coeffs
    return SpectralField(basis, out)


def lp_norm(basis, grid, p):
    """L^p norm of grid values of a single unknown."""
    return basis.integrate(np.abs(grid) ** p) ** (1.0 / p)


def sobolev_weights(basis, order=1):
    """Multipliers ``(1 + |k|^2)^order`` defining the H^order norm."""
    return (1.0 + basis.k2) ** order


def norm(f, space="H", p=None, order=1):
    """Norm of a field in H = L2, V1 = H^order, V2 = L^p or V = V1 + V2.

    ``order`` is the Sobolev order of V1 (1, or 2 for fourth-order operators);
    ``p`` defaults to the basis exponent.  Returns an array over batch axes.
    """
    if space not in SPACES:
        raise ConfigurationError(f"unknown space {space!r}; expected one of {SPACES}")
    c = f.coeffs
    p = f.basis.p if p is None else p
    if space == "H":
        return np.sqrt(np.sum(c * c, axis=-1))
    if space == "V1":
        return np.sqrt(np.sum(sobolev_weights(f.basis, order) * c * c, axis=-1))
    g = to_physical(f)
    if f.basis.n_unknowns > 1:
        axes = tuple(range(-1 - f.basis.domain.dimension, 0))
        v2 = (f.basis.cell * np.sum(np.abs(g) ** p, axis=axes)) ** (1.0 / p)
    else:
        v2 = lp_norm(f.basis, g, p)
    if space == "V2":
        return v2
    return norm(f, "V1", p, order) + v2


def galerkin_constant(basis, m=None, p=None, order=1):
    """The projection constant ``c(m) = sum_j ||phi_j||_V^2`` over the m-block.

    Returns ``(exact, paper_form)``.  ``exact`` evaluates the definition with
    ``||.||_V = ||.||_V1 + ||.||_L^p`` by quadrature.  ``paper_form`` is the
    closed form ``m^d (1 + d + c_p)`` with ``c_p = ||phi_1||_{L^p}^{2/p}``
    built from the lowest mode, which undercounts the gradient contribution.
    """
    m = basis.m if m is None else m
    p = basis.p if p is None else p
    b = make_basis(basis.domain, m, p, _allow_zero=True)
    block = b.blocks[0]
    eye = np.eye(block.size)
    g = block.synth(eye)
    axes = tuple(range(1, 1 + b.domain.dimension))
    lp = (block.cell * np.sum(np.abs(g) ** p, axis=axes)) ** (1.0 / p)
    v1 = np.sqrt((1.0 + block.k2) ** order)
    exact = float(np.sum((v1 + lp) ** 2))
    d = b.domain.dimension
    c_p = float(lp[0] ** (2.0 / p))
    paper_form = float(m**d * (1 + d + c_p))
    return exact, paper_form
