"""Uniform grids, closed-form Laplacian eigensystems and the norms used by the decay estimates.

Grids
-----
* interval, Dirichlet: ``M`` interior nodes ``x_j = j L/(M+1)``, ``j = 1..M``.
  Quadrature is the rectangle rule with weight ``dx`` (the omitted boundary
  values are zero, so this coincides with the trapezoid rule).
* interval, Neumann: ``M`` nodes ``x_j = j L/(M-1)``, ``j = 0..M-1``,
  trapezoid rule.
* rectangle, Dirichlet: tensor product of two interior Dirichlet grids.

With these rules the sampled eigenfunctions are exactly orthonormal, so the
grid <-> modal transforms are unitary and Parseval holds to round-off.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
INTERVAL = "interval"
RECTANGLE = "rectangle"

MIN_RESOLUTION = 16


@dataclass(frozen=True)
class Domain:
    """Interval ``(0, L)`` or rectangle ``(0, Lx) x (0, Ly)`` with a uniform grid.

    ``M`` counts grid points per axis: interior nodes for Dirichlet, nodes
    including both endpoints for Neumann.
    """

    kind: str
    lengths: tuple[float, ...]
    M: int
    bc: str = DIRICHLET

    def __post_init__(self):
        if self.kind not in (INTERVAL, RECTANGLE):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.bc not in (DIRICHLET, NEUMANN):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        expected = 1 if self.kind == INTERVAL else 2
        if len(self.lengths) != expected:
            raise ValueError(f"{self.kind} needs {expected} length(s), got {len(self.lengths)}")
        if any(not np.isfinite(L) or L <= 0 for L in self.lengths):
            raise ValueError(f"lengths must be positive, got {self.lengths}")
        if int(self.M) != self.M or self.M < MIN_RESOLUTION:
            raise ValueError(f"resolution M must be an integer >= {MIN_RESOLUTION}, got {self.M}")
        if self.kind == RECTANGLE and self.bc == NEUMANN:
            raise ValueError("Neumann boundary conditions are only supported on intervals")

    @property
    def ndim(self) -> int:
        return len(self.lengths)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.ndim

    @property
    def spacing(self) -> tuple[float, ...]:
        if self.bc == DIRICHLET:
            return tuple(L / (self.M + 1) for L in self.lengths)
        return tuple(L / (self.M - 1) for L in self.lengths)

    @property
    def n_intervals(self) -> int:
        """Number of grid cells between ``0`` and ``L`` along one axis."""
        return self.M + 1 if self.bc == DIRICHLET else self.M - 1

    @property
    def max_index(self) -> int:
        """Largest mode index per axis exposed through :func:`eigen_system`."""
        # The Neumann Nyquist cosine is not orthonormal under the trapezoid
        # rule with the continuous normalisation, so it is kept internal.
        return self.M if self.bc == DIRICHLET else self.M - 1

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        if self.bc == DIRICHLET:
            return tuple(np.arange(1, self.M + 1) * dx for dx in self.spacing)
        return tuple(np.arange(self.M) * dx for dx in self.spacing)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def weights(self) -> np.ndarray:
        ws = []
        for dx in self.spacing:
            w = np.full(self.M, dx)
            if self.bc == NEUMANN:
                w[0] = w[-1] = dx / 2
            ws.append(w)
        out = ws[0]
        for w in ws[1:]:
            out = np.multiply.outer(out, w)
        out.setflags(write=False)
        return out

    @cached_property
    def eigenvalue_grid(self) -> np.ndarray:
        """Laplacian eigenvalue for every entry of the full spectral layout."""
        per_axis = []
        for L in self.lengths:
            if self.bc == DIRICHLET:
                k = np.arange(1, self.M + 1)
            else:
                k = np.arange(self.M)
            per_axis.append((k * np.pi / L) ** 2)
        out = per_axis[0]
        for lam in per_axis[1:]:
            out = np.add.outer(out, lam)
        out.setflags(write=False)
        return out

    # Full (unitary) transforms in the tensor layout. Entry [k1-1, k2-1] of
    # the Dirichlet spectrum is the coefficient of mode (k1, k2).

    def forward(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        axes = tuple(range(values.ndim - self.ndim, values.ndim))
        if self.bc == DIRICHLET:
            scale = 1.0
            for dx, L in zip(self.spacing, self.lengths):
                scale *= dx * np.sqrt(2.0 / L) / 2.0
            return scipy.fft.dstn(values, type=1, axes=axes) * scale
        (L,), (dx,) = self.lengths, self.spacing
        return scipy.fft.dct(values, type=1, axis=-1) * (dx / 2.0) * self._neumann_norm

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs)
        axes = tuple(range(coeffs.ndim - self.ndim, coeffs.ndim))
        if self.bc == DIRICHLET:
            scale = 1.0
            for L in self.lengths:
                scale *= np.sqrt(2.0 / L) / 2.0
            return scipy.fft.dstn(coeffs, type=1, axes=axes) * scale
        scaled = coeffs * self._neumann_norm * self._neumann_end_factor
        return scipy.fft.dct(scaled, type=1, axis=-1) / 2.0

    @cached_property
    def _neumann_norm(self) -> np.ndarray:
        (L,) = self.lengths
        w = np.full(self.M, np.sqrt(2.0 / L))
        w[0] = w[-1] = 1.0 / np.sqrt(L)
        return w

    @cached_property
    def _neumann_end_factor(self) -> np.ndarray:
        f = np.ones(self.M)
        f[0] = f[-1] = 2.0
        return f

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Quadrature inner product ``(f, g) = sum w f conj(g)``."""
        return complex(np.sum(self.weights * f * np.conj(g)))

    def integrate(self, f: np.ndarray) -> complex:
        return np.sum(self.weights * f)


def build_domain(kind: str, lengths: float | Sequence[float], M: int, bc: str = DIRICHLET) -> Domain:
    if np.isscalar(lengths):
        lengths = (float(lengths),)
    return Domain(kind=kind, lengths=tuple(float(L) for L in lengths), M=int(M), bc=bc.lower())


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """First ``count`` Laplacian eigenpairs, sorted by eigenvalue then mode tuple."""

    domain: Domain
    eigenvalues: np.ndarray
    modes: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.modes)

    @cached_property
    def flat_index(self) -> np.ndarray:
        """Position of each mode in the flattened spectral layout of :meth:`Domain.forward`."""
        idx = np.array([[m - 1 for m in mode] for mode in self.modes], dtype=int)
        return np.ravel_multi_index(tuple(idx.T), self.domain.shape)

    def eigenfunction(self, i: int) -> np.ndarray:
        """Grid values of the ``i``-th (0-based) eigenfunction."""
        spec = np.zeros(self.domain.M ** self.domain.ndim)
        spec[self.flat_index[i]] = 1.0
        return self.domain.inverse(spec.reshape(self.domain.shape))

    def gram_matrix(self) -> np.ndarray:
        funcs = np.array([self.eigenfunction(i).ravel() for i in range(len(self))])
        w = self.domain.weights.ravel()
        return (funcs * w) @ funcs.T


def eigen_system(domain: Domain, count: int) -> EigenSystem:
    """Closed-form eigenpairs of ``-Laplacian``; mode descriptors are 1-based.

    For Neumann intervals mode ``k`` is ``cos((k-1) pi x / L)`` with eigenvalue
    ``((k-1) pi / L)**2``.
    """
    kmax = domain.max_index
    total = kmax ** domain.ndim
    if count < 1 or count > total:
        raise ValueError(f"count must be in [1, {total}] for this resolution, got {count}")
    if domain.ndim == 1:
        modes = [(k,) for k in range(1, count + 1)]
        lam = domain.eigenvalue_grid[:count]
        return EigenSystem(domain, np.array(lam, dtype=float), tuple(modes))
    ks = np.arange(1, kmax + 1)
    J, K = np.meshgrid(ks, ks, indexing="ij")
    lam = domain.eigenvalue_grid[:kmax, :kmax]
    order = np.lexsort((K.ravel(), J.ravel(), lam.ravel()))[:count]
    modes = tuple((int(J.ravel()[i]), int(K.ravel()[i])) for i in order)
    eig = np.array(lam.ravel()[order], dtype=float)
    eig.setflags(write=False)
    return EigenSystem(domain, eig, modes)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex grid values on a :class:`Domain`."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.domain.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.domain.shape}")
        object.__setattr__(self, "values", vals)

    def _check(self, other: Field):
        if other.domain != self.domain:
            raise ValueError("fields live on different grids")

    def __add__(self, other: Field) -> Field:
        self._check(other)
        return Field(self.domain, self.values + other.values)

    def __sub__(self, other: Field) -> Field:
        self._check(other)
        return Field(self.domain, self.values - other.values)

    def __mul__(self, scalar) -> Field:
        return Field(self.domain, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> Field:
        return Field(self.domain, -self.values)

    @classmethod
    def zeros(cls, domain: Domain) -> Field:
        return cls(domain, np.zeros(domain.shape, dtype=complex))

    @classmethod
    def from_function(cls, domain: Domain, func) -> Field:
        return cls(domain, func(*domain.mesh))


@dataclass(frozen=True, eq=False)
class ModalCoeffs:
    coeffs: np.ndarray
    eigsys: EigenSystem


def to_modal(f: Field, K: int) -> ModalCoeffs:
    eig = eigen_system(f.domain, K)
    spec = f.domain.forward(f.values).ravel()
    return ModalCoeffs(spec[eig.flat_index].copy(), eig)


def from_modal(c: ModalCoeffs) -> Field:
    domain = c.eigsys.domain
    spec = np.zeros(domain.M ** domain.ndim, dtype=complex)
    spec[c.eigsys.flat_index] = c.coeffs
    return Field(domain, domain.inverse(spec.reshape(domain.shape)))


def laplacian_apply(f: Field) -> Field:
    """Spectral Laplacian; eigenfunctions satisfy ``-Lap w_k = lambda_k w_k``."""
    d = f.domain
    return Field(d, d.inverse(-d.eigenvalue_grid * d.forward(f.values)))


@dataclass(frozen=True)
class Norms:
    l2_sq: float
    h1_seminorm_sq: float
    h1_equiv_sq: float
    lpp: float


def l2_sq(domain: Domain, values: np.ndarray) -> float:
    return float(np.sum(domain.weights * np.abs(values) ** 2))


def h1_seminorm_sq(domain: Domain, values: np.ndarray) -> float:
    spec = domain.forward(values)
    return float(np.sum(domain.eigenvalue_grid * np.abs(spec) ** 2))


def lpp_integral(domain: Domain, values: np.ndarray, p: float) -> float:
    return float(np.sum(domain.weights * np.abs(values) ** (p + 2)))


def compute_norms(f: Field, p: float) -> Norms:
    """Squared L2 norm, squared H1 seminorm, equivalent H1 norm and ``int |f|^(p+2)``.

    The equivalent norm is ``||f||^2 / L^2 + ||grad f||^2`` with ``L`` the
    first side length.
    """
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    d = f.domain
    l2 = l2_sq(d, f.values)
    h1 = h1_seminorm_sq(d, f.values)
    return Norms(l2, h1, l2 / d.lengths[0] ** 2 + h1, lpp_integral(d, f.values, p))
