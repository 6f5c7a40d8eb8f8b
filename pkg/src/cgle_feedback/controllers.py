"""Finite-parameter feedback laws: volume elements, Fourier modes, nodal values, steering.

Every ``apply_*`` function is a pure map returning the control forcing as a
:class:`~cgle_feedback.spectral.Field`. The number of controllers ``N`` and
the gain ``mu`` are read from the parameter object.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .spectral import DIRICHLET, INTERVAL, Domain, EigenSystem, Field, eigen_system

if TYPE_CHECKING:
    from .dynamics import CGLEParams

NONE = "none"
VOLUME = "volume"
MODAL = "modal"
NODAL = "nodal"
STEERING = "steering"
KINDS = (NONE, VOLUME, MODAL, NODAL, STEERING)

TARGET_ANY = "any"
TARGET_STABLE = "stable"


class ControllerError(ValueError):
    pass


@dataclass(frozen=True)
class ControllerSpec:
    """Which feedback law to use.

    ``obs_points``/``act_points`` are the nodal observation and actuation
    points (default: cell midpoints). ``target`` selects the steering target:
    ``"any"`` co-evolves ``v`` under the uncontrolled equation, ``"stable"``
    under the same equation with gain ``gamma_tilde``.
    """

    kind: str = NONE
    obs_points: tuple[float, ...] | None = None
    act_points: tuple[float, ...] | None = None
    target: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ControllerError(f"unknown controller {self.kind!r}; expected one of {KINDS}")
        if self.kind == STEERING:
            if self.target is None:
                object.__setattr__(self, "target", TARGET_ANY)
            if self.target not in (TARGET_ANY, TARGET_STABLE):
                raise ControllerError(f"unknown steering target {self.target!r}")
        elif self.target is not None:
            raise ControllerError("a target is only meaningful for the steering controller")

    @property
    def has_target(self) -> bool:
        return self.kind == STEERING

    def describe(self) -> str:
        if self.kind == STEERING:
            return f"steering:{self.target}"
        return self.kind


def _cells(domain: Domain, N: int) -> int:
    if domain.kind != INTERVAL:
        raise ControllerError("volume-element and nodal controllers need an interval domain")
    if N < 1:
        raise ControllerError(f"N must be >= 1, got {N}")
    if domain.n_intervals % N:
        raise ControllerError(
            f"grid with {domain.n_intervals} intervals is not aligned with N={N} cells"
        )
    return domain.n_intervals // N


def _full_line(domain: Domain, values: np.ndarray) -> np.ndarray:
    """Values on all nodes ``0..L`` including Dirichlet boundary zeros."""
    if domain.bc == DIRICHLET:
        pad = [(0, 0)] * (values.ndim - 1) + [(1, 1)]
        return np.pad(values, pad)
    return values


def cell_means(domain: Domain, values: np.ndarray, N: int) -> np.ndarray:
    """Composite-trapezoid mean of ``values`` over each cell ``J_k``."""
    per_cell = _cells(domain, N)
    full = _full_line(domain, np.asarray(values))
    blocks = [full[..., k * per_cell:(k + 1) * per_cell + 1] for k in range(N)]
    means = [(b[..., 1:-1].sum(axis=-1) + 0.5 * (b[..., 0] + b[..., -1])) / per_cell for b in blocks]
    return np.stack(means, axis=-1)


def interpolation_error_sq(u: Field, N: int) -> float:
    """``||u - I_h u||^2`` by a trapezoid rule applied cell by cell.

    The interpolant jumps at the cell edges, so a single composite rule over
    the whole line would only be first order; splitting at the edges keeps
    every piece smooth.
    """
    per_cell = _cells(u.domain, N)
    full = _full_line(u.domain, np.asarray(u.values))
    means = cell_means(u.domain, u.values, N)
    (dx,) = u.domain.spacing
    total = 0.0
    for k in range(N):
        b = np.abs(full[k * per_cell:(k + 1) * per_cell + 1] - means[k]) ** 2
        total += dx * (b[1:-1].sum() + 0.5 * (b[0] + b[-1]))
    return float(total)


def _cell_of_node(domain: Domain, N: int) -> np.ndarray:
    per_cell = _cells(domain, N)
    full_index = np.arange(domain.M) + (1 if domain.bc == DIRICHLET else 0)
    return np.minimum(full_index // per_cell, N - 1)


def volume_interpolant(u: Field, N: int) -> Field:
    """Piecewise-constant interpolant ``sum_k mean_k(u) chi_{J_k}`` with half-open cells."""
    means = cell_means(u.domain, u.values, N)
    return Field(u.domain, means[_cell_of_node(u.domain, N)])


def apply_volume_controller(u: Field, params: CGLEParams) -> Field:
    return -params.mu * volume_interpolant(u, params.N)


def _check_modes(domain: Domain, N: int) -> EigenSystem:
    if domain.bc != DIRICHLET:
        raise ControllerError("the modal controller needs Dirichlet boundary conditions")
    try:
        return eigen_system(domain, N)
    except ValueError as exc:
        raise ControllerError(str(exc)) from exc


def apply_modal_controller(u: Field, params: CGLEParams, eigsys: EigenSystem | None = None) -> Field:
    """``-mu sum_{k<=N} (u, w_k) w_k``."""
    eig = eigsys if eigsys is not None else _check_modes(u.domain, params.N)
    if len(eig) < params.N:
        raise ControllerError(f"eigensystem has {len(eig)} modes, N={params.N} requested")
    d = u.domain
    spec = d.forward(u.values).ravel()
    out = np.zeros_like(spec)
    idx = eig.flat_index[: params.N]
    out[idx] = -params.mu * spec[idx]
    return Field(d, d.inverse(out.reshape(d.shape)))


def default_nodes(domain: Domain, N: int) -> tuple[float, ...]:
    h = domain.lengths[0] / N
    return tuple((k + 0.5) * h for k in range(N))


@dataclass(frozen=True)
class NodalLayout:
    h: float
    obs_index: np.ndarray
    act_index: np.ndarray


def nodal_layout(domain: Domain, N: int, obs=None, act=None) -> NodalLayout:
    """Nearest-node indices for observation/actuation points, with membership checks."""
    if domain.kind != INTERVAL or domain.bc != DIRICHLET:
        raise ControllerError("the nodal controller needs a Dirichlet interval")
    L = domain.lengths[0]
    h = L / N
    obs = default_nodes(domain, N) if obs is None else tuple(obs)
    act = default_nodes(domain, N) if act is None else tuple(act)
    if len(obs) != N or len(act) != N:
        raise ControllerError(f"need exactly N={N} observation and actuation points")
    (dx,) = domain.spacing
    indices = []
    for pts, name in ((obs, "observation"), (act, "actuation")):
        idx = []
        for k, x in enumerate(pts):
            if not (k * h <= x < (k + 1) * h):
                raise ControllerError(f"{name} point {x} is not in cell J_{k + 1} = [{k * h}, {(k + 1) * h})")
            j = int(np.rint(x / dx))
            if j < 1 or j > domain.M:
                raise ControllerError(f"{name} point {x} collides with a boundary node")
            idx.append(j - 1)
        indices.append(np.array(idx))
    return NodalLayout(h, indices[0], indices[1])


def nodal_forcing(domain: Domain, values: np.ndarray, mu: float, layout: NodalLayout) -> np.ndarray:
    (dx,) = domain.spacing
    out = np.zeros(values.shape, dtype=complex)
    np.add.at(out, (..., layout.act_index), -mu * layout.h * values[..., layout.obs_index] / dx)
    return out


def apply_nodal_controller(u: Field, params: CGLEParams, spec: ControllerSpec | None = None) -> Field:
    """Discrete ``-mu sum_k h u(xbar_k) delta(x - x_k)``: a spike of height ``1/dx`` at the nearest node."""
    spec = spec or ControllerSpec(NODAL)
    layout = nodal_layout(u.domain, params.N, spec.obs_points, spec.act_points)
    return Field(u.domain, nodal_forcing(u.domain, u.values, params.mu, layout))


def apply_steering_controller(u: Field, v: Field, params: CGLEParams, eigsys: EigenSystem | None = None) -> Field:
    """Modal feedback acting on the tracking error ``u - v``."""
    return apply_modal_controller(u - v, params, eigsys)


class Feedback:
    """Fast evaluation of a controller in spectral space, used by the integrator."""

    def __init__(self, spec: ControllerSpec, domain: Domain, params: CGLEParams):
        self.spec = spec
        self.domain = domain
        self.mu = params.mu
        self.N = params.N
        self._mask = None
        self._layout = None
        self._cell_index = None
        if spec.kind in (MODAL, STEERING):
            eig = _check_modes(domain, params.N)
            mask = np.zeros(domain.M ** domain.ndim)
            mask[eig.flat_index] = 1.0
            self._mask = mask.reshape(domain.shape)
        elif spec.kind == VOLUME:
            self._cell_index = _cell_of_node(domain, params.N)
        elif spec.kind == NODAL:
            self._layout = nodal_layout(domain, params.N, spec.obs_points, spec.act_points)

    @property
    def stiffness(self) -> float:
        """Largest rate of the explicit feedback term, for time-step selection."""
        if self.spec.kind == NODAL:
            (dx,) = self.domain.spacing
            return self.mu * self._layout.h / dx
        return 0.0 if self.spec.kind == NONE else self.mu

    def __call__(self, u_spec, u_vals, v_spec=None, v_vals=None) -> np.ndarray | None:
        kind = self.spec.kind
        if kind == NONE or self.mu == 0:
            return None
        if kind == MODAL:
            return -self.mu * self._mask * u_spec
        if kind == STEERING:
            return -self.mu * self._mask * (u_spec - v_spec)
        if kind == VOLUME:
            means = cell_means(self.domain, u_vals, self.N)
            return self.domain.forward(-self.mu * means[..., self._cell_index])
        return self.domain.forward(nodal_forcing(self.domain, u_vals, self.mu, self._layout))
