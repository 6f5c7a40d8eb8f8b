"""Right-hand side and exponential time integration of the controlled CGLE

    u_t = (lam + i alpha) Lap u - (kappa + i beta) |u|^p u + gamma u + control.

The diagonal linear part is propagated exactly in the eigenbasis; the
nonlinearity and the feedback are treated explicitly by an exponential
Runge-Kutta scheme (``etdrk4`` by default, ``heun`` for the two-stage
second-order variant).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .controllers import NODAL, TARGET_STABLE, ControllerSpec, Feedback
from .spectral import Domain, Field, ModalCoeffs, l2_sq, lpp_integral

log = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e6
SCHEMES = ("etdrk4", "heun")


@dataclass(frozen=True)
class CGLEParams:
    """Scalar coefficients of the controlled equation.

    ``lam`` is the diffusion coefficient. ``kappa = 0`` is only accepted with
    ``linear_oracle=True``.
    """

    lam: float
    alpha: float = 0.0
    kappa: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0
    p: float = 2.0
    mu: float = 0.0
    N: int = 1
    gamma_tilde: float | None = None
    epsilon: float | None = None
    linear_oracle: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.mu < 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")
        if self.kappa == 0 and not self.linear_oracle:
            raise ValueError("kappa = 0 requires linear_oracle=True")

    def replace(self, **changes) -> CGLEParams:
        from dataclasses import replace

        return replace(self, **changes)


class DivergedError(RuntimeError):
    """Non-finite values or ``max|u|`` above the blow-up limit."""

    def __init__(self, time: float, record: TrajectoryRecord | None = None):
        super().__init__(f"simulation diverged at t = {time:.6g}")
        self.time = time
        self.record = record


def nonlinear_term(values: np.ndarray, params: CGLEParams) -> np.ndarray:
    """``-(kappa + i beta) |u|^p u``; zero where ``u`` vanishes."""
    if params.kappa == 0 and params.beta == 0:
        return np.zeros_like(values, dtype=complex)
    return -(params.kappa + 1j * params.beta) * np.abs(values) ** params.p * values


def linear_symbol(domain: Domain, params: CGLEParams, gain: float | None = None) -> np.ndarray:
    g = params.gamma if gain is None else gain
    return g - (params.lam + 1j * params.alpha) * domain.eigenvalue_grid


def assemble_rhs(u: Field, params: CGLEParams, control: Field | None = None) -> Field:
    d = u.domain
    lin = d.inverse(linear_symbol(d, params) * d.forward(u.values))
    rhs = lin + nonlinear_term(u.values, params)
    if control is not None:
        if control.domain != d:
            raise ValueError("control and state live on different grids")
        rhs = rhs + control.values
    return Field(d, rhs)


# exponential integrator


def phi_functions(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``phi_1, phi_2, phi_3`` with a Taylor branch for ``|z| < 1``."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1.0
    zs = np.where(small, z, 0.0)
    zb = np.where(small, 1.0, z)
    ez = np.exp(zb)
    big = (
        (ez - 1) / zb,
        (ez - 1 - zb) / zb**2,
        (ez - 1 - zb - zb**2 / 2) / zb**3,
    )
    out = []
    for j, b in zip((1, 2, 3), big):
        term = np.full(z.shape, 1.0 / math.factorial(j), dtype=complex)
        series = term.copy()
        for m in range(1, 30):
            term = term * zs / (m + j)
            series = series + term
        out.append(np.where(small, series, b))
    return tuple(out)


class ExpIntegrator:
    """Exponential Runge-Kutta stepper for ``c' = L c + F(c)`` with diagonal ``L``."""

    def __init__(self, symbol: np.ndarray, dt: float, scheme: str = "etdrk4"):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.scheme = scheme
        self.dt = dt
        z = symbol * dt
        self.E = np.exp(z)
        p1, p2, p3 = phi_functions(z)
        if scheme == "heun":
            self.c1 = dt * p1
            self.c2 = dt * p2
        else:
            self.E2 = np.exp(z / 2)
            self.Q = dt / 2 * phi_functions(z / 2)[0]
            self.f1 = dt * (p1 - 3 * p2 + 4 * p3)
            self.f2 = dt * (p2 - 2 * p3)
            self.f3 = dt * (-p2 + 4 * p3)

    def step(self, c: np.ndarray, F: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        Nc = F(c)
        if self.scheme == "heun":
            a = self.E * c + self.c1 * Nc
            return a + self.c2 * (F(a) - Nc)
        a = self.E2 * c + self.Q * Nc
        Na = F(a)
        b = self.E2 * c + self.Q * Na
        Nb = F(b)
        cc = self.E2 * a + self.Q * (2 * Nb - Nc)
        Ncc = F(cc)
        return self.E * c + self.f1 * Nc + 2 * self.f2 * (Na + Nb) + self.f3 * Ncc


class _System:
    """Spectral vector field for ``u`` (and the co-evolved target ``v``)."""

    def __init__(self, domain: Domain, params: CGLEParams, controller: ControllerSpec):
        self.domain = domain
        self.params = params
        self.controller = controller
        self.feedback = Feedback(controller, domain, params)
        self.coupled = controller.has_target
        if self.coupled:
            if controller.target == TARGET_STABLE:
                if params.gamma_tilde is None:
                    raise ValueError("a stable steering target needs gamma_tilde")
                target_gain = params.gamma_tilde
            else:
                target_gain = params.gamma
            self.symbol = np.stack([linear_symbol(domain, params), linear_symbol(domain, params, target_gain)])
        else:
            self.symbol = linear_symbol(domain, params)
        self.max_abs = 0.0

    def __call__(self, c: np.ndarray) -> np.ndarray:
        vals = self.domain.inverse(c)
        self.max_abs = float(np.max(np.abs(vals))) if vals.size else 0.0
        out = self.domain.forward(nonlinear_term(vals, self.params))
        if self.coupled:
            ctrl = self.feedback(c[0], vals[0], c[1], vals[1])
            if ctrl is not None:
                out[0] += ctrl
        else:
            ctrl = self.feedback(c, vals)
            if ctrl is not None:
                out = out + ctrl
        return out


def default_dt(params: CGLEParams, u0: Field, controller: ControllerSpec | None = None,
               v0: Field | None = None) -> float:
    """``min(1e-3, 0.1 / (|gamma| + mu + kappa max|u0|^p))`` (nodal spikes add ``mu h/dx``)."""
    amp = float(np.max(np.abs(u0.values)))
    if v0 is not None:
        amp = max(amp, float(np.max(np.abs(v0.values))))
    rate = abs(params.gamma) + params.mu + params.kappa * amp ** params.p
    if controller is not None and controller.kind == NODAL:
        rate += Feedback(controller, u0.domain, params).stiffness
    return min(1e-3, 0.1 / rate) if rate > 0 else 1e-3


def step(u: Field, params: CGLEParams, controller: ControllerSpec, dt: float,
         v: Field | None = None, scheme: str = "etdrk4"):
    """Advance one step; returns ``u`` or ``(u, v)`` when a target is co-evolved."""
    system = _System(u.domain, params, controller)
    if system.coupled:
        if v is None:
            raise ValueError("the steering controller needs a target state v")
        c = u.domain.forward(np.stack([u.values, v.values]))
    else:
        c = u.domain.forward(u.values)
    integ = ExpIntegrator(system.symbol, dt, scheme)
    new = integ.step(c, system)
    vals = u.domain.inverse(new)
    if not np.all(np.isfinite(vals)):
        raise DivergedError(dt)
    if system.coupled:
        return Field(u.domain, vals[0]), Field(u.domain, vals[1])
    return Field(u.domain, vals)


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Norm time series of a run; arrays are read-only."""

    times: np.ndarray
    l2_sq: np.ndarray
    h1_semi_sq: np.ndarray
    lpp: np.ndarray
    z_l2_sq: np.ndarray | None
    v_l2_sq: np.ndarray | None
    params: CGLEParams
    controller: ControllerSpec
    dt: float
    scheme: str
    final_u: Field
    final_v: Field | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "l2_sq", "h1_semi_sq", "lpp", "z_l2_sq", "v_l2_sq"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def initial_norms(self) -> dict[str, float]:
        out = {"l2_sq": float(self.l2_sq[0])}
        if self.z_l2_sq is not None:
            out["z_l2_sq"] = float(self.z_l2_sq[0])
            out["v_l2_sq"] = float(self.v_l2_sq[0])
        return out


def simulate(u0: Field, params: CGLEParams, controller: ControllerSpec, t_final: float,
             dt: float | None = None, sample_every: float | None = None,
             v0: Field | None = None, scheme: str = "etdrk4") -> TrajectoryRecord:
    """Integrate to ``t_final`` and sample norms at multiples of ``sample_every``.

    ``dt`` is shrunk if needed so that every sample time is hit exactly.
    Raises :class:`DivergedError` carrying the partial record on blow-up.
    """
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    domain = u0.domain
    system = _System(domain, params, controller)
    if system.coupled:
        if v0 is None:
            raise ValueError("the steering controller needs a target initial state v0")
        if v0.domain != domain:
            raise ValueError("u0 and v0 live on different grids")
    if dt is None:
        dt = default_dt(params, u0, controller, v0 if system.coupled else None)
    if sample_every is None:
        sample_every = max(dt, t_final / 200)
    n_samples = max(1, int(round(t_final / sample_every)))
    sample_every = t_final / n_samples
    steps_per_sample = max(1, int(math.ceil(sample_every / dt - 1e-9)))
    dt = sample_every / steps_per_sample
    integ = ExpIntegrator(system.symbol, dt, scheme)

    if system.coupled:
        c = domain.forward(np.stack([u0.values, v0.values]).astype(complex))
    else:
        c = domain.forward(np.asarray(u0.values, dtype=complex))

    cols = {k: [] for k in ("t", "l2", "h1", "lpp", "z", "v")}

    def record(t, c):
        vals = domain.inverse(c)
        uv = vals[0] if system.coupled else vals
        uc = c[0] if system.coupled else c
        cols["t"].append(t)
        cols["l2"].append(l2_sq(domain, uv))
        cols["h1"].append(float(np.sum(domain.eigenvalue_grid * np.abs(uc) ** 2)))
        cols["lpp"].append(lpp_integral(domain, uv, params.p))
        if system.coupled:
            cols["z"].append(l2_sq(domain, vals[0] - vals[1]))
            cols["v"].append(l2_sq(domain, vals[1]))
        return vals

    def build(c) -> TrajectoryRecord:
        vals = domain.inverse(c)
        return TrajectoryRecord(
            times=cols["t"], l2_sq=cols["l2"], h1_semi_sq=cols["h1"], lpp=cols["lpp"],
            z_l2_sq=cols["z"] if system.coupled else None,
            v_l2_sq=cols["v"] if system.coupled else None,
            params=params, controller=controller, dt=dt, scheme=scheme,
            final_u=Field(domain, vals[0] if system.coupled else vals),
            final_v=Field(domain, vals[1]) if system.coupled else None,
        )

    record(0.0, c)
    log.debug("simulate: %d samples x %d steps, dt=%g, scheme=%s", n_samples, steps_per_sample, dt, scheme)
    for i in range(n_samples):
        for j in range(steps_per_sample):
            t_now = (i * steps_per_sample + j) * dt
            new = integ.step(c, system)
            if system.max_abs > BLOWUP_LIMIT or not np.all(np.isfinite(new)):
                raise DivergedError(t_now, build(c))
            c = new
        record((i + 1) * sample_every, c)
    return build(c)


def linear_modal_exact(c0: ModalCoeffs, params: CGLEParams, N: int, t: float) -> ModalCoeffs:
    """Closed-form modal solution of the ``kappa = 0`` equation with the modal controller on modes ``k <= N``."""
    if params.kappa != 0 or params.beta != 0:
        raise ValueError("linear_modal_exact requires kappa = beta = 0")
    lam_k = c0.eigsys.eigenvalues
    controlled = np.arange(len(lam_k)) < N
    rate = params.gamma - params.lam * lam_k - params.mu * controlled
    factor = np.exp(rate * t) * np.exp(-1j * params.alpha * lam_k * t)
    return ModalCoeffs(c0.coeffs * factor, c0.eigsys)
