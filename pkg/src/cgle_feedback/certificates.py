"""Hypothesis checks, decay constants and envelope functions for each stabilization result.

Failed hypotheses are reported, never raised. Margins are signed distances
of each inequality (positive means satisfied). Only genuine preconditions
(e.g. a steering target gain outside its admissible window) raise
:class:`CertificateError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CGLEParams
from .spectral import DIRICHLET, Domain, EigenSystem, eigen_system

VOLUME = "volume"
MODAL_L2 = "modal_l2"
MODAL_H1 = "modal_h1"
STEERING1 = "steering1"
STEERING2 = "steering2"
NODAL = "nodal"
THEOREMS = (VOLUME, MODAL_L2, MODAL_H1, STEERING1, STEERING2, NODAL)

DEFAULT_EPSILON_FRACTION = 0.05


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class Hypothesis:
    name: str
    margin: float
    strict: bool
    statement: str

    @property
    def satisfied(self) -> bool:
        if math.isnan(self.margin):
            return False
        return self.margin > 0 if self.strict else self.margin >= 0


@dataclass(frozen=True)
class Certificate:
    """Outcome of checking one theorem's hypotheses.

    ``rate`` is the decay exponent of the bounded squared quantity; it is
    computed whenever the formula is defined, while :attr:`exponent` only
    exposes it once every hypothesis holds.
    """

    theorem: str
    hypotheses: tuple[Hypothesis, ...]
    rate: float | None
    constants: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def satisfied(self) -> bool:
        return all(h.satisfied for h in self.hypotheses)

    @property
    def exponent(self) -> float | None:
        return self.rate if self.satisfied else None

    @property
    def failed(self) -> list[str]:
        return [h.name for h in self.hypotheses if not h.satisfied]

    def hypothesis(self, name: str) -> Hypothesis:
        for h in self.hypotheses:
            if h.name == name:
                return h
        raise KeyError(name)

    def table(self) -> str:
        lines = [f"theorem: {self.theorem}"]
        width = max(len(h.name) for h in self.hypotheses)
        for h in self.hypotheses:
            mark = "ok  " if h.satisfied else "FAIL"
            lines.append(f"  [{mark}] {h.name:<{width}}  margin = {h.margin:+.6g}   ({h.statement})")
        for k, v in self.constants.items():
            lines.append(f"  {k} = {_fmt(v)}")
        lines.append(f"  exponent = {_fmt(self.exponent) if self.exponent is not None else 'n/a'}")
        for n in self.notes:
            lines.append(f"  note: {n}")
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _kappa(params: CGLEParams) -> Hypothesis:
    # kappa = 0 is tolerated only for explicitly flagged linear-oracle runs
    margin = params.kappa
    if params.kappa == 0 and params.linear_oracle:
        return Hypothesis("kappa_positive", 0.0, False, "kappa > 0 (kappa = 0 allowed in linear-oracle mode)")
    return Hypothesis("kappa_positive", margin, True, "kappa > 0")


def _modal_hyps(params: CGLEParams, eigsys: EigenSystem) -> tuple[list[Hypothesis], float, float, float]:
    N = params.N
    if eigsys.domain.bc != DIRICHLET:
        raise CertificateError("the Fourier-mode results need Dirichlet boundary conditions")
    if len(eigsys) < N + 1:
        raise CertificateError(f"eigensystem needs at least N+1 = {N + 1} modes, has {len(eigsys)}")
    lam1 = float(eigsys.eigenvalues[0])
    lam_next = float(eigsys.eigenvalues[N])
    hyps = [
        _kappa(params),
        Hypothesis("mu_ge_gamma", params.mu - params.gamma, False, "mu >= gamma"),
        Hypothesis("spectral_gap", lam_next - params.gamma / params.lam, True,
                   "lambda_{N+1} > gamma / lambda"),
    ]
    omega = 2.0 * (params.lam - params.gamma / lam_next) * lam1
    return hyps, omega, lam1, lam_next


def modal_eigsys(domain: Domain, N: int) -> EigenSystem:
    return eigen_system(domain, N + 1)


def certify_volume(params: CGLEParams, L: float) -> Certificate:
    """Volume-element feedback on ``(0, L)``: ``1/N^2 < min(1 - 4 gamma/mu, 4 lambda/(mu L^2))``."""
    N, mu, gamma, lam = params.N, params.mu, params.gamma, params.lam
    h = L / N
    if mu > 0:
        bound = min(1.0 - 4.0 * gamma / mu, 4.0 * lam / (mu * L**2))
        nu = 0.5 - 2.0 * gamma / mu - 1.0 / (2.0 * N**2)
        m = 2.0 * lam / mu - h**2 / 2.0
        rate = mu * nu
    else:
        bound, nu, m, rate = -math.inf, math.nan, math.nan, None
    hyps = (
        _kappa(params),
        Hypothesis("assm1", bound - 1.0 / N**2, True, "1/N^2 < min{1 - 4 gamma/mu, 4 lambda/(mu L^2)}"),
    )
    return Certificate(VOLUME, hyps, rate, {"nu": nu, "m": m, "h": h})


def certify_modal_l2(params: CGLEParams, eigsys: EigenSystem) -> Certificate:
    hyps, omega, lam1, lam_next = _modal_hyps(params, eigsys)
    return Certificate(MODAL_L2, tuple(hyps), omega,
                       {"omega": omega, "lambda_1": lam1, "lambda_N+1": lam_next})


def gagliardo_nirenberg_exponents(n: int, p: float) -> dict:
    theta = n * p / (4.0 * (p + 2.0))
    xi = ((n + 2) * p + 4.0) / (4.0 * (p + 2.0))
    a = n * p / 4.0
    b = (4.0 - n) * p / 4.0
    zeta = 2.0 * (1.0 + b) / (1.0 - a) if a < 1 and not math.isclose(a, 1.0) else math.nan
    return {"theta": theta, "xi": xi, "a": a, "b": b, "zeta": zeta}


def certify_modal_h1(params: CGLEParams, eigsys: EigenSystem, n: int | None = None,
                     delta: float | None = None) -> Certificate:
    """H1 decay of the modal feedback: rate ``delta`` in ``(0, omega)``, constant unquantified.

    ``delta`` defaults to ``omega / 2``.
    """
    hyps, omega, lam1, lam_next = _modal_hyps(params, eigsys)
    n = eigsys.domain.ndim if n is None else n
    if delta is None:
        delta = 0.5 * omega
    if not 0 < delta < omega:
        raise CertificateError(f"delta must lie in (0, omega) = (0, {omega:.6g}), got {delta}")
    ex = gagliardo_nirenberg_exponents(n, params.p)
    critical = 4.0 / n
    notes = ["multiplicative constant C is unquantified: only the rate can be verified"]
    if math.isclose(params.p, critical):
        branch = "critical"
        notes.append("p = 4/n: the estimate requires sufficiently small ||u0||")
    elif params.p < critical:
        branch = "subcritical"
        hyps.append(Hypothesis("zeta_gt_2", ex["zeta"] - 2.0, True, "zeta = 2(1+b)/(1-a) > 2"))
    else:
        branch = "supercritical"
        hyps.append(Hypothesis("power_at_most_critical", critical - params.p, False, "p <= 4/n"))
    constants = {"omega": omega, "delta": delta, "n": n, "branch": branch,
                 "small_data_required": branch == "critical", **ex}
    return Certificate(MODAL_H1, tuple(hyps), delta, constants, tuple(notes))


def c_p(p: float) -> float:
    if p <= -1:
        raise CertificateError(f"p must exceed -1, got {p}")
    return abs(p) / (2.0 * math.sqrt(p + 1.0))


def _steering_hyps(params: CGLEParams, eigsys: EigenSystem):
    hyps, omega, lam1, lam_next = _modal_hyps(params, eigsys)
    cp = c_p(params.p)
    need = abs(params.beta) / cp if cp > 0 else (0.0 if params.beta == 0 else math.inf)
    hyps.append(Hypothesis("kappa_ge_beta_over_cp", params.kappa - need, False, "kappa >= |beta| / C_p"))
    return hyps, omega, lam1, lam_next, cp


def certify_steering1(params: CGLEParams, eigsys: EigenSystem) -> Certificate:
    hyps, omega, lam1, lam_next, cp = _steering_hyps(params, eigsys)
    return Certificate(STEERING1, tuple(hyps), omega,
                       {"omega": omega, "C_p": cp, "lambda_1": lam1, "lambda_N+1": lam_next})


def certify_steering2(params: CGLEParams, eigsys: EigenSystem) -> Certificate:
    """Steering towards a solution of the damped target equation with gain ``gamma_tilde``.

    ``epsilon`` defaults to ``0.05 omega``.
    """
    gt = params.gamma_tilde
    if gt is None:
        raise CertificateError("steering towards a stable target needs gamma_tilde")
    hyps, omega, lam1, lam_next, cp = _steering_hyps(params, eigsys)
    lam = params.lam
    if not gt < lam * lam1:
        raise CertificateError(f"gamma_tilde = {gt} must be < lambda lambda_1 = {lam * lam1}")
    eps = params.epsilon if params.epsilon is not None else DEFAULT_EPSILON_FRACTION * omega
    if not eps > 0:
        raise CertificateError(f"epsilon must be positive, got {eps}")
    threshold = params.gamma * lam1 / lam_next
    omega_t = 2.0 * (gt - threshold)
    case = "I" if gt > threshold else "II"
    hyps.append(Hypothesis("epsilon_below_omega", omega - eps, True, "epsilon < omega"))
    if case == "I":
        # the displayed case-I bound drops a negative term, valid only when omega_tilde > epsilon
        hyps.append(Hypothesis("epsilon_below_omega_tilde", omega_t - eps, True, "epsilon < omega_tilde (case I)"))
    target_exp = 2.0 * (lam * lam1 - gt)
    rate = min(omega - eps, target_exp) if case == "I" else omega - eps
    constants = {
        "omega": omega, "omega_tilde": omega_t, "epsilon": eps, "case": case,
        "threshold": threshold, "target_exponent": target_exp, "C_p": cp,
        "gamma_gap_sq": (gt - params.gamma) ** 2,
        "lambda_1": lam1, "lambda_N+1": lam_next,
    }
    notes = ("the same epsilon appears in the decay factor and in the integrating factor; "
             "the envelopes are implemented exactly as displayed",)
    return Certificate(STEERING2, tuple(hyps), rate, constants, notes)


def certify_nodal(params: CGLEParams, L: float) -> Certificate:
    """Nodal feedback on a Dirichlet interval; the bound is on the (unsquared) L2 norm."""
    N, mu, gamma, lam = params.N, params.mu, params.gamma, params.lam
    h = L / N
    lam1 = (math.pi / L) ** 2
    r = lam1 * (lam - mu * h**2) + (mu / 4.0 - gamma)
    hyps = (
        _kappa(params),
        Hypothesis("lambda_ge_mu_h2", lam - mu * h**2, False, "lambda >= mu h^2"),
        Hypothesis("quarter_mu_gt_gamma", mu / 4.0 - gamma, True, "mu/4 > gamma"),
    )
    return Certificate(NODAL, hyps, 2.0 * r, {"norm_rate": r, "h": h, "lambda_1": lam1})


def _initial(initial_norms, key: str) -> float:
    if isinstance(initial_norms, (int, float, np.floating)):
        return float(initial_norms)
    return float(initial_norms[key])


def envelope_at(cert: Certificate, initial_norms, t, quantity: str | None = None, force: bool = False):
    """Right-hand side of the theorem's bound at time(s) ``t``.

    ``initial_norms`` maps ``l2_sq``, ``z_l2_sq`` and ``v_l2_sq`` to squared
    initial norms (a bare number is accepted for single-quantity bounds). The
    nodal bound is for ``||u(t)||`` itself; every other bound is for a
    squared norm. For the stable-target steering result ``quantity="z"``
    (default) gives the tracking-error bound and ``quantity="u"`` the
    bound on ``||u||^2``.
    """
    if not (cert.satisfied or force):
        raise CertificateError(f"certificate not satisfied (failed: {', '.join(cert.failed)})")
    t = np.asarray(t, dtype=float)
    th = cert.theorem
    if th == MODAL_H1:
        raise CertificateError("the H1 bound has an unquantified constant; verify the rate instead")
    if cert.rate is None:
        raise CertificateError("decay exponent undefined for these parameters")
    if th in (VOLUME, MODAL_L2):
        return _initial(initial_norms, "l2_sq") * np.exp(-cert.rate * t)
    if th == STEERING1:
        return _initial(initial_norms, "z_l2_sq") * np.exp(-cert.rate * t)
    if th == NODAL:
        return math.sqrt(_initial(initial_norms, "l2_sq")) * np.exp(-cert.constants["norm_rate"] * t)
    c = cert.constants
    z0 = _initial(initial_norms, "z_l2_sq")
    v0 = _initial(initial_norms, "v_l2_sq")
    eps, om, omt = c["epsilon"], c["omega"], c["omega_tilde"]
    decay = np.exp(-(om - eps) * t)
    target = np.exp(-c["target_exponent"] * t)
    A = c["gamma_gap_sq"] / eps * v0
    quantity = quantity or "z"
    if quantity not in ("z", "u"):
        raise ValueError(f"quantity must be 'z' or 'u', got {quantity!r}")
    if c["case"] == "I":
        if quantity == "z":
            return z0 * decay + A / (omt - eps) * target
        return z0 * decay + (A / (omt - eps) + v0) * target
    if quantity == "z":
        return z0 * decay + A / (eps - omt) * decay
    return decay * (z0 + A / (eps - omt)) + v0 * target


def squared_envelope(cert: Certificate, initial_norms, t, quantity: str | None = None, force: bool = False):
    """Envelope expressed for the squared norm (the nodal bound is squared)."""
    env = envelope_at(cert, initial_norms, t, quantity, force)
    return env**2 if cert.theorem == NODAL else env
