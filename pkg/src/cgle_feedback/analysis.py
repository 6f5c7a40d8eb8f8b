"""Decay-rate fitting, envelope adjudication and the inequalities the proofs lean on."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import certificates as certs
from .controllers import MODAL, NODAL, STEERING, TARGET_ANY, TARGET_STABLE, VOLUME, interpolation_error_sq
from .dynamics import TrajectoryRecord
from .spectral import Field, compute_norms, l2_sq

LOG_FLOOR = 1e-12
MIN_FIT_SAMPLES = 8


@dataclass(frozen=True)
class DecayFit:
    rate: float
    log_intercept: float
    residual_rms: float
    window: tuple[float, float]
    n_samples: int


def fit_decay_rate(times, values, window_fraction: float = 0.5, floor: float = LOG_FLOOR) -> DecayFit:
    """Least-squares fit of ``log(value) = c - rate t`` over the trailing ``window_fraction`` of samples."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape:
        raise ValueError("times and values differ in length")
    if not 0 < window_fraction <= 1:
        raise ValueError(f"window_fraction must be in (0, 1], got {window_fraction}")
    start = int(math.floor(len(t) * (1.0 - window_fraction)))
    t, y = t[start:], y[start:]
    keep = y > floor
    t, y = t[keep], y[keep]
    if len(t) < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} samples above {floor:g} in the window, got {len(t)}")
    A = np.column_stack([np.ones_like(t), t])
    logy = np.log(y)
    (intercept, slope), *_ = np.linalg.lstsq(A, logy, rcond=None)
    resid = logy - (intercept + slope * t)
    return DecayFit(float(-slope), float(intercept), float(np.sqrt(np.mean(resid**2))),
                    (float(t[0]), float(t[-1])), len(t))


@dataclass(frozen=True)
class EnvelopeReport:
    passed: bool
    first_violation_time: float | None
    worst_ratio: float
    quantity: str
    slack: float
    n_samples: int


_EXPECTED = {
    certs.VOLUME: (VOLUME, None),
    certs.MODAL_L2: (MODAL, None),
    certs.MODAL_H1: (MODAL, None),
    certs.STEERING1: (STEERING, TARGET_ANY),
    certs.STEERING2: (STEERING, TARGET_STABLE),
    certs.NODAL: (NODAL, None),
}


def check_match(record: TrajectoryRecord, cert: certs.Certificate):
    kind, target = _EXPECTED[cert.theorem]
    spec = record.controller
    if spec.kind != kind or (target is not None and spec.target != target):
        raise ValueError(f"certificate {cert.theorem!r} does not match controller {spec.describe()!r}")


def default_slack(dt: float) -> float:
    return 1e-6 + 10.0 * dt**2


def bounded_series(record: TrajectoryRecord, cert: certs.Certificate, quantity: str | None = None):
    """Recorded values of the quantity the theorem bounds, and its label."""
    if cert.theorem == certs.NODAL:
        return np.sqrt(record.l2_sq), "l2"
    if cert.theorem == certs.STEERING1 or (cert.theorem == certs.STEERING2 and quantity in (None, "z")):
        return record.z_l2_sq, "z_l2_sq"
    if cert.theorem == certs.MODAL_H1:
        return record.h1_semi_sq, "h1_semi_sq"
    return record.l2_sq, "l2_sq"


def verify_envelope(record: TrajectoryRecord, cert: certs.Certificate, rel_slack: float | None = None,
                    quantity: str | None = None, force: bool = False) -> EnvelopeReport:
    """Check ``recorded <= envelope * (1 + rel_slack)`` at every sample.

    ``rel_slack`` defaults to ``1e-6 + 10 dt^2``. Unsatisfied certificates
    are rejected unless ``force`` is set.
    """
    check_match(record, cert)
    if not (cert.satisfied or force):
        raise certs.CertificateError(f"certificate not satisfied (failed: {', '.join(cert.failed)})")
    slack = default_slack(record.dt) if rel_slack is None else rel_slack
    values, label = bounded_series(record, cert, quantity)
    env = certs.envelope_at(cert, record.initial_norms, record.times, quantity, force=force)
    bound = env * (1.0 + slack)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(values == 0, 0.0, values / env)
    bad = values > bound
    first = float(record.times[np.argmax(bad)]) if bad.any() else None
    if quantity == "u":
        label = "l2_sq"
    return EnvelopeReport(not bad.any(), first, float(np.max(ratio)), label, slack, len(values))


def interpolant_margin(u: Field, N: int) -> float:
    """``h ||u||_{H1,equiv} - ||u - I_h u||_{L2}`` with ``h = L/N``."""
    h = u.domain.lengths[0] / N
    rhs = h * math.sqrt(compute_norms(u, 2.0).h1_equiv_sq)
    lhs = math.sqrt(interpolation_error_sq(u, N))
    return rhs - lhs


def parseval_residual(f: Field) -> float:
    """``|l2_sq - sum_k |(f, w_k)|^2|`` over every represented mode."""
    d = f.domain
    return abs(l2_sq(d, f.values) - float(np.sum(np.abs(d.forward(f.values)) ** 2)))


def energy_residual(record: TrajectoryRecord) -> np.ndarray:
    """Residual of ``d/dt ||u||^2 + 2 lam |u|_1^2 + 2 kappa int|u|^(p+2) - 2 gamma ||u||^2`` (uncontrolled runs).

    The time derivative is a central difference of the sampled series, so
    the residual is second order in the sample spacing.
    """
    P = record.params
    t, e = record.times, record.l2_sq
    dedt = (e[2:] - e[:-2]) / (t[2:] - t[:-2])
    rest = 2 * P.lam * record.h1_semi_sq + 2 * P.kappa * record.lpp - 2 * P.gamma * record.l2_sq
    return dedt + rest[1:-1]
