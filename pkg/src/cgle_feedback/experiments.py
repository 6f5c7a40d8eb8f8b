"""Experiment configuration, initial data presets and the run/sweep/convergence pipelines.

A configuration is a flat key-value TOML file describing exactly one
experiment, e.g.::

    domain = "interval"
    length = 3.141592653589793
    M = 127
    bc = "dirichlet"
    lambda = 1.0
    gamma = 0.5
    mu = 1.0
    N = 1
    kappa = 1.0
    controller = "modal"
    ic = "random_smooth"
    ic_seed = 7
    t_final = 5.0
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import certificates as certs
from .analysis import EnvelopeReport, bounded_series, fit_decay_rate, verify_envelope
from .controllers import NODAL, STEERING, TARGET_STABLE, ControllerError, ControllerSpec, VOLUME, MODAL, NONE
from .dynamics import SCHEMES, CGLEParams, DivergedError, TrajectoryRecord, linear_modal_exact, simulate
from .spectral import INTERVAL, Domain, Field, ModalCoeffs, build_domain, eigen_system, from_modal, to_modal

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


IC_KINDS = ("zero", "single_mode", "random_smooth", "constant")


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "random_smooth"
    mode: int = 1
    seed: int = 0
    decay: float = 2.0
    modes: int = 16
    amplitude: float = 1.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in IC_KINDS:
            raise ConfigError(f"unknown initial condition {self.kind!r}; expected one of {IC_KINDS}")

    def build(self, domain: Domain) -> Field:
        if self.kind == "zero":
            return Field.zeros(domain)
        if self.kind == "constant":
            return Field(domain, np.full(domain.shape, self.value, dtype=complex))
        if self.kind == "single_mode":
            eig = eigen_system(domain, self.mode)
            return Field(domain, self.amplitude * eig.eigenfunction(self.mode - 1))
        return random_smooth(domain, self.seed, self.decay, self.modes, self.amplitude)


def random_smooth(domain: Domain, seed: int, decay: float = 2.0, modes: int = 16, amplitude: float = 1.0) -> Field:
    """Band-limited field with modal magnitudes ``amplitude * k^-decay`` and seeded random phases."""
    eig = eigen_system(domain, modes)
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, modes)
    k = np.arange(1, modes + 1, dtype=float)
    coeffs = amplitude * k ** (-decay) * np.exp(1j * phases)
    return from_modal(ModalCoeffs(coeffs, eig))


_PARAM_KEYS = {
    "lambda": "lam", "alpha": "alpha", "kappa": "kappa", "beta": "beta", "gamma": "gamma",
    "p": "p", "mu": "mu", "N": "N", "gamma_tilde": "gamma_tilde", "epsilon": "epsilon",
    "linear_oracle": "linear_oracle",
}
_IC_FIELDS = ("mode", "seed", "decay", "modes", "amplitude", "value")
_OTHER_KEYS = {
    "domain", "length", "lengths", "M", "bc", "controller", "target", "obs_points", "act_points",
    "theorem", "delta", "ic", "target_ic", "t_final", "dt", "sample_every", "scheme", "slack",
    "window_fraction", "fit_quantity",
}
KNOWN_KEYS = (set(_PARAM_KEYS) | _OTHER_KEYS | {f"ic_{f}" for f in _IC_FIELDS}
              | {f"target_{f}" for f in _IC_FIELDS})


@dataclass(frozen=True)
class ExperimentConfig:
    domain: Domain
    params: CGLEParams
    controller: ControllerSpec
    ic: InitialCondition
    target_ic: InitialCondition | None
    t_final: float
    dt: float | None
    sample_every: float | None
    scheme: str = "etdrk4"
    theorem: str | None = None
    delta: float | None = None
    slack: float | None = None
    window_fraction: float = 0.5
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> ExperimentConfig:
        unknown = set(raw) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return cls._from_dict(dict(raw))
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def _from_dict(cls, raw: dict) -> ExperimentConfig:
        kind = raw.get("domain", INTERVAL)
        if "lengths" in raw:
            lengths = raw["lengths"]
        elif "length" in raw:
            lengths = raw["length"]
        else:
            raise ConfigError("config needs 'length' (interval) or 'lengths' (rectangle)")
        if "M" not in raw:
            raise ConfigError("config needs the grid resolution 'M'")
        domain = build_domain(kind, lengths, raw["M"], raw.get("bc", "dirichlet"))
        if "lambda" not in raw:
            raise ConfigError("config needs 'lambda'")
        pkw = {attr: raw[key] for key, attr in _PARAM_KEYS.items() if key in raw}
        params = CGLEParams(**pkw)
        ctrl_kind = raw.get("controller", NONE)
        spec = ControllerSpec(
            kind=ctrl_kind,
            obs_points=tuple(raw["obs_points"]) if "obs_points" in raw else None,
            act_points=tuple(raw["act_points"]) if "act_points" in raw else None,
            target=raw.get("target"),
        )
        ic = _ic_from(raw, "ic")
        target_ic = _ic_from(raw, "target") if spec.has_target else None
        if spec.has_target and "target_ic" not in raw:
            raise ConfigError("steering configs need a target initial condition 'target_ic'")
        scheme = raw.get("scheme", "etdrk4")
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {scheme!r}")
        t_final = float(raw.get("t_final", 1.0))
        if not t_final > 0:
            raise ConfigError("t_final must be positive")
        theorem = raw.get("theorem")
        if theorem is not None and theorem not in certs.THEOREMS:
            raise ConfigError(f"unknown theorem {theorem!r}")
        cfg = cls(
            domain=domain, params=params, controller=spec, ic=ic, target_ic=target_ic,
            t_final=t_final, dt=_opt_float(raw, "dt"), sample_every=_opt_float(raw, "sample_every"),
            scheme=scheme, theorem=theorem, delta=_opt_float(raw, "delta"),
            slack=_opt_float(raw, "slack"), window_fraction=float(raw.get("window_fraction", 0.5)),
            raw=raw,
        )
        # fail early on unsupported controller/domain combinations
        if spec.kind != NONE:
            from .controllers import Feedback

            try:
                Feedback(spec, domain, params)
            except ControllerError as exc:
                raise ConfigError(str(exc)) from exc
        return cfg

    def with_value(self, key: str, value) -> ExperimentConfig:
        raw = dict(self.raw)
        raw[key] = value
        return ExperimentConfig.from_dict(raw)


def _opt_float(raw, key):
    return float(raw[key]) if raw.get(key) is not None else None


def _ic_from(raw: dict, prefix: str) -> InitialCondition:
    kind_key = "ic" if prefix == "ic" else "target_ic"
    kw = {f: raw[f"{prefix}_{f}"] for f in _IC_FIELDS if f"{prefix}_{f}" in raw}
    return InitialCondition(kind=raw.get(kind_key, "random_smooth"), **kw)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def certificate_for(cfg: ExperimentConfig) -> certs.Certificate | None:
    """The theorem matching the configured controller (``None`` when uncontrolled)."""
    spec, P, d = cfg.controller, cfg.params, cfg.domain
    try:
        if spec.kind == VOLUME:
            return certs.certify_volume(P, d.lengths[0])
        if spec.kind == NODAL:
            return certs.certify_nodal(P, d.lengths[0])
        if spec.kind == MODAL:
            eig = certs.modal_eigsys(d, P.N)
            if cfg.theorem == certs.MODAL_H1:
                return certs.certify_modal_h1(P, eig, delta=cfg.delta)
            return certs.certify_modal_l2(P, eig)
        if spec.kind == STEERING:
            eig = certs.modal_eigsys(d, P.N)
            if spec.target == TARGET_STABLE:
                return certs.certify_steering2(P, eig)
            return certs.certify_steering1(P, eig)
    except certs.CertificateError as exc:
        raise ConfigError(str(exc)) from exc
    return None


@dataclass
class RunResult:
    config: ExperimentConfig
    certificate: certs.Certificate | None
    record: TrajectoryRecord | None
    reports: list[EnvelopeReport]
    rate_check: dict | None
    diverged_at: float | None
    duration: float

    @property
    def passed(self) -> bool:
        if self.diverged_at is not None:
            return False
        if self.rate_check is not None and not self.rate_check["passed"]:
            return False
        return all(r.passed for r in self.reports)


def initial_states(cfg: ExperimentConfig) -> tuple[Field, Field | None]:
    u0 = cfg.ic.build(cfg.domain)
    v0 = cfg.target_ic.build(cfg.domain) if cfg.target_ic is not None else None
    return u0, v0


def run_experiment(cfg: ExperimentConfig, force: bool = False, slack: float | None = None) -> RunResult:
    """Simulate and verify the configured theorem's envelope."""
    cert = certificate_for(cfg)
    u0, v0 = initial_states(cfg)
    t0 = time.perf_counter()
    diverged = None
    try:
        record = simulate(u0, cfg.params, cfg.controller, cfg.t_final, cfg.dt, cfg.sample_every, v0, cfg.scheme)
    except DivergedError as exc:
        record, diverged = exc.record, exc.time
        log.warning("%s", exc)
    reports, rate_check = [], None
    slack = slack if slack is not None else cfg.slack
    if cert is not None and record is not None and cert.rate is not None:
        if cert.theorem == certs.MODAL_H1:
            rate_check = _rate_check(record, cert, cfg.window_fraction)
        else:
            reports.append(verify_envelope(record, cert, slack, force=force))
            if cert.theorem == certs.STEERING2:
                reports.append(verify_envelope(record, cert, slack, quantity="u", force=force))
    return RunResult(cfg, cert, record, reports, rate_check, diverged, time.perf_counter() - t0)


def _rate_check(record: TrajectoryRecord, cert: certs.Certificate, window_fraction: float) -> dict:
    try:
        fit = fit_decay_rate(record.times, record.h1_semi_sq, window_fraction)
    except ValueError as exc:
        return {"passed": False, "fitted_rate": math.nan, "required": cert.rate, "error": str(exc)}
    return {"passed": fit.rate >= cert.rate, "fitted_rate": fit.rate, "required": cert.rate}


def fitted_rate(record: TrajectoryRecord, cert: certs.Certificate | None, window_fraction: float = 0.5) -> float:
    if cert is None:
        series = record.l2_sq
    else:
        series, label = bounded_series(record, cert)
        if cert.theorem == certs.NODAL:
            series = record.l2_sq
    try:
        return fit_decay_rate(record.times, series, window_fraction).rate
    except ValueError:
        return math.nan


INT_KEYS = {"N", "M", "ic_mode", "ic_seed", "ic_modes", "target_mode", "target_seed", "target_modes"}


def sweep(cfg: ExperimentConfig, key: str, values, simulate_runs: bool = True, workers: int = 4) -> list[dict]:
    """Certify (and optionally simulate) one configuration per value of ``key``."""
    values = list(values)
    if not values:
        raise ConfigError("empty sweep range")
    if key not in KNOWN_KEYS:
        raise ConfigError(f"cannot sweep unknown key {key!r}")
    cast = int if key in INT_KEYS else float
    configs = [cfg.with_value(key, cast(v)) for v in values]

    def one(c: ExperimentConfig) -> dict:
        cert = certificate_for(c)
        row = {
            "value": c.raw[key],
            "satisfied": bool(cert.satisfied) if cert is not None else False,
            "exponent": cert.exponent if cert is not None else None,
            "fitted_rate": None,
        }
        if simulate_runs:
            u0, v0 = initial_states(c)
            try:
                rec = simulate(u0, c.params, c.controller, c.t_final, c.dt, c.sample_every, v0, c.scheme)
                row["fitted_rate"] = fitted_rate(rec, cert, c.window_fraction)
            except DivergedError:
                row["fitted_rate"] = math.nan
        return row

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, configs))


def convergence_study(cfg: ExperimentConfig, dts, t: float = 1.0) -> list[dict]:
    """Relative modal error at time ``t`` against the exact linear solution, per ``dt``."""
    P = cfg.params
    if P.kappa != 0 or P.beta != 0:
        raise certs.CertificateError("the convergence study needs the linear oracle mode (kappa = beta = 0)")
    if cfg.controller.kind not in (MODAL, NONE):
        raise certs.CertificateError("the linear oracle covers the modal controller only")
    N = P.N if cfg.controller.kind == MODAL else 0
    params = P if cfg.controller.kind == MODAL else P.replace(mu=0.0)
    u0, _ = initial_states(cfg)
    K = cfg.domain.max_index ** cfg.domain.ndim
    c0 = to_modal(u0, K)
    exact = linear_modal_exact(c0, params, N, t).coeffs
    rows = []
    for dt in dts:
        rec = simulate(u0, P, cfg.controller, t, dt=dt, sample_every=t, scheme=cfg.scheme)
        num = to_modal(rec.final_u, K).coeffs
        err = float(np.linalg.norm(num - exact) / np.linalg.norm(exact))
        rows.append({"dt": rec.dt, "error": err, "order": None})
    for prev, cur in zip(rows, rows[1:]):
        if prev["error"] > 0 and cur["error"] > 0:
            cur["order"] = math.log(prev["error"] / cur["error"]) / math.log(prev["dt"] / cur["dt"])
    return rows
