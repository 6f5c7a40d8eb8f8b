"""Simulator and decay certificates for feedback-controlled complex Ginzburg-Landau dynamics."""
from .certificates import (
    Certificate,
    CertificateError,
    certify_modal_h1,
    certify_modal_l2,
    certify_nodal,
    certify_steering1,
    certify_steering2,
    certify_volume,
    envelope_at,
)
from .controllers import ControllerSpec
from .dynamics import CGLEParams, DivergedError, TrajectoryRecord, linear_modal_exact, simulate, step
from .spectral import Domain, EigenSystem, Field, ModalCoeffs, build_domain, eigen_system, from_modal, to_modal

__all__ = [
    "CGLEParams", "Certificate", "CertificateError", "ControllerSpec", "DivergedError", "Domain",
    "EigenSystem", "Field", "ModalCoeffs", "TrajectoryRecord", "build_domain", "certify_modal_h1",
    "certify_modal_l2", "certify_nodal", "certify_steering1", "certify_steering2", "certify_volume",
    "eigen_system", "envelope_at", "from_modal", "linear_modal_exact", "simulate", "step", "to_modal",
]
__version__ = "0.1.0"
