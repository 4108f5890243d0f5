"""Linearized update systems and their contraction certificates.

Replacing the gradient by L * (x - x*) turns each optimizer into a
time-varying linear system: a scalar factor for plain descent, and 2x2
state matrices for the adaptive-moment and accelerated updates. This
module builds those systems, derives the step-size windows inside which
they contract at a given rate rho, certifies contraction two independent
ways (discrete Lyapunov solve and spectral radius), and simulates the
systems to check the decay envelope numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, SingularSystemError
from .linalg import Matrix2, cond2, eig2x2, solve_discrete_lyapunov2, spectral_radius2
from .optimizers import accsgd_coefficients

# Verdicts from the certificate and eigenvalue routes must agree except
# within this band of the rate boundary.
AGREEMENT_TOL = 1e-9


# --- plain descent: the error contracts by the scalar factor 1 - eta*L ---


def sgd_factor(eta: float, L: float) -> float:
    """Per-step multiplier of the distance to the equilibrium."""
    return 1.0 - eta * L


def sgd_rate_window(L: float, rho: float) -> tuple[float, float]:
    """Closed step-size window [(1-rho)/L, 1/L] for contraction at rate rho.

    Inside it the factor lies in [0, rho]. The window is one-sided: step
    sizes just above 1/L give a small negative factor that still
    contracts, but fall outside this window.
    """
    if L <= 0.0:
        raise ValueError("L must be positive")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    return (1.0 - rho) / L, 1.0 / L


# --- adaptive moments: state (m, x - x*) evolves by a 2x2 matrix ---


def amsgrad_system(beta1: float, eta: float, L: float, sqrt_vhat: float) -> Matrix2:
    """State matrix of the moment-normalized update at one instant."""
    if sqrt_vhat <= 0.0:
        raise ValueError("sqrt_vhat must be positive")
    return Matrix2(
        beta1,
        (1.0 - beta1) * L,
        -eta * beta1 / sqrt_vhat,
        1.0 - (1.0 - beta1) * eta * L / sqrt_vhat,
    )


def amsgrad_discriminant(beta1: float, eta: float, L: float, sqrt_vhat: float) -> float:
    """Discriminant of the state matrix's characteristic polynomial.

    The polynomial is
    lambda^2 - (1 + beta1 - (1-beta1)*eta*L/sqrt_vhat) * lambda + beta1;
    negative discriminant means a conjugate pair of magnitude sqrt(beta1).
    """
    s = 1.0 + beta1 - (1.0 - beta1) * eta * L / sqrt_vhat
    return s * s - 4.0 * beta1


def amsgrad_rate_window(beta1: float, sqrt_vhat: float, L: float) -> tuple[float, float]:
    """Open step-size window inside which both eigenvalues have magnitude
    sqrt(beta1).

    Bounds are ((1 -+ sqrt(beta1)) / (1 +- sqrt(beta1))) * sqrt_vhat / L.
    The equivalent form (1 -+ sqrt(beta1))^2 / (1 - beta1) is checked
    against them as an internal identity.
    """
    if not 0.0 < beta1 < 1.0:
        raise ValueError("beta1 must lie strictly in (0, 1)")
    if sqrt_vhat <= 0.0 or L <= 0.0:
        raise ValueError("sqrt_vhat and L must be positive")
    s = math.sqrt(beta1)
    scale = sqrt_vhat / L
    lo = (1.0 - s) / (1.0 + s) * scale
    hi = (1.0 + s) / (1.0 - s) * scale
    lo_alt = (1.0 - s) ** 2 / (1.0 - beta1) * scale
    hi_alt = (1.0 + s) ** 2 / (1.0 - beta1) * scale
    if not (
        math.isclose(lo, lo_alt, rel_tol=1e-9) and math.isclose(hi, hi_alt, rel_tol=1e-9)
    ):
        raise ConsistencyError("rate-window forms disagree")
    return lo, hi


# --- accelerated momentum: state (m - x*, x - x*) evolves by a 2x2 matrix ---


def accsgd_system(kappa: float, xi: float, eta: float, L: float) -> Matrix2:
    """State matrix of the accelerated update at one instant."""
    alpha, a, b = accsgd_coefficients(kappa, xi)
    top_right = (1.0 - alpha) * (1.0 - a * eta * L)
    return Matrix2(
        alpha,
        top_right,
        b * alpha,
        (1.0 - b) * (1.0 - eta * L) + b * top_right,
    )


def accsgd_nominal_eigenvalues(
    kappa: float, xi: float, eta: float, L: float
) -> tuple[float, float]:
    """The pair (alpha, (1-b)(1 - eta*L)) that the rate window is built on.

    Its product equals det of the state matrix exactly, but it is NOT the
    true spectrum: the triangular form it reads off comes from a row
    operation, which is not a similarity, and the trace differs by
    b*(1-alpha)*(1-a*eta*L). Use eig2x2/spectral_radius2 on the state
    matrix for the actual contraction rate.
    """
    alpha, _, b = accsgd_coefficients(kappa, xi)
    return alpha, (1.0 - b) * (1.0 - eta * L)


def accsgd_rate_window(kappa: float, xi: float, L: float, rho: float) -> tuple[float, float]:
    """Open step-size window ((1 - rho*(kappa+0.7*xi)/kappa)/L, 1/L).

    Inside it the second nominal value (1-b)(1-eta*L) lies in (0, rho).
    The lower bound can be negative: when rho exceeds kappa/(kappa+0.7*xi)
    even a (slightly) negative step keeps that value below rho.
    """
    if L <= 0.0:
        raise ValueError("L must be positive")
    accsgd_coefficients(kappa, xi)  # validates the parameter ranges
    lo = (1.0 - rho * (kappa + 0.7 * xi) / kappa) / L
    hi = 1.0 / L
    return lo, hi


@dataclass
class AccsgdVerdict:
    """Outcome of the two-clause check for the accelerated system."""

    stable: bool
    alpha_ok: bool  # 0 < alpha < rho
    eta_window: tuple[float, float]
    eta_in_window: bool
    nominal_eigenvalues: tuple[float, float]


def accsgd_stability(
    kappa: float, xi: float, eta: float, L: float, rho: float
) -> AccsgdVerdict:
    """Check both clauses: alpha below rho, and eta inside the open window.

    Together they are equivalent to both nominal values lying strictly
    inside (0, rho). Because the nominal pair is not the true spectrum of
    the state matrix, this verdict can disagree with lyapunov_verdict near
    the boundaries; the latter is the ground truth.
    """
    alpha, _, _ = accsgd_coefficients(kappa, xi)
    window = accsgd_rate_window(kappa, xi, L, rho)
    alpha_ok = 0.0 < alpha < rho
    eta_in = window[0] < eta < window[1]
    return AccsgdVerdict(
        stable=alpha_ok and eta_in,
        alpha_ok=alpha_ok,
        eta_window=window,
        eta_in_window=eta_in,
        nominal_eigenvalues=accsgd_nominal_eigenvalues(kappa, xi, eta, L),
    )


# --- certificates and simulation ---


@dataclass
class StabilityVerdict:
    """Certificate outcome for one 2x2 system at one rate."""

    stable: bool
    rho_used: float
    spectral_radius: float
    lyapunov_p: Matrix2 | None
    cond_p: float | None
    method: str


def lyapunov_verdict(m: Matrix2, rho: float) -> StabilityVerdict:
    """Certify contraction at rate rho via the discrete Lyapunov solve.

    The verdict is the certificate's feasibility; it is cross-checked
    against the spectral radius and a disagreement farther than
    AGREEMENT_TOL from the boundary raises ConsistencyError (the two
    routes are equivalent for 2x2 systems).
    """
    sr = spectral_radius2(m)
    boundary = abs(sr - rho) <= AGREEMENT_TOL
    try:
        p = solve_discrete_lyapunov2(m, rho)
    except SingularSystemError:
        # resonance can only happen when the system is not contracting
        if sr < rho - AGREEMENT_TOL:
            raise ConsistencyError(
                f"singular certificate solve with spectral radius {sr} < rho {rho}"
            )
        p = None
    feasible = p is not None
    if feasible != (sr < rho) and not boundary:
        raise ConsistencyError(
            f"certificate feasibility {feasible} contradicts spectral radius "
            f"{sr} vs rho {rho}"
        )
    return StabilityVerdict(
        stable=feasible,
        rho_used=rho,
        spectral_radius=sr,
        lyapunov_p=p,
        cond_p=cond2(p) if feasible else None,
        method="lmi",
    )


@dataclass
class DecayReport:
    """Envelope statistics of a simulated trajectory against rho^t decay."""

    max_ratio: float  # max over t of ||z_t|| / (rho^t ||z_0||)
    bound: float | None  # sqrt(cond(P)) when a certificate was supplied
    within_bound: bool | None
    overflowed: bool

    @property
    def stable(self) -> bool:
        return not self.overflowed


def simulate_factors(factors, z0: float, rho: float) -> DecayReport:
    """Iterate the scalar system z <- f_t * z and measure the envelope."""
    z = float(z0)
    if z == 0.0:
        return DecayReport(0.0, None, None, False)
    scale = abs(z)
    max_ratio = 1.0
    pow_rho = 1.0
    for f in factors:
        z *= f
        pow_rho *= rho
        if not math.isfinite(z) or abs(z) > 1e150:
            return DecayReport(math.inf, None, None, True)
        max_ratio = max(max_ratio, abs(z) / (pow_rho * scale))
    return DecayReport(max_ratio, None, None, False)


def simulate_system(
    matrices, zeta0: np.ndarray, rho: float, p: Matrix2 | None = None
) -> DecayReport:
    """Iterate z <- M_t z over the matrix sequence and measure the envelope.

    When a certificate P is supplied the observed envelope is compared
    against sqrt(cond(P)), the bound the certificate promises.
    """
    z = np.asarray(zeta0, dtype=np.float64).copy()
    scale = float(np.linalg.norm(z))
    bound = math.sqrt(cond2(p)) if p is not None else None
    if scale == 0.0:
        return DecayReport(0.0, bound, True if bound is not None else None, False)
    max_ratio = 1.0
    pow_rho = 1.0
    for m in matrices:
        a = m.as_array() if isinstance(m, Matrix2) else np.asarray(m, dtype=np.float64)
        z = a @ z
        pow_rho *= rho
        norm = float(np.linalg.norm(z))
        if not math.isfinite(norm) or norm > 1e150:
            return DecayReport(math.inf, bound, False if bound is not None else None, True)
        max_ratio = max(max_ratio, norm / (pow_rho * scale))
    within = (max_ratio <= bound * (1.0 + 1e-9)) if bound is not None else None
    return DecayReport(max_ratio, bound, within, False)


@dataclass
class SequenceCertificate:
    """Common certificate attempt for a time-varying matrix sequence."""

    p: Matrix2 | None
    cond_p: float | None
    valid_for_all: bool
    per_step_radii: list[float]


def common_certificate(matrices, rho: float) -> SequenceCertificate:
    """Try one P (from the first matrix) against every later step.

    If the first-step certificate fails somewhere, fall back to reporting
    per-step spectral radii so callers can still certify step by step.
    """
    matrices = list(matrices)
    radii = [spectral_radius2(m) for m in matrices]
    if not matrices:
        return SequenceCertificate(None, None, False, radii)
    try:
        p = solve_discrete_lyapunov2(matrices[0], rho)
    except SingularSystemError:
        p = None
    if p is None:
        return SequenceCertificate(None, None, False, radii)
    pa = p.as_array()
    r2 = rho * rho
    for m in matrices:
        a = m.as_array()
        s = a.T @ pa @ a - r2 * pa
        # negative definiteness of the symmetric residual
        if not (s[0, 0] < 0.0 and np.linalg.det(s) > 0.0):
            return SequenceCertificate(p, cond2(p), False, radii)
    return SequenceCertificate(p, cond2(p), True, radii)


def sqrt_vhat_representatives(vhat: np.ndarray) -> dict[str, float]:
    """Scalar stand-ins for a per-coordinate running max of second moments.

    The 2x2 analysis treats sqrt(vhat) as a scalar while the optimizer
    keeps a vector; evaluating the system at the min, mean and max
    brackets the truth for a live run.
    """
    vhat = np.asarray(vhat, dtype=np.float64)
    if vhat.size == 0 or np.any(vhat < 0.0):
        raise ValueError("vhat must be non-empty and non-negative")
    s = np.sqrt(vhat)
    return {"min": float(s.min()), "mean": float(s.mean()), "max": float(s.max())}
