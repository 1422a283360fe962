"""Validation of averaged predictions by direct piecewise-smooth integration.

An amplitude certified as a simple zero of the averaged pair is mapped
to a reduced-frame initial condition, integrated over the resonant
window, and judged by the return-map gap of the corresponding orbit in
the original frame (amplitude ε times the reduced state), which shrinks
like ε² at a correct prediction.  The reduced-frame gap and its
orbit-family projection are kept alongside: the projection is the part
the averaged pair controls directly and separates a correct prediction
from a wrong one.  The same prediction can be refined to the true fixed
point of the return map and checked against the full nonlinear pendulum
in the original frame.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .averaging import ZeroCertificate
from .errors import (
    DomainError,
    PendavgError,
    RefinementDegenerateError,
)
from .filippov import (
    CrossingReport,
    Trajectory,
    crossing_hypothesis_check,
    integrate,
    integrate_field,
)
from .model import (
    JordanTransform,
    PhysicalParams,
    ReducedParams,
    SpectralData,
    jordan_transform,
    nonlinear_accelerations,
    reduce_params,
    spectral_data,
)
from .perturbation import PerturbationSpec

SWEEP_MIN_SAMPLES = 4
SWEEP_MIN_RATIO = 8.0
REFINE_MAX_ITER = 30
REFINE_TOL = 1e-11
REFINE_REBUILD_EVERY = 8
DEGENERATE_SV_RTOL = 1e-6
EXPONENT_WINDOW = (1.8, 2.2)
FAMILY_NOISE_FLOOR = 1e-10
FAMILY_EXPONENT_MIN = 1.5
VERIFY_RTOL = 1e-12
VERIFY_ATOL = 1e-14


@dataclass(frozen=True)
class PredictedOrbit:
    """Initial condition and window predicted for a persistent orbit.

    ``initial_state`` lives in the reduced frame at τ = 0; the physical
    orbit is recovered through the scalings φ = ε·θ and t = α·τ.
    """

    family: int
    p: int
    amplitude: np.ndarray
    initial_state: np.ndarray
    period_tau: float
    period_t: float
    zero: Optional[ZeroCertificate] = None


@dataclass(frozen=True)
class PoincareResult:
    """Return-map gap of one verification integration.

    ``residual`` is the return-map gap norm of the orbit in the
    original (pendulum) frame, which carries one power of ε from the
    amplitude scaling on top of the first-order displacement and so
    shrinks like ε² at a correct prediction.  ``residual_full`` is the
    reduced-frame four-dimensional gap norm (first order in ε);
    ``residual_family`` is its component in the orbit-family plane, the
    part the averaged pair controls directly, which separates a correct
    prediction (second order) from a wrong one (first order).
    """

    epsilon: float
    residual: float
    residual_full: float
    residual_family: float
    gap: np.ndarray
    jordan_gap: np.ndarray
    events_ok: bool
    crossing: Optional[CrossingReport]
    trajectory: Optional[Trajectory]
    flag: Optional[str] = None
    flag_code: int = 0


@dataclass(frozen=True)
class RefinementResult:
    """Newton-shooting fixed point of the return map."""

    state: np.ndarray
    residual: float
    iterations: int
    converged: bool
    monodromy: np.ndarray


@dataclass
class SweepReport:
    """Residual scaling of one prediction across an ε ladder."""

    samples: List[PoincareResult]
    fitted_exponent: float
    limit_gap: List[float]
    valid: bool

    @property
    def epsilons(self) -> List[float]:
        return [s.epsilon for s in self.samples]

    @property
    def residuals(self) -> List[float]:
        return [s.residual for s in self.samples]

    @property
    def family_exponent(self) -> float:
        return fit_exponent(
            self.epsilons, [s.residual_family for s in self.samples]
        )

    @property
    def family_consistent(self) -> bool:
        """True when the in-family residual behaves like a genuine zero.

        A correct prediction leaves only a second-order in-family residual,
        so the fitted slope stays near 2; a wrong sgn convention leaves a
        first-order one and the slope drops to about 1.  Exactly solvable
        perturbations produce residuals at solver noise, which also counts
        as consistent.
        """
        values = [s.residual_family for s in self.samples]
        if all(v < FAMILY_NOISE_FLOOR for v in values):
            return True
        exponent = self.family_exponent
        return math.isfinite(exponent) and exponent >= FAMILY_EXPONENT_MIN

    def events_summary(self) -> dict:
        total = sum(s.crossing.n_events for s in self.samples if s.crossing is not None)
        margins = [
            s.crossing.margin
            for s in self.samples
            if s.crossing is not None and math.isfinite(s.crossing.margin)
        ]
        return {
            "total_events": total,
            "all_crossings": all(s.events_ok for s in self.samples),
            "min_margin": min(margins) if margins else None,
        }

    def to_json_dict(self) -> dict:
        return {
            "epsilons": self.epsilons,
            "residuals": self.residuals,
            "exponent": self.fitted_exponent,
            "valid": self.valid,
            "residuals_reduced": [s.residual_full for s in self.samples],
            "residuals_family": [s.residual_family for s in self.samples],
            "family_exponent": self.family_exponent,
            "family_consistent": self.family_consistent,
            "limit_gap": self.limit_gap,
            "events_summary": self.events_summary(),
        }


def to_physical_frame(state_reduced, eps: float, alpha: float) -> np.ndarray:
    """Reduced-frame state (per-τ velocities) to the pendulum frame."""
    x, y, z, w = np.asarray(state_reduced, dtype=float)
    return np.array([eps * x, eps * y / alpha, eps * z, eps * w / alpha])


def to_reduced_frame(state_physical, eps: float, alpha: float) -> np.ndarray:
    """Pendulum-frame state (per-t velocities) to the reduced frame."""
    if eps == 0.0:
        raise DomainError("the reduced frame is undefined at eps = 0")
    p1, dp1, p2, dp2 = np.asarray(state_physical, dtype=float)
    return np.array([p1 / eps, alpha * dp1 / eps, p2 / eps, alpha * dp2 / eps])


def orbit_from_amplitude(
    amplitude,
    family: int,
    transform: JordanTransform,
    spectral: SpectralData,
    reduced: ReducedParams,
    p: int = 1,
    zero: Optional[ZeroCertificate] = None,
) -> PredictedOrbit:
    """Predicted orbit for an explicit family-plane amplitude."""
    if family not in (1, 2):
        raise DomainError(f"family must be 1 or 2, got {family}")
    if p < 1:
        raise DomainError(f"resonance order p must be a positive integer, got {p}")
    amplitude = np.asarray(amplitude, dtype=float)
    if amplitude.shape != (2,):
        raise DomainError("amplitude must be a pair")
    jordan_point = np.zeros(4)
    offset = 0 if family == 1 else 2
    jordan_point[offset : offset + 2] = amplitude
    initial = transform.inverse @ jordan_point
    period_tau = p * spectral.period(family)
    return PredictedOrbit(
        family=family,
        p=p,
        amplitude=amplitude,
        initial_state=initial,
        period_tau=period_tau,
        period_t=reduced.alpha * period_tau,
        zero=zero,
    )


def predicted_initial_state(
    cert: ZeroCertificate,
    family: int,
    transform: JordanTransform,
    spectral: SpectralData,
    reduced: ReducedParams,
    p: int = 1,
) -> PredictedOrbit:
    """Map a certified simple zero to its predicted initial condition."""
    if not cert.simple:
        raise DomainError("the certificate does not certify a simple zero")
    return orbit_from_amplitude(
        cert.point, family, transform, spectral, reduced, p=p, zero=cert
    )


def _family_slice(family: int) -> slice:
    return slice(0, 2) if family == 1 else slice(2, 4)


def _package_result(
    eps: float,
    family: int,
    transform: JordanTransform,
    traj: Trajectory,
) -> PoincareResult:
    gap = traj.final_state - traj.initial_state
    jordan_gap = transform.forward @ gap
    full = float(np.linalg.norm(gap))
    report = crossing_hypothesis_check(traj)
    return PoincareResult(
        epsilon=eps,
        residual=abs(eps) * full,
        residual_full=full,
        residual_family=float(np.linalg.norm(jordan_gap[_family_slice(family)])),
        gap=gap,
        jordan_gap=jordan_gap,
        events_ok=report.ok,
        crossing=report,
        trajectory=traj,
    )


def _flagged_result(
    eps: float, message: str, traj: Optional[Trajectory], code: int = 1
) -> PoincareResult:
    return PoincareResult(
        epsilon=eps,
        residual=float("nan"),
        residual_full=float("nan"),
        residual_family=float("nan"),
        gap=np.full(4, np.nan),
        jordan_gap=np.full(4, np.nan),
        events_ok=False,
        crossing=crossing_hypothesis_check(traj) if traj is not None else None,
        trajectory=traj,
        flag=message,
        flag_code=code,
    )


def _check_spec_matches(orbit: PredictedOrbit, spec: PerturbationSpec):
    if spec.family != orbit.family:
        raise DomainError(
            f"perturbation is stated for family {spec.family}, orbit is family {orbit.family}"
        )
    if spec.p != orbit.p:
        raise DomainError(
            f"perturbation resonance order p = {spec.p} does not match orbit p = {orbit.p}"
        )


def poincare_residual(
    orbit: PredictedOrbit,
    spec: PerturbationSpec,
    reduced: ReducedParams,
    spectral: SpectralData,
    eps: float,
    *,
    rtol: float = VERIFY_RTOL,
    atol: float = VERIFY_ATOL,
    max_events: int = 100_000,
) -> PoincareResult:
    """Return-map gap of the reduced system over the resonant window.

    Integration failures (stall, unresolved tangency, degenerate
    sliding) do not raise; they return a flagged result so that sweep
    aggregation can retain the failure.
    """
    _check_spec_matches(orbit, spec)
    transform = jordan_transform(reduced, spectral)
    try:
        traj = integrate(
            spec,
            reduced,
            spectral,
            eps,
            orbit.initial_state,
            (0.0, orbit.period_tau),
            rtol=rtol,
            atol=atol,
            max_events=max_events,
        )
    except PendavgError as exc:
        return _flagged_result(
            eps, str(exc), getattr(exc, "trajectory", None), code=exc.exit_code
        )
    return _package_result(eps, orbit.family, transform, traj)


def refine_periodic(
    orbit: PredictedOrbit,
    spec: PerturbationSpec,
    reduced: ReducedParams,
    spectral: SpectralData,
    eps: float,
    *,
    tol: float = REFINE_TOL,
    max_iter: int = REFINE_MAX_ITER,
    rtol: float = VERIFY_RTOL,
    atol: float = VERIFY_ATOL,
) -> RefinementResult:
    """Newton shooting from the prediction to a return-map fixed point.

    The monodromy matrix is estimated by finite differences and reused
    across iterations (rebuilt periodically), so each step costs one
    integration.  A singular shooting matrix, as at ε = 0 where the
    orbit family makes the return map non-isolated, raises a
    degenerate-refinement error.
    """
    _check_spec_matches(orbit, spec)

    def return_map(s: np.ndarray) -> np.ndarray:
        traj = integrate(
            spec,
            reduced,
            spectral,
            eps,
            s,
            (0.0, orbit.period_tau),
            rtol=rtol,
            atol=atol,
        )
        return traj.final_state

    def shooting_matrix(s: np.ndarray, image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        h = max(1e-7 * float(np.linalg.norm(s)), 1e-8)
        monodromy = np.empty((4, 4))
        for i in range(4):
            bumped = np.array(s, dtype=float)
            bumped[i] += h
            monodromy[:, i] = (return_map(bumped) - image) / h
        jac = monodromy - np.eye(4)
        smallest = np.linalg.svd(jac, compute_uv=False)[-1]
        if smallest < DEGENERATE_SV_RTOL * max(1.0, float(np.linalg.norm(jac))):
            raise RefinementDegenerateError(
                "the shooting matrix (monodromy - identity) is numerically singular; "
                "the return-map fixed point is not isolated at this eps"
            )
        return monodromy, jac

    s = np.array(orbit.initial_state, dtype=float)
    image = return_map(s)
    gap = image - s
    monodromy, jac = shooting_matrix(s, image)
    iterations = 0
    while iterations < max_iter:
        if float(np.linalg.norm(gap)) <= tol:
            return RefinementResult(
                state=s,
                residual=float(np.linalg.norm(gap)),
                iterations=iterations,
                converged=True,
                monodromy=monodromy,
            )
        iterations += 1
        step = np.linalg.solve(jac, -gap)
        s = s + step
        image = return_map(s)
        gap = image - s
        if iterations % REFINE_REBUILD_EVERY == 0:
            monodromy, jac = shooting_matrix(s, image)
    return RefinementResult(
        state=s,
        residual=float(np.linalg.norm(gap)),
        iterations=iterations,
        converged=float(np.linalg.norm(gap)) <= tol,
        monodromy=monodromy,
    )


def fit_exponent(epsilons: Sequence[float], residuals: Sequence[float]) -> float:
    """Least-squares slope of log residual against log ε."""
    eps_arr = np.asarray(list(epsilons), dtype=float)
    res_arr = np.asarray(list(residuals), dtype=float)
    mask = np.isfinite(res_arr) & (res_arr > 0.0) & np.isfinite(eps_arr) & (eps_arr > 0.0)
    if int(mask.sum()) < 2:
        return float("nan")
    slope = np.polyfit(np.log(eps_arr[mask]), np.log(res_arr[mask]), 1)[0]
    return float(slope)


def epsilon_sweep(
    orbit: PredictedOrbit,
    spec: PerturbationSpec,
    reduced: ReducedParams,
    spectral: SpectralData,
    eps_list: Sequence[float],
    *,
    refine: bool = True,
    rtol: float = VERIFY_RTOL,
    atol: float = VERIFY_ATOL,
    workers: int = 1,
) -> SweepReport:
    """Residual scaling across a decreasing ε ladder.

    Requires at least four strictly decreasing positive values spanning
    a factor of at least 8.  Entries are independent; with ``workers``
    greater than one they run on a thread pool and are merged back in
    the declared order.
    """
    eps_values = [float(e) for e in eps_list]
    if len(eps_values) < SWEEP_MIN_SAMPLES:
        raise DomainError(f"need at least {SWEEP_MIN_SAMPLES} eps samples, got {len(eps_values)}")
    if any(e <= 0.0 for e in eps_values):
        raise DomainError("eps samples must be positive")
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise DomainError("eps samples must be strictly decreasing")
    if eps_values[0] / eps_values[-1] < SWEEP_MIN_RATIO * (1.0 - 1e-12):
        raise DomainError(
            f"eps samples must span a factor of at least {SWEEP_MIN_RATIO}, "
            f"got {eps_values[0] / eps_values[-1]:.3g}"
        )

    def run_sample(eps: float) -> PoincareResult:
        return poincare_residual(
            orbit, spec, reduced, spectral, eps, rtol=rtol, atol=atol
        )

    def run_refine(eps: float) -> float:
        try:
            result = refine_periodic(
                orbit, spec, reduced, spectral, eps, rtol=rtol, atol=atol
            )
        except PendavgError:
            return float("nan")
        if not result.converged:
            return float("nan")
        return float(np.linalg.norm(result.state - orbit.initial_state))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(run_sample, eps_values))
            limit_gap = list(pool.map(run_refine, eps_values)) if refine else []
    else:
        samples = [run_sample(e) for e in eps_values]
        limit_gap = [run_refine(e) for e in eps_values] if refine else []

    exponent = fit_exponent(eps_values, [s.residual for s in samples])
    valid = all(s.events_ok and s.flag is None for s in samples)
    return SweepReport(
        samples=samples,
        fitted_exponent=exponent,
        limit_gap=limit_gap,
        valid=valid,
    )


def full_nonlinear_check(
    orbit: PredictedOrbit,
    phys: PhysicalParams,
    spec: PerturbationSpec,
    eps: float,
    *,
    rtol: float = VERIFY_RTOL,
    atol: float = VERIFY_ATOL,
    max_events: int = 100_000,
) -> PoincareResult:
    """Return-map gap of the full nonlinear pendulum in the original frame.

    The pendulum accelerations carry the perturbation mapped out of the
    reduced frame: the state-linear forms enter at order ε (their
    arguments are the original angles with velocities rescaled by α) and
    the periodic scalar terms at order ε², both divided by α² for the
    time change t = α·τ.  The residual is the original-frame gap norm,
    directly comparable with `poincare_residual`; the pulled-back
    reduced-frame gap and its family projection are kept alongside.
    """
    _check_spec_matches(orbit, spec)
    reduced = reduce_params(phys)
    spectral = spectral_data(reduced)
    transform = jordan_transform(reduced, spectral)
    alpha = reduced.alpha
    alpha_sq = alpha * alpha
    s0 = to_physical_frame(orbit.initial_state, eps, alpha)
    forms = spec.F
    scalars = spec.K

    def field(t: float, u: np.ndarray, signs: Tuple[float, float]) -> np.ndarray:
        phi1, dphi1, phi2, dphi2 = u
        dd1, dd2 = nonlinear_accelerations(phys, phi1, dphi1, phi2, dphi2)
        tau = t / alpha
        lin_state = np.array([phi1, alpha * dphi1, phi2, alpha * dphi2])
        per1 = (eps / alpha_sq) * (
            forms[0].evaluate(tau, lin_state) + forms[1].evaluate(tau, lin_state) * signs[0]
        ) + (eps * eps / alpha_sq) * (scalars[0](tau) + scalars[1](tau) * signs[0])
        per2 = (eps / alpha_sq) * (
            forms[2].evaluate(tau, lin_state) + forms[3].evaluate(tau, lin_state) * signs[1]
        ) + (eps * eps / alpha_sq) * (scalars[2](tau) + scalars[3](tau) * signs[1])
        return np.array([dphi1, dd1 + per1, dphi2, dd2 + per2])

    max_step = alpha * min(spectral.period1, spectral.period2) / 16.0
    try:
        traj = integrate_field(
            field,
            s0,
            (0.0, orbit.period_t),
            rtol=rtol,
            atol=atol,
            max_events=max_events,
            max_step=max_step,
            epsilon=eps,
        )
    except PendavgError as exc:
        return _flagged_result(
            eps, str(exc), getattr(exc, "trajectory", None), code=exc.exit_code
        )

    gap_phi = traj.final_state - traj.initial_state
    if eps == 0.0:
        gap_reduced = gap_phi
    else:
        # The frame map is linear, so it applies to the gap directly.
        gap_reduced = to_reduced_frame(gap_phi, eps, alpha)
    jordan_gap = transform.forward @ gap_reduced
    report = crossing_hypothesis_check(traj)
    return PoincareResult(
        epsilon=eps,
        residual=float(np.linalg.norm(gap_phi)),
        residual_full=float(np.linalg.norm(gap_reduced)),
        residual_family=float(np.linalg.norm(jordan_gap[_family_slice(orbit.family)])),
        gap=gap_reduced,
        jordan_gap=jordan_gap,
        events_ok=report.ok,
        crossing=report,
        trajectory=traj,
    )
