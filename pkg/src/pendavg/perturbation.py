"""First-order perturbation data for the reduced pendulum system.

A perturbation consists of four periodic forcing scalars K₁..K₄ and four
linear forms F₁..F₄ whose coefficients d_i^j are periodic scalars.  They
enter the reduced system as the order-ε terms

    y′ += ε·(K₁(τ) + F₁(τ, s) + (K₂(τ) + F₂(τ, s))·sgn(x)),
    w′ += ε·(K₃(τ) + F₃(τ, s) + (K₄(τ) + F₄(τ, s))·sgn(z)),

with s = (x, y, z, w) and exact sgn (sgn(0) = 0).  A regularized variant
replaces sgn by the C¹ odd ramp s_δ.  Optional second-order remainders may
be attached but play no role in the averaged functions.

Periodic scalars accept scalar or array arguments.  Closed-form (constant
and single-harmonic) and tabulated (uniform grid, linear interpolation,
at least 256 samples per period) definitions are supported, plus a small
file format for user-supplied perturbations.
"""

from __future__ import annotations

import configparser
import csv
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .model import SpectralData

__all__ = [
    "PeriodicScalar",
    "LinearForm",
    "PerturbationSpec",
    "common_period",
    "eval_order1",
    "eval_order1_regularized",
    "smooth_sign",
    "builtin",
    "perturbation_from_file",
    "BUILTIN_NAMES",
]

MIN_TABLE_SAMPLES_PER_PERIOD = 256
PERIOD_DIVISIBILITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PeriodicScalar:
    """A periodic function of time with a declared period."""

    period: float
    eval: Callable

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0):
            raise DomainError(f"period must be a positive real, got {self.period!r}")

    def __call__(self, tau):
        return self.eval(tau)

    @staticmethod
    def constant(value: float, period: float) -> "PeriodicScalar":
        value = float(value)

        def f(tau):
            return np.asarray(tau, dtype=float) * 0.0 + value

        return PeriodicScalar(period=float(period), eval=f)

    @staticmethod
    def harmonic(kind: str, amplitude: float, omega: float) -> "PeriodicScalar":
        """amplitude·cos(ωτ) or amplitude·sin(ωτ)."""
        if kind not in ("cos", "sin"):
            raise DomainError(f"harmonic kind must be 'cos' or 'sin', got {kind!r}")
        if omega <= 0:
            raise DomainError(f"harmonic frequency must be positive, got {omega!r}")
        amplitude = float(amplitude)
        fn = np.cos if kind == "cos" else np.sin

        def f(tau):
            return amplitude * fn(omega * np.asarray(tau, dtype=float))

        return PeriodicScalar(period=2.0 * math.pi / omega, eval=f)

    @staticmethod
    def from_table(taus: Sequence[float], values: Sequence[float]) -> "PeriodicScalar":
        """Linearly interpolated periodic table on a uniform grid over [0, T).

        The grid must start at 0, be uniformly spaced, and resolve at least
        ``MIN_TABLE_SAMPLES_PER_PERIOD`` samples; the implied period is
        one spacing past the last knot.
        """
        taus = np.asarray(taus, dtype=float)
        values = np.asarray(values, dtype=float)
        if taus.ndim != 1 or taus.shape != values.shape:
            raise DomainError("table needs matching 1-d tau and value columns")
        if len(taus) < MIN_TABLE_SAMPLES_PER_PERIOD:
            raise DomainError(
                f"table resolves {len(taus)} samples per period, "
                f"need at least {MIN_TABLE_SAMPLES_PER_PERIOD}"
            )
        if abs(taus[0]) > 1e-12:
            raise DomainError("table grid must start at tau = 0")
        steps = np.diff(taus)
        dt = steps[0]
        if dt <= 0 or not np.allclose(steps, dt, rtol=1e-8, atol=1e-12):
            raise DomainError("table grid must be uniform and increasing")
        period = float(taus[-1] + dt)
        knots = np.append(taus, period)
        vals = np.append(values, values[0])

        def f(tau):
            phase = np.mod(np.asarray(tau, dtype=float), period)
            return np.interp(phase, knots, vals)

        return PeriodicScalar(period=period, eval=f)


@dataclass(frozen=True, eq=False)
class LinearForm:
    """Linear form d₁(τ)x + d₂(τ)y + d₃(τ)z + d₄(τ)w with periodic coefficients."""

    d1: PeriodicScalar
    d2: PeriodicScalar
    d3: PeriodicScalar
    d4: PeriodicScalar

    def __post_init__(self):
        self.common_coefficient_period()

    def coefficients(self) -> Tuple[PeriodicScalar, ...]:
        return (self.d1, self.d2, self.d3, self.d4)

    def common_coefficient_period(self) -> float:
        """Least common multiple of the coefficient periods.

        Periods must be pairwise commensurate with ratios expressible over
        denominators up to 4096; anything else raises DomainError.
        """
        base = min(c.period for c in self.coefficients())
        num_lcm, den_gcd = 1, 0
        for c in self.coefficients():
            ratio = c.period / base
            frac = Fraction(ratio).limit_denominator(4096)
            if frac <= 0 or abs(ratio - float(frac)) > PERIOD_DIVISIBILITY_TOL * max(1.0, ratio):
                raise DomainError(
                    "linear-form coefficients do not share a common period: "
                    f"{c.period!r} is incommensurate with {base!r}"
                )
            num_lcm = num_lcm * frac.numerator // math.gcd(num_lcm, frac.numerator)
            den_gcd = math.gcd(den_gcd, frac.denominator)
        return base * num_lcm / den_gcd

    def evaluate(self, tau, state):
        """Evaluate at scalar/array tau with state of shape (4,) or (4, n)."""
        state = np.asarray(state, dtype=float)
        return (
            self.d1(tau) * state[0]
            + self.d2(tau) * state[1]
            + self.d3(tau) * state[2]
            + self.d4(tau) * state[3]
        )

    @staticmethod
    def zero(period: float) -> "LinearForm":
        z = PeriodicScalar.constant(0.0, period)
        return LinearForm(z, z, z, z)


@dataclass(frozen=True, eq=False)
class PerturbationSpec:
    """The eight perturbation ingredients plus resonance bookkeeping.

    ``family`` selects which orbit family the forcing is resonant with and
    ``p`` how many times that orbit is traversed per forcing period.
    ``R`` optionally holds the two second-order remainder maps
    (tau, state, eps) → real for the y′ and w′ equations.
    """

    K: Tuple[PeriodicScalar, PeriodicScalar, PeriodicScalar, PeriodicScalar]
    F: Tuple[LinearForm, LinearForm, LinearForm, LinearForm]
    family: int = 1
    p: int = 1
    R: Optional[Tuple[Callable, Callable]] = field(default=None)

    def __post_init__(self):
        if self.family not in (1, 2):
            raise DomainError(f"family must be 1 or 2, got {self.family!r}")
        if self.p < 1 or int(self.p) != self.p:
            raise DomainError(f"traversal count p must be a positive integer, got {self.p!r}")
        if len(self.K) != 4 or len(self.F) != 4:
            raise DomainError("need exactly four forcing scalars and four linear forms")

    def component_periods(self) -> Tuple[float, ...]:
        periods = [k.period for k in self.K]
        for form in self.F:
            periods.extend(c.period for c in form.coefficients())
        return tuple(periods)

    def validate_against(self, spectral: SpectralData) -> None:
        """Check every component period divides p·T_family."""
        window = self.p * spectral.period(self.family)
        for period in self.component_periods():
            ratio = window / period
            if abs(ratio - round(ratio)) > PERIOD_DIVISIBILITY_TOL * max(1.0, abs(ratio)):
                raise DomainError(
                    f"component period {period!r} does not divide the averaging "
                    f"window p·T = {window!r} (ratio {ratio!r})"
                )


def common_period(ratios: Sequence, base_period: float):
    """Common traversal count and window from resonance ratios p_i:q_i.

    Each ratio may be a Fraction, an (p, q) pair, or a string "p:q"; it is
    normalized to lowest terms.  Returns (p, p·base_period) with p the lcm
    of the numerators.
    """
    if not ratios:
        raise DomainError("common_period needs at least one resonance ratio")
    numerators = []
    for r in ratios:
        if isinstance(r, str):
            num, _, den = r.partition(":")
            frac = Fraction(int(num), int(den or "1"))
        elif isinstance(r, Fraction):
            frac = r
        else:
            num, den = r
            frac = Fraction(int(num), int(den))
        if frac <= 0:
            raise DomainError(f"resonance ratio must be positive, got {r!r}")
        numerators.append(frac.numerator)
    p = math.lcm(*numerators)
    return p, p * base_period


def _sgn_terms(spec: PerturbationSpec, tau, state, sgn_x, sgn_z):
    k1, k2, k3, k4 = spec.K
    f1, f2, f3, f4 = spec.F
    f_y = k1(tau) + f1.evaluate(tau, state) + (k2(tau) + f2.evaluate(tau, state)) * sgn_x
    f_w = k3(tau) + f3.evaluate(tau, state) + (k4(tau) + f4.evaluate(tau, state)) * sgn_z
    return f_y, f_w


def eval_order1(spec: PerturbationSpec, tau, state):
    """Order-ε forcing of the y′ and w′ equations with exact sgn."""
    state = np.asarray(state, dtype=float)
    return _sgn_terms(spec, tau, state, np.sign(state[0]), np.sign(state[2]))


def eval_order1_with_signs(spec: PerturbationSpec, tau, state, sgn_x, sgn_z):
    """Order-ε forcing with both sgn values resolved by the caller.

    Event-driven integration fixes the region signs between switching
    events instead of re-deriving them from the state.
    """
    return _sgn_terms(spec, tau, np.asarray(state, dtype=float), sgn_x, sgn_z)


def smooth_sign(x, delta: float):
    """C¹ odd ramp s_δ: sign(x) for |x| ≥ δ, else x(3δ² − x²)/(2δ³)."""
    x = np.asarray(x, dtype=float)
    inner = x * (3.0 * delta * delta - x * x) / (2.0 * delta ** 3)
    return np.where(np.abs(x) >= delta, np.sign(x), inner)


def eval_order1_regularized(spec: PerturbationSpec, tau, state, delta: float):
    """Same as :func:`eval_order1` with sgn replaced by the ramp s_δ."""
    if not delta > 0:
        raise DomainError(f"regularization width delta must be positive, got {delta!r}")
    state = np.asarray(state, dtype=float)
    return _sgn_terms(spec, tau, state, smooth_sign(state[0], delta), smooth_sign(state[2], delta))


BUILTIN_NAMES = ("damped_forced", "damped_forced_escapement", "corollary_escapement")


def builtin(name: str, params: dict, spectral: SpectralData, family: int = 1, p: int = 1) -> PerturbationSpec:
    """Canonical test perturbations.

    * ``damped_forced``: K₁(τ) = γ·cos(ω_f τ), damping F₁ = −θ₁′ and
      F₃ = −θ₂′; parameter γ.
    * ``damped_forced_escapement``: the above plus constant escapement
      kicks K₂ = K₄ = κ; parameters γ, κ.
    * ``corollary_escapement``: F₁ = σ_d·θ₁′, F₃ = σ_d·θ₂′ and constants
      K₂ = K₄ = σ_e with σ_d, σ_e ∈ {−1, +1}.
    """
    window = p * spectral.period(family)
    omega = spectral.omega(family)
    zero_k = PeriodicScalar.constant(0.0, window)
    zero_f = LinearForm.zero(window)

    def damping(sigma):
        z = PeriodicScalar.constant(0.0, window)
        s = PeriodicScalar.constant(float(sigma), window)
        f1 = LinearForm(z, s, z, z)
        f3 = LinearForm(z, z, z, s)
        return f1, f3

    if name == "damped_forced" or name == "damped_forced_escapement":
        gamma = float(params["gamma"])
        k1 = PeriodicScalar.harmonic("cos", gamma, omega)
        f1, f3 = damping(-1.0)
        if name == "damped_forced":
            k2 = k4 = zero_k
        else:
            kappa = float(params["kappa"])
            k2 = PeriodicScalar.constant(kappa, window)
            k4 = PeriodicScalar.constant(kappa, window)
        spec = PerturbationSpec(K=(k1, k2, zero_k, k4), F=(f1, zero_f, f3, zero_f), family=family, p=p)
    elif name == "corollary_escapement":
        sigma_d = float(params["sigma_d"])
        sigma_e = float(params["sigma_e"])
        if sigma_d not in (-1.0, 1.0) or sigma_e not in (-1.0, 1.0):
            raise DomainError("corollary_escapement needs sigma_d, sigma_e in {-1, +1}")
        f1, f3 = damping(sigma_d)
        k2 = PeriodicScalar.constant(sigma_e, window)
        k4 = PeriodicScalar.constant(sigma_e, window)
        spec = PerturbationSpec(K=(zero_k, k2, zero_k, k4), F=(f1, zero_f, f3, zero_f), family=family, p=p)
    else:
        raise DomainError(f"unknown builtin perturbation {name!r}; known: {', '.join(BUILTIN_NAMES)}")
    spec.validate_against(spectral)
    return spec


def _parse_scalar_entry(entry: str, spectral: SpectralData, family: int, window: float, base_dir: str) -> PeriodicScalar:
    kind, _, rest = entry.strip().partition(":")
    kind = kind.strip().lower()
    if kind == "const":
        return PeriodicScalar.constant(float(rest), window)
    if kind in ("cos", "sin"):
        parts = [s.strip() for s in rest.split(",")]
        if len(parts) != 2:
            raise DomainError(f"{kind} entry needs '<amp>,<harmonic>', got {entry!r}")
        amp, harmonic = float(parts[0]), float(parts[1])
        if harmonic <= 0:
            raise DomainError(f"harmonic must be positive, got {entry!r}")
        return PeriodicScalar.harmonic(kind, amp, harmonic * spectral.omega(family))
    if kind == "table":
        path = rest.strip()
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        taus, values = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                taus.append(float(row[0]))
                values.append(float(row[1]))
        return PeriodicScalar.from_table(taus, values)
    raise DomainError(f"unknown scalar entry kind {kind!r} in {entry!r}")


def perturbation_from_file(path: str, spectral: SpectralData) -> PerturbationSpec:
    """Load a perturbation definition file.

    INI-style text with a single ``[perturbation]`` section.  Keys:
    ``family`` (1|2), ``p`` (positive integer), ``K1``..``K4`` for the
    forcing scalars and ``F1.d1``..``F4.d4`` for the linear-form
    coefficients.  Each value is one of ``const:<v>``,
    ``cos:<amp>,<harmonic>``, ``sin:<amp>,<harmonic>`` (harmonic counted
    relative to ω_family) or ``table:<csv-path>`` (two columns: tau,
    value).  Missing keys default to zero.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise DomainError(f"cannot read perturbation file {path!r}")
    if not parser.has_section("perturbation"):
        raise DomainError(f"perturbation file {path!r} lacks a [perturbation] section")
    section = parser["perturbation"]
    family = int(section.get("family", "1"))
    p = int(section.get("p", "1"))
    if family not in (1, 2):
        raise DomainError(f"family must be 1 or 2, got {family!r}")
    window = p * spectral.period(family)
    base_dir = os.path.dirname(os.path.abspath(path))

    def scalar(key):
        if key in section:
            return _parse_scalar_entry(section[key], spectral, family, window, base_dir)
        return PeriodicScalar.constant(0.0, window)

    known = {"family", "p"}
    ks = []
    for i in range(1, 5):
        ks.append(scalar(f"k{i}"))
        known.add(f"k{i}")
    fs = []
    for i in range(1, 5):
        coeffs = []
        for j in range(1, 5):
            coeffs.append(scalar(f"f{i}.d{j}"))
            known.add(f"f{i}.d{j}")
        fs.append(LinearForm(*coeffs))
    unknown = set(section.keys()) - known
    if unknown:
        raise DomainError(f"unknown perturbation keys: {sorted(unknown)}")
    spec = PerturbationSpec(K=tuple(ks), F=tuple(fs), family=family, p=p)
    spec.validate_against(spectral)
    return spec
