"""Detection-beam physics for ions displaced from the RF null.

An ion displaced by ``r`` from the trap axis rides the RF drive with an
oscillation amplitude ``A = sqrt(2) * (omega_secular / omega_rf) * r``.  A
detection beam of wavevector ``k`` at angle ``theta`` to the motion then
drives the ion with a phase-modulated field of modulation index
``n = k A cos(theta)``: the carrier is weighted by ``J_0(n)^2`` and each
micromotion sideband ``v`` by ``J_v(n)^2``, detuned by ``v`` times the drive
frequency.  Summing the Lorentzian-weighted sidebands gives the photon
scattering rate relative to an undisplaced ion,

    I(n)/I(0) = J_0(n)^2 + 2 * sum_v J_v(n)^2 / (1 + (2 v Omega / Gamma)^2),

which dips sharply at the zeros of ``J_0``.  Parking a neighbouring ion on
such a zero hides it from resonant detection light.

The second half of the module models what the remaining scattered light does
to a hidden ion's hyperfine ground states: optical pumping among the three
F=1 sublevels and, for the fit helpers, the depumping curve
``p(t) = (2/3)(1 - exp(-3 gamma t))`` of a bright state under equal-rate
scattering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.linalg import expm
from scipy.optimize import brentq, curve_fit

from .errors import ConfigError, DataFormatError, FitError

#: default number of sideband harmonics kept in the suppression sum
DEFAULT_HARMONIC_CUTOFF = 50

#: number of F=1 ground-state sublevels in the optical-pumping rate model
N_BRIGHT = 3

_CONFIG_KEYS = (
    "rf_frequency_hz",
    "secular_frequency_hz",
    "linewidth_hz",
    "wavelength_m",
    "beam_angle_deg",
    "displacement_m",
)


@dataclass(frozen=True)
class TrapBeamConfig:
    """Trap drive, ion displacement and detection-beam geometry.

    Frequencies may be supplied as ordinary or angular frequencies as long as
    the convention is consistent; only ratios and ``k * displacement`` enter
    the physics.
    """

    rf_frequency_hz: float
    secular_frequency_hz: float
    linewidth_hz: float
    wavelength_m: float
    beam_angle_deg: float
    displacement_m: float

    def __post_init__(self):
        for key in ("rf_frequency_hz", "secular_frequency_hz", "linewidth_hz", "wavelength_m"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive")
        if self.displacement_m < 0:
            raise ConfigError("displacement_m must be non-negative")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength_m

    @property
    def rf_over_linewidth(self) -> float:
        return self.rf_frequency_hz / self.linewidth_hz

    @classmethod
    def from_dict(cls, data: dict) -> "TrapBeamConfig":
        missing = [k for k in _CONFIG_KEYS if k not in data]
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        extra = [k for k in data if k not in _CONFIG_KEYS]
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        try:
            values = {k: float(data[k]) for k in _CONFIG_KEYS}
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"non-numeric config value: {exc}") from exc
        return cls(**values)

    @classmethod
    def from_json(cls, path) -> "TrapBeamConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config root in {path} must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in _CONFIG_KEYS}


def micromotion_amplitude(secular_frequency: float, rf_frequency: float,
                          displacement: float) -> float:
    """Excess-motion amplitude ``sqrt(2) * (omega_sec / omega_rf) * r``."""
    return math.sqrt(2.0) * (secular_frequency / rf_frequency) * displacement


def modulation_index(config: TrapBeamConfig,
                     displacement: float | np.ndarray | None = None):
    """Phase-modulation index ``n = k A cos(theta)`` for the detection beam.

    ``displacement`` overrides the config value when given (scalar or array),
    which is how displacement scans are computed.
    """
    r = config.displacement_m if displacement is None else np.asarray(displacement, float)
    amp = math.sqrt(2.0) * (config.secular_frequency_hz / config.rf_frequency_hz) * r
    return config.wavenumber * amp * math.cos(math.radians(config.beam_angle_deg))


def displacement_for_index(config: TrapBeamConfig, index: float) -> float:
    """Invert :func:`modulation_index` (it is linear in the displacement)."""
    slope = modulation_index(config, displacement=1.0)
    # angle-free slope sets the scale; a beam this close to perpendicular
    # cannot be inverted meaningfully
    scale = (config.wavenumber * math.sqrt(2.0)
             * config.secular_frequency_hz / config.rf_frequency_hz)
    if abs(slope) < 1e-9 * scale:
        raise ConfigError("modulation index does not depend on displacement "
                          "(beam perpendicular to the motion?)")
    return float(index / slope)


def suppression_factor(index, rf_over_linewidth: float,
                       harmonic_cutoff: int = DEFAULT_HARMONIC_CUTOFF):
    """Scattering rate relative to an undisplaced ion.

    Parameters
    ----------
    index : float or array_like
        Modulation index ``n``.
    rf_over_linewidth : float
        RF drive frequency over the transition linewidth, ``Omega / Gamma``
        (same frequency convention for both).
    harmonic_cutoff : int
        Highest sideband order kept; ``J_v(n)`` decays super-exponentially
        past ``v ~ n`` so the default is far more than enough for ``n < 30``.

    Returns
    -------
    float or ndarray, in (0, 1]; equals 1 at ``n = 0``.
    """
    if rf_over_linewidth <= 0:
        raise ValueError("rf_over_linewidth must be positive")
    if harmonic_cutoff < 1:
        raise ValueError("harmonic_cutoff must be at least 1")
    n = np.asarray(index, dtype=float)
    total = special.j0(n) ** 2
    for v in range(1, harmonic_cutoff + 1):
        weight = 1.0 / (1.0 + (2.0 * v * rf_over_linewidth) ** 2)
        total = total + 2.0 * weight * special.jv(v, n) ** 2
    if np.ndim(index) == 0:
        return float(total)
    return total


def carrier_null_index(bracket: tuple[float, float]) -> float:
    """Root of ``J_0`` inside ``bracket`` (a carrier-extinction point)."""
    lo, hi = bracket
    flo, fhi = special.j0(lo), special.j0(hi)
    if flo * fhi >= 0:
        raise ValueError(f"bracket {bracket} does not straddle a J0 zero")
    return float(brentq(special.j0, lo, hi, xtol=1e-14, rtol=8.9e-16))


def first_null_modulation_index(bracket: tuple[float, float] = (2.0, 3.0)) -> float:
    """The smallest modulation index that extinguishes the carrier (~2.4048)."""
    return carrier_null_index(bracket)


def suppression_scan(config: TrapBeamConfig, displacements: np.ndarray,
                     harmonic_cutoff: int = DEFAULT_HARMONIC_CUTOFF):
    """Modulation index and suppression for an array of displacements."""
    disp = np.asarray(displacements, dtype=float)
    idx = modulation_index(config, displacement=disp)
    sup = suppression_factor(idx, config.rf_over_linewidth, harmonic_cutoff)
    return idx, sup


# ---------------------------------------------------------------------------
# optical pumping among the bright (F=1) sublevels


def depump_probability(gamma: float, t):
    """Probability that a bright state has pumped to dark after exposure ``t``.

    Equal-rate scattering at ``gamma`` per final state gives
    ``p(t) = (2/3)(1 - exp(-3 gamma t))``; the 2/3 asymptote is the uniform
    population of the two field-insensitive neighbours of the initial state.
    """
    t = np.asarray(t, dtype=float)
    out = (2.0 / 3.0) * (1.0 - np.exp(-3.0 * gamma * t))
    if np.ndim(t) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class RateModel:
    """Scattering rates among the three bright sublevels.

    ``rates[a, b]`` is the rate from sublevel ``a`` to sublevel ``b`` (indices
    0..2); the diagonal holds elastic self-scattering, which leaves
    populations alone but matters for coherence damping elsewhere.
    """

    rates: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        if r.shape != (N_BRIGHT, N_BRIGHT):
            raise ValueError(f"rates must be {N_BRIGHT}x{N_BRIGHT}, got {r.shape}")
        if np.any(r < 0):
            raise ValueError("rates must be non-negative")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "rates", r)

    @classmethod
    def equal_rates(cls, gamma: float) -> "RateModel":
        """Every transition (elastic included) at the same rate ``gamma``."""
        if gamma < 0:
            raise ValueError("gamma must be non-negative")
        return cls(np.full((N_BRIGHT, N_BRIGHT), float(gamma)))

    @classmethod
    def from_physics(cls, rabi_rates, detunings, linewidth: float) -> "RateModel":
        """Lorentzian scattering rates, independent of the final sublevel.

        Each source level ``a`` scatters at
        ``R_a = rabi_rates[a]**2 * linewidth / (linewidth**2 / 4 + detunings[a]**2)``
        into every final sublevel (elastic included) with equal weight.
        """
        rabi = np.asarray(rabi_rates, dtype=float)
        det = np.asarray(detunings, dtype=float)
        if rabi.shape != (N_BRIGHT,) or det.shape != (N_BRIGHT,):
            raise ValueError(f"need {N_BRIGHT} Rabi rates and detunings")
        if linewidth <= 0:
            raise ValueError("linewidth must be positive")
        per_source = rabi ** 2 * linewidth / (linewidth ** 2 / 4.0 + det ** 2)
        return cls(np.repeat(per_source[:, None], N_BRIGHT, axis=1))

    def generator(self) -> np.ndarray:
        """Population-evolution generator G with ``dp/dt = G p``."""
        r = self.rates
        g = r.T.copy()
        np.fill_diagonal(g, 0.0)
        out_rates = r.sum(axis=1) - np.diag(r)  # elastic jumps do not move population
        g[np.diag_indices(N_BRIGHT)] = -out_rates
        return g

    def total_rates(self) -> np.ndarray:
        """Total scattering rate per source level, elastic term included."""
        return self.rates.sum(axis=1)

    def evolve(self, populations, times):
        """Populations at the requested times.

        Diagonalises the generator once; falls back to matrix exponentials
        when the eigenbasis is ill-conditioned.

        Returns an array of shape ``(len(times), 3)``, or ``(3,)`` for a
        scalar time.
        """
        p0 = np.asarray(populations, dtype=float)
        if p0.shape != (N_BRIGHT,):
            raise ValueError(f"populations must have shape ({N_BRIGHT},)")
        if np.any(p0 < -1e-12):
            raise ValueError("populations must be non-negative")
        scalar = np.ndim(times) == 0
        ts = np.atleast_1d(np.asarray(times, dtype=float))
        g = self.generator()
        vals, vecs = np.linalg.eig(g)
        if np.linalg.cond(vecs) < 1e8:
            coeffs = np.linalg.solve(vecs, p0.astype(complex))
            out = np.einsum("tk,ik,k->ti", np.exp(np.outer(ts, vals)), vecs, coeffs)
            residue = float(np.max(np.abs(out.imag)))
            if residue > 1e-9:  # pragma: no cover - real generator, tiny residues
                raise ArithmeticError(f"imaginary residue {residue:.3e} in evolution")
            out = out.real
        else:  # pragma: no cover - needs a nearly defective generator
            out = np.stack([expm(g * t) @ p0 for t in ts])
        return out[0] if scalar else out

    def steady_state(self) -> np.ndarray:
        """Stationary populations (eigenvector of the generator at zero)."""
        vals, vecs = np.linalg.eig(self.generator())
        k = int(np.argmin(np.abs(vals)))
        v = vecs[:, k].real
        total = v.sum()
        if abs(total) < 1e-12:
            raise ArithmeticError("degenerate stationary vector")
        v = v / total
        return np.clip(v, 0.0, None)


# ---------------------------------------------------------------------------
# depump-curve fitting

BRIGHT_ASYMPTOTE = 2.0 / 3.0


@dataclass(frozen=True)
class DepumpFit:
    """Result of fitting ``p(t) = amplitude * (1 - exp(-3 gamma t))``."""

    gamma: float
    gamma_sigma: float
    amplitude: float
    amplitude_sigma: float
    free_amplitude: bool

    @property
    def time_constant(self) -> float:
        return 1.0 / self.gamma

    @property
    def time_constant_sigma(self) -> float:
        return self.gamma_sigma / self.gamma ** 2


def _depump_sigma(fractions: np.ndarray, shots: np.ndarray) -> np.ndarray:
    # binomial error bars with a mild regularisation so 0/1 fractions stay usable
    smoothed = (fractions * shots + 1.0) / (shots + 2.0)
    return np.sqrt(smoothed * (1.0 - smoothed) / shots)


def fit_depump(times, dark_fractions, shots=None,
               free_amplitude: bool = False) -> DepumpFit:
    """Fit the bright-state depumping curve and return the pumping rate.

    Parameters
    ----------
    times, dark_fractions : array_like
        Exposure times and the measured dark-outcome fractions.
    shots : array_like or int, optional
        Shots behind each fraction; enables binomial weighting.
    free_amplitude : bool
        Fit the asymptote too instead of pinning it at 2/3.
    """
    t = np.asarray(times, dtype=float)
    f = np.asarray(dark_fractions, dtype=float)
    if t.shape != f.shape or t.ndim != 1:
        raise DataFormatError("times and dark_fractions must be 1-D and equal length")
    if t.size < (2 if free_amplitude else 1) + 1:
        raise DataFormatError("not enough points to constrain the depump fit")
    if np.any(f < 0) or np.any(f > 1):
        raise DataFormatError("dark fractions must lie in [0, 1]")
    if np.any(t < 0):
        raise DataFormatError("times must be non-negative")

    sigma = None
    if shots is not None:
        n = np.broadcast_to(np.asarray(shots, dtype=float), t.shape)
        if np.any(n <= 0):
            raise DataFormatError("shots must be positive")
        sigma = _depump_sigma(f, n)

    # initial rate from the first half-rise crossing
    a0 = max(float(f.max()), 1e-3) if free_amplitude else BRIGHT_ASYMPTOTE
    above = np.nonzero(f >= 0.5 * a0)[0]
    t_half = t[above[0]] if above.size and t[above[0]] > 0 else max(float(np.median(t)), 1e-12)
    gamma0 = math.log(2.0) / (3.0 * t_half)

    try:
        if free_amplitude:
            popt, pcov = curve_fit(
                lambda tt, g, a: a * (1.0 - np.exp(-3.0 * g * tt)),
                t, f, p0=[gamma0, a0], sigma=sigma,
                absolute_sigma=sigma is not None,
                bounds=([0.0, 0.0], [np.inf, 1.0]), maxfev=10000,
            )
            gamma, amp = popt
            gamma_sig, amp_sig = np.sqrt(np.diag(pcov))
        else:
            popt, pcov = curve_fit(
                lambda tt, g: BRIGHT_ASYMPTOTE * (1.0 - np.exp(-3.0 * g * tt)),
                t, f, p0=[gamma0], sigma=sigma,
                absolute_sigma=sigma is not None,
                bounds=(0.0, np.inf), maxfev=10000,
            )
            gamma, amp = popt[0], BRIGHT_ASYMPTOTE
            gamma_sig, amp_sig = float(np.sqrt(pcov[0, 0])), 0.0
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"depump fit failed: {exc}") from exc
    if not np.isfinite(gamma) or gamma <= 0:
        raise FitError(f"depump fit returned unusable rate {gamma!r}")
    return DepumpFit(float(gamma), float(gamma_sig), float(amp), float(amp_sig),
                     free_amplitude)
