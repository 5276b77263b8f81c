"""Single-channel SMAFC physics: comb efficiency, Stark echo control, time-bin analyzer.

The engine works with field amplitudes. Intensities quoted for the Stark
interference are recovered by squaring, so the Gaussian inhomogeneity factor
carries half the exponent in amplitude form.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
import math

import numpy as np
from scipy.optimize import minimize_scalar

LN2 = math.log(2.0)
DTILDE_FACTOR = math.sqrt(math.pi / (4 * LN2))
# pulse-duration mismatch below this fraction of 1/(4 Omega) is treated as exact
DURATION_RTOL = 1e-6
WINDOW_ATOL = 1e-15


@dataclass(frozen=True)
class CombConfig:
    """AFC parameters: tooth spacing ``delta`` (Hz), finesse, peak depth, ``gamma_tilde`` (1/s)."""

    delta: float
    finesse: float
    peak_depth: float
    gamma_tilde: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("comb spacing must be positive")
        if not self.finesse > 1:
            raise ValueError("finesse must exceed 1")
        if self.peak_depth < 0:
            raise ValueError("peak depth must be non-negative")
        if self.gamma_tilde < 0:
            raise ValueError("gamma_tilde must be non-negative")

    @property
    def effective_depth(self) -> float:
        return self.peak_depth / self.finesse * DTILDE_FACTOR

    @property
    def period(self) -> float:
        return 1.0 / self.delta

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CombConfig":
        return cls(**d)


def gamma_tilde_from_fwhm(fwhm_hz: float) -> float:
    """Convert a comb-tooth FWHM in Hz to the rate used in the efficiency law."""
    return 2 * math.pi * fwhm_hz / math.sqrt(8 * LN2)


def afc_efficiency(comb: CombConfig, t: float) -> float:
    """Echo efficiency ``d~^2 exp(-d~) exp(-t^2 g~^2)`` at storage time ``t``."""
    if t < 0:
        raise ValueError("storage time must be non-negative")
    dt = comb.effective_depth
    return dt * dt * math.exp(-dt) * math.exp(-(t * comb.gamma_tilde) ** 2)


def fit_gamma_tilde(comb: CombConfig, times, efficiencies) -> CombConfig:
    """Least-squares ``gamma_tilde`` for measured (time, efficiency) pairs.

    Finesse and peak depth stay fixed, so the zero-time efficiency is pinned
    and only the Gaussian decay rate is free. Returns a new config.
    """
    times = np.asarray(times, dtype=float)
    eff = np.asarray(efficiencies, dtype=float)
    if times.shape != eff.shape or times.size == 0:
        raise ValueError("need matching non-empty times and efficiencies")
    scale = 1.0 / times.max()
    dt = comb.effective_depth
    eta0 = dt * dt * math.exp(-dt)

    def cost(g):
        return float(np.sum((eta0 * np.exp(-(times * scale * g) ** 2) - eff) ** 2))

    res = minimize_scalar(cost, bounds=(0.0, 20.0), method="bounded", options={"xatol": 1e-12})
    return CombConfig(comb.delta, comb.finesse, comb.peak_depth, float(res.x * scale))


# ---------------------------------------------------------------------------
# Stark control

@dataclass(frozen=True)
class Pulse:
    start: float
    duration: float
    polarity: int

    def __post_init__(self):
        if self.polarity not in (1, -1):
            raise ValueError("pulse polarity must be +1 or -1")
        if self.duration < 0:
            raise ValueError("pulse duration must be non-negative")

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class StarkControl:
    """Stark coefficient (Hz per V/cm), field (V/cm), ``tau_inh`` (s) and pulse list."""

    stark_coefficient: float
    field: float
    tau_inh: float = math.inf
    pulses: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.field < 0:
            raise ValueError("field must be non-negative")
        if not self.tau_inh > 0:
            raise ValueError("tau_inh must be positive")
        pulses = tuple(p if isinstance(p, Pulse) else Pulse(*p) for p in self.pulses)
        for a, b in zip(pulses, pulses[1:]):
            if b.start < a.end - WINDOW_ATOL:
                raise ValueError("pulse windows must be time ordered and non-overlapping")
        object.__setattr__(self, "pulses", pulses)

    def with_pulses(self, pulses) -> "StarkControl":
        return StarkControl(self.stark_coefficient, self.field, self.tau_inh, tuple(pulses))

    def scaled_field(self, factor: float) -> "StarkControl":
        return StarkControl(self.stark_coefficient, self.field * factor, self.tau_inh, self.pulses)

    def to_dict(self) -> dict:
        tau = self.tau_inh if math.isfinite(self.tau_inh) else None
        return {
            "stark_coefficient": self.stark_coefficient,
            "field": self.field,
            "tau_inh": tau,
            "pulses": [[p.start, p.duration, p.polarity] for p in self.pulses],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StarkControl":
        tau = d.get("tau_inh")
        return cls(
            d["stark_coefficient"],
            d["field"],
            math.inf if tau is None else tau,
            tuple(Pulse(*p) for p in d.get("pulses", [])),
        )


def stark_frequency(ctrl: StarkControl) -> float:
    return ctrl.stark_coefficient * ctrl.field


def echo_amplitude_factor(ctrl: StarkControl, tau: float) -> float:
    """Signed echo amplitude after a Stark pulse of length ``tau``.

    Squaring gives ``exp(-tau^2 / tau_inh^2) cos^2(2 pi Omega tau)``.
    """
    if tau < 0:
        raise ValueError("pulse duration must be non-negative")
    envelope = math.exp(-0.5 * (tau / ctrl.tau_inh) ** 2) if math.isfinite(ctrl.tau_inh) else 1.0
    return envelope * math.cos(2 * math.pi * stark_frequency(ctrl) * tau)


def echo_intensity_factor(ctrl: StarkControl, tau: float) -> float:
    return echo_amplitude_factor(ctrl, tau) ** 2


def suppression_pulse_duration(ctrl: StarkControl) -> float:
    omega = stark_frequency(ctrl)
    if omega <= 0:
        raise ValueError("zero Stark shift cannot suppress the echo")
    return 1.0 / (4.0 * omega)


@dataclass(frozen=True)
class Emission:
    """Outcome of an SMAFC pulse sequence.

    ``order`` is ``None`` when the echo is suppressed. ``leakage`` is the
    residual first-echo amplitude left by an imperfect suppression pulse and
    ``leakage_efficiency`` the intensity it emits at ``1/delta``.
    """

    order: int | None
    time: float | None
    efficiency: float
    leakage: float = 0.0
    leakage_efficiency: float = 0.0

    @property
    def suppressed(self) -> bool:
        return self.order is None


def _in_window(p: Pulse, lo: float, hi: float) -> bool:
    return p.start >= lo - WINDOW_ATOL and p.end <= hi + WINDOW_ATOL


def emission_time(comb: CombConfig, ctrl: StarkControl) -> Emission:
    """Resolve when (and whether) the stored excitation is re-emitted.

    Pulse times are relative to absorption at ``t = 0``. No pulses gives the
    plain AFC echo at ``1/delta``; one pulse inside ``[0, 1/delta]``
    suppresses it; an opposite-polarity second pulse fully inside
    ``[(n-1)/delta, n/delta]`` recalls the ``n``-th echo.
    """
    period = comb.period
    pulses = ctrl.pulses
    if not pulses:
        return Emission(1, period, afc_efficiency(comb, period))
    if len(pulses) > 2:
        raise ValueError("at most two control pulses are supported")
    first = pulses[0]
    if not _in_window(first, 0.0, period):
        raise ValueError(f"first pulse [{first.start:g}, {first.end:g}] s lies outside [0, 1/delta]")
    ideal = suppression_pulse_duration(ctrl)
    leakage = 0.0
    if abs(first.duration - ideal) > DURATION_RTOL * ideal:
        leakage = abs(echo_amplitude_factor(ctrl, first.duration))
    leak_eff = leakage**2 * afc_efficiency(comb, period)
    if len(pulses) == 1:
        return Emission(None, None, 0.0, leakage, leak_eff)
    second = pulses[1]
    if second.polarity == first.polarity:
        raise ValueError("second pulse must have the opposite polarity")
    if second.start < first.end - WINDOW_ATOL:
        raise ValueError("second pulse starts before the first one ends")
    n = int(math.floor(second.start / period + WINDOW_ATOL)) + 1
    if not _in_window(second, (n - 1) * period, n * period):
        raise ValueError(f"second pulse straddles the echo at {n * period:g} s")
    t = n * period
    return Emission(n, t, (1.0 - leakage**2) * afc_efficiency(comb, t), leakage, leak_eff)


# ---------------------------------------------------------------------------
# time-bin qubits and the analyzer

@dataclass(frozen=True)
class TimeBinState:
    """``alpha |e> + beta |l>`` with early/late bins ``bin_separation`` apart."""

    alpha: complex
    beta: complex
    bin_separation: float = 200e-9

    def __post_init__(self):
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1.0) > 1e-12:
            raise ValueError("time-bin amplitudes are not normalized")
        if not self.bin_separation > 0:
            raise ValueError("bin separation must be positive")

    @classmethod
    def from_phase(cls, phase: float, bin_separation: float = 200e-9) -> "TimeBinState":
        """``(|e> + exp(i phase) |l>) / sqrt(2)``."""
        s = 1 / math.sqrt(2)
        return cls(complex(s), s * complex(np.exp(1j * phase)), bin_separation)

    @classmethod
    def early(cls, bin_separation: float = 200e-9) -> "TimeBinState":
        return cls(1.0 + 0j, 0j, bin_separation)

    @classmethod
    def late(cls, bin_separation: float = 200e-9) -> "TimeBinState":
        return cls(0j, 1.0 + 0j, bin_separation)

    @property
    def ket(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)


@dataclass(frozen=True)
class AnalyzerConfig:
    """AFC-based unbalanced interferometer.

    ``p0`` is the direct-transmission probability, ``p1`` the delayed-echo
    probability and ``detuning`` the comb frequency shift setting the phase.
    The three output bins only form a valid probability distribution when
    ``(sqrt(p0) + sqrt(p1))**2 <= 1``, which is enforced in addition to
    ``p0 + p1 <= 1``.
    """

    storage_time: float = 200e-9
    p0: float = 0.25
    p1: float = 0.25
    detuning: float = 0.0

    def __post_init__(self):
        if not (0 <= self.p0 <= 1 and 0 <= self.p1 <= 1):
            raise ValueError("p0 and p1 must lie in [0, 1]")
        if self.p0 + self.p1 > 1 + 1e-12:
            raise ValueError("p0 + p1 must not exceed 1")
        if (math.sqrt(self.p0) + math.sqrt(self.p1)) ** 2 > 1 + 1e-12:
            raise ValueError("(sqrt(p0) + sqrt(p1))^2 must not exceed 1")
        if not self.storage_time > 0:
            raise ValueError("storage time must be positive")

    @property
    def theta(self) -> float:
        return 2 * math.pi * self.detuning * self.storage_time

    def at_phase(self, theta: float) -> "AnalyzerConfig":
        return AnalyzerConfig(self.storage_time, self.p0, self.p1, theta / (2 * math.pi * self.storage_time))

    def to_dict(self) -> dict:
        return asdict(self)


def analyzer_project(qubit: TimeBinState, cfg: AnalyzerConfig, coherence: float = 1.0) -> np.ndarray:
    """Detection probabilities in the early, middle and late output bins.

    ``coherence`` scales the interference term; it is ``exp(-sigma^2 / 2)`` for
    Gaussian phase jitter of width ``sigma``.
    """
    if not math.isclose(qubit.bin_separation, cfg.storage_time, rel_tol=1e-9):
        raise ValueError("analyzer delay does not match the qubit bin separation")
    a, b = qubit.alpha, qubit.beta
    s0, s1 = math.sqrt(cfg.p0), math.sqrt(cfg.p1)
    cross = 2 * s0 * s1 * (a * np.conj(b) * np.exp(1j * cfg.theta)).real
    middle = cfg.p1 * abs(a) ** 2 + cfg.p0 * abs(b) ** 2 + coherence * cross
    return np.array([cfg.p0 * abs(a) ** 2, max(middle, 0.0), cfg.p1 * abs(b) ** 2])


def visibility(max_counts: float, min_counts: float) -> float:
    total = max_counts + min_counts
    return 0.0 if total <= 0 else (max_counts - min_counts) / total


def fidelity_from_visibility(v: float) -> float:
    return (v + 1.0) / 2.0


def phase_sigma_for_visibility(v: float) -> float:
    """Gaussian phase-jitter width that reduces an ideal fringe to visibility ``v``."""
    if not 0 < v <= 1:
        raise ValueError("visibility must lie in (0, 1]")
    return math.sqrt(-2.0 * math.log(v))
