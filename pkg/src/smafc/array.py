"""The 11-channel memory array: per-channel recall, crosstalk, path qudits and photon counts."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from . import presets
from .afc import CombConfig, StarkControl, emission_time, stark_frequency, suppression_pulse_duration
from .quantum import ket_to_dm, normalize_ket

PROB_TOL = 1e-12


@dataclass(frozen=True)
class ChannelConfig:
    index: int
    comb: CombConfig
    stark: StarkControl
    path_efficiency: float = 0.5
    rf_frequency: float | None = None

    def __post_init__(self):
        if not 1 <= self.index <= presets.N_CHANNELS:
            raise ValueError(f"channel index must lie in [1, {presets.N_CHANNELS}]")
        if not 0.0 <= self.path_efficiency <= 1.0:
            raise ValueError("path efficiency must lie in [0, 1]")
        expected = presets.rf_frequency(self.index)
        if self.rf_frequency is None:
            object.__setattr__(self, "rf_frequency", expected)
        elif not math.isclose(self.rf_frequency, expected, rel_tol=0, abs_tol=1.0):
            raise ValueError(f"RF tone {self.rf_frequency} Hz is off the AOD grid for channel {self.index}")

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "comb": self.comb.to_dict(),
            "stark": self.stark.to_dict(),
            "path_efficiency": self.path_efficiency,
            "rf_frequency": self.rf_frequency,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelConfig":
        return cls(
            d["index"],
            CombConfig.from_dict(d["comb"]),
            StarkControl.from_dict(d["stark"]),
            d.get("path_efficiency", 0.5),
            d.get("rf_frequency"),
        )


def default_array(comb: CombConfig = presets.COMB_2MHZ,
                  stark: StarkControl = presets.STARK_1V56,
                  path_efficiency: float | None = None) -> list[ChannelConfig]:
    """Eleven identical combs with the bell-shaped path-efficiency profile."""
    return [
        ChannelConfig(i, comb, stark,
                      presets.path_efficiency_profile(i) if path_efficiency is None else path_efficiency)
        for i in range(1, presets.N_CHANNELS + 1)
    ]


@dataclass(frozen=True)
class CrosstalkModel:
    """Optical crosstalk in dB (``optical_db[i, j]``: light sent to ``i`` seen at ``j``)
    and the residual field fraction seen by neighbouring electrodes.

    Optical leakage is incoherent by default; ``coherent=True`` mixes amplitudes
    instead, for sensitivity studies.
    """

    optical_db: np.ndarray
    electrical_field_fraction: float = presets.RESIDUAL_FIELD_FRACTION
    coherent: bool = False

    def __post_init__(self):
        db = np.array(self.optical_db, dtype=float)
        if db.ndim != 2 or db.shape[0] != db.shape[1]:
            raise ValueError("optical crosstalk matrix must be square")
        if np.any(np.diag(db) != 0):
            raise ValueError("optical crosstalk diagonal must be 0 dB")
        if np.any(db > 0):
            raise ValueError("crosstalk cannot exceed 0 dB")
        if not 0 <= self.electrical_field_fraction <= 1:
            raise ValueError("electrical field fraction must lie in [0, 1]")
        db.setflags(write=False)
        object.__setattr__(self, "optical_db", db)

    @classmethod
    def uniform(cls, db: float = presets.OPTICAL_CROSSTALK_DB,
                electrical_field_fraction: float = presets.RESIDUAL_FIELD_FRACTION,
                n: int = presets.N_CHANNELS, coherent: bool = False) -> "CrosstalkModel":
        m = np.full((n, n), float(db))
        np.fill_diagonal(m, 0.0)
        return cls(m, electrical_field_fraction, coherent)

    @classmethod
    def none(cls, n: int = presets.N_CHANNELS) -> "CrosstalkModel":
        return cls.uniform(-math.inf, 0.0, n)

    def leakage(self) -> np.ndarray:
        """Intensity leakage ratios; zero on the diagonal."""
        with np.errstate(over="ignore"):
            lk = 10.0 ** (self.optical_db / 10.0)
        np.fill_diagonal(lk, 0.0)
        return lk

    def to_dict(self) -> dict:
        db = [[None if not math.isfinite(x) else x for x in row] for row in self.optical_db.tolist()]
        return {"optical_db": db, "electrical_field_fraction": self.electrical_field_fraction,
                "coherent": self.coherent}

    @classmethod
    def from_dict(cls, d: dict) -> "CrosstalkModel":
        db = [[-math.inf if x is None else x for x in row] for row in d["optical_db"]]
        return cls(np.array(db), d.get("electrical_field_fraction", 0.0), d.get("coherent", False))


def optical_crosstalk_db(counts_ij: float, counts_ii: float) -> float:
    """Crosstalk ``10 log10(n_ij / n_ii)`` in dB."""
    if counts_ii <= 0:
        raise ValueError("on-channel counts must be positive")
    if counts_ij <= 0:
        return -math.inf
    return 10.0 * math.log10(counts_ij / counts_ii)


def electrical_crosstalk_factor(neighbour: StarkControl, fraction: float, duration: float | None = None) -> float:
    """Echo amplitude factor a channel suffers from one pulse on its neighbour."""
    tau = suppression_pulse_duration(neighbour) if duration is None else duration
    return math.cos(2 * math.pi * fraction * stark_frequency(neighbour) * tau)


# ---------------------------------------------------------------------------
# path-encoded states

@dataclass(frozen=True)
class PathState:
    """``sum_n a_n |C_n>`` over the listed memory channels."""

    coefficients: tuple
    channels: tuple

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        chans = tuple(int(c) for c in self.channels)
        if len(coeffs) != len(chans):
            raise ValueError("one coefficient per channel required")
        if len(set(chans)) != len(chans):
            raise ValueError("channels must be distinct")
        if abs(sum(abs(c) ** 2 for c in coeffs) - 1.0) > 1e-12:
            raise ValueError("path state is not normalized")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "channels", chans)

    @classmethod
    def from_amplitudes(cls, amplitudes, channels) -> "PathState":
        return cls(tuple(normalize_ket(amplitudes)), tuple(channels))

    @classmethod
    def single(cls, channel: int) -> "PathState":
        return cls((1.0,), (channel,))

    @property
    def dim(self) -> int:
        return len(self.channels)

    def ket(self, channels=None) -> np.ndarray:
        """Amplitudes on ``channels`` (default: own channels); absent channels are 0."""
        channels = self.channels if channels is None else tuple(channels)
        lookup = dict(zip(self.channels, self.coefficients))
        return np.array([lookup.get(c, 0.0) for c in channels], dtype=complex)

    def to_dict(self) -> dict:
        return {"channels": list(self.channels),
                "re": [c.real for c in self.coefficients],
                "im": [c.imag for c in self.coefficients]}

    @classmethod
    def from_dict(cls, d: dict) -> "PathState":
        return cls.from_amplitudes(np.array(d["re"]) + 1j * np.array(d.get("im", [0] * len(d["re"]))),
                                   d["channels"])


def encode_measurement(setting: PathState, output: PathState) -> float:
    """Projection probability ``|<setting|output>|^2``."""
    channels = tuple(dict.fromkeys(setting.channels + output.channels))
    return float(abs(np.vdot(setting.ket(channels), output.ket(channels))) ** 2)


def projection_probability(setting: PathState, rho: np.ndarray, channels) -> float:
    psi = setting.ket(channels)
    if np.linalg.norm(psi) < 1 - 1e-12:
        raise ValueError("setting has support outside the density-matrix channels")
    return float(np.real(np.vdot(psi, rho @ psi)))


def apply_phase_noise(rho: np.ndarray, sigma: float) -> np.ndarray:
    """Independent Gaussian phase jitter of width ``sigma`` on every channel."""
    rho = np.array(rho, dtype=complex)
    damp = math.exp(-sigma**2)
    off = ~np.eye(rho.shape[0], dtype=bool)
    rho[off] *= damp
    return rho


# ---------------------------------------------------------------------------
# storage and recall

@dataclass(frozen=True)
class RetrievalResult:
    """Recalled light across ``channels`` (every channel of the array).

    ``output`` is unnormalized: its trace is the detection probability per
    input photon including optical leakage. ``state`` is the coherent part
    on the input channels, renormalized.
    """

    channels: tuple
    output: np.ndarray
    state: PathState
    efficiencies: dict
    raw_efficiency: float
    retrieval_time: float

    @property
    def rho(self) -> np.ndarray:
        return self.output / np.trace(self.output).real

    def channel_probabilities(self) -> dict:
        return dict(zip(self.channels, np.real(np.diag(self.output))))

    def subspace_rho(self, channels) -> np.ndarray:
        """Output restricted to ``channels`` and renormalized (post-selected)."""
        idx = [self.channels.index(c) for c in channels]
        sub = self.output[np.ix_(idx, idx)]
        return sub / np.trace(sub).real


def _pulse_signature(ctrl: StarkControl) -> tuple:
    return tuple((p.start, p.duration, p.polarity) for p in ctrl.pulses)


def store_and_retrieve(state: PathState, array, xtalk: CrosstalkModel | None = None,
                       controls: dict | None = None) -> RetrievalResult:
    """Store a path state and recall it through the read AOD.

    Each amplitude is scaled by ``sqrt(eta_n)`` where ``eta_n`` combines the
    SMAFC echo efficiency, optical path efficiency and electrical crosstalk
    from adjacent channels whose pulse timing differs. Optical crosstalk is
    applied at read-out only.
    """
    configs = {c.index: c for c in array}
    controls = {} if controls is None else dict(controls)
    xtalk = CrosstalkModel.none(presets.N_CHANNELS) if xtalk is None else xtalk
    missing = [c for c in state.channels if c not in configs]
    if missing:
        raise ValueError(f"no configuration for channels {missing}")
    deltas = {configs[c].comb.delta for c in state.channels}
    if len(deltas) > 1:
        raise ValueError("superposed channels use different comb spacings")

    ctrl_of = {i: controls.get(i, cfg.stark) for i, cfg in configs.items()}
    emissions = {c: emission_time(configs[c].comb, ctrl_of[c]) for c in state.channels}
    times = {e.time for e in emissions.values() if not e.suppressed}
    if not times:
        raise ValueError("every stored component is suppressed; nothing is recalled")
    if len(times) > 1 or any(e.suppressed for e in emissions.values()):
        raise ValueError("superposed channels are recalled at different times")
    t_out = times.pop()

    eff = {}
    for c in state.channels:
        factor = 1.0
        for nb in (c - 1, c + 1):
            if nb in ctrl_of and ctrl_of[nb].pulses and _pulse_signature(ctrl_of[nb]) != _pulse_signature(ctrl_of[c]):
                factor *= electrical_crosstalk_factor(ctrl_of[nb], xtalk.electrical_field_fraction,
                                                      ctrl_of[nb].pulses[0].duration)
        eff[c] = emissions[c].efficiency * configs[c].path_efficiency * factor**2

    all_channels = tuple(sorted(configs))
    pos = {c: k for k, c in enumerate(all_channels)}
    amp = np.zeros(len(all_channels), dtype=complex)
    for c, a in zip(state.channels, state.coefficients):
        amp[pos[c]] = a * math.sqrt(eff[c])
    raw = float(np.sum(abs(amp) ** 2))

    leak = xtalk.leakage()
    if leak.shape[0] < max(all_channels):
        raise ValueError("crosstalk matrix smaller than the array")
    sub = leak[np.ix_([c - 1 for c in all_channels], [c - 1 for c in all_channels])]
    if xtalk.coherent:
        full = amp + np.sqrt(sub).T @ amp
        output = ket_to_dm(full)
    else:
        output = ket_to_dm(amp) + np.diag(sub.T @ abs(amp) ** 2).astype(complex)

    coherent = state.ket() * np.sqrt([eff[c] for c in state.channels])
    out_state = PathState.from_amplitudes(coherent, state.channels)
    return RetrievalResult(all_channels, output, out_state, eff, raw, t_out)


# ---------------------------------------------------------------------------
# photon counting

@dataclass(frozen=True)
class CountRecord:
    setting_id: str
    time_bins: tuple
    counts: tuple
    trials: int
    seed: int
    mu: float = 0.0
    input_id: str | None = None

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        bins = tuple((float(a), float(b)) for a, b in self.time_bins)
        if len(counts) != len(bins):
            raise ValueError("one count per time bin required")
        if any(c < 0 for c in counts):
            raise ValueError("counts must be non-negative")
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "time_bins", bins)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def to_dict(self) -> dict:
        return {
            "setting_id": self.setting_id,
            "input_id": self.input_id,
            "time_bins": [list(b) for b in self.time_bins],
            "counts": list(self.counts),
            "trials": self.trials,
            "seed": self.seed,
            "mu": self.mu,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CountRecord":
        return cls(d["setting_id"], tuple(map(tuple, d["time_bins"])), tuple(d["counts"]),
                   d["trials"], d["seed"], d.get("mu", 0.0), d.get("input_id"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_start", "bin_width", "counts"])
        for (start, width), c in zip(self.time_bins, self.counts):
            w.writerow([repr(start), repr(width), c])
        return buf.getvalue()


def simulate_counts(probabilities, trials: int, mu: float, seed: int, *,
                    time_bins=None, dark_counts: float = 0.0,
                    setting_id: str = "", input_id: str | None = None) -> CountRecord:
    """Photon counts from ``trials`` weak coherent pulses.

    Each pulse carries a Poisson(``mu``) number of photons and every photon
    lands in bin ``b`` with probability ``probabilities[b]`` (the remainder is
    lost). Summed over trials this is a Poisson(``trials * mu``) photon total
    split multinomially, which is how it is sampled. ``dark_counts`` is the
    mean background count per bin per trial.
    """
    p = np.atleast_1d(np.asarray(probabilities, dtype=float))
    if np.any(~np.isfinite(p)) or np.any(p < -PROB_TOL) or np.any(p > 1 + PROB_TOL):
        raise ValueError("bin probabilities must lie in [0, 1]")
    p = np.clip(p, 0.0, 1.0)
    if p.sum() > 1 + 1e-9:
        raise ValueError(f"bin probabilities sum to {p.sum():.6g} > 1")
    if trials <= 0 or int(trials) != trials:
        raise ValueError("trials must be a positive integer")
    if mu < 0 or dark_counts < 0:
        raise ValueError("mean photon number and dark counts must be non-negative")
    if time_bins is None:
        time_bins = tuple((float(k), 1.0) for k in range(p.size))
    rng = np.random.default_rng(seed)
    photons = rng.poisson(mu * trials)
    split = rng.multinomial(photons, np.append(p, max(0.0, 1.0 - p.sum())))[:-1]
    if dark_counts > 0:
        split = split + rng.poisson(dark_counts * trials, size=p.size)
    return CountRecord(setting_id, tuple(time_bins), tuple(split.tolist()), int(trials), int(seed), float(mu),
                       input_id)


def echo_histogram(probability: float, echo_time: float, fwhm: float, trials: int, mu: float, seed: int,
                   bin_width: float = 10e-9, span: float | None = None, dark_counts: float = 0.0,
                   setting_id: str = "") -> CountRecord:
    """Arrival-time histogram of a recalled echo with a Gaussian temporal profile."""
    span = 4 * fwhm if span is None else span
    edges = np.arange(echo_time - span / 2, echo_time + span / 2 + bin_width / 2, bin_width)
    sigma = fwhm / math.sqrt(8 * math.log(2))
    cdf = norm.cdf(edges, loc=echo_time, scale=sigma)
    probs = probability * np.diff(cdf)
    bins = tuple((float(a), float(bin_width)) for a in edges[:-1])
    return simulate_counts(probs, trials, mu, seed, time_bins=bins, dark_counts=dark_counts,
                           setting_id=setting_id)
