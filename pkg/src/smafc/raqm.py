"""Random-access read-out of time-bin qubits stored across memory channels.

Timing conventions (all times absolute, in seconds):

* a qubit written at ``t_w`` occupies ``[t_w, t_w + bin_separation]``;
* its suppression pulse sits in ``[t_w + bin_separation, t_w + 1/delta]`` so
  the late bin is absorbed before dephasing starts;
* the recall pulse for echo order ``n`` sits in
  ``[t_w + (n-1)/delta + bin_separation, t_w + n/delta]``, the window shared
  by the early and late bins;
* the write AOD and the read AOD each need ``aod_rise_time`` between the end
  of one qubit and the start of the next.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import presets
from .afc import (AnalyzerConfig, CombConfig, Pulse, StarkControl, TimeBinState, analyzer_project,
                  emission_time, fidelity_from_visibility, suppression_pulse_duration, visibility)
from .array import ChannelConfig, CountRecord, CrosstalkModel, electrical_crosstalk_factor, simulate_counts

GRID_TOL = 1e-9  # fraction of a comb period
TIME_TOL = 1e-15


class ScheduleError(ValueError):
    pass


def recall_pulses(comb: CombConfig, ctrl: StarkControl, n: int, bin_separation: float = 0.0) -> tuple:
    """Suppression and recall pulses for echo order ``n``, relative to the write time.

    Both pulses sit at the midpoints of their legal windows; the recall
    pulse has the opposite polarity.
    """
    if n < 2:
        raise ScheduleError("on-demand recall needs echo order n >= 2")
    period = comb.period
    dur = suppression_pulse_duration(ctrl)
    if bin_separation + dur > period:
        raise ScheduleError("comb period too short for the bin separation and suppression pulse")
    c1 = 0.5 * (bin_separation + period)
    c2 = 0.5 * ((n - 1) * period + bin_separation + n * period)
    return Pulse(c1 - dur / 2, dur, 1), Pulse(c2 - dur / 2, dur, -1)


@dataclass(frozen=True)
class Violation:
    kind: str
    events: tuple
    message: str


@dataclass(frozen=True)
class Schedule:
    writes: tuple  # (qubit_id, channel, time)
    reads: tuple  # (qubit_id, time), in read order
    electric_pulses: dict  # channel -> ((start, duration, polarity), ...)
    aod_rise_time: float
    bin_separation: float
    delta: float

    def write_of(self, qid) -> tuple:
        return next(w for w in self.writes if w[0] == qid)

    def read_of(self, qid) -> tuple:
        return next(r for r in self.reads if r[0] == qid)

    @property
    def read_order(self) -> list:
        return [q for q, _ in sorted(self.reads, key=lambda r: r[1])]

    def echo_order(self, qid) -> int:
        _, _, tw = self.write_of(qid)
        _, tr = self.read_of(qid)
        return int(round((tr - tw) * self.delta))

    def to_dict(self) -> dict:
        return {
            "writes": [list(w) for w in self.writes],
            "reads": [list(r) for r in self.reads],
            "electric_pulses": {str(ch): [list(p) for p in ps] for ch, ps in sorted(self.electric_pulses.items())},
            "aod_rise_time": self.aod_rise_time,
            "bin_separation": self.bin_separation,
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        return cls(
            tuple(tuple(w) for w in d["writes"]),
            tuple(tuple(r) for r in d["reads"]),
            {int(ch): tuple(tuple(p) for p in ps) for ch, ps in d["electric_pulses"].items()},
            d["aod_rise_time"], d["bin_separation"], d["delta"],
        )

    def timeline(self) -> list[tuple]:
        """Every event as ``(time, kind, qubit_or_channel, detail)``, time ordered."""
        ev = [(t, "write", q, ch) for q, ch, t in self.writes]
        ev += [(t, "read", q, self.write_of(q)[1]) for q, t in self.reads]
        for ch, ps in self.electric_pulses.items():
            for start, dur, pol in ps:
                ev.append((start, "pulse", ch, f"{pol:+d} {dur:.6g}"))
        return sorted(ev, key=lambda e: (e[0], e[1], str(e[2])))

    def timeline_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "event", "id", "detail"])
        for t, kind, ident, detail in self.timeline():
            w.writerow([repr(t), kind, ident, detail])
        return buf.getvalue()


def build_schedule(qubits, order, comb: CombConfig, ctrl: StarkControl,
                   aod_rise_time: float = presets.AOD_RISE_TIME, n_max: int = 10,
                   n_min: int = 2) -> Schedule:
    """Plan writes, reads and Stark pulses for a requested read-out order.

    ``qubits`` is a sequence of ``(TimeBinState, channel)``; qubit ids are
    1-based positions in that sequence and writes happen in id order.
    ``order`` lists the ids in the desired read-out order. Each read takes the
    smallest echo order ``n >= n_min`` that respects the read-AOD rise time.
    """
    qubits = list(qubits)
    ids = list(range(1, len(qubits) + 1))
    order = [int(q) for q in order]
    if sorted(order) != ids:
        raise ScheduleError(f"order {order} is not a permutation of {ids}")
    channels = [ch for _, ch in qubits]
    if len(set(channels)) != len(channels):
        raise ScheduleError("two qubits share a memory channel")
    seps = {q.bin_separation for q, _ in qubits}
    if len(seps) != 1:
        raise ScheduleError("qubits use different bin separations")
    sep = seps.pop()
    period = comb.period
    recall_pulses(comb, ctrl, n_min, sep)  # feasibility of the pulse windows

    writes, t = [], 0.0
    for qid, ch in zip(ids, channels):
        writes.append((qid, ch, t))
        t += sep + aod_rise_time
    t_write = {qid: tw for qid, _, tw in writes}

    reads, prev_end = [], None
    for qid in order:
        n = n_min
        if prev_end is not None:
            n = max(n, math.ceil((prev_end + aod_rise_time - t_write[qid]) / period - GRID_TOL))
        if n > n_max:
            raise ScheduleError(f"order {order} needs echo order {n} > n_max={n_max} for qubit {qid}")
        tr = t_write[qid] + n * period
        reads.append((qid, tr))
        prev_end = tr + sep

    pulses = {}
    for qid, ch, tw in writes:
        n = int(round((dict(reads)[qid] - tw) / period))
        pulses[ch] = tuple((tw + p.start, p.duration, p.polarity) for p in recall_pulses(comb, ctrl, n, sep))
    return Schedule(tuple(writes), tuple(reads), pulses, aod_rise_time, sep, comb.delta)


def validate_schedule(s: Schedule, comb: CombConfig) -> list[Violation]:
    """Every broken timing constraint; an empty list means the schedule is sound."""
    out = []
    period = 1.0 / s.delta
    if not math.isclose(s.delta, comb.delta, rel_tol=1e-12):
        out.append(Violation("delta", (), f"schedule delta {s.delta} differs from comb delta {comb.delta}"))
    chans = [w[1] for w in s.writes]
    for ch in set(chans):
        if chans.count(ch) > 1:
            out.append(Violation("channel-collision", tuple(w for w in s.writes if w[1] == ch),
                                 f"channel {ch} holds several qubits"))
    written = {w[0] for w in s.writes}
    for q, _ in s.reads:
        if q not in written:
            out.append(Violation("unknown-qubit", (q,), f"qubit {q} is read but never written"))

    def aod_check(kind, events, times):
        for (ea, ta), (eb, tb) in zip(zip(events, times), list(zip(events, times))[1:]):
            if tb < ta - TIME_TOL:
                out.append(Violation("order", (ea, eb), f"{kind} events are not time ordered"))
            elif tb - (ta + s.bin_separation) < s.aod_rise_time - TIME_TOL:
                out.append(Violation("rise-time", (ea, eb),
                                     f"{kind} AOD retargeted after {tb - ta - s.bin_separation:.3g} s "
                                     f"< rise time {s.aod_rise_time:.3g} s"))

    aod_check("write", list(s.writes), [w[2] for w in s.writes])
    aod_check("read", list(s.reads), [r[1] for r in s.reads])

    for q, ch, tw in s.writes:
        read = next((r for r in s.reads if r[0] == q), None)
        if read is None:
            out.append(Violation("unread", (q,), f"qubit {q} is never read"))
            continue
        x = (read[1] - tw) * s.delta
        n = int(round(x))
        if abs(x - n) > GRID_TOL or n < 1:
            out.append(Violation("echo-grid", ((q, ch, tw), read),
                                 f"read of qubit {q} is not on the echo grid (n = {x:.6g})"))
            continue
        ps = s.electric_pulses.get(ch, ())
        if len(ps) != 2:
            out.append(Violation("pulse-count", (ch,), f"channel {ch} needs exactly two pulses, has {len(ps)}"))
            continue
        (s1, d1, p1), (s2, d2, p2) = ps
        if p1 == p2:
            out.append(Violation("polarity", (ch, ps[0], ps[1]), f"channel {ch} pulses share a polarity"))
        lo1, hi1 = tw + s.bin_separation, tw + period
        if s1 < lo1 - TIME_TOL or s1 + d1 > hi1 + TIME_TOL:
            out.append(Violation("window", (ch, ps[0]),
                                 f"suppression pulse on channel {ch} outside [{lo1:.6g}, {hi1:.6g}]"))
        lo2, hi2 = tw + (n - 1) * period + s.bin_separation, tw + n * period
        if s2 < lo2 - TIME_TOL or s2 + d2 > hi2 + TIME_TOL:
            out.append(Violation("window", (ch, ps[1]),
                                 f"recall pulse on channel {ch} outside [{lo2:.6g}, {hi2:.6g}] for echo {n}"))
    return out


# ---------------------------------------------------------------------------
# end-to-end simulation

@dataclass(frozen=True)
class NoiseParams:
    """Per-read Gaussian phase jitter (rad) and uniform background counts per bin per trial."""

    phase_sigma: float = 0.0
    background: float = 0.0


PROBE_STATES = {
    "e": TimeBinState.early(),
    "l": TimeBinState.late(),
    "+i": TimeBinState.from_phase(math.pi / 2),
    "+3pi/4": TimeBinState.from_phase(3 * math.pi / 4),
}


@dataclass
class QubitResult:
    qubit: int
    channel: int
    echo_order: int
    read_time: float
    efficiency: float
    fidelities: dict
    records: list = field(default_factory=list)

    @property
    def f_el(self) -> float:
        return 0.5 * (self.fidelities["e"] + self.fidelities["l"])

    @property
    def f_pm(self) -> float:
        sup = [v for k, v in self.fidelities.items() if k not in ("e", "l")]
        return float(np.mean(sup))

    @property
    def f_total(self) -> float:
        return self.f_el / 3 + 2 * self.f_pm / 3

    def row(self) -> dict:
        row = {"qubit": self.qubit, "channel": self.channel, "echo_order": self.echo_order,
               "read_time": self.read_time, "efficiency": self.efficiency}
        row.update({f"F_{k}": v for k, v in self.fidelities.items()})
        row.update({"F_el": self.f_el, "F_pm": self.f_pm, "F_T": self.f_total})
        return row


def timebin_fidelity(correct: int, wrong: int) -> float:
    """``(S + N) / (S + 2N)`` with signal ``S = correct - wrong`` and noise ``N = wrong``."""
    total = correct + wrong
    return 1.0 if total == 0 else correct / total


def run_schedule(s: Schedule, array, analyzer: AnalyzerConfig = presets.ANALYZER,
                 noise: NoiseParams = NoiseParams(), seed: int = 0, trials: int = 100_000,
                 mu: float = presets.MU_TIMEBIN, probes=None,
                 xtalk: CrosstalkModel | None = None) -> list[QubitResult]:
    """Simulate storage, recall, analysis and counting for every scheduled qubit.

    Each qubit slot is probed with ``probes`` (default: ``|e>``, ``|l>`` and two
    equal superpositions). Basis states are counted directly in the early
    and late windows; superpositions go through the analyzer at the two
    read-out phases ``phi`` and ``phi + pi`` and the middle-bin counts give the
    visibility.
    """
    configs = {c.index: c for c in array}
    comb_of = {ch: configs[ch].comb for _, ch, _ in s.writes}
    for ch, comb in comb_of.items():
        bad = validate_schedule(s, comb)
        if bad:
            raise ScheduleError("; ".join(v.message for v in bad))
    probes = PROBE_STATES if probes is None else probes
    rngs = np.random.SeedSequence(seed).spawn(len(s.writes))
    coherence = math.exp(-0.5 * noise.phase_sigma**2)
    results = []
    for (qid, ch, tw), ss in zip(s.writes, rngs):
        cfg = configs[ch]
        pulses = [Pulse(p[0] - tw, p[1], p[2]) for p in s.electric_pulses[ch]]
        em = emission_time(cfg.comb, cfg.stark.with_pulses(pulses))
        _, tr = s.read_of(qid)
        factor = 1.0
        if xtalk is not None:
            for nb in (ch - 1, ch + 1):
                if nb in s.electric_pulses and nb in configs:
                    factor *= electrical_crosstalk_factor(configs[nb].stark, xtalk.electrical_field_fraction,
                                                          s.electric_pulses[nb][0][1]) ** 2
        eta = em.efficiency * cfg.path_efficiency * factor
        seeds = ss.generate_state(len(probes) * 2)
        fids, records = {}, []
        for k, (name, state) in enumerate(probes.items()):
            if abs(state.beta) < 1e-15 or abs(state.alpha) < 1e-15:
                bins = ((tr, s.bin_separation), (tr + s.bin_separation, s.bin_separation))
                p = eta * np.array([abs(state.alpha) ** 2, abs(state.beta) ** 2])
                rec = simulate_counts(p, trials, mu, int(seeds[2 * k]), time_bins=bins,
                                      dark_counts=noise.background, setting_id=f"Q{qid}:{name}")
                right = 0 if abs(state.alpha) > abs(state.beta) else 1
                fids[name] = timebin_fidelity(rec.counts[right], rec.counts[1 - right])
                records.append(rec)
                continue
            phi = float(np.angle(state.beta / state.alpha))
            middle = []
            for j, theta in enumerate((phi, phi + math.pi)):
                probs = eta * analyzer_project(state, analyzer.at_phase(theta), coherence)
                bins = tuple((tr + m * s.bin_separation, s.bin_separation) for m in range(3))
                rec = simulate_counts(probs, trials, mu, int(seeds[2 * k + j]), time_bins=bins,
                                      dark_counts=noise.background, setting_id=f"Q{qid}:{name}:theta={theta:.6f}")
                records.append(rec)
                middle.append(rec.counts[1])
            fids[name] = fidelity_from_visibility(visibility(max(middle), min(middle)))
        results.append(QubitResult(qid, ch, s.echo_order(qid), tr, eta, fids, records))
    return results
