"""Store three time-bin qubits in channels 5-7 and read them back in every order.

Prints the planned echo orders, the read times and the time-bin fidelities
next to the classical measure-and-prepare benchmark.
"""
import itertools
import math

from smafc import certify, presets
from smafc.afc import TimeBinState, phase_sigma_for_visibility
from smafc.array import default_array
from smafc.raqm import NoiseParams, build_schedule, run_schedule, validate_schedule

comb = presets.COMB_200KHZ
stark = presets.STARK_1V56
array = default_array(comb, stark)
qubits = [(TimeBinState.from_phase(p), ch) for p, ch in zip((-math.pi / 2, math.pi / 2, 3 * math.pi / 4), (5, 6, 7))]
noise = NoiseParams(phase_sigma_for_visibility(0.985))

print(f"comb period {comb.period * 1e6:.1f} us, AOD rise time {presets.AOD_RISE_TIME * 1e6:.1f} us")
for order in itertools.permutations([1, 2, 3]):
    s = build_schedule(qubits, order, comb, stark)
    assert not validate_schedule(s, comb)
    res = run_schedule(s, array, noise=noise, seed=1, trials=100_000)
    bound = certify.classical_bound(2, presets.MU_TIMEBIN, min(r.efficiency for r in res))
    cells = "  ".join(f"Q{r.qubit}: n={r.echo_order} t={r.read_time * 1e6:5.1f}us eta={r.efficiency:.3f} "
                      f"F_T={r.f_total:.4f}" for r in sorted(res, key=lambda r: r.read_time))
    print(f"order {''.join(map(str, order))}  {cells}  (classical {bound:.3f})")

# the timeline of the 2-1-3 request, as it would be sent to the hardware
s = build_schedule(qubits, [2, 1, 3], comb, stark)
print()
print(s.timeline_csv())
