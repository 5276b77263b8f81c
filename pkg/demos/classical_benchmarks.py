"""How well can a measure-and-prepare memory do with weak coherent inputs?

Tabulates the classical fidelity bound against memory efficiency for the
time-bin (d=2, mu=0.76) and path (d=4, 5; mu=0.38) settings.
"""
import numpy as np

from smafc import certify

etas = [0.01, 0.03, 0.1, 0.3, 1.0]
print("eta      " + "  ".join(f"{e:>6.2f}" for e in etas))
for d, mu in ((2, 0.76), (4, 0.38), (5, 0.38)):
    row = [certify.classical_bound(d, mu, e) for e in etas]
    print(f"d={d} mu={mu:.2f} " + "  ".join(f"{f:6.3f}" for f in row))

det = certify.classical_bound_details(5, 0.38, 0.3)
print(f"\nd=5, mu=0.38, eta=0.3: keep all pulses above {det.n_min} photons plus {det.gamma:.2e} of the "
      f"{det.n_min}-photon events -> F={det.fidelity:.4f}")
print(f"single-photon limit for d=2: {certify.classical_bound(2, 1e-9):.4f} (2/3)")
mus = np.linspace(0.05, 2.0, 5)
print("d=2, eta=0.05 vs mu:", ", ".join(f"{m:.2f}:{certify.classical_bound(2, m, 0.05):.3f}" for m in mus))
