"""Device constants for the 11-channel Eu:YSO waveguide memory."""
from __future__ import annotations

import math

from .afc import AnalyzerConfig, CombConfig, StarkControl, fit_gamma_tilde

N_CHANNELS = 11
RF_START = 65.75e6
RF_STEP = 3.85e6

STARK_COEFFICIENT = 28.0e3  # Hz per V/cm
FIELD_1V56 = 176.8  # V/cm at the waveguide centre for a 1.56 V bias
TAU_INH = 70.1e-9
RESIDUAL_FIELD_FRACTION = 0.05
OPTICAL_CROSSTALK_DB = -40.0

MU_MULTIPLEX = 0.14
MU_PATH = 0.38
MU_TIMEBIN = 0.76
MU_QPT = 0.98

FIRST_ECHO_EFFICIENCY = 0.392
SECOND_ECHO_EFFICIENCY = 0.313

PATH_EFFICIENCY_RANGE = (0.16, 0.52)
AOD_RISE_TIME = 1.9e-6
BIN_SEPARATION = 200e-9

# 2 MHz comb: finesse and depth from the time-resolved fit; gamma_tilde is
# fitted to the average first/second echo efficiencies.
COMB_2MHZ_UNFITTED = CombConfig(delta=2e6, finesse=8.7, peak_depth=10.6)
COMB_2MHZ = fit_gamma_tilde(COMB_2MHZ_UNFITTED, [0.5e-6, 1.0e-6],
                            [FIRST_ECHO_EFFICIENCY, SECOND_ECHO_EFFICIENCY])

# 200 kHz comb. No decay rate is quoted; 5.6e4 1/s spans roughly 19% at 5 us
# down to 3% at 25 us, the spread of the random-access efficiencies.
COMB_200KHZ = CombConfig(delta=200e3, finesse=9.8, peak_depth=5.7, gamma_tilde=5.6e4)

STARK_1V56 = StarkControl(STARK_COEFFICIENT, FIELD_1V56, TAU_INH)
STARK_4V = StarkControl(STARK_COEFFICIENT, FIELD_1V56 * 4.0 / 1.56, TAU_INH)

ANALYZER = AnalyzerConfig(storage_time=BIN_SEPARATION, p0=0.25, p1=0.25)


def rf_frequency(index: int) -> float:
    """AOD drive tone for channel ``index`` (1-based)."""
    if not 1 <= index <= N_CHANNELS:
        raise ValueError(f"channel index must lie in [1, {N_CHANNELS}]")
    return RF_START + (index - 1) * RF_STEP


def path_efficiency_profile(index: int) -> float:
    """Bell-shaped optical path efficiency, best in the middle of the array."""
    lo, hi = PATH_EFFICIENCY_RANGE
    centre = (N_CHANNELS + 1) / 2
    x = (index - centre) / (centre - 1)
    return lo + (hi - lo) * math.cos(0.5 * math.pi * x) ** 2 if abs(x) < 1 else lo
