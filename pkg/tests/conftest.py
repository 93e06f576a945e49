import numpy as np
import pytest

from combpilot.model import SystemParams

# Es/N0 giving analytic 64-QAM BER = 1e-3; regression constant frozen from
# modem.calibrate_snr (see test_modem.test_calibrate_regression_constant).
CAL_SNR_64QAM_1E3 = 22.549008280038834

SYMBOL_RATE = 20e9  # baud; T_s = 5e-11 s


def make_params(**overrides) -> SystemParams:
    defaults = dict(
        n_channels=7,
        delta_nu_c=100e3,
        delta_nu_r=100.0,
        symbol_rate=SYMBOL_RATE,
        snr_db=CAL_SNR_64QAM_1E3,
        n_symbols=2000,
        pilot_rate=1 / 7,
        seed=12345,
    )
    defaults.update(overrides)
    return SystemParams(**defaults)


@pytest.fixture
def rng():
    return np.random.default_rng(20230777)
