import numpy as np
import pytest

from combpilot.optimizer import build_reference_set
from combpilot.pilots import (
    PilotRateError,
    RAT,
    WDT,
    make_rat,
    make_wdt,
    pattern_to_text,
)

from conftest import make_params

PILOT = 1 + 1j


class TestRat:
    def test_l5_outer_pair_rate_fifth(self):
        p = make_params(n_channels=5, pilot_rate=1 / 5, n_symbols=10)
        rs = build_reference_set(5, [-2, 2])
        pat = make_rat(p, rs, PILOT)
        assert pat.kind == RAT
        assert pat.time_spacing == 2
        # rows 0 and 4 carry pilots at times 0, 2, 4, ...
        rows = np.flatnonzero(pat.mask.any(axis=1))
        assert rows.tolist() == [0, 4]
        assert np.flatnonzero(pat.mask[0]).tolist() == [0, 2, 4, 6, 8]
        assert np.array_equal(pat.mask[0], pat.mask[4])

    def test_saturation_every_slot(self):
        p = make_params(n_channels=5, pilot_rate=2 / 5, n_symbols=20)
        pat = make_rat(p, build_reference_set(5, [-2, 2]), PILOT)
        assert pat.time_spacing == 1
        assert pat.mask[0].all() and pat.mask[4].all()

    def test_l7_spacing_two(self):
        p = make_params(n_channels=7, pilot_rate=1 / 7, n_symbols=100)
        pat = make_rat(p, build_reference_set(7, [-3, 3]), PILOT)
        assert pat.time_spacing == 2

    def test_rate_bound_error_names_bound(self):
        p = make_params(n_channels=7, pilot_rate=0.5)
        with pytest.raises(PilotRateError, match="2/7"):
            make_rat(p, build_reference_set(7, [-3, 3]), PILOT)

    def test_no_pilots_outside_reference_rows(self):
        p = make_params(n_channels=9, pilot_rate=0.05, n_symbols=500)
        rs = build_reference_set(9, [-4, 0, 4])
        pat = make_rat(p, rs, PILOT)
        outside = [r for r in range(9) if r not in (0, 4, 8)]
        assert not pat.mask[outside].any()

    def test_first_slot_always_pilot(self):
        p = make_params(n_channels=5, pilot_rate=0.01, n_symbols=1000)
        pat = make_rat(p, build_reference_set(5, [-2, 2]), PILOT)
        assert pat.mask[0, 0] and pat.mask[4, 0]

    def test_achieved_rate_close_to_target(self):
        # round() picks the nearest spacing, so the achieved rate may sit
        # above the target by at most the rounding slack 1/(2s), plus the
        # partial-period edge effect.
        p = make_params(n_channels=11, pilot_rate=0.01, n_symbols=20_000)
        pat = make_rat(p, build_reference_set(11, [-5, 5]), PILOT)
        n, s = p.n_symbols, pat.time_spacing
        exact_count = 2 * np.ceil(n / s) / (11 * n)
        assert pat.pilot_fraction() == pytest.approx(exact_count, abs=0)
        bound = p.pilot_rate * (1 + 1 / (2 * s)) * (1 + 11 * s / n)
        assert pat.pilot_fraction() <= bound
        assert pat.pilot_fraction() == pytest.approx(0.01, rel=0.05)


class TestWdt:
    def test_l5_full_rate_diagonal(self):
        p = make_params(n_channels=5, pilot_rate=1 / 5, n_symbols=12)
        pat = make_wdt(p, PILOT)
        assert pat.kind == WDT
        assert pat.time_spacing == 1
        # exactly one pilot per slot, cycling rows 0,1,2,3,4,0,...
        assert np.all(pat.mask.sum(axis=0) == 1)
        assert np.array_equal(np.argmax(pat.mask, axis=0), np.arange(12) % 5)

    def test_half_rate_doubles_spacing(self):
        p = make_params(n_channels=5, pilot_rate=1 / 10, n_symbols=40)
        pat = make_wdt(p, PILOT)
        assert pat.time_spacing == 2
        assert pat.mask[0, 0]  # k = 0 pilot on channel -M

    def test_rate_bound(self):
        p = make_params(n_channels=5, pilot_rate=0.25)
        with pytest.raises(PilotRateError, match="1/L"):
            make_wdt(p, PILOT)

    def test_per_channel_counts_balanced(self):
        p = make_params(n_channels=7, pilot_rate=1 / 14, n_symbols=1000)
        pat = make_wdt(p, PILOT)
        s = pat.time_spacing
        counts = pat.mask.sum(axis=1)
        lo, hi = np.floor(1000 / (s * 7)), np.ceil(1000 / (s * 7))
        assert np.all((counts == lo) | (counts == hi))

    def test_exact_rate_when_divisible(self):
        p = make_params(n_channels=5, pilot_rate=1 / 5, n_symbols=100)
        pat = make_wdt(p, PILOT)
        per_channel = pat.mask.sum(axis=1) / p.n_symbols
        assert np.allclose(per_channel, p.pilot_rate, atol=1 / p.n_symbols)


class TestPattern:
    def test_deterministic(self):
        p = make_params(n_channels=5, pilot_rate=0.1, n_symbols=200)
        a = make_wdt(p, PILOT)
        b = make_wdt(p, PILOT)
        assert np.array_equal(a.mask, b.mask)

    def test_data_mask_complements(self):
        p = make_params(n_channels=5, pilot_rate=0.1, n_symbols=50)
        pat = make_wdt(p, PILOT)
        assert np.array_equal(pat.data_mask, ~pat.mask)

    def test_text_export(self):
        p = make_params(n_channels=3, pilot_rate=1 / 3, n_symbols=4)
        pat = make_wdt(p, PILOT)
        text = pattern_to_text(pat)
        lines = text.splitlines()
        assert len(lines) == 3
        assert all(len(line) == 4 and set(line) <= {"0", "1"} for line in lines)
        assert lines[0][0] == "1"  # k=0 pilot on the first row
