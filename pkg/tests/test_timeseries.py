"""Container invariants: seasonal specs, moving-seasonality registry,
recurrence tables."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwdims import DataError, DimsSpec, SeasonSpec, compute_recurrence

from helpers import hourly_series


def demand(n=600):
    t = np.arange(n)
    return 100 + 10 * np.sin(2 * np.pi * t / 24)


class TestSeasonSpec:
    def test_cycle_length_must_be_at_least_two(self):
        with pytest.raises(ValueError):
            SeasonSpec("d", 1)

    def test_mode_init_mismatch_rejected(self):
        with pytest.raises(ValueError, match="ratio_to_ma"):
            SeasonSpec("d", 24, mode="additive", init_method="ratio_to_ma")

    def test_auto_init_follows_mode(self):
        assert SeasonSpec("d", 24, mode="multiplicative").init_method == "ratio_to_ma"
        assert SeasonSpec("d", 24, mode="additive").init_method == "difference_to_ma"

    def test_cycle_longer_than_series_rejected(self):
        with pytest.raises(DataError):
            hourly_series(demand(20), seasons=[SeasonSpec("d", 24)])

    def test_duplicate_cycle_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            hourly_series(demand(), seasons=[SeasonSpec("a", 24), SeasonSpec("b", 24)])


class TestDimsSpec:
    def test_empty_occurrences_accepted(self):
        ts = hourly_series(demand()).add_dims(DimsSpec("easter", "multiplicative", 24))
        rec = ts.recurrence("easter")
        assert not rec.active.any()
        assert (rec.slot == -1).all()

    def test_lag_equals_occurrence_start_difference(self):
        spec = DimsSpec("easter", "multiplicative", 24, occurrences=(100, 460))
        ts = hourly_series(demand()).add_dims(spec)
        rec = ts.recurrence("easter")
        assert (rec.lag[460:484] == 360).all()
        assert (rec.lag[100:124] == 0).all()  # first occurrence: lag undefined
        assert rec.active[100:124].all() and rec.active[460:484].all()
        assert rec.active.sum() == 48
        assert list(rec.slot[460:484]) == list(range(24))

    def test_overlapping_blocks_rejected(self):
        with pytest.raises(ValueError, match="overlaps"):
            DimsSpec("h", "multiplicative", 24, occurrences=(100, 110))

    def test_occurrences_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            DimsSpec("h", "multiplicative", 24, occurrences=(200, 100))

    def test_out_of_bounds_occurrence_rejected(self):
        with pytest.raises(DataError, match=r"\[590, 614\)"):
            hourly_series(demand(600)).add_dims(
                DimsSpec("h", "multiplicative", 24, occurrences=(590,))
            )

    def test_duplicate_id_rejected(self):
        ts = hourly_series(demand()).add_dims(DimsSpec("h", "multiplicative", 24))
        with pytest.raises(ValueError, match="duplicate"):
            ts.add_dims(DimsSpec("h", "additive", 12))

    def test_different_specs_may_overlap(self):
        ts = hourly_series(demand())
        ts = ts.add_dims(DimsSpec("easter", "multiplicative", 96, occurrences=(96,)))
        ts = ts.add_dims(DimsSpec("holiday", "multiplicative", 24, occurrences=(120,)))
        assert ts.recurrence("easter").active[120]
        assert ts.recurrence("holiday").active[120]


class TestRegistryRoundTrip:
    def test_remove_last_added_restores_registry(self):
        base = hourly_series(demand()).add_dims(
            DimsSpec("easter", "multiplicative", 24, occurrences=(48,))
        )
        grown = base.add_dims(DimsSpec("holiday", "additive", 24, occurrences=(240,)))
        shrunk = grown.remove_dims("holiday")
        assert shrunk.dims == base.dims

    def test_remove_unknown_id(self):
        with pytest.raises(KeyError):
            hourly_series(demand()).remove_dims("nope")


class TestTimeSeries:
    def test_values_are_read_only(self):
        ts = hourly_series(demand())
        with pytest.raises(ValueError):
            ts.values[0] = 1.0

    def test_covariates_must_align(self):
        with pytest.raises(DataError, match="covariate"):
            hourly_series(demand(48)).with_covariate("temp", np.zeros(47))

    def test_covariate_round_trip(self):
        ts = hourly_series(demand(48)).with_covariate("temp", np.ones(48))
        assert "temp" in ts.covariates
        assert "temp" not in ts.without_covariate("temp").covariates

    def test_prefix_drops_partial_blocks(self):
        ts = hourly_series(demand(600)).add_dims(
            DimsSpec("h", "multiplicative", 24, occurrences=(100, 460))
        )
        cut = ts.prefix(470)  # second block [460, 484) straddles the cut
        assert cut.dims[0].occurrences == (100,)
        assert len(cut) == 470

    def test_timestamps_are_even(self):
        ts = hourly_series(demand(10))
        stamps = ts.timestamps
        assert all((b - a) == ts.step for a, b in zip(stamps, stamps[1:]))


@given(
    st.integers(min_value=1, max_value=12),
    st.lists(st.integers(min_value=0, max_value=80), min_size=2, max_size=5, unique=True),
)
@settings(max_examples=60, deadline=None)
def test_recurrence_lags_match_start_differences(length, starts):
    starts = sorted(starts)
    if any(b - a < length for a, b in zip(starts, starts[1:])):
        return  # overlapping draws are covered by the validation tests
    spec = DimsSpec("x", "additive", length, occurrences=tuple(starts))
    rec = compute_recurrence(spec, 120)
    for prev, cur in zip(starts, starts[1:]):
        block = rec.lag[cur:cur + length]
        assert (block == cur - prev).all()
