"""Cross-check of the smoothing engine against a literal re-derivation.

The oracle below re-implements the generalized recursion in a deliberately
different style: components are stored as time-indexed histories and every
lookup walks back explicitly (one cycle for regular indices, the previous
occurrence's matching offset for moving indices). The engine uses in-place
ring buffers instead. Agreement across randomized mixed configurations pins
the update equations, the occurrence-lag semantics and the forecast
equation at once.
"""

from __future__ import annotations

import numpy as np
import pytest

from hwdims import (
    DimsSpec,
    FitInfeasibleError,
    ModelSpec,
    ModelState,
    SeasonSpec,
    SmoothingParams,
    forecast,
    project_dims,
    smooth_pass,
)

from helpers import hourly_series


class LiteralRecursion:
    """Time-indexed transliteration of the generalized update equations."""

    def __init__(self, ts, spec, params, seeds):
        self.ts = ts
        self.spec = spec
        self.p = params.effective(spec)
        self.mult_trend = spec.trend == "multiplicative"
        self.seasons = ts.seasons
        self.dims = ts.dims
        self.seed_seasonal = {s.id: np.asarray(seeds.seasonal[s.id], float)
                              for s in ts.seasons}
        self.seed_dims = {d.id: np.asarray(seeds.dims[d.id], float)
                          for d in ts.dims}
        n = len(ts)
        self.hist_seasonal = {s.id: dict() for s in ts.seasons}   # t -> value
        self.hist_dims = {d.id: dict() for d in ts.dims}          # t -> value
        self.level = float(seeds.level)
        self.trend = float(seeds.trend) if spec.trend != "none" else 0.0
        self.eps = float(seeds.last_residual)
        self.n = n

    # -- explicit lag lookups ------------------------------------------------

    def season_at(self, sid, cycle, t):
        """Index value in force at time t: last stored at t - cycle, else seed."""
        u = t - cycle
        hist = self.hist_seasonal[sid]
        while u >= 0:
            if u in hist:
                return hist[u]
            u -= cycle
        return float(self.seed_seasonal[sid][t % cycle])

    def dims_at(self, dspec, t):
        """Moving index in force at active time t: the value stored at the
        matching offset of the most recent previous occurrence, else seed."""
        offset = None
        for occ in dspec.occurrences:
            if occ <= t < occ + dspec.length:
                offset = t - occ
                this_occ = occ
                break
        if offset is None:
            return None
        prev = [occ for occ in dspec.occurrences if occ < this_occ]
        while prev:
            lag = this_occ - prev[-1]          # the irregular occurrence lag
            u = t - lag
            if u in self.hist_dims[dspec.id]:
                return self.hist_dims[dspec.id][u]
            this_occ = prev[-1]
            prev = prev[:-1]
        return float(self.seed_dims[dspec.id][offset])

    def components_at(self, t):
        sum_add, prod_mul = 0.0, 1.0
        parts = {}
        for s in self.seasons:
            v = self.season_at(s.id, s.cycle_length, t)
            parts[s.id] = v
            if s.mode == "multiplicative":
                prod_mul *= v
            else:
                sum_add += v
        for d in self.dims:
            v = self.dims_at(d, t)
            parts[d.id] = v
            if v is not None:
                if d.mode == "multiplicative":
                    prod_mul *= v
                else:
                    sum_add += v
        return sum_add, prod_mul, parts

    # -- one fit step, straight from the equations ---------------------------

    def step(self, t, yt):
        p = self.p
        sum_add, prod_mul, parts = self.components_at(t)
        base = self.level * self.trend ** p.phi if self.mult_trend \
            else self.level + p.phi * self.trend
        yhat = (base + sum_add) * prod_mul + p.ar1 * self.eps
        self.eps = yt - yhat

        prev_level = self.level
        self.level = p.alpha * (yt - sum_add) / prod_mul + (1 - p.alpha) * base
        if self.mult_trend:
            self.trend = p.gamma * (self.level / prev_level) \
                + (1 - p.gamma) * self.trend ** p.phi
        else:
            self.trend = p.gamma * (self.level - prev_level) \
                + (1 - p.gamma) * p.phi * self.trend

        for s, delta in zip(self.seasons, p.deltas):
            old = parts[s.id]
            if s.mode == "multiplicative":
                new = delta * (yt - sum_add) / (self.level * prod_mul / old) \
                    + (1 - delta) * old
            else:
                new = delta * (yt - self.level - (sum_add - old)) / prod_mul \
                    + (1 - delta) * old
            self.hist_seasonal[s.id][t] = new
        for d, delta in zip(self.dims, p.deltas_dims):
            old = parts[d.id]
            if old is None:
                continue
            if d.mode == "multiplicative":
                new = delta * (yt - sum_add) / (self.level * prod_mul / old) \
                    + (1 - delta) * old
            else:
                new = delta * (yt - self.level - (sum_add - old)) / prod_mul \
                    + (1 - delta) * old
            self.hist_dims[d.id][t] = new
        return yhat

    def fit(self):
        return np.array([self.step(t, self.ts.values[t]) for t in range(self.n)])

    # -- forecasts via the same explicit lookups ------------------------------

    def predict(self, horizon):
        p = self.p
        out = np.empty(horizon)
        phi_acc = 0.0
        for k in range(1, horizon + 1):
            phi_acc += p.phi ** k
            base = self.level * self.trend ** phi_acc if self.mult_trend \
                else self.level + phi_acc * self.trend
            sum_add, prod_mul, _ = self.components_at(self.n + k - 1)
            out[k - 1] = (base + sum_add) * prod_mul + p.ar1 ** k * self.eps
        return out


def random_configuration(rng):
    n_weeks = int(rng.integers(3, 5))
    n = n_weeks * 56  # cycles 8 and 56 both divide
    t = np.arange(n)
    y = (80 + 0.05 * t
         + 12 * np.sin(2 * np.pi * t / 8)
         + 6 * np.cos(2 * np.pi * t / 56)
         + rng.normal(0, 1.0, n))
    seasons = [SeasonSpec("fast", 8, mode=rng.choice(["additive", "multiplicative"]))]
    if rng.random() < 0.7:
        seasons.append(
            SeasonSpec("slow", 56, mode=rng.choice(["additive", "multiplicative"])))
    dims = []
    if rng.random() < 0.8:
        starts = sorted(rng.choice(np.arange(2, n // 8 - 2), size=3, replace=False))
        dims.append(DimsSpec("ev1", str(rng.choice(["additive", "multiplicative"])),
                             length=int(rng.integers(2, 9)),
                             occurrences=tuple(int(s) * 8 for s in starts)))
    if rng.random() < 0.4:
        starts = sorted(rng.choice(np.arange(1, n // 8 - 1), size=2, replace=False))
        dims.append(DimsSpec("ev2", str(rng.choice(["additive", "multiplicative"])),
                             length=4,
                             occurrences=tuple(int(s) * 8 + 2 for s in starts)))
    ts = hourly_series(y, seasons=seasons, dims=dims)
    spec = ModelSpec.for_series(
        ts,
        trend=str(rng.choice(["additive", "multiplicative", "none"])),
        damping_enabled=bool(rng.random() < 0.5),
        ar_adjustment_enabled=bool(rng.random() < 0.5),
    )
    params = SmoothingParams(
        alpha=float(rng.uniform(0.02, 0.4)),
        gamma=float(rng.uniform(0.0, 0.1)),
        deltas=tuple(float(rng.uniform(0.0, 0.5)) for _ in seasons),
        deltas_dims=tuple(float(rng.uniform(0.0, 0.8)) for _ in dims),
        phi=float(rng.uniform(0.7, 1.0)),
        ar1=float(rng.uniform(-0.6, 0.6)),
    )
    seeds = ModelState(
        level=80.0,
        trend=1.0005 if spec.trend == "multiplicative" else 0.05,
        seasonal={
            s.id: (np.ones(s.cycle_length) + rng.uniform(-0.2, 0.2, s.cycle_length)
                   if s.mode == "multiplicative"
                   else rng.uniform(-5.0, 5.0, s.cycle_length))
            for s in seasons
        },
        dims={
            d.id: (np.ones(d.length) + rng.uniform(-0.1, 0.1, d.length)
                   if d.mode == "multiplicative"
                   else rng.uniform(-3.0, 3.0, d.length))
            for d in dims
        },
    )
    return ts, spec, params, seeds


@pytest.mark.parametrize("seed", range(40))
def test_engine_matches_literal_recursion(seed):
    rng = np.random.default_rng(1000 + seed)
    ts, spec, params, seeds = random_configuration(rng)
    oracle = LiteralRecursion(ts, spec, params, seeds.copy())
    try:
        fit = smooth_pass(ts, spec, params, seeds)
    except FitInfeasibleError:
        pytest.skip("infeasible draw")
    oracle_fitted = oracle.fit()
    np.testing.assert_allclose(fit.fitted, oracle_fitted, rtol=1e-10, atol=1e-10)

    horizon = 40
    got = forecast(fit.final_state, spec, params, horizon,
                   project_dims(ts, len(ts), horizon))
    expected = oracle.predict(horizon)
    np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-10)


def test_double_seasonal_with_ar_hand_case():
    """Deterministic two-seasonality-with-AR case, checked value by value."""
    rng = np.random.default_rng(3)
    n = 4 * 56
    t = np.arange(n)
    y = 50 + 8 * np.sin(2 * np.pi * t / 8) + 3 * np.cos(2 * np.pi * t / 56) \
        + rng.normal(0, 0.5, n)
    ts = hourly_series(y, seasons=[SeasonSpec("fast", 8), SeasonSpec("slow", 56)])
    spec = ModelSpec.for_series(ts, ar_adjustment_enabled=True)
    params = SmoothingParams(alpha=0.2, gamma=0.02, deltas=(0.3, 0.1), ar1=0.4)
    seeds = ModelState(
        level=50.0, trend=0.0,
        seasonal={"fast": np.ones(8), "slow": np.ones(56)},
    )
    fit = smooth_pass(ts, spec, params, seeds.copy())
    oracle = LiteralRecursion(ts, spec, params, seeds)
    np.testing.assert_allclose(fit.fitted, oracle.fit(), rtol=1e-12)
    np.testing.assert_allclose(
        forecast(fit.final_state, spec, params, 24),
        oracle.predict(24), rtol=1e-12,
    )
    # The AR term must be active: residuals feed the next one-step forecast.
    manual_second = fit.fitted[1] - params.ar1 * fit.one_step_errors[0]
    assert manual_second != pytest.approx(fit.fitted[1])
