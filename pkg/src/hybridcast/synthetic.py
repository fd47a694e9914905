"""Deterministic synthetic hourly air-quality data for desk-scale runs.

The pollutant level is a smooth squash of a latent process built from the
scales real hourly series show: half-day and daily cycles, a weekly cycle,
an annual cycle, weather-regime offsets, an AR(1) component and a slow
mean-reverting random walk (pollution episodes).  The squash keeps values
strictly inside the documented plausible range without creating flat
clipping plateaus, and makes the series a nonlinear function of its
drivers.  Other pollutants are correlated transforms of the same latent
state; meteorology gets its own seasonal/diurnal structure.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np

from .datapipe import (
    CONTINUOUS_COLUMNS,
    TimeSeriesFrame,
    WEATHER_CATEGORIES,
    wind_to_components,
)

__all__ = ["synth_generate", "DEFAULT_START"]

DEFAULT_START = datetime(2015, 1, 2, 0)

# Weather regimes: (category, base weight, pollution offset on the latent scale).
_WEATHER_EFFECTS = {
    "Sunny": -0.25,
    "Fine with occasional clouds": -0.15,
    "Cloudy": 0.0,
    "Overcast": 0.15,
    "Light snow": -0.1,
    "Moderate snow": -0.2,
    "Snow shower": -0.2,
    "Sleet": -0.1,
    "Light rain": -0.3,
    "Drizzle": -0.2,
    "Shower": -0.4,
    "Strong shower": -0.5,
    "Thunder shower": -0.5,
    "Moderate rain": -0.4,
    "Heavy rain": -0.6,
    "Mist": 0.5,
    "Haze": 0.9,
    "Fog": 0.6,
    "Floating dust": 0.7,
    "Sand blowing": 0.4,
}


def _ar1(rng: np.random.Generator, n: int, phi: float, scale: float) -> np.ndarray:
    out = np.empty(n)
    eps = rng.standard_normal(n) * scale
    out[0] = eps[0] / np.sqrt(1.0 - phi * phi)
    for i in range(1, n):
        out[i] = phi * out[i - 1] + eps[i]
    return out


def _weather_sequence(rng: np.random.Generator, n: int) -> np.ndarray:
    """Persistent weather regimes: each lasts a geometric number of hours."""
    cats = list(WEATHER_EFFECTS_KEYS)
    weights = np.array([6.0, 4.0, 5.0, 4.0, 0.6, 0.4, 0.3, 0.3, 2.0, 1.2,
                        1.0, 0.5, 0.5, 1.0, 0.6, 1.5, 2.5, 1.0, 0.5, 0.4])
    weights = weights / weights.sum()
    out = np.empty(n, dtype=object)
    i = 0
    while i < n:
        cat = rng.choice(cats, p=weights)
        run = 1 + int(rng.geometric(1.0 / 8.0))
        out[i : i + run] = cat
        i += run
    return out


WEATHER_EFFECTS_KEYS = tuple(_WEATHER_EFFECTS)


def synth_generate(n_hours: int, seed: int, start: datetime = DEFAULT_START) -> TimeSeriesFrame:
    """Generate ``n_hours`` of synthetic hourly data (no missing cells).

    Deterministic in (n_hours, seed, start).
    """
    if n_hours < 48:
        raise ValueError(f"n_hours must be >= 48, got {n_hours}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    n = n_hours
    t = np.arange(n, dtype=np.float64)
    timestamps = [start + timedelta(hours=i) for i in range(n)]

    weather = _weather_sequence(rng, n)
    weather_offset = np.array([_WEATHER_EFFECTS[w] for w in weather])

    walk = _ar1(rng, n, phi=0.999, scale=0.02)
    ar = _ar1(rng, n, phi=0.9, scale=0.16)
    latent = (
        -2.2
        + 0.30 * np.sin(2 * np.pi * t / 12.0 + 0.7)
        + 0.55 * np.sin(2 * np.pi * t / 24.0 + 4.0)
        + 0.30 * np.sin(2 * np.pi * t / 168.0 + 1.1)
        + 0.30 * np.sin(2 * np.pi * t / 336.0 + 2.0)  # synoptic fortnight cycle
        + 0.32 * np.sin(2 * np.pi * t / 730.5 + 0.3)
        + 0.34 * np.sin(2 * np.pi * t / 2191.5 + 0.9)
        + 0.40 * np.sin(2 * np.pi * t / 4383.0 + 2.3)  # two pollution seasons per year
        + 0.50 * np.cos(2 * np.pi * t / 8766.0)
        + weather_offset
        + ar
        + walk
        + 0.08 * rng.standard_normal(n)
    )
    squash = 1.0 / (1.0 + np.exp(-latent))
    pm25 = 2.0 + 690.0 * squash

    # Correlated companions: shared latent plus their own noise, kept in range.
    pm10 = np.clip(pm25 * 1.35 + 12.0 * _ar1(rng, n, 0.8, 1.0) + 8.0, 1.0, 1000.0)
    no2 = np.clip(30.0 + 28.0 * squash * 2.2 + 6.0 * _ar1(rng, n, 0.85, 1.0), 2.0, 192.0)
    so2 = np.clip(8.0 + 18.0 * squash + 3.0 * _ar1(rng, n, 0.8, 1.0), 1.0, 248.0)
    o3 = np.clip(
        60.0
        + 35.0 * np.sin(2 * np.pi * ((t % 24.0) - 6.0) / 24.0)
        - 40.0 * squash
        + 8.0 * _ar1(rng, n, 0.85, 1.0),
        1.0,
        339.0,
    )
    co = np.clip(0.4 + 3.0 * squash + 0.25 * _ar1(rng, n, 0.85, 1.0), 0.13, 9.63)

    season = np.cos(2 * np.pi * (t - 24.0 * 196.0) / 8766.0)  # peak mid-July
    temperature = np.clip(
        14.0 + 13.0 * season + 4.5 * np.sin(2 * np.pi * ((t % 24.0) - 9.0) / 24.0)
        + 2.0 * _ar1(rng, n, 0.95, 0.35),
        -17.0, 46.0,
    )
    rain_gate = rng.random(n) < 0.04
    precipitation = np.where(rain_gate, rng.gamma(0.6, 4.0, n), 0.0)
    precipitation = np.clip(precipitation, 0.0, 251.7)
    pressure = np.clip(1017.0 - 8.0 * season + 3.0 * _ar1(rng, n, 0.98, 0.12), 992.0, 1047.0)
    humidity = np.clip(
        43.0 + 14.0 * season * -0.5 + 10.0 * np.sin(2 * np.pi * ((t % 24.0) + 4.0) / 24.0)
        + 8.0 * _ar1(rng, n, 0.95, 0.3),
        5.0, 97.0,
    )

    wind_speed = np.clip(10.0 + 6.0 * _ar1(rng, n, 0.9, 0.5)
                         + 3.0 * np.sin(2 * np.pi * (t % 24.0) / 24.0), 0.0, 55.0)
    wind_dir = (rng.random(n) * 360.0 + 40.0 * _ar1(rng, n, 0.95, 0.3)) % 360.0
    wind_x, wind_y = wind_to_components(wind_speed, wind_dir)

    columns = {
        "pm25": pm25, "pm10": pm10, "no2": no2, "so2": so2, "o3": o3, "co": co,
        "wind_x": wind_x, "wind_y": wind_y, "temperature": temperature,
        "precipitation": precipitation, "pressure": pressure, "humidity": humidity,
    }
    continuous = np.column_stack([columns[name] for name in CONTINUOUS_COLUMNS])
    return TimeSeriesFrame(
        timestamps=timestamps,
        continuous=continuous,
        continuous_names=list(CONTINUOUS_COLUMNS),
        weather=weather,
    )
