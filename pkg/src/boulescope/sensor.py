"""Emulated HC-SR04 ultrasonic ranger mounted in the jack.

Time-of-flight physics, range limits, and an environment-dependent noise
model (truncated Gaussian + constant bias + grid quantization).  Everything
here is pure and seedable: a measurement is a deterministic function of
(true distance, environment, seed, sequence number).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from decimal import Decimal

INDOOR = "indoor"
OUTDOOR = "outdoor"

# Noise levels fitted so the expected max-abs deviation of a 3-reading batch
# matches the published accuracy table (0.03 cm indoor, 0.05 cm outdoor).
# Regenerate with scripts/calibrate_noise.py after touching the noise model.
CALIBRATED_SIGMA_INDOOR = 0.0256
CALIBRATED_SIGMA_OUTDOOR = 0.0363

# Outdoor readings in the reference data skew high (mean signed residual
# about +0.03 cm over 12 readings); modeled as a constant bias.
OUTDOOR_BIAS_CM = 0.02

DEFAULT_TEMP_INDOOR_C = 20.0
DEFAULT_TEMP_OUTDOOR_C = 30.0

TEMP_MODEL_RANGE_C = (-20.0, 50.0)

# Gaussian draws are truncated at this many sigmas.
NOISE_TRUNCATION = 2.0


class SensorError(Exception):
    """Base class for sensor model failures."""


class OutOfRangeError(SensorError):
    """Distance outside the sensor's measurable span."""

    def __init__(self, value_cm: float, message: str | None = None):
        self.value_cm = value_cm
        super().__init__(message or f"distance {value_cm:.4f} cm outside sensor range")


class TemperatureRangeError(SensorError):
    """Temperature outside the modeled acoustic range."""


class CalibrationError(SensorError):
    """Noise calibration target unreachable."""


@dataclass(frozen=True)
class SensorSpec:
    """Datasheet constants of the HC-SR04 module."""

    min_range_cm: float = 2.0
    max_range_cm: float = 400.0
    accuracy_cm: float = 0.3
    frequency_khz: float = 40.0

    def __post_init__(self):
        if not self.min_range_cm < self.max_range_cm:
            raise ValueError("min_range_cm must be below max_range_cm")
        if self.accuracy_cm <= 0:
            raise ValueError("accuracy_cm must be positive")


HC_SR04 = SensorSpec()


@dataclass(frozen=True)
class EnvironmentConfig:
    """Noise and temperature parameters for one measurement setting."""

    kind: str
    temperature_c: float
    noise_sigma_cm: float
    bias_cm: float = 0.0
    quantum_cm: float = 0.01

    def __post_init__(self):
        if self.kind not in (INDOOR, OUTDOOR):
            raise ValueError(f"unknown environment kind {self.kind!r}")
        if self.noise_sigma_cm < 0:
            raise ValueError("noise_sigma_cm must be >= 0")
        if self.quantum_cm <= 0:
            raise ValueError("quantum_cm must be > 0")

    @classmethod
    def indoor(cls, noise_sigma_cm: float = CALIBRATED_SIGMA_INDOOR) -> EnvironmentConfig:
        return cls(INDOOR, DEFAULT_TEMP_INDOOR_C, noise_sigma_cm, bias_cm=0.0)

    @classmethod
    def outdoor(cls, noise_sigma_cm: float = CALIBRATED_SIGMA_OUTDOOR) -> EnvironmentConfig:
        return cls(OUTDOOR, DEFAULT_TEMP_OUTDOOR_C, noise_sigma_cm, bias_cm=OUTDOOR_BIAS_CM)

    @classmethod
    def noiseless(cls, kind: str = INDOOR) -> EnvironmentConfig:
        """Exact readings; useful for scripted matches and protocol tests."""
        temp = DEFAULT_TEMP_INDOOR_C if kind == INDOOR else DEFAULT_TEMP_OUTDOOR_C
        return cls(kind, temp, 0.0, bias_cm=0.0)


@dataclass(frozen=True)
class Measurement:
    """One sensed distance reading."""

    echo_duration_us: float
    distance_cm: float
    environment: str
    sequence_no: int
    timestamp: float = 0.0


def quantize(value_cm: float, quantum_cm: float = 0.01) -> float:
    """Snap a length onto the reading grid, rounding halves away from zero."""
    steps = math.floor(abs(value_cm) / quantum_cm + 0.5)
    decimals = max(0, -Decimal(str(quantum_cm)).as_tuple().exponent)
    return round(math.copysign(steps * quantum_cm, value_cm), decimals)


def speed_of_sound(temperature_c: float) -> float:
    """Speed of sound in air, cm/us, affine in temperature."""
    lo, hi = TEMP_MODEL_RANGE_C
    if not lo <= temperature_c <= hi:
        raise TemperatureRangeError(
            f"temperature {temperature_c} C outside modeled range [{lo}, {hi}]"
        )
    return (331.3 + 0.606 * temperature_c) * 1e-4


def echo_duration(true_distance_cm: float, temperature_c: float) -> float:
    """Round-trip echo time in microseconds for a target at the given range."""
    spec = HC_SR04
    if not spec.min_range_cm <= true_distance_cm <= spec.max_range_cm:
        raise OutOfRangeError(true_distance_cm)
    return 2.0 * true_distance_cm / speed_of_sound(temperature_c)


def distance_from_echo(echo_duration_us: float, temperature_c: float) -> float:
    """Inverse of echo_duration: target range implied by an echo time."""
    if echo_duration_us <= 0:
        raise ValueError("echo duration must be positive")
    distance = echo_duration_us * speed_of_sound(temperature_c) / 2.0
    spec = HC_SR04
    # tolerance band so inverting an in-range echo never trips the guard
    if not spec.min_range_cm - 1e-9 <= distance <= spec.max_range_cm + 1e-9:
        raise OutOfRangeError(distance)
    return distance


def _rng_for(seed: int, sequence_no: int) -> random.Random:
    # Arithmetic mix keeps the draw deterministic across runs and platforms.
    return random.Random(seed * 1_000_003 + sequence_no)


def _truncated_standard_normal(rng: random.Random) -> float:
    z = rng.gauss(0.0, 1.0)
    while abs(z) > NOISE_TRUNCATION:
        z = rng.gauss(0.0, 1.0)
    return z


def measure(
    true_distance_cm: float,
    env: EnvironmentConfig,
    seed: int,
    sequence_no: int,
    timestamp: float = 0.0,
) -> Measurement:
    """Simulate one ranging of a target at ``true_distance_cm``.

    The reading is quantize(true + bias + sigma * z) with z a standard
    Gaussian truncated at +/-2.  A noisy reading that leaves the sensor span
    raises OutOfRangeError; callers may retry with a fresh sequence_no.
    """
    spec = HC_SR04
    if not spec.min_range_cm <= true_distance_cm <= spec.max_range_cm:
        raise OutOfRangeError(true_distance_cm)
    z = _truncated_standard_normal(_rng_for(seed, sequence_no))
    noisy = true_distance_cm + env.bias_cm + env.noise_sigma_cm * z
    distance = quantize(noisy, env.quantum_cm)
    if not spec.min_range_cm <= distance <= spec.max_range_cm:
        raise OutOfRangeError(distance)
    return Measurement(
        echo_duration_us=echo_duration(distance, env.temperature_c),
        distance_cm=distance,
        environment=env.kind,
        sequence_no=sequence_no,
        timestamp=timestamp,
    )


def estimate_mean_max_abs_deviation(
    sigma_cm: float,
    samples_per_trial: int,
    trials: int,
    seed: int,
    bias_cm: float = 0.0,
    quantum_cm: float = 0.01,
    true_distance_cm: float = 10.0,
) -> float:
    """Monte Carlo estimate of E[max over a batch of |reading - true|].

    Runs the full measurement path, so it exercises truncation, bias and
    quantization exactly as live readings do.  For on-grid true distances the
    statistic does not depend on the distance chosen.
    """
    env = EnvironmentConfig(
        INDOOR, DEFAULT_TEMP_INDOOR_C, sigma_cm, bias_cm=bias_cm, quantum_cm=quantum_cm
    )
    total = 0.0
    seq = 0
    for _ in range(trials):
        worst = 0.0
        for _ in range(samples_per_trial):
            m = measure(true_distance_cm, env, seed, seq)
            seq += 1
            worst = max(worst, abs(m.distance_cm - true_distance_cm))
        total += worst
    return total / trials


def calibrate_sigma(
    target_mean_max_dev_cm: float,
    samples_per_trial: int,
    trials: int,
    seed: int,
    bias_cm: float = 0.0,
    quantum_cm: float = 0.01,
    tolerance: float = 0.05,
) -> float:
    """Fit the noise sigma whose expected batch max-abs deviation hits a target.

    Bisection over sigma in (0, 1] cm against a Monte Carlo estimate that
    reuses one set of truncated-normal draws across iterations (common random
    numbers), so the objective is monotone and the search stable.  Raises
    CalibrationError if the target cannot be met within ``tolerance``
    (relative) anywhere in the bracket.
    """
    if samples_per_trial < 1:
        raise ValueError("samples_per_trial must be >= 1")
    if trials < 1000:
        raise ValueError("calibration needs at least 1000 trials")
    if target_mean_max_dev_cm <= 0:
        raise CalibrationError("target deviation must be positive")

    rng = random.Random(seed)
    draws = [
        [_truncated_standard_normal(rng) for _ in range(samples_per_trial)]
        for _ in range(trials)
    ]
    # Statistic for an on-grid truth: deviation of the quantized noisy offset.
    true_cm = 10.0

    def mean_max_dev(sigma: float) -> float:
        total = 0.0
        for batch in draws:
            worst = 0.0
            for z in batch:
                reading = quantize(true_cm + bias_cm + sigma * z, quantum_cm)
                worst = max(worst, abs(reading - true_cm))
            total += worst
        return total / trials

    lo, hi = 1e-6, 1.0
    if mean_max_dev(hi) < target_mean_max_dev_cm:
        raise CalibrationError(
            f"target {target_mean_max_dev_cm} cm unreachable with sigma <= {hi} cm"
        )
    if mean_max_dev(lo) > target_mean_max_dev_cm:
        raise CalibrationError(
            f"target {target_mean_max_dev_cm} cm below the floor set by bias/quantization"
        )
    for _ in range(50):
        mid = (lo + hi) / 2.0
        if mean_max_dev(mid) < target_mean_max_dev_cm:
            lo = mid
        else:
            hi = mid
    sigma = (lo + hi) / 2.0
    achieved = mean_max_dev(sigma)
    if abs(achieved - target_mean_max_dev_cm) > tolerance * target_mean_max_dev_cm:
        raise CalibrationError(
            f"calibration stalled at sigma={sigma:.5f} "
            f"(achieved {achieved:.5f}, target {target_mean_max_dev_cm})"
        )
    return sigma
