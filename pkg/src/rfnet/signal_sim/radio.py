from __future__ import annotations

import math
from dataclasses import dataclass, replace

VARIANTS = ("wifi", "fmcw", "ir")
VARIANT_CODES = {"wifi": 0, "fmcw": 1, "ir": 2}


class ConfigError(ValueError):
    """A radio, scene or dataset configuration is infeasible."""


@dataclass(frozen=True)
class RadioConfig:
    """Radio front-end description shared by the three signal models.

    Only the fields relevant to ``variant`` matter: ``subcarrier_spacing`` for
    Wi-Fi, ``bandwidth``/``sweep_time`` for FMCW, ``bandwidth``/``sample_rate``
    for impulse radio. Times are seconds, frequencies Hz.
    """

    variant: str = "wifi"
    f_c: float = 5.8e9
    K: int = 64
    L: int = 16
    Nr: int = 2
    slow_time_interval: float = 0.01
    subcarrier_spacing: float = 312.5e3
    bandwidth: float = 500e6
    sweep_time: float = 100e-6
    sample_rate: float = 4e9

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown radio variant {self.variant!r}")
        if min(self.K, self.L, self.Nr) < 1:
            raise ConfigError("K, L and Nr must all be >= 1")
        for name in ("f_c", "slow_time_interval", "subcarrier_spacing", "bandwidth", "sweep_time", "sample_rate"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    # -- derived quantities --------------------------------------------------
    @property
    def chirp_slope(self):
        return self.bandwidth / self.sweep_time

    @property
    def pulse_duration(self):
        return 1.0 / self.bandwidth

    @property
    def pulse_std(self):
        # -10 dB bandwidth taken equal to the nominal bandwidth
        return 1.0 / (2 * math.pi * self.bandwidth * math.sqrt(math.log10(math.e)))

    def subcarrier_freqs(self):
        return [self.f_c + l * self.subcarrier_spacing for l in range(self.L)]

    @property
    def slow_time_nyquist(self):
        return 0.5 / self.slow_time_interval

    @property
    def duration(self):
        return self.K * self.slow_time_interval

    @property
    def max_delay(self):
        """Largest path delay the fast-time axis can represent unambiguously."""
        if self.variant == "wifi":
            return 1.0 / self.subcarrier_spacing
        if self.variant == "fmcw":
            # beat frequency must stay below L / (2 T_S)
            return self.L / (2.0 * self.bandwidth)
        return self.L / self.sample_rate - 0.5 * self.pulse_duration

    @property
    def default_delay_range(self):
        if self.variant == "wifi":
            return (5e-9, 100e-9)
        return (0.1 * self.max_delay, 0.55 * self.max_delay)

    def with_dims(self, K=None, L=None, Nr=None):
        return replace(self, K=K or self.K, L=L or self.L, Nr=Nr or self.Nr)

    # -- presets ---------------------------------------------------------------
    @classmethod
    def wifi(cls, **kw):
        return cls(**{"variant": "wifi", "K": 64, "L": 16, "Nr": 2, **kw})

    @classmethod
    def fmcw(cls, **kw):
        return cls(**{"variant": "fmcw", "K": 64, "L": 64, "Nr": 1, **kw})

    @classmethod
    def ir(cls, **kw):
        return cls(**{"variant": "ir", "f_c": 7.3e9, "bandwidth": 1e9, "K": 64, "L": 64, "Nr": 1, **kw})

    @classmethod
    def preset(cls, variant, **kw):
        try:
            return getattr(cls, variant)(**kw)
        except AttributeError:
            raise ConfigError(f"unknown radio variant {variant!r}") from None
