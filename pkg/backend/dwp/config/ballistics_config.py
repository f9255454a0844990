from dataclasses import dataclass
from typing import Dict, Optional

from scipy import optimize, special

from .enums import Species, WindKind

G = 9.807  # m/s^2


@dataclass(frozen=True)
class TurbineSpec:
    nacelle_height: float = 80.0    # m
    blade_length: float = 45.0      # m
    tip_speed_ratio: float = 6.0
    hellman: float = 0.22
    gravity: float = G

    def __post_init__(self):
        if min(self.nacelle_height, self.blade_length, self.tip_speed_ratio, self.gravity) <= 0:
            raise ValueError("Turbine dimensions, tip speed ratio and gravity must be positive")
        if self.hellman < 0:
            raise ValueError("Hellman exponent must be non-negative")


@dataclass(frozen=True)
class CarcassAero:
    """Aerodynamics summarized by terminal velocity"""
    terminal_velocity: float  # m/s

    def __post_init__(self):
        if self.terminal_velocity <= 0:
            raise ValueError("terminal_velocity must be positive")

    @property
    def drag(self) -> float:
        return G / self.terminal_velocity ** 2

    @classmethod
    def for_species(cls, species: Species) -> "CarcassAero":
        return cls(terminal_velocity=species.terminal_velocity)


@dataclass(frozen=True)
class WindRegime:
    """Nacelle-height wind speed distribution for carcass-producing events"""
    kind: WindKind
    speed: Optional[float] = None   # constant regime only
    mean: Optional[float] = None    # weibull regimes
    sd: Optional[float] = None
    cutoff: float = 3.5             # no carcasses below this wind speed
    upper: float = 20.0             # moderate regime support

    def __post_init__(self):
        if self.kind is WindKind.CONSTANT and (self.speed is None or self.speed < 0):
            raise ValueError("constant wind regime needs a non-negative speed")
        if self.kind in (WindKind.WEIBULL_LOW, WindKind.WEIBULL_HIGH):
            if not self.mean or not self.sd or self.mean <= 0 or self.sd <= 0:
                raise ValueError("weibull wind regime needs positive mean and sd")

    def weibull_parameters(self):
        """(shape, scale) matching the regime mean and sd"""
        cv2 = (self.sd / self.mean) ** 2

        def gap(k):
            g1 = special.gamma(1 + 1 / k)
            return special.gamma(1 + 2 / k) / g1 ** 2 - 1 - cv2

        shape = optimize.brentq(gap, 0.2, 50.0, xtol=1e-12)
        scale = self.mean / special.gamma(1 + 1 / shape)
        return shape, scale

    @staticmethod
    def moderate_density(w):
        """Unnormalized density of the moderate regime"""
        return 10 ** (-0.04 * (w - 7) ** 2 - 0.8)


@dataclass(frozen=True)
class DetectionParams:
    """Carcass persistence and searcher efficiency"""
    search_interval: float = 5.0    # days
    season_length: float = 150.0    # days
    persistence_shape: float = 0.64
    persistence_scale: float = 1.705
    se_first: float = 0.8
    se_decay: float = 0.75

    def searcher_efficiency(self, k):
        """Detection probability on the k-th search after arrival (k >= 1)"""
        return self.se_first * self.se_decay ** (k - 1)


class BallisticsConfig:
    """Ballistics presets"""

    WIND_REGIMES: Dict[str, WindRegime] = {
        "weibull_low": WindRegime(WindKind.WEIBULL_LOW, mean=5.32, sd=2.78),
        "weibull_high": WindRegime(WindKind.WEIBULL_HIGH, mean=9.18, sd=2.1),
        "moderate": WindRegime(WindKind.MODERATE),
        "constant_4": WindRegime(WindKind.CONSTANT, speed=4.0),
        "constant_8": WindRegime(WindKind.CONSTANT, speed=8.0),
        "constant_12": WindRegime(WindKind.CONSTANT, speed=12.0),
    }

    FLIGHT_SPEED = 8.0  # m/s, variable flight mode
    CARCASSES_PER_REPLICATE = 200
    MIN_FOUND = 5

    @classmethod
    def get_wind_regime(cls, name: str) -> WindRegime:
        if name in cls.WIND_REGIMES:
            return cls.WIND_REGIMES[name]
        if name.startswith("constant_"):
            return WindRegime(WindKind.CONSTANT, speed=float(name.split("_", 1)[1]))
        raise ValueError(f"Unknown wind regime '{name}'")

    @staticmethod
    def moderate_envelope():
        return WindRegime.moderate_density(7.0)
