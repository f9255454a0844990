import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Tuple


@dataclass(frozen=True)
class FilterThresholds:
    """Plausibility limits applied by the model filter"""
    # (distance m, max probability beyond it)
    rtail: Tuple[Tuple[float, float], ...] = ((200.0, 0.01), (150.0, 0.05))
    # (distance m, max probability within it)
    ltail: Tuple[Tuple[float, float], ...] = ((20.0, 0.50), (50.0, 0.90))
    aicc_max_delta: float = 10.0
    hin_delta_pwin: float = 0.10

    def __post_init__(self):
        for dist, prob in self.rtail + self.ltail:
            if dist <= 0:
                raise ValueError(f"Tail distance must be positive, got {dist}")
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"Tail probability must be in [0, 1], got {prob}")
        if self.aicc_max_delta < 0 or self.hin_delta_pwin < 0:
            raise ValueError("aicc_max_delta and hin_delta_pwin must be non-negative")

    def override(self, **kwargs) -> "FilterThresholds":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        for key in ("rtail", "ltail"):
            if key in data:
                data[key] = tuple((float(d), float(p)) for d, p in data[key])
        return cls(**data)


class FilterConfig:
    """Threshold presets"""

    PRESETS: Dict[str, FilterThresholds] = {
        "default": FilterThresholds(),
        # passes every extensible model
        "permissive": FilterThresholds(
            rtail=((200.0, 1.0), (150.0, 1.0)),
            ltail=((20.0, 1.0), (50.0, 1.0)),
            aicc_max_delta=math.inf,
            hin_delta_pwin=math.inf,
        ),
    }

    @classmethod
    def get_preset(cls, name: str = "default") -> FilterThresholds:
        try:
            return cls.PRESETS[name]
        except KeyError:
            raise ValueError(f"Unknown filter preset '{name}'") from None
