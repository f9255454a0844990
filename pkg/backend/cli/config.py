import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from dwp.config.enums import ExportMode, LayoutType, ModelForm
from dwp.config.filter_config import FilterConfig, FilterThresholds
from dwp.errors import SchemaError

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "pipeline_config.yaml"


def _env_flag(name: str, default: str = "0") -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


class Config:
    NSIM = int(os.getenv('DWP_NSIM', '10000'))
    SEED = os.getenv('DWP_SEED')
    N_JOBS = int(os.getenv('DWP_N_JOBS', '1'))
    LOG_LEVEL = os.getenv('DWP_LOG_LEVEL', 'INFO')
    JSON_LOGS = _env_flag('DWP_JSON_LOGS')


class RunConfig(BaseModel):
    """Inputs and options shared by the pipeline commands"""
    layout_type: LayoutType = LayoutType.DISTANCE
    layout: Optional[Path] = None
    carcasses: Optional[Path] = None
    srad: Optional[float] = Field(default=None, gt=0)
    sc_var: Optional[str] = None
    not_searched: List[str] = Field(default_factory=list)
    cc_col: Optional[str] = None
    cell_size: Optional[float] = Field(default=None, gt=0)
    models: List[str] = Field(default_factory=lambda: [f.value for f in ModelForm.standard()])
    model: Optional[str] = None
    filter_preset: str = "default"
    thresholds: Dict[str, Any] = Field(default_factory=dict)
    nsim: int = Field(default_factory=lambda: Config.NSIM, ge=1)
    seed: Optional[int] = Field(default_factory=lambda: int(Config.SEED) if Config.SEED else None)
    n_jobs: int = Field(default_factory=lambda: Config.N_JOBS)
    level: float = Field(default=0.9, gt=0, lt=1)
    mode: ExportMode = ExportMode.POINT
    round_digits: int = Field(default=3, ge=0)
    out: Path = Path("dwp_out")

    @field_validator("models")
    @classmethod
    def _known_models(cls, value):
        for name in value:
            ModelForm.parse(name)
        return value

    @field_validator("model")
    @classmethod
    def _known_model(cls, value):
        if value is not None:
            ModelForm.parse(value)
        return value

    @field_validator("filter_preset")
    @classmethod
    def _known_preset(cls, value):
        FilterConfig.get_preset(value)
        return value

    def check_inputs(self):
        """Layout inputs are only needed by prep"""
        if self.layout_type is LayoutType.DISTANCE:
            if self.srad is None:
                raise SchemaError("Distance layouts need --srad", column="srad")
            if self.carcasses is None:
                raise SchemaError("Distance layouts need a carcass table", column="carcasses")
        elif self.layout is None:
            raise SchemaError(f"{self.layout_type.value} layouts need a layout file", column="layout")
        return self

    @property
    def forms(self) -> List[ModelForm]:
        return [ModelForm.parse(name) for name in self.models]

    @property
    def filter_thresholds(self) -> FilterThresholds:
        base = FilterConfig.get_preset(self.filter_preset)
        if not self.thresholds:
            return base
        merged = {**base.to_dict(), **self.thresholds}
        try:
            return FilterThresholds.from_dict(merged)
        except (TypeError, ValueError) as err:
            raise SchemaError(f"Invalid filter thresholds: {err}", column="thresholds") from None


def load_run_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """YAML defaults, then command-line overrides (None values ignored)"""
    data: Dict[str, Any] = {}
    path = Path(path) if path else DEFAULT_CONFIG_PATH
    if path.exists():
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    elif path != DEFAULT_CONFIG_PATH:
        raise SchemaError(f"Config file not found: {path}")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None and v != ()})
    try:
        return RunConfig(**data)
    except ValidationError as err:
        first = err.errors()[0]
        column = ".".join(str(p) for p in first.get("loc", ())) or None
        raise SchemaError(f"Invalid run configuration: {first.get('msg')}", column=column) from None
