"""Declarative pipeline configuration (JSON).

A config file may omit whole sections, which then keep their defaults, but
a section that is present must list every key of that section.
"""

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, Spo2Error
from .features import AcExtractorConfig, plan_windows
from .pulse import PulseConfig
from .regress import (
    CV_MAX_ITER,
    DEFAULT_C_GRID,
    DEFAULT_EPSILON,
    DEFAULT_FOLDS,
    DEFAULT_GAMMA_GRID,
    DEFAULT_LAMBDA_GRID,
    SMOOTH_WINDOWS,
)
from .roi import RoiConfig
from .ingest import OXIMETER_DELAY

DEFAULTS = {
    "windows": {"window": 10.0, "step": 1.0},
    "align": {"video_lead": 0.0, "oximeter_delay": OXIMETER_DELAY},
    "roi": {"rect": None, "morph_radius": 2, "median_window": 7, "min_coverage": 0.01,
            "skin_above": True, "static_mask": False},
    "pulse": {"pos_window": 1.6, "stft_window": 10.0, "stft_hop": 1.0, "fft_pad": 1,
              "band": [0.7, 3.0], "tracker": "dp", "jump_penalty": 0.5, "max_jump": 10},
    "features": {"mode": "narrow_abp", "half_bandwidth": None, "fixed_band": [1.0, 2.0],
                 "ac_estimator": "peak_to_valley_mean", "order": 8, "context": 10.0,
                 "dc_order": 2, "dc_cutoff": 0.1},
    "regress": {"regressor": "svr", "lambda_grid": list(DEFAULT_LAMBDA_GRID),
                "C_grid": list(DEFAULT_C_GRID), "gamma_grid": list(DEFAULT_GAMMA_GRID),
                "epsilon": DEFAULT_EPSILON, "folds": DEFAULT_FOLDS, "cv_max_iter": CV_MAX_ITER,
                "smooth": SMOOTH_WINDOWS},
}


@dataclass
class PipelineConfig:
    tree: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self):
        self.validate()

    def __getitem__(self, section):
        return self.tree[section]

    # typed views
    @property
    def roi(self):
        d = dict(self.tree["roi"])
        d["rect"] = None if d["rect"] is None else tuple(int(v) for v in d["rect"])
        return RoiConfig(**d)

    @property
    def pulse(self):
        d = dict(self.tree["pulse"])
        d["band"] = tuple(float(v) for v in d["band"])
        return PulseConfig(**d)

    @property
    def ac(self):
        d = {k: v for k, v in self.tree["features"].items() if k not in ("dc_order", "dc_cutoff")}
        d["fixed_band"] = tuple(float(v) for v in d["fixed_band"])
        return AcExtractorConfig(**d)

    @property
    def regress(self):
        return dict(self.tree["regress"])

    def validate(self):
        """Build every typed view so each module checks its own preconditions."""
        try:
            self.roi, self.pulse, self.ac
            w = self.tree["windows"]
            plan_windows(w["window"], 1.0, w["window"], w["step"])
            f = self.tree["features"]
            if int(f["dc_order"]) < 1 or not f["dc_cutoff"] > 0:
                raise ConfigError("features.dc_order must be >= 1 and dc_cutoff > 0")
            r = self.tree["regress"]
            if r["regressor"] not in ("ridge", "svr"):
                raise ConfigError(f"regress.regressor must be ridge or svr, got {r['regressor']!r}")
            for g in ("lambda_grid", "C_grid", "gamma_grid"):
                if not r[g]:
                    raise ConfigError(f"regress.{g} is empty")
            if int(r["folds"]) < 2 or int(r["smooth"]) < 1:
                raise ConfigError("regress.folds must be >= 2 and smooth >= 1")
            a = self.tree["align"]
            if a["video_lead"] < 0 or a["oximeter_delay"] < 0:
                raise ConfigError("align offsets must be non-negative")
        except ConfigError:
            raise
        except Spo2Error as exc:
            raise ConfigError(f"invalid configuration: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration value: {exc}") from None
        return self

    def override(self, section, key, value):
        if value is not None:
            self.tree[section][key] = value
            self.validate()
        return self

    def to_json(self):
        return json.dumps(self.tree, indent=1)


def from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("config root must be an object")
    tree = copy.deepcopy(DEFAULTS)
    for section, values in d.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        unknown = sorted(set(values) - set(DEFAULTS[section]))
        if unknown:
            raise ConfigError(f"unknown key {section}.{unknown[0]}")
        missing = [k for k in DEFAULTS[section] if k not in values]
        if missing:
            raise ConfigError(f"missing config key {section}.{missing[0]}")
        tree[section] = dict(values)
    return PipelineConfig(tree)


def load_config(path=None):
    if path is None:
        return PipelineConfig()
    try:
        d = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return from_dict(d)
