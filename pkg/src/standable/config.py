"""Run configuration: versioned JSON schema, strict keys, full echo.

Every report embeds the effective configuration (defaults merged with file
and flag overrides) plus the seed, so any run can be reproduced from its
report alone.  Unknown keys are rejected by name.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .losses import LossWeights, TiltProbe
from .optimize import OptimizerConfig
from .platforms import Platform
from .simulation import SimParams

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Bad configuration input (unknown key, wrong type, bad value)."""


_SIM_KEYS = (
    "dt", "end_time", "contact_stiffness", "contact_damping",
    "friction_coeff", "friction_stiffness", "density", "gravity",
)
_WEIGHT_KEYS = ("fidelity", "stand", "stable", "normal", "bottom_laplacian")
_OPT_KEYS = (
    "max_iterations", "learning_rate_fraction", "beta1", "beta2", "eps",
    "stand_stride", "stand_horizon", "stand_grad_clip_scale", "check_stride",
    "trd_threshold", "displacement_cap_fraction", "bottom_band_fraction",
    "contact_band_fraction", "contact_cap", "full_vertex_contact",
    "max_lr_halvings", "tilt_angle", "tilt_directions",
)
_EVAL_KEYS = ("angles", "trials", "quadrature_dt")
_TOP_KEYS = (
    "schema_version", "seed", "threads", "platform", "sim", "weights",
    "optimizer", "eval",
)


def parse_platform(spec):
    """Parse 'ground', 'incline:<deg>' or 'sphere:<cx,cy,cz,r>'."""
    if isinstance(spec, Platform):
        return spec
    if spec == "ground":
        return Platform.ground()
    if spec.startswith("incline:"):
        text = spec.split(":", 1)[1]
        if text.endswith("deg"):
            text = text[:-3]
        try:
            deg = float(text)
        except ValueError:
            raise ConfigError(f"bad incline angle {spec!r}")
        if not 0.0 <= deg < 90.0:
            raise ConfigError(f"incline angle {deg} out of [0, 90) degrees")
        return Platform.incline(np.deg2rad(deg))
    if spec.startswith("sphere:"):
        parts = spec.split(":", 1)[1].split(",")
        if len(parts) != 4:
            raise ConfigError(f"sphere spec needs cx,cy,cz,r: {spec!r}")
        try:
            cx, cy, cz, r = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"bad sphere numbers in {spec!r}")
        if r <= 0:
            raise ConfigError("sphere radius must be positive")
        return Platform.sphere((cx, cy, cz), r)
    raise ConfigError(
        f"unknown platform {spec!r}; use ground, incline:<deg> or "
        "sphere:<cx,cy,cz,r>"
    )


def platform_to_spec(platform):
    if platform.kind == "ground":
        return "ground"
    if platform.kind == "incline":
        return f"incline:{np.rad2deg(platform.angle):g}"
    c = platform.center
    return f"sphere:{c[0]:g},{c[1]:g},{c[2]:g},{platform.radius:g}"


@dataclass
class RunConfig:
    """Effective configuration of one CLI run."""

    seed: int = 0
    threads: int = 1
    platform: Platform = field(default_factory=Platform.ground)
    sim: SimParams = field(default_factory=SimParams)
    weights: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    eval_angles: tuple = (0.0, 0.01, 0.02, 0.04, 0.08)
    eval_trials: int = 100
    quadrature_dt: float = 0.02

    def echo(self):
        """Full effective config as a JSON-ready dict (for reports)."""
        opt = asdict(self.optimizer)
        opt.pop("sim", None)
        opt.pop("weights", None)
        probe = opt.pop("probe", {"angle": 0.05, "n_directions": 20})
        opt["tilt_angle"] = probe["angle"]
        opt["tilt_directions"] = probe["n_directions"]
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "threads": self.threads,
            "platform": platform_to_spec(self.platform),
            "sim": asdict(self.sim),
            "weights": self.weights.as_dict(),
            "optimizer": opt,
            "eval": {
                "angles": list(self.eval_angles),
                "trials": self.eval_trials,
                "quadrature_dt": self.quadrature_dt,
            },
        }


def _check_keys(section, data, allowed):
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {section} config")


def _apply(obj, data, section):
    for key, value in data.items():
        current = getattr(obj, key)
        if isinstance(current, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{section}.{key} must be a boolean")
        elif isinstance(current, int) and not isinstance(value, (int,)):
            raise ConfigError(f"{section}.{key} must be an integer")
        elif isinstance(current, float) and not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{key} must be a number")
        setattr(obj, key, value)


def build_config(data=None):
    """Build a :class:`RunConfig` from a parsed JSON dict."""
    data = dict(data or {})
    _check_keys("top-level", data, _TOP_KEYS)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {version}; expected {SCHEMA_VERSION}"
        )
    cfg = RunConfig()
    if "seed" in data:
        if not isinstance(data["seed"], int):
            raise ConfigError("seed must be an integer")
        cfg.seed = data["seed"]
    if "threads" in data:
        if not isinstance(data["threads"], int) or data["threads"] < 1:
            raise ConfigError("threads must be a positive integer")
        cfg.threads = data["threads"]
    if "platform" in data:
        cfg.platform = parse_platform(data["platform"])

    sim_data = data.get("sim", {})
    _check_keys("sim", sim_data, _SIM_KEYS)
    _apply(cfg.sim, sim_data, "sim")
    try:
        cfg.sim.__post_init__()
    except ValueError as exc:
        raise ConfigError(str(exc))

    weight_data = data.get("weights", {})
    _check_keys("weights", weight_data, _WEIGHT_KEYS)
    _apply(cfg.weights, weight_data, "weights")
    try:
        cfg.weights.__post_init__()
    except ValueError as exc:
        raise ConfigError(str(exc))

    opt_data = dict(data.get("optimizer", {}))
    _check_keys("optimizer", opt_data, _OPT_KEYS)
    probe = TiltProbe(
        angle=opt_data.pop("tilt_angle", 0.05),
        n_directions=opt_data.pop("tilt_directions", 20),
    )
    _apply(cfg.optimizer, opt_data, "optimizer")
    cfg.optimizer.probe = probe
    cfg.optimizer.sim = cfg.sim
    cfg.optimizer.weights = cfg.weights
    try:
        cfg.optimizer.__post_init__()
    except ValueError as exc:
        raise ConfigError(str(exc))

    eval_data = data.get("eval", {})
    _check_keys("eval", eval_data, _EVAL_KEYS)
    if "angles" in eval_data:
        angles = eval_data["angles"]
        if not isinstance(angles, (list, tuple)) or not angles:
            raise ConfigError("eval.angles must be a nonempty list")
        cfg.eval_angles = tuple(float(a) for a in angles)
    if "trials" in eval_data:
        if not isinstance(eval_data["trials"], int):
            raise ConfigError("eval.trials must be an integer")
        cfg.eval_trials = eval_data["trials"]
    if "quadrature_dt" in eval_data:
        cfg.quadrature_dt = float(eval_data["quadrature_dt"])
    return cfg


def load_config(path=None, overrides=None):
    """Load config JSON from ``path`` (optional) and apply overrides."""
    data = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, name = key.partition(".")
        if name:
            data.setdefault(section, {})[name] = value
        else:
            data[key] = value
    return build_config(data)
