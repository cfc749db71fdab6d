"""Scenario configuration: geometry, radio parameters, noise levels and
Monte-Carlo controls, read from and written to JSON."""

import dataclasses
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError

PATHLOSS_MODES = ("literal", "continuous")
TRAIN_LAYOUTS = ("grid", "uniform-random")
METHODS = ("cgp", "nagp")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one positioning experiment.

    Distances are in meters, powers in dBm, losses in dB and shadowing
    variances in dB^2.  ``coord_noise_var`` is in the units of the location
    labels squared (m^2).

    ``pathloss_breakpoints`` is a list of ``(max_distance_m, exponent)``
    pairs with strictly increasing distances; the last pair has
    ``max_distance_m = None`` (unbounded).  The first segment is half-open
    (``d < b``), later segments include their upper bound (``d <= b``), which
    reproduces the 3GPP UMi table: 0 below 10 m, 2 on [10, 45] m, 6.7 beyond.

    ``rrh_sweep``, ``train_restarts`` and ``methods`` drive the experiment
    harness; ``rrh_sweep`` defaults to ``[num_rrh]``.
    """

    area_width_m: float = 200.0
    area_height_m: float = 200.0
    num_rrh: int = 30
    num_train: int = 400
    num_test: int = 25
    ref_distance: float = 10.0
    ref_loss: float = -47.5
    pathloss_breakpoints: tuple = ((10.0, 0.0), (45.0, 2.0), (None, 6.7))
    tx_power: float = 21.0
    noise_power: float = -107.5
    rx_sensitivity: float = -106.5
    shadowing_variances: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    coord_noise_var: float = 1.0
    mc_trials: int = 50
    mc_samples: int = 10
    master_seed: int = 2017
    pathloss_mode: str = "literal"
    train_layout: str = "grid"
    rrh_sweep: tuple = ()
    train_restarts: int = 5
    methods: tuple = METHODS

    def __post_init__(self):
        bps = tuple(
            (None if d is None else float(d), float(eta))
            for d, eta in self.pathloss_breakpoints
        )
        object.__setattr__(self, "pathloss_breakpoints", bps)
        object.__setattr__(
            self, "shadowing_variances", tuple(float(v) for v in self.shadowing_variances)
        )
        sweep = tuple(int(m) for m in self.rrh_sweep) or (int(self.num_rrh),)
        object.__setattr__(self, "rrh_sweep", sweep)
        object.__setattr__(self, "methods", tuple(m.lower() for m in self.methods))
        self.validate()

    @property
    def p0_dbm(self):
        """Uplink RSS at the reference distance, ``tx_power + ref_loss``."""
        return self.tx_power + self.ref_loss

    @property
    def max_rrh(self):
        return max(self.rrh_sweep)

    def validate(self):
        def fail(msg):
            raise ConfigurationError(msg)

        for name in ("num_rrh", "num_train", "num_test", "mc_trials", "mc_samples",
                     "train_restarts"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                fail(f"{name} must be an integer >= 1, got {value!r}")
        if any(m < 1 for m in self.rrh_sweep):
            fail(f"rrh_sweep entries must be >= 1, got {list(self.rrh_sweep)}")
        for name in ("area_width_m", "area_height_m", "ref_distance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                fail(f"{name} must be finite and > 0, got {value!r}")
        if self.rx_sensitivity < self.noise_power:
            fail("rx_sensitivity must be >= noise_power")
        if not self.pathloss_breakpoints:
            fail("pathloss_breakpoints must not be empty")
        if self.pathloss_breakpoints[-1][0] is not None:
            fail("final pathloss breakpoint must be unbounded (max_distance_m = null)")
        bounds = [d for d, _ in self.pathloss_breakpoints[:-1]]
        if any(d is None for d in bounds):
            fail("only the final pathloss breakpoint may be unbounded")
        if any(b <= 0 for b in bounds) or any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            fail("pathloss_breakpoints distances must be positive and strictly increasing")
        if any(v < 0 or not math.isfinite(v) for v in self.shadowing_variances):
            fail("shadowing_variances must be finite and >= 0")
        if not self.shadowing_variances:
            fail("shadowing_variances must not be empty")
        if self.coord_noise_var < 0:
            fail("coord_noise_var must be >= 0")
        if self.master_seed < 0:
            fail("master_seed must be an unsigned integer")
        if self.pathloss_mode not in PATHLOSS_MODES:
            fail(f"pathloss_mode must be one of {PATHLOSS_MODES}, got {self.pathloss_mode!r}")
        if self.train_layout not in TRAIN_LAYOUTS:
            fail(f"train_layout must be one of {TRAIN_LAYOUTS}, got {self.train_layout!r}")
        if not self.methods or any(m not in METHODS for m in self.methods):
            fail(f"methods must be a non-empty subset of {METHODS}, got {list(self.methods)}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["pathloss_breakpoints"] = [list(bp) for bp in self.pathloss_breakpoints]
        for key in ("shadowing_variances", "rrh_sweep", "methods"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"invalid configuration: {exc}") from exc


def load_config(path):
    """Read a :class:`ScenarioConfig` from a JSON file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    return ScenarioConfig.from_dict(data)


def save_config(config, path):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


def bundled_config(name="table1"):
    """Load one of the shipped configurations (``table1`` or ``table1_full``)."""
    text = resources.files("gp_locate.data").joinpath(f"{name}.json").read_text()
    return ScenarioConfig.from_dict(json.loads(text))
