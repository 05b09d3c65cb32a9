"""Scenario configuration parser for the hierarchical SFN simulator."""

import math
import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import yaml

from phy.constellation import HierarchyParams, INFINITE
from phy.pilots import FrameParams
from phy.receiver import DEFAULT_AVERAGING_WINDOW, DEFAULT_DETECTION_THRESHOLD, DEFAULT_DETECTION_Z
from utils.errors import ConfigurationError

VALID_MODES = ('satellite_only', 'terrestrial_only', 'hybrid')
VALID_GAIN_MODES = ('fixed', 'random_phase')
VALID_NOISE_REFERENCES = ('composite', 'terrestrial')
VALID_STREAMS = ('global', 'local')

REQUIRED_KEYS = ('mode', 'alpha', 'cnr_sweep_db')
TOP_LEVEL_KEYS = REQUIRED_KEYS + (
    'streams', 'path_gains', 'symbols_per_point', 'max_symbols_per_point',
    'target_relative_halfwidth', 'seed', 'averaging_window', 'detection_threshold',
    'detection_z', 'detection_trials', 'noise_reference', 'workers', 'frame',
)
PATH_GAIN_KEYS = ('mode', 'sat_power_db', 'terr_power_db', 'sat_phase_deg', 'terr_phase_deg')
FRAME_KEYS = ('bandwidth_hz', 'fft_size', 'guard_fraction', 'symbols_per_frame')


@dataclass(frozen=True)
class PathGainSpec:
    """Per-path power (dB) and phase (degrees).

    With mode random_phase the phases are ignored and drawn uniformly once
    per path per frame.
    """
    mode: str = "fixed"
    sat_power_db: float = 0.0
    terr_power_db: float = 0.0
    sat_phase_deg: float = 0.0
    terr_phase_deg: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """One Monte Carlo experiment over a C/N sweep."""
    mode: str = "terrestrial_only"
    alpha: HierarchyParams = HierarchyParams(2.0)
    cnr_sweep_db: Tuple[float, ...] = (4.0, 8.0, 12.0)
    streams: Optional[Tuple[str, ...]] = None
    path_gains: PathGainSpec = field(default_factory=PathGainSpec)
    symbols_per_point: int = 200000
    max_symbols_per_point: Optional[int] = None
    target_relative_halfwidth: float = 0.2
    seed: int = 1234
    averaging_window: int = DEFAULT_AVERAGING_WINDOW
    detection_threshold: float = DEFAULT_DETECTION_THRESHOLD
    detection_z: float = DEFAULT_DETECTION_Z
    detection_trials: int = 100
    noise_reference: str = "composite"
    workers: int = 1
    frame: FrameParams = FrameParams()

    @property
    def has_satellite(self) -> bool:
        return self.mode in ('satellite_only', 'hybrid')

    @property
    def has_terrestrial(self) -> bool:
        return self.mode in ('terrestrial_only', 'hybrid')

    @property
    def effective_alpha(self) -> HierarchyParams:
        """alpha as seen on the air; satellite-only coverage is plain QPSK."""
        return self.alpha if self.has_terrestrial else HierarchyParams(INFINITE)

    @property
    def resolved_streams(self) -> Tuple[str, ...]:
        if self.streams is not None:
            return tuple(self.streams)
        if self.effective_alpha.is_qpsk:
            return ('global',)
        return ('global', 'local')

    @property
    def carries_local(self) -> bool:
        return 'local' in self.resolved_streams

    @property
    def symbol_cap(self) -> int:
        if self.max_symbols_per_point is None:
            return self.symbols_per_point
        return max(self.max_symbols_per_point, self.symbols_per_point)


def _format_number(value: float):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


class ConfigParser:
    """Parser for scenario configuration files."""

    @staticmethod
    def load_config(config_path: str) -> Scenario:
        """Load a scenario from a YAML file."""
        if not os.path.exists(config_path):
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        with open(config_path, 'r') as file:
            config_data = yaml.safe_load(file)

        return ConfigParser.parse(config_data)

    @staticmethod
    def parse(config_data: Any) -> Scenario:
        """Turn a mapping into a Scenario, reporting every bad key at once."""
        if not isinstance(config_data, dict):
            raise ConfigurationError("scenario file must contain a mapping of keys")
        return ConfigParser._parse_config(config_data)

    @staticmethod
    def _parse_config(config_data: Dict[str, Any]) -> Scenario:
        errors: List[str] = []
        values: Dict[str, Any] = {}

        for key in REQUIRED_KEYS:
            if key not in config_data:
                errors.append(f"missing required key '{key}'")
        for key in config_data:
            if key not in TOP_LEVEL_KEYS:
                errors.append(f"unknown key '{key}'")

        if 'mode' in config_data:
            values['mode'] = str(config_data['mode'])

        if 'alpha' in config_data:
            try:
                values['alpha'] = HierarchyParams.parse(config_data['alpha'])
            except (TypeError, ValueError) as e:
                errors.append(f"alpha: {e}")

        if 'cnr_sweep_db' in config_data:
            sweep = config_data['cnr_sweep_db']
            if not isinstance(sweep, list):
                sweep = [sweep]
            try:
                values['cnr_sweep_db'] = tuple(float(x) for x in sweep)
            except (TypeError, ValueError):
                errors.append(f"cnr_sweep_db: expected a list of numbers, got {sweep!r}")

        if 'streams' in config_data:
            streams = config_data['streams']
            if isinstance(streams, str):
                streams = [streams]
            if not isinstance(streams, list):
                errors.append(f"streams: expected a list, got {streams!r}")
            else:
                values['streams'] = tuple(str(s) for s in streams)

        for key, convert in (
            ('symbols_per_point', int), ('max_symbols_per_point', int), ('seed', int),
            ('averaging_window', int), ('detection_trials', int), ('workers', int),
            ('target_relative_halfwidth', float), ('detection_threshold', float),
            ('detection_z', float),
        ):
            if key not in config_data:
                continue
            raw = config_data[key]
            if raw is None and key == 'max_symbols_per_point':
                continue
            if convert is int and (isinstance(raw, bool) or isinstance(raw, float) and not raw.is_integer()):
                errors.append(f"{key}: expected an integer, got {raw!r}")
                continue
            try:
                values[key] = convert(raw)
            except (TypeError, ValueError):
                errors.append(f"{key}: expected {'an integer' if convert is int else 'a number'}, got {raw!r}")

        if 'noise_reference' in config_data:
            values['noise_reference'] = str(config_data['noise_reference'])

        if 'path_gains' in config_data:
            gains = config_data['path_gains'] or {}
            if not isinstance(gains, dict):
                errors.append("path_gains: expected a mapping")
            else:
                gain_values: Dict[str, Any] = {}
                for key, raw in gains.items():
                    if key not in PATH_GAIN_KEYS:
                        errors.append(f"unknown key 'path_gains.{key}'")
                    elif key == 'mode':
                        gain_values[key] = str(raw)
                    else:
                        try:
                            gain_values[key] = float(raw)
                        except (TypeError, ValueError):
                            errors.append(f"path_gains.{key}: expected a number, got {raw!r}")
                values['path_gains'] = PathGainSpec(**gain_values)

        if 'frame' in config_data:
            frame = config_data['frame'] or {}
            if not isinstance(frame, dict):
                errors.append("frame: expected a mapping")
            else:
                frame_values: Dict[str, Any] = {}
                for key, raw in frame.items():
                    if key not in FRAME_KEYS:
                        errors.append(f"unknown key 'frame.{key}'")
                        continue
                    try:
                        if key == 'guard_fraction':
                            frame_values[key] = Fraction(str(raw))
                        elif key == 'bandwidth_hz':
                            frame_values[key] = float(raw)
                        else:
                            frame_values[key] = int(raw)
                    except (TypeError, ValueError, ZeroDivisionError):
                        errors.append(f"frame.{key}: invalid value {raw!r}")
                try:
                    values['frame'] = FrameParams(**frame_values)
                except ConfigurationError as e:
                    errors.extend(f"frame: {msg}" for msg in e.errors)

        if errors:
            raise ConfigurationError(errors)
        return Scenario(**values)

    @staticmethod
    def validate_config(config: Scenario) -> List[str]:
        """Validate a scenario and return the list of errors."""
        errors = []

        if config.mode not in VALID_MODES:
            errors.append(f"Invalid mode: {config.mode}. Must be one of: {list(VALID_MODES)}")

        if not config.cnr_sweep_db:
            errors.append("cnr_sweep_db must not be empty")
        elif any(math.isnan(x) or x == -math.inf for x in config.cnr_sweep_db):
            errors.append("cnr_sweep_db must not contain NaN or -inf (use inf for a noiseless point)")

        if config.symbols_per_point < 1:
            errors.append(f"symbols_per_point must be >= 1, got {config.symbols_per_point}")
        if config.max_symbols_per_point is not None and config.max_symbols_per_point < config.symbols_per_point:
            errors.append(f"max_symbols_per_point ({config.max_symbols_per_point}) "
                          f"must be >= symbols_per_point ({config.symbols_per_point})")
        if not config.target_relative_halfwidth > 0:
            errors.append(f"target_relative_halfwidth must be positive, got {config.target_relative_halfwidth}")
        if config.seed < 0:
            errors.append(f"seed must be >= 0, got {config.seed}")
        if config.averaging_window < 1:
            errors.append(f"averaging_window must be >= 1, got {config.averaging_window}")
        if not config.detection_threshold > 0:
            errors.append(f"detection_threshold must be positive, got {config.detection_threshold}")
        if config.detection_z < 0:
            errors.append(f"detection_z must be >= 0, got {config.detection_z}")
        if config.detection_trials < 1:
            errors.append(f"detection_trials must be >= 1, got {config.detection_trials}")
        if config.workers < 1:
            errors.append(f"workers must be >= 1, got {config.workers}")

        gains = config.path_gains
        if gains.mode not in VALID_GAIN_MODES:
            errors.append(f"Invalid path_gains.mode: {gains.mode}. Must be one of: {list(VALID_GAIN_MODES)}")
        for key in PATH_GAIN_KEYS[1:]:
            if not math.isfinite(getattr(gains, key)):
                errors.append(f"path_gains.{key} must be finite")

        if config.noise_reference not in VALID_NOISE_REFERENCES:
            errors.append(f"Invalid noise_reference: {config.noise_reference}. "
                          f"Must be one of: {list(VALID_NOISE_REFERENCES)}")
        elif config.noise_reference == 'terrestrial' and not config.has_terrestrial:
            errors.append("noise_reference 'terrestrial' needs a terrestrial component")

        if config.streams is not None:
            unknown = [s for s in config.streams if s not in VALID_STREAMS]
            if unknown:
                errors.append(f"Invalid streams: {unknown}. Must be drawn from: {list(VALID_STREAMS)}")
            if not config.streams:
                errors.append("streams must not be empty")
            if 'local' in config.streams:
                if config.mode == 'satellite_only':
                    errors.append("streams: local stream requested in satellite_only mode")
                elif config.alpha.is_qpsk:
                    errors.append("streams: local stream requested with alpha = inf")

        return errors

    @staticmethod
    def to_dict(config: Scenario) -> Dict[str, Any]:
        """Plain, JSON-safe mapping of a scenario (the YAML key set)."""
        data = {
            'mode': config.mode,
            'alpha': str(config.alpha) if config.alpha.is_qpsk else config.alpha.alpha,
            'streams': list(config.resolved_streams),
            'path_gains': asdict(config.path_gains),
            'cnr_sweep_db': [_format_number(x) for x in config.cnr_sweep_db],
            'symbols_per_point': config.symbols_per_point,
            'max_symbols_per_point': config.symbol_cap,
            'target_relative_halfwidth': config.target_relative_halfwidth,
            'seed': config.seed,
            'averaging_window': config.averaging_window,
            'detection_threshold': config.detection_threshold,
            'detection_z': config.detection_z,
            'detection_trials': config.detection_trials,
            'noise_reference': config.noise_reference,
            'workers': config.workers,
            'frame': {
                'bandwidth_hz': config.frame.bandwidth_hz,
                'fft_size': config.frame.fft_size,
                'guard_fraction': str(config.frame.guard_fraction),
                'symbols_per_frame': config.frame.symbols_per_frame,
            },
        }
        return data

    @staticmethod
    def create_sample_config(output_path: str) -> None:
        """Create a sample scenario file."""
        config_content = """# Hierarchical SFN simulation scenario
mode: hybrid                   # satellite_only | terrestrial_only | hybrid
alpha: 2                       # hierarchical parameter (>= 1), or "inf" for plain QPSK
streams: [global, local]       # optional; defaults from mode and alpha

path_gains:
  mode: fixed                  # fixed | random_phase
  sat_power_db: 0.0
  terr_power_db: 0.0
  sat_phase_deg: 90.0
  terr_phase_deg: 0.0

cnr_sweep_db: [4, 8, 12]
symbols_per_point: 200000
max_symbols_per_point: 800000  # auto-extend cap for tight confidence intervals
target_relative_halfwidth: 0.2
seed: 1234

averaging_window: 8            # pilot pairs averaged per carrier
detection_threshold: 0.05
detection_z: 4.0
detection_trials: 100

noise_reference: composite     # composite | terrestrial
workers: 1

frame:
  bandwidth_hz: 5000000
  fft_size: 2048
  guard_fraction: "1/8"
  symbols_per_frame: 68
"""

        with open(output_path, 'w') as file:
            file.write(config_content)
