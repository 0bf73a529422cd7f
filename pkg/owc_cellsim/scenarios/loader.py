"""
Scenario files: JSON documents deep-merged over the checked-in defaults and validated
with ScenarioForm.
"""
from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from django.conf import settings
from django.core.exceptions import ValidationError

from .config import ScenarioConfig
from .forms import CALIBRATE, SCENARIO_KEYS, SERVING_CONFLICT, ScenarioForm, SystemListField

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DEFAULT_SCENARIO = Path(__file__).resolve().parent / 'defaults' / 'office_scenario.json'


class ScenarioError(Exception):
    code = 'E_CONFIG'


class ScenarioParseError(ScenarioError):
    def __init__(self, path: PathLike, line: int, column: int, message: str):
        self.path = str(path)
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}:{column}: {message}")


class ScenarioValidationError(ScenarioError):
    def __init__(self, key: str, message: str, code: Optional[str] = None):
        self.key = key
        if code:
            self.code = code
        super().__init__(f"{key}: {message}")


def default_scenario_path() -> Path:
    configured = getattr(settings, 'OWC_DEFAULT_SCENARIO', None)
    return Path(configured) if configured else DEFAULT_SCENARIO


def _read_document(path: PathLike) -> Dict[str, Any]:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as exc:
        raise ScenarioValidationError('config', f"Cannot read {path}: {exc.strerror or exc}")
    if not text.strip():
        return {}
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(path, exc.lineno, exc.colno, exc.msg)
    if not isinstance(document, dict):
        raise ScenarioValidationError('config', "The scenario document must be a JSON object")
    return document


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``override`` into a copy of ``base``; non-dict values replace."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def flatten(document: Mapping[str, Any], prefix: str = '') -> Dict[str, Any]:
    """Dotted-key view of a nested document; lists are leaves."""
    flat: Dict[str, Any] = {}
    for key, value in document.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def _unflatten(flat: Mapping[str, Any]) -> Dict[str, Any]:
    document: Dict[str, Any] = {}
    for dotted, value in flat.items():
        node = document
        *parents, leaf = dotted.split('.')
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return document


def _without_serving(interfering: Any, serving: Any) -> Any:
    """Inherited interferers minus an overridden serving system; anything unparsable is left to the form."""
    try:
        systems = SystemListField().to_python(interfering)
    except ValidationError:
        return interfering
    serving = str(serving).strip().lower()
    if serving not in systems:
        return interfering
    remaining = [s for s in systems if s != serving]
    logger.info(f"Serving '{serving}' overridden; dropped it from the inherited interferers")
    return remaining or 'none'


def _first_error(form: ScenarioForm) -> ScenarioValidationError:
    for key, errors in form.errors.as_data().items():
        error = errors[0]
        message = ' '.join(error.messages)
        code = 'E_SCENARIO' if error.code == SERVING_CONFLICT else None
        return ScenarioValidationError(key if key != '__all__' else 'scenario', message, code)
    return ScenarioValidationError('scenario', "Invalid scenario")


def load_scenario(
    path: Optional[PathLike] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ScenarioConfig:
    """
    Load and validate a scenario.

    Args:
        path: user scenario file; keys it omits take their default values. ``None`` loads
            the defaults alone.
        overrides: dotted-key values applied on top of the file (command line flags)

    Raises:
        ScenarioParseError: if a file is not valid JSON
        ScenarioValidationError: for unknown keys or values failing validation
    """
    document = _read_document(default_scenario_path())
    if path is not None:
        user = _read_document(path)
        unknown = sorted(set(flatten(user)) - SCENARIO_KEYS)
        if unknown:
            raise ScenarioValidationError(unknown[0], "Unknown scenario key")
        document = deep_merge(document, user)

    flat = flatten(document)
    overrides = dict(overrides or {})
    for key, value in overrides.items():
        if key not in SCENARIO_KEYS:
            raise ScenarioValidationError(key, "Unknown scenario key")
        flat[key] = value
    if 'sweep.serving' in overrides and 'sweep.interfering' not in overrides:
        flat['sweep.interfering'] = _without_serving(flat.get('sweep.interfering'), overrides['sweep.serving'])

    form = ScenarioForm(data=flat)
    if not form.is_valid():
        error = _first_error(form)
        logger.error(f"Scenario validation failed: {error}")
        raise error
    try:
        config = form.to_config()
    except ValueError as exc:
        raise ScenarioValidationError('scenario', str(exc))
    if not config.output_dir:
        config = replace(config, output_dir=settings.OWC_OUTPUT_DIR)
    logger.debug(f"Loaded scenario from {path or default_scenario_path()}")
    return config


def scenario_to_dict(config: ScenarioConfig) -> Dict[str, Any]:
    """Nested JSON-ready document that loads back to ``config``."""
    room, layout, light = config.room, config.layout, config.illumination
    flat: Dict[str, Any] = {
        'room.width': room.width_x,
        'room.length': room.length_y,
        'room.height': room.height_z,
        'room.reflectivity.ceiling': room.reflectivity_ceiling,
        'room.reflectivity.walls': room.reflectivity_walls,
        'room.reflectivity.floor': room.reflectivity_floor,
        'room.communication_floor': room.comm_floor_z,
        'discretization.first_order_element': config.discretization.first_order_element,
        'discretization.second_order_element': config.discretization.second_order_element,
        'discretization.max_reflection_order': config.max_reflection_order,
        'layout.micro.position': list(layout.micro_position.as_tuple()),
        'layout.micro.semi_angle': layout.micro_semi_angle,
        'layout.adt.positions': [list(p.as_tuple()) for p in layout.adt_positions],
        'layout.adt.pico_semi_angle': layout.pico_semi_angle,
        'layout.adt.atto_semi_angle': layout.atto_semi_angle,
        'layout.adt.atto_elevation': layout.atto_elevation,
        'layout.adt.atto_azimuths': list(layout.atto_azimuths),
        'layout.illumination.positions': [list(p.as_tuple()) for p in layout.illumination_positions],
        'layout.illumination.leds_per_unit': layout.leds_per_unit,
        'layout.illumination.semi_angle': layout.illumination_semi_angle,
    }
    for system, values in config.systems.items():
        flat[f'systems.{system}.optical_power'] = values.optical_power
        flat[f'systems.{system}.bandwidth'] = values.bandwidth
        flat[f'systems.{system}.preamp_noise_density'] = values.preamp_noise_density
        flat[f'systems.{system}.background_current'] = values.background_current
    flat.update({
        'illumination.luminous_flux': CALIBRATE if light.luminous_flux is None else light.luminous_flux,
        'illumination.target_min_lux': light.target_min_lux,
        'illumination.optical_power': light.optical_power,
        'illumination.include_reflections': light.include_reflections,
        'illumination.background_noise': light.background_noise,
        'receiver.area': config.receiver.area,
        'receiver.responsivity': config.receiver.responsivity,
        'receiver.side_elevation': config.receiver.side_elevation,
        'receiver.side_fov': config.receiver.side_fov,
        'receiver.side_azimuths': list(config.receiver.side_azimuths),
        'receiver.top_fov': config.receiver.top_fov,
        'sweep.grid_step': config.sweep.grid_step,
        'sweep.combining': config.sweep.combining,
        'sweep.serving': config.sweep.serving,
        'sweep.interfering': list(config.sweep.interfering),
        'sweep.intra_system_interference': config.sweep.intra_system_interference,
        'sweep.spectral_efficiency': config.sweep.spectral_efficiency,
        'sweep.target_ber': config.sweep.target_ber,
        'output.directory': config.output_dir,
    })
    return _unflatten(flat)


def write_scenario(config: ScenarioConfig, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scenario_to_dict(config), indent=2) + '\n', encoding='utf-8')
    logger.info(f"Wrote scenario to {path}")
    return path
