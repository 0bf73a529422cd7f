from __future__ import annotations

from typing import Any, Dict, Tuple

from django import forms
from django.core.exceptions import ValidationError

from links.receiver import Combining
from optics.emitters import CELL_SYSTEMS
from optics.geometry import DiscretizationPolicy, Room, Vec3

from .config import (
    IlluminationSettings,
    LayoutSettings,
    ReceiverSettings,
    ScenarioConfig,
    SweepSettings,
    SystemSettings,
)

CALIBRATE = 'calibrate'
SERVING_CONFLICT = 'serving_conflict'

SYSTEM_CHOICES = [(s.value, s.label) for s in CELL_SYSTEMS]


def validate_positive(value):
    if value is not None and value <= 0:
        raise ValidationError("Must be greater than 0.", code='positive')


def validate_semi_angle(value):
    if value is not None and not 0 < value < 90:
        raise ValidationError("Semi-angle must lie strictly between 0 and 90 degrees.", code='range')


def validate_fov(value):
    if value is not None and not 0 < value <= 90:
        raise ValidationError("Field of view must lie in (0, 90] degrees.", code='range')


def validate_ber(value):
    if value is not None and not 0 < value < 0.5:
        raise ValidationError("Target BER must lie strictly between 0 and 0.5.", code='range')


def _number(value: Any) -> float:
    if isinstance(value, bool):
        raise ValidationError("Expected a number.", code='invalid')
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"Expected a number, got {value!r}.", code='invalid')


class PointField(forms.Field):
    """An [x, y, z] triple in metres."""

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, str):
            value = value.split(',')
        if not isinstance(value, (list, tuple)) or len(value) != 3:
            raise ValidationError("Expected a point [x, y, z].", code='invalid')
        return Vec3(*(_number(v) for v in value))


class PointListField(forms.Field):
    def to_python(self, value):
        if value in self.empty_values:
            return ()
        if not isinstance(value, (list, tuple)):
            raise ValidationError("Expected a list of [x, y, z] points.", code='invalid')
        point = PointField()
        return tuple(point.to_python(v) for v in value)


class AngleListField(forms.Field):
    """Angles in degrees; ``count`` pins the list length."""

    def __init__(self, *, count=None, **kwargs):
        self.count = count
        super().__init__(**kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return ()
        if isinstance(value, str):
            value = value.split(',')
        if not isinstance(value, (list, tuple)):
            raise ValidationError("Expected a list of angles in degrees.", code='invalid')
        return tuple(_number(v) for v in value)

    def validate(self, value):
        super().validate(value)
        if self.count is not None and len(value) != self.count:
            raise ValidationError(f"Expected exactly {self.count} angles.", code='count')


class SystemListField(forms.Field):
    """Cell system ids given as a list or a comma separated string ('none' for no systems)."""

    def to_python(self, value):
        if value in self.empty_values:
            return ()
        if isinstance(value, str):
            value = [] if value.strip().lower() == 'none' else value.split(',')
        if not isinstance(value, (list, tuple)):
            raise ValidationError("Expected a list of cell systems.", code='invalid')
        return tuple(str(v).strip().lower() for v in value if str(v).strip())

    def validate(self, value):
        super().validate(value)
        valid = {s.value for s in CELL_SYSTEMS}
        unknown = [v for v in value if v not in valid]
        if unknown:
            raise ValidationError(
                f"Unknown cell system(s): {', '.join(unknown)}; choose from {', '.join(sorted(valid))}.",
                code='invalid_choice',
            )
        if len(set(value)) != len(value):
            raise ValidationError("Each system may be listed only once.", code='duplicate')


class FluxField(forms.Field):
    """Per-LD luminous flux in lumens, or 'calibrate' (returned as None)."""

    def to_python(self, value):
        if isinstance(value, str) and value.strip().lower() == CALIBRATE:
            return None
        if value in self.empty_values:
            raise ValidationError(self.error_messages['required'], code='required')
        flux = _number(value)
        if flux <= 0:
            raise ValidationError("Luminous flux must be positive or 'calibrate'.", code='positive')
        return flux

    def validate(self, value):
        pass


def _system_fields(system: str) -> Dict[str, forms.Field]:
    return {
        f'systems.{system}.optical_power': forms.FloatField(min_value=0),
        f'systems.{system}.bandwidth': forms.FloatField(validators=[validate_positive]),
        f'systems.{system}.preamp_noise_density': forms.FloatField(min_value=0),
        f'systems.{system}.background_current': forms.FloatField(min_value=0),
    }


def scenario_fields() -> Dict[str, forms.Field]:
    """Every scenario key, by dotted path."""
    fields: Dict[str, forms.Field] = {
        'room.width': forms.FloatField(validators=[validate_positive]),
        'room.length': forms.FloatField(validators=[validate_positive]),
        'room.height': forms.FloatField(validators=[validate_positive]),
        'room.reflectivity.ceiling': forms.FloatField(min_value=0, max_value=1),
        'room.reflectivity.walls': forms.FloatField(min_value=0, max_value=1),
        'room.reflectivity.floor': forms.FloatField(min_value=0, max_value=1),
        'room.communication_floor': forms.FloatField(min_value=0),
        'discretization.first_order_element': forms.FloatField(validators=[validate_positive]),
        'discretization.second_order_element': forms.FloatField(validators=[validate_positive]),
        'discretization.max_reflection_order': forms.IntegerField(min_value=0, max_value=2),
        'layout.micro.position': PointField(),
        'layout.micro.semi_angle': forms.FloatField(validators=[validate_semi_angle]),
        'layout.adt.positions': PointListField(),
        'layout.adt.pico_semi_angle': forms.FloatField(validators=[validate_semi_angle]),
        'layout.adt.atto_semi_angle': forms.FloatField(validators=[validate_semi_angle]),
        'layout.adt.atto_elevation': forms.FloatField(min_value=-90, max_value=90),
        'layout.adt.atto_azimuths': AngleListField(count=4),
        'layout.illumination.positions': PointListField(),
        'layout.illumination.leds_per_unit': forms.IntegerField(min_value=1),
        'layout.illumination.semi_angle': forms.FloatField(validators=[validate_semi_angle]),
    }
    for system in CELL_SYSTEMS:
        fields.update(_system_fields(system.value))
    fields.update({
        'illumination.luminous_flux': FluxField(),
        'illumination.target_min_lux': forms.FloatField(validators=[validate_positive]),
        'illumination.optical_power': forms.FloatField(min_value=0),
        'illumination.include_reflections': forms.BooleanField(required=False),
        'illumination.background_noise': forms.BooleanField(required=False),
        'receiver.area': forms.FloatField(validators=[validate_positive]),
        'receiver.responsivity': forms.FloatField(validators=[validate_positive]),
        'receiver.side_elevation': forms.FloatField(min_value=-90, max_value=90),
        'receiver.side_fov': forms.FloatField(validators=[validate_fov]),
        'receiver.side_azimuths': AngleListField(count=6),
        'receiver.top_fov': forms.FloatField(validators=[validate_fov]),
        'sweep.grid_step': forms.FloatField(validators=[validate_positive]),
        'sweep.combining': forms.ChoiceField(choices=Combining.choices),
        'sweep.serving': forms.ChoiceField(choices=SYSTEM_CHOICES),
        'sweep.interfering': SystemListField(required=False),
        'sweep.intra_system_interference': forms.BooleanField(required=False),
        'sweep.spectral_efficiency': forms.FloatField(validators=[validate_positive]),
        'sweep.target_ber': forms.FloatField(validators=[validate_ber]),
        'output.directory': forms.CharField(required=False),
    })
    return fields


SCENARIO_KEYS = frozenset(scenario_fields())


class ScenarioForm(forms.Form):
    """Validates a flattened scenario document (dotted keys) and builds a ScenarioConfig."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.fields.update(scenario_fields())

    def _inside_room(self, key: str, points: Tuple[Vec3, ...], width: float, length: float, height: float):
        for p in points:
            if not (0 <= p.x <= width and 0 <= p.y <= length and 0 <= p.z <= height):
                self.add_error(key, f"Point ({p.x:g}, {p.y:g}, {p.z:g}) lies outside the room.")
                return

    def clean(self):
        cleaned = super().clean()
        width = cleaned.get('room.width')
        length = cleaned.get('room.length')
        height = cleaned.get('room.height')
        floor = cleaned.get('room.communication_floor')
        first = cleaned.get('discretization.first_order_element')
        second = cleaned.get('discretization.second_order_element')
        step = cleaned.get('sweep.grid_step')

        if height is not None and floor is not None and floor >= height:
            self.add_error('room.communication_floor', "Must be below the room height.")
        if first is not None and second is not None and second < first:
            self.add_error(
                'discretization.second_order_element',
                "Must not be smaller than discretization.first_order_element.",
            )
        if None not in (width, length, height):
            smallest = min(width, length, height)
            for key in ('discretization.first_order_element', 'discretization.second_order_element'):
                size = cleaned.get(key)
                if size is not None and size > smallest:
                    self.add_error(key, f"Must not exceed the smallest room dimension ({smallest:g} m).")
            if step is not None and step > min(width, length):
                self.add_error('sweep.grid_step', f"Must not exceed the floor size ({width:g} x {length:g} m).")
            if 'layout.micro.position' in cleaned:
                self._inside_room('layout.micro.position', (cleaned['layout.micro.position'],), width, length, height)
            for key in ('layout.adt.positions', 'layout.illumination.positions'):
                if key in cleaned:
                    self._inside_room(key, cleaned[key], width, length, height)

        serving = cleaned.get('sweep.serving')
        interfering = cleaned.get('sweep.interfering') or ()
        if serving in interfering:
            self.add_error(
                'sweep.interfering',
                ValidationError(
                    f"The serving system '{serving}' cannot also be an interferer.",
                    code=SERVING_CONFLICT,
                ),
            )
        return cleaned

    def to_config(self) -> ScenarioConfig:
        """Build the configuration; only valid after ``is_valid()``."""
        data = self.cleaned_data
        room = Room(
            width_x=data['room.width'],
            length_y=data['room.length'],
            height_z=data['room.height'],
            reflectivity_ceiling=data['room.reflectivity.ceiling'],
            reflectivity_walls=data['room.reflectivity.walls'],
            reflectivity_floor=data['room.reflectivity.floor'],
            comm_floor_z=data['room.communication_floor'],
        )
        return ScenarioConfig(
            room=room,
            discretization=DiscretizationPolicy(
                first_order_element=data['discretization.first_order_element'],
                second_order_element=data['discretization.second_order_element'],
            ),
            max_reflection_order=data['discretization.max_reflection_order'],
            layout=LayoutSettings(
                micro_position=data['layout.micro.position'],
                micro_semi_angle=data['layout.micro.semi_angle'],
                adt_positions=data['layout.adt.positions'],
                pico_semi_angle=data['layout.adt.pico_semi_angle'],
                atto_semi_angle=data['layout.adt.atto_semi_angle'],
                atto_elevation=data['layout.adt.atto_elevation'],
                atto_azimuths=data['layout.adt.atto_azimuths'],
                illumination_positions=data['layout.illumination.positions'],
                leds_per_unit=data['layout.illumination.leds_per_unit'],
                illumination_semi_angle=data['layout.illumination.semi_angle'],
            ),
            systems={
                system.value: SystemSettings(
                    optical_power=data[f'systems.{system.value}.optical_power'],
                    bandwidth=data[f'systems.{system.value}.bandwidth'],
                    preamp_noise_density=data[f'systems.{system.value}.preamp_noise_density'],
                    background_current=data[f'systems.{system.value}.background_current'],
                )
                for system in CELL_SYSTEMS
            },
            illumination=IlluminationSettings(
                luminous_flux=data['illumination.luminous_flux'],
                target_min_lux=data['illumination.target_min_lux'],
                optical_power=data['illumination.optical_power'],
                include_reflections=data['illumination.include_reflections'],
                background_noise=data['illumination.background_noise'],
            ),
            receiver=ReceiverSettings(
                area=data['receiver.area'],
                responsivity=data['receiver.responsivity'],
                side_elevation=data['receiver.side_elevation'],
                side_fov=data['receiver.side_fov'],
                side_azimuths=data['receiver.side_azimuths'],
                top_fov=data['receiver.top_fov'],
            ),
            sweep=SweepSettings(
                grid_step=data['sweep.grid_step'],
                combining=data['sweep.combining'],
                serving=data['sweep.serving'],
                interfering=data['sweep.interfering'],
                intra_system_interference=data['sweep.intra_system_interference'],
                spectral_efficiency=data['sweep.spectral_efficiency'],
                target_ber=data['sweep.target_ber'],
            ),
            output_dir=data['output.directory'],
        )
