"""Versioned camera settings, applied atomically per pipeline tick."""

import threading
from dataclasses import dataclass, replace

from .errors import ConfigurationError


class SettingsValidationError(ConfigurationError):
    """A settings change was rejected; carries the offending field."""

    def __init__(self, field, message):
        super().__init__(message)
        self.field = field
        self.message = message


@dataclass(frozen=True)
class CameraSettings:
    brightness: float = 0.0
    contrast: float = 1.0
    jpeg_quality: int = 70
    fps: int = 30
    version: int = 0

    def to_dict(self):
        return {
            "brightness": self.brightness,
            "contrast": self.contrast,
            "jpeg_quality": self.jpeg_quality,
            "fps": self.fps,
            "version": self.version,
        }


def _check_number(field, value, lo, hi):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SettingsValidationError(
            field, f"{field} must be a number in [{lo}, {hi}]")
    if not lo <= value <= hi:
        raise SettingsValidationError(
            field, f"{field} must be in [{lo}, {hi}], got {value}")
    return float(value)


def _check_int(field, value, lo, hi):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SettingsValidationError(
            field, f"{field} must be an integer in [{lo}, {hi}]")
    if not lo <= value <= hi:
        raise SettingsValidationError(
            field, f"{field} must be in [{lo}, {hi}], got {value}")
    return value


_VALIDATORS = {
    "brightness": lambda v: _check_number("brightness", v, -1.0, 1.0),
    "contrast": lambda v: _check_number("contrast", v, 0.0, 2.0),
    "jpeg_quality": lambda v: _check_int("jpeg_quality", v, 0, 95),
    "fps": lambda v: _check_int("fps", v, 1, 120),
}


class SettingsStore:
    """Single-writer settings snapshot with atomic partial updates.

    Readers always observe a complete snapshot produced by exactly one
    successful update; a rejected update leaves value and version
    untouched.
    """

    def __init__(self, initial: CameraSettings = None):
        self._lock = threading.Lock()
        self._current = initial if initial is not None else CameraSettings()

    def get(self) -> CameraSettings:
        with self._lock:
            return self._current

    def update(self, partial: dict) -> CameraSettings:
        """Apply a partial change; all fields validate or none apply."""
        if not isinstance(partial, dict):
            raise SettingsValidationError(
                None, "settings update must be a JSON object")
        validated = {}
        for key, value in partial.items():
            validator = _VALIDATORS.get(key)
            if validator is None:
                raise SettingsValidationError(key, f"unknown setting: {key}")
            validated[key] = validator(value)
        with self._lock:
            self._current = replace(
                self._current, version=self._current.version + 1, **validated)
            return self._current
