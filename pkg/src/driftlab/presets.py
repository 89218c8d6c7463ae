"""Named drift presets used by study configs and the CLI.

Each factory returns (b, B) where b is a vectorized drift callable on
(n, d) points and B a scalar potential callable when the drift is a
gradient field (else None).
"""

import numpy as np

from .errors import ConfigurationError


def _zero(d):
    return (lambda pts: np.zeros((len(pts), d))), (lambda pts: np.zeros(len(pts)))


def _gradient_cos(d, amplitude=0.5):
    """b = grad B with B = amplitude * cos(2 pi x_1)."""

    def B(pts):
        return amplitude * np.cos(2.0 * np.pi * pts[:, 0])

    def b(pts):
        out = np.zeros((len(pts), d))
        out[:, 0] = -2.0 * np.pi * amplitude * np.sin(2.0 * np.pi * pts[:, 0])
        return out

    return b, B


def _rotation(d, speed=1.0):
    def b(pts):
        return np.full((len(pts), d), float(speed))

    return b, None


def _sine_mix(d, coefficients=(0.8, 0.0, 0.3), offset=0.0):
    """d=1 trig drift: sum_k c_k sin(2 pi k x) plus a constant offset."""
    if d != 1:
        raise ConfigurationError("sine_mix preset is one-dimensional")
    coefficients = tuple(float(c) for c in coefficients)

    def b(pts):
        x = pts[:, 0]
        out = np.full(len(x), float(offset))
        for k, c in enumerate(coefficients, start=1):
            out += c * np.sin(2.0 * np.pi * k * x)
        return out[:, None]

    return b, None


_REGISTRY = {
    "zero": _zero,
    "gradient_cos": _gradient_cos,
    "rotation": _rotation,
    "sine_mix": _sine_mix,
}


def drift_preset(name, d, **params):
    """Look up a named drift; raises ConfigurationError for unknown names."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown drift preset {name!r}; known: {sorted(_REGISTRY)}") from None
    try:
        return factory(d, **params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for preset {name!r}: {exc}") from None


def preset_names():
    return sorted(_REGISTRY)
