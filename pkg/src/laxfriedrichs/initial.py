"""Zero-mean initial data on the torus, with exact antiderivatives where available."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class InitialData:
    name: str
    u0: Callable
    v0: Callable | None
    bound: float


def zero() -> InitialData:
    return InitialData("zero", lambda x: np.zeros_like(np.asarray(x, dtype=float)), lambda x: np.zeros_like(np.asarray(x, dtype=float)), 0.0)


def sine(amplitude: float = 0.2, mode: int = 1) -> InitialData:
    k = 2 * math.pi * mode
    return InitialData(
        "sine",
        lambda x: amplitude * np.sin(k * np.asarray(x, dtype=float)),
        lambda x: -amplitude * np.cos(k * np.asarray(x, dtype=float)) / k,
        abs(amplitude),
    )


def cosine(amplitude: float = 0.2, mode: int = 1) -> InitialData:
    k = 2 * math.pi * mode
    return InitialData(
        "cosine",
        lambda x: amplitude * np.cos(k * np.asarray(x, dtype=float)),
        lambda x: amplitude * np.sin(k * np.asarray(x, dtype=float)) / k,
        abs(amplitude),
    )


def sawtooth(amplitude: float = 0.85, width: float = 1 / 16) -> InitialData:
    """Rises from -a to a on [0, width), falls back linearly on [width, 1)."""
    if not 0 < width < 1:
        raise ValueError("width must lie in (0, 1)")
    a, w = amplitude, width

    def u0(x):
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        return np.where(x < w, -a + 2 * a * x / w, a - 2 * a * (x - w) / (1 - w))

    def v0(x):
        x = np.asarray(x, dtype=float)
        n = np.floor(x)
        y = x - n
        up = -a * y + a * y**2 / w
        s = y - w
        down = a * s - a * s**2 / (1 - w)
        # the ramp integrates to zero over [0, w), and the whole period to zero
        return np.where(y < w, up, down)

    return InitialData("sawtooth", u0, v0, abs(amplitude))


CATALOGUE = {"zero": zero, "sine": sine, "cosine": cosine, "sawtooth": sawtooth}


def get_initial(name: str, **params) -> InitialData:
    try:
        factory = CATALOGUE[name]
    except KeyError:
        raise ValueError(f"unknown initial data {name!r}; choose from {sorted(CATALOGUE)}") from None
    return factory(**params)
