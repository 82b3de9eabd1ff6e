"""sRGB <-> normalized CIE Lab conversion.

All images live in float arrays: RGB as (H, W, 3) in [0, 1], Lab split into
a luminance plane L in [0, 1] (L*/100) and chroma planes ab in [-1, 1]
(a*/128, b*/128). D65 white point, standard sRGB transfer function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# D65 reference white (2 degree observer)
_WHITE = np.array([0.95047, 1.0, 1.08883])

_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)

_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


class InvalidInputError(ValueError):
    """Raised when an image fails a conversion precondition."""


@dataclass
class LabImage:
    """A picture split into luminance and chroma planes.

    L is (H, W) in [0, 1]; ab is (H, W, 2) in [-1, 1].
    """

    L: np.ndarray
    ab: np.ndarray

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=np.float64)
        self.ab = np.asarray(self.ab, dtype=np.float64)
        if self.L.ndim != 2:
            raise InvalidInputError(f"L must be 2-D, got shape {self.L.shape}")
        if self.ab.shape != self.L.shape + (2,):
            raise InvalidInputError(
                f"ab shape {self.ab.shape} does not match L shape {self.L.shape}"
            )
        if not (np.isfinite(self.L).all() and np.isfinite(self.ab).all()):
            raise InvalidInputError("non-finite values in Lab planes")
        if self.L.min() < -1e-9 or self.L.max() > 1 + 1e-9:
            raise InvalidInputError("L values outside [0, 1]")
        if np.abs(self.ab).max() > 1 + 1e-9:
            raise InvalidInputError("ab values outside [-1, 1]")

    @property
    def height(self) -> int:
        return self.L.shape[0]

    @property
    def width(self) -> int:
        return self.L.shape[1]


def _srgb_to_linear(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c):
    c = np.clip(c, 0.0, None)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _f(t):
    return np.where(t > _EPS, np.cbrt(t), (_KAPPA * t + 16.0) / 116.0)


def _f_inv(ft):
    t3 = ft**3
    return np.where(t3 > _EPS, t3, (116.0 * ft - 16.0) / _KAPPA)


def rgb_to_lab(rgb: np.ndarray) -> LabImage:
    """Convert an sRGB image in [0, 1] to a normalized LabImage."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidInputError(f"expected (H, W, 3) array, got {rgb.shape}")
    if not np.isfinite(rgb).all():
        raise InvalidInputError("non-finite RGB values")
    if rgb.min() < -1e-9 or rgb.max() > 1 + 1e-9:
        raise InvalidInputError("RGB values outside [0, 1]")

    xyz = _srgb_to_linear(rgb) @ _RGB_TO_XYZ.T
    fxyz = _f(xyz / _WHITE)
    L_star = 116.0 * fxyz[..., 1] - 16.0
    a_star = 500.0 * (fxyz[..., 0] - fxyz[..., 1])
    b_star = 200.0 * (fxyz[..., 1] - fxyz[..., 2])

    L = np.clip(L_star / 100.0, 0.0, 1.0)
    ab = np.clip(np.stack([a_star, b_star], axis=-1) / 128.0, -1.0, 1.0)
    return LabImage(L=L, ab=ab)


def lab_to_rgb(img: LabImage) -> np.ndarray:
    """Convert a LabImage back to sRGB in [0, 1] (clamped)."""
    L_star = img.L * 100.0
    a_star = img.ab[..., 0] * 128.0
    b_star = img.ab[..., 1] * 128.0

    fy = (L_star + 16.0) / 116.0
    fx = fy + a_star / 500.0
    fz = fy - b_star / 200.0
    xyz = np.stack([_f_inv(fx), _f_inv(fy), _f_inv(fz)], axis=-1) * _WHITE
    rgb = _linear_to_srgb(xyz @ _XYZ_TO_RGB.T)
    return np.clip(rgb, 0.0, 1.0)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luminance plane of an sRGB image (the L channel of its Lab form)."""
    return rgb_to_lab(rgb).L
