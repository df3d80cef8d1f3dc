"""Distance, path length and speed helpers.

Window statistics use a flat-earth (equirectangular) approximation. Metro
station paths are measured on the WGS84 ellipsoid with single-precision
accumulation, which is how the reference metro segments were produced.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .model import LocationSample

EARTH_RADIUS_M = 6_371_000.0

# WGS84
_WGS84_A = 6378137.0
_WGS84_B = 6356752.3142
_WGS84_F = (_WGS84_A - _WGS84_B) / _WGS84_A


def distance_m(
    lat1: float, lon1: float, lat2: float, lon2: float, radius: float = EARTH_RADIUS_M
) -> float:
    """Equirectangular distance in meters between two points given in degrees."""
    phi1 = math.radians(lat1)
    lam1 = math.radians(lon1)
    phi2 = math.radians(lat2)
    lam2 = math.radians(lon2)
    x = (lam2 - lam1) * math.cos((phi1 + phi2) / 2)
    y = phi1 - phi2
    return math.sqrt(x * x + y * y) * radius


def _require_points(points: Sequence[LocationSample]) -> None:
    if len(points) == 0:
        raise ValueError("at least one location sample is required")


def path_distance_m(points: Sequence[LocationSample], radius: float = EARTH_RADIUS_M) -> float:
    """Sum of distances between consecutive samples."""
    _require_points(points)
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        total += distance_m(a.latitude, a.longitude, b.latitude, b.longitude, radius)
    return total


def block_distance_m(points: Sequence[LocationSample], radius: float = EARTH_RADIUS_M) -> float:
    """Straight-line distance between the first and last sample only."""
    _require_points(points)
    a, b = points[0], points[-1]
    return distance_m(a.latitude, a.longitude, b.latitude, b.longitude, radius)


def average_speed_kmh(distance_m: float, duration_s: float) -> float:
    if duration_s <= 0:
        raise ValueError(f"duration must be positive, got {duration_s}")
    return (distance_m * 3.6) / duration_s


def ellipsoidal_distance_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Inverse Vincenty distance on the WGS84 ellipsoid.

    Mirrors the fixed 20-iteration variant used by Android's
    ``Location.distanceBetween``; the result is returned in double precision.
    """
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    big_l = math.radians(lon2) - math.radians(lon1)
    a, b, f = _WGS84_A, _WGS84_B, _WGS84_F
    a_sq_minus_b_sq_over_b_sq = (a * a - b * b) / (b * b)

    u1 = math.atan((1.0 - f) * math.tan(phi1))
    u2 = math.atan((1.0 - f) * math.tan(phi2))
    cos_u1, sin_u1 = math.cos(u1), math.sin(u1)
    cos_u2, sin_u2 = math.cos(u2), math.sin(u2)
    cos_u1_cos_u2 = cos_u1 * cos_u2
    sin_u1_sin_u2 = sin_u1 * sin_u2

    sigma = 0.0
    delta_sigma = 0.0
    big_a = 0.0
    lam = big_l
    for _ in range(20):
        lam_prev = lam
        cos_lam, sin_lam = math.cos(lam), math.sin(lam)
        t1 = cos_u2 * sin_lam
        t2 = cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lam
        sin_sigma = math.sqrt(t1 * t1 + t2 * t2)
        cos_sigma = sin_u1_sin_u2 + cos_u1_cos_u2 * cos_lam
        sigma = math.atan2(sin_sigma, cos_sigma)
        sin_alpha = 0.0 if sin_sigma == 0 else cos_u1_cos_u2 * sin_lam / sin_sigma
        cos_sq_alpha = 1.0 - sin_alpha * sin_alpha
        cos_2sm = 0.0 if cos_sq_alpha == 0 else cos_sigma - 2.0 * sin_u1_sin_u2 / cos_sq_alpha
        u_sq = cos_sq_alpha * a_sq_minus_b_sq_over_b_sq
        big_a = 1 + (u_sq / 16384.0) * (4096.0 + u_sq * (-768 + u_sq * (320.0 - 175.0 * u_sq)))
        big_b = (u_sq / 1024.0) * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)))
        c = (f / 16.0) * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha))
        cos_2sm_sq = cos_2sm * cos_2sm
        delta_sigma = big_b * sin_sigma * (
            cos_2sm
            + (big_b / 4.0)
            * (
                cos_sigma * (-1.0 + 2.0 * cos_2sm_sq)
                - (big_b / 6.0) * cos_2sm * (-3.0 + 4.0 * sin_sigma * sin_sigma) * (-3.0 + 4.0 * cos_2sm_sq)
            )
        )
        lam = big_l + (1.0 - c) * f * sin_alpha * (
            sigma + c * sin_sigma * (cos_2sm + c * cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm))
        )
        if lam == 0 or abs((lam - lam_prev) / lam) < 1.0e-12:
            break
    return b * big_a * (sigma - delta_sigma)


def station_path_distance_m(coords: Sequence[tuple[float, float]]) -> float:
    """Length of a station-to-station path, accumulated in single precision."""
    if len(coords) == 0:
        raise ValueError("at least one coordinate is required")
    total = np.float32(0.0)
    for (lat1, lon1), (lat2, lon2) in zip(coords[:-1], coords[1:]):
        total = np.float32(total + np.float32(ellipsoidal_distance_m(lat1, lon1, lat2, lon2)))
    return float(total)
