"""Spherical-earth helpers: unit vectors, great-circle interpolation, dead reckoning."""

from __future__ import annotations

import numpy as np

# Radius of the sphere with the same surface area as the GRS80 ellipsoid.
EARTH_RADIUS_M = 6371007.181
KNOT_M_S = 1852.0 / 3600.0


def to_unit(lat, lon) -> np.ndarray:
    phi, lam = np.radians(lat), np.radians(lon)
    c = np.cos(phi)
    return np.stack([c * np.cos(lam), c * np.sin(lam), np.sin(phi)], axis=-1)


def from_unit(v: np.ndarray):
    v = np.asarray(v, dtype=np.float64)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    lat = np.degrees(np.arctan2(z, np.hypot(x, y)))
    lon = np.degrees(np.arctan2(y, x))
    return lat, lon


def central_angle(lat0, lon0, lat1, lon1):
    """Angle between two points, radians (atan2 form, stable for tiny and large angles)."""
    a, b = to_unit(lat0, lon0), to_unit(lat1, lon1)
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1))


def distance_m(lat0, lon0, lat1, lon1, radius: float = EARTH_RADIUS_M):
    return radius * central_angle(lat0, lon0, lat1, lon1)


def slerp(lat0, lon0, lat1, lon1, fraction):
    """Point at ``fraction`` of the way along the great circle from point 0 to point 1."""
    a, b = to_unit(lat0, lon0), to_unit(lat1, lon1)
    f = np.asarray(fraction, dtype=np.float64)[..., None]
    omega = np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1))[..., None]
    s = np.sin(omega)
    small = s < 1e-15
    safe = np.where(small, 1.0, s)
    wa = np.where(small, 1.0 - f, np.sin((1.0 - f) * omega) / safe)
    wb = np.where(small, f, np.sin(f * omega) / safe)
    return from_unit(wa * a + wb * b)


def initial_bearing(lat0, lon0, lat1, lon1):
    """Forward azimuth in degrees [0, 360) of the great circle from point 0 to point 1."""
    phi0, phi1 = np.radians(lat0), np.radians(lat1)
    dl = np.radians(np.asarray(lon1) - np.asarray(lon0))
    y = np.sin(dl) * np.cos(phi1)
    x = np.cos(phi0) * np.sin(phi1) - np.sin(phi0) * np.cos(phi1) * np.cos(dl)
    return np.mod(np.degrees(np.arctan2(y, x)), 360.0)


def destination(lat, lon, bearing_deg, dist_m, radius: float = EARTH_RADIUS_M):
    """Endpoint after travelling ``dist_m`` along a great circle with the given initial bearing."""
    phi, lam = np.radians(lat), np.radians(lon)
    theta, delta = np.radians(bearing_deg), np.asarray(dist_m) / radius
    sin_phi2 = np.sin(phi) * np.cos(delta) + np.cos(phi) * np.sin(delta) * np.cos(theta)
    phi2 = np.arcsin(np.clip(sin_phi2, -1.0, 1.0))
    lam2 = lam + np.arctan2(
        np.sin(theta) * np.sin(delta) * np.cos(phi), np.cos(delta) - np.sin(phi) * sin_phi2
    )
    return np.degrees(phi2), wrap_lon(np.degrees(lam2))


def wrap_lon(lon):
    return np.mod(np.asarray(lon) + 180.0, 360.0) - 180.0


def quad_area(lat0, lat1, lon0, lon1, radius: float = EARTH_RADIUS_M):
    """Area of a latitude/longitude rectangle on the sphere, m^2."""
    return radius**2 * np.radians(np.abs(lon1 - lon0)) * np.abs(
        np.sin(np.radians(lat1)) - np.sin(np.radians(lat0))
    )
