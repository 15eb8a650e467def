"""Unit-vector algebra, hemisphere sampling and the angular-error metric.

Directions are plain numpy arrays of shape (3,) or (..., 3). The viewing
direction of the orthographic setup is the constant ``VIEW`` = (0, 0, 1).
"""

import numpy as np

VIEW = np.array([0.0, 0.0, 1.0])


def normalize(v):
    """Return v scaled to unit length along the last axis."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / norm


def sample_hemisphere_uniform(rng, max_elevation, size=None):
    """Draw directions uniform w.r.t. solid angle on the cap z >= cos(max_elevation).

    ``max_elevation`` is the polar angle from the zenith, in radians,
    0 < max_elevation <= pi/2.  With ``size=None`` a single (3,) vector is
    returned, otherwise an array of shape (size, 3).

    Uniformity on the cap is achieved by drawing z uniform in
    [cos(max_elevation), 1] and the azimuth uniform in [0, 2*pi).
    """
    if not 0.0 < max_elevation <= np.pi / 2:
        raise ValueError(f"max_elevation must be in (0, pi/2], got {max_elevation}")
    n = 1 if size is None else int(size)
    z = rng.uniform(np.cos(max_elevation), 1.0, n)
    az = rng.uniform(0.0, 2.0 * np.pi, n)
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    out = np.stack([s * np.cos(az), s * np.sin(az), z], axis=-1)
    return out[0] if size is None else out


def rotate_about_z(d, theta):
    """Rotate direction(s) about the z axis by theta radians (z untouched)."""
    d = np.asarray(d, dtype=np.float64)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty_like(d)
    out[..., 0] = d[..., 0] * c - d[..., 1] * s
    out[..., 1] = d[..., 0] * s + d[..., 1] * c
    out[..., 2] = d[..., 2]
    return out


def angular_error(n_pred, n_true):
    """Angle between unit vectors in degrees, atan2(||a x b||, a . b).

    The atan2 form is numerically stable near 0 degrees, unlike arccos of
    the dot product.  Broadcasts over leading axes.
    """
    a = np.asarray(n_pred, dtype=np.float64)
    b = np.asarray(n_true, dtype=np.float64)
    cross = np.cross(a, b)
    sin_term = np.linalg.norm(np.atleast_2d(cross), axis=-1)
    if a.ndim == 1 and b.ndim == 1:
        sin_term = sin_term[0]
    dot_term = np.sum(a * b, axis=-1)
    return np.degrees(np.abs(np.arctan2(sin_term, dot_term)))


def orthonormal_tangents(n):
    """Build tangent/bitangent vectors (t, b) so that (t, b, n) is a right-handed
    orthonormal frame.  Branchless construction, valid for any unit n.
    """
    n = np.asarray(n, dtype=np.float64)
    x, y, z = n[..., 0], n[..., 1], n[..., 2]
    s = np.copysign(1.0, z)
    a = -1.0 / (s + z)
    b = x * y * a
    t = np.stack([1.0 + s * x * x * a, s * b, -s * x], axis=-1)
    bt = np.stack([b, s + y * y * a, -y], axis=-1)
    return t, bt
