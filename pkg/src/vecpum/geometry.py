"""Surfaces, tangent frames, and the matrices behind the surface operators.

The surface curl and surface gradient of a scalar f are expressed
extrinsically as ``Q_x grad(f)`` and ``P_x grad(f)``, where ``Q_x v = n x v``
and ``P_x = I - n n^T`` for the unit normal n at x.  Supported surfaces are
the plane (embedded at z = 0), the unit sphere, and flat Euclidean space
(where no frames or projections apply and the gradient is used directly).
"""

from dataclasses import dataclass

import numpy as np

SPHERE_NORM_TOL = 1e-9

PLANE_D = np.array([1.0, 0.0, 0.0])
PLANE_E = np.array([0.0, 1.0, 0.0])
PLANE_N = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class TangentFrame:
    """Orthonormal frame {d, e, n} at one surface point."""

    d: np.ndarray
    e: np.ndarray
    n: np.ndarray


@dataclass(frozen=True)
class Surface:
    """Geometry selector: ``plane`` and ``sphere`` live in R^3, ``euclidean``
    in R^d with d in {2, 3}.  ``dim`` is the coordinate dimension points
    carry (3 for the embedded surfaces)."""

    kind: str
    dim: int

    @property
    def is_embedded(self):
        return self.kind in ("plane", "sphere")

    def normals(self, points):
        """Unit normals at on-surface points, shape (m, 3)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "plane":
            return np.broadcast_to(PLANE_N, points.shape).copy()
        if self.kind == "sphere":
            norms = np.sqrt((points * points).sum(-1))
            if np.any(np.abs(norms - 1.0) > SPHERE_NORM_TOL):
                worst = float(np.abs(norms - 1.0).max())
                raise ValueError(
                    f"point off the unit sphere by {worst:.3e} "
                    f"(tolerance {SPHERE_NORM_TOL:g})")
            return points
        raise ValueError("euclidean geometry has no surface normals")

    def tangent_frames(self, points):
        """Orthonormal frames (D, E, N) at on-surface points.

        On the plane the frame is the fixed (1,0,0), (0,1,0), (0,0,1).  On
        the sphere, e = normalize(a x n) with a = (0,0,1) away from the
        poles and a = (1,0,0) when |n_z| > 0.9, then d = n x e.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "plane":
            m = points.shape[0]
            return (np.tile(PLANE_D, (m, 1)), np.tile(PLANE_E, (m, 1)),
                    np.tile(PLANE_N, (m, 1)))
        if self.kind == "sphere":
            n = self.normals(points)
            a = np.where(np.abs(n[:, 2:3]) > 0.9, PLANE_D, PLANE_N)
            e = np.cross(a, n)
            e /= np.sqrt((e * e).sum(-1))[:, None]
            d = np.cross(n, e)
            return d, e, n
        raise ValueError("euclidean geometry has no tangent frames")

    def project(self, points):
        """Pull points back onto the surface (used for glue points)."""
        points = np.asarray(points, dtype=float)
        if self.kind == "sphere":
            return points / np.sqrt((points * points).sum(-1))[..., None]
        return points


    def normal(self, x):
        """Unit normal at a single on-surface point."""
        return self.normals(np.asarray(x, dtype=float)[None, :])[0]

    def tangent_frame(self, x):
        """TangentFrame at a single on-surface point."""
        d, e, n = self.tangent_frames(np.asarray(x, dtype=float)[None, :])
        return TangentFrame(d=d[0], e=e[0], n=n[0])


def plane2d():
    return Surface("plane", 3)


def sphere2():
    return Surface("sphere", 3)


def euclidean(d):
    if d not in (2, 3):
        raise ValueError("euclidean geometry supports d in {2, 3}")
    return Surface("euclidean", d)


def q_matrix(n):
    """Skew matrix with Q v = n x v for a unit normal n."""
    a1, a2, a3 = np.asarray(n, dtype=float)
    return np.array([[0.0, -a3, a2],
                     [a3, 0.0, -a1],
                     [-a2, a1, 0.0]])


def p_matrix(n):
    """Tangent-plane projector P = I - n n^T for a unit normal n."""
    n = np.asarray(n, dtype=float)
    return np.eye(3) - np.outer(n, n)


def apply_q(normals, vectors):
    """Row-wise n x v (the surface-curl rotation of a gradient)."""
    return np.cross(normals, vectors)


def apply_p(normals, vectors):
    """Row-wise tangential projection v - n (n . v)."""
    return vectors - normals * (normals * vectors).sum(-1)[..., None]


def surface_curl_of_scalar(surface, x, grad):
    """Q_x grad: the surface curl of a scalar with Euclidean gradient grad."""
    n = surface.normals(x)[0]
    return np.cross(n, np.asarray(grad, dtype=float))


def surface_grad_of_scalar(surface, x, grad):
    """P_x grad: the surface gradient of a scalar with Euclidean gradient grad."""
    n = surface.normals(x)[0]
    grad = np.asarray(grad, dtype=float)
    return grad - n * (n @ grad)


def embed_points(points2d):
    """Lift (m, 2) plane points to (m, 3) with z = 0."""
    points2d = np.atleast_2d(np.asarray(points2d, dtype=float))
    out = np.zeros((points2d.shape[0], 3))
    out[:, :2] = points2d
    return out


embed_vectors = embed_points
