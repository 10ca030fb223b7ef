"""Per-patch div/curl-free kernel interpolation: assembly, solve, evaluation.

For nodes x_j with tangent frames {d_j, e_j, n_j}, the surface systems are
2n-by-2n with 2x2 blocks  [d_i e_i]^T Phi(x_i, x_j) [d_j e_j], where
Phi_div = Q_x H Q_y and Phi_curl = -P_x H P_y for the scalar-kernel Hessian
H = F*I + S*rr^T.  In flat R^d the curl-free system is the dn-by-dn
block matrix of -H.  All systems are symmetric positive definite for the
shipped kernels and are solved by Cholesky factorization; failures surface
as PatchFitError rather than being regularized away.

Evaluation avoids BLAS reductions on purpose: sums run over the trailing
axes of C-contiguous arrays so a point evaluated alone is bit-identical to
the same point inside a batch.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.spatial import cKDTree

from . import geometry
from .errors import GlobalFitSizeError, PatchFitError
from .kernels import RadialKernel

MODES = ("div_surface", "curl_surface", "curl_euclidean")

GLOBAL_FIT_GUARD = 5000
TANGENCY_TOL = 1e-10
_ASSEMBLY_BLOCK = 256


@dataclass(frozen=True)
class SampleSet:
    """Scattered vector samples: nodes (n, dim) and values (n, dim)."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if nodes.shape != values.shape:
            raise ValueError("nodes and values must have matching shapes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.nodes)

    def validate(self, surface, mode):
        if len(self.nodes) == 0:
            raise ValueError("sample set is empty")
        if len(self.nodes) > 1:
            dist, _ = cKDTree(self.nodes).query(self.nodes, k=2)
            if dist[:, 1].min() == 0.0:
                raise ValueError("sample nodes must be pairwise distinct")
        if mode in ("div_surface", "curl_surface"):
            normals = surface.normals(self.nodes)
            scale = max(1.0, float(np.abs(self.values).max()))
            off = np.abs((normals * self.values).sum(-1)).max()
            if off > TANGENCY_TOL * scale:
                raise ValueError(
                    f"sample values are not tangent to the surface "
                    f"(max normal component {off:.3e})")


def _hessian_block(kernel, xi, xj):
    rvec = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    f, s = kernel.hessian_coeffs(np.sqrt((rvec * rvec).sum()))
    return f * np.eye(len(rvec)) + s * np.outer(rvec, rvec)


def phi_div_block(kernel, surface, xi, xj):
    """The 3x3 div-free matrix kernel Q_xi (F I + S rr^T) Q_xj."""
    h = _hessian_block(kernel, xi, xj)
    qi = geometry.q_matrix(surface.normals(np.asarray(xi)[None, :])[0])
    qj = geometry.q_matrix(surface.normals(np.asarray(xj)[None, :])[0])
    return qi @ h @ qj


def phi_curl_block(kernel, surface, xi, xj):
    """The curl-free matrix kernel: -P H P on a surface, -H in flat R^d."""
    h = _hessian_block(kernel, xi, xj)
    if surface.kind == "euclidean":
        return -h
    pi = geometry.p_matrix(surface.normals(np.asarray(xi)[None, :])[0])
    pj = geometry.p_matrix(surface.normals(np.asarray(xj)[None, :])[0])
    return -(pi @ h @ pj)


def _surface_bases(mode, frames):
    d, e, n = frames
    if mode == "div_surface":
        # Rows pick out [d_i e_i]^T Q_i = [-(n_i x d_i), -(n_i x e_i)]^T and
        # columns Q_j [d_j e_j]; valid for any orthonormal frame.
        right = np.stack([np.cross(n, d), np.cross(n, e)], axis=1)
        return -right, right, 1.0
    left = np.stack([d, e], axis=1)
    return left, left, -1.0


def assemble_system(kernel, surface, nodes, mode, frames=None):
    """Dense interpolation matrix for the given mode (symmetrized)."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    n = len(nodes)
    if mode == "curl_euclidean":
        d = nodes.shape[1]
        a = np.empty((d * n, d * n))
        for i0 in range(0, n, _ASSEMBLY_BLOCK):
            i1 = min(i0 + _ASSEMBLY_BLOCK, n)
            diff = nodes[i0:i1, None, :] - nodes[None, :, :]
            r = np.sqrt((diff * diff).sum(-1))
            f, s = kernel.hessian_coeffs(r)
            for p in range(d):
                for q in range(d):
                    blk = s * diff[:, :, p] * diff[:, :, q]
                    if p == q:
                        blk = blk + f
                    a[d * i0 + p:d * i1 + p:d, q::d] = -blk
        return 0.5 * (a + a.T)
    if frames is None:
        frames = surface.tangent_frames(nodes)
    left, right, sign = _surface_bases(mode, frames)
    a = np.empty((2 * n, 2 * n))
    for i0 in range(0, n, _ASSEMBLY_BLOCK):
        i1 = min(i0 + _ASSEMBLY_BLOCK, n)
        diff = nodes[i0:i1, None, :] - nodes[None, :, :]
        r = np.sqrt((diff * diff).sum(-1))
        f, s = kernel.hessian_coeffs(r)
        t_id = np.einsum("ipa,jqa->ipjq", left[i0:i1], right)
        ld = np.einsum("ipa,ija->ipj", left[i0:i1], diff)
        rd = np.einsum("jqa,ija->ijq", right, diff)
        blk = (f[:, None, :, None] * t_id +
               s[:, None, :, None] * ld[:, :, :, None] * rd[:, None, :, :])
        a[2 * i0:2 * i1] = (sign * blk).reshape(2 * (i1 - i0), 2 * n)
    return 0.5 * (a + a.T)


@dataclass
class LocalFit:
    """A solved interpolation system on one node set.

    ``coef_vectors`` are the expansion coefficients c_j (tangent at the
    nodes for surface modes); ``eval_vectors`` carry the precomputed
    Q_j c_j (div-free) or c_j (curl-free) used by evaluation; ``sign`` is
    +1 for div-free and -1 for curl-free expansions.
    """

    mode: str
    kernel: RadialKernel
    surface: geometry.Surface
    nodes: np.ndarray
    coef_vectors: np.ndarray
    eval_vectors: np.ndarray
    sign: float
    frames: tuple = None
    alpha_beta: np.ndarray = None
    fit_residual: float = 0.0

    def _pair_terms(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        diff = points[:, None, :] - self.nodes[None, :, :]
        r = np.sqrt((diff * diff).sum(-1))
        f, s = self.kernel.hessian_coeffs(r)
        proj = (diff * self.eval_vectors[None, :, :]).sum(-1)
        return points, diff, f, s, proj

    def _project(self, points, raw):
        if self.mode == "div_surface":
            return np.cross(self.surface.normals(points), raw)
        if self.mode == "curl_surface":
            normals = self.surface.normals(points)
            return raw - normals * (normals * raw).sum(-1)[:, None]
        return raw

    def potential_at(self, points):
        """Scalar potential of the interpolant at the given points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        diff = points[:, None, :] - self.nodes[None, :, :]
        r = np.sqrt((diff * diff).sum(-1))
        f = self.kernel.phi_d1_over_r(r)
        proj = (diff * self.eval_vectors[None, :, :]).sum(-1)
        return self.sign * (f * proj).sum(-1)

    def field_at(self, points):
        """Vector interpolant at the given points (tangent on surfaces)."""
        points, diff, f, s, proj = self._pair_terms(points)
        raw = self.sign * (f[:, :, None] * self.eval_vectors[None, :, :] +
                           (s * proj)[:, :, None] * diff).sum(axis=1)
        return self._project(points, raw)

    def field_potential_at(self, points):
        """(potential, field) sharing one pass over the node pairs."""
        points, diff, f, s, proj = self._pair_terms(points)
        pot = self.sign * (f * proj).sum(-1)
        raw = self.sign * (f[:, :, None] * self.eval_vectors[None, :, :] +
                           (s * proj)[:, :, None] * diff).sum(axis=1)
        return pot, self._project(points, raw)


def _solve_spd(a, rhs, patch_id):
    try:
        factor = sla.cho_factor(a, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise PatchFitError(patch_id, float(np.linalg.cond(a))) from exc
    return sla.cho_solve(factor, rhs, check_finite=False)


def fit_patch(samples, kernel, surface, mode, frames=None, patch_id=None):
    """Solve the local interpolation system and package the result.

    ``frames`` overrides the surface's tangent frames (any orthonormal
    frame yields the same interpolant; only the coefficient parametrization
    changes).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "curl_euclidean" and surface.kind != "euclidean":
        raise ValueError("curl_euclidean mode requires euclidean geometry")
    if mode != "curl_euclidean" and surface.kind == "euclidean":
        raise ValueError(f"mode {mode!r} requires a surface geometry")
    samples.validate(surface, mode)
    nodes, values = samples.nodes, samples.values
    n = len(nodes)

    if mode == "curl_euclidean":
        a = assemble_system(kernel, surface, nodes, mode)
        sol = _solve_spd(a, values.reshape(-1), patch_id)
        coef = sol.reshape(n, nodes.shape[1])
        fit = LocalFit(mode=mode, kernel=kernel, surface=surface,
                       nodes=nodes, coef_vectors=coef, eval_vectors=coef,
                       sign=-1.0)
    else:
        if frames is None:
            frames = surface.tangent_frames(nodes)
        d, e, _ = frames
        a = assemble_system(kernel, surface, nodes, mode, frames=frames)
        rhs = np.empty(2 * n)
        rhs[0::2] = (d * values).sum(-1)
        rhs[1::2] = (e * values).sum(-1)
        sol = _solve_spd(a, rhs, patch_id)
        alpha_beta = np.stack([sol[0::2], sol[1::2]], axis=1)
        coef = alpha_beta[:, 0:1] * d + alpha_beta[:, 1:2] * e
        if mode == "div_surface":
            evec = np.cross(frames[2], coef)
            sign = 1.0
        else:
            evec = coef
            sign = -1.0
        fit = LocalFit(mode=mode, kernel=kernel, surface=surface,
                       nodes=nodes, coef_vectors=coef, eval_vectors=evec,
                       sign=sign, frames=frames, alpha_beta=alpha_beta)

    scale = float(np.sqrt((values * values).sum(-1)).max())
    miss = fit.field_at(nodes) - values
    worst = float(np.sqrt((miss * miss).sum(-1)).max())
    fit.fit_residual = worst / scale if scale > 0 else worst
    return fit


def fit_global(samples, kernel, surface, mode, guard=GLOBAL_FIT_GUARD):
    """One dense fit over all samples; the O(N^3) oracle the blended
    approximant is compared against.  Refuses node counts above ``guard``."""
    if len(samples) > guard:
        raise GlobalFitSizeError(
            f"global dense fit limited to {guard} nodes, got {len(samples)}")
    return fit_patch(samples, kernel, surface, mode, patch_id="global")
