"""Glue points and the potential-shift least-squares system.

Local scalar potentials are each defined only up to a constant.  One glue
point per overlapping patch pair carries the condition
psi_l(x) + b_l = psi_k(x) + b_k, collected into the sparse incidence system
P b = c whose rank is (patch count - 1) on a connected cover.  The shifts b
come from (optionally weighted) graph-Laplacian normal equations with one
anchor shift pinned to zero.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .cover import patch_graph_edges
from .errors import CoverConnectivityError

# Above this many patches the anchored normal equations are solved by a
# sparse LU factorization instead of a dense Cholesky.
DENSE_SOLVE_MAX = 6000


@dataclass
class GlueGraph:
    """Overlap edges (l < k), their glue points, and per-edge near-center
    distances used by the least-squares weighting."""

    edges: np.ndarray
    points: np.ndarray
    r_near: np.ndarray
    n_patches: int
    member_counts: np.ndarray

    def __len__(self):
        return len(self.edges)


@dataclass
class ShiftSolution:
    """Potential shifts with the anchored index and the system residual.

    The residual P b - c is kept: it enters the reconstruction error bound
    and its decay under refinement is a correctness diagnostic.
    """

    shifts: np.ndarray
    residual: np.ndarray
    anchor: int


def build_glue_graph(cover, surface):
    """One glue point per overlapping patch pair.

    The point is the radius-weighted center of the overlap,
    (rho_k xi_l + rho_l xi_k) / (rho_k + rho_l), pulled back onto the
    sphere when the cover lives there; it always lies strictly inside both
    patches.  Raises CoverConnectivityError on a disconnected overlap graph.
    """
    m = len(cover)
    edges = patch_graph_edges(cover.centers, cover.radii)
    if m > 1:
        adj = sparse.coo_matrix(
            (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(m, m))
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp != 1:
            raise CoverConnectivityError(
                f"overlap graph has {n_comp} components; rank(P) < M-1")
    if len(edges) == 0:
        return GlueGraph(edges=np.zeros((0, 2), dtype=int),
                         points=np.zeros((0, cover.centers.shape[1])),
                         r_near=np.zeros(0), n_patches=m,
                         member_counts=cover.member_counts())
    xl = cover.centers[edges[:, 0]]
    xk = cover.centers[edges[:, 1]]
    rl = cover.radii[edges[:, 0]][:, None]
    rk = cover.radii[edges[:, 1]][:, None]
    points = (rk * xl + rl * xk) / (rk + rl)
    points = surface.project(points)
    dist_l = np.sqrt(((points - xl) ** 2).sum(-1))
    dist_k = np.sqrt(((points - xk) ** 2).sum(-1))
    return GlueGraph(edges=edges, points=points,
                     r_near=np.minimum(dist_l, dist_k), n_patches=m,
                     member_counts=cover.member_counts())


def build_shift_system(graph, fits):
    """Assemble the sparse L-by-M system P b = c.

    Row i for edge (l, k) has +1 in column l and -1 in column k, and
    c_i = psi_k(glue_i) - psi_l(glue_i) evaluated with the fitted local
    potentials.
    """
    n_edges = len(graph.edges)
    m = graph.n_patches
    rows = np.repeat(np.arange(n_edges), 2)
    cols = graph.edges.reshape(-1)
    data = np.tile([1.0, -1.0], n_edges)
    p = sparse.csr_matrix((data, (rows, cols)), shape=(n_edges, m))
    c = np.zeros(n_edges)
    for l in range(m):
        on_l = np.nonzero(graph.edges[:, 0] == l)[0]
        if len(on_l):
            c[on_l] -= fits[l].potential_at(graph.points[on_l])
        on_k = np.nonzero(graph.edges[:, 1] == l)[0]
        if len(on_k):
            c[on_k] += fits[l].potential_at(graph.points[on_k])
    return p, c


def glue_weights(graph, gamma):
    """Diagonal weights exp(-gamma (1 - r_i/r_min)^2); identity at gamma=0."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if len(graph.r_near) == 0:
        return np.zeros(0)
    r_min = graph.r_near.min()
    return np.exp(-gamma * (1.0 - graph.r_near / r_min) ** 2)


def solve_shifts(p, c, graph, gamma=4.0, anchor=None):
    """Weighted least squares for the shifts with one anchor pinned to zero.

    The anchor defaults to the patch with the most member nodes (lowest
    index on ties); shifting all b_l by a common constant does not change
    the blended field, so the anchor choice only fixes the gauge.
    """
    m = graph.n_patches
    if anchor is None:
        anchor = int(np.argmax(graph.member_counts))
    if len(c) == 0:
        return ShiftSolution(shifts=np.zeros(m), residual=np.zeros(0),
                             anchor=anchor)
    w = glue_weights(graph, gamma)
    keep = np.arange(m) != anchor
    p_red = p[:, keep]
    wp = p_red.multiply(w[:, None]).tocsr()
    normal = (p_red.T @ wp).tocsc()
    rhs = p_red.T @ (w * c)
    if m - 1 <= DENSE_SOLVE_MAX:
        dense = normal.toarray()
        factor = sla.cho_factor(dense, lower=False, check_finite=False)
        sol = sla.cho_solve(factor, rhs, check_finite=False)
    else:
        sol = splu(normal).solve(rhs)
    shifts = np.zeros(m)
    shifts[keep] = sol
    return ShiftSolution(shifts=shifts, residual=p @ shifts - c,
                         anchor=anchor)


def dump_glue(graph, c, solution, path):
    """Diagnostic dump: one line per edge,
    `l k x y z r_near c_i residual_i`."""
    with open(path, "w") as fh:
        for i, (l, k) in enumerate(graph.edges):
            pt = np.zeros(3)
            pt[: graph.points.shape[1]] = graph.points[i]
            fh.write(f"{l} {k} {pt[0]:.17g} {pt[1]:.17g} {pt[2]:.17g} "
                     f"{graph.r_near[i]:.17g} {c[i]:.17g} "
                     f"{solution.residual[i]:.17g}\n")
