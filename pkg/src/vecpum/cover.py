"""Overlapping patch covers and Shepard partition-of-unity weights.

A cover is a set of ball-shaped patches (disks in the plane, spherical caps
on the sphere, balls in R^3) whose centers come from a lattice of spacing H
restricted to the domain, with radii proportional to H.  Every sample node
must land strictly inside at least one patch; nodes missed by the initial
radii inflate their nearest patch.  Weights are Shepard quotients of a C^1
quadratic B-spline bump, with analytic gradients.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import ConfigError, CoverConnectivityError, CoverageError

# Factor by which an inflated radius overshoots the node distance so that
# strict-inequality membership tests succeed.
INFLATION_MARGIN = 1e-6


def spacing_from_q(q, area, n_nodes, dim):
    """Patch spacing H = q * (area / n_nodes)**(1/dim)."""
    if q <= 0 or area <= 0 or n_nodes <= 0 or dim <= 0:
        raise ValueError("q, area, n_nodes, dim must all be positive")
    return q * (area / n_nodes) ** (1.0 / dim)


def centers_plane(domain, spacing):
    """Hexagonal-lattice points of the given spacing inside a plane domain.

    ``domain`` supplies ``bbox = ((x0, y0), (x1, y1))`` and a vectorized
    ``inside(points) -> bool mask``.  Rows run along the x axis, anchored at
    the bounding-box corner, with alternate rows offset by half a spacing.
    """
    (x0, y0), (x1, y1) = domain.bbox
    row_step = spacing * np.sqrt(3.0) / 2.0
    ys = np.arange(y0, y1 + row_step, row_step)
    rows = []
    for k, y in enumerate(ys):
        shift = 0.5 * spacing if k % 2 else 0.0
        xs = np.arange(x0 + shift, x1 + spacing, spacing)
        rows.append(np.stack([xs, np.full_like(xs, y)], axis=1))
    pts = np.concatenate(rows)
    pts = pts[domain.inside(pts)]
    if len(pts) == 0:
        raise ConfigError("no plane patch centers survive the inside test; "
                          "spacing is too large for the domain")
    return pts


def centers_ball(spacing):
    """Cartesian-lattice points of the given spacing in the closed unit ball.

    The lattice contains the origin, so ``spacing >= 1`` still yields at
    least one center.
    """
    kmax = int(np.floor(1.0 / spacing))
    ticks = np.arange(-kmax, kmax + 1) * spacing
    gx, gy, gz = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    pts = pts[(pts * pts).sum(-1) <= 1.0]
    if len(pts) == 0:
        raise ConfigError("no ball patch centers; spacing too large")
    return pts


def centers_sphere(spacing):
    """ceil(4 pi / spacing^2) quasi-uniform unit vectors (Fibonacci spiral)."""
    m = int(np.ceil(4.0 * np.pi / spacing**2))
    k = np.arange(m)
    z = 1.0 - (2.0 * k + 1.0) / m
    theta = np.pi * (3.0 - np.sqrt(5.0)) * k
    rad = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    pts = np.stack([rad * np.cos(theta), rad * np.sin(theta), z], axis=1)
    return pts / np.sqrt((pts * pts).sum(-1))[:, None]


def kappa(r):
    """C^1 quadratic B-spline bump: 1 - 3r^2 on [0, 1/3], 1.5(1-r)^2 on
    [1/3, 1], zero outside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    lo = r < 1.0 / 3.0
    hi = ~lo & (r < 1.0)
    out[lo] = 1.0 - 3.0 * r[lo] ** 2
    out[hi] = 1.5 * (1.0 - r[hi]) ** 2
    return out


def kappa_prime(r):
    """Derivative of ``kappa``; continuous, with kappa'(1) = 0."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    lo = r < 1.0 / 3.0
    hi = ~lo & (r < 1.0)
    out[lo] = -6.0 * r[lo]
    out[hi] = -3.0 * (1.0 - r[hi])
    return out


def _kappa_prime_over_r(r):
    # kappa'(r)/r with the finite limit -6 at r = 0.
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    lo = r < 1.0 / 3.0
    hi = ~lo & (r < 1.0)
    out[lo] = -6.0
    out[hi] = -3.0 * (1.0 - r[hi]) / r[hi]
    return out


@dataclass
class Patch:
    """One cover element: center, radius, and indices of member nodes."""

    center: np.ndarray
    radius: float
    members: np.ndarray


@dataclass
class Cover:
    """Immutable patch cover over a node set.

    ``centers``/``radii`` mirror the per-patch data as arrays for vectorized
    queries; ``tree`` indexes the patch centers.
    """

    patches: list
    centers: np.ndarray
    radii: np.ndarray
    nodes: np.ndarray
    spacing: float
    overlap: float
    tree: cKDTree = field(repr=False)

    def __len__(self):
        return len(self.patches)

    def member_counts(self):
        return np.array([len(p.members) for p in self.patches])

    def active_patches(self, x):
        """Indices of patches strictly containing the point x, ascending."""
        x = np.asarray(x, dtype=float)
        cand = self.tree.query_ball_point(x, float(self.radii.max()))
        cand = np.sort(np.asarray(cand, dtype=int))
        if len(cand) == 0:
            return cand
        diff = self.centers[cand] - x
        dist = np.sqrt((diff * diff).sum(-1))
        return cand[dist < self.radii[cand]]

    def covers(self, points):
        """Boolean mask: which of the given points lie in some patch."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(len(points), dtype=bool)
        tree = cKDTree(points)
        for c, rho in zip(self.centers, self.radii):
            idx = np.asarray(tree.query_ball_point(c, rho), dtype=int)
            if len(idx):
                diff = points[idx] - c
                mask[idx[(diff * diff).sum(-1) < rho * rho]] = True
        return mask


def _initial_radius(surface, spacing, overlap):
    if surface.kind == "euclidean" and surface.dim == 3:
        return (1.0 + overlap) * np.sqrt(3.0) * spacing / 2.0
    return (1.0 + overlap) * spacing / 2.0


def patch_graph_edges(centers, radii):
    """Pairs (l, k), l < k, of patches whose balls intersect."""
    tree = cKDTree(centers)
    pairs = tree.query_pairs(2.0 * float(np.max(radii)), output_type="ndarray")
    if len(pairs) == 0:
        return pairs.reshape(0, 2)
    diff = centers[pairs[:, 0]] - centers[pairs[:, 1]]
    dist = np.sqrt((diff * diff).sum(-1))
    keep = dist < radii[pairs[:, 0]] + radii[pairs[:, 1]]
    pairs = pairs[keep]
    swap = pairs[:, 0] > pairs[:, 1]
    pairs[swap] = pairs[swap][:, ::-1]
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]


def _check_connected(centers, radii):
    m = len(centers)
    if m == 1:
        return
    edges = patch_graph_edges(centers, radii)
    adj = sparse.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(m, m))
    n_comp, _ = connected_components(adj, directed=False)
    if n_comp != 1:
        raise CoverConnectivityError(
            f"patch graph has {n_comp} connected components; the potential "
            f"shifts cannot be reconciled across a disconnected cover")


def assign_radii_and_inflate(centers, nodes, overlap, surface, spacing):
    """Build a Cover: geometry-rule radii, then inflate for missed nodes.

    Every node not strictly inside any patch enlarges its nearest patch to
    radius ``dist * (1 + INFLATION_MARGIN)``.  Patches that end up with no
    member nodes are dropped (they carry no local fit).  Raises
    CoverConnectivityError if the resulting patch graph is disconnected.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if len(nodes) == 0:
        raise ConfigError("cannot build a cover over an empty node set")
    if overlap <= 0:
        raise ConfigError("overlap parameter must be positive")
    radii = np.full(len(centers), _initial_radius(surface, spacing, overlap))

    center_tree = cKDTree(centers)
    dist, nearest = center_tree.query(nodes, k=1)
    # Initial radii are uniform, so a node is covered iff its nearest center
    # is strictly within the initial radius.
    for j in np.nonzero(dist >= radii[nearest])[0]:
        target = nearest[j]
        need = dist[j] * (1.0 + INFLATION_MARGIN)
        if radii[target] < need:
            radii[target] = need

    node_tree = cKDTree(nodes)
    patches = []
    for c, rho in zip(centers, radii):
        idx = np.asarray(sorted(node_tree.query_ball_point(c, rho)), dtype=int)
        if len(idx):
            diff = nodes[idx] - c
            idx = idx[(diff * diff).sum(-1) < rho * rho]
        patches.append(Patch(center=c, radius=float(rho), members=idx))

    keep = [i for i, p in enumerate(patches) if len(p.members)]
    if not keep:
        raise ConfigError("every patch is empty; no cover can be built")
    patches = [patches[i] for i in keep]
    centers = centers[keep]
    radii = radii[keep]

    _check_connected(centers, radii)
    return Cover(patches=patches, centers=centers, radii=radii, nodes=nodes,
                 spacing=float(spacing), overlap=float(overlap),
                 tree=cKDTree(centers))


def single_patch_cover(nodes, surface, radius=None):
    """A one-patch cover enclosing all nodes (testing aid for the global
    interpolant equivalence)."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    center = nodes.mean(axis=0)
    if surface.kind == "sphere":
        center = surface.project(center)
    dist = np.sqrt(((nodes - center) ** 2).sum(-1)).max()
    if radius is None:
        radius = 2.5 * dist + 1e-3
    if radius <= dist:
        raise ConfigError("radius does not enclose all nodes")
    patch = Patch(center=center, radius=float(radius),
                  members=np.arange(len(nodes)))
    return Cover(patches=[patch], centers=center[None, :],
                 radii=np.array([float(radius)]), nodes=nodes,
                 spacing=float(radius), overlap=1.0,
                 tree=cKDTree(center[None, :]))


@dataclass
class WeightEval:
    """Shepard weights and gradients of the active patches at one point."""

    indices: np.ndarray
    weights: np.ndarray
    gradients: np.ndarray


def weights_at(cover, x):
    """Evaluate w_l(x) and grad w_l(x) for every patch containing x.

    The weights are the Shepard quotient kappa_l / sum_j kappa_j with
    kappa_l(x) = kappa(||x - center_l|| / radius_l); gradients come from the
    quotient rule, so they sum to zero across the active patches.
    """
    x = np.asarray(x, dtype=float)
    idx = cover.active_patches(x)
    if len(idx) == 0:
        raise CoverageError(f"point {x} is outside every patch")
    diff = x - cover.centers[idx]
    dist = np.sqrt((diff * diff).sum(-1))
    rho = cover.radii[idx]
    u = dist / rho
    k = kappa(u)
    grad_k = (_kappa_prime_over_r(u) / rho**2)[:, None] * diff
    total = k.sum()
    grad_total = grad_k.sum(axis=0)
    w = k / total
    grad_w = grad_k / total - w[:, None] * (grad_total / total)
    return WeightEval(indices=idx, weights=w, gradients=grad_w)


def dump_cover(cover, path):
    """Diagnostic dump: one line per patch, `x y z radius n_members`."""
    with open(path, "w") as fh:
        for p in cover.patches:
            c = np.zeros(3)
            c[: len(p.center)] = p.center
            fh.write(f"{c[0]:.17g} {c[1]:.17g} {c[2]:.17g} "
                     f"{p.radius:.17g} {len(p.members)}\n")
