import numpy as np
import pytest

from vecpum import cover, geometry, glue, testbed
from vecpum.errors import CoverageError
from vecpum.kernels import RadialKernel
from vecpum.localfit import SampleSet, fit_global, fit_patch
from vecpum.pum import PumApproximant, build_approximant

PLANE = geometry.plane2d()


def star_setup(n, seed=23, q=8.0, delta=0.5):
    nodes = geometry.embed_points(testbed.nodes_star(n, seed))
    values = geometry.embed_vectors(testbed.u1(nodes[:, :2]))
    h = cover.spacing_from_q(q, 6.0, len(nodes), 2)
    centers = geometry.embed_points(
        cover.centers_plane(testbed._StarDomain, h))
    cov = cover.assign_radii_and_inflate(centers, nodes, delta, PLANE, h)
    return nodes, values, cov


def star_points(m, seed):
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < m:
        cand = rng.uniform(-1.6, 1.7, size=(4 * m, 2))
        cand = cand[testbed.inside_star(cand)]
        pts.extend(cand.tolist())
    return geometry.embed_points(np.array(pts[:m]))


@pytest.fixture(scope="module")
def star_approx():
    nodes, values, cov = star_setup(1500, seed=4)
    kernel = RadialKernel("imq", 7.0)
    approx, graph, solution = build_approximant(cov, kernel, PLANE,
                                                "div_surface", values)
    return nodes, values, approx


def test_single_patch_cover_matches_global_fit():
    nodes = geometry.embed_points(testbed.nodes_star(400, 2))
    values = geometry.embed_vectors(testbed.u1(nodes[:, :2]))
    kernel = RadialKernel("imq", 7.0)
    cov = cover.single_patch_cover(nodes, PLANE, radius=4.0)
    approx, _, _ = build_approximant(cov, kernel, PLANE, "div_surface",
                                     values)
    oracle = fit_global(SampleSet(nodes, values), kernel, PLANE,
                        "div_surface")
    pts = star_points(200, seed=6)
    pot_p, field_p = approx.batch_eval(pts)
    field_o = oracle.field_at(pts)
    pot_o = oracle.potential_at(pts)
    scale = np.sqrt((field_o**2).sum(-1)).max()
    assert np.abs(field_p - field_o).max() <= 1e-12 * scale
    a = pot_p - pot_p.mean()
    b = pot_o - pot_o.mean()
    assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()


def test_common_shift_moves_potential_exactly():
    nodes, values, cov = star_setup(600, seed=9)
    kernel = RadialKernel("imq", 7.0)
    approx, graph, solution = build_approximant(cov, kernel, PLANE,
                                                "div_surface", values)
    pts = star_points(50, seed=10)
    pot0, field0 = approx.batch_eval(pts)
    shifted = glue.ShiftSolution(shifts=solution.shifts + 2.75,
                                 residual=solution.residual,
                                 anchor=solution.anchor)
    approx2 = PumApproximant(cover=approx.cover, fits=approx.fits,
                             shifts=shifted, surface=PLANE,
                             mode="div_surface")
    pot1, field1 = approx2.batch_eval(pts)
    assert np.abs(pot1 - pot0 - 2.75).max() < 1e-12
    scale = np.sqrt((field0**2).sum(-1)).max()
    # constants are annihilated by the surface curl
    assert np.abs(field1 - field0).max() <= 1e-11 * scale


def test_potential_matches_unpruned_blend(star_approx):
    nodes, values, approx = star_approx
    pts = star_points(40, seed=11)
    pot, _ = approx.batch_eval(pts)
    shifts = approx.shifts.shifts
    for x, got in zip(pts, pot):
        num = 0.0
        den = 0.0
        for l, patch in enumerate(approx.cover.patches):
            d = np.linalg.norm(x - patch.center)
            k = float(cover.kappa(d / patch.radius)) if d < patch.radius \
                else 0.0
            if k > 0.0:
                num += k * (approx.fits[l].potential_at(x[None])[0]
                            + shifts[l])
                den += k
        assert abs(got - num / den) <= 1e-14 * max(1.0, abs(num / den))


def test_batch_matches_pointwise_bitwise(star_approx):
    _, _, approx = star_approx
    pts = star_points(1000, seed=12)
    pot, field, naive = approx.batch_eval_all(pts)
    for i in (0, 17, 256, 999):
        assert approx.eval_potential(pts[i]) == pot[i]
        assert np.array_equal(approx.eval_field(pts[i]), field[i])
        assert np.array_equal(approx.eval_field_naive(pts[i]), naive[i])


def test_empty_input_and_ordering(star_approx):
    _, _, approx = star_approx
    pot, field = approx.batch_eval(np.zeros((0, 3)))
    assert pot.shape == (0,) and field.shape == (0, 3)
    pts = star_points(64, seed=13)
    pot, field = approx.batch_eval(pts)
    perm = np.random.default_rng(0).permutation(len(pts))
    pot2, field2 = approx.batch_eval(pts[perm])
    assert np.array_equal(pot2, pot[perm])
    assert np.array_equal(field2, field[perm])


def test_uncovered_points_error(star_approx):
    _, _, approx = star_approx
    pts = np.array([[50.0, 50.0, 0.0], [0.2, 0.2, 0.0], [60.0, 0.0, 0.0]])
    with pytest.raises(CoverageError) as err:
        approx.batch_eval(pts)
    assert list(err.value.indices) == [0, 2]


def test_naive_blend_interpolates_but_field_matches_definition(star_approx):
    nodes, values, approx = star_approx
    pot, field, naive = approx.batch_eval_all(nodes[:300])
    scale = np.sqrt((values[:300] ** 2).sum(-1)).max()
    # each local fit interpolates, so the weighted blend does too
    assert np.sqrt(((naive - values[:300]) ** 2).sum(-1)).max() <= 1e-8 \
        * scale
    # the conservative field differs from the naive one by the correction
    corr = np.zeros_like(naive)
    shifts = approx.shifts.shifts
    for i, x in enumerate(nodes[:300]):
        w = cover.weights_at(approx.cover, x)
        acc = np.zeros(3)
        for l, grad in zip(w.indices, w.gradients):
            psi = approx.fits[l].potential_at(x[None])[0] + shifts[l]
            acc += psi * grad
        corr[i] = np.cross([0.0, 0.0, 1.0], acc)
    # field and naive are O(scale); the two correction routes only agree to
    # rounding on that scale
    assert np.abs(field - naive - corr).max() <= 1e-9 * scale


def test_near_interpolation_bound_at_nodes(star_approx):
    nodes, values, approx = star_approx
    pot, field, naive = approx.batch_eval_all(nodes)
    err = np.sqrt(((field - values) ** 2).sum(-1))
    shifts = approx.shifts.shifts
    scale = np.sqrt((values**2).sum(-1)).max()
    slack = 10 * 1e-8 * scale
    for i, x in enumerate(nodes[:400]):
        w = cover.weights_at(approx.cover, x)
        psis = np.array([approx.fits[l].potential_at(x[None])[0] + shifts[l]
                         for l in w.indices])
        ref = psis[np.argmin(
            np.linalg.norm(x - approx.cover.centers[w.indices], axis=1))]
        bound = (np.abs(psis - ref)
                 * np.sqrt((w.gradients**2).sum(-1))).sum()
        assert err[i] <= bound + slack


def test_identical_potentials_zero_correction():
    nodes, values, cov = star_setup(500, seed=14)
    kernel = RadialKernel("imq", 7.0)
    approx, graph, solution = build_approximant(cov, kernel, PLANE,
                                                "div_surface", values)
    one = fit_global(SampleSet(nodes, values), kernel, PLANE, "div_surface")
    same = PumApproximant(cover=cov, fits=[one] * len(cov),
                          shifts=glue.ShiftSolution(
                              shifts=np.zeros(len(cov)),
                              residual=np.zeros(0), anchor=0),
                          surface=PLANE, mode="div_surface")
    pts = star_points(60, seed=15)
    pot, field, naive = same.batch_eval_all(pts)
    scale = np.sqrt((field**2).sum(-1)).max()
    # all shifted potentials agree, so sum psi_l grad(w_l) telescopes to 0
    assert np.abs(field - naive).max() <= 1e-10 * scale


def plane_divergence_fd(field_fn, x, step):
    div = 0.0
    for a in range(2):
        e = np.zeros(3)
        e[a] = step
        div += (field_fn((x + e)[None])[0][a]
                - field_fn((x - e)[None])[0][a]) / (2 * step)
    return div


def test_conservation_vs_naive_blend():
    nodes, values, cov = star_setup(2000, seed=16)
    kernel = RadialKernel("imq", 13.0)
    approx, _, _ = build_approximant(cov, kernel, PLANE, "div_surface",
                                     values)
    pts = star_points(100, seed=17)
    _, field = approx.batch_eval(pts)
    scale = np.sqrt((field**2).sum(-1)).max()
    step = 5e-5

    def field_fn(p):
        return approx.batch_eval(p)[1]

    def naive_fn(p):
        return approx.batch_eval_all(p)[2]

    div_pum = np.array([plane_divergence_fd(field_fn, x, step) for x in pts])
    div_naive = np.array([plane_divergence_fd(naive_fn, x, step)
                          for x in pts])
    assert np.abs(div_pum).max() <= 1e-4 * scale
    ratio = np.abs(div_naive) / np.maximum(np.abs(div_pum), 1e-300)
    assert np.median(ratio) >= 1e4


def test_field_is_derivative_of_potential(star_approx):
    _, values, approx = star_approx
    pts = star_points(40, seed=18)
    _, field = approx.batch_eval(pts)
    scale = np.sqrt((field**2).sum(-1)).max()
    step = 1e-5
    for x, f in zip(pts, field):
        grad = np.zeros(3)
        for a in range(2):
            e = np.zeros(3)
            e[a] = step
            grad[a] = (approx.eval_potential(x + e)
                       - approx.eval_potential(x - e)) / (2 * step)
        assert np.abs(np.cross([0.0, 0.0, 1.0], grad) - f).max() \
            <= 1e-5 * scale


def test_anchor_invariance_of_reconstruction():
    nodes, values, cov = star_setup(800, seed=21)
    kernel = RadialKernel("imq", 7.0)
    approx, graph, _ = build_approximant(cov, kernel, PLANE, "div_surface",
                                         values)
    from vecpum.glue import build_shift_system, solve_shifts
    p, c = build_shift_system(graph, approx.fits)
    sol_a = solve_shifts(p, c, graph, gamma=4.0, anchor=0)
    sol_b = solve_shifts(p, c, graph, gamma=4.0, anchor=len(cov) - 1)
    # shifts differ by one global constant only
    diff = sol_a.shifts - sol_b.shifts
    assert np.ptp(diff) < 1e-9 * max(1.0, np.abs(sol_a.shifts).max())
    pts = star_points(80, seed=22)
    pts = pts[cov.covers(pts)][:60]
    fa = PumApproximant(cover=cov, fits=approx.fits, shifts=sol_a,
                        surface=PLANE, mode="div_surface").batch_eval(pts)[1]
    fb = PumApproximant(cover=cov, fits=approx.fits, shifts=sol_b,
                        surface=PLANE, mode="div_surface").batch_eval(pts)[1]
    scale = np.sqrt((fa**2).sum(-1)).max()
    assert np.abs(fa - fb).max() <= 1e-10 * scale


def test_shift_quality_tracks_field_error():
    # with shifts applied, potential mismatch at glue points stays within
    # 10x the absolute field-error scale of the same run
    prob = testbed.sphere_problem()
    nodes = prob.nodes(2000, 31)
    values = prob.field(nodes)
    from vecpum import cover as cov_mod
    h = cov_mod.spacing_from_q(9.0, prob.area, len(nodes), 2)
    cov = cov_mod.assign_radii_and_inflate(prob.make_centers(h), nodes,
                                           9.0 / 16.0, prob.surface, h)
    kernel = RadialKernel("matern4", 7.5)
    approx, graph, solution = build_approximant(cov, kernel, prob.surface,
                                                "div_surface", values)
    eval_pts = prob.nodes(4000, 32)
    _, field = approx.batch_eval(eval_pts)
    err_scale = np.sqrt(((field - prob.field(eval_pts)) ** 2).sum(-1)).max()
    # |psi~_l - psi~_k| at a glue point is exactly the system residual there
    mismatch = np.abs(solution.residual).max()
    assert mismatch <= 10.0 * err_scale


def test_workers_do_not_change_results():
    nodes, values, cov = star_setup(700, seed=25)
    kernel = RadialKernel("imq", 7.0)
    serial, _, sol1 = build_approximant(cov, kernel, PLANE, "div_surface",
                                        values, workers=1)
    threaded, _, sol2 = build_approximant(cov, kernel, PLANE, "div_surface",
                                          values, workers=4)
    for a, b in zip(serial.fits, threaded.fits):
        assert np.array_equal(a.coef_vectors, b.coef_vectors)
    assert np.array_equal(sol1.shifts, sol2.shifts)
    pts = star_points(400, seed=26)
    pts = pts[cov.covers(pts)]
    p1, f1, n1 = serial.batch_eval_all(pts, workers=1)
    p2, f2, n2 = serial.batch_eval_all(pts, workers=3)
    assert np.array_equal(p1, p2)
    assert np.array_equal(f1, f2)
    assert np.array_equal(n1, n2)


def test_partition_of_unity_consistency_mismatch_raises():
    nodes, values, cov = star_setup(300, seed=19)
    kernel = RadialKernel("imq", 7.0)
    approx, graph, solution = build_approximant(cov, kernel, PLANE,
                                                "div_surface", values)
    with pytest.raises(ValueError):
        PumApproximant(cover=cov, fits=approx.fits[:-1],
                       shifts=solution, surface=PLANE, mode="div_surface")
