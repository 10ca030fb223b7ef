import numpy as np
import pytest
from scipy.spatial import cKDTree

from vecpum import geometry, testbed


def star_interior(m, seed):
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < m:
        cand = rng.uniform(-1.6, 1.7, size=(4 * m, 2))
        cand = cand[testbed.inside_star(cand)]
        pts.extend(cand.tolist())
    return np.array(pts[:m])


def test_bump_value_and_derivative():
    assert testbed.bump(0.0) == pytest.approx(0.25, abs=1e-16)
    # overflow-safe at huge arguments
    assert testbed.bump(1e4) == 0.0 or testbed.bump(1e4) < 1e-300
    r = np.linspace(-3, 3, 11)
    step = 1e-6
    fd = (testbed.bump(r + step) - testbed.bump(r - step)) / (2 * step)
    assert np.abs(testbed.bump_d1(r) - fd).max() < 1e-9


def test_inside_star_matches_level_set():
    pts = np.array([[0.0, 0.0], [1.5, 1.5], [0.9, 0.5]])
    expect = testbed.psi1(pts) <= -0.1
    assert np.array_equal(testbed.inside_star(pts), expect)


def test_u1_matches_fd_surface_curl():
    pts = star_interior(1000, seed=0)
    step = 1e-6
    gx = (testbed.psi1(pts + [step, 0]) - testbed.psi1(pts - [step, 0])) \
        / (2 * step)
    gy = (testbed.psi1(pts + [0, step]) - testbed.psi1(pts - [0, step])) \
        / (2 * step)
    fd = np.stack([-gy, gx], axis=1)
    u = testbed.u1(pts)
    assert np.abs(fd - u).max() <= 1e-6 * np.abs(u).max()


def test_sphere_vortex_centers_unit_norm():
    norms = np.sqrt((testbed.SPHERE_VORTEX_CENTERS**2).sum(-1))
    assert np.abs(norms - 1.0).max() < 1e-15
    assert np.allclose(testbed.SPHERE_VORTEX_WIDTHS,
                       [4.0, 4.5, 5.0, 5.5, 6.0, 6.5])


def test_u2_matches_fd_and_is_tangent():
    pts = testbed.nodes_sphere(1000, seed=1)
    g_fd = np.zeros((len(pts), 3))
    step = 1e-6
    for a in range(3):
        e = np.zeros(3)
        e[a] = step
        g_fd[:, a] = (testbed.psi2(pts + e) - testbed.psi2(pts - e)) \
            / (2 * step)
    fd = np.cross(pts, g_fd)
    u = testbed.u2(pts)
    assert np.abs(fd - u).max() <= 1e-5 * np.abs(u).max()
    assert np.abs((pts * u).sum(-1)).max() < 1e-12 * np.abs(u).max()
    with pytest.raises(ValueError):
        testbed.u2(np.array([[0.0, 0.0, 1.5]]))


def test_ball_charges_geometry():
    norms = np.linalg.norm(testbed.BALL_CHARGES, axis=1)
    assert len(testbed.BALL_CHARGES) == 12
    assert np.abs(norms - 2.0 / 3.0).max() < 1e-12
    assert testbed.coulomb(0.0, 0.04) == pytest.approx(5.0, abs=1e-15)


def test_u3_matches_fd_gradient():
    pts = testbed.nodes_ball(1000, seed=2)
    step = 1e-6
    g = np.zeros((len(pts), 3))
    for a in range(3):
        e = np.zeros(3)
        e[a] = step
        g[:, a] = (testbed.psi3(pts + e) - testbed.psi3(pts - e)) / (2 * step)
    u = testbed.u3(pts)
    assert np.abs(-g - u).max() <= 1e-6 * np.abs(u).max()


def test_analytic_fields_conserve():
    # the testbed itself must be div-free / curl-free before it judges the
    # method; FD residuals sit at the truncation scale
    pts = star_interior(1000, seed=3)
    step = 1e-5
    div = ((testbed.u1(pts + [step, 0])[:, 0]
            - testbed.u1(pts - [step, 0])[:, 0])
           + (testbed.u1(pts + [0, step])[:, 1]
              - testbed.u1(pts - [0, step])[:, 1])) / (2 * step)
    assert np.abs(div).max() < 1e-4 * np.abs(testbed.u1(pts)).max()

    ball_pts = testbed.nodes_ball(500, seed=4)
    jac = np.zeros((len(ball_pts), 3, 3))
    for a in range(3):
        e = np.zeros(3)
        e[a] = step
        jac[:, :, a] = (testbed.u3(ball_pts + e)
                        - testbed.u3(ball_pts - e)) / (2 * step)
    curl = np.stack([jac[:, 2, 1] - jac[:, 1, 2],
                     jac[:, 0, 2] - jac[:, 2, 0],
                     jac[:, 1, 0] - jac[:, 0, 1]], axis=1)
    assert np.abs(curl).max() < 1e-4 * np.abs(testbed.u3(ball_pts)).max()

    sp = testbed.nodes_sphere(500, seed=5)
    sphere = geometry.sphere2()
    d, e_t, _ = sphere.tangent_frames(sp)
    div = np.zeros(len(sp))
    for t in (d, e_t):
        xp = sphere.project(sp + step * t)
        xm = sphere.project(sp - step * t)
        div += (t * (testbed.u2(xp) - testbed.u2(xm))).sum(-1) / (2 * step)
    assert np.abs(div).max() < 1e-4 * np.abs(testbed.u2(sp)).max()


@pytest.mark.parametrize("gen", [testbed.nodes_star, testbed.nodes_sphere,
                                 testbed.nodes_ball])
def test_generators_deterministic(gen):
    a = gen(500, 42)
    b = gen(500, 42)
    assert np.array_equal(a, b)
    c = gen(500, 43)
    assert not np.array_equal(a, c)


def test_generator_domains():
    star = testbed.nodes_star(800, 1)
    assert testbed.inside_star(star).all()
    sph = testbed.nodes_sphere(800, 1)
    assert len(sph) == 800
    assert np.abs(np.sqrt((sph * sph).sum(-1)) - 1.0).max() < 1e-14
    ball = testbed.nodes_ball(800, 1)
    assert ((ball * ball).sum(-1) <= 1.0).all()
    with pytest.raises(ValueError):
        testbed.nodes_star(5, 1)


@pytest.mark.parametrize("gen", [testbed.nodes_star, testbed.nodes_sphere,
                                 testbed.nodes_ball])
def test_generators_quasi_uniform(gen):
    pts = gen(5000, 7)
    dist, _ = cKDTree(pts).query(pts, k=2)
    nn = dist[:, 1]
    assert nn.min() > 0
    assert nn.max() / nn.min() <= 6.0


def test_problem_bundles_consistent():
    for name, factory in testbed.PROBLEMS.items():
        prob = factory()
        nodes = prob.nodes(200, 3)
        field = prob.field(nodes)
        pot = prob.potential(nodes)
        assert field.shape == nodes.shape
        assert pot.shape == (len(nodes),)
        assert prob.name == name


def test_star_problem_embeds():
    prob = testbed.star_problem()
    nodes = prob.nodes(100, 5)
    assert nodes.shape[1] == 3
    assert np.abs(nodes[:, 2]).max() == 0.0
    assert np.abs(prob.field(nodes)[:, 2]).max() == 0.0


def test_ball_problem_sign_convention():
    # exact field = -grad(potential): potential_sign marks that the method's
    # recovered potential approximates -psi3
    prob = testbed.ball_problem()
    assert prob.potential_sign == -1.0
    pts = testbed.nodes_ball(50, 8)
    step = 1e-6
    g = np.zeros((len(pts), 3))
    for a in range(3):
        e = np.zeros(3)
        e[a] = step
        g[:, a] = (prob.potential(pts + e) - prob.potential(pts - e)) \
            / (2 * step)
    assert np.abs(prob.field(pts) + g).max() < 1e-6 * np.abs(g).max()


def test_point_file_round_trip(tmp_path):
    pts = testbed.nodes_ball(50, 9)
    path = tmp_path / "nodes.txt"
    testbed.save_points(pts, path)
    again = testbed.load_points(path)
    assert np.array_equal(pts, again)
