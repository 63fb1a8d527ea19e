import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from hrvem.element import LocalElement, n_displacement_dofs, n_stress_dofs
from hrvem.material import MaterialLaw, symmetrize
from hrvem.mesh import generate
from hrvem.polyspace import CellMonomials, dim_cell, dim_face, dim_rm_perp, l2_project_cell
from hrvem.quadrature import cell_rule
from hrvem.verify import case_a

from oracles import affine_cube, pentagonal_prism, single_cell_mesh, smooth_stress


def polynomial_stress(law, mono, coeffs):
    """``tau = C eps(w)`` and ``div tau`` for ``w`` given by monomial coefficients."""
    C = np.asarray(coeffs).reshape(3, -1)

    def grad_w(p):
        return np.einsum("ia,qaj->qij", C, mono.gradient(p))

    def stress(p):
        return law.apply_C(symmetrize(grad_w(p)))

    def div(p):
        second = lambda a, b: mono.derivative(p, np.eye(3, dtype=int)[a] + np.eye(3, dtype=int)[b])  # noqa: E731
        lap = sum(second(a, a) for a in range(3)) @ C.T
        grad_div = np.stack([sum(second(i, a) @ C[a] for a in range(3)) for i in range(3)], 1)
        return law.mu * lap + (law.lam + law.mu) * grad_div

    return stress, div


def _cells():
    out = {f"{fam}": (generate(fam, 2), 0) for fam in ("cube", "tetra", "prism")}
    out["pentagon"] = (single_cell_mesh(*pentagonal_prism()), 0)
    A = np.array([[1.0, 0.3, -0.1], [0.1, 0.8, 0.2], [0.0, 0.25, 1.2]])
    out["affine"] = (single_cell_mesh(*affine_cube(A, [0.2, 0.1, 0.0])), 0)
    return out


CELLS = _cells()
LAW = MaterialLaw(1.3, 0.7)


@pytest.fixture(scope="module", params=[(name, k) for name in CELLS for k in (1, 2)],
                ids=lambda p: f"{p[0]}-k{p[1]}")
def element(request):
    name, k = request.param
    mesh, cell = CELLS[name]
    return LocalElement(mesh, cell, k, LAW)


def _random_poly_stress(el, degree, seed):
    g = el.geom
    mono = CellMonomials(degree, g.centroid, g.diameter)
    coeffs = np.random.default_rng(seed).standard_normal(3 * len(mono))
    return polynomial_stress(el.law, mono, coeffs)


def test_unit_cube_shapes():
    el = LocalElement(generate("cube", 1), 0, 1, MaterialLaw(1, 1))
    assert el.a_matrix.shape == (60, 60)
    assert el.b_matrix.shape == (12, 60)
    assert n_stress_dofs(6, 1) == 3 * 6 * 3 + 6
    assert n_displacement_dofs(2) == 30


def test_dof_counts(element):
    k = element.k
    assert element.n_dofs == 3 * element.n_faces * dim_face(k) + dim_rm_perp(k)
    assert element.a_matrix.shape == (element.n_dofs,) * 2
    assert element.b_matrix.shape == (3 * dim_cell(k), element.n_dofs)
    assert element.traction_space.dim == 3 * dim_cell(k + 1) - 6


def test_identity_boundary_data_has_zero_divergence(element):
    dofs = element.interpolate_stress(lambda p: np.broadcast_to(np.eye(3), (len(p), 3, 3)),
                                      lambda p: np.zeros((len(p), 3)))
    assert np.abs(element.reconstruct_divergence(dofs)).max() < 1e-12


def test_constant_stress_divergence_free(element):
    stress, div = _random_poly_stress(element, 1, 11)
    dofs = element.interpolate_stress(stress, div)
    assert np.abs(element.reconstruct_divergence(dofs)).max() < 1e-12
    assert np.abs(element.b_matrix @ dofs).max() < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_projection_reproduces_traction_space(element, seed):
    stress, div = _random_poly_stress(element, element.k + 1, seed)
    dofs = element.interpolate_stress(stress, div)
    r = cell_rule(element.mesh, element.cell, 2 * element.k + 2)
    exact = stress(r.points)
    got = element.projected_stress(dofs, r.points)
    assert np.abs(got - exact).max() < 1e-11 * max(1.0, np.abs(exact).max())
    # stabilization vanishes and the discrete energy is exact
    assert np.abs(element.stabilization_matrix @ dofs).max() < 1e-10 * max(1.0, np.abs(dofs).max())
    energy = r.weights @ np.einsum("qij,qij->q", element.law.apply_D(exact), exact)
    assert dofs @ element.a_matrix @ dofs == pytest.approx(energy, rel=1e-10)


def test_projection_idempotent(element):
    P = element.projection_matrix
    # DOFs of the projected basis functions, re-projected
    stress_basis = element.traction_space.basis
    r = cell_rule(element.mesh, element.cell, 2 * element.k + 4)
    pts = r.points
    rng = np.random.default_rng(2)
    x = rng.standard_normal(element.n_dofs)
    p = P @ x
    mono = stress_basis.monomials
    w = stress_basis.perp @ p
    stress, div = polynomial_stress(element.law, mono, w)
    y = element.interpolate_stress(stress, div)
    assert np.allclose(P @ y, p, atol=1e-11 * max(1.0, np.abs(p).max()))
    assert np.allclose(element.projected_stress(y, pts), element.projected_stress(x, pts),
                       atol=1e-10)


def test_a_matrix_symmetric_psd_and_elliptic_on_kernel(element):
    A, B = element.a_matrix, element.b_matrix
    assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()
    assert np.linalg.eigvalsh(A).min() > -1e-10 * np.abs(A).max()
    Z = sla.null_space(B)
    assert np.linalg.eigvalsh(Z.T @ A @ Z).min() > 1e-3


def test_shape_variant_elliptic_on_kernel():
    for name, (mesh, cell) in CELLS.items():
        el = LocalElement(mesh, cell, 1, LAW, stabilization="shape")
        Z = sla.null_space(el.b_matrix)
        assert np.linalg.eigvalsh(Z.T @ el.a_matrix @ Z).min() > 1e-4, name


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(sorted(CELLS)), st.sampled_from([1, 2]))
def test_commuting_diagram(seed, name, k):
    """div of the interpolant equals the L2 projection of div tau."""
    mesh, cell = CELLS[name]
    el = LocalElement(mesh, cell, k, LAW)
    stress, div = smooth_stress(np.random.default_rng(seed))
    dofs = el.interpolate_stress(stress, div, quad_degree=16)
    got = el.reconstruct_divergence(dofs)
    want = l2_project_cell(mesh, cell, k, div, quad_degree=16)
    assert np.abs(got - want).max() <= 1e-10 * np.abs(want).max()


def test_b_matches_divergence_moments(element):
    case = case_a(LAW.lam, LAW.mu)
    dofs = element.interpolate_stress(case.stress, case.div_stress, quad_degree=14)
    want = element.load(case.div_stress, quad_degree=14)
    got = element.b_matrix @ dofs
    assert np.abs(got - want).max() <= 1e-9 * np.abs(want).max()


def test_load_trivial_cases():
    el = LocalElement(generate("cube", 2), 3, 1, LAW)
    assert np.all(el.load(lambda p: np.zeros((len(p), 3))) == 0)
    F = el.load(lambda p: np.tile([1.0, -2.0, 0.5], (len(p), 1))).reshape(3, -1)
    assert np.allclose(F[:, 0], np.array([1.0, -2.0, 0.5]) * el.geom.volume)
    assert np.abs(F[:, 1:]).max() < 1e-15


@pytest.mark.xfail(strict=True, reason="degree 2k+4 load rule is 7.5e-6 off for the sine load on a unit cube")
def test_load_default_rule_matches_refined_oracle():
    el = LocalElement(generate("cube", 1), 0, 1, MaterialLaw(1, 1))
    f = case_a().load
    ref = el.load(f, quad_degree=2 * el.k + 8)
    assert np.abs(el.load(f) - ref).max() <= 1e-9 * np.abs(ref).max()


def test_load_refined_rule_converges():
    el = LocalElement(generate("cube", 1), 0, 1, MaterialLaw(1, 1))
    f = case_a().load
    ref = el.load(f, quad_degree=20)
    got = el.load(f, quad_degree=2 * el.k + 8)
    assert np.abs(got - ref).max() <= 1e-9 * np.abs(ref).max()
    # constant slots carry the exact integral 400/pi of each component
    assert ref.reshape(3, -1)[:, 0] == pytest.approx(np.full(3, 400 / np.pi), rel=1e-12)


def test_interpolation_error_rate():
    """||tau - Pi I tau|| on a shrinking cube cell decays like h^(k+1)."""
    case = case_a()
    errs = []
    hs = (0.4, 0.2, 0.1)
    for h in hs:
        mesh = single_cell_mesh(*affine_cube(h * np.eye(3), [0.3, 0.2, 0.1]))
        el = LocalElement(mesh, 0, 1, case.law)
        dofs = el.interpolate_stress(case.stress, case.div_stress)
        r = cell_rule(mesh, 0, 6)
        d = case.stress(r.points) - el.projected_stress(dofs, r.points)
        errs.append(np.sqrt(r.weights @ (d**2).sum((1, 2)) / mesh.cell_geometry[0].volume))
    rates = np.log(np.array(errs[:-1]) / errs[1:]) / np.log(2)
    assert rates[-1] == pytest.approx(2.0, abs=0.3)


def test_shared_face_dofs_agree():
    """Interpolated DOFs of a shared face coincide when read from both cells."""
    mesh = generate("prism", 2)
    case = case_a()
    f = mesh.interior_faces[0]
    c0, c1 = mesh.face_cells[f]
    blocks = []
    for c in (c0, c1):
        el = LocalElement(mesh, c, 2, case.law)
        j = list(mesh.cells[c]).index(f)
        blocks.append(el.interpolate_stress(case.stress, case.div_stress)[el.face_slice(j)])
    assert np.allclose(blocks[0], blocks[1], atol=1e-13)


@pytest.mark.parametrize("kw, match", [({"k": 0}, "k must"), ({"stabilization": "x"}, "stabilization")])
def test_invalid_arguments(kw, match):
    args = {"k": 1, "stabilization": "boundary"} | kw
    with pytest.raises(ValueError, match=match):
        LocalElement(generate("cube", 1), 0, args["k"], LAW, args["stabilization"])
