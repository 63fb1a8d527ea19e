import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hrvem.material import MaterialLaw, apply_C, apply_D, from_mandel, kappa, to_mandel

lame = st.tuples(st.floats(0.0, 1e5), st.floats(1e-2, 1e3))


def _sym(rng, n=4):
    a = rng.standard_normal((n, 3, 3))
    return 0.5 * (a + np.swapaxes(a, 1, 2))


@given(lame, st.integers(0, 1000))
def test_compliance_inverts_stiffness(lm, seed):
    law = MaterialLaw(*lm)
    e = _sym(np.random.default_rng(seed))
    back = apply_D(law, apply_C(law, e))
    assert np.allclose(back, e, atol=1e-9 * max(1.0, np.abs(e).max()))


@given(lame)
def test_mandel_matrices_consistent(lm):
    law = MaterialLaw(*lm)
    assert np.allclose(law.C6 @ law.D6, np.eye(6), atol=1e-8)
    e = _sym(np.random.default_rng(0))
    assert np.allclose(to_mandel(law.apply_C(e)), to_mandel(e) @ law.C6.T)


def test_mandel_roundtrip_and_inner_product():
    rng = np.random.default_rng(3)
    a, b = _sym(rng), _sym(rng)
    assert np.allclose(from_mandel(to_mandel(a)), a)
    assert np.allclose(np.einsum("nij,nij->n", a, b), np.einsum("ni,ni->n", to_mandel(a), to_mandel(b)))


def test_kappa_unit_lame():
    assert kappa(MaterialLaw(1.0, 1.0)) == pytest.approx(1.35)
    assert MaterialLaw(1.0, 1.0).kappa == pytest.approx(1.35)


@given(lame)
def test_kappa_closed_form_and_homogeneity(lm):
    lam, mu = lm
    k = kappa(MaterialLaw(lam, mu))
    assert k > 0
    assert k == pytest.approx((6 - 3 * lam / (3 * lam + 2 * mu)) / (4 * mu), rel=1e-12)
    assert kappa(MaterialLaw(2 * lam, 2 * mu)) == pytest.approx(k / 2, rel=1e-12)


def test_compliance_bounded_in_incompressible_limit():
    """The deviatoric part of D stays finite as lambda grows."""
    mu = 0.5
    ks = [kappa(MaterialLaw(lam, mu)) for lam in (1e2, 1e5, 1e8)]
    assert np.ptp(ks) < 1e-2
    assert ks[-1] == pytest.approx(5 / (4 * mu), rel=1e-6)


@pytest.mark.parametrize("lam, mu", [(1.0, 0.0), (1.0, -1.0), (-1.0, 1.0)])
def test_inadmissible_parameters(lam, mu):
    with pytest.raises(ValueError, match="inadmissible"):
        MaterialLaw(lam, mu)


def test_laws_compare_by_parameters():
    assert MaterialLaw(2.0, 0.5) == MaterialLaw(2.0, 0.5)
    assert MaterialLaw(2.0, 0.5) != MaterialLaw(2.0, 0.6)
    assert len({MaterialLaw(1, 1), MaterialLaw(1.0, 1.0)}) == 1
