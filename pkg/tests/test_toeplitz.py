import numpy as np
import pytest

from qspec.joint import JointSpectrumCloud, joint_spectrum
from qspec.operators import commutator_norm, matrix_norm, op_norm
from qspec.toeplitz import (
    Cp1Symbol,
    QuadratureError,
    ToeplitzFamily,
    moment_normalize,
    product_system,
    toeplitz_matrix,
    toeplitz_z_closed_form,
)

U = Cp1Symbol.height()
COS_PHI = Cp1Symbol(lambda u, p: np.sqrt(np.clip(1 - u * u, 0, None)) * np.cos(p), 1, 1.0, None, "x")


@pytest.mark.parametrize("k", [1, 2, 5, 40, 321])
def test_constant_symbol_gives_identity(k):
    t = toeplitz_matrix(Cp1Symbol.constant(1.0), k)
    assert t.dim == k + 1 and t.hbar == 1.0 / k
    assert np.abs(t.dense() - np.eye(k + 1)).max() <= 1e-14


def test_height_matches_closed_form():
    for k in range(1, 201):
        diff = toeplitz_matrix(U, k).dense() - toeplitz_z_closed_form(k).dense()
        assert np.abs(diff).max() <= 1e-12


def test_closed_form_examples():
    np.testing.assert_array_equal(np.diag(toeplitz_z_closed_form(1).dense()).real, [-1 / 3, 1 / 3])
    np.testing.assert_array_equal(np.diag(toeplitz_z_closed_form(2).dense()).real, [-0.5, 0.0, 0.5])
    for k in (3, 30, 300):
        assert np.diag(toeplitz_z_closed_form(k).dense()).real.min() == pytest.approx(-k / (k + 2))


def test_square_defect_k10():
    t = toeplitz_matrix(U, 10).dense()
    t2 = toeplitz_matrix(U * U, 10).dense()
    assert np.abs(t2 - np.diag(np.diag(t2))).max() <= 1e-14
    assert matrix_norm(t @ t - t2) == pytest.approx(1 / 13, abs=1e-14)
    # Beta-variance oracle: max over j of 4(j+1)(k-j+1)/((k+2)^2 (k+3))
    j = np.arange(11)
    assert matrix_norm(t @ t - t2) == pytest.approx((4 * (j + 1) * (11 - j) / (144 * 13)).max(), abs=1e-14)


def test_square_formula_rate_even_k():
    ks = np.arange(20, 401, 20)
    norms = []
    for k in ks:
        t = toeplitz_matrix(U, int(k)).dense()
        n = matrix_norm(t @ t - toeplitz_matrix(U * U, int(k)).dense())
        assert n * (k + 3) == pytest.approx(1.0, abs=1e-11)
        norms.append(n)
    slope = np.polyfit(np.log(1.0 / ks), np.log(norms), 1)[0]
    assert 0.9 <= slope <= 1.1


def test_selection_rule_cos_phi():
    t = toeplitz_matrix(COS_PHI, 12).dense()
    off = t.copy()
    idx = np.arange(12)
    off[idx, idx + 1] = 0
    off[idx + 1, idx] = 0
    assert np.abs(off).max() <= 1e-14
    assert np.abs(t[idx, idx + 1]).min() > 0.1


def test_selection_rule_general_mode():
    f = Cp1Symbol.from_expression("(1-u^2)*cos(2*phi) + u")
    t = toeplitz_matrix(f, 9).dense()
    i, j = np.indices(t.shape)
    assert np.abs(t[~np.isin(i - j, (-2, 0, 2))]).max() <= 1e-13


@pytest.mark.parametrize(
    "f",
    [
        U,
        Cp1Symbol.from_expression("u^3 - u"),
        Cp1Symbol.from_expression("cos(phi)*sqrt(1-u^2)"),
        Cp1Symbol.from_expression("exp(u)"),
        Cp1Symbol.from_expression("sin(3*phi)*(1-u^2)"),
        Cp1Symbol(lambda u, p: np.abs(u) + 0.0 * p, 0, 1.0, None, "abs(u)", (0.0,)),
    ],
    ids=lambda f: f.label,
)
def test_hermitian_and_norm_contraction(f):
    for k in (3, 16):
        t = toeplitz_matrix(f, k)
        d = t.dense()
        assert np.abs(d - d.conj().T).max() == 0.0
        assert op_norm(t) <= f.sup_bound + 1e-10


def test_kink_without_breakpoint_is_reported():
    with pytest.raises(QuadratureError):
        toeplitz_matrix(Cp1Symbol.from_expression("abs(u)"), 3)


def test_adaptive_path_agrees_with_exact_path():
    mixed = Cp1Symbol(lambda u, p: u ** 2 + 0.3 * u * np.sqrt(np.clip(1 - u * u, 0, None)) * np.cos(p),
                         1, 1.3, None, "g")
    exact_sq = toeplitz_matrix(U * U, 14).dense()
    undeclared = Cp1Symbol.from_expression("u^2")
    assert undeclared.poly_degree is None
    np.testing.assert_allclose(toeplitz_matrix(undeclared, 14).dense(), exact_sq, atol=1e-12)
    # poly_degree unknown forces the adaptive rule for the mixed symbol as well
    t = toeplitz_matrix(mixed, 14).dense()
    assert np.abs(t - t.conj().T).max() == 0.0


def test_discontinuous_symbol_needs_breakpoints():
    def step(u, p):
        return np.where(u > 0.3, 1.0, 0.0) + 0.0 * p

    with pytest.raises(QuadratureError):
        toeplitz_matrix(Cp1Symbol(step, 0, 1.0, None, "step"), 20)
    t = toeplitz_matrix(Cp1Symbol(step, 0, 1.0, None, "step", (0.3,)), 20)
    vals = np.linalg.eigvalsh(t.dense())
    assert vals.min() >= -1e-12 and vals.max() <= 1 + 1e-12


def test_subprincipal_shifts_by_one_over_k():
    k = 8
    fam = ToeplitzFamily(U, (4, 8), Cp1Symbol.constant(2.0))
    t = fam.matrices()[1].dense()
    np.testing.assert_allclose(t, toeplitz_z_closed_form(k).dense() + 2.0 / k * np.eye(k + 1), atol=1e-14)
    with pytest.raises(ValueError):
        ToeplitzFamily(U, (8, 4))


def test_product_system_examples():
    ops = product_system([U], 5)
    assert len(ops) == 1
    np.testing.assert_allclose(ops[0].dense(), toeplitz_matrix(U, 5).dense())
    pair = product_system([U, U], 2)
    assert commutator_norm(pair[0], pair[1]) == 0.0
    cloud = joint_spectrum(pair)
    assert set(cloud.mult.tolist()) == {1}
    grid = {(a, b) for a in (-0.5, 0.0, 0.5) for b in (-0.5, 0.0, 0.5)}
    assert {tuple(np.round(p, 12) + 0.0) for p in cloud.points} == grid


def test_product_system_guards():
    with pytest.raises(MemoryError):
        product_system([U, U, U], 160)
    with pytest.raises(ValueError):
        product_system([toeplitz_matrix(U, 3), toeplitz_matrix(U, 4)])
    with pytest.raises(ValueError):
        product_system([U])
    with pytest.raises(ValueError):
        product_system([ToeplitzFamily(U, (2, 3))], 5)


def test_moment_normalize_examples():
    c = moment_normalize(JointSpectrumCloud(np.array([[-1.0], [1.0]]), np.ones(2, dtype=int), 0.5))
    np.testing.assert_allclose(c.points[:, 0], [0.0, 2 * np.pi])
    spec = moment_normalize(joint_spectrum(product_system([U], 2)))
    np.testing.assert_allclose(np.sort(spec.points[:, 0]), [np.pi / 2, np.pi, 3 * np.pi / 2], atol=1e-14)
