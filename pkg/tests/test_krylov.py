import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from hhobiharmonic.errors import (BreakdownError, NonConvergenceError, NotSPDError,
                                  PreconditionerError)
from hhobiharmonic.hho import assemble
from hhobiharmonic.krylov import (LinearOperator, SparseCholesky, aslinearoperator, bicgstab,
                                  fcg)
from hhobiharmonic.mesh import generate_cartesian


def spd(n, seed, cond=100.0):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(np.geomspace(1.0, cond, n)) @ Q.T


def pcg(A, b, M, eps, maxit):
    """Textbook preconditioned CG, returning every iterate."""
    x = np.zeros_like(b)
    r = b.copy()
    z = M @ r
    p = z.copy()
    rz = r @ z
    iterates = []
    for _ in range(maxit):
        q = A @ p
        a = rz / (p @ q)
        x = x + a * p
        r = r - a * q
        iterates.append(x.copy())
        if np.linalg.norm(r) / np.linalg.norm(b) < eps:
            break
        z = M @ r
        rz_new = r @ z
        p = z + rz_new / rz * p
        rz = rz_new
    return iterates


def test_operator_wrapping():
    A = np.array([[2.0, 1.0], [0.0, 3.0]])
    op = aslinearoperator(A)
    assert np.array_equal(op(np.array([1.0, 1.0])), [3.0, 3.0])
    assert np.array_equal(op.dense(), A)
    assert aslinearoperator(op) is op
    lop = LinearOperator(2, lambda v: A @ v)
    assert np.array_equal(lop.dense(), A)
    with pytest.raises(TypeError):
        aslinearoperator(lambda v: v)


def test_cholesky_identity():
    f = SparseCholesky(sp.identity(5, format="csc"))
    b = np.arange(5.0)
    assert np.array_equal(f.solve(b), b)


def test_cholesky_two_by_two():
    f = SparseCholesky(sp.csc_matrix([[2.0, 1.0], [1.0, 2.0]]))
    assert np.allclose(f.solve(np.array([3.0, 3.0])), [1.0, 1.0], atol=1e-15)


def test_cholesky_condensed_poisson_residual(rng):
    S = assemble(generate_cartesian(4), 0)
    b = rng.standard_normal(S.A_II.shape[0])
    x = S.factor.solve(b)
    assert np.linalg.norm(S.A_II @ x - b) / np.linalg.norm(b) < 1e-12


def test_cholesky_multiple_columns(rng):
    A = sp.csc_matrix(spd(6, 1))
    B = rng.standard_normal((6, 3))
    assert np.allclose(A @ SparseCholesky(A).solve(B), B, atol=1e-12)


def test_cholesky_empty():
    f = SparseCholesky(sp.csc_matrix((0, 0)))
    assert f.solve(np.zeros(0)).shape == (0,)


@pytest.mark.parametrize("A", [
    [[1.0, 2.0], [2.0, 1.0]],
    [[1.0, 0.0], [0.0, -1.0]],
    [[1.0, 0.5], [0.0, 1.0]],
])
def test_cholesky_rejects_non_spd(A):
    with pytest.raises(NotSPDError):
        SparseCholesky(sp.csc_matrix(A))


def test_cholesky_rejects_rectangular():
    with pytest.raises(ValueError):
        SparseCholesky(sp.csc_matrix(np.ones((2, 3))))


def test_fcg_zero_rhs():
    x, rep = fcg(np.eye(3), np.zeros(3))
    assert not x.any()
    assert rep.iterations == 0
    assert rep.converged


def test_fcg_diagonal():
    x, rep = fcg(np.diag([1.0, 2.0, 3.0]), np.ones(3), eps=1e-12)
    assert rep.iterations <= 3
    assert np.allclose(x, [1.0, 0.5, 1.0 / 3.0], atol=1e-12)


def test_fcg_maxit_reports_failure():
    x, rep = fcg(spd(30, 2, 1e4), np.ones(30), eps=1e-14, maxit=3)
    assert not rep.converged
    assert rep.iterations == 3
    assert len(rep.history) == 4


def test_fcg_stop_rule():
    _, rep = fcg(spd(20, 3), np.ones(20), eps=1e-8)
    assert rep.history[-1] < 1e-8
    assert all(h >= 1e-8 for h in rep.history[:-1])


def test_fcg_non_positive_curvature():
    with pytest.raises(BreakdownError):
        fcg(np.diag([1.0, -1.0]), np.array([0.0, 1.0]))


@given(seed=st.integers(0, 10**6), n=st.integers(2, 25))
def test_fcg_matches_pcg_with_symmetric_preconditioner(seed, n):
    # well conditioned so that neither recurrence loses orthogonality
    A = spd(n, seed, 10.0)
    M = np.diag(1.0 / np.diag(A))
    b = np.random.default_rng(seed).standard_normal(n)
    seen = []
    fcg(A, b, M=lambda r: M @ r, eps=1e-10, maxit=4 * n,
        callback=lambda it, x, res: seen.append(x.copy()))
    ref = pcg(A, b, M, 1e-10, 4 * n)
    assert abs(len(seen) - len(ref)) <= 1
    for a, c in zip(seen, ref):
        assert np.linalg.norm(a - c) <= 1e-10 * np.linalg.norm(c)


@given(seed=st.integers(0, 10**6), n=st.integers(2, 25))
def test_cg_energy_error_decreases(seed, n):
    A = spd(n, seed, 1e3)
    b = np.random.default_rng(seed).standard_normal(n)
    xs = np.linalg.solve(A, b)
    errs = []
    fcg(A, b, eps=1e-12, maxit=3 * n,
        callback=lambda it, x, res: errs.append((x - xs) @ A @ (x - xs)))
    assert all(e1 <= e0 * (1 + 1e-8) + 1e-20 for e0, e1 in zip(errs, errs[1:]))


def test_fcg_preconditioner_failure_falls_back():
    calls = []

    def flaky(r):
        calls.append(1)
        if len(calls) == 2:
            raise PreconditionerError("boom")
        return r / 2.0

    x, rep = fcg(np.diag([1.0, 2.0, 3.0, 4.0]), np.ones(4), M=flaky, eps=1e-12)
    assert rep.converged
    assert rep.fallbacks == 1
    assert np.allclose(x, [1, 0.5, 1 / 3, 0.25])


def test_bicgstab_identity():
    b = np.array([1.0, -2.0, 3.0])
    x, rep = bicgstab(np.eye(3), b)
    assert rep.iterations == 1
    assert np.allclose(x, b)


def test_bicgstab_nonsymmetric():
    A = np.array([[4.0, 1.0, 0.0], [2.0, 5.0, 1.0], [0.0, 3.0, 6.0]])
    # inverse by cofactors, det = 4*27 - 1*12 = 96
    Ainv = np.array([[27.0, -6.0, 1.0], [-12.0, 24.0, -4.0], [6.0, -12.0, 18.0]]) / 96.0
    b = np.array([1.0, 2.0, 3.0])
    x, rep = bicgstab(A, b, eps=1e-12)
    assert rep.converged
    assert np.allclose(x, Ainv @ b, atol=1e-8)


def test_bicgstab_zero_rhs():
    x, rep = bicgstab(np.eye(2), np.zeros(2))
    assert rep.converged and not x.any()


def test_bicgstab_singular_raises():
    A = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(NonConvergenceError):
        bicgstab(A, np.array([0.0, 1.0]), maxit=50)


def test_bicgstab_maxit():
    with pytest.raises(NonConvergenceError) as exc:
        bicgstab(spd(40, 5, 1e6), np.ones(40), eps=1e-14, maxit=2)
    assert exc.value.report.iterations == 2


def test_bicgstab_scale_invariant():
    A = spd(10, 7) + np.triu(np.ones((10, 10)), 1) * 0.1
    b = np.ones(10)
    x1, r1 = bicgstab(A, b)
    scale = 2.0 ** -130
    x2, r2 = bicgstab(A, scale * b)
    assert r1.iterations == r2.iterations
    assert np.allclose(x1 * scale, x2, rtol=1e-12, atol=0)


@given(seed=st.integers(0, 10**6), n=st.integers(2, 20))
def test_bicgstab_random_systems(seed, n):
    rng = np.random.default_rng(seed)
    A = np.eye(n) * n + rng.standard_normal((n, n))
    b = rng.standard_normal(n)
    x, rep = bicgstab(A, b, eps=1e-10, maxit=10 * n)
    assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)
