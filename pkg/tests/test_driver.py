import numpy as np
import pytest

from helpers import max_coefficient_error, spectrum_of, worked_example
from ndspec.driver import (
    default_grid,
    default_orders,
    full_factor,
    hat_at_origin,
    normalize_at_origin,
    unitary_correction,
    verify,
)
from ndspec.errors import NotPositiveDefinite, OriginSingular
from ndspec.harmonic import MatrixFunction, analytic_leakage, halfplane_mask, torus_points
from ndspec.synth import random_outer, sample


@pytest.mark.parametrize("sizes", [(8,), (8, 8), (4, 4, 4)])
def test_identity(sizes):
    S = MatrixFunction.identity(2, sizes)
    Sp, rep = full_factor(S)
    np.testing.assert_allclose(Sp.values, S.values, atol=1e-14)
    assert rep.status == "ok"


def test_worked_example_converged():
    A, S = worked_example((512, 128))
    Sp, rep = full_factor(S)
    assert rep.stage_orders == [64, 63]
    assert max_coefficient_error(Sp, A) < 1e-12
    assert rep.relative_residual < 1e-13
    assert rep.outer_gap < 1e-10


@pytest.mark.parametrize("N, d, sizes", [(2, 2, (64, 64)), (2, 3, (128, 64)), (3, 2, (64, 32, 32))])
def test_recovers_random_outer_factor(N, d, sizes):
    # B0 is Hermitian positive definite, so B is already origin-normalized
    rng = np.random.default_rng(N + 7 * d)
    B = random_outer(rng, N, d, 3, 0.2)
    Bv = sample(B, sizes)
    Sp, rep = full_factor(spectrum_of(Bv))
    assert max_coefficient_error(Sp, MatrixFunction(Bv)) < 1e-10
    assert rep.passes(1e-9)


def test_hat_at_origin_is_mean():
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((4, 5, 6, 2, 2))
    M = MatrixFunction(vals)
    np.testing.assert_allclose(hat_at_origin(M, 2).values, vals.mean(axis=(0, 1)))
    np.testing.assert_allclose(hat_at_origin(M, 0).values, vals)
    assert hat_at_origin(M, 3).N == 0
    with pytest.raises(ValueError):
        hat_at_origin(M, 4)


def test_hat_equals_value_at_zero():
    # for an analytic polynomial the mean over t1 is the value at t1 = 0
    sizes = (16, 8)
    t1, t2 = torus_points(sizes)
    vals = np.zeros(sizes + (1, 1), dtype=complex)
    vals[..., 0, 0] = 2 + t2 + t1 * (3 - t2 ** 2)
    hat = hat_at_origin(MatrixFunction(vals), 1)
    np.testing.assert_allclose(hat.values[:, 0, 0], 2 + torus_points((8,))[0], atol=1e-14)


def test_unitary_correction_of_outer_hat_is_constant():
    rng = np.random.default_rng(3)
    B = random_outer(rng, 1, 2, 3, 0.3)
    hat = MatrixFunction(sample(B, (64,)))
    U, rep = unitary_correction(hat, 31)
    vals = np.asarray(U.values)
    np.testing.assert_allclose(vals, np.broadcast_to(vals[0], vals.shape), atol=1e-12)
    np.testing.assert_allclose(vals[0] @ vals[0].conj().T, np.eye(2), atol=1e-12)
    assert rep.unitarity_dev < 1e-12


def test_unitary_correction_general():
    # hat = B V(t) with V a non-constant unitary: the correction is unitary
    rng = np.random.default_rng(4)
    B = sample(random_outer(rng, 1, 2, 2, 0.3), (64,))
    t = torus_points((64,))[0]
    V = np.zeros((64, 2, 2), dtype=complex)
    c, s = 0.6, 0.8
    V[:, 0, 0], V[:, 0, 1], V[:, 1, 0], V[:, 1, 1] = c, s * t, -s / t, c
    hat = MatrixFunction(B @ V)
    U, rep = unitary_correction(hat, 20)
    vals = np.asarray(U.values)
    np.testing.assert_allclose(vals @ np.conj(np.swapaxes(vals, -1, -2)), np.tile(np.eye(2), (64, 1, 1)), atol=1e-12)
    corrected = np.asarray(hat.values) @ vals
    assert analytic_leakage(corrected, 1) < 1e-24


def test_normalize_at_origin():
    rng = np.random.default_rng(5)
    B = sample(random_outer(rng, 2, 3, 2, 0.3), (16, 16))
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    M = normalize_at_origin(MatrixFunction(B @ Q))
    np.testing.assert_allclose(M.values, B, atol=1e-12)
    O = np.asarray(M.values).mean(axis=(0, 1))
    np.testing.assert_allclose(O, O.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(O).min() > 0


def test_normalize_at_origin_singular():
    sizes = (8, 8)
    t1, _ = torus_points(sizes)
    vals = np.zeros(sizes + (2, 2), dtype=complex)
    vals[..., 0, 0] = t1
    vals[..., 1, 1] = 1
    with pytest.raises(OriginSingular):
        normalize_at_origin(MatrixFunction(vals))


def test_verify_exact_pair():
    # log det S must be resolved by the grid for the log-det diagnostics
    A, S = worked_example((512, 128))
    rep = verify(S, A)
    assert rep.relative_residual < 1e-14
    assert rep.analytic_leakage < 1e-30
    for name in ("outer_gap", "logdet_gap", "det_drift"):
        assert getattr(rep, name) < 1e-10, name


def test_verify_inner_shift_fails_outer_gap():
    # A t1 has the same |det| on the torus but vanishes at the origin
    A, S = worked_example((64, 64))
    t1, _ = torus_points((64, 64))
    shifted = MatrixFunction(np.asarray(A.values) * t1[..., None, None])
    rep = verify(S, shifted)
    assert rep.relative_residual < 1e-14
    assert rep.outer_gap > 1.0


def test_verify_detects_non_analytic():
    A, S = worked_example((32, 32))
    bad = MatrixFunction(np.conj(np.asarray(A.values)))
    rep = verify(MatrixFunction(np.asarray(bad.values) @ np.conj(np.swapaxes(bad.values, -1, -2))), bad)
    assert rep.analytic_leakage > 0.1


def test_verify_shape_mismatch():
    with pytest.raises(ValueError):
        verify(MatrixFunction.identity(2, (4, 4)), MatrixFunction.identity(2, (4, 8)))


@pytest.mark.parametrize("d, degrees, expected", [(2, (1, 1), (512, 128)), (1, (3,), (1024,)), (2, (1, 40), (512, 256))])
def test_default_grid(d, degrees, expected):
    assert default_grid(degrees, d) == expected


def test_default_orders():
    assert default_orders((512, 128), 2) == (64, 63)
    assert default_orders((128, 64, 64), 3) == (31, 15, 15)
    assert default_orders((8,), 1) == (3,)


def test_axis_order():
    rng = np.random.default_rng(6)
    B = sample(random_outer(rng, 2, 2, 2, 0.2), (64, 64))
    S = spectrum_of(B)
    Sp, rep = full_factor(S, axis_order=(1, 0))
    assert rep.relative_residual < 1e-12
    # analytic for the half-plane with t2 leading
    vals = np.swapaxes(np.asarray(Sp.values), 0, 1)
    assert analytic_leakage(vals, 2) < 1e-24
    ref, _ = full_factor(MatrixFunction(np.swapaxes(np.asarray(S.values), 0, 1)))
    np.testing.assert_allclose(vals, ref.values, atol=1e-13)
    with pytest.raises(ValueError):
        full_factor(S, axis_order=(0, 0))


def test_orders_length_checked():
    with pytest.raises(ValueError):
        full_factor(MatrixFunction.identity(2, (8, 8)), orders=(2,))


def test_not_positive_definite_carries_report():
    vals = np.tile(np.diag([1.0, -1.0]).astype(complex), (8, 8, 1, 1))
    with pytest.raises(NotPositiveDefinite) as info:
        full_factor(MatrixFunction(vals))
    assert info.value.report is not None
    assert info.value.report.status == "failed"


def test_stage_reports_and_timings():
    rng = np.random.default_rng(8)
    S = spectrum_of(sample(random_outer(rng, 3, 2, 1, 0.2), (32, 16, 16)))
    _, rep = full_factor(S)
    assert [s["l"] for s in rep.stages] == [1, 2, 3]
    assert {"stage_1", "stage_2", "stage_3", "normalize", "total"} <= set(rep.timings)
    assert rep.det_drift < 1e-10


def test_workers_do_not_change_factor():
    rng = np.random.default_rng(9)
    S = spectrum_of(sample(random_outer(rng, 2, 3, 2, 0.2), (64, 32)))
    a, _ = full_factor(S, workers=1)
    b, _ = full_factor(S, workers=4)
    assert np.array_equal(np.asarray(a.values), np.asarray(b.values))


def test_halfplane_support_of_factor():
    rng = np.random.default_rng(10)
    sizes = (64, 32)
    S = spectrum_of(sample(random_outer(rng, 2, 2, 2, 0.2), sizes))
    Sp, _ = full_factor(S)
    c = np.fft.fftn(np.asarray(Sp.values), axes=(0, 1)) / np.prod(sizes)
    assert np.abs(c[~halfplane_mask(sizes)]).max() < 1e-13
