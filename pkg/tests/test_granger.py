import math

import numpy as np
import pytest

from helpers import brute_index_set, fixture_2d, ma_factor, prediction_error, spectrum_of
from ndspec.errors import NotPositiveDefinite, TruncationWarning
from ndspec.granger import granger_1d, granger_2d, index_set
from ndspec.harmonic import MatrixFunction, halfplane_contains, torus_points
from ndspec.synth import random_outer, sample


@pytest.mark.parametrize("L", [1, 2, 3])
def test_ma_fixture_matches_normal_equations(L):
    G = 256
    S = spectrum_of(ma_factor(G))
    res = granger_1d(S, L)
    s2 = prediction_error(np.asarray(S.values), L, 64, joint=False)
    S2 = prediction_error(np.asarray(S.values), L, 64, joint=True)
    assert abs(res.sigma - math.sqrt(s2)) < 1e-6
    assert abs(res.Sigma - math.sqrt(S2)) < 1e-6
    assert abs(res.value - 0.5 * math.log(s2 / S2)) < 1e-6
    if L == 1:
        assert res.value > 0.01
    else:
        # an MA(1) past beyond one step carries no information
        assert abs(res.value) < 1e-10


def test_white_own_past_fixture():
    # X = e1 + 0.5 e2(n-1): S11 = 1.25 is white, joint error is 1
    G = 64
    t = torus_points((G,))[0]
    B = np.zeros((G, 2, 2), dtype=complex)
    B[:, 0, 0], B[:, 0, 1], B[:, 1, 1] = 1, 0.5 * t, 1
    res = granger_1d(spectrum_of(B), 1)
    assert res.sigma ** 2 == pytest.approx(1.25, abs=1e-12)
    assert res.Sigma ** 2 == pytest.approx(1.0, abs=1e-12)
    assert res.value == pytest.approx(0.5 * math.log(1.25), abs=1e-12)


def test_no_feedback_gives_zero():
    # Y sees e1 only contemporaneously; the past of Y adds nothing
    G = 128
    t = torus_points((G,))[0]
    B = np.zeros((G, 2, 2), dtype=complex)
    B[:, 0, 0], B[:, 1, 0], B[:, 1, 1] = 1 + 0.5 * t, 0.4, 1
    for L in (1, 2, 5):
        assert abs(granger_1d(spectrum_of(B), L).value) < 1e-10


@pytest.mark.parametrize("L", [1, 3, 10])
def test_block_diagonal_null_1d(L):
    G = 128
    t = torus_points((G,))[0]
    vals = np.zeros((G, 2, 2), dtype=complex)
    vals[:, 0, 0] = np.abs(1 + 0.7 * t) ** 2
    vals[:, 1, 1] = np.abs(2 - 0.3 * t ** 2) ** 2
    assert abs(granger_1d(MatrixFunction(vals), L).value) < 1e-10


def test_constant_spectrum():
    C = np.array([[2.0, 0.5 - 0.2j], [0.5 + 0.2j, 1.0]])
    res = granger_1d(MatrixFunction(np.tile(C, (16, 1, 1))), 1)
    assert abs(res.value) < 1e-12
    assert res.sigma == pytest.approx(math.sqrt(2.0))
    res2 = granger_2d(MatrixFunction(np.tile(C, (8, 8, 1, 1))), 1, 1)
    assert abs(res2.value) < 1e-12


def test_parseval_saturation_1d():
    G = 256
    S = spectrum_of(ma_factor(G))
    res = granger_1d(S, G // 2)
    mean = float(np.asarray(S.values)[:, 0, 0].real.mean())
    assert abs(res.sigma ** 2 - mean) < 1e-9
    assert abs(res.Sigma ** 2 - mean) < 1e-9
    assert abs(res.value) < 1e-9


@pytest.mark.parametrize("L, M", [(1, 1), (0, 2), (2, -1), (3, 0)])
def test_index_set_enumeration(L, M):
    box = (3, 3)
    assert sorted(index_set(L, M, box)) == sorted(brute_index_set(L, M, box))


def test_index_set_small_cases():
    assert index_set(0, 1, (2, 2)) == [(0, 0)]
    assert sorted(index_set(1, 1, (1, 1))) == [(0, 0), (0, 1), (1, -1), (1, 0)]


def enumerated_sums(fplus: dict, row: dict, L, M, box):
    idx = brute_index_set(L, M, box)
    s2 = sum(abs(fplus.get(k, 0)) ** 2 for k in idx)
    S2 = sum(sum(abs(c) ** 2 for c in row.get(k, (0, 0))) for k in idx)
    return s2, S2


@pytest.mark.parametrize("L, M", [(1, 1), (1, 2), (2, 0)])
def test_2d_fixture_enumerated_oracle(L, M):
    # B is outer with B(0) = I, so S+ = B; f+ = 1 + 0.5 t1 t2
    sizes = (32, 32)
    S = spectrum_of(fixture_2d(sizes, False))
    box = (3, 3)
    res = granger_2d(S, L, M, box=box)
    fplus = {(0, 0): 1.0, (1, 1): 0.5}
    row = {(0, 0): (1.0, 0.0), (1, 1): (0.5, 0.0)}
    s2, S2 = enumerated_sums(fplus, row, L, M, box)
    assert abs(res.sigma ** 2 - s2) < 1e-9
    assert abs(res.Sigma ** 2 - S2) < 1e-9
    assert abs(res.value - 0.5 * math.log(s2 / S2)) < 1e-9


@pytest.mark.parametrize("L, M", [(1, 1), (1, 2), (0, 1)])
def test_2d_feedback_fixture(L, M):
    # S11 = 1.41 + 0.5 (u + 1/u), u = t1 t2: f+ = a + b u with ab = 0.5, a^2 + b^2 = 1.41
    sizes = (64, 64)
    S = spectrum_of(fixture_2d(sizes, True))
    a = math.sqrt((1.41 + math.sqrt(1.41 ** 2 - 1)) / 2)
    b = 0.5 / a
    fplus = {(0, 0): a, (1, 1): b}
    row = {(0, 0): (1.0, 0.0), (1, 1): (0.5, 0.0), (0, 1): (0.0, 0.4)}
    box = (3, 3)
    res = granger_2d(S, L, M, box=box)
    s2, S2 = enumerated_sums(fplus, row, L, M, box)
    assert abs(res.sigma ** 2 - s2) < 1e-9
    assert abs(res.Sigma ** 2 - S2) < 1e-9
    assert res.value >= -1e-12


@pytest.mark.parametrize("L, M", [(1, 1), (2, 3)])
def test_block_diagonal_null_2d(L, M):
    sizes = (32, 32)
    t1, t2 = torus_points(sizes)
    vals = np.zeros(sizes + (2, 2), dtype=complex)
    vals[..., 0, 0] = np.abs(1 + 0.4 * t1 + 0.2 * t2) ** 2
    vals[..., 1, 1] = np.abs(1 - 0.3 * t1 * t2) ** 2
    assert abs(granger_2d(MatrixFunction(vals), L, M).value) < 1e-10


def test_default_box_covers_support():
    # the grid must resolve the log of S11 for the noise floor to sit below 1e-14
    sizes = (128, 128)
    S = spectrum_of(fixture_2d(sizes, False))
    res = granger_2d(S, 1, 2)
    assert res.truncation == (1, 1)
    assert res.boundary_energy < 1e-20


def test_truncation_warning():
    sizes = (64, 64)
    S = spectrum_of(fixture_2d(sizes, True))
    with pytest.warns(TruncationWarning):
        granger_2d(S, 3, 0, box=(0, 3))


def test_2d_box_must_fit_grid():
    S = MatrixFunction.identity(2, (8, 8))
    with pytest.raises(ValueError):
        granger_2d(S, 1, 1, box=(5, 1))


@pytest.mark.parametrize("seed", range(4))
def test_nonnegativity_random(seed):
    rng = np.random.default_rng(seed)
    S1 = spectrum_of(sample(random_outer(rng, 1, 2, 3, 0.5), (256,)))
    for L in (1, 2, 4):
        assert granger_1d(S1, L).value >= -1e-12
    S2 = spectrum_of(sample(random_outer(rng, 2, 2, 2, 0.2), (64, 64)))
    for L, M in ((1, 0), (1, 1), (2, -1)):
        assert granger_2d(S2, L, M, box=(31, 31)).value >= -1e-12


def test_input_checks():
    with pytest.raises(ValueError):
        granger_1d(MatrixFunction.identity(3, (8,)), 1)
    with pytest.raises(ValueError):
        granger_1d(MatrixFunction.identity(2, (8, 8)), 1)
    with pytest.raises(ValueError):
        granger_1d(MatrixFunction.identity(2, (8,)), 0)
    vals = np.tile(np.diag([1.0, -1.0]).astype(complex), (8, 1, 1))
    with pytest.raises(NotPositiveDefinite):
        granger_1d(MatrixFunction(vals), 1)
