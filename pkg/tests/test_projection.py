import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stcodes.channel_model import ChannelSpec
from stcodes.errors import DomainError, ShapeError
from stcodes.projection import (
    DENSE, SPARSE, generate, generate_dense, generate_sparse, project, projected_channel_check,
)


def test_dense_entry_statistics():
    W = generate_dense(400, 500, seed=1)
    assert W.dense.shape == (400, 500)
    assert abs(W.dense.mean()) < 3 * math.sqrt(1 / 400 / W.dense.size)
    assert W.dense.var() * 400 == pytest.approx(1.0, abs=0.01)


def test_dense_same_seed_same_matrix():
    assert np.array_equal(generate_dense(20, 30, seed=7).dense, generate_dense(20, 30, seed=7).dense)
    assert not np.array_equal(generate_dense(20, 30, seed=7).dense, generate_dense(20, 30, seed=8).dense)


@pytest.mark.parametrize("s", [2.0, 3.0, 8.0])
def test_sparse_entry_statistics(s):
    n, l = 300, 400
    W = generate_sparse(n, l, s, seed=2)
    D = W.to_dense()
    nz = D[D != 0]
    assert np.allclose(np.abs(nz), math.sqrt(s / (2 * n)))
    frac = nz.size / D.size
    assert abs(frac - 2 / s) < 4 * math.sqrt((2 / s) * (1 - 2 / s) / D.size) + 1e-12
    assert abs((nz > 0).mean() - 0.5) < 0.01
    assert D.var() * n == pytest.approx(1.0, abs=0.03)


def test_sparse_s2_has_no_zeros():
    D = generate_sparse(50, 60, 2.0, seed=0).to_dense()
    assert np.count_nonzero(D) == D.size
    assert np.allclose(np.abs(D), 1 / math.sqrt(50))


def test_sparse_rejects_small_s():
    with pytest.raises(DomainError):
        generate_sparse(10, 10, 1.5, seed=0)
    with pytest.raises(DomainError):
        generate(10, 10, 0, kind="nope")


def test_project_zero_vector():
    for W in (generate_dense(30, 40, 1), generate_sparse(30, 40, 4.0, 1)):
        assert np.array_equal(project(W, np.zeros(30)), np.zeros(40))


def test_project_shape_mismatch():
    with pytest.raises(ShapeError):
        project(generate_dense(30, 40, 1), np.zeros(31))


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=20, deadline=None)
def test_project_linear_and_deterministic(seed, a, b):
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 25))
    for W in (generate_dense(25, 33, seed % 97), generate_sparse(25, 33, 3.0, seed % 97)):
        lhs = project(W, a * u + b * v)
        rhs = a * project(W, u) + b * project(W, v)
        assert np.allclose(lhs, rhs, atol=1e-10)
        assert np.array_equal(project(W, u), project(W, u))


def test_sparse_project_matches_dense_product():
    W = generate_sparse(40, 50, 4.0, seed=3)
    V = np.random.default_rng(0).standard_normal((7, 40))
    assert np.allclose(project(W, V), V @ W.to_dense(), atol=1e-12)
    assert np.allclose(project(W, V[0]), V[0] @ W.to_dense(), atol=1e-12)


def test_johnson_lindenstrauss_sanity():
    n, l = 500, 1024
    rng = np.random.default_rng(5)
    for W in (generate_dense(n, l, 1), generate_sparse(n, l, 8.0, 1)):
        u, v = rng.standard_normal((2, 100, n))
        d = u - v
        ratio = (project(W, d) ** 2).sum(axis=1) * (n / l) / (d ** 2).sum(axis=1)
        assert np.mean((ratio >= 0.7) & (ratio <= 1.3)) >= 0.95


def test_sparse_and_dense_output_variance_agree():
    n, l = 500, 256
    V = np.random.default_rng(6).standard_normal((2000, n))
    vd = project(generate_dense(n, l, 2), V).var()
    vs = project(generate_sparse(n, l, 10.0, 2), V).var()
    assert abs(vd / vs - 1) < 0.05


def test_normalized_columns_have_unit_norm():
    for W in (generate_dense(30, 20, 1, normalize=True), generate_sparse(30, 20, 3.0, 1, normalize=True)):
        norms = np.linalg.norm(W.to_dense(), axis=0)
        assert np.allclose(norms[norms > 0], 1.0)


def test_channel_check_noiseless():
    W = generate_dense(50, 100, 0)
    assert projected_channel_check(W, ChannelSpec(1.0, 0.0), 10_000) == pytest.approx(1.0, abs=1e-9)


def test_channel_check_zero_db():
    W = generate_dense(100, 200, 0)
    assert abs(projected_channel_check(W, ChannelSpec(1.0, 1.0), 100_000, seed=1) - 1 / math.sqrt(2)) < 0.01


def test_channel_check_noise_dominated():
    # l <= n keeps the projected coordinates of one item nearly uncorrelated
    W = generate_sparse(500, 256, 4.0, 0)
    r = projected_channel_check(W, ChannelSpec(1.0, 1000.0), 100_000, seed=1)
    assert abs(r - 0.001) < 0.01


def test_channel_check_requires_trials():
    with pytest.raises(DomainError):
        projected_channel_check(generate_dense(5, 5, 0), ChannelSpec(), 100)


def test_kind_constants():
    assert generate(5, 6, 0).kind == DENSE
    assert generate(5, 6, 0, kind=SPARSE, s=3).kind == SPARSE
