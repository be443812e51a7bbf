import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairmoo.numerics import (
    FiniteDiffError,
    ParamVector,
    Segment,
    SingularMatrixError,
    Tape,
    UnsupportedOperation,
    evaluate,
    finite_diff,
    load_tensor,
    mat_frac_power,
    max_rel_error,
    save_tensor,
    sym_eig,
    value_and_grad,
)
from fairmoo.numerics import autodiff as ad


def half_sq(v):
    x = v["theta"]
    return ad.sum_(ad.mul(x, x)) * 0.5


def test_quadratic_value_and_grad():
    val, g = value_and_grad(half_sq, np.array([3.0, -4.0]))
    assert val == 12.5
    assert g.tolist() == [3.0, -4.0]


def test_sum_grad_is_ones(rng):
    theta = rng.standard_normal(7)
    _, g = value_and_grad(lambda v: ad.sum_(v["theta"]), theta)
    assert np.array_equal(g, np.ones(7))


def two_layer(v, x, y):
    h = ad.tanh(ad.affine(x, v["W1"], v["b1"]))
    h = ad.relu(ad.affine(h, v["W2"], v["b2"]))
    out = ad.affine(h, v["W3"], v["b3"])
    return ad.add(ad.sq_err(out, y), ad.mean(ad.mul(out, out)))


def test_two_layer_net_matches_finite_differences(rng):
    x, y = rng.standard_normal((4, 5)), rng.standard_normal((4, 2))
    theta = ParamVector.from_arrays({
        "W1": rng.standard_normal((6, 5)), "b1": rng.standard_normal(6),
        "W2": rng.standard_normal((3, 6)), "b2": rng.standard_normal(3) + 0.5,
        "W3": rng.standard_normal((2, 3)), "b3": rng.standard_normal(2),
    })
    f = lambda v: two_layer(v, x, y)
    _, g = value_and_grad(f, theta)
    num = finite_diff(lambda th: evaluate(f, th), theta)
    assert max_rel_error(g, num) <= 1e-5


def test_masked_and_lowrank_ops_match_finite_differences(rng):
    x, y = rng.standard_normal((3, 4)), rng.standard_normal((3, 5))
    mask = (rng.uniform(size=(3, 5)) > 0.5).astype(float)
    W, b = rng.standard_normal((5, 4)), rng.standard_normal(5)
    theta = ParamVector.from_arrays({"A": rng.standard_normal((2, 4)), "B": rng.standard_normal((5, 2))})
    f = lambda v: ad.masked_sq_err(ad.lowrank_affine(x, W, b, v["A"], v["B"], 0.4), y, mask, 15.0)
    _, g = value_and_grad(f, theta)
    num = finite_diff(lambda th: evaluate(f, th), theta)
    assert max_rel_error(g, num) <= 1e-5


def test_masked_sq_err_with_ones_equals_sq_err(rng):
    a, b = rng.standard_normal((4, 6)), rng.standard_normal((4, 6))
    tape = Tape()
    va = tape.param(a)
    full = ad.sq_err(va, b).value
    masked = ad.masked_sq_err(va, b, np.ones_like(a), a.size).value
    assert float(full) == float(masked)


@pytest.mark.parametrize("op", [
    lambda x: x / 2.0, lambda x: x ** 2, lambda x: -x, lambda x: abs(x), lambda x: x @ x,
])
def test_unsupported_operators_rejected(op):
    tape = Tape()
    x = tape.param(np.ones(3))
    with pytest.raises(UnsupportedOperation):
        op(x)


def test_numpy_ufunc_on_var_rejected():
    tape = Tape()
    x = tape.param(np.ones(3))
    with pytest.raises(TypeError):
        np.exp(x)


def test_unknown_op_name_rejected():
    with pytest.raises(UnsupportedOperation):
        Tape().apply("sigmoid", np.ones(2))


def test_replay_is_bit_exact(rng):
    tape = Tape()
    x = tape.param(rng.standard_normal((3, 4)))
    W, b = tape.param(rng.standard_normal((2, 4))), tape.param(rng.standard_normal(2))
    out = ad.mean(ad.tanh(ad.affine(x, W, b)))
    recorded = [n.value for n in tape.nodes]
    for r, v in zip(tape.replay(), recorded):
        assert np.array_equal(r, v)
    assert out.value.size == 1


def test_backward_visits_each_node_once_in_reverse(rng):
    tape = Tape()
    x = tape.param(rng.standard_normal(5))
    y = ad.mul(x, x)
    z = ad.add(y, ad.tanh(y))
    out = ad.sum_(ad.add(z, y))
    log = []
    tape.backward(out, visit_log=log)
    assert len(log) == len(set(log))
    assert log == sorted(log, reverse=True)
    ops = {i for i, n in enumerate(tape.nodes) if n.op is not None}
    assert set(log) == ops


def test_finite_diff_examples():
    g = finite_diff(lambda th: 0.5 * float(th @ th), np.array([1.0, 2.0]))
    assert np.allclose(g, [1.0, 2.0], atol=1e-9, rtol=0)
    g = finite_diff(lambda th: float(np.sum(th ** 3)), np.array([1.0]))
    assert abs(g[0] - 3.0) <= 1e-8


def test_finite_diff_reports_coordinate():
    with pytest.raises(FiniteDiffError) as info, np.errstate(invalid="ignore"):
        finite_diff(lambda th: float(np.log(th[1])), np.array([1.0, 5e-6]))
    assert info.value.coordinate == 1
    with pytest.raises(ValueError):
        finite_diff(lambda th: 0.0, np.zeros(2), h=0.0)


def test_value_and_grad_is_deterministic(rng):
    theta = rng.standard_normal(10)
    f = lambda v: ad.mean(ad.tanh(ad.mul(v["theta"], v["theta"])))
    a, b = value_and_grad(f, theta), value_and_grad(f, theta)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])


# ---- eigen solver and matrix powers


def test_sym_eig_examples():
    assert np.array_equal(sym_eig(np.eye(3))[0], [1.0, 1.0, 1.0])
    assert np.array_equal(sym_eig(np.diag([1.0, 9.0, 4.0]))[0], [9.0, 4.0, 1.0])


def test_sym_eig_random_bounds():
    rng = np.random.default_rng(7)
    for trial in range(1000):
        k = int(rng.integers(1, 17)) if trial % 10 else 16
        M = rng.uniform(-10, 10, (k, k))
        K = np.triu(M) + np.triu(M, 1).T
        lam, Q = sym_eig(K)
        assert np.all(np.diff(lam) <= 0)
        assert np.max(np.abs(Q @ Q.T - np.eye(k))) <= 1e-12
        assert np.max(np.abs((Q * lam) @ Q.T - K)) <= 1e-10 * np.max(np.abs(K))


def test_sym_eig_rejects_bad_input():
    with pytest.raises(ValueError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        sym_eig(np.eye(17))


def test_mat_frac_power_examples():
    assert np.allclose(mat_frac_power(np.eye(3), -2 / 3), np.eye(3), atol=1e-15)
    P = mat_frac_power(np.diag([8.0, 27.0]), -2 / 3, 0.0)
    assert np.allclose(P, np.diag([0.25, 1 / 9]), rtol=1e-14, atol=0)


def test_mat_frac_power_properties(rng):
    from conftest import random_spd

    for _ in range(200):
        K = random_spd(rng, int(rng.integers(1, 6)))
        root = mat_frac_power(K, 0.5)
        assert np.max(np.abs(root @ root - K)) <= 1e-10 * max(1.0, np.max(np.abs(K)))
        assert np.max(np.abs(mat_frac_power(K, 1.0) - K)) <= 1e-12 * max(1.0, np.max(np.abs(K)))
        a, b = rng.uniform(-1, 1, 2)
        lhs = mat_frac_power(K, a) @ mat_frac_power(K, b)
        rhs = mat_frac_power(K, a + b)
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(rhs)))
        P = mat_frac_power(K, -2 / 3)
        assert np.array_equal(P, P.T)


def test_mat_frac_power_singular_names_eigenvalue():
    with pytest.raises(SingularMatrixError, match="eigenvalue"):
        mat_frac_power(np.diag([1.0, 0.0]), -2 / 3)
    P = mat_frac_power(np.diag([1.0, 0.0]), -2 / 3, eps_reg=1e-10)
    assert np.isfinite(P).all()


# ---- parameter vectors and tensor files


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=1, max_size=5))
def test_param_vector_round_trip(shapes):
    rng = np.random.default_rng(len(shapes))
    arrays = {f"p{i}": rng.standard_normal(s) for i, s in enumerate(shapes)}
    pv = ParamVector.from_arrays(arrays)
    back = ParamVector.from_arrays(pv.arrays())
    assert np.array_equal(back.data, pv.data)
    for name, arr in arrays.items():
        assert np.array_equal(pv[name], arr)


def test_param_vector_rejects_gaps():
    with pytest.raises(ValueError):
        ParamVector([Segment("a", 0, (2,)), Segment("b", 3, (1,))], np.zeros(4))


def test_tensor_dump_round_trip(tmp_path, rng):
    arr = rng.standard_normal((2, 3, 4))
    save_tensor(tmp_path, "x", arr)
    raw = (tmp_path / "x.f64").read_bytes()
    assert raw == arr.astype("<f8").tobytes(order="C")
    meta = json.loads((tmp_path / "x.json").read_text())
    assert meta == {"shape": [2, 3, 4], "dtype": "f64", "order": "row-major"}
    assert np.array_equal(load_tensor(tmp_path, "x"), arr)
