import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varbw.errors import (
    IndexOutOfRange,
    InputError,
    LengthMismatch,
    NonIncreasingBreakpoints,
    NonPositiveSpectralParameter,
    NonPositiveValue,
)
from varbw.profile import (
    ExponentialSum,
    coefficient_determinant,
    eval_exponential_sum,
    fundamental_solutions,
    load_profile,
    make_profile,
    propagate_coefficients,
    solution_flux,
    transfer_matrix,
    transfer_sums,
)
from varbw.synthetic import random_profile


def test_make_profile_basic():
    p = make_profile([-1.0, 2.0], [1.0, 4.0, 0.25])
    assert p.n_jumps == 2 and p.n_intervals == 3
    np.testing.assert_allclose(p.q, [1.0, 0.5, 2.0])


@pytest.mark.parametrize("bp, vals, exc", [
    ([1.0, 1.0], [1, 2, 3], NonIncreasingBreakpoints),
    ([2.0, 1.0], [1, 2, 3], NonIncreasingBreakpoints),
    ([0.0], [1.0, -2.0], NonPositiveValue),
    ([0.0], [1.0, 0.0], NonPositiveValue),
    ([0.0, 1.0], [1.0, 2.0], LengthMismatch),
])
def test_make_profile_rejects(bp, vals, exc):
    with pytest.raises(exc):
        make_profile(bp, vals)


def test_breakpoint_belongs_to_left_interval():
    p = make_profile([0.0, 1.0], [1.0, 2.0, 3.0])
    assert list(p.interval_of(np.array([-1.0, 0.0, 0.5, 1.0, 1.0 + 1e-12]))) == [0, 0, 1, 1, 2]


def test_profile_json_roundtrip(tmp_path):
    p = make_profile([-0.5, 1.5], [2.0, 1.0, 3.0])
    path = tmp_path / "p.json"
    path.write_text(json.dumps(p.to_dict()))
    q = load_profile(path)
    np.testing.assert_array_equal(q.breakpoints, p.breakpoints)
    np.testing.assert_array_equal(q.values, p.values)


@pytest.mark.parametrize("text", ["{", "[1, 2]", '{"values": [1]}', '{"breakpoints": ["a"], "values": [1, 2]}'])
def test_load_profile_bad_files(tmp_path, text):
    path = tmp_path / "p.json"
    path.write_text(text)
    with pytest.raises(InputError):
        load_profile(path)


def test_load_profile_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_profile(tmp_path / "nope.json")


def test_toy_coefficients_frozen(toy_profile):
    # hand-derived for p = (1, 4), jump at 0: q = (1, 1/2), r = 1/2
    t = propagate_coefficients(toy_profile)
    z = np.array([0.3, 1.7])
    ap, bp, am, bm = t.evaluate(z)
    np.testing.assert_allclose(am[1], 0.25)
    np.testing.assert_allclose(bm[1], 0.75)
    np.testing.assert_allclose(ap[0], 1.5)
    np.testing.assert_allclose(bp[0], -0.5)
    np.testing.assert_allclose(ap[1], 1.0)
    np.testing.assert_allclose(bp[1], 0.0, atol=0)
    np.testing.assert_allclose(coefficient_determinant(t, 0, z), 1.5)
    np.testing.assert_allclose(coefficient_determinant(t, 1, z), 0.75)


def test_n0_table_is_plane_waves():
    t = propagate_coefficients(make_profile([], [1.0]))
    x = np.linspace(-3, 3, 7)
    pp, pm = fundamental_solutions(t, np.array([0.7]), x)
    np.testing.assert_allclose(pp[0], np.exp(0.7j * x))
    np.testing.assert_allclose(pm[0], np.exp(-0.7j * x))


def test_transfer_matrix_matches_sums():
    p = make_profile([-0.7, 1.3], [0.5, 2.0, 1.0])
    for j in (1, 2):
        sums = transfer_sums(p, j)
        num = transfer_matrix(p, j, 0.9)
        np.testing.assert_allclose([[s(0.9) for s in row] for row in sums], num, rtol=1e-14)
    with pytest.raises(IndexOutOfRange):
        transfer_matrix(p, 3, 1.0)


def test_fundamental_solutions_reject_nonpositive_zeta(toy_profile):
    t = propagate_coefficients(toy_profile)
    with pytest.raises(NonPositiveSpectralParameter):
        fundamental_solutions(t, np.array([0.0, 1.0]), np.array([0.0]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.floats(0.05, 3.0))
def test_value_and_flux_continuous(seed, n, zeta):
    p = random_profile(np.random.default_rng(seed), n)
    t = propagate_coefficients(p)
    z = np.array([zeta])
    for j, b in enumerate(p.breakpoints):
        x = np.array([b])
        for fn in (fundamental_solutions, solution_flux):
            left = fn(t, z, x, interval=j)
            right = fn(t, z, x, interval=j + 1)
            for a, c in zip(left, right):
                assert abs(a[0, 0] - c[0, 0]) <= 1e-11 * max(1.0, abs(a[0, 0]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_determinant_identity(seed, n):
    p = random_profile(np.random.default_rng(seed), n)
    t = propagate_coefficients(p)
    z = np.linspace(0.05, 2.0, 40)
    bn = t.b_minus[-1](z)
    for j in range(p.n_intervals):
        np.testing.assert_allclose(coefficient_determinant(t, j, z), p.q[j] * bn / p.q[-1], rtol=1e-12)
    # |b_minus[N]|^2 >= q_N / q_0: the spectral weights never blow up
    assert np.all(np.abs(bn) ** 2 >= p.q[-1] / p.q[0] * (1 - 1e-12))


_terms = st.lists(st.tuples(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
                            st.floats(-5, 5)), max_size=5)


@settings(max_examples=50, deadline=None)
@given(_terms, _terms, st.floats(-2, 2))
def test_exponential_sum_algebra(t1, t2, zeta):
    a = ExponentialSum.from_terms([c for c, _ in t1], [f for _, f in t1])
    b = ExponentialSum.from_terms([c for c, _ in t2], [f for _, f in t2])
    va, vb = a(zeta), b(zeta)
    tol = 1e-9 * (1 + a.bound()) * (1 + b.bound())
    assert abs((a + b)(zeta) - (va + vb)) <= tol
    assert abs((a - b)(zeta) - (va - vb)) <= tol
    assert abs((a * b)(zeta) - va * vb) <= tol
    assert np.all(np.diff(a.freqs) > 0)


def test_exponential_sum_merges_and_evaluates():
    s = ExponentialSum.from_terms([1.0, 2.0, 3.0], [1.0, 0.0, 1.0])
    assert len(s.freqs) == 2
    z = np.array([0.0, 0.5])
    np.testing.assert_allclose(eval_exponential_sum(s, z), 2.0 + 4.0 * np.exp(1j * z))
