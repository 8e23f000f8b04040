import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from honeybloch.lattice import honeycomb_basis, rotate_R
from honeybloch.potential import (
    THREE_COSINE_ROWS,
    evaluate_grid,
    evaluate_points,
    potential_from_coeffs,
    potential_from_rows,
    read_potential_config,
    symmetry_report,
    three_cosine_potential,
    v11_coefficient,
    write_potential_config,
)

LAT, DUAL = honeycomb_basis(1.0)


def test_three_cosine_coefficients():
    V = three_cosine_potential(1.0, DUAL)
    assert V.coefficient((1, 1)) == 0.5
    assert V.coefficient((-1, 0)) == 0.5
    assert V.coefficient((2, 0)) == 0.0
    assert V.cutoff == 1
    assert len(V.coeffs) == 6


def test_zero_eps_rejected():
    with pytest.raises(ValueError):
        three_cosine_potential(0.0, DUAL)


@given(st.floats(min_value=0.05, max_value=50.0))
def test_three_cosine_symmetric(eps):
    rep = symmetry_report(three_cosine_potential(eps, DUAL))
    assert rep.admissible
    assert max(rep.residual_real, rep.residual_even, rep.residual_r) < 1e-14


def test_single_cosine_not_r_invariant():
    V = potential_from_coeffs({(1, 0): 0.5, (-1, 0): 0.5})
    rep = symmetry_report(V)
    assert rep.real and rep.even
    assert not rep.r_invariant


def test_imaginary_coefficient_not_real():
    V = potential_from_coeffs({(1, 0): 1j})
    rep = symmetry_report(V)
    assert not rep.real


def test_v11_values():
    # area * coefficient: sqrt(3)/2 * 1/2 at eps=1, a=1
    assert abs(v11_coefficient(three_cosine_potential(1.0, DUAL), LAT) - np.sqrt(3) / 4) < 1e-15
    assert abs(v11_coefficient(three_cosine_potential(-1.0, DUAL), LAT) + np.sqrt(3) / 4) < 1e-15
    assert v11_coefficient(potential_from_coeffs({}), LAT) == 0


def test_grid_values():
    V = three_cosine_potential(1.0, DUAL)
    f = evaluate_grid(V, LAT, DUAL, 16)
    assert abs(f[0, 0] - 3.0) < 1e-12
    assert np.isrealobj(f)
    zero = evaluate_grid(potential_from_coeffs({}), LAT, DUAL, 8)
    assert np.all(zero == 0)


def test_grid_aliasing_guard():
    with pytest.raises(ValueError):
        evaluate_grid(three_cosine_potential(1.0, DUAL), LAT, DUAL, 3)


def test_field_symmetries_random_points():
    V = three_cosine_potential(0.7, DUAL)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-2, 2, size=(1000, 2))
    f = evaluate_points(V, DUAL, pts)
    f_neg = evaluate_points(V, DUAL, -pts)
    # R* x rotates points counter-clockwise; the field must not change
    pts_rot = pts @ np.array([[-0.5, np.sqrt(3) / 2], [-np.sqrt(3) / 2, -0.5]])
    f_rot = evaluate_points(V, DUAL, pts_rot)
    assert np.max(np.abs(f.imag)) < 1e-12
    assert np.max(np.abs(f - f_neg)) < 1e-10
    assert np.max(np.abs(f - f_rot)) < 1e-10


def test_grid_periodicity():
    V = three_cosine_potential(1.3, DUAL)
    pts = np.random.default_rng(5).uniform(-1, 1, size=(50, 2))
    f0 = evaluate_points(V, DUAL, pts)
    f1 = evaluate_points(V, DUAL, pts + LAT.v1)
    assert np.max(np.abs(f0 - f1)) < 1e-11


def test_fourier_roundtrip():
    V = three_cosine_potential(2.0, DUAL)
    N = 8
    f = evaluate_grid(V, LAT, DUAL, N)
    C = np.fft.fft2(f) / (N * N)
    for (m1, m2), v in V.coeffs.items():
        assert abs(C[m1 % N, m2 % N] - v) < 1e-12
    # bins away from stored coefficients vanish
    assert abs(C[3, 0]) < 1e-12


def test_config_roundtrip(tmp_path):
    p = tmp_path / "pot.cfg"
    write_potential_config(p, 0.9, THREE_COSINE_ROWS)
    eps, V = read_potential_config(p)
    assert eps == 0.9
    ref = three_cosine_potential(0.9, DUAL)
    assert set(V.coeffs) == set(ref.coeffs)
    for m, v in ref.coeffs.items():
        assert abs(V.coefficient(m) - v) < 1e-15
    assert V.content_hash() == ref.content_hash()


def test_hash_distinguishes():
    a = three_cosine_potential(1.0, DUAL)
    b = three_cosine_potential(1.0 + 1e-9, DUAL)
    assert a.content_hash() != b.content_hash()
    assert a.content_hash() == potential_from_rows(1.0, THREE_COSINE_ROWS).content_hash()
