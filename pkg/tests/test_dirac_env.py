"""Envelope propagator: exactness, conservation laws, and symmetry checks."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from honeybloch.dirac_env import (
    EnvelopePair,
    apply_step,
    conserved_norms,
    dirac_propagate,
    dirac_step_matrix,
    envelope_from_npz,
    evaluate_at_points,
    make_envelope,
    spectral_laplacian,
)
from honeybloch.lattice import ROT

LAM = 1.3 - 0.7j
TAU = np.exp(2j * np.pi / 3)


def symbol(xi, lam):
    return np.array([
        [0.0, np.conj(lam) * (xi[0] + 1j * xi[1])],
        [lam * (xi[0] - 1j * xi[1]), 0.0],
    ])


def test_step_matrix_zero_frequency_is_identity():
    got = dirac_step_matrix((0.0, 0.0), LAM, 0.37)
    assert np.abs(got - np.eye(2)).max() == 0.0


def test_step_matrix_matches_brute_force_exponential():
    rng = np.random.default_rng(11)
    for _ in range(20):
        xi = rng.normal(size=2) * 3.0
        t = rng.uniform(-2.0, 2.0)
        ref = expm(-1j * symbol(xi, LAM) * t)
        got = dirac_step_matrix(xi, LAM, t)
        assert np.abs(got - ref).max() < 1e-12


def test_symbol_eigenfrequencies():
    rng = np.random.default_rng(3)
    for _ in range(10):
        xi = rng.normal(size=2)
        freqs = np.linalg.eigvalsh(symbol(xi, LAM))
        w = abs(LAM) * np.hypot(*xi)
        assert np.abs(np.sort(freqs) - np.array([-w, w])).max() < 1e-13


@given(
    st.floats(-50.0, 50.0),
    st.floats(-50.0, 50.0),
    st.floats(-10.0, 10.0),
)
def test_step_matrix_unitary(xi1, xi2, t):
    u = dirac_step_matrix((xi1, xi2), LAM, t)
    assert np.abs(u @ u.conj().T - np.eye(2)).max() < 1e-13


def test_apply_step_matches_matrix_on_mode_arrays():
    rng = np.random.default_rng(5)
    shape = (4, 7)
    xi1 = rng.normal(size=shape)
    xi2 = rng.normal(size=shape)
    a1 = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    a2 = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    b1, b2 = apply_step(a1, a2, xi1, xi2, LAM, 0.83)
    for i in range(shape[0]):
        for j in range(shape[1]):
            m = dirac_step_matrix((xi1[i, j], xi2[i, j]), LAM, 0.83)
            vec = m @ np.array([a1[i, j], a2[i, j]])
            assert abs(b1[i, j] - vec[0]) < 1e-13
            assert abs(b2[i, j] - vec[1]) < 1e-13


@pytest.fixture(scope="module")
def vortex():
    return make_envelope(128, 24.0, LAM, preset="vortex")


def test_propagate_zero_time_is_identity(vortex):
    out = dirac_propagate(vortex, 0.0)
    assert np.abs(out.alpha1 - vortex.alpha1).max() < 1e-14
    assert np.abs(out.alpha2 - vortex.alpha2).max() < 1e-14


def test_propagate_preserves_spectral_modulus(vortex):
    out = dirac_propagate(vortex, 2.4)
    before = np.abs(np.fft.fft2(vortex.alpha1)) ** 2 + np.abs(np.fft.fft2(vortex.alpha2)) ** 2
    after = np.abs(np.fft.fft2(out.alpha1)) ** 2 + np.abs(np.fft.fft2(out.alpha2)) ** 2
    assert np.abs(after - before).max() < 1e-12 * before.max()


def test_propagate_semigroup(vortex):
    two_steps = dirac_propagate(dirac_propagate(vortex, 0.6), 0.9)
    one_step = dirac_propagate(vortex, 1.5)
    scale = np.abs(vortex.alpha1).max()
    assert np.abs(two_steps.alpha1 - one_step.alpha1).max() < 1e-12 * scale
    assert np.abs(two_steps.alpha2 - one_step.alpha2).max() < 1e-12 * scale


def test_norms_conserved_over_long_time(vortex):
    n0 = conserved_norms(vortex, 1)
    n1 = conserved_norms(dirac_propagate(vortex, 1000.0), 1)
    assert abs(n1[0] - n0[0]) < 1e-12 * n0[0]
    assert abs(n1[1] - n0[1]) < 1e-11 * n0[1]


def test_mass_equals_zeroth_norm_squared(vortex):
    n0 = conserved_norms(vortex, 0)
    assert abs(vortex.mass() - n0[0] ** 2) < 1e-12 * vortex.mass()


def test_zero_field_has_zero_norms():
    z = np.zeros((32, 32), dtype=complex)
    env = EnvelopePair(z, z, 10.0, LAM)
    assert np.all(conserved_norms(env, 3) == 0.0)
    assert env.spectral_tail_fraction() == 0.0


def test_norms_reject_negative_order(vortex):
    with pytest.raises(ValueError):
        conserved_norms(vortex, -1)


def test_smooth_data_passes_tail_check(vortex):
    assert vortex.spectral_tail_fraction() < 1e-10
    assert not dirac_propagate(vortex, 1.0).tail_warning


def test_rough_data_sets_sticky_tail_warning():
    rng = np.random.default_rng(0)
    noise = rng.normal(size=(64, 64)) + 0j
    env = EnvelopePair(noise, np.zeros_like(noise), 10.0, LAM)
    assert env.spectral_tail_fraction() > 1e-10
    stepped = dirac_propagate(env, 0.1)
    assert stepped.tail_warning
    # flag survives later steps even though the field stays rough anyway
    assert dirac_propagate(stepped, 0.1).tail_warning


def test_wave_equation_reduction(vortex):
    # second time difference of alpha1 converges to |lam|^2 Laplacian alpha1
    # at second order: halving dt cuts the residual by about 4
    state = dirac_propagate(vortex, 1.0)
    target = abs(LAM) ** 2 * spectral_laplacian(state.alpha1, state.length)

    def residual(dt):
        plus = dirac_propagate(state, dt)
        minus = dirac_propagate(state, -dt)
        stencil = (plus.alpha1 - 2.0 * state.alpha1 + minus.alpha1) / dt ** 2
        return np.abs(stencil - target).max()

    ratio = residual(0.05) / residual(0.025)
    assert 3.4 < ratio < 4.6


def test_rotational_covariance_of_symbol():
    # counter-clockwise third-turn in frequency conjugates the symbol by
    # diag(1, conj(tau))
    rng = np.random.default_rng(9)
    rot_ccw = ROT.T
    u = np.diag([1.0, np.conj(TAU)])
    for _ in range(10):
        xi = rng.normal(size=2) * 2.0
        lhs = symbol(rot_ccw @ xi, LAM)
        rhs = u @ symbol(xi, LAM) @ u.conj().T
        assert np.abs(lhs - rhs).max() < 1e-13


def test_rotational_covariance_of_evolved_field():
    # radial first component, empty second: after evolution the first stays
    # rotation-invariant and the second picks up a factor tau per clockwise
    # third-turn about the center
    env = make_envelope(128, 30.0, LAM, preset="gaussian")
    out = dirac_propagate(env, 2.0)
    center = np.array([15.0, 15.0])
    rng = np.random.default_rng(21)
    pts = rng.uniform(10.0, 20.0, size=(12, 2))
    rotated = center + (ROT @ (pts - center).T).T
    a1r, a2r = evaluate_at_points(out, rotated)
    a1o, a2o = evaluate_at_points(out, pts)
    assert np.abs(a2o).max() > 1e-3  # evolution actually populated alpha2
    assert np.abs(a1r - a1o).max() < 1e-10
    assert np.abs(a2r - TAU * a2o).max() < 1e-10


def test_finite_propagation_speed():
    env = make_envelope(240, 60.0, LAM, preset="gaussian")
    t = 3.0
    out = dirac_propagate(env, t)
    x1, x2 = out.grid()
    r = np.hypot(x1 - 30.0, x2 - 30.0)
    cut = 5.0 + abs(LAM) * t + 5.0
    weight = (out.length / out.npoints) ** 2
    outside = weight * (
        np.sum(np.abs(out.alpha1[r > cut]) ** 2) + np.sum(np.abs(out.alpha2[r > cut]) ** 2)
    )
    assert outside < 1e-6 * out.mass()


def test_gaussian_preset_shape():
    env = make_envelope(64, 16.0, LAM, preset="gaussian", width=1.5)
    assert np.all(env.alpha2 == 0.0)
    x1, x2 = env.grid()
    expected = np.exp(-((x1 - 8.0) ** 2 + (x2 - 8.0) ** 2) / (2 * 1.5 ** 2))
    assert np.abs(env.alpha1 - expected).max() < 1e-14


def test_vortex_preset_winds_once():
    env = make_envelope(64, 16.0, LAM, preset="vortex")
    a1, a2 = evaluate_at_points(env, [[9.0, 8.0], [8.0, 9.0]])
    del a1
    # quarter turn about the center multiplies alpha2 by i
    assert abs(a2[1] - 1j * a2[0]) < 1e-10
    assert a2[0].real > 0 and abs(a2[0].imag) < 1e-12


def test_point_evaluation_matches_grid(vortex):
    x1, x2 = vortex.grid()
    picks = [(5, 9), (0, 0), (100, 37)]
    pts = [[x1[i, j], x2[i, j]] for i, j in picks]
    a1, a2 = evaluate_at_points(vortex, pts)
    for n, (i, j) in enumerate(picks):
        assert abs(a1[n] - vortex.alpha1[i, j]) < 1e-12
        assert abs(a2[n] - vortex.alpha2[i, j]) < 1e-12


def test_npz_roundtrip(tmp_path, vortex):
    stepped = dirac_propagate(vortex, 0.5)
    path = tmp_path / "pair.npz"
    stepped.to_npz(path)
    back = envelope_from_npz(path)
    assert np.array_equal(back.alpha1, stepped.alpha1)
    assert np.array_equal(back.alpha2, stepped.alpha2)
    assert back.length == stepped.length
    assert back.lambda_sharp == stepped.lambda_sharp
    assert back.tail_warning == stepped.tail_warning


def test_csv_export_layout(tmp_path):
    env = make_envelope(4, 2.0, LAM, preset="vortex")
    path = tmp_path / "pair.csv"
    env.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,x2,alpha1_re,alpha1_im,alpha2_re,alpha2_im"
    assert len(lines) == 1 + 16
    first = lines[1].split(",")
    assert float(first[0]) == 0.0 and float(first[1]) == 0.0


def test_constructor_validation():
    z = np.zeros((4, 4), dtype=complex)
    with pytest.raises(ValueError):
        EnvelopePair(np.zeros((4, 5), dtype=complex), np.zeros((4, 5), dtype=complex), 1.0, LAM)
    with pytest.raises(ValueError):
        EnvelopePair(z, np.zeros((5, 5), dtype=complex), 1.0, LAM)
    with pytest.raises(ValueError):
        EnvelopePair(z, z, -1.0, LAM)
    with pytest.raises(ValueError):
        make_envelope(16, 8.0, LAM, preset="plane")


def test_replace_keeps_grid_metadata(vortex):
    shifted = dataclasses.replace(vortex, alpha2=np.zeros_like(vortex.alpha2))
    assert shifted.length == vortex.length
    assert shifted.lambda_sharp == vortex.lambda_sharp
