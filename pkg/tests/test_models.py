import numpy as np
import pytest

from conftest import crandn
from linphase.models import (
    C0,
    ELECTRIC,
    MAGNETIC,
    PHI,
    THETA,
    DipoleAUT,
    GeometryError,
    ProbeArrayGeometry,
    SamplingPlan,
    add_noise,
    box_dipole_aut,
    box_dipole_layout,
    build_forward_operator,
    dipole_field,
    far_field_components,
    far_field_cut,
    field_at,
    probe_positions,
    sample_gaussian_instance,
    spherical_frame,
)
from linphase.numerics import condition_number
from linphase.scenario import AntennaParams, build_antenna_instance
from oracles import textbook_dipole_field

F = 2.6e9
K = 2 * np.pi * F / C0


def single(kind=ELECTRIC, orientation=(0, 0, 1), position=(0, 0, 0), coef=1.0):
    return DipoleAUT(np.array([position], float), np.array([orientation], float),
                     np.array([kind]), np.array([coef]), F, np.full(3, 0.05))


def random_unit(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


# -- Gaussian ensemble ------------------------------------------------------------------------

def test_gaussian_determinism():
    a, b = sample_gaussian_instance(5, 7, 99), sample_gaussian_instance(5, 7, 99)
    np.testing.assert_array_equal(a.A, b.A)
    np.testing.assert_array_equal(a.z_true, b.z_true)
    c = sample_gaussian_instance(5, 7, 100)
    assert not np.array_equal(a.A, c.A)


def test_gaussian_shapes_and_consistency():
    inst = sample_gaussian_instance(20, 20, 1)
    assert inst.A.shape == (20, 20) and inst.z_true.shape == (20,) and inst.b_true.shape == (20,)
    assert np.linalg.norm(inst.A @ inst.z_true - inst.b_true) <= 1e-14 * np.linalg.norm(inst.b_true)


def test_gaussian_moments():
    A = sample_gaussian_instance(100, 1000, 5).A.ravel()
    assert 0.47 <= np.var(A.real) <= 0.53
    assert 0.47 <= np.var(A.imag) <= 0.53
    assert abs(np.mean(A)) < 0.01


def test_gaussian_rejects_empty():
    with pytest.raises(ValueError):
        sample_gaussian_instance(0, 3, 1)


# -- dipole fields ------------------------------------------------------------------------------

def test_on_axis_only_radial():
    aut = single()
    E = dipole_field(aut, 0, 1.0, [0, 0, 0.4])
    assert abs(E[0]) < 1e-15 * abs(E[2]) and abs(E[1]) < 1e-15 * abs(E[2])
    R = 0.4
    expected = 2 / (4 * np.pi * R**2) * (1 + 1 / (1j * K * R)) * np.exp(-1j * K * R)
    assert E[2] == pytest.approx(expected, rel=1e-12)


def test_z_dipole_symmetry(rng):
    aut = single()
    for _ in range(10):
        t, p, R = rng.uniform(0.1, 1.4), rng.uniform(0, 2 * np.pi), rng.uniform(0.1, 2.0)
        pt = R * np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])
        mirror = pt * np.array([1, 1, -1])
        for kind in (ELECTRIC, MAGNETIC):
            a = single(kind)
            assert np.linalg.norm(dipole_field(a, 0, 1, pt)) == pytest.approx(
                np.linalg.norm(dipole_field(a, 0, 1, mirror)), rel=1e-12)


@pytest.mark.parametrize("kind,name", [(ELECTRIC, "electric"), (MAGNETIC, "magnetic")])
def test_field_matches_textbook_closed_form(rng, kind, name):
    for _ in range(20):
        pos, ori = rng.uniform(-0.1, 0.1, 3), random_unit(rng)
        pt = rng.uniform(-1, 1, 3) * rng.uniform(0.02, 2.0)
        E = dipole_field(single(kind, ori, pos), 0, 1.0, pt)
        ref = textbook_dipole_field(name, pos, ori, K, pt)
        np.testing.assert_allclose(E, ref, rtol=1e-10, atol=1e-12 * np.linalg.norm(ref))


def test_far_field_truncation_at_kr_100():
    R = 100 / K
    pt = R * np.array([1.0, 0.0, 0.0])  # broadside of a z dipole
    for kind in (ELECTRIC, MAGNETIC):
        E = dipole_field(single(kind), 0, 1.0, pt)
        rad = -1j * K / (4 * np.pi) * np.exp(-1j * K * R) / R
        u = np.array([0, 0, 1.0])
        rhat = pt / R
        vec = (u - (u @ rhat) * rhat) if kind == ELECTRIC else np.cross(u, rhat)
        far = rad * vec
        assert np.linalg.norm(E - far) / np.linalg.norm(far) < 0.015


def test_coincident_point_raises():
    with pytest.raises(GeometryError):
        dipole_field(single(), 0, 1.0, [0, 0, 0])


def test_field_linear_in_coefficient(rng):
    aut = single(MAGNETIC, random_unit(rng))
    pt = [0.3, -0.2, 0.5]
    np.testing.assert_allclose(dipole_field(aut, 0, 2 - 3j, pt), (2 - 3j) * dipole_field(aut, 0, 1, pt))


# -- layout, sampling and operators -----------------------------------------------------------------

def test_box_layout_tangential_on_faces(rng):
    pos, ori, kinds = box_dipole_layout(0.2, 3, False, jitter=0.004, rng=rng)
    assert pos.shape == (6 * 9 * 4, 3)
    on_face = np.isclose(np.abs(pos), 0.1)
    assert np.all(on_face.sum(axis=1) >= 1)
    assert np.all(np.abs(pos) <= 0.1 + 1e-15)
    for p, u in zip(pos, ori):
        normal_axes = np.flatnonzero(np.isclose(np.abs(p), 0.1))
        assert np.all(np.abs(u[normal_axes]) < 1e-15)
    assert np.sum(kinds == ELECTRIC) == np.sum(kinds == MAGNETIC)


def test_opposite_faces_distinct():
    pos, _, _ = box_dipole_layout(0.3, 2, True)
    assert len({tuple(np.round(p, 12)) for p in pos}) == pos.shape[0] // 4  # four dipoles per site


def test_probe_array_requires_origin():
    with pytest.raises(ValueError):
        ProbeArrayGeometry(np.array([[0.1, 0.0]]))
    arr = ProbeArrayGeometry.l_array()
    np.testing.assert_array_equal(arr.element_offsets, [[0, 0], [1, 0], [0, 0.8]])


def test_sampling_plan_random():
    plan = SamplingPlan.random(50, 1.5, 3)
    np.testing.assert_allclose(np.linalg.norm(plan.sample_directions, axis=1), 1.0)
    np.testing.assert_array_equal(plan.polarization[:4], [THETA, PHI, THETA, PHI])
    with pytest.raises(ValueError):
        SamplingPlan(1.0, np.array([[1.0, 1.0, 0.0]]), np.array([0]))


def test_single_dipole_single_sample_operator():
    aut = single(ELECTRIC, (1, 0, 0))
    d = np.array([[0.0, 0.6, 0.8]])
    for pol in (THETA, PHI):
        plan = SamplingPlan(1.5, d, np.array([pol]))
        M = build_forward_operator(aut, plan, ProbeArrayGeometry.l_array(), 0)
        th, ph = spherical_frame(d)
        e = th[0] if pol == THETA else ph[0]
        assert M.shape == (1, 1)
        assert M[0, 0] == pytest.approx(dipole_field(aut, 0, 1.0, 1.5 * d[0]) @ e, rel=1e-13)


def test_operator_superposition(rng):
    aut = box_dipole_aut(0.2, F, 2, True).with_coefficients(crandn(rng, 6 * 5 * 4))
    plan = SamplingPlan.random(30, 1.5, 4)
    M = build_forward_operator(aut, plan, ProbeArrayGeometry.l_array(), 0)
    th, ph = spherical_frame(plan.sample_directions)
    E = field_at(aut, probe_positions(plan, ProbeArrayGeometry.l_array(), 0))
    pol = np.where((plan.polarization == THETA)[:, None], th, ph)
    np.testing.assert_allclose(M @ aut.coefficients, np.einsum("pi,pi->p", E, pol), rtol=1e-12)


def test_operator_array_elements_pointwise_oracle(rng):
    aut = box_dipole_aut(0.2, F, 2, False)
    plan = SamplingPlan.random(12, 1.5, 8)
    arr = ProbeArrayGeometry.l_array()
    for e, (du, dv) in enumerate([(0, 0), (1, 0), (0, 0.8)]):
        M = build_forward_operator(aut, plan, arr, e)
        for k in range(plan.count):
            x, y, z = plan.sample_directions[k]
            t, p = np.arccos(z), np.arctan2(y, x)
            t_hat = np.array([np.cos(t) * np.cos(p), np.cos(t) * np.sin(p), -np.sin(t)])
            p_hat = np.array([-np.sin(p), np.cos(p), 0.0])
            point = 1.5 * plan.sample_directions[k] + du * t_hat + dv * p_hat
            pol = t_hat if plan.polarization[k] == THETA else p_hat
            for d in range(aut.n):
                kind = "electric" if aut.kinds[d] == ELECTRIC else "magnetic"
                ref = textbook_dipole_field(kind, aut.positions[d], aut.orientations[d], K, point) @ pol
                assert M[k, d] == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_probe_inside_box_rejected():
    aut = box_dipole_aut(0.2, F, 1, False)
    plan = SamplingPlan(0.05, np.array([[0.0, 0.0, 1.0]]), np.array([THETA]))
    with pytest.raises(GeometryError):
        build_forward_operator(aut, plan, ProbeArrayGeometry.l_array(), 0)


def test_default_scenario_conditioning():
    inst = build_antenna_instance(AntennaParams(), 0)
    assert np.isfinite(inst.condition) and inst.condition < 1e12
    assert inst.condition == pytest.approx(condition_number(inst.A))


def test_scenario_reference_differs_from_basis():
    inst = build_antenna_instance(AntennaParams(samples_per_set=60), 1)
    assert inst.reference.n > 2 * inst.basis.n
    assert np.all(np.abs(inst.reference.positions) <= inst.basis.box_half[0])
    assert inst.structure.q == 60 and inst.A.shape[0] == 180


def test_scenario_rejects_bad_params():
    with pytest.raises(ValueError):
        build_antenna_instance(AntennaParams(generator_box_size=0.3), 0)
    with pytest.raises(ValueError):
        build_antenna_instance(AntennaParams(sphere_radius=0.1), 0)


# -- noise ------------------------------------------------------------------------------------------

def test_noise_infinite_snr_unchanged(rng):
    b = crandn(rng, 10)
    np.testing.assert_array_equal(add_noise(b, np.inf, 1), b)


def test_noise_scales_with_signal(rng):
    b = crandn(rng, 50)
    n1 = add_noise(b, 40, 7) - b
    n10 = add_noise(10 * b, 40, 7) - 10 * b
    np.testing.assert_allclose(n10, 10 * n1, rtol=1e-12)


def test_noise_level_statistics(rng):
    b = crandn(rng, 100_000)
    noise = add_noise(b, 60.0, 11) - b
    snr = 20 * np.log10(np.max(np.abs(b)) / np.sqrt(np.mean(np.abs(noise) ** 2)))
    assert 59.5 <= snr <= 60.5
    assert np.var(noise.real) == pytest.approx(np.var(noise.imag), rel=0.05)


def test_noise_deterministic(rng):
    b = crandn(rng, 20)
    np.testing.assert_array_equal(add_noise(b, 30, 4), add_noise(b, 30, 4))


def test_noise_zero_signal_rejected():
    with pytest.raises(ValueError):
        add_noise(np.zeros(3), 60, 0)


# -- far field ------------------------------------------------------------------------------------------

def test_far_field_z_dipole_sin_pattern():
    theta = np.linspace(-180, 180, 73)
    for phi in (0.0, 37.0, 90.0):
        p = far_field_cut([1.0], single(), phi, theta)
        np.testing.assert_allclose(np.abs(p), K / (4 * np.pi) * np.abs(np.sin(np.deg2rad(theta))), atol=1e-14)


def test_far_field_zero_coefficients():
    aut = box_dipole_aut(0.2, F, 2)
    np.testing.assert_array_equal(far_field_cut(np.zeros(aut.n), aut, 90, np.arange(-180, 181, 5.0)), 0)


def test_far_field_limit_of_near_field(rng):
    aut = box_dipole_aut(0.02, F, 1, False).with_coefficients(crandn(rng, 24))
    theta = np.arange(-170, 171, 10.0)
    R = 1e4 / K
    phi = np.deg2rad(90.0)
    t = np.deg2rad(theta)
    r = np.stack([np.sin(t) * np.cos(phi), np.sin(t) * np.sin(phi), np.cos(t)], axis=1)
    E = field_at(aut, R * r) * (R / np.exp(-1j * K * R))
    t_hat = np.stack([np.cos(t) * np.cos(phi), np.cos(t) * np.sin(phi), -np.sin(t)], axis=1)
    p_hat = np.array([-np.sin(phi), np.cos(phi), 0.0])
    near = np.stack([np.einsum("ti,ti->t", E, t_hat), E @ p_hat], axis=1)
    far = far_field_components(aut.coefficients, aut, 90.0, theta)
    assert np.linalg.norm(near - far) / np.linalg.norm(far) < 1e-3


def test_far_field_component_selection(rng):
    aut = single(ELECTRIC, (0, 1, 0))
    theta = np.arange(-90, 91, 10.0)
    comps = far_field_components([1.0], aut, 0.0, theta)
    np.testing.assert_array_equal(far_field_cut([1.0], aut, 0.0, theta), comps[:, PHI])
    np.testing.assert_array_equal(far_field_cut([1.0], aut, 0.0, theta, THETA), comps[:, THETA])
    with pytest.raises(ValueError):
        far_field_cut([1.0], aut, 0.0, [190.0])
