"""Synthetic measurement models.

Two families:

* complex-Gaussian random ensembles (``A`` and ``z`` i.i.d. CN(0, 1));
* a dipole antenna model: Hertzian (electric) and Fitzgerald (magnetic)
  dipoles tangential on the faces of a box, observed on a sphere by a rigid
  array of ideal probes displaced in the local tangent plane.

Time convention is ``exp(+1j*w*t)``; propagators are ``exp(-1j*k*R)``. A unit
coefficient of either dipole kind yields the far-field amplitude
``k/(4 pi) * exp(-1j*k*R)/R`` (electric moments are expressed in units of
``eta * I * l`` so that both kinds share one scale).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

C0 = 299_792_458.0

ELECTRIC = 0
MAGNETIC = 1
THETA = 0
PHI = 1


class GeometryError(ValueError):
    """Observation point coincides with a source or lies inside the AUT box."""


# -- Gaussian ensembles ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianInstance:
    A: np.ndarray
    z_true: np.ndarray
    b_true: np.ndarray
    seed: int


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples (variance 1/2 per real part)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_gaussian_instance(n: int, m: int, seed: int) -> GaussianInstance:
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    rng = np.random.default_rng(seed)
    A = complex_normal(rng, (m, n))
    z = complex_normal(rng, n)
    return GaussianInstance(A, z, A @ z, seed)


# -- dipole sources ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DipoleAUT:
    """A set of elementary dipoles with their excitation coefficients.

    Attributes:
        positions: (N, 3) metres.
        orientations: (N, 3) unit vectors.
        kinds: (N,) ``ELECTRIC`` or ``MAGNETIC``.
        coefficients: (N,) complex excitations.
        frequency: Hz.
        box_half: half side lengths of the enclosing box the dipoles sit on.
    """

    positions: np.ndarray
    orientations: np.ndarray
    kinds: np.ndarray
    coefficients: np.ndarray
    frequency: float
    box_half: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        ori = np.asarray(self.orientations, dtype=float).reshape(-1, 3)
        kinds = np.asarray(self.kinds, dtype=int).ravel()
        coef = np.asarray(self.coefficients, dtype=np.complex128).ravel()
        n = pos.shape[0]
        if ori.shape[0] != n or kinds.shape[0] != n or coef.shape[0] != n:
            raise ValueError("positions, orientations, kinds and coefficients must have equal length")
        if not np.allclose(np.linalg.norm(ori, axis=1), 1.0, atol=1e-12):
            raise ValueError("dipole orientations must be unit vectors")
        if not np.all(np.isin(kinds, (ELECTRIC, MAGNETIC))):
            raise ValueError("unknown dipole kind")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "orientations", ori)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "box_half", np.asarray(self.box_half, dtype=float).reshape(3))

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi * self.frequency / C0

    def with_coefficients(self, coefficients) -> "DipoleAUT":
        return DipoleAUT(self.positions, self.orientations, self.kinds, coefficients,
                         self.frequency, self.box_half)


def _face_frames(half: np.ndarray):
    """(center, normal, tangent1, tangent2, extent1, extent2) for the six box faces."""
    faces = []
    for axis in range(3):
        t1, t2 = [a for a in range(3) if a != axis]
        for sign in (1.0, -1.0):
            normal = np.zeros(3)
            normal[axis] = sign
            e1 = np.zeros(3)
            e1[t1] = 1.0
            e2 = np.zeros(3)
            e2[t2] = 1.0
            faces.append((half[axis] * normal, normal, e1, e2, half[t1], half[t2]))
    return faces


def _face_points(grid: int, center_point: bool) -> list[tuple[float, float]]:
    """Normalised in-face coordinates in (-1, 1): a regular grid, optionally plus centre."""
    ticks = (2.0 * np.arange(grid) + 1.0) / grid - 1.0
    pts = [(u, v) for u in ticks for v in ticks]
    if center_point and grid % 2 == 0:
        pts.append((0.0, 0.0))
    return pts


def box_dipole_layout(
    box_size: float,
    grid: int = 2,
    center_point: bool = True,
    jitter: float = 0.0,
    rng: np.random.Generator | None = None,
):
    """Tangential dipole positions/orientations/kinds on the faces of a cube.

    Every face carries ``grid x grid`` sites (plus the face centre when
    ``center_point`` and ``grid`` is even); every site carries two orthogonal
    tangential orientations for each of the two dipole kinds. Sites may be
    jittered within the face by up to ``jitter`` metres per coordinate.

    Returns:
        ``(positions, orientations, kinds)`` arrays.
    """
    if jitter > 0.0 and rng is None:
        rng = np.random.default_rng()
    half = np.full(3, box_size / 2.0)
    pos, ori, kinds = [], [], []
    for center, _normal, e1, e2, h1, h2 in _face_frames(half):
        for u, v in _face_points(grid, center_point):
            p = center + u * h1 * e1 + v * h2 * e2
            if jitter > 0.0:
                du, dv = rng.uniform(-jitter, jitter, size=2)
                p = p + np.clip(du, -h1 - u * h1, h1 - u * h1) * e1
                p = p + np.clip(dv, -h2 - v * h2, h2 - v * h2) * e2
            for kind in (ELECTRIC, MAGNETIC):
                for t in (e1, e2):
                    pos.append(p)
                    ori.append(t)
                    kinds.append(kind)
    return np.array(pos), np.array(ori), np.array(kinds)


def box_dipole_aut(box_size: float, frequency: float, grid: int = 2, center_point: bool = True,
                   coefficients=None, jitter: float = 0.0, seed: int | None = None) -> DipoleAUT:
    """Dipoles tangential on a cube; coefficients default to zero."""
    rng = np.random.default_rng(seed)
    pos, ori, kinds = box_dipole_layout(box_size, grid, center_point, jitter, rng)
    if coefficients is None:
        coefficients = np.zeros(pos.shape[0], dtype=np.complex128)
    return DipoleAUT(pos, ori, kinds, coefficients, frequency, np.full(3, box_size / 2.0))


# -- fields ------------------------------------------------------------------------------

def _unit_fields(positions, orientations, kinds, k, points):
    """Electric field of unit-coefficient dipoles at observation points.

    Returns an array of shape (P, N, 3): field at point p due to dipole d.
    """
    R = points[:, None, :] - positions[None, :, :]
    dist = np.linalg.norm(R, axis=-1)
    if np.any(dist == 0.0):
        raise GeometryError("observation point coincides with a dipole")
    rhat = R / dist[..., None]
    kr = k * dist
    inv = 1.0 / (1j * kr)
    prefactor = (-1j * k / (4.0 * np.pi)) * np.exp(-1j * kr) / dist

    u = np.broadcast_to(orientations[None, :, :], R.shape)
    u_dot_r = np.einsum("pdi,pdi->pd", u, rhat)
    transverse = u - u_dot_r[..., None] * rhat
    # electric: transverse (1 + 1/(jkR) + 1/(jkR)^2), radial -2 (1/(jkR) + 1/(jkR)^2)
    e_trans = (1.0 + inv + inv * inv)[..., None] * transverse
    e_rad = (-2.0 * (inv + inv * inv) * u_dot_r)[..., None] * rhat
    electric = e_trans + e_rad
    # magnetic current element: (1 + 1/(jkR)) (u x r)
    magnetic = (1.0 + inv)[..., None] * np.cross(u, rhat)
    is_mag = (kinds == MAGNETIC)[None, :, None]
    return prefactor[..., None] * np.where(is_mag, magnetic, electric)


def dipole_field(aut: DipoleAUT, index: int, coefficient: complex, point) -> np.ndarray:
    """Complex E-field 3-vector of dipole ``index`` of ``aut`` at ``point``."""
    pt = np.asarray(point, dtype=float).reshape(1, 3)
    E = _unit_fields(aut.positions[index:index + 1], aut.orientations[index:index + 1],
                     aut.kinds[index:index + 1], aut.wavenumber, pt)
    return coefficient * E[0, 0]


def field_at(aut: DipoleAUT, points) -> np.ndarray:
    """Superposed E-field (P, 3) of all dipoles of ``aut``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    E = _unit_fields(aut.positions, aut.orientations, aut.kinds, aut.wavenumber, pts)
    return np.einsum("pdi,d->pi", E, aut.coefficients)


# -- sampling and probes -----------------------------------------------------------------

def spherical_frame(directions):
    """Unit vectors (theta_hat, phi_hat) for unit direction vectors (N, 3).

    At the poles phi is taken as 0.
    """
    d = np.asarray(directions, dtype=float).reshape(-1, 3)
    theta = np.arccos(np.clip(d[:, 2], -1.0, 1.0))
    phi = np.arctan2(d[:, 1], d[:, 0])
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    theta_hat = np.stack([ct * cp, ct * sp, -st], axis=1)
    phi_hat = np.stack([-sp, cp, np.zeros_like(sp)], axis=1)
    return theta_hat, phi_hat


@dataclass(frozen=True, eq=False)
class ProbeArrayGeometry:
    """Offsets (metres) of rigidly mounted probes in the local (theta, phi) frame."""

    element_offsets: np.ndarray

    def __post_init__(self):
        off = np.asarray(self.element_offsets, dtype=float).reshape(-1, 2)
        if off.shape[0] < 1 or np.any(off[0] != 0.0):
            raise ValueError("first probe element must sit at offset (0, 0)")
        object.__setattr__(self, "element_offsets", off)

    @classmethod
    def l_array(cls, long_arm: float = 1.0, short_arm: float = 0.8) -> "ProbeArrayGeometry":
        """Three probes at (0, 0), (long_arm, 0) and (0, short_arm)."""
        return cls(np.array([[0.0, 0.0], [long_arm, 0.0], [0.0, short_arm]]))

    @property
    def count(self) -> int:
        return self.element_offsets.shape[0]


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    """Nominal probe positions on a sphere and the polarisation measured at each.

    ``polarization[k]`` is ``THETA`` or ``PHI``: the probe picks up the field
    component along the local theta_hat or phi_hat of the nominal position.
    """

    sphere_radius: float
    sample_directions: np.ndarray
    polarization: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        d = np.asarray(self.sample_directions, dtype=float).reshape(-1, 3)
        if not np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12):
            raise ValueError("sample directions must be unit vectors")
        pol = np.asarray(self.polarization, dtype=int).ravel()
        if pol.shape[0] != d.shape[0] or not np.all(np.isin(pol, (THETA, PHI))):
            raise ValueError("one THETA/PHI polarisation flag per sample required")
        if self.sphere_radius <= 0:
            raise ValueError("sphere radius must be positive")
        object.__setattr__(self, "sample_directions", d)
        object.__setattr__(self, "polarization", pol)

    @property
    def count(self) -> int:
        return self.sample_directions.shape[0]

    @classmethod
    def random(cls, count: int, radius: float, seed: int) -> "SamplingPlan":
        """Uniformly random directions on the sphere, polarisations alternating theta/phi."""
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((count, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return cls(radius, v, np.arange(count) % 2, seed)


def probe_positions(plan: SamplingPlan, array: ProbeArrayGeometry, element_index: int) -> np.ndarray:
    """Positions (N, 3) of one array element for every nominal sample."""
    theta_hat, phi_hat = spherical_frame(plan.sample_directions)
    du, dv = array.element_offsets[element_index]
    return plan.sphere_radius * plan.sample_directions + du * theta_hat + dv * phi_hat


def build_forward_operator(
    aut: DipoleAUT,
    plan: SamplingPlan,
    array: ProbeArrayGeometry,
    element_index: int,
) -> np.ndarray:
    """Measurement operator (samples x dipoles) for one probe element.

    Row ``k`` holds the polarisation component (in the nominal frame of
    sample ``k``) of each unit-coefficient dipole field at the displaced
    probe position.
    """
    points = probe_positions(plan, array, element_index)
    if np.any(np.all(np.abs(points) <= aut.box_half[None, :], axis=1)):
        raise GeometryError("a probe position lies inside the AUT box")
    theta_hat, phi_hat = spherical_frame(plan.sample_directions)
    pol_vec = np.where((plan.polarization == THETA)[:, None], theta_hat, phi_hat)
    E = _unit_fields(aut.positions, aut.orientations, aut.kinds, aut.wavenumber, points)
    return np.einsum("pdi,pi->pd", E, pol_vec)


def add_noise(b, snr_db: float, seed: int) -> np.ndarray:
    """Add complex white Gaussian noise at ``snr_db`` relative to ``max|b|``.

    The per-sample standard deviation is ``max|b| * 10**(-snr_db/20)``
    (split equally between real and imaginary parts). ``snr_db = inf``
    returns an unchanged copy.
    """
    b = np.asarray(b, dtype=np.complex128)
    if np.isposinf(snr_db):
        return b.copy()
    peak = float(np.max(np.abs(b)))
    if peak == 0.0:
        raise ValueError("cannot reference noise to an all-zero signal")
    sigma = peak * 10.0 ** (-snr_db / 20.0)
    rng = np.random.default_rng(seed)
    return b + sigma * (rng.standard_normal(b.shape) + 1j * rng.standard_normal(b.shape)) / np.sqrt(2.0)


# -- far field ---------------------------------------------------------------------------

def far_field_components(coefficients, aut: DipoleAUT, phi_deg: float, theta_deg) -> np.ndarray:
    """Radiation-zone pattern along a great-circle cut, shape (T, 2).

    Signed ``theta`` parametrises the cut plane at azimuth ``phi_deg``;
    columns are the components along ``d r/d theta`` and ``phi_hat`` with the
    ``exp(-1j k R)/R`` factor removed.
    """
    theta_deg = np.asarray(theta_deg, dtype=float).ravel()
    if np.any(np.abs(theta_deg) > 180.0):
        raise ValueError("theta grid must lie within [-180, 180] degrees")
    theta = np.deg2rad(theta_deg)
    phi = np.deg2rad(phi_deg)
    r = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1)
    t_hat = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)], axis=1)
    p_hat = np.broadcast_to(np.array([-np.sin(phi), np.cos(phi), 0.0]), r.shape)

    k = aut.wavenumber
    c = np.asarray(coefficients, dtype=np.complex128).ravel()
    if c.shape[0] != aut.n:
        raise ValueError(f"{c.shape[0]} coefficients for {aut.n} dipoles")
    u = aut.orientations
    phase = np.exp(1j * k * (r @ aut.positions.T))  # (T, N)
    u_dot_r = r @ u.T
    electric = u[None, :, :] - u_dot_r[..., None] * r[:, None, :]
    magnetic = np.cross(u[None, :, :], r[:, None, :])
    vec = np.where((aut.kinds == MAGNETIC)[None, :, None], magnetic, electric)
    E = (-1j * k / (4.0 * np.pi)) * np.einsum("tdi,td,d->ti", vec, phase, c)
    return np.stack([np.einsum("ti,ti->t", E, t_hat), np.einsum("ti,ti->t", E, p_hat)], axis=1)


def far_field_cut(coefficients, aut: DipoleAUT, phi_deg: float, theta_deg,
                  component: int | None = None) -> np.ndarray:
    """One far-field component along a cut.

    Args:
        component: ``THETA`` or ``PHI``; by default the component with the
            larger peak is taken. Pass the reference's choice when comparing
            reconstructions so both curves show the same polarisation.
    """
    comps = far_field_components(coefficients, aut, phi_deg, theta_deg)
    if component is None:
        component = dominant_component(comps)
    if component not in (THETA, PHI):
        raise ValueError("component must be THETA (0) or PHI (1)")
    return comps[:, component]


def dominant_component(components) -> int:
    """Index of the column of a (T, 2) component array with the larger peak."""
    return int(np.argmax(np.abs(np.asarray(components)).max(axis=0)))
