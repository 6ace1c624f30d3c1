"""Antenna benchmark scenario: reference AUT, inversion basis and probe-array data.

The reference AUT is a finer set of jittered tangential dipoles on a smaller
box nested inside the inversion box. Its top face carries a Huygens-type
aperture distribution (cosine-tapered, co-phased electric and magnetic
currents) that radiates a main beam towards +z; the remaining faces carry
weak random currents. The inversion basis is a regular dipole grid on the
outer box, so data generation and inversion use different sources.

Samples are nominal directions on a sphere; every probe element of an
L-shaped array records one sample per nominal direction. Each measurement
set is the data of one element.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coherence import CoherenceStructure
from .models import (
    ELECTRIC,
    MAGNETIC,
    DipoleAUT,
    ProbeArrayGeometry,
    SamplingPlan,
    add_noise,
    box_dipole_aut,
    box_dipole_layout,
    build_forward_operator,
)
from .numerics import condition_number

MAX_CONDITION = 1e12


@dataclass
class AntennaParams:
    frequency: float = 2.6e9
    box_size: float = 0.2
    basis_grid: int = 4
    basis_center: bool = False
    generator_box_size: float = 0.12
    generator_grid: int = 6
    generator_jitter: float = 0.003
    side_level_db: float = -20.0
    sphere_radius: float = 1.5
    samples_per_set: int = 600
    probe_offsets: list = field(default_factory=lambda: [[0.0, 0.0], [1.0, 0.0], [0.0, 0.8]])
    coherent_channels: int = 3
    snr_db: float = 60.0
    ff_phi_deg: float = 90.0
    ff_theta_step_deg: float = 1.0

    def validate(self) -> None:
        if self.frequency <= 0 or self.box_size <= 0 or self.generator_box_size <= 0:
            raise ValueError("frequency and box sizes must be positive")
        if self.generator_box_size >= self.box_size:
            raise ValueError("the reference AUT box must fit inside the inversion box")
        if self.basis_grid < 1 or self.generator_grid < 1 or self.samples_per_set < 1:
            raise ValueError("grids and sample counts must be >= 1")
        if self.coherent_channels not in (2, 3):
            raise ValueError("coherent_channels must be 2 or 3")
        if len(self.probe_offsets) != 3:
            raise ValueError("the probe array must have three elements")
        if self.sphere_radius <= np.sqrt(3.0) * self.box_size / 2.0:
            raise ValueError("measurement sphere must enclose the AUT box")


def huygens_excitation(aut_positions, orientations, kinds, half, rng, side_level_db):
    """Aperture currents on the +z face, weak random currents elsewhere."""
    c = np.zeros(len(aut_positions), dtype=np.complex128)
    top = np.isclose(aut_positions[:, 2], half)
    taper = np.cos(np.pi * aut_positions[:, 0] / (2.0 * half))
    ey = (kinds == ELECTRIC) & np.isclose(orientations[:, 1], 1.0)
    mx = (kinds == MAGNETIC) & np.isclose(orientations[:, 0], 1.0)
    c[top & ey] = -taper[top & ey]
    c[top & mx] = taper[top & mx]
    side = ~top
    amp = 10.0 ** (side_level_db / 20.0)
    c[side] += amp * (rng.standard_normal(side.sum()) + 1j * rng.standard_normal(side.sum())) / np.sqrt(2.0)
    return c


@dataclass(frozen=True, eq=False)
class AntennaInstance:
    """One realisation of the benchmark.

    ``blocks[i]`` is the inversion operator of measurement set ``i``;
    ``b_true`` the stacked noiseless data of the reference AUT and
    ``b_measured`` the same with noise added.
    """

    basis: DipoleAUT
    reference: DipoleAUT
    blocks: list
    b_true: np.ndarray
    b_measured: np.ndarray
    structure: CoherenceStructure
    pairs: list
    condition: float

    @property
    def A(self) -> np.ndarray:
        return np.vstack(self.blocks)

    def split(self, b):
        edges = np.cumsum([blk.shape[0] for blk in self.blocks])[:-1]
        return np.split(np.asarray(b), edges)


def build_antenna_instance(params: AntennaParams, seed: int) -> AntennaInstance:
    """Generate reference AUT, sampling, operators and noisy data for one seed."""
    params.validate()
    ss = np.random.SeedSequence(seed)
    gen_seed, plan_seed_a, plan_seed_b, noise_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(4))

    basis = box_dipole_aut(params.box_size, params.frequency, params.basis_grid, params.basis_center)
    rng = np.random.default_rng(gen_seed)
    pos, ori, kinds = box_dipole_layout(params.generator_box_size, params.generator_grid,
                                        False, params.generator_jitter, rng)
    half = params.generator_box_size / 2.0
    coef = huygens_excitation(pos, ori, kinds, half, rng, params.side_level_db)
    reference = DipoleAUT(pos, ori, kinds, coef, params.frequency, np.full(3, half))

    array = ProbeArrayGeometry(np.asarray(params.probe_offsets, dtype=float))
    M = params.samples_per_set
    plan_a = SamplingPlan.random(M, params.sphere_radius, plan_seed_a)
    if params.coherent_channels == 3:
        plans = [plan_a, plan_a, plan_a]
        structure = CoherenceStructure.stacked_sets(0, M, channels=3)
        pairs = [(0, 1), (0, 2)]
    else:
        plan_b = SamplingPlan.random(M, params.sphere_radius, plan_seed_b)
        plans = [plan_a, plan_b, plan_b]
        structure = CoherenceStructure.stacked_sets(M, M, channels=2)
        pairs = [(1, 2)]

    blocks = [build_forward_operator(basis, plans[e], array, e) for e in range(3)]
    b_true = np.concatenate(
        [build_forward_operator(reference, plans[e], array, e) @ coef for e in range(3)]
    )
    cond = condition_number(np.vstack(blocks))
    if not cond < MAX_CONDITION:
        raise ValueError(f"forward operator numerically rank-deficient (condition {cond:.3g})")
    b_measured = add_noise(b_true, params.snr_db, noise_seed)
    return AntennaInstance(basis, reference, blocks, b_true, b_measured, structure, pairs, cond)
