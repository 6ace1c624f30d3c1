"""Coherence bookkeeping for partially coherent measurements.

A measurement vector of length ``m`` is partitioned into *groups* of samples
that were acquired coherently (e.g. simultaneously by the channels of one
receiver). Inside a group only phase differences are known, taken relative
to the first member of the group, its *anchor*. A fully incoherent sample is
a singleton group.

This module builds the matrices of the linear formulation

    (A P1 - B C P2) [z; psi] = 0,

the magnitude-augmented system of the interferometric formulation, and the
four-magnitude phase-difference formula.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .numerics import DimensionError, as_matrix, as_vector


class CoherenceError(ValueError):
    """Inconsistent coherence structure or phase data."""


class IndeterminateReferenceError(CoherenceError):
    """A multi-member group has a zero-magnitude anchor, so phases are undefined."""


def wrap_phase(phi):
    """Wrap angles to the half-open interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2.0 * np.pi)


@dataclass(frozen=True)
class CoherenceStructure:
    """Partition of measurement indices ``0..m-1`` into coherent groups.

    The first index listed in each group is its anchor. ``groups`` is stored
    as a tuple of tuples so instances are hashable and immutable.
    """

    groups: tuple[tuple[int, ...], ...]
    m: int

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if self.m < 1:
            raise CoherenceError("m must be >= 1")
        seen = np.zeros(self.m, dtype=bool)
        for gi, g in enumerate(groups):
            if not g:
                raise CoherenceError(f"group {gi} is empty")
            for k in g:
                if k < 0 or k >= self.m:
                    raise CoherenceError(f"group {gi}: index {k} outside 0..{self.m - 1}")
                if seen[k]:
                    raise CoherenceError(f"index {k} appears in more than one group")
                seen[k] = True
        if not seen.all():
            missing = np.flatnonzero(~seen)[:5].tolist()
            raise CoherenceError(f"indices not covered by any group, e.g. {missing}")

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[int]], m: int | None = None) -> "CoherenceStructure":
        """Build from a list of index lists; ``m`` defaults to the index count."""
        if m is None:
            m = sum(len(g) for g in groups)
        return cls(tuple(tuple(g) for g in groups), int(m))

    @classmethod
    def incoherent(cls, m: int) -> "CoherenceStructure":
        return cls(tuple((k,) for k in range(m)), m)

    @classmethod
    def stacked_sets(cls, m1: int, m2: int, channels: int = 2) -> "CoherenceStructure":
        """Rows laid out as one incoherent set of ``m1`` samples followed by
        ``channels`` coherent sets of ``m2`` samples each.

        Sample ``k`` of every coherent set forms one group; its anchor is the
        sample from the first coherent set. This is the layout of the stacked
        vector ``[b1; b2; b3]`` with ``b2``/``b3`` acquired simultaneously.
        """
        if m1 < 0 or m2 < 0 or channels < 1:
            raise CoherenceError("set sizes must be nonnegative, channels >= 1")
        groups = [(k,) for k in range(m1)]
        groups += [tuple(m1 + c * m2 + k for c in range(channels)) for k in range(m2)]
        return cls(tuple(groups), m1 + channels * m2)

    @property
    def q(self) -> int:
        """Number of groups, i.e. of unknown group phases."""
        return len(self.groups)

    @property
    def anchors(self) -> np.ndarray:
        return np.array([g[0] for g in self.groups], dtype=int)

    @property
    def group_of(self) -> np.ndarray:
        """Group index of every measurement."""
        out = np.empty(self.m, dtype=int)
        for gi, g in enumerate(self.groups):
            out[list(g)] = gi
        return out

    @property
    def anchor_of(self) -> np.ndarray:
        """Anchor measurement index of every measurement."""
        return self.anchors[self.group_of]

    def to_lists(self) -> list[list[int]]:
        return [list(g) for g in self.groups]


@dataclass(frozen=True, eq=False)
class MagnitudePhaseData:
    """What a multi-channel receiver reports: ``|b|`` and in-group phase differences.

    Attributes:
        magnitudes: length-m nonnegative array.
        phase_diffs: length-m array of phases relative to each sample's group
            anchor, wrapped to (-pi, pi]; exactly 0 at anchors.
    """

    magnitudes: np.ndarray
    phase_diffs: np.ndarray

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=float)
        diffs = np.asarray(self.phase_diffs, dtype=float)
        if mags.ndim != 1 or diffs.shape != mags.shape:
            raise CoherenceError(f"magnitudes {mags.shape} and phase_diffs {diffs.shape} differ")
        if not (np.all(np.isfinite(mags)) and np.all(np.isfinite(diffs))):
            raise CoherenceError("non-finite magnitudes or phase differences")
        if np.any(mags < 0):
            raise CoherenceError("magnitudes must be nonnegative")
        mags.flags.writeable = False
        diffs.flags.writeable = False
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "phase_diffs", diffs)

    @property
    def m(self) -> int:
        return self.magnitudes.shape[0]

    def check(self, structure: CoherenceStructure) -> None:
        """Raise :class:`CoherenceError` unless consistent with ``structure``."""
        if structure.m != self.m:
            raise CoherenceError(f"data has {self.m} samples, structure has {structure.m}")
        if np.any(self.phase_diffs[structure.anchors] != 0.0):
            raise CoherenceError("anchor phase differences must be exactly 0")


class SelectorPair(NamedTuple):
    P1: np.ndarray
    P2: np.ndarray


def build_B(data: MagnitudePhaseData) -> np.ndarray:
    """Diagonal matrix of measured magnitudes."""
    return np.diag(data.magnitudes.astype(np.complex128))


def build_C(structure: CoherenceStructure, data: MagnitudePhaseData) -> np.ndarray:
    """m x q phase-relation matrix.

    ``C[k, g] = exp(1j * phase_diffs[k])`` when sample ``k`` belongs to group
    ``g`` and zero otherwise, so each row has exactly one unit-modulus entry.
    """
    data.check(structure)
    C = np.zeros((structure.m, structure.q), dtype=np.complex128)
    C[np.arange(structure.m), structure.group_of] = np.exp(1j * data.phase_diffs)
    return C


def build_BC(structure: CoherenceStructure, data: MagnitudePhaseData) -> np.ndarray:
    """The product ``B @ C`` formed directly from its one-nonzero-per-row layout."""
    data.check(structure)
    BC = np.zeros((structure.m, structure.q), dtype=np.complex128)
    BC[np.arange(structure.m), structure.group_of] = data.magnitudes * np.exp(1j * data.phase_diffs)
    return BC


def build_selectors(n: int, q: int) -> SelectorPair:
    """``P1 = [I 0]`` (n rows) and ``P2 = [0 I]`` (q rows) over ``n + q`` unknowns."""
    if n < 1 or q < 1:
        raise ValueError("n and q must be >= 1")
    eye = np.eye(n + q)
    return SelectorPair(eye[:n], eye[n:])


def interferometric_phase(o1, o2, o3, o4):
    """Phase of ``a1 * conj(a2)`` from four intensity readings.

    With ``o1 = |a1|^2``, ``o2 = |a2|^2``, ``o3 = |a1 + a2|^2`` and
    ``o4 = |a1 + 1j*a2|^2`` one has ``o3 - o1 - o2 = 2 Re(a1 conj(a2))`` and
    ``o4 - o1 - o2 = 2 Im(a1 conj(a2))``, so the two-argument arctangent
    recovers the angle with the correct quadrant.

    Accepts scalars or arrays (broadcast elementwise).

    Returns:
        ``(angle, indeterminate)``. ``angle`` lies in (-pi, pi];
        ``indeterminate`` is True where both arctangent arguments vanish
        (``a1`` or ``a2`` is zero), in which case ``angle`` is 0.
    """
    o1, o2, o3, o4 = (np.asarray(o, dtype=float) for o in (o1, o2, o3, o4))
    im = o4 - o1 - o2
    re = o3 - o1 - o2
    indeterminate = (im == 0.0) & (re == 0.0)
    angle = wrap_phase(np.arctan2(im, re))
    angle = np.where(indeterminate, 0.0, angle)
    if angle.ndim == 0:
        return float(angle), bool(indeterminate)
    return angle, indeterminate


def build_augmented_system(
    A_blocks: Sequence[np.ndarray],
    b_blocks: Sequence[np.ndarray],
    coherent_pairs: Sequence[tuple[int, int]] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """Stack measurement blocks and their interferometric combinations.

    For every pair ``(i, j)`` two block rows are appended after the plain
    blocks: ``A_i + A_j`` and ``A_i + 1j*A_j``, with right-hand sides
    ``|b_i + b_j|`` and ``|b_i + 1j*b_j|``. With no pairs the plain
    incoherent stack is returned.

    Returns:
        ``(A_aug, magnitudes)``.
    """
    if len(A_blocks) != len(b_blocks) or not A_blocks:
        raise DimensionError("need matching, nonempty lists of operator and data blocks")
    As = [as_matrix(A, f"A_blocks[{i}]") for i, A in enumerate(A_blocks)]
    bs = [as_vector(b, f"b_blocks[{i}]") for i, b in enumerate(b_blocks)]
    n = As[0].shape[1]
    for i, (A, b) in enumerate(zip(As, bs)):
        if A.shape[1] != n or A.shape[0] != b.shape[0]:
            raise DimensionError(f"block {i}: operator {A.shape} vs data {b.shape}, n={n}")

    rows_A = list(As)
    rows_b = list(bs)
    for i, j in coherent_pairs:
        if As[i].shape[0] != As[j].shape[0]:
            raise DimensionError(
                f"paired blocks {i} and {j} have {As[i].shape[0]} and {As[j].shape[0]} rows"
            )
        rows_A += [As[i] + As[j], As[i] + 1j * As[j]]
        rows_b += [bs[i] + bs[j], bs[i] + 1j * bs[j]]
    return np.vstack(rows_A), np.abs(np.concatenate(rows_b))


def extract_phase_data(b_true: np.ndarray, structure: CoherenceStructure) -> MagnitudePhaseData:
    """Reduce a complex field to the magnitudes and in-group phase differences."""
    b = as_vector(b_true, "b_true")
    if b.shape[0] != structure.m:
        raise DimensionError(f"b has {b.shape[0]} entries, structure expects {structure.m}")
    anchor_of = structure.anchor_of
    for g in structure.groups:
        if len(g) > 1 and b[g[0]] == 0:
            raise IndeterminateReferenceError(f"anchor sample {g[0]} has zero magnitude")
    diffs = wrap_phase(np.angle(b * np.conj(b[anchor_of])))
    diffs[structure.anchors] = 0.0
    return MagnitudePhaseData(np.abs(b), diffs)


def augment_from_phase_data(
    A,
    data: MagnitudePhaseData,
    structure: CoherenceStructure,
) -> tuple[np.ndarray, np.ndarray]:
    """Interferometric augmentation driven by a coherence structure.

    Every non-anchor member ``k`` of a group with anchor ``a`` contributes
    the rows ``a_a + a_k`` and ``a_a + 1j*a_k``. Their magnitudes follow from
    the stored data, because ``b_k conj(b_a)`` is fully known:
    ``|b_a + b_k| = ||b_a| + |b_k| exp(1j d_k)|``. For the stacked layout
    with one pair of coherent sets this yields the same rows as
    :func:`build_augmented_system` (grouped per pair instead of per block).

    Returns:
        ``(A_aug, magnitudes)`` with the plain rows first.
    """
    A = as_matrix(A, "A")
    if A.shape[0] != structure.m or data.m != structure.m:
        raise DimensionError(f"A has {A.shape[0]} rows, data {data.m}, structure {structure.m}")
    data.check(structure)
    members = np.array([k for g in structure.groups for k in g[1:]], dtype=int)
    anchors = structure.anchor_of[members]
    mag = data.magnitudes
    ratio = mag[members] * np.exp(1j * data.phase_diffs[members])
    A_aug = np.vstack([A, A[anchors] + A[members], A[anchors] + 1j * A[members]])
    rhs = np.concatenate([mag, np.abs(mag[anchors] + ratio), np.abs(mag[anchors] + 1j * ratio)])
    return A_aug, rhs
