"""Discretized far-field operators and the scattering operator.

Far-field matrices are sampled on N uniformly spaced directions used both for
incidence and observation; entry (i, j) is u_inf(x_hat_i, d_j).  The
trapezoidal weight 2*pi/N is folded into the scattering operator (and later
into F-sharp) so the discrete matrices approximate their continuous
counterparts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import media, solver
from .errors import ConfigInvalid, DimensionMismatch, SingularScattering

INVERSE_RESIDUAL_TOL = 1e-10


@dataclass
class FarFieldMatrix:
    """N x N far-field samples; rows = observation, columns = incidence."""

    k: float
    angles: np.ndarray
    entries: np.ndarray

    def __post_init__(self):
        n = len(self.angles)
        if n % 2 or self.entries.shape != (n, n):
            raise ConfigInvalid("far-field matrix must be N x N with N even")
        if not np.all(np.isfinite(self.entries)):
            raise ConfigInvalid("far-field matrix has non-finite entries")

    @property
    def n(self) -> int:
        return len(self.angles)


@dataclass
class FieldSet:
    """Background total fields on the grid, one per incident direction."""

    spec: solver.GridSpec
    k: float
    angles: np.ndarray
    data: np.ndarray  # (N, n_nodes, n_nodes), total fields


@dataclass
class ScatteringOperator:
    k: float
    n: int
    S: np.ndarray
    S_inv: np.ndarray
    unitarity_defect: float


def direction_angles(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n) / n


def assemble_far_field_matrix(
    config: media.MediaConfig,
    spec: solver.GridSpec,
    which: str,
    n_dirs: int,
    keep_fields: bool = False,
    r_ff: float | None = None,
    m_quad: int = 256,
    validate: bool = True,
):
    """One factorization + N plane-wave solves + N far-field extractions.

    Returns (FarFieldMatrix, FieldSet or None); the retained fields are the
    total fields, used later for test-function evaluation.
    """
    if n_dirs % 2 or n_dirs < 8:
        raise ConfigInvalid("need an even number of directions, at least 8")
    system = solver.assemble_system(spec, config, which, validate=validate)
    host_radius = media.bounding_radius(config.host.shape)
    r_max = spec.half_extent - 4 * spec.h
    if r_ff is None:
        r_ff = 0.5 * (host_radius + r_max)
    if not (host_radius < r_ff <= r_max):
        raise ConfigInvalid(
            f"extraction radius {r_ff:g} must enclose the host ({host_radius:g}) "
            f"and stay {4 * spec.h:g} clear of the PML"
        )
    angles = direction_angles(n_dirs)
    entries = np.zeros((n_dirs, n_dirs), dtype=complex)
    fields = np.zeros((n_dirs, spec.n_nodes, spec.n_nodes), dtype=complex) if keep_fields else None
    for j, theta in enumerate(angles):
        d = (np.cos(theta), np.sin(theta))
        scattered = solver.solve_plane_wave(system, d)
        entries[:, j] = solver.far_field(scattered, config.k, r_ff, angles, m_quad).values
        if keep_fields:
            fields[j] = scattered.values + solver.incident_plane_wave(spec, config.k, d)
    ffm = FarFieldMatrix(config.k, angles, entries)
    fset = FieldSet(spec, config.k, angles, fields) if keep_fields else None
    return ffm, fset


def _check_compatible(a: FarFieldMatrix, b: FarFieldMatrix):
    if a.n != b.n:
        raise DimensionMismatch(f"direction counts differ: {a.n} vs {b.n}")
    if abs(a.k - b.k) > 1e-12 * max(a.k, b.k):
        raise DimensionMismatch(f"wavenumbers differ: {a.k} vs {b.k}")
    if not np.allclose(a.angles, b.angles, rtol=0, atol=1e-12):
        raise DimensionMismatch("direction sets differ")


def relative_operator(f0: FarFieldMatrix, fb: FarFieldMatrix) -> FarFieldMatrix:
    """F = F0 - Fb: far-field operator of the defect relative to the background."""
    _check_compatible(f0, fb)
    return FarFieldMatrix(f0.k, f0.angles.copy(), f0.entries - fb.entries)


def scattering_operator(fb: FarFieldMatrix) -> ScatteringOperator:
    """S = I + 2ik conj(gamma_2) (2 pi / N) F_b, with its LU-based inverse.

    The conjugated constant is the one that renders S exactly unitary for
    real media under the e^{ikr}/sqrt(r) far-field normalization (checked
    against the analytic disc series).
    """
    n = fb.n
    k = fb.k
    S = np.eye(n, dtype=complex) + (
        2j * k * np.conj(solver.gamma2(k)) * 2 * np.pi / n
    ) * fb.entries
    try:
        lu, piv = scipy.linalg.lu_factor(S)
    except scipy.linalg.LinAlgError as exc:
        raise SingularScattering(str(exc)) from exc
    if np.min(np.abs(np.diag(lu))) < 1e-14 * np.max(np.abs(S)):
        raise SingularScattering("scattering operator pivot collapsed")
    s_inv = scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=complex))
    resid = np.linalg.norm(s_inv @ S - np.eye(n)) / np.sqrt(n)
    if resid > INVERSE_RESIDUAL_TOL:
        raise SingularScattering(f"inverse residual {resid:.2e} too large")
    defect = float(
        np.linalg.norm(S.conj().T @ S - np.eye(n)) / np.linalg.norm(S) ** 2
    )
    return ScatteringOperator(k, n, S, s_inv, defect)


def add_noise(f: FarFieldMatrix, level: float, seed: int) -> FarFieldMatrix:
    """Multiplicative noise F_ij (1 + level * eps_ij), eps uniform on the
    complex unit disc, drawn from a seeded deterministic generator."""
    if level < 0:
        raise ConfigInvalid("noise level must be nonnegative")
    rng = np.random.default_rng(seed)
    n = f.n
    radius = np.sqrt(rng.uniform(size=(n, n)))
    phase = np.exp(2j * np.pi * rng.uniform(size=(n, n)))
    eps = radius * phase
    return FarFieldMatrix(f.k, f.angles.copy(), f.entries * (1.0 + level * eps))


def reciprocity_defect(f: FarFieldMatrix) -> float:
    """max |F[i,j] - F[(j+N/2) % N, (i+N/2) % N]| / max |F| (0 for F = 0)."""
    n = f.n
    idx = (np.arange(n) + n // 2) % n
    mirrored = f.entries[np.ix_(idx, idx)].T
    scale = np.max(np.abs(f.entries))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(f.entries - mirrored)) / scale)
