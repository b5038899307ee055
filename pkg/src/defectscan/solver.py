"""Direct scattering solver.

Discretizes the divergence-form operator div(A grad u) + k^2 n u on a uniform
node grid with a flux-form 9-point stencil (face-averaged tensors, mixed terms
by rotated differences over cell-centered a12) and a quadratic complex-stretch
PML collar.  One banded LU factorization per medium is reused for all incident
directions.  Far fields are extracted with the boundary-integral
representation over a circle; an angular-mode series for the isotropic
penetrable disc serves as the analytic oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RectBivariateSpline
from scipy.linalg import lapack
from scipy.special import h1vp, hankel1, jv, jvp

from . import media
from .errors import (
    CircleOutOfBounds,
    ConfigInvalid,
    ModeSystemSingular,
    PointInPml,
    SingularSystem,
)

FACTOR_PROBE_TOL = 1e-10
PIVOT_TOL = 1e-14


def gamma2(k: float) -> complex:
    """2D far-field normalization constant e^{i pi/4} / sqrt(8 pi k)."""
    return np.exp(1j * np.pi / 4) / math.sqrt(8 * np.pi * k)


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid on [-L, L]^2 plus a PML collar of pml_cells cells.

    pml_strength 0 means "auto": 30 / (k * T) with T the collar width.
    """

    half_extent: float
    h: float
    pml_cells: int = 16
    pml_strength: float = 0.0

    def __post_init__(self):
        if self.h <= 0 or self.half_extent <= 0:
            raise ConfigInvalid("grid spacing and half extent must be positive")
        if self.pml_cells < 8:
            raise ConfigInvalid("need at least 8 PML cells")
        if self.pml_strength < 0:
            raise ConfigInvalid("pml_strength must be nonnegative")
        cells = 2 * self.half_extent / self.h
        if abs(cells - round(cells)) > 1e-9 * max(1.0, cells):
            raise ConfigInvalid("2 * half_extent / h must be an integer")

    @property
    def interior_cells(self) -> int:
        return int(round(2 * self.half_extent / self.h))

    @property
    def n_nodes(self) -> int:
        return self.interior_cells + 2 * self.pml_cells + 1

    @property
    def pml_width(self) -> float:
        return self.pml_cells * self.h

    def coords(self) -> np.ndarray:
        start = -(self.half_extent + self.pml_width)
        return start + self.h * np.arange(self.n_nodes)

    def resolved_strength(self, k: float) -> float:
        if self.pml_strength > 0:
            return self.pml_strength
        return 30.0 / (k * self.pml_width)

    def validate_for(self, config: media.MediaConfig):
        rad = media.bounding_radius(config.host.shape)
        if self.half_extent < 1.5 * rad - 1e-12:
            raise ConfigInvalid(
                f"half_extent {self.half_extent:g} < 1.5 x host radius {rad:g}"
            )
        lam = config.min_wavelength()
        if self.h > lam / 10 + 1e-12:
            raise ConfigInvalid(f"h {self.h:g} exceeds lambda_min/10 = {lam / 10:g}")


def suggest_grid(
    config: media.MediaConfig,
    points_per_wavelength: float = 12.0,
    margin: float = 1.5,
    pml_cells: int = 16,
    half_extent: float | None = None,
    h_target: float | None = None,
) -> GridSpec:
    """Grid satisfying the resolution and extent invariants for a scene."""
    if half_extent is None:
        half_extent = margin * media.bounding_radius(config.host.shape)
    if h_target is None:
        h_target = config.min_wavelength() / points_per_wavelength
    cells = int(math.ceil(2 * half_extent / h_target))
    if cells % 2:
        cells += 1
    return GridSpec(half_extent, 2 * half_extent / cells, pml_cells)


@dataclass
class ComplexGridField:
    """Complex scalar field sampled on every grid node (row-major, [y, x])."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        n = self.spec.n_nodes
        if self.values.shape != (n, n):
            raise ConfigInvalid("field shape does not match grid")

    def interpolators(self):
        """Bicubic splines for the field and its centered-difference gradient."""
        c = self.spec.coords()
        h = self.spec.h
        gx = np.gradient(self.values, h, axis=1)
        gy = np.gradient(self.values, h, axis=0)
        def mk(z):
            return (
                RectBivariateSpline(c, c, z.real),
                RectBivariateSpline(c, c, z.imag),
            )
        return mk(self.values), mk(gx), mk(gy)


@dataclass
class FarFieldVector:
    """Far-field values over uniformly spaced observation angles."""

    k: float
    angles: np.ndarray
    values: np.ndarray


# ---------------------------------------------------------------------------
# assembly


def _stretch(coords, L, T, k, strength):
    """Complex PML stretch s(x) = 1 + i sigma(x)/k, sigma quadratic in the collar."""
    depth = np.maximum(np.abs(coords) - L, 0.0)
    sigma = strength * (depth / T) ** 2
    return 1.0 + 1j * sigma / k


def _subcell_average(config, xs, ys, h, background, ns=16):
    """Material coefficients averaged over h x h patches centered on a grid.

    Volume-fraction averaging smears the staircase error of piecewise-constant
    media over material interfaces; away from interfaces it is exact.
    Returns (a11, a12, a22, n) arrays of shape (len(ys), len(xs)).
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    offs = h * ((np.arange(ns) + 0.5) / ns - 0.5)
    # expand the x axis by all offsets at once; loop only over y offsets
    xs_e = (xs[:, None] + offs[None, :]).ravel()
    acc = None
    for dy in offs:
        vals = media.sample_grid(config, xs_e, ys + dy, background)
        vals = [v.reshape(len(ys), len(xs), ns).sum(axis=2) for v in vals]
        if acc is None:
            acc = vals
        else:
            for a, v in zip(acc, vals):
                a += v
    return tuple(a / (ns * ns) for a in acc)


def _cross_apply(cc, u, h):
    """Rotated-difference discretization of d_x(c d_y u) + d_y(c d_x u).

    cc holds cell-centered coefficients, shape (ny-1, nx-1); returns values on
    interior nodes, shape (ny-2, nx-2).
    """
    u0 = u[1:-1, 1:-1]
    ne = cc[1:, 1:] * (u[2:, 2:] - u0)
    sw = cc[:-1, :-1] * (u[:-2, :-2] - u0)
    se = cc[:-1, 1:] * (u[:-2, 2:] - u0)
    nw = cc[1:, :-1] * (u[2:, :-2] - u0)
    return (ne + sw - se - nw) / (2 * h * h)


class BandedSystem:
    """Factorized discretization of one medium (background or defective).

    Immutable after construction; `solve` may be called concurrently since the
    LAPACK banded back-substitution does not mutate the factors.
    """

    def __init__(self, spec: GridSpec, config: media.MediaConfig, which: str):
        if which not in ("background", "defective"):
            raise ConfigInvalid("which must be 'background' or 'defective'")
        self.spec = spec
        self.config = config
        self.which = which
        self.k = config.k

        c = spec.coords()
        self._coords = c
        h = spec.h
        k = self.k
        bg = which == "background"
        cf = c[:-1] + h / 2  # face / cell-center coordinates

        # subcell-averaged coefficients at x-faces, y-faces, cell centers and
        # nodes; the same arrays drive both the operator and the contrast RHS
        self._face_x = _subcell_average(config, cf, c, h, bg)[0]       # a11
        self._face_y = _subcell_average(config, c, cf, h, bg)[2]       # a22
        self._cc = _subcell_average(config, cf, cf, h, bg)[1]          # a12
        self._n = _subcell_average(config, c, c, h, bg)[3]

        strength = spec.resolved_strength(k)
        L, T = spec.half_extent, spec.pml_width
        s = _stretch(c, L, T, k, strength)
        sf = _stretch(cf, L, T, k, strength)

        # stretched face/mass coefficients; a12 is zero inside the collar so
        # the cross term needs no stretching
        fx = self._face_x * (s[:, None] / sf[None, :])
        fy = self._face_y * (s[None, :] / sf[:, None])
        cc = self._cc
        mass = (k * k) * self._n * (s[None, :] * s[:, None])

        self._assemble(fx, fy, cc, mass, h)
        self._factorize()

    # -- matrix construction -------------------------------------------------

    def _assemble(self, fx, fy, cc, mass, h):
        nn = self.spec.n_nodes
        ni = nn - 2  # interior nodes per axis (outer ring is Dirichlet zero)
        self.n_interior = ni
        inv_h2 = 1.0 / (h * h)

        # coefficient planes on interior nodes (full-grid indices 1..nn-2)
        east = fx[1:-1, 1:] * inv_h2
        west = fx[1:-1, :-1] * inv_h2
        north = fy[1:, 1:-1] * inv_h2
        south = fy[:-1, 1:-1] * inv_h2
        half = 0.5 * inv_h2
        ne = cc[1:, 1:] * half
        sw = cc[:-1, :-1] * half
        se = -cc[:-1, 1:] * half
        nw = -cc[1:, :-1] * half
        center = mass[1:-1, 1:-1] - (east + west + north + south) - (ne + sw + se + nw)

        jj, ii = np.meshgrid(np.arange(ni), np.arange(ni), indexing="ij")
        gid = (jj * ni + ii).ravel()

        rows, cols, vals = [gid], [gid], [center.ravel()]
        offsets = {
            (0, 1): east, (0, -1): west, (1, 0): north, (-1, 0): south,
            (1, 1): ne, (-1, -1): sw, (-1, 1): se, (1, -1): nw,
        }
        for (dj, di), plane in offsets.items():
            tj, ti = jj + dj, ii + di
            ok = ((tj >= 0) & (tj < ni) & (ti >= 0) & (ti < ni)).ravel()
            rows.append(gid[ok])
            cols.append((tj * ni + ti).ravel()[ok])
            vals.append(plane.ravel()[ok])
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(ni * ni, ni * ni),
        ).tocsr()
        self.op = mat
        self.bandwidth = ni + 1

    def _factorize(self):
        kl = ku = self.bandwidth
        n = self.op.shape[0]
        coo = self.op.tocoo()
        ab = np.zeros((2 * kl + ku + 1, n), dtype=complex, order="F")
        ab[kl + ku + coo.row - coo.col, coo.col] = coo.data
        lu, ipiv, info = lapack.zgbtrf(ab, kl, ku)
        if info != 0:
            raise SingularSystem(f"banded LU failed with LAPACK info={info}")
        diag = np.abs(lu[kl + ku, :])
        row_scale = np.max(np.abs(self.op).sum(axis=1))
        if diag.min() < PIVOT_TOL * row_scale:
            raise SingularSystem("pivot magnitude below tolerance")
        self._lu, self._ipiv, self._kl, self._ku = lu, ipiv, kl, ku

        # residual probe on a deterministic random right-hand side
        rng = np.random.default_rng(12345)
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x = self._solve_vec(b)
        self.probe_residual = float(
            np.linalg.norm(self.op @ x - b) / np.linalg.norm(b)
        )
        if self.probe_residual > FACTOR_PROBE_TOL:
            raise SingularSystem(
                f"factorization probe residual {self.probe_residual:.2e} too large"
            )

    def _solve_vec(self, b: np.ndarray) -> np.ndarray:
        x, info = lapack.zgbtrs(self._lu, self._kl, self._ku, b, self._ipiv)
        if info != 0:
            raise SingularSystem(f"banded solve failed with LAPACK info={info}")
        return x

    def solve_grid(self, b_interior: np.ndarray) -> ComplexGridField:
        """Solve for the interior unknowns and embed into the full node grid."""
        ni = self.n_interior
        x = self._solve_vec(b_interior.ravel().astype(complex))
        full = np.zeros((self.spec.n_nodes, self.spec.n_nodes), dtype=complex)
        full[1:-1, 1:-1] = x.reshape(ni, ni)
        return ComplexGridField(self.spec, full)

    def residual(self, field: ComplexGridField, b_interior: np.ndarray) -> float:
        x = field.values[1:-1, 1:-1].ravel()
        b = b_interior.ravel()
        return float(np.linalg.norm(self.op @ x - b) / np.linalg.norm(b))


def assemble_system(
    spec: GridSpec, config: media.MediaConfig, which: str = "background",
    validate: bool = True,
) -> BandedSystem:
    """Discretize and factorize one medium.  `validate=False` skips the grid
    and containment invariants (verification scenes only)."""
    if validate:
        config.validate(spec.h)
        spec.validate_for(config)
    return BandedSystem(spec, config, which)


# ---------------------------------------------------------------------------
# right-hand sides and solves


def plane_wave_rhs(system: BandedSystem, d) -> np.ndarray:
    """Contrast source -[div((A-I) grad u_inc) + k^2 (n-1) u_inc] on interior
    nodes, with the incident gradient evaluated analytically on cell faces."""
    c = system._coords
    h = system.spec.h
    k = system.k
    dx, dy = float(d[0]), float(d[1])

    xf = c[:-1] + h / 2
    u_inc = np.exp(1j * k * (dx * c[None, :] + dy * c[:, None]))
    gx = 1j * k * dx * np.exp(1j * k * (dx * xf[None, :] + dy * c[:, None]))
    gy = 1j * k * dy * np.exp(1j * k * (dx * c[None, :] + dy * xf[:, None]))

    fx = (system._face_x - 1.0) * gx
    fy = (system._face_y - 1.0) * gy
    div = (fx[1:-1, 1:] - fx[1:-1, :-1]) / h + (fy[1:, 1:-1] - fy[:-1, 1:-1]) / h
    cross = _cross_apply(system._cc, u_inc, h)
    mass = (k * k) * (system._n[1:-1, 1:-1] - 1.0) * u_inc[1:-1, 1:-1]
    return -(div + cross + mass)


def solve_plane_wave(system: BandedSystem, d) -> ComplexGridField:
    """Scattered field for an incident plane wave with unit direction d."""
    if abs(math.hypot(float(d[0]), float(d[1])) - 1.0) > 1e-12:
        raise ConfigInvalid("incident direction must be a unit vector")
    return system.solve_grid(plane_wave_rhs(system, d))


def incident_plane_wave(spec: GridSpec, k: float, d) -> np.ndarray:
    c = spec.coords()
    return np.exp(1j * k * (float(d[0]) * c[None, :] + float(d[1]) * c[:, None]))


def solve_point_source(system: BandedSystem, z) -> ComplexGridField:
    """Approximate Green's function of the medium: discrete delta of total
    weight 1/h^2 spread bilinearly over the four nodes surrounding z (keeps
    the source centered at z itself).  Verification-quality only."""
    spec = system.spec
    h = spec.h
    zx, zy = float(z[0]), float(z[1])
    if max(abs(zx), abs(zy)) > spec.half_extent - 4 * h:
        raise PointInPml("source point must stay >= 4h away from the PML collar")
    c = spec.coords()
    ix = int(np.clip(np.searchsorted(c, zx) - 1, 0, len(c) - 2))
    iy = int(np.clip(np.searchsorted(c, zy) - 1, 0, len(c) - 2))
    tx = (zx - c[ix]) / h
    ty = (zy - c[iy]) / h
    ni = system.n_interior
    b = np.zeros((ni, ni), dtype=complex)
    # div(A grad G) + k^2 n G = -delta
    w = -1.0 / (h * h)
    b[iy - 1, ix - 1] += w * (1 - tx) * (1 - ty)
    b[iy - 1, ix] += w * tx * (1 - ty)
    b[iy, ix - 1] += w * (1 - tx) * ty
    b[iy, ix] += w * tx * ty
    return system.solve_grid(b)


# ---------------------------------------------------------------------------
# far-field extraction


def far_field(
    field: ComplexGridField, k: float, r_ff: float, angles, m_quad: int = 256,
) -> FarFieldVector:
    """Far-field pattern of a radiating grid field by the boundary-integral
    representation over the circle of radius r_ff (trapezoidal quadrature)."""
    spec = field.spec
    if m_quad < 256:
        raise ConfigInvalid("need at least 256 quadrature points")
    if not (0 < r_ff <= spec.half_extent - 4 * spec.h):
        raise CircleOutOfBounds(
            f"extraction radius {r_ff:g} must lie in (0, L - 4h]"
        )
    angles = np.atleast_1d(np.asarray(angles, dtype=float))

    (ur, ui), (gxr, gxi), (gyr, gyi) = field.interpolators()
    phi = 2 * np.pi * np.arange(m_quad) / m_quad
    cp, sp_ = np.cos(phi), np.sin(phi)
    yx, yy = r_ff * cp, r_ff * sp_
    u = ur.ev(yy, yx) + 1j * ui.ev(yy, yx)
    du = cp * (gxr.ev(yy, yx) + 1j * gxi.ev(yy, yx)) + sp_ * (
        gyr.ev(yy, yx) + 1j * gyi.ev(yy, yx)
    )

    xhat_x, xhat_y = np.cos(angles), np.sin(angles)
    phase = np.exp(-1j * k * (np.outer(xhat_x, yx) + np.outer(xhat_y, yy)))
    cos_xn = np.outer(xhat_x, cp) + np.outer(xhat_y, sp_)
    integrand = (-1j * k * cos_xn * u[None, :] - du[None, :]) * phase
    values = gamma2(k) * integrand.sum(axis=1) * (2 * np.pi * r_ff / m_quad)
    return FarFieldVector(k, angles, values)


# ---------------------------------------------------------------------------
# analytic oracle: isotropic penetrable disc


def mie_far_field(
    a: float, n: float, radius: float, k: float, d_angle: float, angles,
    extra_modes: int = 12,
) -> FarFieldVector:
    """Far field of a plane wave scattered by the disc {|x| < radius} with
    interior coefficients (a I, n), by angular-mode matching.

    Matches u and a * du/dr at the rim; exterior modes H_m^(1)(kr), interior
    J_m(k_int r) with k_int = k sqrt(n / a).
    """
    if a <= 0 or n <= 0 or radius <= 0:
        raise ConfigInvalid("disc parameters must be positive")
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    kappa = k * math.sqrt(n / a)
    mmax = int(math.ceil(k * radius)) + extra_modes
    b = np.zeros(mmax + 1, dtype=complex)
    for m in range(mmax + 1):
        jm_i, djm_i = jv(m, kappa * radius), jvp(m, kappa * radius)
        jm_e, djm_e = jv(m, k * radius), jvp(m, k * radius)
        hm, dhm = hankel1(m, k * radius), h1vp(m, k * radius)
        det = -k * jm_i * dhm + a * kappa * djm_i * hm
        if not np.isfinite(det) or det == 0:
            raise ModeSystemSingular(f"mode {m}: singular 2x2 system")
        b[m] = (k * jm_i * djm_e - a * kappa * djm_i * jm_e) / det
    rel = angles - d_angle
    series = b[0] + 2 * sum(b[m] * np.cos(m * rel) for m in range(1, mmax + 1))
    values = math.sqrt(2 / (np.pi * k)) * np.exp(-1j * np.pi / 4) * series
    return FarFieldVector(k, angles, values)
