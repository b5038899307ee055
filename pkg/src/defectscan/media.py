"""Scene geometry and material coefficients.

A scene is a compactly supported anisotropic host region D (tensor A, index n,
both real) sitting in free space (I, 1), with a list of penetrable defect
regions strictly inside D carrying their own coefficients (A0, n0), possibly
complex.  Coefficients are piecewise constant per region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid

# Verdict threshold for "uniformly positive": eigenvalues closer to zero than
# this are reported as indeterminate rather than satisfied/violated.
DEFINITENESS_TOL = 1e-12


# ---------------------------------------------------------------------------
# symmetric 2x2 tensors


@dataclass(frozen=True)
class SymTensor2:
    """Symmetric 2x2 tensor; only the upper triangle is stored.

    The imaginary entries (i11, i12, i22) default to zero and are only
    meaningful for absorbing defect tensors.
    """

    a11: float
    a12: float
    a22: float
    i11: float = 0.0
    i12: float = 0.0
    i22: float = 0.0

    def real(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def imag(self) -> np.ndarray:
        return np.array([[self.i11, self.i12], [self.i12, self.i22]])

    def cmat(self) -> np.ndarray:
        return self.real() + 1j * self.imag()

    @property
    def is_real(self) -> bool:
        return self.i11 == 0.0 and self.i12 == 0.0 and self.i22 == 0.0

    @staticmethod
    def identity() -> "SymTensor2":
        return SymTensor2(1.0, 0.0, 1.0)


def sym_eigvals(m11, m12, m22):
    """Eigenvalues (min, max) of the symmetric 2x2 [[m11, m12], [m12, m22]]."""
    mean = 0.5 * (m11 + m22)
    disc = math.hypot(0.5 * (m11 - m22), m12)
    return mean - disc, mean + disc


def sym_abs(m: np.ndarray) -> np.ndarray:
    """Matrix absolute value of a real symmetric 2x2."""
    lo, hi = sym_eigvals(m[0, 0], m[0, 1], m[1, 1])
    if m[0, 1] == 0.0:
        return np.diag([abs(m[0, 0]), abs(m[1, 1])])
    # eigenvector for hi
    v = np.array([m[0, 1], hi - m[0, 0]])
    v /= np.linalg.norm(v)
    w = np.array([-v[1], v[0]])
    return abs(hi) * np.outer(v, v) + abs(lo) * np.outer(w, w)


# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigInvalid("circle radius must be positive")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        dx = pts[..., 0] - self.center[0]
        dy = pts[..., 1] - self.center[1]
        return dx * dx + dy * dy < self.radius * self.radius

    def boundary_points(self, n: int) -> np.ndarray:
        t = 2 * np.pi * np.arange(n) / n
        return np.column_stack(
            (self.center[0] + self.radius * np.cos(t), self.center[1] + self.radius * np.sin(t))
        )

    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cx + r, cy - r, cy + r)


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    semi_a: float
    semi_b: float

    def __post_init__(self):
        if self.semi_a <= 0 or self.semi_b <= 0:
            raise ConfigInvalid("ellipse semiaxes must be positive")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        dx = (pts[..., 0] - self.center[0]) / self.semi_a
        dy = (pts[..., 1] - self.center[1]) / self.semi_b
        return dx * dx + dy * dy < 1.0

    def boundary_points(self, n: int) -> np.ndarray:
        t = 2 * np.pi * np.arange(n) / n
        return np.column_stack(
            (self.center[0] + self.semi_a * np.cos(t), self.center[1] + self.semi_b * np.sin(t))
        )

    def bbox(self):
        cx, cy = self.center
        return (cx - self.semi_a, cx + self.semi_a, cy - self.semi_b, cy + self.semi_b)


@dataclass(frozen=True)
class Rectangle:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ConfigInvalid("rectangle must have xmin < xmax and ymin < ymax")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return (x > self.xmin) & (x < self.xmax) & (y > self.ymin) & (y < self.ymax)

    def boundary_points(self, n: int) -> np.ndarray:
        per_side = max(n // 4, 2)
        xs = np.linspace(self.xmin, self.xmax, per_side, endpoint=False)
        ys = np.linspace(self.ymin, self.ymax, per_side, endpoint=False)
        bottom = np.column_stack((xs, np.full(per_side, self.ymin)))
        right = np.column_stack((np.full(per_side, self.xmax), ys))
        top = np.column_stack((xs[::-1] + (xs[1] - xs[0]), np.full(per_side, self.ymax)))
        left = np.column_stack((np.full(per_side, self.xmin), ys[::-1] + (ys[1] - ys[0])))
        return np.vstack((bottom, right, top, left))

    def bbox(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)


@dataclass(frozen=True)
class Union:
    members: tuple

    def __post_init__(self):
        if len(self.members) < 2:
            raise ConfigInvalid("union needs at least two members")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        out = self.members[0].contains(pts)
        for m in self.members[1:]:
            out = out | m.contains(pts)
        return out

    def boundary_points(self, n: int) -> np.ndarray:
        per = max(n // len(self.members), 8)
        return np.vstack([m.boundary_points(per) for m in self.members])

    def bbox(self):
        boxes = [m.bbox() for m in self.members]
        return (
            min(b[0] for b in boxes),
            max(b[1] for b in boxes),
            min(b[2] for b in boxes),
            max(b[3] for b in boxes),
        )

    def check_disjoint(self, h: float):
        """Members must be pairwise disjoint; dense sampling at h/2."""
        x0, x1, y0, y1 = self.bbox()
        step = h / 2
        xs = np.arange(x0, x1 + step, step)
        ys = np.arange(y0, y1 + step, step)
        xx, yy = np.meshgrid(xs, ys)
        pts = np.column_stack((xx.ravel(), yy.ravel()))
        hits = np.zeros(len(pts), dtype=int)
        for m in self.members:
            hits += m.contains(pts).astype(int)
        if np.any(hits > 1):
            raise ConfigInvalid("union members overlap")


def bounding_radius(shape) -> float:
    """Radius of the smallest origin-centered circle containing the shape."""
    bp = shape.boundary_points(512)
    return float(np.max(np.hypot(bp[:, 0], bp[:, 1])))


def shape_from_dict(d: dict):
    try:
        kind = d["type"]
        if kind == "circle":
            return Circle(tuple(d["center"]), float(d["radius"]))
        if kind == "ellipse":
            return Ellipse(tuple(d["center"]), float(d["semi_a"]), float(d["semi_b"]))
        if kind == "rectangle":
            return Rectangle(float(d["xmin"]), float(d["xmax"]), float(d["ymin"]), float(d["ymax"]))
        if kind == "union":
            return Union(tuple(shape_from_dict(m) for m in d["members"]))
    except KeyError as exc:
        raise ConfigInvalid(f"shape spec missing field {exc}") from exc
    raise ConfigInvalid(f"unknown shape type {kind!r}")


def shape_to_dict(s) -> dict:
    if isinstance(s, Circle):
        return {"type": "circle", "center": list(s.center), "radius": s.radius}
    if isinstance(s, Ellipse):
        return {"type": "ellipse", "center": list(s.center), "semi_a": s.semi_a, "semi_b": s.semi_b}
    if isinstance(s, Rectangle):
        return {"type": "rectangle", "xmin": s.xmin, "xmax": s.xmax, "ymin": s.ymin, "ymax": s.ymax}
    if isinstance(s, Union):
        return {"type": "union", "members": [shape_to_dict(m) for m in s.members]}
    raise ConfigInvalid(f"unknown shape {s!r}")


# low-discrepancy Kronecker lattice (plastic-constant R2 sequence); used for
# deterministic interior sampling
_PLASTIC = 1.324717957244746


def _r2_sequence(count: int, skip: int = 0) -> np.ndarray:
    a1, a2 = 1.0 / _PLASTIC, 1.0 / _PLASTIC**2
    i = np.arange(skip + 1, skip + count + 1, dtype=float)
    return np.column_stack(((0.5 + a1 * i) % 1.0, (0.5 + a2 * i) % 1.0))


def interior_points(shape, count: int) -> np.ndarray:
    """`count` quasi-random points inside the shape (deterministic)."""
    x0, x1, y0, y1 = shape.bbox()
    out = []
    skip, have, budget = 0, 0, 0
    while have < count:
        batch = max(4 * count, 256)
        u = _r2_sequence(batch, skip)
        skip += batch
        pts = np.column_stack((x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]))
        inside = pts[shape.contains(pts)]
        out.append(inside)
        have += len(inside)
        budget += 1
        if budget > 64:
            raise ConfigInvalid("could not place interior sample points in shape")
    return np.vstack(out)[:count]


# ---------------------------------------------------------------------------
# scene configuration


@dataclass(frozen=True)
class HostRegion:
    shape: object
    A: SymTensor2
    n: float


@dataclass(frozen=True)
class Defect:
    shape: object
    A0: SymTensor2
    n0: complex


@dataclass(frozen=True)
class MediaConfig:
    host: HostRegion
    defects: tuple
    k: float

    def validate(self, h: float):
        """Check material and containment invariants; raises ConfigInvalid."""
        if self.k <= 0:
            raise ConfigInvalid("wavenumber k must be positive")
        if self.host.n <= 0:
            raise ConfigInvalid("host index n must be positive")
        if not self.host.A.is_real:
            raise ConfigInvalid("host tensor A must be real")
        lo, _ = sym_eigvals(self.host.A.a11, self.host.A.a12, self.host.A.a22)
        if lo <= 0:
            raise ConfigInvalid("host tensor A must be positive definite")
        for idx, d in enumerate(self.defects):
            relo, _ = sym_eigvals(d.A0.a11, d.A0.a12, d.A0.a22)
            if relo <= 0:
                raise ConfigInvalid(f"defect {idx}: Re(A0) must be positive definite")
            _, imhi = sym_eigvals(d.A0.i11, d.A0.i12, d.A0.i22)
            if imhi > 0:
                raise ConfigInvalid(f"defect {idx}: Im(A0) must be negative semidefinite")
            n0 = complex(d.n0)
            if n0.real <= 0:
                raise ConfigInvalid(f"defect {idx}: Re(n0) must be positive")
            if n0.imag < 0:
                raise ConfigInvalid(f"defect {idx}: Im(n0) must be nonnegative")
            self._check_contained(d.shape, idx, margin=h)
            if isinstance(d.shape, Union):
                d.shape.check_disjoint(h)
        # defect regions themselves must not overlap each other
        if len(self.defects) > 1:
            Union(tuple(d.shape for d in self.defects)).check_disjoint(h)

    def _check_contained(self, shape, idx: int, margin: float):
        bp = shape.boundary_points(512)
        t = 2 * np.pi * np.arange(8) / 8
        ring = margin * np.column_stack((np.cos(t), np.sin(t)))
        probes = (bp[:, None, :] + ring[None, :, :]).reshape(-1, 2)
        if not np.all(self.host.shape.contains(probes)):
            raise ConfigInvalid(
                f"defect {idx} is not strictly inside the host (margin {margin:g})"
            )

    def max_index(self) -> float:
        return max([self.host.n] + [complex(d.n0).real for d in self.defects] + [1.0])

    def min_tensor_eig(self) -> float:
        vals = [1.0, sym_eigvals(self.host.A.a11, self.host.A.a12, self.host.A.a22)[0]]
        for d in self.defects:
            vals.append(sym_eigvals(d.A0.a11, d.A0.a12, d.A0.a22)[0])
        return min(vals)

    def min_wavelength(self) -> float:
        """Shortest local wavelength over the scene."""
        return 2 * np.pi / (self.k * math.sqrt(self.max_index() / self.min_tensor_eig()))


def sample_coefficients(config: MediaConfig, p, background: bool = False):
    """Coefficients (SymTensor2, complex n) of the medium at a single point.

    `background=True` returns the healthy medium (host values throughout D,
    defects ignored).  Total function on the plane: outside D it is (I, 1).
    """
    pt = np.asarray(p, dtype=float).reshape(1, 2)
    if not background:
        for d in config.defects:
            if bool(d.shape.contains(pt)[0]):
                return d.A0, complex(d.n0)
    if bool(config.host.shape.contains(pt)[0]):
        return config.host.A, complex(config.host.n)
    return SymTensor2.identity(), 1.0 + 0.0j


def sample_grid(config: MediaConfig, xs, ys, background: bool = False):
    """Vectorized coefficient sampling on a tensor grid.

    Returns complex arrays (a11, a12, a22, n), each of shape (len(ys), len(xs)).
    """
    xx, yy = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float))
    pts = np.stack((xx, yy), axis=-1)
    a11 = np.ones(xx.shape, dtype=complex)
    a12 = np.zeros(xx.shape, dtype=complex)
    a22 = np.ones(xx.shape, dtype=complex)
    n = np.ones(xx.shape, dtype=complex)
    host = config.host.shape.contains(pts)
    A = config.host.A
    a11[host], a12[host], a22[host] = A.a11, A.a12, A.a22
    n[host] = config.host.n
    if not background:
        for d in config.defects:
            m = d.shape.contains(pts)
            c = d.A0.cmat()
            a11[m], a12[m], a22[m] = c[0, 0], c[0, 1], c[1, 1]
            n[m] = complex(d.n0)
    return a11, a12, a22, n


# ---------------------------------------------------------------------------
# hypothesis validation


@dataclass
class DefectAssumptions:
    min_eig_re_a0_minus_a: float
    min_eig_a_minus_re_a0: float
    im_a0_zero: bool
    im_n0_zero: bool
    branch: str | None
    alpha: float | None = None

    def to_dict(self) -> dict:
        return {
            "min_eig_re_a0_minus_a": self.min_eig_re_a0_minus_a,
            "min_eig_a_minus_re_a0": self.min_eig_a_minus_re_a0,
            "im_a0_zero": self.im_a0_zero,
            "im_n0_zero": self.im_n0_zero,
            "branch": self.branch,
            "alpha": self.alpha,
        }


@dataclass
class AssumptionReport:
    defects: list = field(default_factory=list)
    verdict: str = "indeterminate"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "defects": [d.to_dict() for d in self.defects]}


def _alpha_branch(a_re_diff: np.ndarray, re_a0: np.ndarray, abs_im: np.ndarray):
    """Search alpha > 0 with A - Re(A0) - a|Im(A0)| > 0 and Re(A0) - |Im(A0)|/a >= 0."""
    best = (None, -np.inf)
    for alpha in np.logspace(-3, 3, 61):
        m1 = a_re_diff - alpha * abs_im
        m2 = re_a0 - abs_im / alpha
        e1 = sym_eigvals(m1[0, 0], m1[0, 1], m1[1, 1])[0]
        e2 = sym_eigvals(m2[0, 0], m2[0, 1], m2[1, 1])[0]
        if e2 >= -DEFINITENESS_TOL and e1 > best[1]:
            best = (float(alpha), e1)
    return best


def validate_assumptions(config: MediaConfig, samples: int = 200, h: float = 0.05) -> AssumptionReport:
    """Check the definiteness hypotheses of the range-test theorem per defect.

    Samples quasi-random points inside each defect (coefficients are piecewise
    constant, but the check is pointwise by contract) and reports which
    hypothesis branch holds.  Raises ConfigInvalid if the basic invariants
    fail.
    """
    if samples < 100:
        raise ConfigInvalid("need at least 100 validation samples")
    config.validate(h)
    report = AssumptionReport()
    any_violated = False
    any_indet = False
    for d in config.defects:
        pts = interior_points(d.shape, samples)
        min_fwd = np.inf   # min eig of Re(A0) - A over samples
        min_bwd = np.inf   # min eig of A - Re(A0)
        for p in pts:
            A_here, _ = sample_coefficients(config, p, background=True)
            a = A_here.real()
            re0 = d.A0.real()
            diff = re0 - a
            min_fwd = min(min_fwd, sym_eigvals(diff[0, 0], diff[0, 1], diff[1, 1])[0])
            diff2 = a - re0
            min_bwd = min(min_bwd, sym_eigvals(diff2[0, 0], diff2[0, 1], diff2[1, 1])[0])
        im_a0_zero = d.A0.is_real
        im_n0_zero = complex(d.n0).imag == 0.0
        branch = None
        alpha = None
        if min_fwd > DEFINITENESS_TOL:
            branch = "re_a0_minus_a"
        elif im_a0_zero and min_bwd > DEFINITENESS_TOL:
            branch = "a_minus_a0"
        elif not im_a0_zero:
            # absorbing defect: Young-inequality branch with a free constant
            A_here, _ = sample_coefficients(config, pts[0], background=True)
            abs_im = sym_abs(d.A0.imag())
            alpha, eig = _alpha_branch(A_here.real() - d.A0.real(), d.A0.real(), abs_im)
            if alpha is not None and eig > DEFINITENESS_TOL:
                branch = "absorbing_alpha"
            else:
                alpha = None
        report.defects.append(
            DefectAssumptions(float(min_fwd), float(min_bwd), im_a0_zero, im_n0_zero, branch, alpha)
        )
        if branch is None:
            # positive-but-tiny margins are undecidable in floating point;
            # anything <= 0 (e.g. zero contrast) is a plain violation
            best = max(min_fwd, min_bwd if im_a0_zero else -np.inf)
            if 0.0 < best <= DEFINITENESS_TOL:
                any_indet = True
            else:
                any_violated = True
    if any_violated:
        report.verdict = "violated"
    elif any_indet or not config.defects:
        report.verdict = "indeterminate"
    else:
        report.verdict = "satisfied"
    return report
