import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defectscan import media
from defectscan.errors import ConfigInvalid

finite = st.floats(-10, 10, allow_nan=False)


def _random_config(A=media.SymTensor2(0.5, 0.0, 0.5), n=3.0, defects=()):
    host = media.HostRegion(media.Rectangle(-2, 2, -2, 2), A, n)
    return media.MediaConfig(host, tuple(defects), 1.0)


VOID = media.SymTensor2.identity()


# ---------------------------------------------------------------------------
# tensors


def test_sym_eigvals_against_lapack(rng):
    for _ in range(50):
        m = rng.normal(size=3)
        lo, hi = media.sym_eigvals(*m)
        ref = np.linalg.eigvalsh([[m[0], m[1]], [m[1], m[2]]])
        assert np.allclose([lo, hi], ref, atol=1e-12)


@given(finite, finite, finite)
@settings(max_examples=50, deadline=None)
def test_sym_eigvals_property(a, b, c):
    lo, hi = media.sym_eigvals(a, b, c)
    ref = np.linalg.eigvalsh([[a, b], [b, c]])
    assert np.allclose([lo, hi], ref, atol=1e-9)


def test_sym_abs_matches_eigendecomposition(rng):
    for _ in range(25):
        m = rng.normal(size=3)
        mat = np.array([[m[0], m[1]], [m[1], m[2]]])
        w, v = np.linalg.eigh(mat)
        ref = (v * np.abs(w)) @ v.T
        assert np.allclose(media.sym_abs(mat), ref, atol=1e-12)


def test_tensor_helpers():
    t = media.SymTensor2(2.0, 0.5, 3.0, -0.1, 0.0, -0.2)
    assert np.allclose(t.cmat(), t.real() + 1j * t.imag())
    assert not t.is_real
    assert media.SymTensor2.identity().is_real


# ---------------------------------------------------------------------------
# shapes


def test_shape_contains_basics():
    c = media.Circle((0, 0), 1.0)
    assert c.contains(np.array([[0.5, 0.0]]))[0]
    assert not c.contains(np.array([[1.0, 0.0]]))[0]  # boundary is exterior
    e = media.Ellipse((0.5, 1.0), 0.5, 0.3)
    assert e.contains(np.array([[0.5, 1.0]]))[0]
    assert not e.contains(np.array([[1.1, 1.0]]))[0]
    r = media.Rectangle(-1, 1, -1, 1)
    assert r.contains(np.array([[0.0, 0.99]]))[0]
    assert not r.contains(np.array([[0.0, 1.0]]))[0]


def test_shape_validation_errors():
    with pytest.raises(ConfigInvalid):
        media.Circle((0, 0), -1.0)
    with pytest.raises(ConfigInvalid):
        media.Rectangle(1, -1, 0, 1)
    with pytest.raises(ConfigInvalid):
        media.Union((media.Circle((0, 0), 1.0),))


def test_union_overlap_detected():
    u = media.Union((media.Circle((0, 0), 1.0), media.Circle((0.5, 0), 1.0)))
    with pytest.raises(ConfigInvalid):
        u.check_disjoint(0.1)
    ok = media.Union((media.Circle((-1, 0), 0.4), media.Circle((1, 0), 0.4)))
    ok.check_disjoint(0.1)


def test_shape_dict_round_trip():
    shapes = [
        media.Circle((0.5, -1.0), 0.3),
        media.Ellipse((0.5, 1.0), 0.5, 0.3),
        media.Rectangle(-1, 1, -2, 2),
        media.Union((media.Circle((-1, 1), 0.3), media.Circle((1, -1), 0.3))),
    ]
    for s in shapes:
        assert media.shape_from_dict(media.shape_to_dict(s)) == s
    with pytest.raises(ConfigInvalid):
        media.shape_from_dict({"type": "pentagon"})


def test_bounding_radius():
    assert media.bounding_radius(media.Circle((0, 0), 1.0)) == pytest.approx(1.0)
    assert media.bounding_radius(media.Rectangle(-2, 2, -2, 2)) == pytest.approx(
        2 * np.sqrt(2), rel=1e-3
    )


def test_interior_points_deterministic_and_inside():
    s = media.Ellipse((0.5, 1.0), 0.5, 0.3)
    p1 = media.interior_points(s, 200)
    p2 = media.interior_points(s, 200)
    assert np.array_equal(p1, p2)
    assert np.all(s.contains(p1))


# ---------------------------------------------------------------------------
# configuration invariants


def test_validate_accepts_reference_scene():
    cfg = _random_config(defects=[media.Defect(media.Circle((0, 0), 1.0), VOID, 1.0)])
    cfg.validate(0.15)


def test_validate_rejects_bad_materials():
    bad_host = media.MediaConfig(
        media.HostRegion(media.Rectangle(-2, 2, -2, 2), media.SymTensor2(1.0, 2.0, 1.0), 3.0),
        (), 1.0,
    )
    with pytest.raises(ConfigInvalid):
        bad_host.validate(0.1)
    with pytest.raises(ConfigInvalid):
        _random_config(n=-1.0).validate(0.1)
    with pytest.raises(ConfigInvalid):
        media.MediaConfig(_random_config().host, (), -1.0).validate(0.1)
    # Im(A0) must be negative semidefinite
    gain = media.Defect(
        media.Circle((0, 0), 0.5), media.SymTensor2(1.0, 0.0, 1.0, 0.5, 0.0, 0.5), 1.0
    )
    with pytest.raises(ConfigInvalid):
        _random_config(defects=[gain]).validate(0.1)
    # Im(n0) must be nonnegative
    lossy_wrong = media.Defect(media.Circle((0, 0), 0.5), VOID, 1.0 - 0.5j)
    with pytest.raises(ConfigInvalid):
        _random_config(defects=[lossy_wrong]).validate(0.1)


def test_validate_rejects_defect_touching_boundary():
    touching = media.Defect(media.Circle((0, 0), 2.0), VOID, 1.0)
    with pytest.raises(ConfigInvalid):
        _random_config(defects=[touching]).validate(0.1)
    near = media.Defect(media.Circle((1.5, 0), 0.49), VOID, 1.0)  # margin 0.01 < h
    with pytest.raises(ConfigInvalid):
        _random_config(defects=[near]).validate(0.1)


def test_validate_rejects_overlapping_defects():
    d1 = media.Defect(media.Circle((0, 0), 0.5), VOID, 1.0)
    d2 = media.Defect(media.Circle((0.3, 0), 0.5), VOID, 1.0)
    with pytest.raises(ConfigInvalid):
        _random_config(defects=[d1, d2]).validate(0.1)


def test_min_wavelength_formula():
    cfg = _random_config(defects=[media.Defect(media.Circle((0, 0), 1.0), VOID, 1.0)])
    # a_min = 0.5 (host), n_max = 3 (host): lambda = 2 pi / (k sqrt(3/0.5))
    assert cfg.min_wavelength() == pytest.approx(2 * np.pi / np.sqrt(6.0))


# ---------------------------------------------------------------------------
# coefficient sampling


def test_sample_coefficients_piecewise():
    cfg = _random_config(defects=[media.Defect(media.Circle((0, 0), 1.0), VOID, 1.0)])
    a, n = media.sample_coefficients(cfg, (10.0, 10.0))
    assert a == media.SymTensor2.identity() and n == 1.0
    a, n = media.sample_coefficients(cfg, (1.5, 1.5))
    assert a == media.SymTensor2(0.5, 0.0, 0.5) and n == 3.0
    a, n = media.sample_coefficients(cfg, (0.0, 0.0))
    assert a == media.SymTensor2.identity() and n == 1.0
    # background sampling ignores the defect
    a, n = media.sample_coefficients(cfg, (0.0, 0.0), background=True)
    assert a == media.SymTensor2(0.5, 0.0, 0.5) and n == 3.0


def test_sample_grid_matches_pointwise(rng):
    cfg = _random_config(defects=[media.Defect(media.Circle((0, 0), 1.0), VOID, 1.0)])
    xs = np.linspace(-3, 3, 13)
    ys = np.linspace(-3, 3, 11)
    a11, a12, a22, n = media.sample_grid(cfg, xs, ys)
    for _ in range(30):
        ix, iy = rng.integers(13), rng.integers(11)
        t, nn = media.sample_coefficients(cfg, (xs[ix], ys[iy]))
        assert a11[iy, ix] == t.cmat()[0, 0]
        assert n[iy, ix] == nn


def test_background_agrees_outside_defects():
    cfg = _random_config(defects=[media.Defect(media.Circle((0, 0), 1.0), VOID, 1.0)])
    xs = np.linspace(-3, 3, 25)
    tot = media.sample_grid(cfg, xs, xs)
    bg = media.sample_grid(cfg, xs, xs, background=True)
    xx, yy = np.meshgrid(xs, xs)
    outside = ~cfg.defects[0].shape.contains(np.stack((xx, yy), axis=-1))
    for t, b in zip(tot, bg):
        assert np.array_equal(t[outside], b[outside])


# ---------------------------------------------------------------------------
# hypothesis validation


def test_assumptions_reference_void():
    cfg = _random_config(defects=[media.Defect(media.Circle((0, 0), 1.0), VOID, 1.0)])
    rep = media.validate_assumptions(cfg)
    assert rep.verdict == "satisfied"
    d = rep.defects[0]
    assert d.branch == "re_a0_minus_a"
    # eigenvalues of I - 0.5 I are exactly 0.5
    assert d.min_eig_re_a0_minus_a == pytest.approx(0.5)


def test_assumptions_anisotropic_tensors():
    A = media.SymTensor2(0.6022, 0.1591, 0.7478)
    A0 = media.SymTensor2(0.1673, -0.0308, 0.2030)
    d = media.Defect(media.Ellipse((0.5, 1.0), 0.5, 0.3), A0, 3.0)
    cfg = _random_config(A=A, defects=[d])
    rep = media.validate_assumptions(cfg)
    assert rep.verdict == "satisfied"
    assert rep.defects[0].branch == "a_minus_a0"
    ref = np.linalg.eigvalsh(A.real() - A0.real()).min()
    assert rep.defects[0].min_eig_a_minus_re_a0 == pytest.approx(ref, abs=1e-12)


def test_assumptions_zero_contrast_violated():
    same = media.Defect(media.Circle((0, 0), 1.0), media.SymTensor2(0.5, 0.0, 0.5), 3.0)
    rep = media.validate_assumptions(_random_config(defects=[same]))
    assert rep.verdict == "violated"
    assert rep.defects[0].branch is None


def test_assumptions_absorbing_branch():
    # lossy defect with small negative-semidefinite Im(A0)
    A0 = media.SymTensor2(0.2, 0.0, 0.2, -0.01, 0.0, -0.01)
    d = media.Defect(media.Circle((0, 0), 1.0), A0, 3.0 + 0.1j)
    rep = media.validate_assumptions(_random_config(defects=[d]))
    assert rep.verdict == "satisfied"
    assert rep.defects[0].branch == "absorbing_alpha"
    assert rep.defects[0].alpha is not None
    assert not rep.defects[0].im_a0_zero
    assert not rep.defects[0].im_n0_zero


def test_assumptions_requires_enough_samples():
    cfg = _random_config(defects=[media.Defect(media.Circle((0, 0), 1.0), VOID, 1.0)])
    with pytest.raises(ConfigInvalid):
        media.validate_assumptions(cfg, samples=10)


def test_assumptions_report_serializable():
    cfg = _random_config(defects=[media.Defect(media.Circle((0, 0), 1.0), VOID, 1.0)])
    doc = media.validate_assumptions(cfg).to_dict()
    assert doc["verdict"] == "satisfied"
    assert doc["defects"][0]["branch"] == "re_a0_minus_a"
