import numpy as np
import pytest

from ncssl import lowdim
from ncssl.errors import ValidationError
from ncssl.portrait import phase_portrait, unit_field


class TestLowDimRhs:
    def test_sufficient_fixed_point_conditions(self):
        lam_s, lam_d = 2.0, 0.5
        w = 0.8
        st = lowdim.LowDimState(w=w, w_p=lam_d / (lam_s * w) * w, w_a=w, lambda_s=lam_s, lambda_d=lam_d)
        np.testing.assert_allclose(lowdim.lowdim_rhs(st, alpha_p=1.3, beta=0.7), 0.0, atol=1e-15)

    def test_origin(self):
        st = lowdim.LowDimState(0.0, 0.0, 0.0, 1.0, 0.5)
        assert lowdim.lowdim_rhs(st) == (0.0, 0.0, 0.0)

    def test_validation(self):
        with pytest.raises(ValidationError):
            lowdim.LowDimState(0.1, 0.1, 0.0, 0.0, 0.5)
        with pytest.raises(ValidationError):
            lowdim.LowDimState(float("nan"), 0.1, 0.0, 1.0, 0.5)

    def test_tied_submanifold_invariant(self):
        st = lowdim.LowDimState(0.3, 0.3, 0.1, 1.0, 0.5)
        rec = lowdim.integrate_lowdim(st, alpha_p=1.0, beta=1.0, dt=1e-2, steps=8000, record_every=100)
        np.testing.assert_allclose(rec["w"], rec["w_p"], atol=1e-12)
        assert rec.last("w") == pytest.approx(0.5, abs=1e-4)
        assert rec.last("w_a") == pytest.approx(0.5, abs=1e-4)


class TestNullclines:
    def test_equal_eigenvalues(self):
        out = lowdim.lowdim_nullclines(1.0, 1.0, (0.0, 2.0, 5))
        non = [fp for fp in out["fixed_points"] if fp["w"] != 0.0]
        assert non[0]["w"] == 1.0 and non[0]["w_a"] == 1.0

    def test_stable_non_collapsed(self):
        out = lowdim.lowdim_nullclines(1.0, 0.5, (0.0, 1.0, 11))
        fp = {(p["w"], p["w_a"]): p for p in out["fixed_points"]}
        assert fp[(0.5, 0.5)]["stability"] == "stable"
        assert all(e < 0 for e in fp[(0.5, 0.5)]["eigenvalues"])
        assert fp[(0.0, 0.0)]["stability"] == "unstable"
        np.testing.assert_allclose(out["nullcline_w"][:, 1], 2 * out["nullcline_w"][:, 0] ** 2)
        np.testing.assert_allclose(out["nullcline_wa"][:, 0], out["nullcline_wa"][:, 1])

    def test_jacobian_eigenvalues_at_point(self):
        j = lowdim.planar_jacobian("tied", 0.5, 0.5, 1.0, 0.5, beta=1.0)
        # by hand: [[0.25 - 0.75, 0.25], [1, -1]]
        np.testing.assert_allclose(j, [[-0.5, 0.25], [1.0, -1.0]])
        lam = np.sort([z.real for z in lowdim.eig2(j)])
        np.testing.assert_allclose(lam, np.sort(np.linalg.eigvals(j).real))

    def test_no_predictor_single_stable_origin(self):
        out = lowdim.lowdim_nullclines(1.0, 0.5, (0.0, 1.0, 5), system="no_predictor")
        assert len(out["fixed_points"]) == 1
        assert out["fixed_points"][0]["stability"] == "stable"

    def test_bad_grid(self):
        with pytest.raises(ValidationError):
            lowdim.lowdim_nullclines(1.0, 0.5, (1.0, 0.0, 5))
        with pytest.raises(ValidationError):
            lowdim.lowdim_nullclines(1.0, 0.5, (0.0, 1.0, 5), system="fixed_target")

    def test_numeric_jacobian_agrees(self):
        for system in lowdim.PLANAR_SYSTEMS:
            x, y = 0.37, 0.81
            j = lowdim.planar_jacobian(system, x, y, 1.2, 0.4, 1.5, 0.6, 0.9)
            h = 1e-6
            num = np.empty((2, 2))
            for col, (ex, ey) in enumerate(((h, 0), (0, h))):
                fp = np.array(lowdim.planar_rhs(system, x + ex, y + ey, 1.2, 0.4, 1.5, 0.6, 0.9))
                fm = np.array(lowdim.planar_rhs(system, x - ex, y - ey, 1.2, 0.4, 1.5, 0.6, 0.9))
                num[:, col] = (fp - fm) / (2 * h)
            np.testing.assert_allclose(j, num, atol=1e-8)


class TestClassify:
    @pytest.mark.parametrize("j, label", [
        (np.diag([-1.0, -2.0]), "stable"),
        (np.diag([1.0, 2.0]), "unstable"),
        (np.diag([1.0, -2.0]), "saddle"),
        (np.array([[0.0, 1.0], [-1.0, 0.0]]), "saddle"),
    ])
    def test_linear_labels(self, j, label):
        assert lowdim.classify_planar(j)[0] == label


class TestPortrait:
    def test_field_is_unit_or_zero(self):
        pp = phase_portrait("ps_plane", {"tau": 1.0, "sigma2": 0.0, "eta": 0.1}, ((0.0, 1.5, 7), (0.0, 1.5, 7)))
        for x, y, dx, dy, _ in pp.of_kind("field"):
            mag = np.hypot(dx, dy)
            assert mag == 0.0 or mag == pytest.approx(1.0)
        assert len(pp.of_kind("field")) == 49

    def test_zero_at_fixed_node(self):
        dx, dy = unit_field(np.array([0.0, 1e-15]), np.array([0.0, 0.0]))
        np.testing.assert_array_equal(dx, 0.0)
        pp = phase_portrait("ps_plane", {"tau": 1.0, "eta": 0.0}, ((0.0, 1.0, 3), (0.0, 1.0, 3)))
        field = {(x, y): (dx, dy) for x, y, dx, dy, _ in pp.of_kind("field")}
        assert field[(1.0, 0.5)] == (0.0, 0.0)
        assert field[(0.0, 0.0)] == (0.0, 0.0)

    def test_non_collapsed_branch_present(self):
        pp = phase_portrait("ps_plane", {"tau": 1.0, "sigma2": 0.25, "eta": 0.0, "alpha_p": 1.0},
                            ((0.0, 1.0, 5), (0.0, 1.0, 5)))
        branch = [fp for fp in pp.fixed_points if fp["locus"] == "non_collapsed_branch"]
        assert branch and all(fp["x"] == pytest.approx(0.8) and fp["stability"] == "stable" for fp in branch)
        assert len(pp.of_kind("parabola")) == 5

    def test_strong_decay_only_collapsed(self):
        pp = phase_portrait("ps_plane", {"tau": 1.0, "sigma2": 0.0, "eta": 1.0}, ((0.0, 1.0, 4), (0.0, 1.0, 4)))
        assert pp.loci == ["origin"]
        assert pp.fixed_points[0]["stability"] == "stable"

    def test_two_root_loci(self):
        pp = phase_portrait("ps_plane", {"tau": 1.0, "eta": 3 / 16}, ((0.0, 1.0, 4), (0.0, 1.0, 4)))
        assert pp.loci == ["origin", "p_minus", "p_plus"]
        by = {fp["locus"]: fp for fp in pp.fixed_points}
        assert by["p_plus"]["stability"] == "stable"
        assert by["p_minus"]["x"] == pytest.approx(0.25)

    def test_lowdim_modes(self):
        grid = ((0.0, 1.0, 5), (0.0, 1.0, 5))
        tied = phase_portrait("lowdim", {"mode": "tied", "lambda_s": 1.0, "lambda_d": 0.5}, grid)
        assert len(tied.of_kind("nullcline")) == 10
        assert {fp["locus"]: fp["stability"] for fp in tied.fixed_points} == {"origin": "unstable",
                                                                             "non_collapsed": "stable"}
        ft = phase_portrait("lowdim", {"mode": "fixed_target", "lambda_s": 1.0, "lambda_d": 0.5, "w_a": 1.0}, grid)
        hyper = [fp for fp in ft.fixed_points if fp["locus"] == "hyperbola"]
        assert all(fp["x"] * fp["y"] == pytest.approx(0.5) for fp in hyper)

    def test_errors(self):
        with pytest.raises(ValidationError):
            phase_portrait("xy", {}, ((0, 1, 2), (0, 1, 2)))
        with pytest.raises(ValidationError):
            phase_portrait("ps_plane", {}, ((1, 0, 2), (0, 1, 2)))
        with pytest.raises(ValidationError):
            phase_portrait("lowdim", {"mode": "free"}, ((0, 1, 2), (0, 1, 2)))
