import math

import numpy as np
import pytest
from scipy.special import expit

from grounded_choice.errors import FormatError, GroundingError, SeparationError, SingularSystem
from grounded_choice.gam import (
    GamSpec,
    binomial_deviance,
    build_design,
    compare_aic,
    fit_gam,
    pairwise_delta,
    parse_spec,
    partial_effects,
    partial_svg,
    predict_choice,
    predict_prob,
    read_summary_csv,
    summarize,
    summary_rows,
    write_summary_csv,
)
from grounded_choice.gam.summary import wald_p

CELL_CYCLE = [("abstract", "far"), ("abstract", "near"), ("concrete", "far"),
              ("concrete", "near"), ("concrete", "max")]


def make_data(n=400, seed=0):
    rng = np.random.default_rng(seed)
    cells = [CELL_CYCLE[i % 5] for i in range(n)]
    data = {
        "word_type": [c[0] for c in cells],
        "distance": [c[1] for c in cells],
        "pred_n_obj": rng.integers(1, 9, n).astype(float),
        "rand_n_obj": rng.integers(1, 9, n).astype(float),
        "pred_sim": rng.uniform(-0.2, 0.8, n),
        "rand_sim": rng.uniform(-0.2, 0.8, n),
        "inter_sim": rng.uniform(-0.5, 0.5, n),
    }
    eta = (2 * (data["pred_sim"] - data["rand_sim"]) + 0.4 * (data["word_type"] == np.array("concrete"))
           + np.sin(5 * data["inter_sim"]))
    y = (rng.uniform(size=n) < expit(eta)).astype(float)
    return data, y


def newton_logistic(X, y, iters=100):
    """Plain unpenalized Newton-Raphson, no step control."""
    b = np.zeros(X.shape[1])
    for _ in range(iters):
        mu = 1 / (1 + np.exp(-X @ b))
        H = X.T @ (X * (mu * (1 - mu))[:, None])
        step = np.linalg.solve(H, X.T @ (y - mu))
        b = b + step
        if np.max(np.abs(step)) < 1e-13:
            break
    return b


@pytest.fixture(scope="module")
def full_fit():
    data, y = make_data()
    d = build_design(data)
    return data, y, fit_gam(d, y)


class TestDesign:
    def test_smooth_columns_sum_to_zero(self, full_fit):
        _, _, fit = full_fit
        d = fit.design
        for name in d.spec.smooths:
            Xs = d.X_smooth(name)
            assert Xs.shape[1] == d.spec.k - 1
            assert np.max(np.abs(Xs.sum(axis=0))) < 1e-10

    def test_two_level_factor_gives_two_columns(self):
        data = {"word_type": ["abstract", "concrete"] * 5}
        d = build_design(data, GamSpec(parametric=("word_type",), smooths=()))
        assert d.names == ("(Intercept)", "WordType=concrete")
        assert d.X.shape == (10, 2)

    def test_constant_covariate_rejected(self):
        data = {"pred_sim": [0.3] * 10}
        with pytest.raises(GroundingError, match="constant"):
            build_design(data, GamSpec(parametric=(), smooths=("pred_sim",)))

    def test_missing_level(self):
        data = {"word_type": ["abstract"] * 10}
        with pytest.raises(GroundingError, match="absent"):
            build_design(data, GamSpec(parametric=("word_type",), smooths=()))

    def test_unknown_level(self):
        with pytest.raises(GroundingError):
            build_design({"word_type": ["abstract", "vague"]}, GamSpec(parametric=("word_type",), smooths=()))

    def test_rows_reproduce_training_design(self, full_fit):
        data, _, fit = full_fit
        assert np.allclose(fit.design.rows(data), fit.design.X, atol=1e-12)

    def test_penalty_null_space_is_linear(self, full_fit):
        _, _, fit = full_fit
        basis = fit.design.smooths["pred_sim"]
        evals = np.linalg.eigvalsh(basis.penalty)
        assert np.sum(evals < 1e-10 * evals.max()) == 1


class TestFit:
    def test_intercept_only(self):
        y = np.array([1, 1, 1, 1, 1, 1, 1, 0, 0, 0], dtype=float)
        d = build_design({"x": list(range(10))}, GamSpec(parametric=(), smooths=()))
        fit = fit_gam(d, y)
        assert fit.beta[0] == pytest.approx(math.log(7 / 3), abs=1e-6)
        assert math.sqrt(fit.cov[0, 0]) == pytest.approx(math.sqrt(1 / (10 * 0.21)), abs=1e-4)
        assert summary_rows(summarize(fit))[1][1] == "0.8473"

    def test_parametric_matches_newton(self):
        data, y = make_data(n=500, seed=3)
        spec = GamSpec(smooths=(), lambda_grid=(0.0,))
        d = build_design(data, spec)
        fit = fit_gam(d, y)
        b = newton_logistic(np.array(d.X), y)
        assert np.max(np.abs(fit.beta - b)) < 1e-4
        assert np.max(np.abs(predict_prob(fit, d.X) - expit(d.X @ b))) < 1e-6

    def test_large_lambda_is_linear(self):
        data, y = make_data(seed=1)
        spec = GamSpec(parametric=(), smooths=("inter_sim",), lambda_grid=(1e8,))
        fit = fit_gam(build_design(data, spec), y)
        assert abs(fit.edf["inter_sim"] - 1.0) < 0.05
        pe = partial_effects(fit, "inter_sim", 50)
        assert np.max(np.abs(np.diff(pe.effect, 2))) < 1e-6

    def test_trace_monotone(self, full_fit):
        _, _, fit = full_fit
        assert all(b <= a + 1e-9 * abs(a) for a, b in zip(fit.trace, fit.trace[1:]))

    def test_edf_monotone_in_lambda(self, full_fit):
        _, _, fit = full_fit
        for name in fit.design.spec.smooths:
            edfs = [g[name] for g in fit.grid_edf]
            assert all(b <= a + 1e-8 for a, b in zip(edfs, edfs[1:]))

    def test_aic_identity(self, full_fit):
        _, y, fit = full_fit
        assert fit.aic == pytest.approx(fit.deviance + 2 * fit.edf_total, abs=1e-9)
        assert fit.deviance == pytest.approx(binomial_deviance(y, fit.design.X @ fit.beta), abs=1e-9)
        assert fit.aic == min(a for _, a in fit.grid)

    def test_reproducible(self, full_fit):
        data, y, fit = full_fit
        again = fit_gam(build_design(data), y)
        assert np.array_equal(fit.beta, again.beta) and fit.aic == again.aic

    def test_per_smooth_grid(self):
        data, y = make_data(n=200)
        spec = GamSpec(parametric=(), smooths=("pred_sim", "inter_sim"),
                       lambda_grid=(0.1, 10.0), per_smooth=True)
        fit = fit_gam(build_design(data, spec), y)
        assert len(fit.grid) == 4

    def test_separation(self):
        x = np.linspace(-1, 1, 40)
        d = build_design({"pred_n_obj": x}, GamSpec(parametric=("pred_n_obj",), smooths=()))
        with pytest.raises(SeparationError):
            fit_gam(d, (x > 0).astype(float))

    def test_singular_names_columns(self):
        data = {"pred_n_obj": [1.0] * 20, "rand_n_obj": np.arange(20.0)}
        d = build_design(data, GamSpec(parametric=("pred_n_obj", "rand_n_obj"), smooths=()))
        with pytest.raises(SingularSystem, match="Predicted Image #Objects|Intercept"):
            fit_gam(d, np.arange(20) % 2)

    def test_response_validation(self, full_fit):
        _, y, fit = full_fit
        with pytest.raises(GroundingError):
            fit_gam(fit.design, y[:-1])
        with pytest.raises(GroundingError):
            fit_gam(fit.design, np.full_like(y, 0.5))


class TestPredict:
    def test_zero_predictor_gives_half(self, full_fit):
        _, _, fit = full_fit
        assert predict_prob(fit, np.zeros((1, len(fit.beta))))[0] == 0.5
        assert predict_choice(fit, np.zeros((1, len(fit.beta))))[0] == 1

    def test_extrapolation_finite_and_linear(self, full_fit):
        data, _, fit = full_fit
        far = {k: v[:3] for k, v in data.items()}
        far = {k: list(v) for k, v in far.items()}
        far["pred_sim"] = [5.0, 10.0, 15.0]
        p = predict_prob(fit, far)
        assert np.all(np.isfinite(p))
        raw = fit.design.smooths["pred_sim"](np.array([5.0, 10.0, 15.0]))
        eff = raw @ fit.beta[fit.design.blocks["pred_sim"]]
        assert eff[2] - eff[1] == pytest.approx(eff[1] - eff[0], abs=1e-9)

    def test_wrong_width(self, full_fit):
        _, _, fit = full_fit
        with pytest.raises(GroundingError):
            predict_prob(fit, np.zeros((2, 3)))


class TestSummary:
    def test_wald_p(self):
        assert wald_p(1.96, 1.0) == pytest.approx(0.05, abs=1e-4)
        assert wald_p(0.0, 0.3) == 1.0

    def test_table_shape_and_round_trip(self, full_fit, tmp_path):
        _, _, fit = full_fit
        s = summarize(fit)
        assert [r.name for r in s.smooth] == ["s(Random Image Similarity)", "s(Predicted Image Similarity)",
                                              "s(Inter-Image Similarity)"]
        assert all(r.df == 4 for r in s.smooth)
        write_summary_csv(s, tmp_path / "s.csv", ["config_hash=x seed=0"])
        back = read_summary_csv(tmp_path / "s.csv")
        assert back["parametric"]["(Intercept)"][0] == f"{s.parametric[0].estimate:.4f}"
        assert back["AIC"] == [f"{s.aic:.4f}"]

    def test_partial_endpoints(self, full_fit):
        _, _, fit = full_fit
        pe = partial_effects(fit, "pred_sim", 2)
        basis = fit.design.smooths["pred_sim"]
        assert list(pe.x) == [basis.lo, basis.hi]
        with pytest.raises(GroundingError):
            partial_effects(fit, "pred_sim", 1)
        with pytest.raises(GroundingError):
            partial_effects(fit, "nope")

    def test_partial_centered_over_training_values(self, full_fit):
        data, _, fit = full_fit
        sl = fit.design.blocks["inter_sim"]
        contrib = fit.design.smooths["inter_sim"](np.asarray(data["inter_sim"])) @ fit.beta[sl]
        assert abs(contrib.sum()) < 1e-8

    def test_svg(self, full_fit):
        _, _, fit = full_fit
        svg = partial_svg(partial_effects(fit, "pred_sim"), "s(Predicted Image Similarity)")
        assert svg.startswith("<svg") and "</svg>" in svg


class TestCompareAic:
    def test_identical(self, full_fit):
        _, _, fit = full_fit
        rows = compare_aic([fit, fit], ["a", "b"])
        assert [r.name for r in rows] == ["a", "b"] and rows[1].delta == 0.0

    def test_useless_column(self):
        data, y = make_data(n=300, seed=5)
        data["rand_n_obj"] = np.random.default_rng(9).normal(size=300)
        small = fit_gam(build_design(data, GamSpec(parametric=("pred_n_obj",), smooths=())), y)
        big = fit_gam(build_design(data, GamSpec(parametric=("pred_n_obj", "rand_n_obj"), smooths=())), y)
        drop = small.deviance - big.deviance
        assert big.aic - small.aic == pytest.approx(2 - drop, abs=1e-6)
        assert pairwise_delta([big, small])[0, 1] == pytest.approx(2 - drop, abs=1e-6)

    def test_mismatched_response(self, full_fit):
        data, y, fit = full_fit
        other = fit_gam(fit.design, 1 - y)
        with pytest.raises(GroundingError):
            compare_aic([fit, other])


class TestSpec:
    def test_parse(self):
        s = parse_spec("parametric = word_type\nsmooths =\nk = 6\nlambda_grid = 0.1, 1\nintercept = true\n")
        assert s == GamSpec(parametric=("word_type",), smooths=(), k=6, lambda_grid=(0.1, 1.0))

    @pytest.mark.parametrize("text", ["k = 3", "lambda_grid = 1, 0.1", "bogus = 1", "k"])
    def test_bad(self, text):
        with pytest.raises(FormatError):
            parse_spec(text)
