import itertools
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grounded_choice.embeddings import EmbeddingSpace
from grounded_choice.errors import GroundingError
from grounded_choice.stats import (
    BenchmarkPairs,
    benchmark_eval,
    binomial_test,
    load_benchmark,
    proportions_test,
    sign_test,
    spearman,
)


def exact_two_sided(k, n, p0=Fraction(1, 2)):
    """Sum of outcome probabilities no larger than the observed one, in rationals."""
    pmf = [comb(n, j) * p0 ** j * (1 - p0) ** (n - j) for j in range(n + 1)]
    return float(sum(q for q in pmf if q <= pmf[k]))


def coin_enumeration(k, n):
    """Aggregate all 2^n fair-coin sequences by head count."""
    counts = [0] * (n + 1)
    for seq in itertools.product((0, 1), repeat=n):
        counts[sum(seq)] += 1
    return sum(c for c in counts if c <= counts[k]) / 2 ** n


class TestBinomial:
    def test_mode(self):
        assert proportions_test(5, 10, 0.5) == 1.0

    def test_all_successes(self):
        assert proportions_test(10, 10, 0.5) == 0.001953125
        assert exact_two_sided(10, 10) == 0.001953125

    def test_eight_of_ten(self):
        assert proportions_test(8, 10, 0.5) == pytest.approx(0.109375, abs=1e-15)
        assert exact_two_sided(8, 10) == 0.109375

    def test_sign(self):
        assert sign_test(8, 10) == pytest.approx(0.109375, abs=1e-15)
        assert sign_test(5, 10) == 1.0
        assert sign_test(10, 10) == 0.001953125

    @pytest.mark.parametrize("n", range(1, 16))
    def test_enumeration_all_k(self, n):
        for k in range(n + 1):
            assert sign_test(k, n) == pytest.approx(coin_enumeration(k, n), abs=1e-14)

    @pytest.mark.parametrize("n", [20, 30])
    def test_rational_oracle_larger_n(self, n):
        for k in range(n + 1):
            assert sign_test(k, n) == pytest.approx(exact_two_sided(k, n), rel=1e-10)

    @pytest.mark.parametrize("k,n,p0", [(3, 10, 0.2), (0, 7, 0.3), (9, 12, 0.6), (25, 40, 0.35)])
    def test_asymmetric_p0(self, k, n, p0):
        assert proportions_test(k, n, p0) == pytest.approx(
            exact_two_sided(k, n, Fraction(p0).limit_denominator(1000)), rel=1e-9)

    def test_one_sided_tails(self):
        r = binomial_test(8, 10)
        assert r.p_greater == pytest.approx(56 / 1024)
        assert r.p_less == pytest.approx(1013 / 1024)

    def test_all_predicted_of_114(self):
        assert proportions_test(114, 114, 0.5) == pytest.approx(2 * 0.5 ** 114, rel=1e-12)
        assert proportions_test(57, 114, 0.5) == pytest.approx(1.0)

    def test_normal_approximation_above_1000(self):
        r = binomial_test(560, 1001)
        assert not r.exact
        z = (abs(560 - 500.5) - 0.5) / np.sqrt(1001 * 0.25)
        from scipy.stats import norm
        assert r.p_value == pytest.approx(2 * norm.sf(z))

    @pytest.mark.parametrize("args", [(11, 10, 0.5), (-1, 10, 0.5), (0, 0, 0.5), (1, 2, 0.0), (1, 2, 1.0)])
    def test_bounds(self, args):
        with pytest.raises(GroundingError):
            proportions_test(*args)

    @given(st.integers(1, 1200).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
    def test_symmetry_and_range(self, kn):
        k, n = kn
        p = proportions_test(k, n, 0.5)
        assert 0.0 <= p <= 1.0
        assert p == pytest.approx(proportions_test(n - k, n, 0.5), rel=1e-12, abs=1e-300)


def midrank_pearson(xs, ys):
    """Independent oracle: average ranks by explicit counting, then Pearson."""
    def ranks(v):
        return [sum(1 for w in v if w < x) + (sum(1 for w in v if w == x) + 1) / 2 for x in v]
    rx, ry = ranks(xs), ranks(ys)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = (sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry)) ** 0.5
    return num / den


class TestSpearman:
    def test_identical(self):
        assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == 1.0

    def test_reversed(self):
        assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == -1.0

    def test_ties(self):
        xs, ys = [1, 2, 2, 4], [1, 3, 2, 4]
        assert abs(spearman(xs, ys) - midrank_pearson(xs, ys)) < 1e-12

    def test_errors(self):
        with pytest.raises(GroundingError):
            spearman([1, 2], [1, 2, 3])
        with pytest.raises(GroundingError):
            spearman([1, 1, 1], [1, 2, 3])
        with pytest.raises(GroundingError):
            spearman([1], [1])

    @given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=3, max_size=25))
    def test_matches_oracle_and_monotone_invariance(self, pairs):
        xs, ys = [p[0] for p in pairs], [p[1] for p in pairs]
        if len(set(xs)) < 2 or len(set(ys)) < 2:
            return
        rho = spearman(xs, ys)
        assert rho == pytest.approx(midrank_pearson(xs, ys), abs=1e-12)
        assert spearman([x ** 3 + 5 for x in xs], [np.exp(y / 10) for y in ys]) == pytest.approx(rho, abs=1e-12)


class TestBenchmark:
    @pytest.fixture
    def space(self, rng):
        words = [f"w{i}" for i in range(12)]
        return EmbeddingSpace(words, rng.normal(size=(12, 5)))

    def _pairs(self, space, sign=1.0, extra=()):
        from grounded_choice.embeddings import cosine
        rows = []
        keys = space.keys
        for i in range(0, 10, 2):
            for j in (i + 1, i + 2):
                rows.append((keys[i], keys[j], sign * cosine(space[keys[i]], space[keys[j]])))
        return BenchmarkPairs(tuple(rows) + tuple(extra))

    def test_perfect(self, space):
        assert benchmark_eval(space, self._pairs(space)) == (pytest.approx(1.0), 1.0)

    def test_negated(self, space):
        rho, _ = benchmark_eval(space, self._pairs(space, -1.0))
        assert rho == pytest.approx(-1.0)

    def test_half_oov(self, space):
        base = self._pairs(space)
        oov = tuple((f"x{i}", "w0", float(i)) for i in range(len(base)))
        rho, cov = benchmark_eval(space, BenchmarkPairs(base.rows + oov))
        assert cov == 0.5
        assert rho == pytest.approx(benchmark_eval(space, base)[0])

    def test_insufficient_coverage(self, space):
        with pytest.raises(GroundingError):
            benchmark_eval(space, BenchmarkPairs((("w0", "w1", 1.0), ("q", "r", 2.0))))

    def test_duplicate_pair(self):
        with pytest.raises(GroundingError):
            BenchmarkPairs((("a", "b", 1.0), ("a", "b", 2.0)))

    def test_load(self, tmp_path):
        p = tmp_path / "men.tsv"
        p.write_text("a\tb\t3.5\nc\td\t1\n")
        pairs = load_benchmark(p)
        assert pairs.name == "men" and pairs.rows[0] == ("a", "b", 3.5)
