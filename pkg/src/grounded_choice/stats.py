"""Binomial tests, Spearman correlation and word-similarity benchmark scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as sps

from .embeddings import EmbeddingSpace, cosine
from .errors import FormatError, GroundingError

EXACT_MAX_N = 1000


@dataclass(frozen=True)
class TestResult:
    successes: int
    n: int
    p0: float
    p_value: float
    p_greater: float  # one-sided P(X >= successes)
    p_less: float     # one-sided P(X <= successes)
    exact: bool


def _check(successes, n, p0):
    if n < 1:
        raise GroundingError("n must be >= 1")
    if not 0 <= successes <= n:
        raise GroundingError(f"successes={successes} outside [0, {n}]")
    if not 0 < p0 < 1:
        raise GroundingError("p0 must lie strictly between 0 and 1")


def binomial_test(successes: int, n: int, p0: float = 0.5) -> TestResult:
    """Two-sided binomial test plus both one-sided tails.

    Exact for ``n <= 1000``: sums the probabilities of every outcome no more
    likely than the observed one.  Above that, a continuity-corrected normal
    approximation.
    """
    _check(successes, n, p0)
    if n <= EXACT_MAX_N:
        # same "no more likely than observed" rule, summed via tail CDFs
        p = float(sps.binomtest(successes, n, p0).pvalue)
        greater = float(sps.binom.sf(successes - 1, n, p0))
        less = float(sps.binom.cdf(successes, n, p0))
        exact = True
    else:
        mean = n * p0
        sd = math.sqrt(n * p0 * (1 - p0))
        z = max(abs(successes - mean) - 0.5, 0.0) / sd
        p = 2 * float(sps.norm.sf(z))
        greater = float(sps.norm.sf((successes - 0.5 - mean) / sd))
        less = float(sps.norm.cdf((successes + 0.5 - mean) / sd))
        exact = False
    clamp = lambda x: min(1.0, max(0.0, x))  # noqa: E731
    return TestResult(successes, n, p0, clamp(p), clamp(greater), clamp(less), exact)


def proportions_test(successes: int, n: int, p0: float = 0.5) -> float:
    return binomial_test(successes, n, p0).p_value


def sign_test(successes: int, n: int) -> float:
    return proportions_test(successes, n, 0.5)


def _midranks(x: np.ndarray) -> np.ndarray:
    return sps.rankdata(x, method="average")


def spearman(xs, ys) -> float:
    """Pearson correlation of mid-ranks."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise GroundingError("spearman needs two 1-d sequences of equal length")
    if len(x) < 2:
        raise GroundingError("spearman needs at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise GroundingError("spearman undefined for constant input")
    rx = _midranks(x) - (len(x) + 1) / 2
    ry = _midranks(y) - (len(y) + 1) / 2
    rho = float(np.dot(rx, ry) / math.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))
    return min(1.0, max(-1.0, rho))


@dataclass(frozen=True)
class BenchmarkPairs:
    rows: tuple[tuple[str, str, float], ...]
    name: str = ""

    def __post_init__(self):
        seen = set()
        for w1, w2, score in self.rows:
            if not math.isfinite(score):
                raise GroundingError(f"non-finite score for pair ({w1}, {w2})")
            if (w1, w2) in seen:
                raise GroundingError(f"duplicate pair ({w1}, {w2})")
            seen.add((w1, w2))

    def __len__(self):
        return len(self.rows)


def load_benchmark(path) -> BenchmarkPairs:
    """TSV ``word1<TAB>word2<TAB>score``."""
    path = Path(path)
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise FormatError("expected word1<TAB>word2<TAB>score", path, lineno)
            try:
                score = float(parts[2])
            except ValueError:
                raise FormatError(f"non-numeric score {parts[2]!r}", path, lineno) from None
            rows.append((parts[0].strip(), parts[1].strip(), score))
    try:
        return BenchmarkPairs(tuple(rows), name=path.stem)
    except GroundingError as exc:
        raise FormatError(str(exc), path) from None


def benchmark_eval(space: EmbeddingSpace, pairs: BenchmarkPairs) -> tuple[float, float]:
    """Spearman between model cosines and human scores on covered pairs.

    Returns ``(rho, coverage)`` with coverage = covered / total pairs.
    """
    sims, gold = [], []
    for w1, w2, score in pairs.rows:
        a, b = space.get(w1), space.get(w2)
        if a is None or b is None:
            continue
        sims.append(cosine(a, b))
        gold.append(score)
    if len(sims) < 2:
        raise GroundingError(
            f"only {len(sims)} of {len(pairs)} benchmark pairs are in the vocabulary")
    return spearman(sims, gold), len(sims) / len(pairs)
