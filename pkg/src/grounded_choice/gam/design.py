"""Model specification and design-matrix construction for the logistic GAM."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.interpolate import BSpline

from ..errors import FormatError, GroundingError

FACTORS = {
    "word_type": ("abstract", "concrete"),
    "distance": ("far", "near", "max"),
}
INTERACTIONS = {
    # only the one interaction column the analysis uses
    "word_type:distance": (("word_type", "concrete"), ("distance", "near")),
}
DISPLAY = {
    "word_type": "WordType",
    "distance": "Distance",
    "pred_n_obj": "Predicted Image #Objects",
    "rand_n_obj": "Random Image #Objects",
    "pred_sim": "Predicted Image Similarity",
    "rand_sim": "Random Image Similarity",
    "inter_sim": "Inter-Image Similarity",
}

DEFAULT_PARAMETRIC = ("word_type", "distance", "pred_n_obj", "rand_n_obj", "word_type:distance")
DEFAULT_SMOOTHS = ("rand_sim", "pred_sim", "inter_sim")
DEFAULT_GRID = tuple(10.0 ** e for e in range(-3, 7))
DEGREE = 3


@dataclass(frozen=True)
class GamSpec:
    parametric: tuple[str, ...] = DEFAULT_PARAMETRIC
    smooths: tuple[str, ...] = DEFAULT_SMOOTHS
    k: int = 5
    lambda_grid: tuple[float, ...] = DEFAULT_GRID
    per_smooth: bool = False
    intercept: bool = True

    def __post_init__(self):
        object.__setattr__(self, "parametric", tuple(self.parametric))
        object.__setattr__(self, "smooths", tuple(self.smooths))
        object.__setattr__(self, "lambda_grid", tuple(float(x) for x in self.lambda_grid))
        if self.k < 4:
            raise GroundingError("basis dimension k must be >= 4")
        if not self.lambda_grid:
            raise GroundingError("lambda grid is empty")
        if any(not (x >= 0) for x in self.lambda_grid):
            raise GroundingError("lambda grid values must be non-negative")
        if list(self.lambda_grid) != sorted(self.lambda_grid):
            raise GroundingError("lambda grid must be sorted ascending")
        if len(set(self.smooths)) != len(self.smooths):
            raise GroundingError("duplicate smooth term")


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in value.replace(";", ",").split(",") if x.strip())


def parse_spec(text: str, path=None) -> GamSpec:
    """Parse a ``key = value`` model spec.

    Keys: ``parametric``, ``smooths`` (comma lists, may be empty), ``k``,
    ``lambda_grid`` (comma list), ``per_smooth``, ``intercept`` (booleans).
    """
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError("expected key = value", path, lineno)
        key, value = key.strip(), value.strip()
        try:
            if key in ("parametric", "smooths"):
                kwargs[key] = _split_list(value)
            elif key == "k":
                kwargs[key] = int(value)
            elif key == "lambda_grid":
                kwargs[key] = tuple(float(x) for x in _split_list(value))
            elif key in ("per_smooth", "intercept"):
                kwargs[key] = value.lower() in ("1", "true", "yes")
            else:
                raise FormatError(f"unknown key {key!r}", path, lineno)
        except ValueError as exc:
            raise FormatError(str(exc), path, lineno) from None
    try:
        return GamSpec(**kwargs)
    except GroundingError as exc:
        raise FormatError(str(exc), path) from None


def load_spec(path) -> GamSpec:
    path = Path(path)
    return parse_spec(path.read_text(encoding="utf-8"), path)


def smooth_label(name: str) -> str:
    return f"s({DISPLAY.get(name, name)})"


@dataclass(frozen=True)
class SmoothBasis:
    """Centered cubic B-spline basis for one covariate.

    Interior knots sit at equally spaced quantiles of the training values.
    The wiggliness penalty is the squared second divided difference of the
    coefficients taken at their Greville abscissae, so its null space is
    exactly the straight lines; after centering only the linear trend is
    left unpenalized.  Outside the training range the basis continues
    linearly from the boundary.
    """

    name: str
    knots: np.ndarray
    Z: np.ndarray          # k x (k-1) null-space basis of the centering constraint
    penalty: np.ndarray    # (k-1) x (k-1)
    lo: float
    hi: float

    @property
    def k(self) -> int:
        return self.Z.shape[0]

    def raw(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        inside = np.clip(x, self.lo, self.hi)
        B = BSpline.design_matrix(inside, self.knots, DEGREE).toarray()
        below, above = x < self.lo, x > self.hi
        if below.any() or above.any():
            d_lo, d_hi = self._boundary_slopes()
            B[below] += (x[below] - self.lo)[:, None] * d_lo[None, :]
            B[above] += (x[above] - self.hi)[:, None] * d_hi[None, :]
        return B

    def _boundary_slopes(self):
        k = self.k
        d_lo, d_hi = np.empty(k), np.empty(k)
        for j in range(k):
            c = np.zeros(k)
            c[j] = 1.0
            der = BSpline(self.knots, c, DEGREE).derivative()
            d_lo[j], d_hi[j] = der(self.lo), der(self.hi)
        return d_lo, d_hi

    def __call__(self, x) -> np.ndarray:
        return self.raw(x) @ self.Z


def _knot_vector(x: np.ndarray, k: int) -> np.ndarray:
    lo, hi = float(x.min()), float(x.max())
    n_inner = k - DEGREE - 1
    probs = np.arange(1, n_inner + 1) / (n_inner + 1)
    inner = np.quantile(x, probs) if n_inner else np.empty(0)
    grid = np.concatenate([[lo], inner, [hi]])
    if np.any(np.diff(grid) <= 0):
        # heavily tied data: quantiles collapse, use even spacing instead
        inner = lo + (hi - lo) * probs
    return np.concatenate([[lo] * (DEGREE + 1), inner, [hi] * (DEGREE + 1)])


def _divided_difference_penalty(knots: np.ndarray, k: int) -> np.ndarray:
    greville = np.array([knots[j + 1:j + 1 + DEGREE].mean() for j in range(k)])
    h = np.diff(greville)
    hbar = (greville[-1] - greville[0]) / (k - 1)
    D = np.zeros((k - 2, k))
    for j in range(k - 2):
        D[j, j] = 1.0 / h[j]
        D[j, j + 1] = -1.0 / h[j] - 1.0 / h[j + 1]
        D[j, j + 2] = 1.0 / h[j + 1]
    D *= hbar
    return D.T @ D


def make_smooth(name: str, x, k: int) -> SmoothBasis:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise GroundingError(f"smooth covariate {name!r} has non-finite values")
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        raise GroundingError(f"smooth covariate {name!r} is constant (zero range)")
    knots = _knot_vector(x, k)
    S = _divided_difference_penalty(knots, k)
    B = BSpline.design_matrix(x, knots, DEGREE).toarray()
    colsum = B.sum(axis=0)
    Q, _ = np.linalg.qr(colsum.reshape(-1, 1), mode="complete")
    Z = Q[:, 1:]
    Sz = Z.T @ S @ Z
    Sz = (Sz + Sz.T) / 2
    return SmoothBasis(name, knots, Z, Sz, lo, hi)


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    names: tuple[str, ...]
    n_param: int
    blocks: Mapping[str, slice]          # smooth name -> column slice
    smooths: Mapping[str, SmoothBasis]
    spec: GamSpec
    param_terms: tuple = field(default=())  # per-column recipe for rebuilding rows

    @property
    def X_param(self) -> np.ndarray:
        return self.X[:, :self.n_param]

    def X_smooth(self, name: str) -> np.ndarray:
        return self.X[:, self.blocks[name]]

    def penalty(self, name: str) -> np.ndarray:
        return self.smooths[name].penalty

    def penalty_matrix(self, lambdas: Sequence[float]) -> np.ndarray:
        p = self.X.shape[1]
        S = np.zeros((p, p))
        for lam, name in zip(lambdas, self.spec.smooths):
            sl = self.blocks[name]
            S[sl, sl] += lam * self.smooths[name].penalty
        return S

    def rows(self, data: Mapping[str, Sequence]) -> np.ndarray:
        """Design rows for new data using the training knots and centering."""
        n = _nrows(data)
        cols = [_param_column(recipe, data, n) for recipe in self.param_terms]
        for name in self.spec.smooths:
            if name not in data:
                raise GroundingError(f"missing smooth covariate {name!r}")
            cols.extend(self.smooths[name](np.asarray(data[name], dtype=np.float64)).T)
        return np.column_stack(cols) if cols else np.empty((n, 0))


def _nrows(data: Mapping[str, Sequence]) -> int:
    lengths = {len(v) for v in data.values()}
    if len(lengths) != 1:
        raise GroundingError("data columns have unequal lengths")
    return lengths.pop()


def _param_column(recipe, data, n) -> np.ndarray:
    kind = recipe[0]
    if kind == "intercept":
        return np.ones(n)
    if kind == "level":
        _, col, level = recipe
        if col not in data:
            raise GroundingError(f"missing factor column {col!r}")
        return np.array([v == level for v in data[col]], dtype=np.float64)
    if kind == "interaction":
        _, (c1, l1), (c2, l2) = recipe
        for c in (c1, c2):
            if c not in data:
                raise GroundingError(f"missing factor column {c!r}")
        return np.array([(a == l1) and (b == l2) for a, b in zip(data[c1], data[c2])],
                        dtype=np.float64)
    _, col = recipe
    if col not in data:
        raise GroundingError(f"missing covariate {col!r}")
    x = np.asarray(data[col], dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise GroundingError(f"covariate {col!r} has non-finite values")
    return x


def build_design(data: Mapping[str, Sequence], spec: GamSpec = GamSpec()) -> DesignMatrix:
    """Dummy-code factors (reference levels abstract / far), add linear
    covariates and one centered spline block per smooth."""
    n = _nrows(data)
    recipes, names = [], []
    if spec.intercept:
        recipes.append(("intercept",))
        names.append("(Intercept)")
    for term in spec.parametric:
        if term in FACTORS:
            if term not in data:
                raise GroundingError(f"missing factor column {term!r}")
            values = list(data[term])
            unknown = sorted(set(values) - set(FACTORS[term]))
            if unknown:
                raise GroundingError(f"factor {term!r} has unknown level(s) {unknown}")
            for level in FACTORS[term][1:]:
                if level not in values:
                    raise GroundingError(f"factor {term!r}: level {level!r} absent from data")
                recipes.append(("level", term, level))
                names.append(f"{DISPLAY[term]}={level}")
        elif term in INTERACTIONS:
            (c1, l1), (c2, l2) = INTERACTIONS[term]
            recipes.append(("interaction", (c1, l1), (c2, l2)))
            names.append(f"{DISPLAY[c1]}={l1}:{DISPLAY[c2]}={l2}")
        else:
            recipes.append(("linear", term))
            names.append(DISPLAY.get(term, term))
    cols = [_param_column(r, data, n) for r in recipes]
    if (("interaction" in {r[0] for r in recipes})
            and not any(c.any() for c, r in zip(cols, recipes) if r[0] == "interaction")):
        raise GroundingError("interaction column is empty: no concrete/near rows")
    n_param = len(cols)
    blocks, smooths = {}, {}
    start = n_param
    for name in spec.smooths:
        if name not in data:
            raise GroundingError(f"missing smooth covariate {name!r}")
        basis = make_smooth(name, data[name], spec.k)
        Xs = basis(np.asarray(data[name], dtype=np.float64))
        cols.extend(Xs.T)
        smooths[name] = basis
        blocks[name] = slice(start, start + Xs.shape[1])
        names.extend(f"{smooth_label(name)}.{j + 1}" for j in range(Xs.shape[1]))
        start += Xs.shape[1]
    X = np.column_stack(cols) if cols else np.empty((n, 0))
    X.setflags(write=False)
    return DesignMatrix(X, tuple(names), n_param, blocks, smooths, spec, tuple(recipes))
