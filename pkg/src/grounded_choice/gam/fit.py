"""Penalized IRLS for the logistic GAM, with AIC-based smoothing selection."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.special import expit

from ..errors import ConvergenceError, GroundingError, SeparationError, SingularSystem
from .design import DesignMatrix, GamSpec

log = logging.getLogger(__name__)

MAX_ITER = 200
TOL = 1e-8
MAX_ABS_BETA = 50.0


def binomial_deviance(y: np.ndarray, eta: np.ndarray) -> float:
    # -2 loglik; stable for large |eta|
    return float(2.0 * np.sum(np.logaddexp(0.0, eta) - y * eta))


@dataclass(frozen=True)
class GamFit:
    design: DesignMatrix
    y: np.ndarray
    beta: np.ndarray
    lambdas: tuple[float, ...]
    edf: Mapping[str, float]
    edf_total: float
    deviance: float
    aic: float
    cov: np.ndarray
    iterations: int
    trace: tuple[float, ...]                  # penalized deviance per PIRLS iteration
    grid: tuple[tuple[tuple[float, ...], float], ...] = field(default=())  # (lambdas, AIC)
    grid_edf: tuple[Mapping[str, float], ...] = field(default=())

    @property
    def names(self):
        return self.design.names

    def linear_predictor(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.beta):
            raise GroundingError(
                f"design rows have {X.shape[-1]} columns, fit expects {len(self.beta)}")
        return X @ self.beta


def _solve_pd(A, b, names):
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(A), b)
    except np.linalg.LinAlgError:
        pass
    # pivoted QR puts linearly dependent columns last
    _, R, piv = scipy.linalg.qr(A, pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-10 * diag[0])) if diag.size and diag[0] > 0 else 0
    suspects = [names[i] for i in sorted(piv[rank:])]
    hint = f" (dependent or empty columns: {', '.join(suspects)})" if suspects else ""
    raise SingularSystem(f"penalized information matrix is singular{hint}")


def pirls(X: np.ndarray, y: np.ndarray, S: np.ndarray, names: Sequence[str] = (),
          max_iter: int = MAX_ITER, tol: float = TOL):
    """Newton / penalized IRLS for a logistic model with quadratic penalty ``b'Sb``.

    Step-halving keeps the penalized deviance non-increasing.  Returns
    ``(beta, trace, iterations)``.
    """
    n, p = X.shape
    names = list(names) or [f"x{j}" for j in range(p)]
    beta = np.zeros(p)
    eta = np.zeros(n)
    pen = binomial_deviance(y, eta)
    trace = [pen]
    for it in range(1, max_iter + 1):
        mu = expit(eta)
        w = mu * (1.0 - mu)
        H = X.T @ (X * w[:, None]) + S
        g = X.T @ (y - mu) - S @ beta
        step = _solve_pd(H, g, names)
        old = pen
        for _ in range(60):
            cand = beta + step
            eta_c = X @ cand
            pen_c = binomial_deviance(y, eta_c) + float(cand @ S @ cand)
            if pen_c <= old + 1e-10 * (abs(old) + 1.0):
                break
            step = step / 2
        else:
            raise ConvergenceError(f"step halving failed at PIRLS iteration {it}")
        beta, eta, pen = cand, eta_c, pen_c
        trace.append(pen)
        j = int(np.argmax(np.abs(beta)))
        if abs(beta[j]) > MAX_ABS_BETA:
            raise SeparationError(
                f"perfect separation suspected: |coefficient| of {names[j]!r} reached "
                f"{abs(beta[j]):.3g} at iteration {it}")
        if abs(old - pen) / (abs(pen) + 0.1) < tol:
            return beta, trace, it
    raise ConvergenceError(
        f"PIRLS did not converge in {max_iter} iterations; last penalized deviances "
        f"{', '.join(f'{v:.6g}' for v in trace[-3:])}")


def _fit_at(design: DesignMatrix, y: np.ndarray, lambdas: tuple[float, ...]):
    X = design.X
    S = design.penalty_matrix(lambdas)
    try:
        beta, trace, iters = pirls(X, y, S, design.names)
    except ConvergenceError as exc:
        raise type(exc)(f"lambda={lambdas}: {exc}") from None
    eta = X @ beta
    mu = expit(eta)
    w = mu * (1.0 - mu)
    XtWX = X.T @ (X * w[:, None])
    cov = _solve_pd(XtWX + S, np.eye(X.shape[1]), design.names)
    cov = (cov + cov.T) / 2
    F = cov @ XtWX
    edf = {name: float(np.trace(F[sl, sl])) for name, sl in design.blocks.items()}
    edf_total = float(np.trace(F))
    dev = binomial_deviance(y, eta)
    return dict(beta=beta, lambdas=lambdas, edf=edf, edf_total=edf_total, deviance=dev,
                aic=dev + 2.0 * edf_total, cov=cov, iterations=iters, trace=tuple(trace))


def fit_gam(design: DesignMatrix, y, spec: GamSpec | None = None) -> GamFit:
    """Fit every lambda on the grid and keep the one with the lowest AIC.

    The grid is shared across smooths unless ``spec.per_smooth`` asks for the
    full Cartesian product.  Ties keep the earlier grid point.
    """
    spec = spec or design.spec
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or len(y) != design.X.shape[0]:
        raise GroundingError(f"response has {len(y)} rows, design has {design.X.shape[0]}")
    if not np.all((y == 0) | (y == 1)):
        raise GroundingError("responses must be 0/1")
    if len(y) <= design.X.shape[1]:
        raise GroundingError(f"need more rows ({len(y)}) than columns ({design.X.shape[1]})")
    m = len(spec.smooths)
    if m == 0:
        candidates = [()]
    elif spec.per_smooth:
        candidates = list(itertools.product(spec.lambda_grid, repeat=m))
    else:
        candidates = [(lam,) * m for lam in spec.lambda_grid]
    best, grid, grid_edf = None, [], []
    for lambdas in candidates:
        res = _fit_at(design, y, tuple(lambdas))
        log.debug("lambda=%s AIC=%.6g edf=%.4g", lambdas, res["aic"], res["edf_total"])
        grid.append((tuple(lambdas), res["aic"]))
        grid_edf.append(res["edf"])
        if best is None or res["aic"] < best["aic"]:
            best = res
    y = y.copy()
    y.setflags(write=False)
    return GamFit(design=design, y=y, grid=tuple(grid), grid_edf=tuple(grid_edf), **best)


def predict_prob(fit: GamFit, rows) -> np.ndarray:
    """Inverse-logit of the linear predictor.

    ``rows`` is either a design matrix with the fit's columns or a mapping of
    raw data columns (rebuilt with the training knots and centering).
    """
    X = fit.design.rows(rows) if isinstance(rows, Mapping) else rows
    return expit(fit.linear_predictor(X))


def predict_choice(fit: GamFit, rows) -> np.ndarray:
    """1 where the predicted probability is at least 0.5."""
    return (predict_prob(fit, rows) >= 0.5).astype(int)
