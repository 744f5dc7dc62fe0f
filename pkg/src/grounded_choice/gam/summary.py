"""Summary tables, partial-effect curves and AIC comparison for fitted GAMs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats as sps

from ..errors import GroundingError
from .design import smooth_label
from .fit import GamFit

PARAM_HEADER = ["A. parametric coefficients", "Estimate", "Std. Error", "z-value", "p-value"]
SMOOTH_HEADER = ["B. smooth terms", "edf", "Wald.df", "Chi.sq", "p-value"]


@dataclass(frozen=True)
class ParamRow:
    name: str
    estimate: float
    se: float
    z: float
    p: float


@dataclass(frozen=True)
class SmoothRow:
    name: str
    edf: float
    df: int
    chisq: float
    p: float  # nan when the covariance block is singular


@dataclass(frozen=True)
class Summary:
    parametric: tuple[ParamRow, ...]
    smooth: tuple[SmoothRow, ...]
    deviance: float
    aic: float
    edf_total: float
    lambdas: tuple[float, ...]


def wald_p(estimate: float, se: float) -> float:
    """Two-sided normal p-value of estimate/se."""
    return float(2.0 * sps.norm.sf(abs(estimate / se)))


def summarize(fit: GamFit) -> Summary:
    d = fit.design
    params = []
    for j in range(d.n_param):
        se = math.sqrt(fit.cov[j, j])
        est = float(fit.beta[j])
        params.append(ParamRow(d.names[j], est, se, est / se, wald_p(est, se)))
    smooths = []
    for name in d.spec.smooths:
        sl = d.blocks[name]
        b = fit.beta[sl]
        V = fit.cov[sl, sl]
        df = len(b)
        if np.linalg.cond(V) > 1e12:
            chisq, p = math.nan, math.nan
        else:
            chisq = float(b @ np.linalg.solve(V, b))
            p = float(sps.chi2.sf(chisq, df))
        smooths.append(SmoothRow(smooth_label(name), fit.edf[name], df, chisq, p))
    return Summary(tuple(params), tuple(smooths), fit.deviance, fit.aic, fit.edf_total,
                   fit.lambdas)


def _f4(x: float) -> str:
    return "NA" if not math.isfinite(x) else f"{x:.4f}"


def _p4(p: float) -> str:
    if not math.isfinite(p):
        return "NA"
    return "< 0.0001" if p < 1e-4 else f"{p:.4f}"


def summary_rows(s: Summary) -> list[list[str]]:
    rows = [PARAM_HEADER]
    for r in s.parametric:
        rows.append([r.name, _f4(r.estimate), _f4(r.se), _f4(r.z), _p4(r.p)])
    rows.append(SMOOTH_HEADER)
    for r in s.smooth:
        rows.append([r.name, _f4(r.edf), str(r.df), _f4(r.chisq), _p4(r.p)])
    return rows


def write_summary_csv(s: Summary, path, preamble: Sequence[str] = ()) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        for line in preamble:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerows(summary_rows(s))
        w.writerow([])
        w.writerow(["deviance", _f4(s.deviance)])
        w.writerow(["edf", _f4(s.edf_total)])
        w.writerow(["AIC", _f4(s.aic)])
        w.writerow(["lambda"] + [f"{x:.6g}" for x in s.lambdas])


def read_summary_csv(path) -> dict:
    """Parse a summary CSV back into {'parametric': {...}, 'smooth': {...}, ...}."""
    out = {"parametric": {}, "smooth": {}}
    block = None
    with Path(path).open(encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for rec in csv.reader(lines):
        if not rec:
            block = "totals"
            continue
        if rec == PARAM_HEADER:
            block = "parametric"
        elif rec == SMOOTH_HEADER:
            block = "smooth"
        elif block in ("parametric", "smooth"):
            out[block][rec[0]] = rec[1:]
        else:
            out[rec[0]] = rec[1:]
    return out


@dataclass(frozen=True)
class PartialEffect:
    name: str
    x: np.ndarray
    effect: np.ndarray
    se: np.ndarray


def partial_effects(fit: GamFit, smooth: str, grid_size: int = 100) -> PartialEffect:
    """Smooth contribution on an even grid over the training range, other terms at zero."""
    d = fit.design
    if smooth not in d.smooths:
        raise GroundingError(f"unknown smooth {smooth!r}; have {list(d.smooths)}")
    if grid_size < 2:
        raise GroundingError("grid_size must be >= 2")
    basis = d.smooths[smooth]
    sl = d.blocks[smooth]
    x = np.linspace(basis.lo, basis.hi, grid_size)
    Xs = basis(x)
    effect = Xs @ fit.beta[sl]
    V = fit.cov[sl, sl]
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", Xs, V, Xs), 0.0))
    return PartialEffect(smooth, x, effect, se)


def write_partial_csv(pe: PartialEffect, path, preamble: Sequence[str] = ()) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        for line in preamble:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "effect", "se"])
        for a, b, c in zip(pe.x, pe.effect, pe.se):
            w.writerow([f"{a:.6g}", f"{b:.6g}", f"{c:.6g}"])


def partial_svg(pe: PartialEffect, title: str = "", width: int = 480, height: int = 320) -> str:
    """Polyline of the effect with a shaded +-2 SE band."""
    pad = 40
    lo_band = pe.effect - 2 * pe.se
    hi_band = pe.effect + 2 * pe.se
    x0, x1 = float(pe.x.min()), float(pe.x.max())
    y0, y1 = float(lo_band.min()), float(hi_band.max())
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1.0, y1 + 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    def pts(xs, ys):
        return " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))

    band = pts(np.concatenate([pe.x, pe.x[::-1]]), np.concatenate([hi_band, lo_band[::-1]]))
    zero = ""
    if y0 <= 0 <= y1:
        zero = (f'<line x1="{pad}" y1="{py(0):.2f}" x2="{width - pad}" y2="{py(0):.2f}" '
                'stroke="#999" stroke-dasharray="4,3"/>')
    title = title or smooth_label(pe.name)
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<polygon points="{band}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>',
        zero,
        f'<polyline points="{pts(pe.x, pe.effect)}" fill="none" stroke="#08519c" stroke-width="2"/>',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{pad - 12}" text-anchor="middle" font-size="13">{_esc(title)}</text>',
        f'<text x="{pad}" y="{height - pad + 16}" font-size="10">{x0:.3g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 16}" text-anchor="end" font-size="10">{x1:.3g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end" font-size="10">{y0:.3g}</text>',
        f'<text x="{pad - 4}" y="{pad + 10}" text-anchor="end" font-size="10">{y1:.3g}</text>',
        "</svg>",
        "",
    ])


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


@dataclass(frozen=True)
class AicRow:
    name: str
    aic: float
    delta: float  # AIC minus the best (lowest) AIC


def compare_aic(fits: Sequence[GamFit], names: Sequence[str] | None = None) -> list[AicRow]:
    """Rank fits by ascending AIC; equal AICs keep input order."""
    if len(fits) < 2:
        raise GroundingError("need at least two fits to compare")
    names = list(names) if names is not None else [f"model{i + 1}" for i in range(len(fits))]
    if len(names) != len(fits):
        raise GroundingError("one name per fit")
    y0 = fits[0].y
    for f, nm in zip(fits[1:], names[1:]):
        if f.y.shape != y0.shape or not np.array_equal(f.y, y0):
            raise GroundingError(f"fit {nm!r} was estimated on a different response vector")
    order = sorted(range(len(fits)), key=lambda i: fits[i].aic)
    best = fits[order[0]].aic
    return [AicRow(names[i], fits[i].aic, fits[i].aic - best) for i in order]


def pairwise_delta(fits: Sequence[GamFit]) -> np.ndarray:
    """``D[i, j] = AIC_i - AIC_j``."""
    a = np.array([f.aic for f in fits])
    return a[:, None] - a[None, :]
