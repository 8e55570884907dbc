"""Polynomial fits with principled degree selection, analytic derivatives,
and finite-size scaling collapse.

Indicator-vs-W curves for several system sizes are smoothed by least-squares
polynomials (degree picked by the residual ratio SSR/(n-m-1), cross-checked
on a subset), differentiated analytically, and rescaled as

    y = L^{-a} * d^k(indicator)/dW^k,    x = L^b * (W - W_c)

so that curves for different L overlay near the transition.  A scalar
collapse quality (normalized across-size variance on the common x window)
makes the (a, b, W_c) grid search well-defined.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from itertools import product

import numpy as np
from numpy.polynomial import Polynomial

INDICATORS = ("C_avg_nn", "N_avg_nn", "S_G", "C_tot", "N_tot", "NPR")

CURVES_HEADER = ["L", "indicator", "W", "mean", "stderr", "n"]


@dataclass(frozen=True)
class DisorderCurve:
    """One indicator against disorder strength, for one system size."""

    length: int
    indicator: str
    w: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_samples: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))
        object.__setattr__(self, "n_samples", np.asarray(self.n_samples, dtype=int))
        if not (len(w) == len(self.mean) == len(self.stderr) == len(self.n_samples)):
            raise ValueError("curve columns must have equal length")
        if np.any(np.diff(w) <= 0):
            raise ValueError("W values must be strictly increasing")
        if np.any(self.n_samples <= 0):
            raise ValueError("sample counts must be positive")


@dataclass(frozen=True)
class CollapseParams:
    exponent_a: float
    exponent_b: float
    w_c: float
    derivative_order: int = 2

    def __post_init__(self):
        if self.derivative_order not in (1, 2):
            raise ValueError("derivative_order must be 1 or 2")


def _ratio_for_degree(x, y, m):
    poly = Polynomial.fit(x, y, m)
    resid = y - poly(x)
    return float(np.sum(resid**2)) / (len(x) - m - 1), poly


def _select_degree(x, y, m_max, flat_rtol=0.01):
    """Residual-ratio degree choice: the first degree fitting exactly (ratio
    at round-off), else the entry point of the flat basin around the minimum.

    A plain stop-on-first-flat rule misreads parity-symmetric data (adding an
    even degree to odd data never improves), so the basin is identified from
    the minimum backwards.
    """
    ratios = []
    for m in range(m_max + 1):
        ratio, _ = _ratio_for_degree(x, y, m)
        ratios.append(ratio)
        if ratio <= 1e-12 * (ratios[0] + 1e-300):
            return m, ratios
    best = int(np.argmin(ratios))
    while best > 0 and ratios[best - 1] <= ratios[best] * (1.0 + flat_rtol):
        best -= 1
    return best, ratios


def fit_polynomial_select_degree(
    w, values, m_max: int = 9, subset_seed: int = 7, flat_rtol: float = 0.01
) -> tuple[Polynomial, int]:
    """Least-squares polynomial with the degree chosen where the residual
    ratio SSR/(n-m-1) stops improving by more than ``flat_rtol``.

    The fit always runs on W rescaled to [-1, 1] (numpy's Polynomial domain
    mapping), and the chosen degree is cross-checked against a fit on a
    random 80% subset; a disagreement beyond +-1 falls back to the smaller
    degree.  Returns (polynomial, degree).
    """
    w = np.asarray(w, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(w) < m_max + 2:
        raise ValueError(f"need at least m_max + 2 = {m_max + 2} points")
    degree, _ = _select_degree(w, values, m_max, flat_rtol)

    rng = np.random.default_rng(subset_seed)
    n_sub = max(int(round(0.8 * len(w))), 2)
    sub_max = min(m_max, n_sub - 2)
    idx = np.sort(rng.choice(len(w), size=n_sub, replace=False))
    degree_sub, _ = _select_degree(w[idx], values[idx], sub_max, flat_rtol)
    if abs(degree - degree_sub) > 1:
        degree = min(degree, degree_sub)

    poly = Polynomial.fit(w, values, degree)
    return poly, degree


def interior_grid(w) -> np.ndarray:
    """The data's W points with both endpoints dropped (derivatives at the
    fit boundary are not trusted)."""
    w = np.asarray(w, dtype=float)
    if len(w) < 3:
        raise ValueError("need at least 3 points to form an interior grid")
    return w[1:-1]


def derivative_curve(poly: Polynomial, order: int, w_grid) -> tuple[np.ndarray, np.ndarray]:
    """Analytic derivative of the fitted polynomial evaluated on a grid."""
    if order < 1:
        raise ValueError("order must be >= 1")
    w_grid = np.asarray(w_grid, dtype=float)
    return w_grid, poly.deriv(order)(w_grid)


def collapse_transform(
    curves: dict[int, tuple[np.ndarray, np.ndarray]], params: CollapseParams
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Pure coordinate transform of per-L derivative curves:
    x = L^b (W - W_c), y = L^{-a} value."""
    out = {}
    for length, (w, value) in curves.items():
        w = np.asarray(w, dtype=float)
        value = np.asarray(value, dtype=float)
        x = length**params.exponent_b * (w - params.w_c)
        y = length ** (-params.exponent_a) * value
        out[length] = (x, y)
    return out


def collapse_quality(transformed: dict[int, tuple[np.ndarray, np.ndarray]],
                     n_grid: int = 101) -> float:
    """Across-size variance of the transformed curves on the common x window,
    normalized by the total variance; 0 means perfect collapse."""
    if len(transformed) < 2:
        raise ValueError("need at least two curves")
    lo = max(float(np.min(x)) for x, _ in transformed.values())
    hi = min(float(np.max(x)) for x, _ in transformed.values())
    if lo >= hi:
        raise ValueError("curves have no overlapping x range")
    grid = np.linspace(lo, hi, n_grid)
    rows = []
    for x, y in transformed.values():
        order = np.argsort(x)
        rows.append(np.interp(grid, x[order], y[order]))
    rows = np.array(rows)
    across = float(np.mean(np.var(rows, axis=0)))
    total = float(np.var(rows))
    if total < 1e-300:
        return 0.0
    return across / total


def grid_search_collapse(
    curves: dict[int, tuple[np.ndarray, np.ndarray]],
    a_grid,
    b_grid,
    wc_grid,
    derivative_order: int = 2,
) -> list[tuple[CollapseParams, float]]:
    """Exhaustive collapse-quality evaluation over the parameter grid.

    Returns (params, quality) sorted by quality; exact ties break toward the
    smaller |a| + |b|.
    """
    a_grid = np.atleast_1d(np.asarray(a_grid, dtype=float))
    b_grid = np.atleast_1d(np.asarray(b_grid, dtype=float))
    wc_grid = np.atleast_1d(np.asarray(wc_grid, dtype=float))
    if a_grid.size == 0 or b_grid.size == 0 or wc_grid.size == 0:
        raise ValueError("empty parameter grid")
    results = []
    for a, b, wc in product(a_grid, b_grid, wc_grid):
        params = CollapseParams(
            exponent_a=float(a), exponent_b=float(b), w_c=float(wc),
            derivative_order=derivative_order,
        )
        quality = collapse_quality(collapse_transform(curves, params))
        results.append((params, quality))
    results.sort(
        key=lambda item: (
            item[1],
            abs(item[0].exponent_a) + abs(item[0].exponent_b),
            item[0].exponent_a,
            item[0].exponent_b,
            item[0].w_c,
        )
    )
    return results


def derivative_curves_from_disorder(
    curves: list[DisorderCurve], order: int, m_max: int = 9
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Fit each per-L curve (degree-selected), differentiate, and evaluate on
    the interior W grid."""
    out = {}
    for curve in curves:
        poly, _ = fit_polynomial_select_degree(curve.w, curve.mean, m_max=m_max)
        out[curve.length] = derivative_curve(poly, order, interior_grid(curve.w))
    return out


def write_curves_csv(curves: list[DisorderCurve], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVES_HEADER)
        for curve in curves:
            for i in range(len(curve.w)):
                writer.writerow(
                    [
                        curve.length,
                        curve.indicator,
                        f"{curve.w[i]:.10g}",
                        f"{curve.mean[i]:.12g}",
                        f"{curve.stderr[i]:.12g}",
                        curve.n_samples[i],
                    ]
                )


def read_curves_csv(source) -> list[DisorderCurve]:
    """Parse a curves CSV (path or file object) into DisorderCurve objects."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="") as fh:
            return read_curves_csv(io.StringIO(fh.read()))
    reader = csv.reader(source)
    header = next(reader, None)
    if header != CURVES_HEADER:
        raise ValueError(f"unexpected curves header {header}")
    rows = {}
    for row in reader:
        if not row:
            continue
        key = (int(row[0]), row[1])
        rows.setdefault(key, []).append(
            (float(row[2]), float(row[3]), float(row[4]), int(row[5]))
        )
    curves = []
    for (length, indicator), pts in rows.items():
        pts.sort(key=lambda p: p[0])
        w, mean, stderr, n = map(np.array, zip(*pts))
        curves.append(
            DisorderCurve(
                length=length, indicator=indicator, w=w, mean=mean,
                stderr=stderr, n_samples=n.astype(int),
            )
        )
    return curves
