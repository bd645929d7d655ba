"""Cross-replicate aggregation, error bands and linear-fit diagnostics."""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import norm
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from app.utils.logging import get_logger

logger = get_logger(__name__)

BAND_Z = float(norm.ppf(0.975))


@dataclass
class MeanSummary:
    """Cross-replicate mean at each recorded step with a 95% band on its norm."""

    steps: np.ndarray
    mean: np.ndarray  # (T, d)
    norm: np.ndarray  # (T,)
    se: np.ndarray  # (T,) standard error of the norm
    replicates: np.ndarray  # (T,) replicates with at least one level-L sample

    @property
    def lo95(self) -> np.ndarray:
        return np.maximum(self.norm - BAND_Z * self.se, 0.0)

    @property
    def hi95(self) -> np.ndarray:
        return self.norm + BAND_Z * self.se


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r2: float


def summarize_means(steps: np.ndarray, means: np.ndarray) -> MeanSummary:
    """Average per-replicate running means; NaN rows (no level-L sample yet) are left out.

    The mean uses compensated summation so it does not depend on replicate order.
    """
    T, _, d = means.shape
    mean = np.full((T, d), np.nan)
    norms = np.full(T, np.nan)
    se = np.full(T, np.nan)
    counts = np.zeros(T, dtype=int)

    for t in range(T):
        rows = means[t][~np.isnan(means[t, :, 0])]
        k = rows.shape[0]
        counts[t] = k
        if k == 0:
            continue
        m = np.array([math.fsum(rows[:, j]) / k for j in range(d)])
        mean[t] = m
        norms[t] = float(np.linalg.norm(m))
        if k < 2:
            se[t] = 0.0
            continue
        cov = np.atleast_2d(np.cov(rows, rowvar=False, ddof=1)) / k
        if norms[t] > 0.0:
            g = m / norms[t]
            se[t] = math.sqrt(max(float(g @ cov @ g), 0.0))
        else:
            se[t] = math.sqrt(max(float(np.trace(cov)), 0.0))
    return MeanSummary(steps=np.asarray(steps), mean=mean, norm=norms, se=se, replicates=counts)


def first_below(steps: Sequence[int], values: Sequence[float], threshold: float) -> Optional[int]:
    """First recorded step whose value is strictly below the threshold."""
    values = np.asarray(values, dtype=float)
    with np.errstate(invalid="ignore"):
        hits = np.flatnonzero(values < threshold)
    return int(steps[hits[0]]) if hits.size else None


def crossing_row(algorithm: str, separation: float, summary: MeanSummary, threshold: float) -> dict:
    crossing = first_below(summary.steps, summary.norm, threshold)
    if crossing is None:
        logger.warning(
            f"{algorithm} D={separation:g}: mean norm never fell below {threshold:g} "
            f"within {int(summary.steps[-1]) if summary.steps.size else 0} steps (censored)"
        )
    return {
        "algorithm": algorithm,
        "D": separation,
        "D_squared": separation**2,
        "crossing_N": crossing,
        # lower band end falls below the threshold first
        "lo95_N": first_below(summary.steps, summary.lo95, threshold),
        "hi95_N": first_below(summary.steps, summary.hi95, threshold),
        "censored": crossing is None,
    }


def log_squared_inverse(value: float) -> float:
    return math.log(1.0 / value) ** 2


def accuracy_rows(algorithm: str, separation: float, summary: MeanSummary) -> List[dict]:
    """(N, |mu|, log^2(1/|mu|)) with a delta-method band on the transformed value."""
    rows = []
    skipped = 0
    for t, step in enumerate(summary.steps):
        n, se = summary.norm[t], summary.se[t]
        row = {
            "algorithm": algorithm,
            "D": separation,
            "N": int(step),
            "mean_norm": n,
            "log2_inv_norm": math.nan,
            "lo95": math.nan,
            "hi95": math.nan,
            "skipped": True,
        }
        if math.isfinite(n) and n > 0.0:
            value = log_squared_inverse(n)
            # d/dn log^2(1/n) = 2 log(n) / n
            half = BAND_Z * abs(2.0 * math.log(n) / n) * se
            row.update(log2_inv_norm=value, lo95=max(value - half, 0.0), hi95=value + half, skipped=False)
        else:
            skipped += 1
        rows.append(row)
    if skipped:
        logger.warning(f"{algorithm} D={separation:g}: log transform skipped at {skipped} step(s)")
    return rows


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Least-squares line y = a x + b with its coefficient of determination."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    y = np.asarray(y, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("a linear fit needs at least two points")
    model = LinearRegression().fit(x, y)
    return LinearFit(
        slope=float(model.coef_[0]),
        intercept=float(model.intercept_),
        r2=float(r2_score(y, model.predict(x))),
    )


def scaling_fit(table: pd.DataFrame, algorithm: str = "stmh") -> LinearFit:
    """Fit crossing step against D^2 over the uncensored rows of one algorithm."""
    rows = table[(table["algorithm"] == algorithm) & ~table["censored"]]
    return linear_fit(rows["D_squared"], rows["crossing_N"].astype(float))


RATIO_COLUMNS = ["D_from", "D_to", "ratio", "lower_bound"]


def successive_ratios(
    table: pd.DataFrame, algorithm: str = "mh", horizon: Optional[int] = None
) -> pd.DataFrame:
    """crossing_N at each D over crossing_N at the previous D.

    A censored crossing is only known to exceed the run length. With a horizon
    it enters as that lower bound, so a censored numerator gives a lower bound on
    the ratio and a censored denominator leaves it undetermined (NaN). Without a
    horizon censored rows are dropped.
    """
    rows = table[table["algorithm"] == algorithm].sort_values("D")
    if horizon is None:
        rows = rows[~rows["censored"]]
    censored = rows["censored"].to_numpy(dtype=bool)
    crossing = np.where(censored, float(horizon or 0), rows["crossing_N"].to_numpy(dtype=float, na_value=np.nan))
    D = rows["D"].to_numpy(dtype=float)

    out = []
    for k in range(1, D.size):
        ratio = math.nan if censored[k - 1] else crossing[k] / crossing[k - 1]
        out.append({"D_from": D[k - 1], "D_to": D[k], "ratio": ratio, "lower_bound": bool(censored[k])})
    return pd.DataFrame(out, columns=RATIO_COLUMNS)


def accuracy_fits(table: pd.DataFrame, algorithm: str) -> dict:
    """R^2 of N against log^2(1/|mu|) and against log(1/|mu|)."""
    rows = table[(table["algorithm"] == algorithm) & ~table["skipped"]]
    return {
        "log_squared": linear_fit(rows["log2_inv_norm"], rows["N"]),
        "log": linear_fit(-np.log(rows["mean_norm"].to_numpy(dtype=float)), rows["N"]),
    }


FIT_COLUMNS = ["analysis", "algorithm", "term", "value", "lower_bound"]


def _fit_rows(analysis: str, algorithm: str, compute) -> List[dict]:
    try:
        terms = compute()
    except ValueError as e:
        logger.warning(f"{analysis} for {algorithm} skipped: {e}")
        return [{"analysis": analysis, "algorithm": algorithm, "term": "r2", "value": math.nan, "lower_bound": False}]
    return [
        {"analysis": analysis, "algorithm": algorithm, "term": term, "value": value, "lower_bound": False}
        for term, value in terms.items()
    ]


def fit_summary(
    scaling: Optional[pd.DataFrame] = None,
    accuracy: Optional[pd.DataFrame] = None,
    horizon: Optional[int] = None,
) -> pd.DataFrame:
    """Long table of the study diagnostics, one (analysis, algorithm, term) per row.

    scaling_fit: stmh crossing step against D^2 (uncensored rows) and the
    number of censored rows left out. successive_ratio: baseline crossing
    ratios between neighbouring D, lower bounds where censored. accuracy_fit:
    R^2 of N against log^2(1/|mu|) and against log(1/|mu|), per algorithm.
    """
    rows: List[dict] = []
    if scaling is not None:
        def scaling_terms():
            fit = scaling_fit(scaling, "stmh")
            censored = int(scaling[scaling["algorithm"] == "stmh"]["censored"].sum())
            return {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2, "censored_rows": censored}

        rows += _fit_rows("scaling_fit", "stmh", scaling_terms)
        for ratio in successive_ratios(scaling, "mh", horizon=horizon).itertuples():
            rows.append({
                "analysis": "successive_ratio", "algorithm": "mh",
                "term": f"D={ratio.D_to:g}/D={ratio.D_from:g}", "value": ratio.ratio,
                "lower_bound": ratio.lower_bound,
            })
    if accuracy is not None:
        for algorithm in sorted(set(accuracy["algorithm"])):
            def accuracy_terms(algorithm=algorithm):
                fits = accuracy_fits(accuracy, algorithm)
                return {"r2_log_squared": fits["log_squared"].r2, "r2_log": fits["log"].r2}

            rows += _fit_rows("accuracy_fit", algorithm, accuracy_terms)
    return pd.DataFrame(rows, columns=FIT_COLUMNS)


def tv_lower_bound_from_mean(mu: Sequence[float], C: float) -> float:
    """|mu|^2 / (C + |mu|^2): TV lower bound against a law with mean 0 and second moment C."""
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    sq = float(np.dot(np.ravel(mu), np.ravel(mu)))
    return sq / (C + sq)
