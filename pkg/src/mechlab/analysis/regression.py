"""Linear probability models with session-clustered standard errors.

OLS is solved through a pivoted QR factorisation of the design matrix. A
column whose pivot falls below ``RANK_TOL`` times the largest pivot is
treated as collinear and reported by name. The clustered covariance is the
usual sandwich ``B M B`` with ``B = (X'X)^-1`` and ``M = sum_g X_g'u_g u_g'X_g``,
scaled by ``G/(G-1) * (N-1)/(N-K)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg, optimize, stats

from ..mechanism import BUILTIN_NAMES
from ..simulation import SessionDataset
from .frames import BASELINE, beginner_frame, group_frame

RANK_TOL = 1e-10

TYPE_PAIR_DUMMIES = {"BE": "1 expert, 1 beginner", "EE": "2 experts"}


class RankDeficientError(ValueError):
    """The design matrix is not of full column rank."""


class ClusterError(ValueError):
    """Clustered standard errors need at least two clusters."""


@dataclass(frozen=True)
class RegressionSpec:
    dependent: str
    type_pair_dummies: bool = True
    cluster: str | None = "session"  # None: every observation is its own cluster
    exclude_censored: bool = False
    small_sample: bool = True
    baseline: str = BASELINE
    name: str = ""


@dataclass
class FitResult:
    names: list[str]
    coef: np.ndarray
    se: np.ndarray
    pvalues: np.ndarray
    n_obs: int
    n_clusters: int
    r2: float
    loglik: float
    residuals: np.ndarray = field(repr=False)
    design: np.ndarray = field(repr=False)
    cov: np.ndarray = field(repr=False)
    spec: RegressionSpec | None = None

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def stderr(self, name: str) -> float:
        return float(self.se[self.names.index(name)])

    def pvalue(self, name: str) -> float:
        return float(self.pvalues[self.names.index(name)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"term": self.names, "coef": self.coef, "se": self.se, "p": self.pvalues})


def design_matrix(frame: pd.DataFrame, spec: RegressionSpec) -> tuple[np.ndarray, list[str]]:
    """Constant, one dummy per non-baseline mechanism present, optional type-pair dummies.

    A dummy whose category never occurs in ``frame`` is left out rather than
    entered as a column of zeros.
    """
    cols = [np.ones(len(frame))]
    names = ["Constant"]
    present = set(frame["mechanism"])
    for mech in BUILTIN_NAMES:
        if mech != spec.baseline and mech in present:
            cols.append((frame["mechanism"] == mech).to_numpy(dtype=float))
            names.append(f"{mech} mechanism")
    if spec.type_pair_dummies:
        pairs = set(frame["type_pair"])
        for pair, label in TYPE_PAIR_DUMMIES.items():
            if pair not in pairs:
                continue
            cols.append((frame["type_pair"] == pair).to_numpy(dtype=float))
            names.append(label)
    return np.column_stack(cols), names


def _prepare(data, spec: RegressionSpec) -> pd.DataFrame:
    frame = group_frame(data) if isinstance(data, SessionDataset) else data
    if spec.exclude_censored and "censored" in frame:
        frame = frame[~frame["censored"].astype(bool)]
    return frame.reset_index(drop=True)


def _clusters(frame: pd.DataFrame, spec: RegressionSpec) -> np.ndarray:
    if spec.cluster is None:
        return np.arange(len(frame))
    return pd.factorize(frame[spec.cluster], sort=True)[0]


def ols(X: np.ndarray, y: np.ndarray, names: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and ``(X'X)^-1`` via pivoted QR; raises on collinearity.

    With an intercept in the first column the slopes are solved on centred
    data, so a constant ``y`` yields slopes of exactly zero.
    """
    q, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > RANK_TOL * diag[0])) if diag.size else 0
    if rank < X.shape[1]:
        dropped = [names[k] for k in piv[rank:]]
        raise RankDeficientError(f"design matrix is rank deficient; collinear columns: {', '.join(dropped)}")
    rinv = linalg.solve_triangular(r, np.eye(r.shape[0]))
    bread_p = rinv @ rinv.T
    bread = np.empty_like(bread_p)
    bread[np.ix_(piv, piv)] = bread_p
    if X.shape[1] > 1 and np.all(X[:, 0] == 1):
        xbar = X[:, 1:].mean(axis=0)
        ybar = y[0] if np.ptp(y) == 0 else y.mean()  # the float mean of equal values can round
        slopes = _qr_solve(X[:, 1:] - xbar, y - ybar)
        return np.concatenate([[ybar - xbar @ slopes], slopes]), bread
    beta = np.empty(X.shape[1])
    beta[piv] = linalg.solve_triangular(r, q.T @ y)
    return beta, bread


def _qr_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    q, r, piv = linalg.qr(A, mode="economic", pivoting=True)
    out = np.empty(A.shape[1])
    out[piv] = linalg.solve_triangular(r, q.T @ b)
    return out


def cluster_covariance(X, resid, groups, bread, small_sample: bool = True) -> tuple[np.ndarray, int]:
    n, k = X.shape
    n_groups = int(groups.max()) + 1 if n else 0
    if n_groups < 2:
        raise ClusterError(f"need at least two clusters, got {n_groups}")
    scores = np.zeros((n_groups, k))
    np.add.at(scores, groups, X * resid[:, None])
    meat = scores.T @ scores
    cov = bread @ meat @ bread
    if small_sample:
        cov *= n_groups / (n_groups - 1) * (n - 1) / (n - k)
    return cov, n_groups


def _pvalues(coef: np.ndarray, se: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, coef / np.where(se > 0, se, 1), np.where(coef == 0, 0.0, np.inf))
    return 2 * stats.norm.sf(np.abs(z))


def fit_lpm(data, spec: RegressionSpec) -> FitResult:
    """OLS with cluster-robust covariance; ``data`` is a frame or a :class:`SessionDataset`."""
    frame = _prepare(data, spec)
    X, names = design_matrix(frame, spec)
    y = frame[spec.dependent].to_numpy(dtype=float)
    groups = _clusters(frame, spec)
    beta, bread = ols(X, y, names)
    resid = y - X @ beta
    cov, n_groups = cluster_covariance(X, resid, groups, bread, spec.small_sample)
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    n = len(y)
    ssr = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1 - ssr / sst if sst > 0 else float("nan")
    loglik = -n / 2 * (np.log(2 * np.pi * ssr / n) + 1) if ssr > 0 else float("inf")
    return FitResult(names, beta, se, _pvalues(beta, se), n, n_groups, r2, loglik, resid, X, cov, spec)


def fit_interval(data, spec: RegressionSpec, lower: float = 0.0, upper: float = 1.0) -> FitResult:
    """Gaussian regression treating censored rows as interval-observed in [lower, upper].

    Maximum likelihood over ``(beta, log sigma)``; clustered sandwich covariance
    from analytic per-observation scores and a finite-difference Hessian.
    ``r2`` is not defined for this model and is reported as NaN.
    """
    frame = group_frame(data) if isinstance(data, SessionDataset) else data
    frame = frame.reset_index(drop=True)
    X, names = design_matrix(frame, spec)
    y = frame[spec.dependent].to_numpy(dtype=float)
    cens = frame["censored"].to_numpy(dtype=bool)
    groups = _clusters(frame, spec)
    k = X.shape[1]
    beta0, _ = ols(X[~cens], y[~cens], names) if (~cens).sum() > k else ols(X, y, names)
    s0 = np.std(y[~cens] - X[~cens] @ beta0) if (~cens).any() else 0.5
    theta0 = np.append(beta0, np.log(max(s0, 1e-3)))

    def contributions(theta):
        b, sigma = theta[:k], np.exp(theta[k])
        mu = X @ b
        r = (y - mu) / sigma
        ll = np.where(cens, 0.0, stats.norm.logpdf(r) - np.log(sigma))
        za, zb = (lower - mu) / sigma, (upper - mu) / sigma
        prob = np.clip(stats.norm.cdf(zb) - stats.norm.cdf(za), 1e-300, None)
        ll = np.where(cens, np.log(prob), ll)
        g_beta = np.where(cens, -(stats.norm.pdf(zb) - stats.norm.pdf(za)) / (prob * sigma), r / sigma)
        g_sig = np.where(cens, -(zb * stats.norm.pdf(zb) - za * stats.norm.pdf(za)) / prob, r**2 - 1)
        scores = np.column_stack([X * g_beta[:, None], g_sig])
        return ll, scores

    res = optimize.minimize(
        lambda th: -contributions(th)[0].sum(),
        theta0,
        jac=lambda th: -contributions(th)[1].sum(axis=0),
        method="BFGS",
        options={"gtol": 1e-9},
    )
    theta = res.x
    ll, scores = contributions(theta)
    h = np.zeros((k + 1, k + 1))
    eps = 1e-6
    for j in range(k + 1):
        step = np.zeros(k + 1)
        step[j] = eps
        h[:, j] = (contributions(theta + step)[1].sum(axis=0) - contributions(theta - step)[1].sum(axis=0)) / (2 * eps)
    h = (h + h.T) / 2
    bread = np.linalg.inv(-h)
    n_groups = int(groups.max()) + 1
    if n_groups < 2:
        raise ClusterError(f"need at least two clusters, got {n_groups}")
    g_scores = np.zeros((n_groups, k + 1))
    np.add.at(g_scores, groups, scores)
    cov = bread @ (g_scores.T @ g_scores) @ bread
    if spec.small_sample:
        cov *= n_groups / (n_groups - 1)
    cov = cov[:k, :k]
    beta = theta[:k]
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitResult(names, beta, se, _pvalues(beta, se), len(y), n_groups, float("nan"),
                     float(ll.sum()), y - X @ beta, X, cov, spec)


# -- the six models of the results table -----------------------------------------

MODELS = {
    "eq-wo": [RegressionSpec("worker_optimal", exclude_censored=True, name="worker-optimal equilibrium observed")],
    "eq-truth": [RegressionSpec("truthful", exclude_censored=True, name="truthful equilibrium observed")],
    "action": [
        RegressionSpec("deceptive", type_pair_dummies=False, name="deceptive action played"),
        RegressionSpec("truthful", type_pair_dummies=False, name="truthful action played"),
    ],
    "profit": [
        RegressionSpec("staffer_profit", name="staffer profit"),
        RegressionSpec("workers_profit", name="workers' combined profit"),
    ],
}


def fit_models(dataset: SessionDataset, models=("eq-wo", "eq-truth", "action", "profit"), censoring: str = "drop") -> list[FitResult]:
    """Fit the requested model families in results-table column order.

    ``censoring="interval"`` fits the two equilibrium models with
    :func:`fit_interval` instead of dropping censored rows.
    """
    gf = group_frame(dataset)
    bf = beginner_frame(dataset)
    out = []
    for key in models:
        for spec in MODELS[key]:
            if key == "action":
                out.append(fit_lpm(bf, spec))
            elif key.startswith("eq") and censoring == "interval":
                out.append(fit_interval(gf, spec))
            else:
                out.append(fit_lpm(gf, spec))
    return out


def _stars(p: float) -> str:
    if not np.isfinite(p):
        return ""
    return "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.1 else ""


def results_table(fits: list[FitResult]) -> str:
    """Aligned text table: coefficients with stars, clustered SEs in parentheses."""
    terms = []
    for f in fits:
        for name in f.names[1:] + ["Constant"]:
            if name not in terms and name != "Constant":
                terms.append(name)
    terms.append("Constant")
    header = ["VARIABLES"] + [f"({k + 1})" for k in range(len(fits))]
    titles = [""] + [(f.spec.name if f.spec else "") for f in fits]
    rows = [header, titles]
    for term in terms:
        coef_row, se_row = [term], [""]
        for f in fits:
            if term in f.names:
                coef_row.append(f"{f[term]:.3f}{_stars(f.pvalue(term))}")
                se_row.append(f"({f.stderr(term):.3f})")
            else:
                coef_row += [""]
                se_row += [""]
        rows += [coef_row, se_row]
    rows.append(["Observations"] + [str(f.n_obs) for f in fits])
    rows.append(["R-squared"] + ["" if not np.isfinite(f.r2) else f"{f.r2:.3f}" for f in fits])
    rows.append(["log likelihood"] + [f"{f.loglik:.1f}" for f in fits])
    widths = [max(len(r[j]) for r in rows) for j in range(len(header))]
    lines = ["  ".join(c.ljust(w) if j == 0 else c.rjust(w) for j, (c, w) in enumerate(zip(r, widths))).rstrip() for r in rows]
    lines.append("*** p<0.01, ** p<0.05, * p<0.1; clustered standard errors in parentheses")
    return "\n".join(lines) + "\n"


def coefficients_csv(fits: list[FitResult]) -> pd.DataFrame:
    frames = []
    for k, f in enumerate(fits, start=1):
        df = f.to_frame()
        df.insert(0, "model", f.spec.name if f.spec else "")
        df.insert(0, "column", k)
        df["n_obs"] = f.n_obs
        df["r2"] = f.r2
        df["loglik"] = f.loglik
        frames.append(df)
    return pd.concat(frames, ignore_index=True)
