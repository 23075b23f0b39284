"""Probit regression, proportion tests and the distribution functions they use."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special

log = logging.getLogger(__name__)


def normal_cdf(x):
    return special.ndtr(x)


def chi2_sf(x, df):
    """Upper tail of the chi-square law, Q(df/2, x/2)."""
    if np.any(np.asarray(df) < 1):
        raise ValueError("degrees of freedom must be >= 1")
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    out = special.gammaincc(np.asarray(df, dtype=float) / 2.0, x / 2.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ProportionTest:
    diff: float
    ci_low: float
    ci_high: float
    chi2: float
    p_value: float
    df: int = 1


Z95 = 1.959963984540054


def proportions_chi2(xs, ns) -> tuple[float, float, int]:
    """Chi-square test that k proportions are equal, using the pooled rate.

    Returns (chi2, p_value, df) with df = k - 1.
    """
    xs = np.asarray(xs, dtype=float)
    ns = np.asarray(ns, dtype=float)
    if xs.shape != ns.shape or xs.ndim != 1 or xs.size < 2:
        raise ValueError("need matching 1-d counts for at least two groups")
    if np.any(ns < 1) or np.any(xs < 0) or np.any(xs > ns):
        raise ValueError("counts must satisfy 0 <= x <= n with n >= 1")
    pooled = xs.sum() / ns.sum()
    if pooled in (0.0, 1.0):
        raise ZeroDivisionError("pooled proportion is 0 or 1; the statistic has zero variance")
    chi2 = float(np.sum((xs - ns * pooled) ** 2 / (ns * pooled * (1.0 - pooled))))
    df = xs.size - 1
    return chi2, chi2_sf(chi2, df), df


def two_proportion_test(x1: int, n1: int, x2: int, n2: int) -> ProportionTest:
    chi2, p, _ = proportions_chi2([x1, x2], [n1, n2])
    p1, p2 = x1 / n1, x2 / n2
    diff = p1 - p2
    se = np.sqrt(p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2)
    return ProportionTest(float(diff), float(diff - Z95 * se), float(diff + Z95 * se), chi2, float(p))


# ---------------------------------------------------------------- probit

P_CLIP = 1e-10


@dataclass(frozen=True)
class ProbitFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    names: tuple[str, ...] = ()
    nobs: int = 0

    @property
    def z(self) -> np.ndarray:
        return self.coefficients / self.standard_errors

    @property
    def p_values(self) -> np.ndarray:
        return 2.0 * special.ndtr(-np.abs(self.z))

    @property
    def aic(self) -> float:
        return 2.0 * self.coefficients.size - 2.0 * self.log_likelihood

    def to_frame(self) -> pd.DataFrame:
        names = self.names or tuple(f"x{i}" for i in range(self.coefficients.size))
        return pd.DataFrame(
            {"term": names, "coef": self.coefficients, "se": self.standard_errors,
             "z": self.z, "p_value": self.p_values}
        )


def _mills(z):
    """phi(z) / Phi(z), finite for very negative z."""
    return np.exp(-0.5 * z * z - 0.5 * np.log(2 * np.pi) - special.log_ndtr(z))


def probit_loglik(beta, X, y) -> float:
    p = np.clip(special.ndtr(X @ beta), P_CLIP, 1.0 - P_CLIP)
    return float(np.sum(np.where(y > 0, np.log(p), np.log1p(-p))))


def _score_info(beta, X, q):
    z = q * (X @ beta)
    lam = _mills(z)
    score = X.T @ (q * lam)
    w = lam * (lam + z)
    info = (X * w[:, None]).T @ X
    return score, info


def probit_fit(X, y, names=None, tol: float = 1e-6, max_iter: int = 100,
               max_halvings: int = 50) -> ProbitFit:
    """Maximum-likelihood probit by damped Newton steps.

    Each step is halved until the log-likelihood stops decreasing. Standard
    errors come from the inverse observed information at the solution.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be (N, k) and y of length N")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary")
    if y.min() == y.max():
        raise ValueError("y is constant; the probit likelihood has no maximum")
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(X.shape[1]))
    _check_rank(X, names)

    q = 2.0 * y - 1.0
    beta = np.zeros(X.shape[1])
    ll = probit_loglik(beta, X, y)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        score, info = _score_info(beta, X, q)
        if np.max(np.abs(score)) <= tol:
            converged = True
            it -= 1
            break
        stepvec = np.linalg.solve(info, score)
        t = 1.0
        for _ in range(max_halvings):
            cand = beta + t * stepvec
            ll_new = probit_loglik(cand, X, y)
            if ll_new >= ll:
                break
            t *= 0.5
        else:
            log.warning("probit line search failed at iteration %d", it)
            break
        beta, ll = cand, ll_new
    else:
        score, info = _score_info(beta, X, q)
        converged = bool(np.max(np.abs(score)) <= tol)
    if not converged:
        warnings.warn("probit fit did not converge", RuntimeWarning, stacklevel=2)
    _, info = _score_info(beta, X, q)
    cov = np.linalg.inv(info)
    se = np.sqrt(np.diag(cov))
    return ProbitFit(beta, se, ll, converged, it, names, X.shape[0])


def _check_rank(X, names):
    k = X.shape[1]
    if np.linalg.matrix_rank(X) == k:
        return
    bad = []
    kept = []
    for j in range(k):
        if np.linalg.matrix_rank(X[:, kept + [j]]) > len(kept):
            kept.append(j)
        else:
            bad.append(names[j])
    raise np.linalg.LinAlgError(f"design is rank deficient; collinear columns: {bad}")


# ---------------------------------------------------------------- design

STRUCTURE_TERMS = ("PCA", "OM", "FI", "PCA x FI", "PCA x OM", "OM x FI")
# column order for the benchmark grid; other grids get their own dummies
DESIGN_TERMS = STRUCTURE_TERMS + ("tau=1", "tau=10", "tau=30", "theta=0.8", "Constant")
_REQUIRED = ("network", "tau", "theta", "fi", "om", "pca", "classification")


class SchemaError(ValueError):
    pass


def check_schema(sweep: pd.DataFrame, required=_REQUIRED):
    missing = [c for c in required if c not in sweep.columns]
    if missing:
        raise SchemaError(f"sweep table is missing columns: {missing}")


def build_design(sweep: pd.DataFrame, network: str, terms=STRUCTURE_TERMS, taus=None):
    """Regressors for the less-biased indicator on one network.

    Columns are the structure ``terms`` in order, one dummy per tau level
    above the smallest (the omitted baseline), a dummy for the larger theta
    and the intercept. Columns that are constant or a copy of earlier ones
    are dropped with a warning; on the regular and complete graphs this
    removes the centrality and adjacency terms. Returns (X, y, names).
    """
    check_schema(sweep)
    df = sweep[sweep["network"] == network]
    if taus is not None:
        df = df[df["tau"].isin(taus)]
    if df.empty:
        raise ValueError(f"no rows for network {network!r}")
    y = (df["classification"] == "less_biased").to_numpy(dtype=float)
    fi = df["fi"].to_numpy(dtype=float)
    om = df["om"].astype("Float64").fillna(0).to_numpy(dtype=float)
    pca = df["pca"].astype("Float64").fillna(0).to_numpy(dtype=float)
    tau = df["tau"].to_numpy()
    theta = df["theta"].to_numpy(dtype=float)
    cols = {
        "PCA": pca, "OM": om, "FI": fi,
        "PCA x FI": pca * fi, "PCA x OM": pca * om, "OM x FI": om * fi,
    }
    for t in np.unique(tau)[1:]:
        cols[f"tau={t}"] = (tau == t).astype(float)
    for th in np.unique(theta)[1:]:
        cols[f"theta={th:g}"] = (theta == th).astype(float)
    cols["Constant"] = np.ones(len(df))
    for t in terms:
        if t not in cols:
            raise ValueError(f"unknown design term {t!r}")
    wanted = list(terms) + [k for k in cols if k not in STRUCTURE_TERMS]
    # intercept first so that constant regressors are caught as duplicates of it
    kept: list[str] = []
    for name in ["Constant"] + wanted[:-1]:
        v = cols[name]
        if name != "Constant" and np.all(v == v[0]):
            warnings.warn(f"{network}: {name} is constant and was dropped", stacklevel=2)
            continue
        if kept and np.linalg.matrix_rank(np.column_stack([cols[k] for k in kept] + [v])) <= len(kept):
            warnings.warn(f"{network}: {name} is collinear with earlier terms and was dropped",
                          stacklevel=2)
            continue
        kept.append(name)
    names = [t for t in wanted if t in kept]
    X = np.column_stack([cols[k] for k in names])
    return X, y, names


def fit_network(sweep: pd.DataFrame, network: str, **kw) -> ProbitFit:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        X, y, names = build_design(sweep, network, **kw)
    return probit_fit(X, y, names)


def stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def _term_order(name: str):
    if name in STRUCTURE_TERMS:
        return (0, STRUCTURE_TERMS.index(name))
    if name.startswith("tau="):
        return (1, float(name[4:]))
    if name.startswith("theta="):
        return (2, float(name[6:]))
    return (3, 0.0)


def format_probit_table(fits: dict[str, ProbitFit], terms=None) -> str:
    """Text table with one column per network, estimates over standard errors."""
    labels = list(fits)
    if terms is None:
        terms = sorted({t for f in fits.values() for t in f.names}, key=_term_order)
    width = 12
    head = f"{'':<14}" + "".join(f"{'(' + k + ')':>{width}}" for k in labels)
    lines = [head, "-" * len(head)]
    for term in terms:
        est, err = [], []
        for k in labels:
            f = fits[k]
            if term in f.names:
                j = f.names.index(term)
                est.append(f"{f.coefficients[j]:.2f}{stars(f.p_values[j])}")
                err.append(f"({f.standard_errors[j]:.2f})")
            else:
                est.append("")
                err.append("")
        if not any(est):
            continue
        lines.append(f"{term:<14}" + "".join(f"{e:>{width}}" for e in est))
        lines.append(f"{'':<14}" + "".join(f"{e:>{width}}" for e in err))
    lines.append("-" * len(head))
    lines.append(f"{'Observations':<14}" + "".join(f"{fits[k].nobs:>{width},}" for k in labels))
    lines.append(f"{'Log lik.':<14}" + "".join(f"{fits[k].log_likelihood:>{width},.2f}" for k in labels))
    lines.append(f"{'AIC':<14}" + "".join(f"{fits[k].aic:>{width},.1f}" for k in labels))
    lines.append("* p<0.05; ** p<0.01; *** p<0.001")
    return "\n".join(lines)


def coefficients_frame(fits: dict[str, ProbitFit]) -> pd.DataFrame:
    frames = []
    for k, f in fits.items():
        d = f.to_frame()
        d.insert(0, "network", k)
        frames.append(d)
    return pd.concat(frames, ignore_index=True)


# ---------------------------------------------------------------- summaries

def phat_table(sweep: pd.DataFrame) -> pd.DataFrame:
    """Share of less-biased outcomes by network (rows) and tau (columns)."""
    return sweep.pivot_table(index="network", columns="tau", values="less_biased", aggfunc="mean")


def open_narrow_table(sweep: pd.DataFrame, networks=("B", "D", "E", "F", "H")) -> pd.DataFrame:
    """Pooled, open-minded (partisans adjacent) and narrow-minded p-hat by tau."""
    rows = []
    for net in networks:
        d = sweep[sweep["network"] == net]
        if d.empty:
            continue
        groups = {"pooled": d, "open-minded": d[d["om"] == 1], "narrow-minded": d[d["om"] == 0]}
        for name, g in groups.items():
            rec = {"network": net, "partisans": name}
            rec.update(g.groupby("tau")["less_biased"].mean().to_dict())
            rows.append(rec)
    return pd.DataFrame(rows).set_index(["network", "partisans"])
