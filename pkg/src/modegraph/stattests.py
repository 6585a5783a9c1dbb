"""Stationarity and nonlinearity test battery.

Implements ADF, KPSS, BDS (on AR(1) residuals), Ljung-Box, Jarque-Bera
and the autocorrelation of squared returns, and aggregates them into a
suitability verdict: a series is a good decomposition candidate when it
is non-stationary (ADF fails to reject a unit root while KPSS rejects
stationarity) and shows nonlinear dependence (BDS rejects in at least
one embedding dimension).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

from .series import TimeSeries, pct_returns, rolling_stat

__all__ = [
    "TestResult",
    "JarqueBeraResult",
    "SuitabilityReport",
    "adf",
    "kpss",
    "bds",
    "ljung_box",
    "jarque_bera",
    "acf",
    "suitability_report",
]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    critical_values: Dict[str, float]
    null_hypothesis: str
    reject_at_5pct: bool

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "critical_values": dict(self.critical_values),
            "null_hypothesis": self.null_hypothesis,
            "reject_at_5pct": self.reject_at_5pct,
        }


@dataclass(frozen=True)
class JarqueBeraResult(TestResult):
    skewness: float = 0.0
    kurtosis: float = 0.0  # excess kurtosis, normal = 0

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["skewness"] = self.skewness
        out["kurtosis"] = self.kurtosis
        return out


@dataclass(frozen=True)
class SuitabilityReport:
    price_adf: TestResult
    price_kpss: TestResult
    returns_adf: TestResult
    returns_kpss: TestResult
    bds: List[TestResult]
    ljung_box_sq: TestResult
    jarque_bera: TestResult
    jarque_bera_returns: TestResult
    sq_acf_significant_lags: int
    max_sq_acf: float
    rolling_vol_summary: Tuple[float, float]
    verdict: str

    def to_json(self) -> str:
        payload = {
            "price_adf": self.price_adf.to_dict(),
            "price_kpss": self.price_kpss.to_dict(),
            "returns_adf": self.returns_adf.to_dict(),
            "returns_kpss": self.returns_kpss.to_dict(),
            "bds": [r.to_dict() for r in self.bds],
            "ljung_box_sq": self.ljung_box_sq.to_dict(),
            "jarque_bera": self.jarque_bera.to_dict(),
            "jarque_bera_returns": self.jarque_bera_returns.to_dict(),
            "sq_acf_significant_lags": self.sq_acf_significant_lags,
            "max_sq_acf": self.max_sq_acf,
            "rolling_vol_summary": list(self.rolling_vol_summary),
            "verdict": self.verdict,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _values(s) -> np.ndarray:
    v = getattr(s, "values", s)
    return np.asarray(v, dtype=float)


# ----------------------------------------------------------------------
# ADF: MacKinnon (1994) p-value response surfaces and MacKinnon (2010)
# finite-sample critical-value surfaces, constant ("c") and
# constant-plus-trend ("ct") regressions.
# ----------------------------------------------------------------------

_TAU_STAR = {"c": -1.61, "ct": -2.89}
_TAU_MIN = {"c": -18.83, "ct": -16.18}
_TAU_MAX = {"c": 2.74, "ct": 0.7}
# p = Phi(c0 + c1*tau + c2*tau^2 [+ c3*tau^3])
_TAU_SMALLP = {
    "c": (2.1659, 1.4412, 0.038269),
    "ct": (3.2512, 1.6047, 0.049588),
}
_TAU_LARGEP = {
    "c": (1.7339, 0.93202, -0.12745, -0.010368),
    "ct": (2.5261, 0.61654, -0.37956, -0.060285),
}
# critical value = b0 + b1/T + b2/T^2 + b3/T^3
_CRIT_SURFACE = {
    "c": {
        "1%": (-3.43035, -6.5393, -16.786, -79.433),
        "5%": (-2.86154, -2.8903, -4.234, -40.040),
        "10%": (-2.56677, -1.5384, -2.809, 0.0),
    },
    "ct": {
        "1%": (-3.95877, -9.0531, -28.428, -134.155),
        "5%": (-3.41049, -4.3904, -9.036, -45.374),
        "10%": (-3.12705, -2.5856, -3.925, -22.380),
    },
}


def _check_regression(regression: str) -> str:
    if regression not in ("c", "ct"):
        raise ValueError("regression must be 'c' (constant) or 'ct' (constant+trend)")
    return regression


def _mackinnon_pvalue(stat: float, regression: str) -> float:
    if not np.isfinite(stat):
        raise ValueError("non-finite ADF statistic")
    if stat > _TAU_MAX[regression]:
        return 1.0
    if stat < _TAU_MIN[regression]:
        return 0.0
    coefs = (
        _TAU_SMALLP[regression]
        if stat <= _TAU_STAR[regression]
        else _TAU_LARGEP[regression]
    )
    return float(sps.norm.cdf(np.polyval(coefs[::-1], stat)))


def _mackinnon_crit(regression: str, nobs: int) -> Dict[str, float]:
    out = {}
    for level, b in _CRIT_SURFACE[regression].items():
        out[level] = b[0] + b[1] / nobs + b[2] / nobs**2 + b[3] / nobs**3
    return out


def _lstsq_ssr(X: np.ndarray, y: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return float(resid @ resid)


def _adf_design(v: np.ndarray, k: int, regression: str):
    """Regression rows for lag order k: dy[t] on det terms, y[t-1], dy lags."""
    dy = np.diff(v)
    rows = dy.size - k
    y = dy[k:]
    cols = [np.ones(rows)]
    if regression == "ct":
        cols.append(np.arange(1.0, rows + 1))
    cols.append(v[k:-1])  # lagged level
    for j in range(1, k + 1):
        cols.append(dy[k - j : dy.size - j])
    return np.column_stack(cols), y


def adf(s, regression: str = "c", max_lag: Optional[int] = None) -> TestResult:
    """Augmented Dickey-Fuller unit-root test.

    The statistic is the t-ratio on the lagged level in a regression of
    the first difference on deterministic terms, the lagged level, and
    AIC-selected lagged differences (selection over a common trimmed
    sample, refit on the full usable sample). P-values use the MacKinnon
    response-surface approximation; critical values are finite-sample
    surfaces evaluated at the regression sample size.

    Parameters
    ----------
    regression : {"c", "ct"}
        Constant, or constant plus linear trend.
    max_lag : int, optional
        Largest lag order considered; default floor(12*(n/100)**0.25).
    """
    regression = _check_regression(regression)
    v = _values(s)
    n = v.size
    if n < 20:
        raise ValueError("need at least 20 observations, got %d" % n)
    if max_lag is None:
        max_lag = int(math.floor(12.0 * (n / 100.0) ** 0.25))
    max_lag = max(0, min(max_lag, (n - 1) // 2 - 2))
    # AIC over a common sample trimmed to the largest lag
    ndet = 1 if regression == "c" else 2
    X_full, y_full = _adf_design(v, max_lag, regression)
    rows = y_full.size
    best_k, best_aic = 0, np.inf
    with np.errstate(divide="ignore"):
        for k in range(0, max_lag + 1):
            Xk = X_full[:, : ndet + 1 + k]
            ssr = _lstsq_ssr(Xk, y_full)
            aic = rows * np.log(ssr / rows) + 2 * (ndet + 1 + k)
            if aic < best_aic:
                best_aic, best_k = aic, k
    # refit the chosen order on its full usable sample
    X, y = _adf_design(v, best_k, regression)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise ValueError("singular regression matrix")
    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    dof = y.size - X.shape[1]
    if ssr <= 0.0 or dof <= 0:
        raise ValueError("singular regression matrix: zero residual variance")
    level_ix = ndet
    se = math.sqrt(ssr / dof * np.linalg.inv(XtX)[level_ix, level_ix])
    stat = float(beta[level_ix] / se)
    p = _mackinnon_pvalue(stat, regression)
    return TestResult(
        statistic=stat,
        p_value=p,
        critical_values=_mackinnon_crit(regression, y.size),
        null_hypothesis="unit root (series is non-stationary)",
        reject_at_5pct=p < 0.05,
    )


# ----------------------------------------------------------------------
# KPSS
# ----------------------------------------------------------------------

_KPSS_CRIT = {
    # statistic thresholds at p = 0.10, 0.05, 0.025, 0.01
    "c": (0.347, 0.463, 0.574, 0.739),
    "ct": (0.119, 0.146, 0.176, 0.216),
}
_KPSS_PVALS = (0.10, 0.05, 0.025, 0.01)


def kpss(s, regression: str = "c", bandwidth: Optional[int] = None) -> TestResult:
    """KPSS stationarity test with Newey-West (Bartlett) long-run variance.

    The p-value interpolates the published critical-value table and is
    therefore clamped to [0.01, 0.10].
    """
    regression = _check_regression(regression)
    v = _values(s)
    n = v.size
    if n < 20:
        raise ValueError("need at least 20 observations, got %d" % n)
    if regression == "c":
        resids = v - v.mean()
    else:
        X = np.column_stack([np.ones(n), np.arange(1.0, n + 1)])
        beta, *_ = np.linalg.lstsq(X, v, rcond=None)
        resids = v - X @ beta
    if bandwidth is None:
        bandwidth = int(math.floor(4.0 * (n / 100.0) ** 0.25))
    eta = float(np.sum(np.cumsum(resids) ** 2)) / n**2
    s_hat = float(resids @ resids)
    for lag in range(1, bandwidth + 1):
        w = 1.0 - lag / (bandwidth + 1.0)
        s_hat += 2.0 * w * float(resids[lag:] @ resids[:-lag])
    s_hat /= n
    if s_hat <= 0.0:
        raise ValueError("zero long-run variance (constant series)")
    stat = eta / s_hat
    crit = _KPSS_CRIT[regression]
    p = float(np.interp(stat, crit, _KPSS_PVALS))
    return TestResult(
        statistic=stat,
        p_value=p,
        critical_values={
            "10%": crit[0],
            "5%": crit[1],
            "2.5%": crit[2],
            "1%": crit[3],
        },
        null_hypothesis="series is stationary around a "
        + ("constant level" if regression == "c" else "linear trend"),
        reject_at_5pct=p < 0.05,
    )


# ----------------------------------------------------------------------
# BDS on AR(1) residuals
# ----------------------------------------------------------------------


def _ar1_residuals(v: np.ndarray) -> np.ndarray:
    X = np.column_stack([np.ones(v.size - 1), v[:-1]])
    y = v[1:]
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return y - X @ beta


def _correlation_sum(indicators: np.ndarray, m: int) -> float:
    joint = indicators
    for _ in range(m - 1):
        joint = joint[1:, 1:] * joint[:-1, :-1]
    n = joint.shape[0]
    iu = np.triu_indices(n, k=1)
    return float(joint[iu].mean())


def bds(
    s,
    dims: Sequence[int] = (2, 3, 4, 5),
    epsilon_frac: float = 1.0,
) -> List[TestResult]:
    """BDS independence test, applied to OLS AR(1) residuals of the input.

    For each embedding dimension m the statistic standardizes
    C_m(eps) - C_1(eps)^m, where C_m is the correlation integral at
    radius eps = epsilon_frac * sample std of the residuals.
    Asymptotically standard normal under the IID null.
    """
    v = _values(s)
    if v.size < 200:
        raise ValueError("need at least 200 observations, got %d" % v.size)
    dims = list(dims)
    if not dims or any(m < 2 or m > 10 for m in dims):
        raise ValueError("embedding dimensions must lie in 2..10")
    if epsilon_frac <= 0:
        raise ValueError("epsilon_frac must be positive")
    e = _ar1_residuals(v)
    scale = float(np.abs(v).max())
    if float(np.abs(e).max()) <= 1e-10 * max(scale, 1.0):
        # an exact AR(1) relationship (e.g. a linear ramp) leaves only
        # rounding noise; there is no residual structure to test
        raise ValueError("AR(1) residuals are numerically zero")
    n = e.size
    eps = epsilon_frac * float(e.std(ddof=1))
    indicators = (np.abs(e[:, None] - e[None, :]) < eps).astype(float)
    c1 = _correlation_sum(indicators, 1)
    if c1 <= 0.0:
        raise ValueError("epsilon too small: first-order correlation integral is zero")
    # Dechert's K: probability that two independently drawn pairs sharing
    # a point both fall within eps (diagonal self-matches corrected out)
    row = indicators.sum(axis=1)
    k = float(((row**2).sum() - 3 * indicators.sum() + 2 * n) / (
        n * (n - 1) * (n - 2)
    ))
    out = []
    for m in dims:
        c_m = _correlation_sum(indicators, m)
        c1_trunc = _correlation_sum(indicators[m - 1 :, m - 1 :], 1)
        effect = c_m - c1_trunc**m
        variance = 4.0 * (
            k**m
            + 2.0 * sum(k ** (m - j) * c1 ** (2 * j) for j in range(1, m))
            + (m - 1) ** 2 * c1 ** (2 * m)
            - m**2 * k * c1 ** (2 * m - 2)
        )
        if variance <= 0.0:
            raise ValueError("degenerate BDS variance for dimension %d" % m)
        stat = math.sqrt(n - m + 1) * effect / math.sqrt(variance)
        p = 2.0 * float(sps.norm.sf(abs(stat)))
        out.append(
            TestResult(
                statistic=stat,
                p_value=p,
                critical_values={"1%": 2.576, "5%": 1.96, "10%": 1.645},
                null_hypothesis="residuals are IID (dimension %d)" % m,
                reject_at_5pct=p < 0.05,
            )
        )
    return out


# ----------------------------------------------------------------------
# Ljung-Box, Jarque-Bera, ACF
# ----------------------------------------------------------------------


def _acf_values(v: np.ndarray, max_lag: int) -> np.ndarray:
    centered = v - v.mean()
    denom = float(centered @ centered)
    if denom <= 0.0:
        raise ValueError("zero-variance input")
    return np.array(
        [float(centered[k:] @ centered[:-k]) / denom for k in range(1, max_lag + 1)]
    )


def ljung_box(s, lags: int = 20) -> TestResult:
    """Ljung-Box portmanteau test for autocorrelation up to `lags`."""
    v = _values(s)
    if lags < 1:
        raise ValueError("lags must be positive")
    if v.size <= lags + 1:
        raise ValueError("need more than lags+1 observations")
    rho = _acf_values(v, lags)
    n = v.size
    q = float(n * (n + 2) * np.sum(rho**2 / (n - np.arange(1, lags + 1))))
    p = float(sps.chi2.sf(q, lags))
    return TestResult(
        statistic=q,
        p_value=p,
        critical_values={"5%": float(sps.chi2.ppf(0.95, lags))},
        null_hypothesis="no autocorrelation up to lag %d" % lags,
        reject_at_5pct=p < 0.05,
    )


def jarque_bera(s) -> JarqueBeraResult:
    """Jarque-Bera normality test; kurtosis is reported as excess."""
    v = _values(s)
    n = v.size
    if n < 20:
        raise ValueError("need at least 20 observations, got %d" % n)
    c = v - v.mean()
    m2 = float(np.mean(c**2))
    if m2 <= 0.0:
        raise ValueError("zero-variance input")
    skew = float(np.mean(c**3)) / m2**1.5
    kurt = float(np.mean(c**4)) / m2**2 - 3.0
    jb = n / 6.0 * (skew**2 + kurt**2 / 4.0)
    p = float(sps.chi2.sf(jb, 2))
    return JarqueBeraResult(
        statistic=jb,
        p_value=p,
        critical_values={"5%": float(sps.chi2.ppf(0.95, 2))},
        null_hypothesis="sample is normally distributed",
        reject_at_5pct=p < 0.05,
        skewness=skew,
        kurtosis=kurt,
    )


def acf(s, max_lag: int) -> Tuple[np.ndarray, float]:
    """Biased (1/n) autocorrelations at lags 1..max_lag and the
    two-sided 5% significance band 1.96/sqrt(n)."""
    v = _values(s)
    if max_lag < 1:
        raise ValueError("max_lag must be positive")
    if v.size <= max_lag + 1:
        raise ValueError("need more than max_lag+1 observations")
    return _acf_values(v, max_lag), 1.96 / math.sqrt(v.size)


# ----------------------------------------------------------------------
# Suitability battery
# ----------------------------------------------------------------------


def _try_test(fn, *args, null=""):
    """Run one battery constituent; degenerate inputs yield a
    non-informative placeholder instead of aborting the battery."""
    try:
        return fn(*args)
    except ValueError:
        return TestResult(
            statistic=float("nan"),
            p_value=float("nan"),
            critical_values={},
            null_hypothesis=null + " (degenerate input, test not computable)",
            reject_at_5pct=False,
        )


def suitability_report(s: TimeSeries) -> SuitabilityReport:
    """Run the full battery on prices and returns and derive a verdict.

    Verdict rule: ``suitable`` requires the price series to be
    non-stationary (ADF fails to reject while KPSS rejects) and the BDS
    battery to reject independence in at least one embedding dimension;
    non-stationarity alone gives ``marginal``; anything else is
    ``unsuitable``. Ljung-Box, Jarque-Bera and the squared-return ACF
    are reported as supporting evidence. Constituents that cannot be
    computed on degenerate inputs (for example the AR(1) residuals of an
    exact ramp are identically zero) count as non-rejections.
    """
    if not isinstance(s, TimeSeries):
        s = TimeSeries(values=np.asarray(s, dtype=float))
    n = s.values.size
    if n < 300:
        raise ValueError(
            "need at least 300 observations for the 252-day volatility window"
        )
    try:
        returns = pct_returns(s)
    except ValueError as exc:
        raise ValueError("returns: %s" % exc) from exc
    r = returns.values

    price_adf = _try_test(adf, s, "c", null="unit root")
    price_kpss = _try_test(kpss, s, "c", null="stationary")
    returns_adf = _try_test(adf, r, "c", null="unit root")
    returns_kpss = _try_test(kpss, r, "c", null="stationary")

    try:
        bds_results = bds(s.values)
    except ValueError:
        bds_results = [
            TestResult(
                statistic=float("nan"),
                p_value=float("nan"),
                critical_values={},
                null_hypothesis="residuals are IID (dimension %d)"
                " (degenerate input, test not computable)" % m,
                reject_at_5pct=False,
            )
            for m in (2, 3, 4, 5)
        ]

    sq = r**2
    lb = _try_test(ljung_box, sq, 20, null="no autocorrelation")
    jb_prices = _try_test(jarque_bera, s.values, null="normality")
    jb_returns = _try_test(jarque_bera, r, null="normality")

    try:
        sq_acf, band = acf(sq, 20)
        significant = int(np.sum(np.abs(sq_acf) > band))
        max_acf = float(sq_acf.max())
    except ValueError:
        significant, max_acf = 0, float("nan")

    vol = rolling_stat(r, window=252, kind="std")
    vol_summary = (float(vol.mean()), float(vol.max()))

    non_stationary = (not price_adf.reject_at_5pct) and price_kpss.reject_at_5pct
    nonlinear = any(res.reject_at_5pct for res in bds_results)
    if non_stationary and nonlinear:
        verdict = "suitable"
    elif non_stationary:
        verdict = "marginal"
    else:
        verdict = "unsuitable"

    return SuitabilityReport(
        price_adf=price_adf,
        price_kpss=price_kpss,
        returns_adf=returns_adf,
        returns_kpss=returns_kpss,
        bds=bds_results,
        ljung_box_sq=lb,
        jarque_bera=jb_prices,
        jarque_bera_returns=jb_returns,
        sq_acf_significant_lags=significant,
        max_sq_acf=max_acf,
        rolling_vol_summary=vol_summary,
        verdict=verdict,
    )
