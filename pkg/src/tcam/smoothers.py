"""Regression engines: additive models by penalized-spline backfitting and
cross-validated LASSO by cyclic coordinate descent.

Each smooth term uses a cubic B-spline basis (knots at quantiles of the
predictor) with the sum-to-zero constraint absorbed, and a penalty on the
second divided differences of the coefficients taken over the Greville
abscissae, so the penalty's null space is exactly the linear functions.
Scores are reported as mean squared residuals, ``(1/N) * sum(r**2)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, stats
from numba import njit
from scipy.interpolate import BSpline

from .errors import DegenerateFoldError, InputError, NonConvergenceWarning, SingularBasisError

MIN_ROWS = 20


@dataclass(frozen=True)
class SmootherConfig:
    """Settings shared by every additive fit in a run.

    ``gcv_grid`` holds relative penalty weights; each is rescaled by the
    basis's mean penalty eigenvalue so one grid fits every predictor.
    ``gcv_gamma`` inflates the edf charge in the GCV criterion, which keeps
    the selected fits from chasing noise.
    """

    n_basis: int = 10
    degree: int = 3
    gcv_grid: tuple[float, ...] = tuple(np.logspace(-2, 7, 10))
    gcv_gamma: float = 1.4
    tol: float = 1e-6
    max_iter: int = 50

    def __post_init__(self):
        if self.n_basis < self.degree + 1:
            raise InputError("n_basis must be at least degree + 1")
        if len(self.gcv_grid) == 0 or min(self.gcv_grid) < 0:
            raise InputError("gcv_grid must be a non-empty list of nonnegative weights")
        if self.tol <= 0 or self.max_iter < 1:
            raise InputError("tol must be positive and max_iter at least 1")

    def to_dict(self) -> dict:
        return {
            "n_basis": self.n_basis,
            "degree": self.degree,
            "gcv_grid": [float(g) for g in self.gcv_grid],
            "gcv_gamma": self.gcv_gamma,
            "tol": self.tol,
            "max_iter": self.max_iter,
        }


DEFAULT_CONFIG = SmootherConfig()


class SplineBasis:
    """Centered, penalized cubic B-spline basis for one predictor column.

    The smoother for penalty ``lam`` is ``Q diag(1 / (1 + lam * s)) Q.T``
    with ``Q`` orthonormal, which makes GCV and backfitting updates cheap.
    """

    def __init__(self, x: np.ndarray, n_basis: int = 10, degree: int = 3):
        x = np.asarray(x, dtype=float)
        uniq = np.unique(x)
        if uniq.size < n_basis:
            raise SingularBasisError(
                f"predictor has {uniq.size} distinct values, basis needs {n_basis}"
            )
        self.n_basis = n_basis
        self.degree = degree
        lo, hi = uniq[0], uniq[-1]
        n_interior = n_basis - degree - 1
        interior = np.quantile(uniq, np.linspace(0.0, 1.0, n_interior + 2)[1:-1])
        self.knots = np.concatenate([[lo] * (degree + 1), interior, [hi] * (degree + 1)])
        self.lower, self.upper = lo, hi

        B = self._design(x)
        P = second_difference_penalty(self.knots, degree, n_basis)
        # absorb sum-to-zero over the training sample
        col_means = B.mean(axis=0)
        q, _ = np.linalg.qr(col_means[:, None], mode="complete")
        self.constraint = q[:, 1:]
        Bc = B @ self.constraint
        Pc = self.constraint.T @ P @ self.constraint
        try:
            R = linalg.cholesky(Bc.T @ Bc, lower=False)
        except linalg.LinAlgError as exc:
            raise SingularBasisError("spline Gram matrix is not positive definite") from exc
        Rinv = linalg.solve_triangular(R, np.eye(R.shape[0]), lower=False)
        s, U = np.linalg.eigh(Rinv.T @ Pc @ Rinv)
        self.eigenvalues = np.clip(s, 0.0, None)
        self.Q = Bc @ (Rinv @ U)
        self._to_coef = self.constraint @ Rinv @ U
        null = self.eigenvalues <= 1e-9 * self.eigenvalues.max()
        self.eigenvalues[null] = 0.0
        self.null_columns = np.flatnonzero(null)  # unpenalized (linear) directions
        self.scale = 1.0 / self.eigenvalues[~null].mean()

    @property
    def n_rows(self) -> int:
        return self.Q.shape[0]

    def _design(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=float), self.lower, self.upper)
        return BSpline.design_matrix(x, self.knots, self.degree).toarray()

    def shrinkage(self, lam: float) -> np.ndarray:
        return 1.0 / (1.0 + lam * self.eigenvalues)

    def edf(self, lam: float) -> float:
        return float(self.shrinkage(lam).sum())

    def residual_edf(self, lam: float) -> float:
        """``tr(2S - S @ S)``: the expected RSS reduction per unit noise variance."""
        d = self.shrinkage(lam)
        return float((2.0 * d - d * d).sum())

    def smooth(self, r: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
        """Fitted values and rotated coefficients of the penalized fit to ``r``."""
        w = self.shrinkage(lam) * (self.Q.T @ r)
        return self.Q @ w, w

    def coefficients(self, w: np.ndarray) -> np.ndarray:
        return self._to_coef @ w

    def evaluate(self, x: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
        return self._design(x) @ coefficients

    def select_penalty(self, y: np.ndarray, grid: Sequence[float], gamma: float = 1.0) -> float:
        """Penalty weight minimizing GCV for smoothing ``y`` on this predictor alone."""
        yc = y - y.mean()
        n = yc.size
        z2 = (self.Q.T @ yc) ** 2
        total = float(yc @ yc)
        best, best_lam = np.inf, None
        for g in grid:
            lam = float(g) * self.scale
            d = self.shrinkage(lam)
            rss = total - 2.0 * float(d @ z2) + float((d * d) @ z2)
            denom = n - 1.0 - gamma * d.sum()
            if denom <= 0:
                continue
            score = n * max(rss, 0.0) / denom**2
            if score < best:
                best, best_lam = score, lam
        if best_lam is None:
            raise SingularBasisError("too few rows for the basis size")
        return best_lam


def second_difference_penalty(knots: np.ndarray, degree: int, n_basis: int) -> np.ndarray:
    """``D.T @ D`` with ``D`` the second divided differences over Greville abscissae."""
    greville = np.array([knots[i + 1 : i + degree + 1].mean() for i in range(n_basis)])
    h = np.diff(greville)
    D = np.zeros((n_basis - 2, n_basis))
    for i in range(n_basis - 2):
        D[i, i] = 1.0 / h[i]
        D[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        D[i, i + 2] = 1.0 / h[i + 1]
    return D.T @ D


@dataclass
class SmoothTerm:
    predictor_index: int
    knots: np.ndarray
    coefficients: np.ndarray
    penalty_weight: float
    edf: float
    residual_edf: float
    fitted: np.ndarray = field(repr=False)
    basis: SplineBasis = field(repr=False)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.basis.evaluate(x, self.coefficients)


@dataclass
class AdditiveFit:
    intercept: float
    terms: list[SmoothTerm]
    rss_mean: float
    fitted: np.ndarray = field(repr=False)
    converged: bool = True
    n_iter: int = 0

    @property
    def effective_dof(self) -> list[float]:
        return [t.edf for t in self.terms]

    @property
    def residual_dof(self) -> float:
        return self.fitted.size - 1.0 - sum(t.residual_edf for t in self.terms)

    def predict(self, predictors: Sequence[np.ndarray]) -> np.ndarray:
        out = np.full(np.asarray(predictors[0]).shape if predictors else (1,), self.intercept)
        for term, x in zip(self.terms, predictors):
            out = out + term.predict(x)
        return out


def fit_additive(
    y: np.ndarray,
    predictors: Sequence[np.ndarray],
    config: SmootherConfig = DEFAULT_CONFIG,
    *,
    bases: Sequence[SplineBasis] | None = None,
    penalty_weights: Sequence[float] | None = None,
    predictor_indices: Sequence[int] | None = None,
) -> AdditiveFit:
    """Fit ``y = c + sum_j f_j(x_j) + e`` by backfitting penalized splines.

    Penalty weights are chosen per term by GCV on a univariate pilot smooth
    of ``y`` and then held fixed during backfitting. ``bases`` and
    ``penalty_weights`` may be passed in to reuse earlier work; both must
    then line up with ``predictors``.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < MIN_ROWS:
        raise InputError(f"additive fit needs at least {MIN_ROWS} rows, got {n}")
    K = len(predictors)
    if bases is None:
        bases = [SplineBasis(x, config.n_basis, config.degree) for x in predictors]
    if len(bases) != K:
        raise InputError("bases must match predictors")
    if penalty_weights is None:
        penalty_weights = [b.select_penalty(y, config.gcv_grid, config.gcv_gamma) for b in bases]
    if predictor_indices is None:
        predictor_indices = list(range(K))

    intercept = float(y.mean())
    resid0 = y - intercept
    if K == 0:
        return AdditiveFit(intercept, [], float(resid0 @ resid0) / n, np.full(n, intercept), True, 0)

    # Modified backfitting: the unpenalized (linear) components of all terms
    # are refitted jointly by least squares, the penalized remainders one
    # term at a time. Same fixed point as plain backfitting, but correlated
    # predictors no longer stall convergence.
    lin_cols = [b.null_columns for b in bases]
    L = np.column_stack([b.Q[:, c] for b, c in zip(bases, lin_cols)])
    L_pinv = np.linalg.pinv(L, rcond=1e-10)
    splits = np.cumsum([c.size for c in lin_cols])[:-1]
    shrink = [b.shrinkage(lam) for b, lam in zip(bases, penalty_weights)]

    g = np.zeros((K, n))  # penalized parts
    w = [np.zeros(b.Q.shape[1]) for b in bases]
    f = np.zeros((K, n))
    g_total = np.zeros(n)
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        a = np.split(L_pinv @ (resid0 - g_total), splits)
        lin = [bases[j].Q[:, lin_cols[j]] @ a[j] for j in range(K)]
        lin_total = np.sum(lin, axis=0)
        for j, basis in enumerate(bases):
            partial = resid0 - lin_total - (g_total - g[j])
            z = basis.Q.T @ partial
            wj = shrink[j] * z
            wj[lin_cols[j]] = 0.0
            new = basis.Q @ wj
            g_total += new - g[j]
            g[j] = new
            wj[lin_cols[j]] = a[j]
            w[j] = wj
        f_new = g + np.array(lin)
        max_change = float(np.max(np.abs(f_new - f)))
        f = f_new
        if max_change < config.tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"backfitting stopped after {config.max_iter} iterations", NonConvergenceWarning, stacklevel=2
        )
    # recompute the sum to shed accumulated rounding from the running updates
    total = f.sum(axis=0)
    resid = resid0 - total
    terms = [
        SmoothTerm(
            predictor_index=int(predictor_indices[j]),
            knots=bases[j].knots,
            coefficients=bases[j].coefficients(w[j]),
            penalty_weight=float(penalty_weights[j]),
            edf=bases[j].edf(penalty_weights[j]),
            residual_edf=bases[j].residual_edf(penalty_weights[j]),
            fitted=f[j],
            basis=bases[j],
        )
        for j in range(K)
    ]
    return AdditiveFit(intercept, terms, float(resid @ resid) / n, intercept + total, converged, it)


def term_pvalue(
    fit_full: AdditiveFit,
    y: np.ndarray,
    predictors: Sequence[np.ndarray],
    term: int,
    config: SmootherConfig = DEFAULT_CONFIG,
) -> float:
    """F-test p-value for dropping ``fit_full.terms[term]``.

    The reduced model keeps the other terms' bases and penalty weights.
    Degrees of freedom come from the smoother traces in residual form,
    ``tr(2S - S^2)``: the term's own for the numerator and
    ``N - 1 - sum`` over all terms for the denominator. With a fixed penalty
    this matches the mean of the RSS drop under the null; plain ``tr(S)``
    undercounts it and inflates the statistic.
    """
    y = np.asarray(y, dtype=float)
    keep = [j for j in range(len(fit_full.terms)) if j != term]
    reduced = fit_additive(
        y,
        [predictors[j] for j in keep],
        config,
        bases=[fit_full.terms[j].basis for j in keep],
        penalty_weights=[fit_full.terms[j].penalty_weight for j in keep],
    )
    return f_test_pvalue(
        reduced.rss_mean, fit_full.rss_mean, fit_full.terms[term].residual_edf, fit_full.residual_dof, y.size
    )


def f_test_pvalue(rss_reduced: float, rss_full: float, df_num: float, df_den: float, n: int) -> float:
    drop = (rss_reduced - rss_full) * n
    if drop <= 0 or df_num <= 0:
        return 1.0
    if rss_full <= 0 or df_den <= 0:
        return 0.0
    F = (drop / df_num) / (rss_full * n / df_den)
    return float(stats.f.sf(F, df_num, df_den))


# -- LASSO ------------------------------------------------------------------


@dataclass
class LassoFit:
    coefficients: np.ndarray
    intercept: float
    lambda_min: float
    lambda_1se: float
    lambdas: np.ndarray = field(repr=False)
    cv_mean: np.ndarray = field(repr=False)
    cv_sd: np.ndarray = field(repr=False)


def lambda_max(y: np.ndarray, X: np.ndarray) -> float:
    """Smallest penalty at which every coefficient is zero."""
    yc = y - y.mean()
    Xc = X - X.mean(axis=0)
    return float(np.max(np.abs(Xc.T @ yc))) / y.size if X.shape[1] else 0.0


def lasso_path(
    y: np.ndarray,
    X: np.ndarray,
    lambdas: Sequence[float],
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients along ``lambdas`` for ``(1/2N)||y - b0 - X b||^2 + lam ||b||_1``.

    Covariance-form cyclic coordinate descent with warm starts; an active-set
    loop runs to convergence before each full verification sweep.
    Returns ``(coefs, intercepts)`` with ``coefs`` shaped ``(len(lambdas), d)``.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    y_mean = y.mean()
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    G = Xc.T @ Xc / n
    c = Xc.T @ (y - y_mean) / n
    diag = np.diag(G).copy()
    usable = diag > 1e-14 * max(diag.max(initial=0.0), 1.0)
    coefs = _cd_path(G, c, diag, usable, np.asarray(lambdas, dtype=float), tol, max_sweeps)
    intercepts = y_mean - coefs @ x_mean
    return coefs, intercepts


@njit(cache=True, nogil=True)
def _cd_sweep(beta, grad, G, diag, usable, lam, coords):
    max_change = 0.0
    d = G.shape[0]
    for j in coords:
        if not usable[j]:
            continue
        old = beta[j]
        rho = grad[j] + diag[j] * old
        mag = abs(rho) - lam
        new = 0.0
        if mag > 0.0:
            new = (mag if rho > 0.0 else -mag) / diag[j]
        if new != old:
            delta = new - old
            for i in range(d):
                grad[i] -= G[i, j] * delta
            beta[j] = new
            if abs(delta) > max_change:
                max_change = abs(delta)
    return max_change


@njit(cache=True, nogil=True)
def _cd_path(G, c, diag, usable, lambdas, tol, max_sweeps):
    d = G.shape[0]
    beta = np.zeros(d)
    grad = c.copy()  # c - G @ beta
    coefs = np.zeros((lambdas.size, d))
    every = np.arange(d)
    for i in range(lambdas.size):
        lam = lambdas[i]
        sweeps = 0
        while True:
            changed = _cd_sweep(beta, grad, G, diag, usable, lam, every)
            sweeps += 1
            if changed < tol or sweeps >= max_sweeps:
                break
            active = np.flatnonzero(beta)
            while sweeps < max_sweeps:
                sweeps += 1
                if _cd_sweep(beta, grad, G, diag, usable, lam, active) < tol:
                    break
        coefs[i] = beta
    return coefs


def lambda_grid(y: np.ndarray, X: np.ndarray, n_lambdas: int = 50, decades: float = 2.0) -> np.ndarray:
    lmax = lambda_max(y, X)
    if lmax <= 0:
        return np.zeros(1)
    return lmax * np.logspace(0.0, -decades, n_lambdas)


def fit_lasso_cv(
    y: np.ndarray,
    X: np.ndarray,
    k_folds: int = 10,
    seed: int = 0,
    n_lambdas: int = 50,
    tol: float = 1e-8,
) -> LassoFit:
    """K-fold cross-validated LASSO, returning the fit at the one-standard-error penalty.

    The reported spread ``cv_sd`` is the standard error of the fold-mean
    error. The chosen penalty is the largest one whose mean CV error is
    within ``cv_sd`` of the minimum.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise InputError("X must be a 2-D array with one row per observation")
    n = y.size
    if not 2 <= k_folds <= n:
        raise InputError(f"need 2 <= k_folds <= N, got k_folds={k_folds}, N={n}")
    if np.ptp(y) == 0:
        raise DegenerateFoldError("response is constant")

    lambdas = lambda_grid(y, X, n_lambdas)
    rng = np.random.default_rng(seed)
    fold = np.empty(n, dtype=int)
    fold[rng.permutation(n)] = np.arange(n) % k_folds

    errors = np.zeros((k_folds, lambdas.size))
    sizes = np.zeros(k_folds)
    for f in range(k_folds):
        test = fold == f
        train = ~test
        if np.ptp(y[train]) == 0:
            raise DegenerateFoldError(f"fold {f} has a constant training response")
        coefs, b0 = lasso_path(y[train], X[train], lambdas, tol)
        pred = b0[:, None] + coefs @ X[test].T
        errors[f] = np.mean((y[test][None, :] - pred) ** 2, axis=1)
        sizes[f] = test.sum()

    weights = sizes / sizes.sum()
    cv_mean = weights @ errors
    cv_sd = np.sqrt((weights @ (errors - cv_mean) ** 2) / (k_folds - 1))
    i_min = int(np.argmin(cv_mean))
    i_1se = int(np.flatnonzero(cv_mean <= cv_mean[i_min] + cv_sd[i_min])[0])

    coefs, b0 = lasso_path(y, X, lambdas[: i_1se + 1], tol)
    return LassoFit(
        coefficients=coefs[-1],
        intercept=float(b0[-1]),
        lambda_min=float(lambdas[i_min]),
        lambda_1se=float(lambdas[i_1se]),
        lambdas=lambdas,
        cv_mean=cv_mean,
        cv_sd=cv_sd,
    )
