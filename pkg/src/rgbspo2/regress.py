"""Ridge regression and RBF epsilon-SVR with contiguous-block cross-validation."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from . import _io, _smo
from .dsp import moving_average
from .errors import (
    ConvergenceError,
    DegenerateFeatureError,
    FeatureSchemaError,
    IncompatibleModelError,
    ModelParseError,
    RankDeficiencyError,
    ValidationError,
)

FORMAT_VERSION = 1

FEATURE_NAMES = ("R_r", "R_g", "R_b", "ratio_rg", "ratio_rb", "ratio_gb")

DEFAULT_LAMBDA_GRID = tuple(10.0 ** np.arange(-6, 3))
DEFAULT_C_GRID = tuple(2.0 ** np.arange(-5, 16, 2))
DEFAULT_GAMMA_GRID = tuple(2.0 ** np.arange(-15, 4, 2))
DEFAULT_EPSILON = 0.1
DEFAULT_FOLDS = 5
SMOOTH_WINDOWS = 10
#: SMO iteration cap for grid cells; slower cells are scored as failed
CV_MAX_ITER = 100_000


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, F):
        return (np.asarray(F, dtype=float) - self.mean) / self.std

    def inverse(self, Z):
        return np.asarray(Z, dtype=float) * self.std + self.mean

    @classmethod
    def identity(cls, d):
        return cls(np.zeros(d), np.ones(d))


def standardize(F):
    """Column z-scores with the population standard deviation."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise ValidationError("feature matrix must be 2-D")
    mean = F.mean(axis=0)
    std = F.std(axis=0)
    bad = np.flatnonzero(std <= 1e-12 * np.maximum(1.0, np.abs(mean)))
    if bad.size:
        raise DegenerateFeatureError(f"feature column(s) {bad.tolist()} have zero variance")
    stats = Standardizer(mean, std)
    return stats.transform(F), stats


def _check_xy(F, y):
    F = np.asarray(F, dtype=float)
    y = np.asarray(y, dtype=float)
    if F.ndim != 2 or y.ndim != 1 or F.shape[0] != y.size:
        raise ValidationError(f"F {F.shape} and y {y.shape} do not match")
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(y))):
        raise ValidationError("non-finite entries in F or y")
    return F, y


@dataclass
class RidgeModel:
    w: np.ndarray
    intercept: float
    lam: float
    stats: Standardizer
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    kind: str = field(default="ridge", init=False)

    def decision(self, F):
        return self.stats.transform(F) @ self.w + self.intercept


@dataclass
class SvrModel:
    support: np.ndarray  # standardized support vectors
    coef: np.ndarray  # alpha - alpha*
    b: float
    C: float
    gamma: float
    epsilon: float
    stats: Standardizer
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    n_iter: int = 0
    gap: float = 0.0
    dual_objective: float = 0.0
    kind: str = field(default="svr", init=False)

    def decision(self, F):
        Z = self.stats.transform(np.atleast_2d(F))
        if self.coef.size == 0:
            return np.full(Z.shape[0], self.b)
        return _smo.rbf_kernel(Z, self.support, self.gamma) @ self.coef + self.b


# ---------------------------------------------------------------- ridge

def ridge_fit(F, y, lam, standardize_features=True, feature_names=FEATURE_NAMES):
    """Minimise ||y - mean(y) - Z w||^2 + lam ||w||^2 on standardised features Z.

    The intercept is mean(y) and is not penalised.
    """
    F, y = _check_xy(F, y)
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    if standardize_features:
        Z, stats = standardize(F)
    else:
        Z, stats = F, Standardizer.identity(F.shape[1])
    ybar = float(y.mean())
    A = Z.T @ Z + lam * np.eye(Z.shape[1])
    rhs = Z.T @ (y - ybar)
    if np.linalg.matrix_rank(A) < A.shape[0]:
        raise RankDeficiencyError(
            f"normal equations are singular at lambda={lam}; features are collinear"
        )
    w = np.linalg.solve(A, rhs)
    return RidgeModel(w=w, intercept=ybar, lam=float(lam), stats=stats,
                      feature_names=tuple(feature_names))


def kfold_blocks(L, k=DEFAULT_FOLDS):
    """Contiguous, time-ordered folds; a function of L alone."""
    if L < k:
        raise ValidationError(f"need at least {k} rows for {k}-fold CV, got {L}")
    return [idx for idx in np.array_split(np.arange(L), k)]


def _cv_mae(fit, F, y, folds):
    errs = []
    for test in folds:
        train = np.setdiff1d(np.arange(y.size), test)
        model = fit(F[train], y[train])
        errs.append(np.mean(np.abs(model.decision(F[test]) - y[test])))
    return float(np.mean(errs))


def ridge_cv_scores(F, y, lambda_grid=DEFAULT_LAMBDA_GRID, k=DEFAULT_FOLDS):
    F, y = _check_xy(F, y)
    folds = kfold_blocks(y.size, k)
    scores = {}
    for lam in lambda_grid:
        try:
            scores[float(lam)] = _cv_mae(lambda a, b: ridge_fit(a, b, lam), F, y, folds)
        except (RankDeficiencyError, DegenerateFeatureError):
            scores[float(lam)] = np.inf
    return scores


def ridge_select(F, y, lambda_grid=DEFAULT_LAMBDA_GRID, k=DEFAULT_FOLDS):
    """Lambda with the lowest mean fold MAE; ties go to the larger lambda."""
    if len(lambda_grid) == 0:
        raise ValidationError("lambda grid is empty")
    if len(lambda_grid) == 1:
        return float(lambda_grid[0])
    return ridge_best(ridge_cv_scores(F, y, lambda_grid, k))


def ridge_best(scores):
    best = min(scores.values())
    if not np.isfinite(best):
        raise RankDeficiencyError("every lambda in the grid failed")
    return max(lam for lam, s in scores.items() if s <= best)


# ---------------------------------------------------------------- SVR

def _solve(K, y, C, epsilon, tol, max_iter, track=False, beta0=None):
    beta0 = np.zeros(0) if beta0 is None else beta0
    out = _smo.solve(K, y, float(C), float(epsilon), float(tol), int(max_iter), bool(track),
                     beta0)
    n_iter, gap = out[2], out[3]
    if gap >= tol and n_iter >= max_iter:
        raise ConvergenceError(
            f"SMO stopped after {n_iter} iterations with KKT violation {gap:.3g} > {tol}"
        )
    return out


def svr_fit(F, y, C, gamma, epsilon=DEFAULT_EPSILON, standardize_features=True,
            feature_names=FEATURE_NAMES, tol=1e-3, max_iter=1_000_000, track=False):
    """RBF epsilon-SVR trained by SMO on the dual.

    With ``track=True`` the model carries ``objective_history``: the dual
    objective (to be maximised) after every pair update.
    """
    F, y = _check_xy(F, y)
    if C <= 0 or gamma <= 0 or epsilon < 0:
        raise ValidationError("C and gamma must be positive and epsilon non-negative")
    if standardize_features:
        Z, stats = standardize(F)
    else:
        Z, stats = F, Standardizer.identity(F.shape[1])
    K = _smo.rbf_kernel(Z, Z, gamma)
    coef, b, n_iter, gap, obj, hist, _ = _solve(K, y, C, epsilon, tol, max_iter, track)
    sv = np.flatnonzero(coef != 0)
    model = SvrModel(support=Z[sv], coef=coef[sv], b=float(b), C=float(C), gamma=float(gamma),
                     epsilon=float(epsilon), stats=stats, feature_names=tuple(feature_names),
                     n_iter=int(n_iter), gap=float(gap), dual_objective=float(-obj))
    if track:
        model.objective_history = -hist
    return model


def svr_cv_scores(F, y, C_grid=DEFAULT_C_GRID, gamma_grid=DEFAULT_GAMMA_GRID,
                  epsilon=DEFAULT_EPSILON, k=DEFAULT_FOLDS, map_fn=map, tol=1e-3,
                  max_iter=CV_MAX_ITER):
    """Mean fold MAE for every (C, gamma) cell; cells that fail score inf.

    Within a fold and gamma, C is swept upwards and each solve starts from
    the previous dual solution, which stays feasible when the box grows.
    """
    F, y = _check_xy(F, y)
    folds = kfold_blocks(y.size, k)
    C_sorted = sorted(float(C) for C in C_grid)

    def fold_errors(test):
        train = np.setdiff1d(np.arange(y.size), test)
        out = {}
        try:
            Z, stats = standardize(F[train])
        except DegenerateFeatureError:
            return {(C, float(g)): np.inf for C in C_sorted for g in gamma_grid}
        d_tr = _smo.sq_dist(Z, Z)
        d_te = _smo.sq_dist(stats.transform(F[test]), Z)
        for g in gamma_grid:
            g = float(g)
            K = np.exp(-g * d_tr)
            K_te = np.exp(-g * d_te)
            beta = None
            for C in C_sorted:
                try:
                    coef, b, *_, beta = _solve(K, y[train], C, epsilon, tol, max_iter, beta0=beta)
                    out[(C, g)] = float(np.mean(np.abs(K_te @ coef + b - y[test])))
                except ConvergenceError:
                    out[(C, g)] = np.inf
                    beta = None
        return out

    per_fold = list(map_fn(fold_errors, folds))
    cells = [(float(C), float(g)) for C in C_grid for g in gamma_grid]
    return {cell: float(np.mean([pf[cell] for pf in per_fold])) for cell in cells}


def svr_select(F, y, C_grid=DEFAULT_C_GRID, gamma_grid=DEFAULT_GAMMA_GRID,
               epsilon=DEFAULT_EPSILON, k=DEFAULT_FOLDS, **kw):
    """(C, gamma) with the lowest mean fold MAE; ties go to smaller C, then smaller gamma."""
    if len(C_grid) == 0 or len(gamma_grid) == 0:
        raise ValidationError("hyperparameter grid is empty")
    if len(C_grid) == 1 and len(gamma_grid) == 1:
        return float(C_grid[0]), float(gamma_grid[0])
    return svr_best(svr_cv_scores(F, y, C_grid, gamma_grid, epsilon, k, **kw))


def svr_best(scores):
    best = min(scores.values())
    if not np.isfinite(best):
        raise ConvergenceError("SMO failed on every grid cell")
    return min(cell for cell, s in scores.items() if s <= best)


# ---------------------------------------------------------------- inference

@dataclass
class Prediction:
    spo2: np.ndarray  # smoothed and clamped to [0, 100]
    raw: np.ndarray  # model output per window
    unclamped: np.ndarray  # smoothed, before clamping

    @property
    def n_clamped(self):
        return int(np.count_nonzero(self.spo2 != self.unclamped))


def feature_matrix(rows, feature_names=FEATURE_NAMES):
    """Stack FeatureRow objects (or pass a matrix through) in ``feature_names`` order."""
    if isinstance(rows, np.ndarray):
        return rows
    try:
        return np.array([[getattr(r, name) for name in feature_names] for r in rows], dtype=float)
    except AttributeError as exc:
        raise FeatureSchemaError(f"rows lack a model feature: {exc}") from None


def predict(model, rows, smooth=SMOOTH_WINDOWS):
    F = feature_matrix(rows, model.feature_names)
    F = np.asarray(F, dtype=float).reshape(-1, len(model.feature_names)) if F.size == 0 else F
    if F.ndim != 2 or F.shape[1] != len(model.feature_names):
        raise FeatureSchemaError(
            f"model expects {len(model.feature_names)} features {model.feature_names}, "
            f"got matrix of shape {F.shape}"
        )
    raw = model.decision(F)
    smoothed = moving_average(raw, smooth) if raw.size else raw
    return Prediction(spo2=np.clip(smoothed, 0.0, 100.0), raw=raw, unclamped=smoothed)


def fit_select(F, y, regressor, cfg=None, feature_names=FEATURE_NAMES):
    """Hyperparameter search by CV, then a final fit on all rows."""
    cfg = cfg or {}
    if regressor == "ridge":
        lam = ridge_select(F, y, cfg.get("lambda_grid", DEFAULT_LAMBDA_GRID),
                           cfg.get("folds", DEFAULT_FOLDS))
        return ridge_fit(F, y, lam, feature_names=feature_names)
    if regressor == "svr":
        eps = cfg.get("epsilon", DEFAULT_EPSILON)
        C, g = svr_select(F, y, cfg.get("C_grid", DEFAULT_C_GRID),
                          cfg.get("gamma_grid", DEFAULT_GAMMA_GRID), eps,
                          cfg.get("folds", DEFAULT_FOLDS),
                          max_iter=cfg.get("cv_max_iter", CV_MAX_ITER))
        return svr_fit(F, y, C, g, eps, feature_names=feature_names)
    raise ValidationError(f"unknown regressor {regressor!r}")


# ---------------------------------------------------------------- persistence

def _to_dict(model):
    d = {"format_version": FORMAT_VERSION, "kind": model.kind,
         "feature_names": list(model.feature_names),
         "stats": {"mean": model.stats.mean.tolist(), "std": model.stats.std.tolist()}}
    if model.kind == "ridge":
        d.update(w=model.w.tolist(), intercept=model.intercept, lam=model.lam)
    else:
        d.update(support=model.support.tolist(), coef=model.coef.tolist(), b=model.b,
                 C=model.C, gamma=model.gamma, epsilon=model.epsilon)
    return d


def _from_dict(d):
    if d.get("format_version") != FORMAT_VERSION:
        raise IncompatibleModelError(
            f"model format_version {d.get('format_version')!r}, expected {FORMAT_VERSION}"
        )
    stats = Standardizer(np.array(d["stats"]["mean"], dtype=float),
                         np.array(d["stats"]["std"], dtype=float))
    names = tuple(d["feature_names"])
    if d["kind"] == "ridge":
        return RidgeModel(w=np.array(d["w"], dtype=float), intercept=float(d["intercept"]),
                          lam=float(d["lam"]), stats=stats, feature_names=names)
    if d["kind"] == "svr":
        support = np.array(d["support"], dtype=float).reshape(-1, len(names))
        return SvrModel(support=support, coef=np.array(d["coef"], dtype=float), b=float(d["b"]),
                        C=float(d["C"]), gamma=float(d["gamma"]), epsilon=float(d["epsilon"]),
                        stats=stats, feature_names=names)
    raise IncompatibleModelError(f"unknown model kind {d['kind']!r}")


def save_model(model, path, extra=None):
    d = _to_dict(model)
    if extra:
        d["training"] = extra
    _io.write_text(path, json.dumps(d, indent=1))


def load_model(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"{path}: not a valid model file ({exc})") from None
    try:
        return _from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, IncompatibleModelError):
            raise
        raise ModelParseError(f"{path}: malformed model ({exc!r})") from None
