"""Simulation study harness, cross-validation, and the least-squares comparator.

The four scenario shapes cover no signal, a pure trend, a smooth wave around
a trend, and a flat segment followed by nonlinear growth; noise is Gaussian
with sd 0.25 and predictors are sorted uniforms on [0, 1].  Fits are scored
against the truth on a grid of 100 evenly spaced points spanning the data.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import Dataset, RawSeries, ScalingInfo, standardize
from .gibbs import run_chain
from .inference import (
    PosteriorSample,
    model_probabilities,
    posterior_curve,
    posterior_derivative,
)
from .model import ModelConfig

__all__ = [
    "EVAL_GRID_SIZE",
    "MetricsReport",
    "OlsFit",
    "Scenario",
    "evaluate_fit",
    "generate_dataset",
    "kfold_cv",
    "ols_fit",
    "run_replicates",
    "scenario_derivative",
    "scenario_truth",
    "summarize_reports",
]

SCENARIO_NAMES = ("flat", "linear", "wavy", "flat_nonlinear")
EVAL_GRID_SIZE = 100


@dataclass(frozen=True)
class Scenario:
    name: str
    n: int = 100
    noise_sd: float = 0.25

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}; choose from {SCENARIO_NAMES}")
        if self.n < 10:
            raise ValueError("n must be >= 10")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")


@dataclass(frozen=True)
class MetricsReport:
    """Per-fit scores against the generating truth."""

    rmse_f: float
    rmse_deriv: float
    coverage_f: float
    coverage_deriv: float
    prob_flat: float
    prob_linear: float
    n_nonzero_mean: float
    n_unique_mean: float

    def __post_init__(self):
        values = [getattr(self, name) for name in self.__dataclass_fields__]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("metrics must be finite")
        for name in ("coverage_f", "coverage_deriv"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def scenario_truth(name: str, x) -> np.ndarray:
    """True curve value(s) for a scenario at x in [0, 1]."""
    x = np.asarray(x, dtype=float)
    if name == "flat":
        return np.zeros_like(x)
    if name == "linear":
        return x.copy()
    if name == "wavy":
        return np.sin(3.0 * np.pi * x) / (3.0 * np.pi) + x
    if name == "flat_nonlinear":
        return np.where(x < 0.5, 0.0, (2.0 * (x - 0.5)) ** 2)
    raise ValueError(f"unknown scenario {name!r}")


def scenario_derivative(name: str, x) -> np.ndarray:
    """True first derivative for a scenario at x in [0, 1]."""
    x = np.asarray(x, dtype=float)
    if name == "flat":
        return np.zeros_like(x)
    if name == "linear":
        return np.ones_like(x)
    if name == "wavy":
        return np.cos(3.0 * np.pi * x) + 1.0
    if name == "flat_nonlinear":
        return np.where(x < 0.5, 0.0, 8.0 * (x - 0.5))
    raise ValueError(f"unknown scenario {name!r}")


def generate_dataset(scenario: Scenario, rng) -> Dataset:
    """Sorted uniform predictors, truth plus Gaussian noise, standardized."""
    x = np.sort(rng.uniform(0.0, 1.0, scenario.n))
    y = scenario_truth(scenario.name, x) + rng.normal(0.0, scenario.noise_sd, scenario.n)
    return standardize(RawSeries(times=x, values=y))


def evaluate_fit(sample: PosteriorSample, scenario: Scenario) -> MetricsReport:
    """Score a posterior sample against the scenario truth.

    RMSE and pointwise 95% coverage for the curve and its derivative, on the
    original data scale over 100 evenly spaced points spanning the observed
    predictor range, plus the flat/linear posterior probabilities and the
    mean counts of active increments and distinct values.
    """
    grid = np.linspace(0.0, 1.0, EVAL_GRID_SIZE)
    curve = posterior_curve(sample, grid)
    deriv = posterior_derivative(sample, grid)
    truth_f = scenario_truth(scenario.name, curve.grid)
    truth_d = scenario_derivative(scenario.name, deriv.grid)
    prob_flat, prob_linear = model_probabilities(sample)
    order = sample.config_snapshot.order
    return MetricsReport(
        rmse_f=float(np.sqrt(np.mean((curve.mean - truth_f) ** 2))),
        rmse_deriv=float(np.sqrt(np.mean((deriv.mean - truth_d) ** 2))),
        coverage_f=_coverage(curve, truth_f),
        coverage_deriv=_coverage(deriv, truth_d),
        prob_flat=prob_flat,
        prob_linear=prob_linear,
        n_nonzero_mean=float(np.mean(order - sample.draws_n0)),
        n_unique_mean=float(np.mean(sample.draws_k)),
    )


def _coverage(band, truth: np.ndarray) -> float:
    # numerical-precision slack so a zero-width band that equals the truth
    # counts as covering it
    tol = 1e-9 * (1.0 + np.abs(truth))
    return float(np.mean((band.lower - tol <= truth) & (truth <= band.upper + tol)))


def kfold_cv(data: Dataset, config: ModelConfig, k: int = 5, rng=None) -> float:
    """Pooled held-out RMSE (original y scale) over a random k-fold split.

    Each training fold re-standardizes y on its own subset but keeps the
    parent x scaling, so held-out predictors stay inside [0, 1] for the
    basis.  Held-out points are predicted by the posterior-mean curve.
    """
    n = data.n
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"need at least k={k} observations, got {n}")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    folds = np.array_split(perm, k)
    seeds = rng.integers(0, 2**63 - 1, size=k)
    y_orig = data.scaling.to_value(data.y)

    squared_errors: list[np.ndarray] = []
    for fold, chain_seed in zip(folds, seeds):
        test_idx = np.sort(fold)
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        y_train = y_orig[train_mask]
        y_mean = float(np.mean(y_train))
        y_sd = float(np.std(y_train, ddof=1))
        if y_sd == 0.0:
            raise ValueError("degenerate training fold: zero outcome variance")
        train = Dataset(
            x=data.x[train_mask],
            y=(y_train - y_mean) / y_sd,
            scaling=ScalingInfo(
                y_mean=y_mean,
                y_sd=y_sd,
                x_min=data.scaling.x_min,
                x_max=data.scaling.x_max,
                trim_start=data.scaling.trim_start,
                trim_end=data.scaling.trim_end,
            ),
        )
        sample = run_chain(config.replace(seed=int(chain_seed)), train)
        predicted = posterior_curve(sample, data.x[test_idx]).mean
        squared_errors.append((predicted - y_orig[test_idx]) ** 2)
    return float(np.sqrt(np.mean(np.concatenate(squared_errors))))


@dataclass(frozen=True)
class OlsFit:
    slope: float
    intercept: float
    p_value: float
    rmse_on_grid: float | None = None
    rmse_deriv_on_grid: float | None = None


def ols_fit(data: Dataset, truth_name: str | None = None) -> OlsFit:
    """Straight-line least squares on the original scale, with slope test.

    When a scenario name is given, also reports grid RMSE of the line against
    the truth and of the (constant) analytic slope against the true
    derivative.
    """
    if data.n < 3:
        raise ValueError("need at least 3 observations")
    t = data.scaling.to_time(data.x)
    y = data.scaling.to_value(data.y)
    t_center = t - t.mean()
    sxx = float(t_center @ t_center)
    if sxx == 0.0:
        raise ValueError("degenerate predictor: zero variance")
    slope = float(t_center @ y) / sxx
    intercept = float(y.mean() - slope * t.mean())
    resid = y - (intercept + slope * t)
    dof = data.n - 2
    sigma2_hat = float(resid @ resid) / dof
    se = math.sqrt(sigma2_hat / sxx)
    t_stat = slope / se if se > 0 else math.inf
    p_value = float(2.0 * stats.t.sf(abs(t_stat), dof))
    rmse = rmse_deriv = None
    if truth_name is not None:
        grid = np.linspace(t[0], t[-1], EVAL_GRID_SIZE)
        truth = scenario_truth(truth_name, grid)
        rmse = float(np.sqrt(np.mean((intercept + slope * grid - truth) ** 2)))
        truth_d = scenario_derivative(truth_name, grid)
        rmse_deriv = float(np.sqrt(np.mean((slope - truth_d) ** 2)))
    return OlsFit(
        slope=slope,
        intercept=intercept,
        p_value=p_value,
        rmse_on_grid=rmse,
        rmse_deriv_on_grid=rmse_deriv,
    )


def _replicate_worker(args) -> MetricsReport:
    scenario, config, seed_int = args
    streams = np.random.SeedSequence(seed_int).spawn(2)
    data = generate_dataset(scenario, np.random.default_rng(streams[0]))
    chain_seed = int(streams[1].generate_state(1, dtype=np.uint64)[0] >> 1)
    sample = run_chain(config.replace(seed=chain_seed), data)
    sample.validate()
    return evaluate_fit(sample, scenario)


def run_replicates(
    scenario: Scenario,
    config: ModelConfig,
    replicates: int,
    seed: int,
    jobs: int = 1,
) -> list[MetricsReport]:
    """Fit ``replicates`` independent datasets, optionally across processes.

    Every replicate owns a seed stream spawned from ``seed``, so results are
    identical for any ``jobs`` value.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    seeds = np.random.SeedSequence(seed).generate_state(replicates, dtype=np.uint64)
    args = [(scenario, config, int(s)) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_replicate_worker, args))
    return [_replicate_worker(a) for a in args]


def summarize_reports(reports: list[MetricsReport]) -> dict:
    """Mean and standard error of each metric across replicates."""
    if not reports:
        raise ValueError("no reports to summarize")
    out: dict = {"replicates": len(reports)}
    names = list(MetricsReport.__dataclass_fields__)
    r = len(reports)
    for name in names:
        values = np.asarray([getattr(rep, name) for rep in reports])
        out[f"{name}_mean"] = float(values.mean())
        out[f"{name}_se"] = float(values.std(ddof=1) / math.sqrt(r)) if r > 1 else 0.0
    return out
