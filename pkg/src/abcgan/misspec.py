"""Controlled misspecification of a fitted prior.

Two Gaussian corruption channels: additive output noise applied to point
predictions, and coefficient noise for linear priors (each coordinate shifted
by the bias and jittered, then unit-variance response noise on top). Both are
samplers: every call draws fresh noise from the supplied generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .priors import LinearFit, PriorModel, predict_gbt, predict_linear


@dataclass(frozen=True)
class NoiseSpec:
    """One misspecification level: bias mu and variance sigma2 (target units)."""

    mu: float
    sigma2: float

    def __post_init__(self) -> None:
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")


@dataclass
class MisspecGrid:
    variances: tuple[float, ...] = (1.0, 0.1, 0.01)
    biases: tuple[float, ...] = (1.0, 0.1, 0.01, 0.0)


def enumerate_grid(grid: MisspecGrid) -> list[NoiseSpec]:
    """Cartesian product in table order: variances outer, biases inner.

    With the default (descending) lists this is the 12-row results order,
    first (1, 1), last (0.01, 0).
    """
    if not grid.variances or not grid.biases:
        raise ValueError("grid must list at least one variance and one bias")
    return [NoiseSpec(mu=b, sigma2=v) for v in grid.variances for b in grid.biases]


def perturb_predictions(
    yhat: np.ndarray, spec: NoiseSpec, rng: np.random.Generator
) -> np.ndarray:
    """Output-noise channel: yhat + mu + sqrt(sigma2) * z, z iid standard normal.

    The degenerate spec (0, 0) returns yhat bit-exactly and draws nothing.
    """
    yhat = np.asarray(yhat, dtype=np.float64)
    if spec.mu == 0.0 and spec.sigma2 == 0.0:
        return yhat.copy()
    out = yhat + spec.mu
    if spec.sigma2 > 0.0:
        out = out + np.sqrt(spec.sigma2) * rng.standard_normal(yhat.shape[0])
    return out


def perturb_coefficients(
    fit: LinearFit,
    X: np.ndarray,
    spec: NoiseSpec,
    rng: np.random.Generator,
    response_noise_std: float = 1.0,
) -> np.ndarray:
    """Coefficient-noise channel for linear priors.

    One perturbed coefficient vector is drawn per call (one draw per simulated
    dataset): each coordinate, intercept included, becomes beta_j + mu plus
    N(0, sigma2) jitter. Responses then get unit-variance Gaussian noise;
    `response_noise_std` rescales it (the experiment pipeline passes the raw
    target scale expressed in standardized units; 0.0 suppresses it entirely,
    which is the deterministic test hook).
    """
    X = np.asarray(X, dtype=np.float64)
    beta = fit.beta + spec.mu
    if spec.sigma2 > 0.0:
        beta = beta + np.sqrt(spec.sigma2) * rng.standard_normal(fit.beta.shape[0])
    out = predict_linear(LinearFit(beta), X)
    if response_noise_std > 0.0:
        out = out + response_noise_std * rng.standard_normal(X.shape[0])
    return out


def simulate_responses(
    prior: PriorModel,
    X: np.ndarray,
    spec: NoiseSpec,
    rng: np.random.Generator,
    response_noise_std: float = 1.0,
) -> np.ndarray:
    """Draw simulated responses from the misspecified prior sampler.

    Linear priors go through the coefficient channel (whose built-in response
    noise is scaled by `response_noise_std`), tree priors through the
    output-noise channel applied to their point predictions.
    """
    if prior.kind == "linear":
        assert prior.linear is not None
        return perturb_coefficients(prior.linear, X, spec, rng, response_noise_std)
    assert prior.trees is not None
    return perturb_predictions(predict_gbt(prior.trees, X), spec, rng)
