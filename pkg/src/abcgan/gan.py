"""Adversarial corrector architectures and their training loops.

Three variants share one generator/discriminator topology:

* cgan     -- generator sees [noise | x]; plain conditional baseline.
* mgan     -- generator sees [y_prior | x], so it corrects the prior sampler.
* skipgan  -- mgan plus a learnable convex blend: the discriminator judges
              (1 - w) * y_prior + w * y_generator, with w = sigmoid(theta)
              trained alongside the generator. w near 1 means the data forced
              a heavy correction; w near 0 means the prior was trusted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import neuralcore as nc
from .data import Dataset
from .misspec import NoiseSpec, simulate_responses
from .priors import PriorModel

VARIANTS = ("cgan", "mgan", "skipgan")

GENERATOR_HIDDEN = [50, 50, 50, 50, 50]
DISCRIMINATOR_HIDDEN = [25, 50]


class TrainingDivergedError(RuntimeError):
    """A loss or gradient went non-finite; the run is aborted, not silently dropped."""


@dataclass
class GanConfig:
    epochs: int = 1000
    batch_size: int = 32
    learning_rate: float = 0.001
    noise_dim: int = 1                # cgan only
    d_steps_per_g_step: int = 1
    prior_refresh: str = "batch"      # "batch" | "epoch"

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if min(self.batch_size, self.noise_dim, self.d_steps_per_g_step) < 1:
            raise ValueError("batch_size, noise_dim and d_steps_per_g_step must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.prior_refresh not in ("batch", "epoch"):
            raise ValueError(f"prior_refresh must be 'batch' or 'epoch', got {self.prior_refresh!r}")


@dataclass
class SkipState:
    """Unconstrained blend parameter; the reported weight is sigmoid(theta)."""

    theta: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @property
    def w_gan(self) -> float:
        """Weight on the generator output, clamped to [0, 1] for display."""
        return float(min(max(nc.sigmoid(self.theta)[0], 0.0), 1.0))


@dataclass
class TrainingHistory:
    d_loss: list[float] = field(default_factory=list)
    g_loss: list[float] = field(default_factory=list)
    w_gan: list[float] = field(default_factory=list)  # nan for non-skip variants


@dataclass
class GanModel:
    variant: str
    generator: nc.Network
    discriminator: nc.Network
    skip: SkipState | None = None
    history: TrainingHistory = field(default_factory=TrainingHistory)

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if (self.variant == "skipgan") != (self.skip is not None):
            raise ValueError("skip state present iff variant is skipgan")


def build_gan(
    variant: str, feature_dim: int, config: GanConfig, rng: np.random.Generator
) -> GanModel:
    """Fresh generator/discriminator pair for `feature_dim` features.

    Generator: [feature_dim+1] -> five ReLU layers of 50 -> identity scalar.
    Discriminator: [feature_dim+1] -> ReLU 25 -> ReLU 50 -> sigmoid scalar.
    The extra input slot holds the prior response (mgan/skipgan) or the
    conditioning noise (cgan), so all variants share one topology.
    skipgan starts at theta = 0, i.e. an even blend w_gan = 0.5.
    """
    if feature_dim < 1:
        raise ValueError("feature_dim must be >= 1")
    gen_dims = [feature_dim + config.noise_dim if variant == "cgan" else feature_dim + 1]
    gen_dims += GENERATOR_HIDDEN + [1]
    generator = nc.init_network(gen_dims, ["relu"] * len(GENERATOR_HIDDEN) + ["identity"], rng)
    disc_dims = [feature_dim + 1] + DISCRIMINATOR_HIDDEN + [1]
    discriminator = nc.init_network(
        disc_dims, ["relu"] * len(DISCRIMINATOR_HIDDEN) + ["sigmoid"], rng
    )
    skip = SkipState() if variant == "skipgan" else None
    return GanModel(variant=variant, generator=generator, discriminator=discriminator, skip=skip)


def generator_output(
    model: GanModel, x_batch: np.ndarray, y_prior_or_noise: np.ndarray
) -> np.ndarray:
    """Generator responses for [y_prior | x] (mgan/skipgan) or [e | x] (cgan)."""
    cond = np.asarray(y_prior_or_noise, dtype=np.float64)
    if cond.ndim == 1:
        cond = cond[:, None]
    return nc.forward(model.generator, np.concatenate([cond, x_batch], axis=1))[:, 0]


def discriminator_input(
    model: GanModel,
    x: np.ndarray,
    y_candidate: np.ndarray,
    y_prior: np.ndarray | None = None,
) -> np.ndarray:
    """Rows handed to the discriminator.

    Real rows and cgan/mgan fakes are [y_candidate | x]. skipgan fakes
    (signalled by passing y_prior) blend the candidate with the prior draw:
    [(1 - w_gan) * y_prior + w_gan * y_candidate | x].
    """
    y = np.asarray(y_candidate, dtype=np.float64)
    if y_prior is not None:
        if model.skip is None:
            raise ValueError("blending requires a skipgan model with skip state")
        w = model.skip.w_gan
        y = (1.0 - w) * np.asarray(y_prior, dtype=np.float64) + w * y
    return np.concatenate([y[:, None], x], axis=1)


def _generator_condition(
    model: GanModel,
    X: np.ndarray,
    prior: PriorModel | None,
    spec: NoiseSpec | None,
    config: GanConfig,
    rng: np.random.Generator,
    response_noise_std: float = 1.0,
) -> np.ndarray:
    if model.variant == "cgan":
        return rng.standard_normal((X.shape[0], config.noise_dim))
    if prior is None:
        raise ValueError(f"{model.variant} needs a fitted prior")
    assert spec is not None
    return simulate_responses(prior, X, spec, rng, response_noise_std)


def _discriminator_step(
    model: GanModel,
    Xb: np.ndarray,
    yb: np.ndarray,
    cond: np.ndarray,
    d_state: nc.OptimizerState,
) -> float:
    y_gamma = generator_output(model, Xb, cond)
    if model.variant == "skipgan":
        fake_in = discriminator_input(model, Xb, y_gamma, y_prior=cond)
    else:
        fake_in = discriminator_input(model, Xb, y_gamma)
    real_in = discriminator_input(model, Xb, yb)
    stacked = np.concatenate([real_in, fake_in], axis=0)
    labels = np.concatenate([np.ones(Xb.shape[0]), np.zeros(Xb.shape[0])])
    trace = nc.forward_trace(model.discriminator, stacked)
    loss, dp = nc.bce_loss(trace[-1][:, 0], labels)
    grads = nc.backward(model.discriminator, stacked, dp[:, None], trace)
    nc.adam_step(model.discriminator.parameters(), grads.parameter_grads(), d_state)
    return loss


def _generator_step(
    model: GanModel,
    Xb: np.ndarray,
    cond: np.ndarray,
    g_state: nc.OptimizerState,
) -> float:
    cond2d = cond if cond.ndim == 2 else cond[:, None]
    gin = np.concatenate([cond2d, Xb], axis=1)
    g_trace = nc.forward_trace(model.generator, gin)
    y_gamma = g_trace[-1][:, 0]
    if model.variant == "skipgan":
        d_in = discriminator_input(model, Xb, y_gamma, y_prior=cond)
    else:
        d_in = discriminator_input(model, Xb, y_gamma)
    d_trace = nc.forward_trace(model.discriminator, d_in)
    # Non-saturating objective: push D(fake) toward the real label.
    loss, dp = nc.bce_loss(d_trace[-1][:, 0], np.ones(Xb.shape[0]))
    d_grads = nc.backward(model.discriminator, d_in, dp[:, None], d_trace)
    grad_y = d_grads.input_grad[:, 0]
    params = model.generator.parameters()
    if model.variant == "skipgan":
        assert model.skip is not None
        w = float(nc.sigmoid(model.skip.theta)[0])
        upstream = w * grad_y
        theta_grad = np.array([np.dot(grad_y, y_gamma - cond) * w * (1.0 - w)])
        g_grads = nc.backward(model.generator, gin, upstream[:, None], g_trace)
        nc.adam_step(
            params + [model.skip.theta],
            g_grads.parameter_grads() + [theta_grad],
            g_state,
        )
    else:
        g_grads = nc.backward(model.generator, gin, grad_y[:, None], g_trace)
        nc.adam_step(params, g_grads.parameter_grads(), g_state)
    return loss


def train(
    model: GanModel,
    train_data: Dataset,
    prior: PriorModel | None,
    spec: NoiseSpec | None,
    config: GanConfig,
    rng: np.random.Generator,
    response_noise_std: float = 1.0,
) -> GanModel:
    """Adversarial training on (already standardized) data.

    Per epoch the rows are shuffled; per batch the prior responses are
    redrawn (or sliced from one per-epoch draw when prior_refresh="epoch"),
    the discriminator takes `d_steps_per_g_step` BCE steps against
    real-vs-fake labels, then the generator takes one non-saturating step
    whose gradient flows through the blend into the generator parameters and,
    for skipgan, into theta. A non-finite loss or gradient aborts the run
    with TrainingDivergedError.
    """
    X, y = train_data.X, train_data.y
    n = X.shape[0]
    g_params = model.generator.parameters()
    if model.variant == "skipgan":
        assert model.skip is not None
        g_params = g_params + [model.skip.theta]
    g_state = nc.OptimizerState.for_params(g_params, config.learning_rate)
    d_state = nc.OptimizerState.for_params(
        model.discriminator.parameters(), config.learning_rate
    )
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_cond = None
        if model.variant != "cgan" and config.prior_refresh == "epoch":
            epoch_cond = _generator_condition(
                model, X, prior, spec, config, rng, response_noise_std
            )
        d_losses, g_losses = [], []
        try:
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                Xb, yb = X[idx], y[idx]
                if epoch_cond is not None:
                    cond = epoch_cond[idx]
                else:
                    cond = _generator_condition(
                        model, Xb, prior, spec, config, rng, response_noise_std
                    )
                for _ in range(config.d_steps_per_g_step):
                    d_losses.append(_discriminator_step(model, Xb, yb, cond, d_state))
                g_losses.append(_generator_step(model, Xb, cond, g_state))
        except nc.NonFiniteGradientError as exc:
            raise TrainingDivergedError(
                f"non-finite gradient in epoch {epoch}: {exc}"
            ) from exc
        d_loss = float(np.mean(d_losses))
        g_loss = float(np.mean(g_losses))
        if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
            raise TrainingDivergedError(
                f"non-finite loss in epoch {epoch}: d={d_loss} g={g_loss}"
            )
        model.history.d_loss.append(d_loss)
        model.history.g_loss.append(g_loss)
        model.history.w_gan.append(model.skip.w_gan if model.skip else float("nan"))
    return model


def predict(
    model: GanModel,
    x_batch: np.ndarray,
    prior: PriorModel | None,
    spec: NoiseSpec | None,
    rng: np.random.Generator,
    config: GanConfig | None = None,
    generator_only: bool = False,
    response_noise_std: float = 1.0,
) -> np.ndarray:
    """Model responses on a feature batch.

    mgan returns the generator output on a fresh prior draw; skipgan returns
    the blend (1 - w) * y_prior + w * y_generator it was trained against
    (`generator_only=True` evaluates the bare generator instead); cgan draws
    fresh conditioning noise.
    """
    config = config or GanConfig()
    cond = _generator_condition(
        model, x_batch, prior, spec, config, rng, response_noise_std
    )
    y_gamma = generator_output(model, x_batch, cond)
    if model.variant == "skipgan" and not generator_only:
        assert model.skip is not None
        w = model.skip.w_gan
        return (1.0 - w) * cond + w * y_gamma
    return y_gamma


@dataclass
class PosteriorPredictive:
    samples: np.ndarray  # (n_draws, n_rows)
    mean: np.ndarray
    std: np.ndarray


def posterior_predictive(
    model: GanModel,
    x_batch: np.ndarray,
    prior: PriorModel | None,
    spec: NoiseSpec | None,
    rng: np.random.Generator,
    n_draws: int,
    config: GanConfig | None = None,
    response_noise_std: float = 1.0,
) -> PosteriorPredictive:
    """Approximate response draws: repeat fresh prior draws through the model.

    Returns the (n_draws, n) sample matrix with per-row mean and standard
    deviation summaries.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    samples = np.stack(
        [
            predict(
                model, x_batch, prior, spec, rng, config,
                response_noise_std=response_noise_std,
            )
            for _ in range(n_draws)
        ]
    )
    return PosteriorPredictive(
        samples=samples, mean=samples.mean(axis=0), std=samples.std(axis=0)
    )


def history_csv(model: GanModel) -> str:
    """Training history as CSV text: epoch, d_loss, g_loss, w_gan."""
    lines = ["epoch,d_loss,g_loss,w_gan"]
    hist = model.history
    for i, (d, g, w) in enumerate(zip(hist.d_loss, hist.g_loss, hist.w_gan)):
        lines.append(f"{i},{d!r},{g!r},{w!r}")
    return "\n".join(lines) + "\n"
