"""Measurement harness: metric, seeded runs, grid sweeps, and report emitters.

A grid sweep walks (noise level x variant x repetition) for one dataset/prior
pair, caches every repetition result as a small JSON file, and aggregates into
the fixed-format results table plus per-model boxplot statistics.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

import numpy as np

from .data import (
    Dataset,
    gen_friedman3,
    load_boston,
    load_energy,
    split_80_20,
    standardize_apply,
    standardize_fit,
)
from .gan import GanConfig, TrainingDivergedError, build_gan, predict, train
from .misspec import MisspecGrid, NoiseSpec, enumerate_grid, simulate_responses
from .priors import GBTConfig, fit_prior

DATASETS = ("friedman3", "boston", "energy")

# Per-dataset optimizer rates; friedman3 runs an order of magnitude slower.
DATASET_LEARNING_RATES = {"friedman3": 0.001, "boston": 0.01, "energy": 0.01}

OUTLIER_MAE_THRESHOLD = 20.0

TABLE_COLUMNS = ("Variance", "Bias", "Prior model", "mGAN", "skipGAN", "Weights skipGAN")

CACHE_FORMAT_VERSION = 1


def mae(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute error between two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ValueError(f"need equal-length vectors, got shapes {a.shape} and {b.shape}")
    return float(np.mean(np.abs(a - b)))


def derive_seed(*parts) -> int:
    """Stable 63-bit sub-seed from a tuple of labels (sha256-based)."""
    key = "|".join(repr(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class DataConfig:
    friedman3_n: int = 100
    friedman3_seed: int = 20240
    friedman3_noise_std: float = 1.0
    boston_csv: str | None = None
    energy_csv: str | None = None


def load_dataset(name: str, cfg: DataConfig) -> Dataset:
    if name == "friedman3":
        rng = np.random.default_rng(cfg.friedman3_seed)
        return gen_friedman3(cfg.friedman3_n, rng, cfg.friedman3_noise_std)
    if name == "boston":
        if not cfg.boston_csv:
            raise ValueError("no boston_csv path configured")
        return load_boston(cfg.boston_csv)
    if name == "energy":
        if not cfg.energy_csv:
            raise ValueError("no energy_csv path configured")
        return load_energy(cfg.energy_csv)
    raise ValueError(f"unknown dataset {name!r}; expected one of {DATASETS}")


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one dataset/prior sweep."""

    dataset: str
    prior: str
    variants: tuple[str, ...] = ("mgan", "skipgan")
    grid: MisspecGrid = field(default_factory=MisspecGrid)
    repetitions: int = 10
    gan: GanConfig | None = None      # None -> per-dataset default learning rate
    gbt: GBTConfig = field(default_factory=GBTConfig)
    master_seed: int = 0
    eval_generator_only: bool = False

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def gan_config(self) -> GanConfig:
        if self.gan is not None:
            return self.gan
        return GanConfig(learning_rate=DATASET_LEARNING_RATES.get(self.dataset, 0.01))


@dataclass
class RunResult:
    seed: int
    mae_prior: float
    mae_gan: float
    skip_weight: float | None
    diverged: bool = False


@dataclass
class BoxStats:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


@dataclass
class ModelAggregate:
    mean_mae: float
    box: BoxStats | None
    completed: int
    diverged: int
    excluded_outliers: int


@dataclass
class AggregateResult:
    noise: NoiseSpec
    prior: ModelAggregate
    models: dict[str, ModelAggregate]
    skip_weight_mean: float | None


def five_number_summary(values: list[float]) -> BoxStats:
    """Min, quartiles (linear interpolation), max of a non-empty sample."""
    if not values:
        raise ValueError("cannot summarize an empty list")
    q = np.percentile(np.asarray(values, dtype=np.float64), [0, 25, 50, 75, 100])
    return BoxStats(*(float(v) for v in q))


def _aggregate_values(values: list[float], n_diverged: int, include_outliers: bool) -> ModelAggregate:
    kept = values
    excluded = 0
    if not include_outliers:
        kept = [v for v in values if v < OUTLIER_MAE_THRESHOLD]
        excluded = len(values) - len(kept)
    mean = float(np.mean(kept)) if kept else float("nan")
    box = five_number_summary(kept) if kept else None
    return ModelAggregate(
        mean_mae=mean,
        box=box,
        completed=len(values),
        diverged=n_diverged,
        excluded_outliers=excluded,
    )


def run_single(
    exp: ExperimentSpec,
    dataset: Dataset,
    noise: NoiseSpec,
    variant: str,
    rep: int,
) -> RunResult:
    """One repetition of one grid cell.

    The split seed depends only on (master seed, dataset, repetition), so every
    variant and noise level in a repetition scores against the same validation
    rows. Prior evaluation and GAN training use their own derived streams.
    A diverged training run is returned flagged, with the prior MAE intact.
    """
    split = split_80_20(dataset, derive_seed(exp.master_seed, "split", exp.dataset, rep))
    std = standardize_fit(split.train)
    tr = standardize_apply(std, split.train)
    va = standardize_apply(std, split.valid)
    prior = fit_prior(exp.prior, tr.X, tr.y, exp.gbt)
    # The linear channel's unit-variance response noise lives on the raw
    # target scale; expressed in standardized units it shrinks by y_std.
    resp_std = 1.0 / std.y_std

    prior_rng = np.random.default_rng(
        derive_seed(exp.master_seed, "prior-eval", exp.dataset, exp.prior, noise.mu, noise.sigma2, rep)
    )
    mae_prior = mae(va.y, simulate_responses(prior, va.X, noise, prior_rng, resp_std))

    run_seed = derive_seed(
        exp.master_seed, "train", exp.dataset, exp.prior, variant, noise.mu, noise.sigma2, rep
    )
    rng = np.random.default_rng(run_seed)
    config = exp.gan_config()
    model = build_gan(variant, dataset.p, config, rng)
    try:
        train(model, tr, prior, noise, config, rng, response_noise_std=resp_std)
    except TrainingDivergedError:
        return RunResult(
            seed=run_seed,
            mae_prior=mae_prior,
            mae_gan=float("nan"),
            skip_weight=None,
            diverged=True,
        )
    eval_rng = np.random.default_rng(
        derive_seed(exp.master_seed, "eval", exp.dataset, exp.prior, variant, noise.mu, noise.sigma2, rep)
    )
    y_hat = predict(
        model, va.X, prior, noise, eval_rng, config,
        generator_only=exp.eval_generator_only,
        response_noise_std=resp_std,
    )
    return RunResult(
        seed=run_seed,
        mae_prior=mae_prior,
        mae_gan=mae(va.y, y_hat),
        skip_weight=model.skip.w_gan if model.skip else None,
    )


# ---------------------------------------------------------------------------
# Result cache: one JSON file per repetition, keyed by the full protocol hash.

def _cell_key(exp: ExperimentSpec, noise: NoiseSpec, variant: str, rep: int) -> str:
    cfg = exp.gan_config()
    parts = (
        exp.dataset, exp.prior, variant, noise.mu, noise.sigma2, rep,
        exp.master_seed, cfg.epochs, cfg.batch_size, cfg.learning_rate,
        cfg.noise_dim, cfg.d_steps_per_g_step, cfg.prior_refresh,
        exp.gbt.n_trees, exp.gbt.max_depth, exp.gbt.shrinkage, exp.gbt.min_leaf,
        exp.eval_generator_only,
    )
    return hashlib.sha256("|".join(repr(p) for p in parts).encode()).hexdigest()[:16]


def _result_to_json(exp: ExperimentSpec, noise: NoiseSpec, variant: str, rep: int, res: RunResult) -> dict:
    return {
        "format_version": CACHE_FORMAT_VERSION,
        "kind": "run_result",
        "dataset": exp.dataset,
        "prior": exp.prior,
        "variant": variant,
        "variance": noise.sigma2,
        "bias": noise.mu,
        "rep": rep,
        "seed": res.seed,
        "mae_prior": res.mae_prior,
        "mae_gan": res.mae_gan,
        "skip_weight": res.skip_weight,
        "diverged": res.diverged,
    }


def _result_from_json(doc: dict) -> RunResult:
    return RunResult(
        seed=doc["seed"],
        mae_prior=doc["mae_prior"],
        mae_gan=doc["mae_gan"] if doc["mae_gan"] is not None else float("nan"),
        skip_weight=doc["skip_weight"],
        diverged=doc["diverged"],
    )


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _json_sanitize(doc: dict) -> str:
    # json.dumps rejects NaN only with allow_nan=False; we keep NaN as null.
    def fix(v):
        if isinstance(v, float) and not np.isfinite(v):
            return None
        return v

    return json.dumps({k: fix(v) for k, v in doc.items()}, indent=0, sort_keys=True)


def _run_task(args) -> tuple[str, dict]:
    exp, dataset, noise, variant, rep = args
    res = run_single(exp, dataset, noise, variant, rep)
    return _cell_key(exp, noise, variant, rep), _result_to_json(exp, noise, variant, rep, res)


def run_grid(
    exp: ExperimentSpec,
    dataset: Dataset,
    out_dir: str | Path,
    workers: int = 1,
    include_outliers: bool = True,
    progress: bool = True,
) -> list[AggregateResult]:
    """Sweep the full (noise x variant x repetition) grid for one dataset/prior.

    Repetition results are cached one-per-file under out_dir/cache and reused
    on re-runs; only missing cells are computed. Work items are independent
    and seeded individually, so any worker count yields identical results.
    """
    out_dir = Path(out_dir)
    cache_dir = out_dir / "cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    cells = enumerate_grid(exp.grid)
    tasks = [
        (noise, variant, rep)
        for noise in cells
        for variant in exp.variants
        for rep in range(exp.repetitions)
    ]
    docs: dict[tuple, dict] = {}
    pending = []
    for noise, variant, rep in tasks:
        key = _cell_key(exp, noise, variant, rep)
        cached = cache_dir / f"{key}.json"
        if cached.exists():
            docs[(noise, variant, rep)] = json.loads(cached.read_text(encoding="utf-8"))
        else:
            pending.append((noise, variant, rep))
    if progress and pending:
        print(
            f"[abcgan] {exp.dataset}/{exp.prior}: {len(pending)} runs to compute, "
            f"{len(docs)} cached",
            file=sys.stderr,
        )
    if pending:
        work = [(exp, dataset, noise, variant, rep) for noise, variant, rep in pending]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(_run_task, work))
        else:
            outcomes = []
            for i, item in enumerate(work):
                outcomes.append(_run_task(item))
                if progress:
                    print(f"[abcgan] run {i + 1}/{len(work)} done", file=sys.stderr)
        for (noise, variant, rep), (key, doc) in zip(pending, outcomes):
            _atomic_write(cache_dir / f"{key}.json", _json_sanitize(doc))
            docs[(noise, variant, rep)] = json.loads(_json_sanitize(doc))
    return aggregate(exp, cells, docs, include_outliers=include_outliers)


def aggregate(
    exp: ExperimentSpec,
    cells: list[NoiseSpec],
    docs: dict[tuple, dict],
    include_outliers: bool = True,
) -> list[AggregateResult]:
    """Collapse repetition documents into one row per noise level."""
    rows = []
    for noise in cells:
        prior_by_rep: dict[int, float] = {}
        per_model: dict[str, list[float]] = {}
        per_model_div: dict[str, int] = {}
        weights: list[float] = []
        for variant in exp.variants:
            for rep in range(exp.repetitions):
                doc = docs.get((noise, variant, rep))
                if doc is None:
                    continue
                prior_by_rep[rep] = doc["mae_prior"]
                if doc["diverged"] or doc["mae_gan"] is None:
                    per_model_div[variant] = per_model_div.get(variant, 0) + 1
                    per_model.setdefault(variant, [])
                    continue
                per_model.setdefault(variant, []).append(doc["mae_gan"])
                if variant == "skipgan" and doc["skip_weight"] is not None:
                    weights.append(doc["skip_weight"])
        prior_vals = [prior_by_rep[r] for r in sorted(prior_by_rep)]
        rows.append(
            AggregateResult(
                noise=noise,
                prior=_aggregate_values(prior_vals, 0, include_outliers=True),
                models={
                    v: _aggregate_values(vals, per_model_div.get(v, 0), include_outliers)
                    for v, vals in per_model.items()
                },
                skip_weight_mean=float(np.mean(weights)) if weights else None,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Emitters.

def format_4dp(x: float) -> str:
    """Fixed 4-decimal display with round-half-even on the decimal repr."""
    if not np.isfinite(x):
        return "nan"
    return str(Decimal(repr(x)).quantize(Decimal("0.0001"), rounding=ROUND_HALF_EVEN))


def _format_level(v: float) -> str:
    return f"{v:g}"


def emit_table(aggregates: list[AggregateResult], fmt: str = "markdown") -> str:
    """Render the fixed-column results table.

    Markdown uses 4-decimal round-half-even display and bolds the best MAE in
    each row; CSV keeps full float precision so values parse back exactly.
    A trailing cGAN column is appended only when cgan results are present.
    """
    if not aggregates:
        raise ValueError("no aggregates to emit")
    if fmt not in ("markdown", "csv"):
        raise ValueError(f"format must be 'markdown' or 'csv', got {fmt!r}")
    has_cgan = any("cgan" in agg.models for agg in aggregates)
    header = list(TABLE_COLUMNS) + (["cGAN"] if has_cgan else [])
    rows: list[list[str]] = []
    for agg in aggregates:
        mae_cells: dict[str, float] = {"prior": agg.prior.mean_mae}
        for key in ("mgan", "skipgan", "cgan"):
            if key in agg.models:
                mae_cells[key] = agg.models[key].mean_mae
        finite = {k: v for k, v in mae_cells.items() if np.isfinite(v)}
        best = min(finite, key=finite.get) if finite else None

        def cell(key: str) -> str:
            if key not in mae_cells or not np.isfinite(mae_cells[key]):
                return "-" if fmt == "markdown" else ""
            if fmt == "csv":
                return repr(mae_cells[key])
            text = format_4dp(mae_cells[key])
            return f"**{text}**" if key == best else text

        weight = agg.skip_weight_mean
        if weight is None:
            weight_cell = "-" if fmt == "markdown" else ""
        else:
            weight_cell = repr(weight) if fmt == "csv" else format_4dp(weight)
        row = [
            _format_level(agg.noise.sigma2),
            _format_level(agg.noise.mu),
            cell("prior"),
            cell("mgan"),
            cell("skipgan"),
            weight_cell,
        ]
        if has_cgan:
            row.append(cell("cgan"))
        rows.append(row)
    if fmt == "csv":
        lines = [",".join(header)] + [",".join(r) for r in rows]
        return "\n".join(lines) + "\n"
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("|" + "|".join([" --- "] * len(header)) + "|")
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def emit_boxplot_stats(
    per_model_maes: dict[str, list[float]],
    filter_outliers: bool = False,
) -> str:
    """Five-number summaries per model as CSV text.

    With `filter_outliers` the documented MAE >= 20 cut is applied; the number
    of removed points is always reported (0 when the filter is off).
    """
    if not per_model_maes:
        raise ValueError("no model MAE lists given")
    lines = ["model,n,min,q1,median,q3,max,n_filtered,outliers"]
    for model, values in per_model_maes.items():
        if not values:
            raise ValueError(f"model {model!r} has an empty MAE list")
        kept = values
        removed: list[float] = []
        if filter_outliers:
            kept = [v for v in values if v < OUTLIER_MAE_THRESHOLD]
            removed = [v for v in values if v >= OUTLIER_MAE_THRESHOLD]
        if not kept:
            raise ValueError(f"model {model!r}: every value was filtered out")
        box = five_number_summary(kept)
        outliers = ";".join(repr(v) for v in removed)
        lines.append(
            f"{model},{len(kept)},{box.minimum!r},{box.q1!r},{box.median!r},"
            f"{box.q3!r},{box.maximum!r},{len(removed)},{outliers}"
        )
    return "\n".join(lines) + "\n"


def collect_model_maes(
    exp: ExperimentSpec, cells: list[NoiseSpec], docs: dict[tuple, dict]
) -> dict[str, list[float]]:
    """Per-run validation MAEs grouped by model label, prior included."""
    out: dict[str, list[float]] = {f"{exp.prior} prior": []}
    for noise in cells:
        for rep in range(exp.repetitions):
            seen_prior = False
            for variant in exp.variants:
                doc = docs.get((noise, variant, rep))
                if doc is None:
                    continue
                if not seen_prior:
                    out[f"{exp.prior} prior"].append(doc["mae_prior"])
                    seen_prior = True
                if not doc["diverged"] and doc["mae_gan"] is not None:
                    out.setdefault(variant, []).append(doc["mae_gan"])
    return {k: v for k, v in out.items() if v}


def load_cached_docs(out_dir: str | Path) -> list[dict]:
    """Read every cached repetition document under out_dir/cache."""
    cache_dir = Path(out_dir) / "cache"
    if not cache_dir.is_dir():
        return []
    docs = []
    for path in sorted(cache_dir.glob("*.json")):
        doc = json.loads(path.read_text(encoding="utf-8"))
        if doc.get("kind") == "run_result":
            docs.append(doc)
    return docs
