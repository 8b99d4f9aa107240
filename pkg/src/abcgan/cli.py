"""Command-line interface: gen-data, run, grid, report.

Exit codes: 0 success, 1 usage/config error, 2 runtime failure. All artifacts
go under the output directory; inputs are never mutated. ABCGAN_OUT and
ABCGAN_WORKERS environment variables override the output root and worker
count from the config file.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import gen_friedman3, write_csv
from .experiments import (
    DATASETS,
    AggregateResult,
    DataConfig,
    ExperimentSpec,
    aggregate,
    collect_model_maes,
    emit_boxplot_stats,
    emit_table,
    format_4dp,
    load_cached_docs,
    load_dataset,
    run_grid,
    run_single,
    _atomic_write,
    _cell_key,
    _json_sanitize,
    _result_to_json,
)
from .figures import render_mae_boxplots
from .gan import VARIANTS, GanConfig
from .misspec import MisspecGrid, NoiseSpec
from .priors import PRIOR_KINDS


class ConfigError(ValueError):
    """The config file is malformed; the message names the offending key."""


@dataclass
class Config:
    datasets: tuple[str, ...] = ("friedman3",)
    priors: tuple[str, ...] = ("linear",)
    variants: tuple[str, ...] = ("mgan", "skipgan")
    repetitions: int = 10
    master_seed: int = 0
    variances: tuple[float, ...] = (1.0, 0.1, 0.01)
    biases: tuple[float, ...] = (1.0, 0.1, 0.01, 0.0)
    data: DataConfig = field(default_factory=DataConfig)
    epochs: int = 1000
    batch_size: int = 32
    learning_rate: float | None = None  # None -> per-dataset default
    noise_dim: int = 1
    d_steps_per_g_step: int = 1
    prior_refresh: str = "batch"
    out_dir: str = "results"
    workers: int = 1
    include_diverged: bool = True
    boxplot_outlier_filter: bool = False
    eval_generator_only: bool = False

    def gan_config(self, dataset: str) -> GanConfig:
        from .experiments import DATASET_LEARNING_RATES

        lr = self.learning_rate
        if lr is None:
            lr = DATASET_LEARNING_RATES.get(dataset, 0.01)
        return GanConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=lr,
            noise_dim=self.noise_dim,
            d_steps_per_g_step=self.d_steps_per_g_step,
            prior_refresh=self.prior_refresh,
        )

    def experiment_spec(self, dataset: str, prior: str) -> ExperimentSpec:
        return ExperimentSpec(
            dataset=dataset,
            prior=prior,
            variants=self.variants,
            grid=MisspecGrid(variances=self.variances, biases=self.biases),
            repetitions=self.repetitions,
            gan=self.gan_config(dataset),
            master_seed=self.master_seed,
            eval_generator_only=self.eval_generator_only,
        )


_SECTION_KEYS = {
    "experiment": {
        "datasets", "priors", "variants", "repetitions", "master_seed",
        "variances", "biases",
    },
    "data": {
        "friedman3_n", "friedman3_seed", "friedman3_noise_std",
        "boston_csv", "energy_csv",
    },
    "gan": {
        "epochs", "batch_size", "learning_rate", "noise_dim",
        "d_steps_per_g_step", "prior_refresh",
    },
    "output": {"out_dir", "workers"},
    "flags": {"include_diverged", "boxplot_outlier_filter", "eval_generator_only"},
}


def _split_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _parse_bool(raw: str, where: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {raw!r}")


def parse_config(path: str | Path) -> Config:
    """Load and validate the INI-style config; unknown sections/keys are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = Config()
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in section [{section}]")
            where = f"{path}: [{section}] {key}"
            try:
                _apply_key(cfg, section, key, raw, where)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from exc
    _validate(cfg, path)
    if os.environ.get("ABCGAN_OUT"):
        cfg.out_dir = os.environ["ABCGAN_OUT"]
    if os.environ.get("ABCGAN_WORKERS"):
        try:
            cfg.workers = int(os.environ["ABCGAN_WORKERS"])
        except ValueError:
            raise ConfigError("ABCGAN_WORKERS must be an integer") from None
    return cfg


def _apply_key(cfg: Config, section: str, key: str, raw: str, where: str) -> None:
    if section == "experiment":
        if key in ("datasets", "priors", "variants"):
            setattr(cfg, key, tuple(_split_list(raw)))
        elif key in ("repetitions", "master_seed"):
            setattr(cfg, key, int(raw))
        else:  # variances / biases
            setattr(cfg, key, tuple(float(v) for v in _split_list(raw)))
    elif section == "data":
        if key in ("boston_csv", "energy_csv"):
            setattr(cfg.data, key, raw.strip())
        elif key == "friedman3_noise_std":
            cfg.data.friedman3_noise_std = float(raw)
        else:
            setattr(cfg.data, key, int(raw))
    elif section == "gan":
        if key == "learning_rate":
            cfg.learning_rate = float(raw)
        elif key == "prior_refresh":
            cfg.prior_refresh = raw.strip()
        else:
            setattr(cfg, key, int(raw))
    elif section == "output":
        if key == "out_dir":
            cfg.out_dir = raw.strip()
        else:
            cfg.workers = int(raw)
    else:  # flags
        setattr(cfg, key, _parse_bool(raw, where))


def _validate(cfg: Config, path: Path) -> None:
    for name in cfg.datasets:
        if name not in DATASETS:
            raise ConfigError(f"{path}: unknown dataset {name!r}; valid: {', '.join(DATASETS)}")
    for prior in cfg.priors:
        if prior not in PRIOR_KINDS:
            raise ConfigError(f"{path}: unknown prior {prior!r}; valid: {', '.join(PRIOR_KINDS)}")
    for variant in cfg.variants:
        if variant not in VARIANTS:
            raise ConfigError(f"{path}: unknown variant {variant!r}; valid: {', '.join(VARIANTS)}")
    if cfg.repetitions < 1:
        raise ConfigError(f"{path}: repetitions must be >= 1")
    if cfg.workers < 1:
        raise ConfigError(f"{path}: workers must be >= 1")
    if not cfg.variances or not cfg.biases:
        raise ConfigError(f"{path}: variances and biases must be non-empty")
    if any(v < 0 for v in cfg.variances):
        raise ConfigError(f"{path}: variances must be >= 0")
    if cfg.prior_refresh not in ("batch", "epoch"):
        raise ConfigError(f"{path}: prior_refresh must be 'batch' or 'epoch'")


# ---------------------------------------------------------------------------
# Commands.

def cmd_gen_data(args) -> int:
    if args.dataset != "friedman3":
        raise ConfigError(
            f"gen-data synthesizes 'friedman3' only; {args.dataset!r} is "
            "ingested from a CSV file (see README)"
        )
    ds = gen_friedman3(args.n, np.random.default_rng(args.seed))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out, feature_names=["z1", "z2", "z3", "z4"])
    print(f"wrote {ds.n} rows to {out}")
    return 0


def _parse_cell(raw: str) -> tuple[str, str, str, NoiseSpec]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 5:
        raise ConfigError(
            "--cell expects dataset,prior,variant,variance,bias "
            f"(5 fields, got {len(parts)})"
        )
    dataset, prior, variant, var_raw, bias_raw = parts
    problems = []
    if dataset not in DATASETS:
        problems.append(f"dataset {dataset!r} (valid: {', '.join(DATASETS)})")
    if prior not in PRIOR_KINDS:
        problems.append(f"prior {prior!r} (valid: {', '.join(PRIOR_KINDS)})")
    if variant not in VARIANTS:
        problems.append(f"variant {variant!r} (valid: {', '.join(VARIANTS)})")
    try:
        noise = NoiseSpec(mu=float(bias_raw), sigma2=float(var_raw))
    except ValueError as exc:
        problems.append(str(exc))
        noise = None  # type: ignore[assignment]
    if problems:
        raise ConfigError("invalid cell coordinates: " + "; ".join(problems))
    return dataset, prior, variant, noise


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    dataset_name, prior, variant, noise = _parse_cell(args.cell)
    if args.seed is not None:
        cfg.master_seed = args.seed
    cfg.variants = (variant,)
    exp = cfg.experiment_spec(dataset_name, prior)
    dataset = load_dataset(dataset_name, cfg.data)
    out_dir = Path(cfg.out_dir)
    cache_dir = out_dir / "cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for rep in range(cfg.repetitions):
        res = run_single(exp, dataset, noise, variant, rep)
        doc = _result_to_json(exp, noise, variant, rep, res)
        _atomic_write(cache_dir / f"{_cell_key(exp, noise, variant, rep)}.json", _json_sanitize(doc))
        results.append(res)
        w = "-" if res.skip_weight is None else format_4dp(res.skip_weight)
        status = "DIVERGED" if res.diverged else "ok"
        print(
            f"rep={rep} seed={res.seed} mae_prior={format_4dp(res.mae_prior)} "
            f"mae_gan={format_4dp(res.mae_gan)} w_gan={w} [{status}]"
        )
    completed = [r for r in results if not r.diverged]
    n_div = len(results) - len(completed)
    mean_prior = float(np.mean([r.mae_prior for r in results]))
    mean_gan = float(np.mean([r.mae_gan for r in completed])) if completed else float("nan")
    line = (
        f"cell {dataset_name}/{prior}/{variant} var={noise.sigma2:g} bias={noise.mu:g}: "
        f"prior={format_4dp(mean_prior)} gan={format_4dp(mean_gan)} "
        f"reps={len(results)} diverged={n_div}"
    )
    if variant == "skipgan" and completed:
        weights = [r.skip_weight for r in completed if r.skip_weight is not None]
        if weights:
            line += f" w_gan={format_4dp(float(np.mean(weights)))}"
    print(line)
    return 0


def _emit_all(
    cfg: Config,
    per_pair: dict[tuple[str, str], list[AggregateResult]],
    per_dataset_maes: dict[str, dict[str, list[float]]],
    out_dir: Path,
) -> None:
    tables_dir = out_dir / "tables"
    box_dir = out_dir / "boxplots"
    tables_dir.mkdir(parents=True, exist_ok=True)
    box_dir.mkdir(parents=True, exist_ok=True)
    for (dataset, prior), aggs in per_pair.items():
        _atomic_write(tables_dir / f"{dataset}_{prior}.md", emit_table(aggs, "markdown"))
        _atomic_write(tables_dir / f"{dataset}_{prior}.csv", emit_table(aggs, "csv"))
    for dataset, model_maes in per_dataset_maes.items():
        _atomic_write(
            box_dir / f"{dataset}.csv",
            emit_boxplot_stats(model_maes, filter_outliers=cfg.boxplot_outlier_filter),
        )
        render_mae_boxplots(
            model_maes,
            box_dir / f"{dataset}.png",
            title=f"{dataset}: per-run validation MAE",
            filter_outliers=cfg.boxplot_outlier_filter,
        )


def cmd_grid(args) -> int:
    cfg = parse_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    if args.workers:
        cfg.workers = args.workers
    out_dir = Path(cfg.out_dir)
    per_pair: dict[tuple[str, str], list[AggregateResult]] = {}
    per_dataset: dict[str, dict[str, list[float]]] = {}
    from .misspec import enumerate_grid

    for dataset_name in cfg.datasets:
        dataset = load_dataset(dataset_name, cfg.data)
        merged: dict[str, list[float]] = {}
        for prior in cfg.priors:
            exp = cfg.experiment_spec(dataset_name, prior)
            aggs = run_grid(
                exp,
                dataset,
                out_dir,
                workers=cfg.workers,
                include_outliers=cfg.include_diverged,
            )
            per_pair[(dataset_name, prior)] = aggs
            cells = enumerate_grid(exp.grid)
            docs = _reload_docs(exp, cells, out_dir)
            for model, values in collect_model_maes(exp, cells, docs).items():
                merged.setdefault(model, []).extend(values)
        per_dataset[dataset_name] = merged
    _emit_all(cfg, per_pair, per_dataset, out_dir)
    print(f"grid complete; artifacts under {out_dir}")
    return 0


def _reload_docs(exp: ExperimentSpec, cells, out_dir: Path) -> dict[tuple, dict]:
    docs = {}
    cache = out_dir / "cache"
    for noise in cells:
        for variant in exp.variants:
            for rep in range(exp.repetitions):
                path = cache / f"{_cell_key(exp, noise, variant, rep)}.json"
                if path.exists():
                    docs[(noise, variant, rep)] = json.loads(path.read_text(encoding="utf-8"))
    return docs


def cmd_report(args) -> int:
    in_dir = Path(args.in_dir)
    docs = load_cached_docs(in_dir)
    if not docs:
        raise RuntimeError(f"no cached results under {in_dir}/cache")
    out_dir = Path(args.out) if args.out else in_dir
    # Regroup the flat documents by (dataset, prior); rows sort descending on
    # (variance, bias) to match the default grid order.
    groups: dict[tuple[str, str], list[dict]] = {}
    for doc in docs:
        groups.setdefault((doc["dataset"], doc["prior"]), []).append(doc)
    tables_dir = out_dir / "tables"
    box_dir = out_dir / "boxplots"
    tables_dir.mkdir(parents=True, exist_ok=True)
    box_dir.mkdir(parents=True, exist_ok=True)
    table_fmt = "markdown" if args.format == "md" else "csv"
    per_dataset: dict[str, dict[str, list[float]]] = {}
    for (dataset, prior), group in sorted(groups.items()):
        cells = sorted(
            {(d["variance"], d["bias"]) for d in group},
            key=lambda vb: (-vb[0], -vb[1]),
        )
        noise_cells = [NoiseSpec(mu=b, sigma2=v) for v, b in cells]
        variants = tuple(sorted({d["variant"] for d in group}))
        reps = 1 + max(d["rep"] for d in group)
        exp = ExperimentSpec(
            dataset=dataset, prior=prior, variants=variants, repetitions=reps
        )
        keyed = {
            (NoiseSpec(mu=d["bias"], sigma2=d["variance"]), d["variant"], d["rep"]): d
            for d in group
        }
        aggs = aggregate(exp, noise_cells, keyed, include_outliers=True)
        suffix = "md" if args.format == "md" else "csv"
        _atomic_write(tables_dir / f"{dataset}_{prior}.{suffix}", emit_table(aggs, table_fmt))
        merged = per_dataset.setdefault(dataset, {})
        for model, values in collect_model_maes(exp, noise_cells, keyed).items():
            merged.setdefault(model, []).extend(values)
    for dataset, model_maes in per_dataset.items():
        _atomic_write(
            box_dir / f"{dataset}.csv",
            emit_boxplot_stats(model_maes, filter_outliers=args.outlier_filter),
        )
        render_mae_boxplots(
            model_maes,
            box_dir / f"{dataset}.png",
            title=f"{dataset}: per-run validation MAE",
            filter_outliers=args.outlier_filter,
        )
    print(f"report written under {out_dir}")
    return 0


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this tool reserves 2 for runtime.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="abcgan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[], help="synthesize a dataset CSV")
    p.add_argument("--dataset", default="friedman3")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("run", help="run all repetitions of one grid cell")
    p.add_argument("--config", required=True)
    p.add_argument("--cell", required=True, metavar="dataset,prior,variant,variance,bias")
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="run the full configured sweep and emit reports")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="re-emit tables/boxplots from cached results")
    p.add_argument("--in", dest="in_dir", required=True, metavar="RESULTS_DIR")
    p.add_argument("--out", default=None, help="write artifacts elsewhere")
    p.add_argument("--format", choices=["md", "csv"], default="md")
    p.add_argument(
        "--outlier-filter",
        action="store_true",
        help="drop per-run MAE >= 20 from boxplots (count always reported)",
    )
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"abcgan: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures map to exit code 2
        print(f"abcgan: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
