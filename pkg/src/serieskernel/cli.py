"""Command-line entry point.

Subcommands: ``gram``, ``classify``, ``regress`` and ``bench``.  Settings
come from an optional JSON config file; command-line flags override it.
Exit codes: 0 ok, 2 configuration error, 3 numeric error, 4 data-format
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, NumericError
from .evaluation import (
    ParamGrid,
    holdout_classification,
    nested_cv,
    t_test_vs_best_baseline,
)
from .skernel import SeriesKernelConfig, bundle, cross_gram
from .strategies import (
    CLASSIFICATION_STRATEGIES,
    REGRESSION_STRATEGIES,
    classification_strategy,
    regression_strategy,
)
from .baselines import FORECAST_BASELINES
from .tsdata import Dataset, load_jsonl, load_ucr_tsv

log = logging.getLogger("serieskernel")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DATA = 0, 2, 3, 4
MISSING = "---"


@dataclass
class RunConfig:
    command: str
    data: str | None = None
    data2: str | None = None
    format: str = "ucr"
    strategy: str | None = None
    seed: int | None = None
    threads: int = 0
    out: str | None = None
    kernel: dict | None = None
    grid: dict = field(default_factory=dict)
    n_test_timestamps: int | None = None
    channels: list | None = None
    outer_k: int = 5
    inner_k: int = 5
    center: bool = False
    name: str | None = None
    strategies: list = field(default_factory=list)
    datasets: list = field(default_factory=list)

    def validate(self) -> None:
        if self.format not in ("ucr", "jsonl"):
            raise ConfigError(f"format must be ucr or jsonl, got {self.format!r}")
        for p in (self.data, self.data2):
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"no such file: {p}")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")

    @property
    def n_threads(self) -> int:
        return self.threads or os.cpu_count() or 1

    def param_grid(self) -> ParamGrid:
        return ParamGrid.from_dict(self.grid)


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the JSON config file with flags; flags win."""
    values: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"no such config file: {path}")
        try:
            values = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        known = {f.name for f in fields(RunConfig)} - {"command"}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config fields {sorted(unknown)}")
    for key in ("data", "data2", "format", "strategy", "seed", "threads", "out",
                "n_test_timestamps"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "kernel", None):
        try:
            values["kernel"] = json.loads(args.kernel)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--kernel: {exc}") from None
    try:
        cfg = RunConfig(command=args.command, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def load_dataset(path, fmt: str) -> Dataset:
    return load_ucr_tsv(path) if fmt == "ucr" else load_jsonl(path)


def dataset_name(cfg: RunConfig) -> str:
    if cfg.name:
        return cfg.name
    stem = Path(cfg.data).stem
    for suffix in ("_TRAIN", "_train"):
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def fmt_accuracy(acc: float, se: float) -> str:
    return f"{100 * acc:.2f}% ± {100 * se:.2f}%"


def fmt_rmse(rmse: float, se: float, stars: str = "") -> str:
    return f"{rmse:.2f} ± {se:.2f}" + (f" {stars}" if stars else "")


def results_record(dataset, strategy, metric, estimate, se, t=None, df=None, stars="",
                   wallclock=0.0, seed=None, histogram=None) -> dict:
    return {
        "dataset": dataset,
        "strategy": strategy,
        "metric": metric,
        "estimate": estimate,
        "se": se,
        "t": t,
        "df": df,
        "stars": stars,
        "wallclock_s": wallclock,
        "seed": seed,
        "grid_choice_histogram": histogram or {},
    }


# -- gram ------------------------------------------------------------------


def cmd_gram(cfg: RunConfig) -> int:
    if cfg.data is None:
        raise ConfigError("gram needs --data")
    if cfg.kernel is None:
        raise ConfigError("gram needs an explicit kernel config (--kernel or config 'kernel')")
    if cfg.out is None:
        raise ConfigError("gram needs --out")
    kcfg = SeriesKernelConfig.from_dict(cfg.kernel)
    X = load_dataset(cfg.data, cfg.format)
    Xstar = load_dataset(cfg.data2, cfg.format) if cfg.data2 else None
    g = cross_gram(kcfg, X, Xstar)
    if not np.all(np.isfinite(g)):
        raise NumericError("Gram matrix has non-finite entries")
    sidecar = {"shape": list(g.shape), "kernel": kcfg.to_dict(), "rows": X.ids,
               "cols": (Xstar or X).ids}
    if Xstar is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            b = bundle(g)
        max_eig = float(b.eigvals[0])
        sidecar.update(
            min_eig=b.raw_min_eig,
            max_eig=max_eig,
            n_clamped=b.n_clamped,
            psd_within_tolerance=bool(b.raw_min_eig >= -1e-8 * max_eig),
        )
    buf = io.StringIO()
    np.savetxt(buf, g, delimiter=",", fmt="%.17g")
    out = Path(cfg.out)
    _atomic_write(out, buf.getvalue())
    _atomic_write(out.with_suffix(out.suffix + ".json"), _dumps(sidecar))
    print(f"wrote {g.shape[0]}x{g.shape[1]} Gram to {out}")
    return EXIT_OK


# -- classify --------------------------------------------------------------


def _classify(name: str, strategy_name: str, train: Dataset, test: Dataset, cfg: RunConfig,
              grid: ParamGrid) -> dict:
    if strategy_name not in CLASSIFICATION_STRATEGIES:
        raise ConfigError(f"unknown classification strategy {strategy_name!r}")
    if strategy_name != "dtw_1nn" and cfg.seed is None:
        raise ConfigError(f"{strategy_name} tuning is randomized; a seed is required")
    options = {"threads": cfg.n_threads} if strategy_name == "dtw_1nn" else {}
    strategy = classification_strategy(strategy_name, **options)
    start = time.perf_counter()
    res = holdout_classification(strategy, train, test, grid, inner_k=cfg.inner_k,
                                 seed=cfg.seed or 0, threads=cfg.n_threads)
    return results_record(name, strategy_name, "accuracy", res.accuracy, res.se,
                          wallclock=time.perf_counter() - start, seed=cfg.seed,
                          histogram={res.choice: 1})


def cmd_classify(cfg: RunConfig) -> int:
    if cfg.data is None or cfg.data2 is None:
        raise ConfigError("classify needs --data (train) and --data2 (test)")
    train = load_dataset(cfg.data, cfg.format)
    test = load_dataset(cfg.data2, cfg.format)
    rec = _classify(dataset_name(cfg), cfg.strategy or "series_svm", train, test, cfg,
                    cfg.param_grid())
    print(f"{rec['dataset']} {rec['strategy']}: {fmt_accuracy(rec['estimate'], rec['se'])}")
    if cfg.out:
        _atomic_write(Path(cfg.out), _dumps(rec))
    return EXIT_OK


# -- regress ---------------------------------------------------------------


def _regress(name: str, ds: Dataset, strategy_names: list[str], cfg: RunConfig,
             grid: ParamGrid, channel: int, failures: bool = False) -> list[dict]:
    """Nested CV for each strategy, then t-tests against the best baseline."""
    if cfg.n_test_timestamps is None:
        raise ConfigError("regression needs n_test_timestamps")
    if cfg.seed is None:
        raise ConfigError("nested cross-validation is randomized; a seed is required")
    label = name if ds.d == 1 else f"{name}[{channel}]"
    results = {}
    for sname in strategy_names:
        strategy = regression_strategy(sname, **({"center": cfg.center} if sname == "series_gpr" else {}))
        start = time.perf_counter()
        try:
            res = nested_cv(strategy, ds, grid, n_test_timestamps=cfg.n_test_timestamps,
                            outer_k=cfg.outer_k, inner_k=cfg.inner_k, seed=cfg.seed,
                            channel=channel, threads=cfg.n_threads)
        except NumericError as exc:
            if not failures:
                raise
            log.warning("%s on %s failed: %s", sname, label, exc)
            results[sname] = None
            continue
        results[sname] = (res, time.perf_counter() - start)
    done = {k: v for k, v in results.items() if v is not None}
    base = [k for k in done if k in FORECAST_BASELINES]
    best = min(base, key=lambda k: done[k][0].eps_cv) if base else None
    records = []
    for sname, entry in results.items():
        if entry is None:
            records.append(results_record(label, sname, "rmse", None, None, seed=cfg.seed))
            continue
        res, wall = entry
        rmse, se = res.rmse
        t = df = None
        stars = ""
        if best is not None and sname != best:
            b = done[best][0]
            try:
                t, df, stars = t_test_vs_best_baseline((res.eps_cv, res.v_cv), (b.eps_cv, b.v_cv), len(ds))
            except NumericError:
                pass
        records.append(results_record(label, sname, "rmse", rmse, se, t, df, stars, wall,
                                      cfg.seed, res.histogram))
    return records


def _channels(cfg: RunConfig, ds: Dataset) -> list[int]:
    chans = list(range(ds.d)) if cfg.channels is None else [int(c) for c in cfg.channels]
    for c in chans:
        if not 0 <= c < ds.d:
            raise ConfigError(f"channel {c} out of range for d={ds.d}")
    return chans


def cmd_regress(cfg: RunConfig) -> int:
    if cfg.data is None:
        raise ConfigError("regress needs --data")
    ds = load_dataset(cfg.data, cfg.format)
    main = cfg.strategy or "series_gpr"
    if main not in REGRESSION_STRATEGIES:
        raise ConfigError(f"unknown regression strategy {main!r}")
    names = [main] + [b for b in FORECAST_BASELINES if b != main]
    grid = cfg.param_grid()
    records = []
    for c in _channels(cfg, ds):
        records += _regress(dataset_name(cfg), ds, names, cfg, grid, c)
    for r in records:
        print(f"{r['dataset']} {r['strategy']}: {fmt_rmse(r['estimate'], r['se'], r['stars'])}")
    if cfg.out:
        _atomic_write(Path(cfg.out), _dumps(records))
    return EXIT_OK


# -- bench -----------------------------------------------------------------


def _bench_dataset(entry: dict, cfg: RunConfig) -> RunConfig:
    allowed = {"name", "data", "data2", "format", "task", "n_test_timestamps", "channels"}
    unknown = set(entry) - allowed
    if unknown:
        raise ConfigError(f"bench dataset: unknown fields {sorted(unknown)}")
    sub = RunConfig(**{**cfg.__dict__, "command": entry.get("task", "regress"),
                       **{k: v for k, v in entry.items() if k != "task"}})
    sub.validate()
    if sub.data is None:
        raise ConfigError("bench dataset needs data")
    return sub


def cmd_bench(cfg: RunConfig) -> int:
    strategies = list(cfg.strategies) or ([cfg.strategy] if cfg.strategy else [])
    if not strategies:
        raise ConfigError("bench needs a nonempty strategy list")
    if not cfg.datasets:
        raise ConfigError("bench needs a nonempty dataset list")
    if cfg.out is None:
        raise ConfigError("bench needs --out")
    grid = cfg.param_grid()
    records, columns = [], []
    for entry in cfg.datasets:
        sub = _bench_dataset(entry, cfg)
        name = dataset_name(sub)
        if sub.command == "classify":
            train = load_dataset(sub.data, sub.format)
            test = load_dataset(sub.data2, sub.format)
            columns.append(name)
            for s in strategies:
                try:
                    records.append(_classify(name, s, train, test, sub, grid))
                except (NumericError, ConfigError) as exc:
                    log.warning("%s on %s failed: %s", s, name, exc)
                    records.append(results_record(name, s, "accuracy", None, None, seed=sub.seed))
        elif sub.command == "regress":
            ds = load_dataset(sub.data, sub.format)
            bad = [s for s in strategies if s not in REGRESSION_STRATEGIES]
            for c in _channels(sub, ds):
                label = name if ds.d == 1 else f"{name}[{c}]"
                columns.append(label)
                ok = [s for s in strategies if s not in bad]
                records += _regress(name, ds, ok, sub, grid, c, failures=True)
                records += [results_record(label, s, "rmse", None, None, seed=sub.seed) for s in bad]
        else:
            raise ConfigError(f"bench task must be classify or regress, got {sub.command!r}")

    cells = {(r["strategy"], r["dataset"]): r for r in records}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["strategy"] + columns)
    for s in strategies:
        row = [s]
        for col in columns:
            r = cells.get((s, col))
            if r is None or r["estimate"] is None:
                row.append(MISSING)
            elif r["metric"] == "accuracy":
                row.append(fmt_accuracy(r["estimate"], r["se"]))
            else:
                row.append(fmt_rmse(r["estimate"], r["se"], r["stars"]))
        writer.writerow(row)
    out = Path(cfg.out)
    _atomic_write(out, buf.getvalue())
    _atomic_write(out.with_suffix(".json"), _dumps(records))
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


COMMANDS = {"gram": cmd_gram, "classify": cmd_classify, "regress": cmd_regress, "bench": cmd_bench}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its fields")
    common.add_argument("--data", help="dataset file (training split for classify)")
    common.add_argument("--data2", help="second dataset file (test split / cross-Gram columns)")
    common.add_argument("--format", choices=("ucr", "jsonl"))
    common.add_argument("--strategy")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--out", help="output path")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="serieskernel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gram", parents=[common], help="write a series-kernel Gram matrix")
    g.add_argument("--kernel", help='series kernel as JSON, e.g. {"k_prime": {...}, "k_dprime": {...}}')
    sub.add_parser("classify", parents=[common], help="tune on a train split, score a test split")
    r = sub.add_parser("regress", parents=[common], help="nested CV forecasting benchmark")
    r.add_argument("--n-test", dest="n_test_timestamps", type=int,
                   help="number of terminal timestamps to forecast")
    sub.add_parser("bench", parents=[common], help="strategies x datasets table")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        cfg = build_config(args)
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
