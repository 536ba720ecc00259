"""Command-line entry point: ``safenews {train,evaluate,gradcheck,sweep,ablation,synth}``.

Exit codes: 0 success, 1 runtime failure (including a failed gradient
check), 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace

from . import VARIANTS
from .data import generate_synthetic, kfold_split, load_corpus, save_corpus, temporal_split
from .errors import ConfigError, DataError, EmptyInput
from .evaluation import (
    evaluate, fit, reports_to_csv, reports_to_json, run_ablation, sweep_alpha_beta,
)
from .gradcheck import run_gradcheck
from .modelfile import load_model, save_model
from .training import TrainConfig

log = logging.getLogger("safenews")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3

DEFAULTS = {
    "alpha": 0.4, "beta": 0.6, "lr": 1e-4, "epochs": 100, "windows": "3,4",
    "embed_dim": 32, "latent_dim": 32, "seed": 0, "variant": "SAFE", "train_fraction": 0.8,
    "kfold": None, "step": 0.2, "mode": "paired", "filters": 1, "no_shuffle": False,
    "early_stop": None, "n_examples": 20, "tolerance": 1e-4, "fd_step": 1e-5,
    "size": 200, "vocab_size": 240, "mismatch": 1.0, "text_signal": 0.0, "whole": False,
    "corpus": None, "embeddings": None, "model": None, "out": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="safenews", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys match the long flag names")
    common.add_argument("--corpus")
    common.add_argument("--embeddings")
    common.add_argument("--model")
    common.add_argument("--out")
    common.add_argument("--variant", choices=VARIANTS)
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--lr", type=float)
    common.add_argument("--epochs", type=int)
    common.add_argument("--windows", help="comma-separated window sizes, e.g. 3,4")
    common.add_argument("--embed-dim", type=int)
    common.add_argument("--latent-dim", type=int)
    common.add_argument("--filters", type=int, help="filters per window size")
    common.add_argument("--seed", type=int)
    common.add_argument("--train-fraction", type=float)
    common.add_argument("--kfold", type=int, help="cross-validate on the training split instead")
    common.add_argument("--no-shuffle", action="store_true", default=None)
    common.add_argument("--early-stop", type=float)
    for name, help_ in (("train", "train one variant and write a model file"),
                        ("evaluate", "score a model on held-out articles"),
                        ("gradcheck", "finite-difference check of the analytic gradients"),
                        ("sweep", "retrain over an alpha/beta grid"),
                        ("ablation", "train and score every variant"),
                        ("synth", "write a synthetic corpus")):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if name == "evaluate":
            sp.add_argument("--whole", action="store_true", default=None,
                            help="score every article in --corpus, not only the newest split")
        if name == "gradcheck":
            sp.add_argument("--n-examples", type=int)
            sp.add_argument("--tolerance", type=float)
            sp.add_argument("--fd-step", type=float)
        if name == "sweep":
            sp.add_argument("--step", type=float)
            sp.add_argument("--mode", choices=("paired", "full"))
        if name == "synth":
            sp.add_argument("--size", type=int)
            sp.add_argument("--vocab-size", type=int)
            sp.add_argument("--mismatch", type=float)
            sp.add_argument("--text-signal", type=float)
    return p


def resolve(args):
    """Flags override the config file, which overrides built-in defaults."""
    opts = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_opts = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_opts, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in file_opts.items():
            key = key.replace("-", "_")
            if key not in opts:
                raise ConfigError(f"unknown config key {key!r}")
            opts[key] = value
    for key, value in vars(args).items():
        if key in opts and value is not None:
            opts[key] = value
    return opts


def train_config(opts):
    windows = opts["windows"]
    try:
        if isinstance(windows, str):
            windows = [int(x) for x in windows.split(",") if x.strip()]
        return TrainConfig(
            alpha=float(opts["alpha"]), beta=float(opts["beta"]), lr=float(opts["lr"]),
            windows=tuple(windows), embed_dim=int(opts["embed_dim"]), latent_dim=int(opts["latent_dim"]),
            epochs=int(opts["epochs"]), seed=int(opts["seed"]), variant=opts["variant"],
            shuffle=not opts["no_shuffle"], n_filters=int(opts["filters"]),
            early_stop=None if opts["early_stop"] is None else float(opts["early_stop"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _require(opts, *keys):
    for k in keys:
        if not opts.get(k):
            raise ConfigError(f"--{k.replace('_', '-')} is required for this command")


def _read_corpus(opts):
    path = opts["corpus"]
    if not os.path.exists(path):
        raise DataError(f"corpus not found: {path}")
    return load_corpus(path)


def _splits(opts, cfg, corpus):
    fraction = float(opts["train_fraction"])
    if not 0 < fraction < 1:
        raise ConfigError("--train-fraction must lie strictly between 0 and 1")
    train_c, test_c = temporal_split(corpus, fraction)
    if opts["kfold"]:
        k = int(opts["kfold"])
        if k < 2:
            raise ConfigError("--kfold must be >= 2")
        return kfold_split(train_c, k, cfg.seed)
    return [(train_c, test_c)]


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_reports(prefix, reports):
    _write(prefix + ".csv", reports_to_csv(reports))
    _write(prefix + ".json", reports_to_json(reports))


def _print_metrics(r):
    print(f"{r.variant:>5}  accuracy={r.accuracy:.4f}  precision={r.precision:.4f}  "
          f"recall={r.recall:.4f}  f1={r.f1:.4f}")


def cmd_train(opts):
    _require(opts, "corpus", "model")
    cfg = train_config(opts)
    if opts["kfold"]:
        raise ConfigError("--kfold applies to sweep/ablation; train uses the temporal split")
    train_c, _ = _splits(opts, cfg, _read_corpus(opts))[0]
    if opts["embeddings"] and not os.path.exists(opts["embeddings"]):
        raise DataError(f"embeddings not found: {opts['embeddings']}")
    state, trace = fit(train_c, cfg, opts["embeddings"],
                       on_epoch=lambda e, loss: log.info("epoch %d mean loss %.6f", e, loss))
    save_model(state, opts["model"])
    trace_path = opts["out"] or opts["model"] + ".trace.csv"
    _write(trace_path, "epoch,mean_loss\n" + "".join(f"{i + 1},{x!r}\n" for i, x in enumerate(trace)))
    print(f"trained {cfg.variant} on {len(train_c)} articles for {len(trace)} epochs; "
          f"final mean loss {trace[-1] if trace else float('nan'):.6f}")
    return EXIT_OK


def cmd_evaluate(opts):
    _require(opts, "corpus", "model")
    if not os.path.exists(opts["model"]):
        raise DataError(f"model not found: {opts['model']}")
    state = load_model(opts["model"])
    corpus = _read_corpus(opts)
    if opts["whole"]:
        test_c = corpus
    else:
        _, test_c = _splits(opts, state.config, corpus)[0]
    if len(test_c) == 0:
        raise EmptyInput("test set is empty")
    report = evaluate(state, test_c)
    if opts["out"]:
        _write_reports(opts["out"], [report])
    _print_metrics(report)
    return EXIT_OK


def cmd_gradcheck(opts):
    n = int(opts["n_examples"])
    if n < 1:
        raise ConfigError("--n-examples must be >= 1")
    tol = float(opts["tolerance"])
    if tol < 0:
        raise ConfigError("--tolerance must be >= 0")
    cfg = train_config(opts)
    t0 = time.time()
    report = run_gradcheck(n, cfg, step=float(opts["fd_step"]), tolerance=tol)
    for name, g in sorted(report.groups.items()):
        print(f"{name:<28} max_rel_err={g.max_error:.3e}  checked={g.checked}  "
              f"skipped={g.skipped}  failed={g.failed}")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: max relative error {report.max_error:.3e} (tolerance {tol:g}), "
          f"{report.checked} checked, {report.skipped} skipped near kinks, {time.time() - t0:.1f}s")
    if opts["out"]:
        _write(opts["out"], json.dumps({
            "tolerance": tol, "passed": report.passed, "max_error": report.max_error,
            "groups": {k: vars(g) for k, g in sorted(report.groups.items())}}, indent=2) + "\n")
    return EXIT_OK if report.passed else EXIT_RUNTIME


def cmd_sweep(opts):
    _require(opts, "corpus", "out")
    cfg = train_config(opts)
    step = float(opts["step"])
    if not 0 < step <= 1:
        raise ConfigError("--step must lie in (0, 1]")
    splits = _splits(opts, cfg, _read_corpus(opts))
    cells = sweep_alpha_beta(splits, cfg, step, opts["mode"], opts["embeddings"])
    reports = [r for _, _, r in cells]
    _write_reports(opts["out"], reports)
    for a, b, r in cells:
        print(f"alpha={a:.2f} beta={b:.2f}  accuracy={r.accuracy:.4f}  f1={r.f1:.4f}")
    return EXIT_OK


def cmd_ablation(opts):
    _require(opts, "corpus", "out")
    cfg = train_config(opts)
    splits = _splits(opts, cfg, _read_corpus(opts))
    reports = run_ablation(splits, cfg, embeddings_path=opts["embeddings"])
    _write_reports(opts["out"], reports)
    for r in reports:
        _print_metrics(r)
    return EXIT_OK


def cmd_synth(opts):
    _require(opts, "out")
    try:
        corpus, _ = generate_synthetic(size=int(opts["size"]), vocab_size=int(opts["vocab_size"]),
                                       mismatch=float(opts["mismatch"]), seed=int(opts["seed"]),
                                       text_signal=float(opts["text_signal"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    save_corpus(corpus, opts["out"])
    print(f"wrote {len(corpus)} articles to {opts['out']}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "gradcheck": cmd_gradcheck,
            "sweep": cmd_sweep, "ablation": cmd_ablation, "synth": cmd_synth}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"safenews: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except ConfigError as exc:
        print(f"safenews: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, EmptyInput, OSError) as exc:
        print(f"safenews: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        log.debug("runtime failure", exc_info=True)
        print(f"safenews: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
