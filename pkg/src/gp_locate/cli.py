"""Batch command line: ``gp-locate {simulate,train,predict,sweep,report}``.

Exit status: 0 success, 1 configuration or usage error, 2 numerical error,
3 I/O error.
"""

import argparse
import sys
from pathlib import Path

from . import channel, harness, predict
from .config import bundled_config, load_config
from .errors import ConfigurationError, ContractError, DomainError, GPLocateError, NumericalError
from .gp import TrainedModel

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _global_flags():
    # SUPPRESS defaults let the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS,
                   help="JSON scenario file or a bundled name (table1, table1_full, ...)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="override master_seed")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: out)")
    p.add_argument("--methods", default=argparse.SUPPRESS,
                   help="comma separated subset of cgp,nagp")
    return p


def build_parser():
    common = _global_flags()
    parser = _Parser(prog="gp-locate", parents=[common],
                     description="GP positioning from uplink RSS in distributed massive MIMO.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="emit geometry and RSS matrices")
    p.add_argument("--num-rrh", type=int, help="antennas to simulate (default: largest in sweep)")
    p.add_argument("--sigma-z2", type=float, action="append",
                   help="shadowing variance(s) for test RSS (default: all configured)")
    p.add_argument("--trials", type=int, default=1, help="test RSS realizations per variance")

    p = sub.add_parser("train", parents=[common], help="train and save x/y models")
    p.add_argument("--num-rrh", type=int, action="append",
                   help="antenna count(s) to train (default: the configured sweep)")

    p = sub.add_parser("predict", parents=[common], help="predict locations from test RSS")
    p.add_argument("--model-x", help="x-axis model file")
    p.add_argument("--model-y", help="y-axis model file")
    p.add_argument("--test-rss", required=True, help="CSV written by `simulate`")
    p.add_argument("--sigma-z2", type=float, help="shadowing variance of the test RSS (NaGP)")
    p.add_argument("--num-samples", type=int, help="NaGP Monte-Carlo samples (default: config)")
    p.add_argument("--truth", help="optional CSV of true locations")

    p = sub.add_parser("sweep", parents=[common], help="run the full Monte-Carlo experiment")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("report", parents=[common], help="re-aggregate and replot detail.csv")
    p.add_argument("--detail", help="detail.csv to read (default: <out>/detail.csv)")
    p.add_argument("--no-plots", action="store_true")
    return parser


def resolve_config(args):
    """Config from ``--config`` (path first, then bundled name), with overrides."""
    name = getattr(args, "config", None)
    if name is None:
        config = bundled_config()
    elif Path(name).is_file():
        config = load_config(name)
    else:
        stem = Path(name).stem if name.endswith(".json") else name
        try:
            config = bundled_config(stem)
        except FileNotFoundError:
            raise ConfigurationError(f"config {name!r} is neither a file nor a bundled config") from None
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "methods", None):
        changes["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    return config.replace(**changes) if changes else config


def _out_dir(args):
    out = Path(getattr(args, "out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model_paths(out, m):
    return out / f"model_x_M{m}.json", out / f"model_y_M{m}.json"


def cmd_simulate(args, config):
    out = _out_dir(args)
    m = args.num_rrh or config.max_rrh
    scenario = harness.build_scenario(config.replace(rrh_sweep=(max(m, config.max_rrh),)))
    rrh, train_rss = scenario.antennas(m)
    channel.write_locations_csv(out / "rrh.csv", rrh)
    channel.write_locations_csv(out / "train_locations.csv", scenario.train_locations)
    channel.write_locations_csv(out / "test_locations.csv", scenario.test_locations)
    channel.write_matrix_csv(out / f"train_rss_M{m}.csv", train_rss)
    variances = args.sigma_z2 or config.shadowing_variances
    for s2 in variances:
        if s2 not in config.shadowing_variances:
            config = config.replace(shadowing_variances=config.shadowing_variances + (s2,))
        idx = config.shadowing_variances.index(s2)
        for t in range(args.trials):
            rss = harness.test_rss(config, scenario, m, idx, t)
            channel.write_matrix_csv(out / f"test_rss_M{m}_s{s2:g}_t{t}.csv", rss)
    print(f"wrote scenario files for M={m} to {out}")


def cmd_train(args, config):
    out = _out_dir(args)
    sweep = tuple(args.num_rrh or config.rrh_sweep)
    config = config.replace(rrh_sweep=sweep)
    scenario = harness.build_scenario(config)
    threads = harness.thread_count()
    for m in sweep:
        _, train_rss = scenario.antennas(m)
        model_x, model_y = harness.train_models(config, train_rss, scenario.train_locations, m,
                                                threads)
        px, py = _model_paths(out, m)
        model_x.save(px)
        model_y.save(py)
        print(f"M={m}: lml x={model_x.final_lml:.3f} y={model_y.final_lml:.3f} -> {px.name}, "
              f"{py.name}")


def cmd_predict(args, config):
    out = Path(getattr(args, "out", "out"))
    rss = channel.read_matrix_csv(args.test_rss)
    m = rss.shape[1]
    px, py = _model_paths(out, m)
    px = Path(args.model_x) if args.model_x else px
    py = Path(args.model_y) if args.model_y else py
    missing = [str(p) for p in (px, py) if not p.is_file()]
    if missing:
        raise ConfigurationError(
            f"no trained models at {', '.join(missing)}; run `gp-locate train --num-rrh {m} "
            f"--out {out}` first or pass --model-x/--model-y")
    model_x, model_y = TrainedModel.load(px), TrainedModel.load(py)
    truth = channel.read_matrix_csv(args.truth) if args.truth else None
    out.mkdir(parents=True, exist_ok=True)
    for method in config.methods:
        if method == "cgp":
            pred = predict.cgp_predict(model_x, model_y, rss)
        else:
            if args.sigma_z2 is None:
                raise ConfigurationError("NaGP needs --sigma-z2 (the test RSS shadowing variance)")
            noise = predict.TestNoiseModel.isotropic(args.sigma_z2, *rss.shape)
            pred = predict.nagp_predict(model_x, model_y, rss, noise,
                                        args.num_samples or config.mc_samples, config.master_seed)
        path = out / f"predictions_{method}.csv"
        predict.write_predictions_csv(path, pred, truth)
        print(f"wrote {path}")


def cmd_sweep(args, config):
    out = _out_dir(args)
    result = harness.run_experiment(config)
    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    for m, (model_x, model_y) in sorted(result.models.items()):
        px, py = _model_paths(models_dir, m)
        model_x.save(px)
        model_y.save(py)
    paths = harness.emit_report(result, out, plots=not args.no_plots)
    print(f"{len(result.rows)} detail rows; wrote {', '.join(p.name for p in paths)} to {out}")


def cmd_report(args, config):
    out = _out_dir(args)
    detail = Path(args.detail) if args.detail else out / "detail.csv"
    bars = detail.with_name("bars.csv")
    rows = harness.read_detail_csv(detail, bars if bars.is_file() else None)
    paths = harness.emit_report(rows, out, plots=not args.no_plots)
    print(f"re-aggregated {len(rows)} rows; wrote {', '.join(p.name for p in paths)}")


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "predict": cmd_predict,
            "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        config = resolve_config(args)
        COMMANDS[args.command](args, config)
    except (ConfigurationError, ContractError, DomainError) as exc:
        print(f"gp-locate: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"gp-locate: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"gp-locate: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GPLocateError as exc:
        print(f"gp-locate: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
