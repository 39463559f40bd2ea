"""``fogcrn`` command line.

Subcommands::

    run        simulate a scenario file, write the metrics CSV
    sweep      one run per value of a scenario parameter
    report     simulate and print metrics plus the cloud state as text
    sense      decide H0/H1 for one frame file
    calibrate  Monte Carlo threshold for a target false-alarm rate
    train      fit a regression or SVM occupancy classifier
    embed      LLE demo on a synthetic manifold, written as CSV

Exit codes: 0 success, 1 invalid input or usage, 2 runtime or solver failure.
Diagnostics go to stderr; results go to files or stdout.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .dataset import labeled_features, read_feature_csv, write_feature_csv
from .errors import (ConvergenceError, FogCRNError, InvalidArgumentError, RankDeficientError,
                     SummaryOverflowError)
from .frameio import read_frame
from .learning import (Engine, Kernel, KernelKind, classify, gen_manifold, lle_embed,
                       procrustes_residual, save_model, train_regression_classifier,
                       train_svm_classifier, trustworthiness)
from .sensing import (Detector, FeatureConfig, FeatureVector, calibrate_cyclic_threshold,
                      calibrate_energy_threshold, calibrate_waveform_threshold, decide,
                      default_alpha_grid, detect_cyclostationary, energy_metric, waveform_metric)
from .sim import SCENARIO_KEYS, Simulation, load_scenario, sweep, sweep_csv

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

# planar data is exactly reconstructible, so it wants almost no regularization
EMBED_DEFAULT_REG = {"linear_subspace": 1e-9, "s_curve": 1e-3, "swiss_roll": 1e-3}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _emit(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _overrides(args) -> dict:
    pairs = {}
    for item in args.set or []:
        if "=" not in item:
            raise InvalidArgumentError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in SCENARIO_KEYS:
            raise InvalidArgumentError(f"--set: unknown scenario key {key!r}")
        pairs[key] = value
    if args.seed is not None:
        pairs["master_seed"] = str(args.seed)
    return pairs


def _scenario(args):
    return load_scenario(args.config, _overrides(args))


def _csv_list(text: str, kind=str) -> list:
    return [kind(v.strip()) for v in text.split(",") if v.strip()]


# ------------------------------------------------------------ commands --

def cmd_run(args) -> int:
    sim = Simulation(_scenario(args))
    report = sim.run()
    _emit(report.to_csv(), args.out)
    if args.text:
        Path(args.text).write_text(report.to_text())
    if args.cloud_dump:
        Path(args.cloud_dump).write_text(sim.cloud.dump())
    return EXIT_OK


def cmd_sweep(args) -> int:
    reports = sweep(_scenario(args), args.param, _csv_list(args.values))
    _emit(sweep_csv(reports), args.out)
    for r in reports:
        a = r.aggregate
        print(f"{r.tag[0]}={r.tag[1]} pd={a.pd!r} pfa={a.pfa!r} "
              f"compression_ratio={a.compression_ratio!r}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    sim = Simulation(_scenario(args))
    report = sim.run()
    _emit(report.to_text() + "\n" + sim.cloud.dump(), args.out)
    return EXIT_OK


def _taus(text):
    return tuple(_csv_list(text, int))


def cmd_sense(args) -> int:
    frame = read_frame(args.input)
    det = Detector(args.detector)
    lines = []
    if det is Detector.ENERGY:
        metric = energy_metric(frame).value
        hyp = decide(metric, args.rho)
    elif det is Detector.WAVEFORM:
        if not args.pattern:
            raise InvalidArgumentError("--pattern is required for the waveform detector")
        metric = waveform_metric(frame, read_frame(args.pattern))
        hyp = decide(metric, args.rho)
    else:
        res = detect_cyclostationary(frame, default_alpha_grid(args.alpha_res), _taus(args.taus),
                                     args.rho)
        metric, hyp = res.peak_val, res.hypothesis
        lines.append(f"peak_alpha={res.peak_alpha!r}")
    print(f"metric={metric!r}")
    for line in lines:
        print(line)
    print(f"decision={hyp.name}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    det = Detector(args.detector)
    if det is Detector.ENERGY:
        rho = calibrate_energy_threshold(args.pfa, args.noise_var, args.n, args.trials, args.seed)
    elif det is Detector.WAVEFORM:
        if not args.pattern:
            raise InvalidArgumentError("--pattern is required for the waveform detector")
        rho = calibrate_waveform_threshold(args.pfa, args.noise_var, read_frame(args.pattern),
                                           args.trials, args.seed)
    else:
        rho = calibrate_cyclic_threshold(args.pfa, args.noise_var, args.n, args.trials, args.seed,
                                         default_alpha_grid(args.alpha_res), _taus(args.taus))
    print(f"rho={rho!r}")
    return EXIT_OK


def cmd_train(args) -> int:
    if args.data:
        X, y = read_feature_csv(args.data)
    elif args.synthesize:
        X, y = labeled_features(args.synthesize, args.snr_db, args.frame_len, args.seed)
        if args.save_data:
            write_feature_csv(args.save_data, X, y)
    else:
        raise InvalidArgumentError("give --data or --synthesize")
    engine = Engine(args.engine)
    if engine is Engine.REGRESSION:
        mask = None if not args.mask else np.array(_csv_list(args.mask, int), dtype=bool)
        model = train_regression_classifier(X, y, mask, args.lambda_)
    elif engine is Engine.SVM:
        kernel = Kernel(KernelKind(args.kernel), gamma=args.gamma)
        model = train_svm_classifier(X, y, args.C, kernel, args.tol)
    else:
        raise InvalidArgumentError("train supports the regression and svm engines")
    save_model(args.out, model)
    print(f"model={args.out}")
    print(f"train_accuracy={_accuracy(engine, model, X, y)!r}")
    if args.eval:
        Xe, ye = read_feature_csv(args.eval)
        print(f"eval_accuracy={_accuracy(engine, model, Xe, ye)!r}")
    return EXIT_OK


def _accuracy(engine, model, X, y) -> float:
    pred = [int(classify(engine, model, FeatureVector(x))) for x in X]
    return float(np.mean(np.asarray(pred) == np.asarray(y)))


def cmd_embed(args) -> int:
    return embed_demo(args.kind, args.n, args.k, args.r, args.seed, args.out, args.reg)


def embed_demo(kind, n, k, r, seed, out, reg=None) -> int:
    """Write ambient points, intrinsic coordinates and the LLE embedding as CSV
    (``<out>_ambient.csv`` etc.) and print quality metrics."""
    reg = EMBED_DEFAULT_REG[kind] if reg is None else reg
    points, intrinsic = gen_manifold(kind, n, seed)
    emb = lle_embed(points, k, r, reg)
    prefix = str(out)
    np.savetxt(prefix + "_ambient.csv", points, delimiter=",", fmt="%.17g",
               header="x,y,z", comments="")
    np.savetxt(prefix + "_intrinsic.csv", intrinsic, delimiter=",", fmt="%.17g",
               header="s,h", comments="")
    np.savetxt(prefix + "_embedding.csv", emb.points, delimiter=",", fmt="%.17g",
               header=",".join(f"e{i}" for i in range(r)), comments="")
    print(f"trustworthiness={trustworthiness(intrinsic, emb.points, k)!r}")
    print(f"procrustes_residual={procrustes_residual(emb.points, intrinsic)!r}")
    return EXIT_OK


# --------------------------------------------------------------- parser --

def _scenario_args(p):
    p.add_argument("--config", required=True, help="scenario key=value file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a scenario key")
    p.add_argument("--seed", type=int, help="override master_seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fogcrn", description="Fog-computing cognitive radio simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate one scenario")
    _scenario_args(p)
    p.add_argument("--out", help="metrics CSV path (default stdout)")
    p.add_argument("--text", help="also write the structured-text metrics report here")
    p.add_argument("--cloud-dump", help="also write the final cloud state here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="one run per parameter value")
    _scenario_args(p)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="simulate and print a text report with the cloud state")
    _scenario_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    det_choices = [d.value for d in Detector]
    p = sub.add_parser("sense", help="decide one frame file")
    p.add_argument("--in", dest="input", required=True, help="frame file")
    p.add_argument("--detector", choices=det_choices, default="energy")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--pattern", help="known PU waveform (frame file) for waveform sensing")
    p.add_argument("--alpha-res", type=int, default=64)
    p.add_argument("--taus", default="0,1,2,3")
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("calibrate", help="Monte Carlo threshold for a false-alarm target")
    p.add_argument("--detector", choices=det_choices, default="energy")
    p.add_argument("--pfa", type=float, default=0.1)
    p.add_argument("--n", type=int, default=128, help="frame length")
    p.add_argument("--noise-var", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pattern", help="known PU waveform (frame file) for waveform sensing")
    p.add_argument("--alpha-res", type=int, default=64)
    p.add_argument("--taus", default="0,1,2,3")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("train", help="fit an occupancy classifier")
    p.add_argument("--engine", choices=["regression", "svm"], default="svm")
    p.add_argument("--data", help="feature CSV with an 'occupied' column")
    p.add_argument("--synthesize", type=int, metavar="N", help="generate N labeled frames instead")
    p.add_argument("--save-data", help="write the synthesized features here")
    p.add_argument("--snr-db", type=float, default=-5.0)
    p.add_argument("--frame-len", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.0)
    p.add_argument("--mask", help="comma list of 0/1 per feature column (regression)")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--kernel", choices=[k.value for k in KernelKind], default="linear")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--eval", help="held-out feature CSV to score")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="LLE manifold demo")
    p.add_argument("--kind", choices=list(EMBED_DEFAULT_REG), default="swiss_roll")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--reg", type=float,
                   help="LLE regularization (default 1e-9 for linear_subspace, else 1e-3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix for the CSV files")
    p.set_defaults(func=cmd_embed)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (ConvergenceError, RankDeficientError, SummaryOverflowError) as exc:
        print(f"fogcrn: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (FogCRNError, ValueError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"fogcrn: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"fogcrn: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
