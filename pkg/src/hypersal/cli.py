"""Command-line interface.

Subcommands: synth, train, eval, baseline, ablate, gradcheck, bench.
Configuration comes from an optional JSON file (--config) with "model" and
"train" sections plus dotted --set overrides, e.g. --set train.epochs=20.
"""

import argparse
import os
import sys

from .config import (MetricConfig, ModelConfig, TrainConfig, apply_overrides,
                     config_hash, load_config)


def _build_configs(args):
    if getattr(args, "config", None):
        model_cfg, train_cfg = load_config(args.config)
    else:
        model_cfg, train_cfg = ModelConfig(), TrainConfig()
    overrides = getattr(args, "set", None) or []
    return apply_overrides(model_cfg, train_cfg, overrides)


def _add_config_args(sub):
    sub.add_argument("--config", help="JSON config file with model/train sections")
    sub.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                     help="override a config value (repeatable)")


def cmd_synth(args):
    from .synth import generate_dataset
    manifest = generate_dataset(args.out, args.count, base_seed=args.seed,
                                side=args.side, bands=args.bands,
                                noise_std=args.noise_std)
    print(f"wrote {manifest['count']} scenes to {args.out}")
    return 0


def cmd_train(args):
    from .dataset import load_dataset
    from .network import SaliencyModel, save_checkpoint
    from .train import train
    model_cfg, train_cfg = _build_configs(args)
    samples = load_dataset(args.data, side=train_cfg.side, limit=args.limit)
    model = SaliencyModel(model_cfg)
    result = train(model, samples, train_cfg, log=print)
    save_checkpoint(args.out, model, extra={
        "train_config_hash": config_hash(model_cfg, train_cfg),
        "final_loss": result["loss_curve"][-1],
    })
    if args.curve:
        with open(args.curve, "w") as fh:
            fh.write("epoch,loss\n")
            for i, v in enumerate(result["loss_curve"], start=1):
                fh.write(f"{i},{v!r}\n")
    print(f"trained {result['steps']} steps in {result['seconds']:.1f}s; "
          f"final epoch loss {result['loss_curve'][-1]:.6f}")
    print(f"checkpoint: {args.out}")
    return 0


def cmd_eval(args):
    from .dataset import load_dataset
    from .evaluate import (baseline_predictor, evaluate, model_predictor,
                           quantitative_table, report_to_csv, save_maps,
                           summary_table)
    model_cfg, train_cfg = _build_configs(args)
    samples = load_dataset(args.data, side=train_cfg.side, limit=args.limit)
    if args.checkpoint:
        from .network import load_checkpoint
        model, _ = load_checkpoint(args.checkpoint)
        predictor = model_predictor(model)
        name = args.name or "model"
        flops, params = model.flops(train_cfg.side), model.param_count()
    elif args.baseline:
        predictor = baseline_predictor(args.baseline)
        name = args.name or args.baseline
        flops = params = None
    else:
        print("eval needs --checkpoint or --baseline", file=sys.stderr)
        return 2
    report = evaluate(predictor, samples, name, cfg=MetricConfig(),
                      flops=flops, params=params)
    if args.save_maps:
        for i, (cube, _) in enumerate(samples):
            save_maps(args.save_maps, f"{name}_{i:04d}", predictor(cube))
    if args.report:
        report_to_csv(args.report, [report])
        print(f"report: {args.report}")
    print(summary_table([report]))
    if args.quantitative:
        print()
        print(quantitative_table([report]))
    return 0


def cmd_baseline(args):
    from .cube import load_cube, scale_radiometric
    from .evaluate import save_maps
    from .baselines import classical_saliency
    for header in args.cubes:
        data_path = os.path.splitext(header)[0] + ".dat"
        cube, _ = load_cube(header, data_path)
        if not cube.scaled:
            cube = scale_radiometric(cube)
        sal, degenerate = classical_saliency(cube, args.mode)
        stem = os.path.splitext(os.path.basename(header))[0] + f"_{args.mode}"
        save_maps(args.out, stem, sal)
        note = " (degenerate: constant contrast)" if degenerate else ""
        print(f"{header} -> {os.path.join(args.out, stem)}.pgm/.f32{note}")
    return 0


def cmd_ablate(args):
    from .ablate import run_axis
    from .dataset import load_dataset, split_train_test
    from .evaluate import report_to_csv, summary_table
    model_cfg, train_cfg = _build_configs(args)
    samples = load_dataset(args.data, side=train_cfg.side, limit=args.limit)
    train_samples, test_samples = split_train_test(samples, args.train_count)
    reports = run_axis(args.axis, train_samples, test_samples,
                       model_cfg, train_cfg, log=print)
    if args.report:
        report_to_csv(args.report, reports)
        print(f"report: {args.report}")
    print(summary_table(reports))
    return 0


def cmd_gradcheck(args):
    from .checks import run_gradient_suite
    failures = run_gradient_suite(cases=args.cases, log=print)
    return 1 if failures else 0


def cmd_bench(args):
    from .bench import (format_kernel_rows, format_model_rows, kernel_bench,
                        model_bench)
    model_cfg, _ = _build_configs(args)
    print("kernel backends:")
    print(format_kernel_rows(kernel_bench(side=args.kernel_side)))
    print()
    print(f"model inference (channel plan {model_cfg.channel_plan}, "
          f"{model_cfg.bands} bands):")
    print(format_model_rows(model_bench(model_cfg, sides=tuple(args.sides))))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hypersal",
        description="Hyperspectral salient object detection: learned spectral "
                    "saliency model, classical baselines, training and evaluation.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate synthetic labelled scenes")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--bands", type=int, default=8)
    p.add_argument("--noise-std", type=float, default=0.02)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train", help="train the saliency model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--curve", help="write per-epoch loss CSV here")
    p.add_argument("--limit", type=int)
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="evaluate a checkpoint or baseline")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--baseline", choices=("sed", "sg"))
    p.add_argument("--name")
    p.add_argument("--report", help="CSV output path")
    p.add_argument("--save-maps", help="directory for PGM + raw float maps")
    p.add_argument("--quantitative", action="store_true",
                   help="also print the benchmark-style table")
    p.add_argument("--limit", type=int)
    _add_config_args(p)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("baseline", help="run a classical baseline on cube files")
    p.add_argument("--mode", required=True, choices=("sed", "sg"))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("cubes", nargs="+", help="cube header files (*.hdr)")
    p.set_defaults(func=cmd_baseline)

    p = subs.add_parser("ablate", help="run an ablation axis")
    p.add_argument("--axis", required=True,
                   choices=("modality", "csab", "hrfm", "loss"))
    p.add_argument("--data", required=True)
    p.add_argument("--train-count", type=int, required=True)
    p.add_argument("--report", help="CSV output path")
    p.add_argument("--limit", type=int)
    _add_config_args(p)
    p.set_defaults(func=cmd_ablate)

    p = subs.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--cases", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)

    p = subs.add_parser("bench", help="kernel backend and model benchmarks")
    p.add_argument("--sides", type=int, nargs="+", default=[256, 512])
    p.add_argument("--kernel-side", type=int, default=128)
    _add_config_args(p)
    p.set_defaults(func=cmd_bench)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
