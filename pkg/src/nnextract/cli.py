"""Command-line driver: synth, train, extract, eval, rules-check.

Exit codes: 0 success, 1 usage error, 2 processing error. Diagnostics go
to standard error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import evaluate, figures, pipeline, rules, scene
from .raster import (
    PgmError,
    Raster,
    load_mask,
    load_raster,
    save_mask,
    save_raster,
)


class _UsageExit(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nnextract", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="render a synthetic scene with truth masks")
    p.add_argument("--spec", required=True, help="scene spec file")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a feature-class bundle from patch dirs")
    p.add_argument("--class", dest="class_name", required=True)
    p.add_argument("--positives", required=True, help="directory of positive PGM patches")
    p.add_argument("--negatives", required=True, help="directory of negative PGM patches")
    p.add_argument("--window", type=int, required=True, help="odd window size in px")
    p.add_argument("--out", required=True, help="output bundle path (.genn)")
    p.add_argument("--lr", type=float, default=0.3)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--som", default=None, metavar="ROWSxCOLS")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("extract", help="extract a feature mask from a raster")
    p.add_argument("--bundle", required=True)
    p.add_argument("--input", required=True, help="input PGM")
    p.add_argument("--rules", default=None, help="rule file overriding the bundle rules")
    p.add_argument("--out-mask", required=True, help="output PGM mask")
    p.add_argument("--bridge-gap", type=int, default=None, metavar="N",
                   help="bridge breaks up to N px (0 disables bridging)")
    p.add_argument("--threshold", type=float, default=None, metavar="T",
                   help="acceptance threshold override")
    p.add_argument("--overlay", default=None, metavar="PGM",
                   help="write the input with extracted pixels marked at 255")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("eval", help="compare a predicted mask against truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--pixel-size", type=float, default=None, metavar="M",
                   help="pixel side in meters; adds an areal-extent section")
    p.add_argument("--report", required=True,
                   help="report file; a .csv and .png sibling are written next to it")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("rules-check", help="parse and vocabulary-check a rule file")
    p.add_argument("--rules", required=True)
    p.set_defaults(func=_cmd_rules_check)
    return parser


def _cmd_synth(args) -> int:
    spec = scene.parse_scene_spec(Path(args.spec).read_text("utf-8"))
    raster, truths = scene.generate_scene(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_raster(raster, out / "scene.pgm")
    for kind, mask in sorted(truths.items()):
        save_mask(mask, out / f"truth_{kind}.pgm")
    print(f"wrote {out / 'scene.pgm'} and {len(truths)} truth mask(s)")
    return 0


def _load_patch_dir(path: str) -> list[Raster]:
    files = sorted(Path(path).glob("*.pgm"))
    if not files:
        raise pipeline.PipelineError(f"no .pgm patches in {path}")
    return [load_raster(f) for f in files]


def _cmd_train(args) -> int:
    if args.window < 3 or args.window % 2 == 0:
        raise pipeline.PipelineError(f"window must be odd and >= 3, got {args.window}")
    som_shape = None
    if args.som:
        try:
            rows, cols = (int(t) for t in args.som.lower().split("x"))
            som_shape = (rows, cols)
        except ValueError:
            raise pipeline.PipelineError(f"bad --som value {args.som!r}, expected ROWSxCOLS")
    params = pipeline.PipelineParams(
        window_size=args.window,
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        som_shape=som_shape,
    )
    bundle = pipeline.train_pipeline(
        _load_patch_dir(args.positives),
        _load_patch_dir(args.negatives),
        args.class_name,
        params,
    )
    pipeline.save_bundle(bundle, args.out)
    print(f"trained {args.class_name!r} bundle -> {args.out}")
    return 0


def _cmd_extract(args) -> int:
    bundle = pipeline.load_bundle(args.bundle)
    ruleset_text = None
    if args.rules is not None:
        ruleset_text = Path(args.rules).read_text("utf-8")
        rules.parse_rules(ruleset_text)
    bridge = None
    disable = False
    if args.bridge_gap is not None:
        if args.bridge_gap <= 0:
            disable = True
        else:
            bridge = pipeline.BridgeParams(max_gap=args.bridge_gap)
    bundle = pipeline.with_overrides(
        bundle,
        accept_threshold=args.threshold,
        bridge=bridge,
        disable_bridge=disable,
        ruleset_text=ruleset_text,
    )
    raster = load_raster(args.input)
    result = pipeline.extract(raster, bundle)
    save_mask(result.mask, args.out_mask)
    if args.overlay:
        marked = raster.values.copy()
        marked[result.mask.bits] = 255
        save_raster(Raster(marked), args.overlay)
    kept = len(result.objects)
    print(
        f"extracted {result.mask.foreground_count} px in {kept} object(s); "
        f"{result.rejected_count} centers rejected"
    )
    for obj in result.objects:
        print(
            f"  object {obj.record.id}: label={obj.label} rule={obj.rule_name} "
            f"area={obj.record.area} width={obj.record.width:.1f} som_cell={obj.som_cell}"
        )
    return 0


def _cmd_eval(args) -> int:
    pred = load_mask(args.pred)
    truth = load_mask(args.truth)
    cm = evaluate.confusion_matrix(pred, truth)
    report = evaluate.accuracy_report(cm)
    areal = []
    if args.pixel_size is not None:
        areal.append(
            evaluate.ArealComparison(
                "mask",
                evaluate.areal_extent(truth, args.pixel_size),
                evaluate.areal_extent(pred, args.pixel_size),
            )
        )
    text = evaluate.format_report([("NN Approach", report)], areal)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(text, encoding="utf-8")
    report_path.with_suffix(".csv").write_text(
        evaluate.format_report_csv([("NN Approach", report)], areal), encoding="utf-8"
    )
    figures.save_report_figure(cm, report, areal, report_path.with_suffix(".png"))
    sys.stdout.write(text)
    return 0


def _cmd_rules_check(args) -> int:
    ruleset = rules.parse_rules(Path(args.rules).read_text("utf-8"))
    print(f"ok: {len(ruleset)} rule(s)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (
        ValueError,
        PgmError,
        scene.SceneSpecError,
        rules.RuleError,
        pipeline.BundleError,
        pipeline.PipelineError,
        OSError,
    ) as exc:
        print(f"nnextract: error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
