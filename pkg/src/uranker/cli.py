"""Command-line front door wiring the library into reproducible runs.

Machine-readable outputs are JSON; report paths also get a delimited CSV and
rendered figures. Every file-producing run writes a resolved-config snapshot
next to its outputs.
"""

import argparse
import json
import sys
from pathlib import Path

import torch

from . import checkpoints, reporting
from .datasets import DatasetError, load_dataset, load_image, save_image
from .enhancer import EnhancerConfig
from .metrics import krcc, srcc
from .protocol import ProtocolError
from .ranker import RankerConfig, prepare_image
from .runconfig import ConfigError, apply_settings, gather_settings, write_snapshot
from .synth import synth_generate
from .training import TrainRecipe, evaluate_ranker, train_ranker
from .uie_training import UieRecipe, evaluate_enhancer, train_enhancer


def _cmd_make_synth(args):
    synth_generate(
        args.groups,
        args.k,
        args.seed,
        args.out,
        size=args.size,
        make_pairs=not args.no_pairs,
    )
    write_snapshot(
        Path(args.out) / "make-synth.run.json",
        "make-synth",
        {"groups": args.groups, "k": args.k, "seed": args.seed, "size": args.size,
         "pairs": not args.no_pairs, "out": args.out},
    )
    print(json.dumps({"out": args.out, "groups": args.groups, "k": args.k}))


def _cmd_train_ranker(args):
    recipe = TrainRecipe()
    config = RankerConfig()
    apply_settings(gather_settings(args.config, args.set), recipe, config)
    if args.seed is not None:
        recipe.seed = args.seed
    manifest = load_dataset(args.data)
    out = Path(args.out)
    log_path = out.with_name(out.name + ".log.jsonl")
    write_snapshot(
        out.with_name(out.name + ".run.json"),
        "train-ranker",
        {"data": args.data, "out": args.out, "seed": recipe.seed,
         "recipe": recipe.to_dict(), "ranker_config": config.to_dict()},
    )
    summary, _, log_rows = train_ranker(manifest, recipe, config, out, log_path)
    if log_rows:
        reporting.training_curves(log_rows, out.with_name(out.name + ".curves.png"))
    print(json.dumps(summary))


def _cmd_eval_ranker(args):
    manifest = load_dataset(args.data)
    report = evaluate_ranker(args.ckpt, manifest)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    stem = report_path.with_suffix("")
    reporting.write_ranker_csv(report, stem.with_name(stem.name + ".csv"))
    reporting.ranker_report_figures(report, stem)
    write_snapshot(
        report_path.with_name(report_path.name + ".run.json"),
        "eval-ranker",
        {"ckpt": args.ckpt, "data": args.data, "report": args.report},
    )
    print(json.dumps({"srcc": report["srcc"], "krcc": report["krcc"]}))


def _cmd_train_uie(args):
    recipe = UieRecipe()
    config = EnhancerConfig()
    apply_settings(gather_settings(args.config, args.set), recipe, config)
    if args.seed is not None:
        recipe.seed = args.seed
    manifest = load_dataset(args.data)
    out = Path(args.out)
    log_path = out.with_name(out.name + ".log.jsonl")
    write_snapshot(
        out.with_name(out.name + ".run.json"),
        "train-uie",
        {"data": args.data, "out": args.out, "seed": recipe.seed, "trade_off": args.lam,
         "ranker": args.ranker, "recipe": recipe.to_dict(), "enhancer_config": config.to_dict()},
    )
    summary, _, log_rows = train_enhancer(
        manifest, recipe, args.lam, ranker_ckpt=args.ranker, config=config,
        out_path=out, log_path=log_path,
    )
    if log_rows:
        reporting.training_curves(log_rows, out.with_name(out.name + ".curves.png"))
    print(json.dumps(summary))


def _cmd_eval_uie(args):
    manifest = load_dataset(args.data)
    model, _ = checkpoints.load_enhancer(args.ckpt)
    report = evaluate_enhancer(model, manifest)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    stem = report_path.with_suffix("")
    reporting.write_uie_csv(report, stem.with_name(stem.name + ".csv"))
    reporting.uie_report_figures(report, stem)
    write_snapshot(
        report_path.with_name(report_path.name + ".run.json"),
        "eval-uie",
        {"ckpt": args.ckpt, "data": args.data, "report": args.report},
    )
    print(json.dumps({"psnr": report["psnr"], "ssim": report["ssim"]}))


def _cmd_enhance(args):
    model, _ = checkpoints.load_enhancer(args.ckpt)
    model.eval()
    image = load_image(args.infile)
    stride = model.total_stride
    h, w = image.shape[-2:]
    ph = (stride - h % stride) % stride
    pw = (stride - w % stride) % stride
    x = torch.nn.functional.pad(image.unsqueeze(0), (0, pw, 0, ph), mode="replicate")
    with torch.no_grad():
        out = model(x)[0, :, :h, :w]
    save_image(out, args.outfile)
    write_snapshot(
        Path(args.outfile).with_name(Path(args.outfile).name + ".run.json"),
        "enhance",
        {"ckpt": args.ckpt, "in": args.infile, "out": args.outfile},
    )
    print(json.dumps({"out": args.outfile}))


def _cmd_score(args):
    model, _ = checkpoints.load_ranker(args.ckpt, frozen=True)
    image = load_image(args.infile)
    image = prepare_image(image, model.config.total_stride)
    with torch.no_grad():
        score = float(model(image))
    print(score)


def _cmd_score_metrics(args):
    pred = json.loads(Path(args.pred).read_text())
    gt = json.loads(Path(args.gt).read_text())
    if isinstance(pred, list):
        pred, gt = {"all": pred}, {"all": gt}
    if set(pred) != set(gt):
        raise ConfigError("pred and gt files must cover the same group ids")
    per_group = {}
    for gid in sorted(pred):
        per_group[gid] = {"srcc": srcc(pred[gid], gt[gid]), "krcc": krcc(pred[gid], gt[gid])}
    report = {
        "per_group": per_group,
        "srcc": sum(v["srcc"] for v in per_group.values()) / len(per_group),
        "krcc": sum(v["krcc"] for v in per_group.values()) / len(per_group),
    }
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
        write_snapshot(
            Path(args.report).with_name(Path(args.report).name + ".run.json"),
            "score-metrics",
            {"pred": args.pred, "gt": args.gt, "report": args.report},
        )
    print(json.dumps(report))


def _cmd_annotate_serve(args):
    import uvicorn

    from .service import create_app

    ui_dir = args.ui
    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = candidate if candidate.is_dir() else None
    app = create_app(args.data, state_dir=args.state_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def _cmd_annotate_sim(args):
    from .service import simulate_voters

    spec = json.loads(Path(args.voters).read_text())
    result = simulate_voters(spec)
    print(json.dumps(result))


def build_parser():
    p = argparse.ArgumentParser(prog="uranker", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("make-synth", help="generate a synthetic ranked dataset")
    sp.add_argument("--groups", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--size", type=int, default=256)
    sp.add_argument("--no-pairs", action="store_true")
    sp.set_defaults(func=_cmd_make_synth)

    sp = sub.add_parser("train-ranker", help="train the quality ranker")
    sp.add_argument("--data", required=True)
    sp.add_argument("--config", default=None, help="flat key = value settings file")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.set_defaults(func=_cmd_train_ranker)

    sp = sub.add_parser("eval-ranker", help="rank-correlation evaluation of a checkpoint")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--report", required=True)
    sp.set_defaults(func=_cmd_eval_ranker)

    sp = sub.add_parser("train-uie", help="train the enhancement network")
    sp.add_argument("--data", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.0,
                    help="ranker-guidance trade-off coefficient")
    sp.add_argument("--ranker", default=None)
    sp.add_argument("--config", default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.set_defaults(func=_cmd_train_uie)

    sp = sub.add_parser("eval-uie", help="PSNR/SSIM evaluation of an enhancer checkpoint")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--report", required=True)
    sp.set_defaults(func=_cmd_eval_uie)

    sp = sub.add_parser("enhance", help="enhance one image")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", dest="outfile", required=True)
    sp.set_defaults(func=_cmd_enhance)

    sp = sub.add_parser("score", help="print the ranker score of one image")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--in", dest="infile", required=True)
    sp.set_defaults(func=_cmd_score)

    sp = sub.add_parser("score-metrics", help="rank metrics from score/rank files")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--report", default=None)
    sp.set_defaults(func=_cmd_score_metrics)

    sp = sub.add_parser("annotate-serve", help="serve the annotation session API")
    sp.add_argument("--data", required=True)
    sp.add_argument("--port", type=int, required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--state-dir", default=None)
    sp.add_argument("--ui", default=None, help="directory of built UI assets")
    sp.set_defaults(func=_cmd_annotate_serve)

    sp = sub.add_parser("annotate-sim", help="run oracle voters against a server")
    sp.add_argument("--voters", required=True, help="JSON simulation spec")
    sp.set_defaults(func=_cmd_annotate_sim)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ret = args.func(args)
        return 0 if ret is None else ret
    except (ConfigError, DatasetError, ProtocolError, ValueError, RuntimeError,
            FileNotFoundError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
