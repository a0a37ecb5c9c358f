"""Command-line interface.

Subcommands: score (predict quality of a distorted clip against its
reference), extract (per-frame feature CSV), train (fit the fusion
regressor from feature + MOS CSVs), select (exhaustive feature-subset
search), evaluate (per-database correlations for a trained model), and
bench (analytic op counts and measured wall clock).

All commands are deterministic given their inputs and --seed; output
files are written atomically (temp file + rename). The default model
location can be set with the FUNQUE_MODEL_DIR environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import evaluation, fusion, reference
from .dataset import load_dataset
from .transform import TransformConfig
from .video_io import SizeMismatchError, VideoSpec, open_sequence

MODEL_DIR_ENV = "FUNQUE_MODEL_DIR"
DEFAULT_MODEL_NAME = "funque.svr"


def _atomic_write(path: str, text: str):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit(text: str, out: str | None):
    if out:
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _add_video_flags(parser):
    parser.add_argument("--ref", required=True, help="reference raw YUV file")
    parser.add_argument("--dis", required=True, help="distorted raw YUV file")
    parser.add_argument("--width", type=int, required=True)
    parser.add_argument("--height", type=int, required=True)
    parser.add_argument("--pix-fmt", default="yuv420p", choices=["yuv420p", "yuv422p", "yuv444p"])
    parser.add_argument("--bitdepth", type=int, default=8, choices=[8, 10, 12])


def _add_transform_flags(parser):
    parser.add_argument("--wavelet", default="haar", choices=["haar", "db2"])
    parser.add_argument("--levels", type=int, default=1, choices=[1, 2, 3, 4])
    parser.add_argument(
        "--csf",
        default="spatial_filter",
        choices=["spatial_filter", "frequency_filter", "li_sw", "watson_sw"],
    )
    parser.add_argument("--no-csf-share", action="store_true", help="defer SW weighting to DLM")
    parser.add_argument("--no-sast", action="store_true", help="skip the 2x pre-scale")
    parser.add_argument("--ppd", type=float, default=None, help="pixels per degree of visual angle")


def _add_common_flags(parser):
    parser.add_argument("--schema", default=",".join(fusion.DEFAULT_SCHEMA),
                        help="comma-separated feature names")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default=None, help="output file (default: stdout)")
    parser.add_argument("--format", default="table", choices=["table", "csv", "json"])


def _transform_config(args) -> TransformConfig:
    kwargs = dict(
        wavelet=args.wavelet,
        levels=args.levels,
        csf=args.csf,
        csf_shared=not args.no_csf_share,
        sast=not args.no_sast,
    )
    if args.ppd is not None:
        kwargs["pixels_per_degree"] = args.ppd
    return TransformConfig(**kwargs)


def _parse_schema(text: str):
    schema = tuple(name.strip() for name in text.split(",") if name.strip())
    return fusion.validate_schema(schema)


def _open_pair(args):
    spec = VideoSpec(args.width, args.height, args.pix_fmt, args.bitdepth)
    ref = open_sequence(args.ref, spec)
    dis = open_sequence(args.dis, spec)
    if ref.frame_count != dis.frame_count:
        ref.close()
        dis.close()
        raise SizeMismatchError(
            f"frame counts differ: {ref.frame_count} (ref) vs {dis.frame_count} (dis)"
        )
    return ref, dis


def _default_model_path() -> str:
    return os.path.join(os.environ.get(MODEL_DIR_ENV, "."), DEFAULT_MODEL_NAME)


def cmd_score(args) -> int:
    model = fusion.load_model(args.model or _default_model_path())
    cfg = _transform_config(args)
    ref, dis = _open_pair(args)
    with ref, dis:
        vectors = fusion.extract_sequence_features(ref, dis, cfg, model.schema, args.threads)
    frame_scores = [fusion.svr_predict(model, fv) for fv in vectors]
    pooled = fusion.svr_predict(model, fusion.aggregate_video_features(vectors))
    if args.format == "json":
        text = json.dumps(
            {"seed": args.seed, "frame_scores": frame_scores, "score": pooled}, indent=2
        ) + "\n"
    elif args.format == "csv":
        rows = ["frame,score"] + [f"{i},{s!r}" for i, s in enumerate(frame_scores)]
        rows.append(f"pooled,{pooled!r}")
        text = "\n".join(rows) + "\n"
    else:
        rows = [f"# seed: {args.seed}"]
        rows += [f"frame {i:4d}  {s:.6f}" for i, s in enumerate(frame_scores)]
        rows.append(f"score (mean features): {pooled:.6f}")
        text = "\n".join(rows) + "\n"
    _emit(text, args.out)
    return 0


def cmd_extract(args) -> int:
    schema = _parse_schema(args.schema)
    cfg = _transform_config(args)
    ref, dis = _open_pair(args)
    with ref, dis:
        vectors = fusion.extract_sequence_features(ref, dis, cfg, schema, args.threads)
    rows = [",".join(schema)]
    rows += [",".join(repr(float(v)) for v in fv.values) for fv in vectors]
    _emit("\n".join(rows) + "\n", args.out)
    return 0


def cmd_train(args) -> int:
    data = load_dataset(args.features, args.mos, name=args.features)
    hyper = fusion.SvrHyper(kernel=args.kernel, c=args.c, nu=args.nu)
    model = fusion.svr_train(data, hyper)
    out = args.model or _default_model_path()
    fusion.save_model(model, out)
    preds = [fusion.svr_predict(model, row) for row in data.features]
    fit = evaluation.srocc(preds, data.mos)
    sys.stdout.write(
        f"# seed: {args.seed}\ntrained on {len(data)} rows  "
        f"(schema: {','.join(data.schema)})\ntraining SROCC: {fit:.4f}\nmodel: {out}\n"
    )
    return 0


def cmd_select(args) -> int:
    data = load_dataset(args.features, args.mos, name=args.features)
    space = evaluation.SelectionSpace()
    if args.candidates:
        groups = [tuple(g.split(",")) if g else () for g in args.candidates.split("|")]
        if len(groups) != 4:
            raise ValueError("--candidates needs 4 |-separated groups (dlm|ssim|vif|motion)")
        space = evaluation.SelectionSpace(*groups)
    results = evaluation.rank_subsets(space, data, n_splits=args.splits, seed=args.seed)
    rows = ["rank,cv_srocc,schema", *(
        f"{rank},{score!r},{'+'.join(schema)}"
        for rank, (schema, score) in enumerate(results, start=1)
    )]
    _emit(f"# seed: {args.seed}\n" + "\n".join(rows) + "\n", args.out)
    return 0


def cmd_evaluate(args) -> int:
    model = fusion.load_model(args.model or _default_model_path())
    if len(args.features) != len(args.mos):
        raise ValueError("--features and --mos must be given the same number of times")
    rows = []
    correlations = []
    for fcsv, mcsv in zip(args.features, args.mos):
        data = load_dataset(fcsv, mcsv, name=os.path.basename(fcsv))
        data = data.select_features(model.schema)
        preds = [fusion.svr_predict(model, row) for row in data.features]
        r = evaluation.srocc(preds, data.mos)
        correlations.append(min(max(r, -1 + 1e-15), 1 - 1e-15))
        rows.append((data.name, len(data), r))
    avg = evaluation.fisher_average(correlations)
    lines = [f"# seed: {args.seed}", "database,rows,srocc"]
    lines += [f"{name},{n},{r!r}" for name, n, r in rows]
    lines.append(f"fisher_average,,{avg!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_bench(args) -> int:
    schema = _parse_schema(args.schema)
    cfg = _transform_config(args)
    opp = evaluation.ops_per_pixel(cfg, schema)
    baseline_opp = evaluation.conventional_pipeline_opp()
    lines = [
        f"# seed: {args.seed}",
        f"ops/pixel (this configuration): {opp:.2f}",
        f"ops/pixel (conventional pipeline): {baseline_opp:.2f}",
        f"expected speedup: {baseline_opp / opp:.3f}",
    ]
    if args.ref and args.dis:
        if args.width is None or args.height is None:
            raise ValueError("--width and --height are required with --ref/--dis")
        ref, dis = _open_pair(args)
        with ref, dis:
            frames = [(ref.read_luma(i), dis.read_luma(i)) for i in range(ref.frame_count)]
        start = time.perf_counter()
        fusion.extract_sequence_features(
            (r for r, _ in frames), (d for _, d in frames), cfg, schema, args.threads
        )
        shared_secs = time.perf_counter() - start
        lines.append(f"measured: {shared_secs / len(frames):.4f} s/frame (shared transform)")
        if args.compare_reference:
            start = time.perf_counter()
            prev = None
            for r, d in frames:
                _, prev = reference.conventional_frame_features(r, d, prev)
            conv_secs = time.perf_counter() - start
            lines.append(f"measured: {conv_secs / len(frames):.4f} s/frame (conventional)")
            lines.append(f"observed speedup: {conv_secs / shared_secs:.3f}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funque",
        description="Full-reference video quality assessment on a shared wavelet transform.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", help="predict quality for a distorted clip")
    _add_video_flags(p_score)
    _add_transform_flags(p_score)
    _add_common_flags(p_score)
    p_score.add_argument("--model", default=None, help="trained model file")
    p_score.set_defaults(fn=cmd_score)

    p_extract = sub.add_parser("extract", help="write per-frame features as CSV")
    _add_video_flags(p_extract)
    _add_transform_flags(p_extract)
    _add_common_flags(p_extract)
    p_extract.set_defaults(fn=cmd_extract)

    p_train = sub.add_parser("train", help="fit the fusion regressor")
    p_train.add_argument("--features", required=True, help="per-video feature CSV")
    p_train.add_argument("--mos", required=True, help="video_id,mos,content_id CSV")
    p_train.add_argument("--model", default=None, help="output model path")
    p_train.add_argument("--kernel", default="rbf", choices=["rbf", "linear"])
    p_train.add_argument("--c", type=float, default=4.0)
    p_train.add_argument("--nu", type=float, default=0.9)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(fn=cmd_train)

    p_select = sub.add_parser("select", help="exhaustive feature-subset search")
    p_select.add_argument("--features", required=True)
    p_select.add_argument("--mos", required=True)
    p_select.add_argument("--splits", type=int, default=5000)
    p_select.add_argument("--candidates", default=None,
                          help="dlm|ssim|vif|motion candidate groups, comma within a group")
    p_select.add_argument("--seed", type=int, default=0)
    p_select.add_argument("--out", default=None)
    p_select.set_defaults(fn=cmd_select)

    p_eval = sub.add_parser("evaluate", help="score a model against labeled databases")
    p_eval.add_argument("--model", default=None)
    p_eval.add_argument("--features", action="append", required=True)
    p_eval.add_argument("--mos", action="append", required=True)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", default=None)
    p_eval.set_defaults(fn=cmd_evaluate)

    p_bench = sub.add_parser("bench", help="op counts and wall-clock timing")
    p_bench.add_argument("--ref", default=None)
    p_bench.add_argument("--dis", default=None)
    p_bench.add_argument("--width", type=int, default=None)
    p_bench.add_argument("--height", type=int, default=None)
    p_bench.add_argument("--pix-fmt", default="yuv420p",
                         choices=["yuv420p", "yuv422p", "yuv444p"])
    p_bench.add_argument("--bitdepth", type=int, default=8, choices=[8, 10, 12])
    _add_transform_flags(p_bench)
    _add_common_flags(p_bench)
    p_bench.add_argument("--compare-reference", action="store_true",
                         help="also time the conventional pipeline")
    p_bench.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as err:
        sys.stderr.write(f"error: {err}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
