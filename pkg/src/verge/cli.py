"""Command-line entry point wiring the library together.

Subcommands: synth, extract, label, train, eval, predict, alert, serve.
Exit codes: 0 success, 1 usage error, 2 data error. Every subcommand is a
thin composition of library calls so scripted pipelines and direct API use
produce identical artifacts.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import annotate, evaluation, forest, realtime, synth
from .features import FEATURE_SUBSETS, FeatureTable, featurize
from .gaze import (
    DEFAULT_SCREEN,
    DataFormatError,
    ScreenConfig,
    parse_recording,
    prepare_recording,
    write_recording,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_screen(path: str | None) -> ScreenConfig:
    return ScreenConfig.from_json(path) if path else DEFAULT_SCREEN


def _read_features(path: str, subset: str) -> FeatureTable:
    table = FeatureTable.from_csv(path)
    if subset != "full" and table.feature_names == tuple(FEATURE_SUBSETS["full"]):
        table = table.subset(subset)
    return table


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    screen = _load_screen(args.screen)
    screen.to_json(str(out / "screen.json"))
    for i in range(args.participants):
        pid = f"p{i + 1:02d}"
        spec = synth.SynthSpec(
            seed=args.seed + i,
            duration_ms=args.duration_ms,
            episodes=synth.alternating_plan(args.duration_ms, seed=args.seed + i),
            screen=screen,
        )
        rec, segments = synth.generate(spec, participant_id=pid)
        write_recording(rec, str(out / f"{pid}.gaze.jsonl"))
        annotate.write_segments(segments, str(out / f"{pid}.segments.json"), participant_id=pid)
    print(f"wrote {args.participants} recordings to {out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    screen = _load_screen(args.screen)
    rec = parse_recording(args.gaze, args.format, screen, participant_id=args.participant_id)
    rec = prepare_recording(rec, rate_hz=args.rate_hz, smooth=not args.no_filter)
    vectors = featurize(rec, args.window_ms, step_ms=args.window_ms / args.step_divisor)
    labels = None
    if args.segments:
        segments, _, _ = annotate.read_segments(args.segments)
        labels = annotate.label_windows([v.window for v in vectors], segments)
    table = FeatureTable.from_vectors(vectors, rec.participant_id or "anon", labels)
    table.to_csv(args.out)
    print(f"wrote {len(table)} feature rows to {args.out}")
    return EXIT_OK


def cmd_label(args) -> int:
    events = annotate.read_event_log(args.events)
    segments = annotate.derive_labels(events, t_d_ms=args.td_ms, t_r_ms=args.tr_ms)
    annotate.write_segments(segments, args.out, participant_id=args.participant_id)
    print(f"wrote {len(segments)} segments to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    table = _read_features(args.features_csv, args.features_subset).labeled()
    if len(table) == 0:
        raise DataFormatError(f"{args.features_csv}: no labelled rows")
    y = [lab for lab in table.labels]
    if args.classifier == "zeror":
        model = forest.train_zeror(y, table.feature_names)
    else:
        grid = _parse_depth_grid(args.depth_grid)
        depth = grid[0] if len(grid) == 1 else forest.tune_depth(
            table.X, y, grid, seed=args.seed, n_trees=args.trees
        )
        model = forest.train_forest(
            table.X, y, table.feature_names, n_trees=args.trees, max_depth=depth, seed=args.seed
        )
    forest.save_model(model, args.out)
    print(f"wrote model to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    entries = evaluation.load_dataset_dir(args.data, smooth=not args.no_filter)
    sizes = [float(s) for s in args.window_ms.split(",")]
    subsets = args.features_subset.split(",")
    for s in subsets:
        if s not in FEATURE_SUBSETS:
            raise DataFormatError(f"unknown feature subset {s!r}")
    tables = {}
    aux_tables = {}
    for size in sizes:
        table, aux = evaluation.dataset_tables(entries, size, step_divisor=args.step_divisor)
        tables[size] = table
        if aux is not None:
            aux_tables[size] = aux
    config = evaluation.EvalConfig(
        classifier=args.classifier,
        n_trees=args.trees,
        depth_grid=_parse_depth_grid(args.depth_grid),
        seed=args.seed,
    )
    grid = evaluation.eval_grid(tables, config, subsets, aux_tables or None)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(grid.to_json() + "\n", encoding="utf-8")
    if args.folds_csv:
        rows = []
        for (size, subset), report in sorted(grid.reports.items()):
            for line in report.fold_rows_csv().splitlines()[1:]:
                rows.append(f"{int(size)},{subset},{line}")
        header = "window_ms,subset,participant_id,n_test,weighted_f1,chosen_depth"
        Path(args.folds_csv).write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    print(grid.to_text_table(), end="")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = forest.load_model(args.model)
    table = FeatureTable.from_csv(args.features_csv)
    if tuple(model.feature_manifest) != table.feature_names:
        table = FeatureTable(
            X=table.X[:, [table.feature_names.index(n) for n in model.feature_manifest]],
            feature_names=tuple(model.feature_manifest),
            participant_ids=table.participant_ids,
            window_starts=table.window_starts,
            window_sizes=table.window_sizes,
            labels=table.labels,
            valid_ratios=table.valid_ratios,
        )
    labels, scores = model.predict_rows(table.X)
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for i, (lab, score) in enumerate(zip(labels, scores)):
            sink.write(
                json.dumps(
                    {
                        "participant_id": table.participant_ids[i],
                        "window_start_ms": table.window_starts[i],
                        "label": lab,
                        "score": float(score),
                    }
                )
                + "\n"
            )
    finally:
        if args.out:
            sink.close()
    return EXIT_OK


def cmd_alert(args) -> int:
    model = forest.load_model(args.model)
    screen = _load_screen(args.screen)
    engine = realtime.AlertEngine(model=model, screen=screen)
    if args.input.startswith("tcp://"):
        host, _, port = args.input[len("tcp://") :].partition(":")
        frames = realtime.tcp_frames(host, int(port))
    else:
        rec = parse_recording(args.input, "jsonl", screen)
        rec = prepare_recording(rec, smooth=not args.no_filter)
        frames = realtime.replay(rec, speed=args.speed)
    tcp_sink = realtime.tcp_line_sink(args.tcp_out) if args.tcp_out else None
    try:
        for sample in frames:
            alert = engine.push_frame(sample)
            if alert is not None:
                line = json.dumps(alert.to_jsonable())
                print(line, flush=True)
                if tcp_sink is not None:
                    tcp_sink(line)
    finally:
        if tcp_sink is not None:
            tcp_sink.close()
    return EXIT_OK


def cmd_serve(args) -> int:
    data_dir = args.data or os.environ.get("VERGE_DATA_DIR", "./verge-data")
    bind = args.bind or os.environ.get("VERGE_BIND", "127.0.0.1:8750")
    collector = realtime.collect_serve(bind, data_dir, ui_dir=args.ui, default_alpha=args.alpha)
    host, port = collector.address
    print(f"collector listening on http://{host}:{port} (data: {data_dir})")
    try:
        collector.thread.join()
    except KeyboardInterrupt:
        collector.shutdown()
    return EXIT_OK


# ---------------------------------------------------------------------------


def _parse_depth_grid(text: str) -> tuple:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        out.append(None if tok in ("none", "unbounded", "") else int(tok))
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="verge", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("synth", help="generate synthetic gaze recordings")
    common(sp)
    sp.add_argument("--duration-ms", type=float, default=60000.0)
    sp.add_argument("--participants", type=int, default=1)
    sp.add_argument("--screen")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("extract", help="gaze file to feature CSV")
    sp.add_argument("--gaze", required=True)
    sp.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    sp.add_argument("--screen")
    sp.add_argument("--segments", help="segments sidecar used to label windows")
    sp.add_argument("--participant-id", default="")
    sp.add_argument("--window-ms", type=float, default=1000.0)
    sp.add_argument("--step-divisor", type=int, default=4)
    sp.add_argument("--rate-hz", type=float, default=60.0)
    sp.add_argument("--no-filter", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("label", help="deblur event log to labelled segments")
    sp.add_argument("--events", required=True)
    sp.add_argument("--td-ms", type=float, default=annotate.DEFAULT_TD_MS)
    sp.add_argument("--tr-ms", type=float, default=annotate.DEFAULT_TR_MS)
    sp.add_argument("--participant-id", default="")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_label)

    sp = sub.add_parser("train", help="train a classifier from a feature CSV")
    common(sp)
    sp.add_argument("--features-csv", dest="features_csv", required=True)
    sp.add_argument("--features", dest="features_subset", default="full",
                    choices=tuple(FEATURE_SUBSETS))
    sp.add_argument("--classifier", choices=("forest", "zeror"), default="forest")
    sp.add_argument("--trees", type=int, default=forest.DEFAULT_N_TREES)
    sp.add_argument("--depth-grid", default="4,8,12,16,24,none")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="leave-one-participant-out evaluation grid")
    common(sp)
    sp.add_argument("--data", required=True, help="dataset directory")
    sp.add_argument("--window-ms", default="250,500,750,1000")
    sp.add_argument("--step-divisor", type=int, default=4)
    sp.add_argument("--features", dest="features_subset", default="full,vergence,classic")
    sp.add_argument("--classifier", choices=("forest", "zeror"), default="forest")
    sp.add_argument("--trees", type=int, default=forest.DEFAULT_N_TREES)
    sp.add_argument("--depth-grid", default="4,8,12,16,24,none")
    sp.add_argument("--no-filter", action="store_true")
    sp.add_argument("--folds-csv")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("predict", help="classify feature rows with a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features-csv", dest="features_csv", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("alert", help="stream a recording through the mind-alert engine")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True, help="gaze JSONL path or tcp://host:port")
    sp.add_argument("--screen")
    sp.add_argument("--speed", type=float, default=0.0, help="0 = as fast as possible")
    sp.add_argument("--no-filter", action="store_true")
    sp.add_argument("--tcp-out", help="also stream alert lines to host:port")
    sp.set_defaults(func=cmd_alert)

    sp = sub.add_parser("serve", help="run the session-log collector")
    sp.add_argument("--bind", help="host:port (default $VERGE_BIND or 127.0.0.1:8750)")
    sp.add_argument("--data", help="data directory (default $VERGE_DATA_DIR or ./verge-data)")
    sp.add_argument("--ui", help="static UI asset directory")
    sp.add_argument("--alpha", type=float, default=1.0,
                    help="default blur speed for generated schedules")
    sp.set_defaults(func=cmd_serve)

    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (DataFormatError, FileNotFoundError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"verge {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
