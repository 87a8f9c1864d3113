"""Command-line driver: enumerate, campaign, train, predict, report.

The CLI is a thin single-threaded dispatcher; parallelism lives behind the
--jobs flag of the campaign executor. The output directory resolves, in order:
--output-dir flag, FAASPROF_OUTPUT_DIR environment variable, the config file's
output_dir, then ./faasprof-out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .campaign import WORKFLOW_SCOPE, execute_campaign, traces_to_csv
from .config import parse_campaign_config, parse_training_config
from .dataset import load_dataset
from .errors import FaasprofError
from .evaluation import run_experiments
from .model_io import MAGIC, load_model
from .predictor import (
    ComponentModels,
    ComponentModelSet,
    predict_async_workflow,
    predict_sync_workflow,
)
from .workflow import enumerate_deployments, enumerate_testing_units

ENV_OUTPUT_DIR = "FAASPROF_OUTPUT_DIR"


def _resolve_output_dir(flag_value: str | None, config_value: Path | None) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(ENV_OUTPUT_DIR)
    if env:
        return Path(env)
    if config_value:
        return config_value
    return Path("faasprof-out")


def cmd_enumerate(args) -> int:
    spec = parse_campaign_config(args.config)
    units = enumerate_testing_units(spec.workflow)
    deployments = enumerate_deployments(spec.workflow, units)
    total = len(spec.configurations) + len(spec.held_out)
    print(f"workflow: {spec.name}")
    print(f"testing units: {len(units)}")
    for unit in units:
        print(f"  {unit.describe()}")
    print(f"deployments: {len(deployments)}")
    print(f"configurations: {total}")
    print(f"selected for profiling ({spec.selection}): {len(spec.configurations)}")
    if spec.held_out:
        print(f"held out for prediction: {len(spec.held_out)}")
    plan = spec.plan()
    print(f"planned runs (x{spec.repetitions} repetitions): {len(plan)}")
    return 0


def cmd_campaign(args) -> int:
    spec = parse_campaign_config(args.config)
    out = _resolve_output_dir(args.output_dir, spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = spec.plan()
    print(f"campaign {spec.name}: {len(plan)} runs -> {out}")

    def report(run_id: str, status: str) -> None:
        if args.verbose or status.startswith("failed"):
            print(f"  {run_id}: {status}")

    results = execute_campaign(
        plan,
        spec.backend(),
        out / "state.json",
        out / "traces",
        jobs=args.jobs,
        on_run=report,
    )
    state = json.loads((out / "state.json").read_text())
    outputs = traces_to_csv(results, out, failures=state.get("failed") or None)
    print(f"jobs csv: {outputs.jobs_path} ({outputs.job_rows} rows)")
    print(f"run summary csv: {outputs.summary_path} ({outputs.summary_rows} rows)")
    if outputs.failures_path:
        print(f"failures: {outputs.failures_path}", file=sys.stderr)
    saturated = [r.run_id for r in results if r.saturated]
    if saturated:
        print(f"saturated runs: {', '.join(saturated)}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    config = parse_training_config(args.config)
    data_path = Path(args.data) if args.data else config.input_path
    if data_path is None:
        raise FaasprofError("no dataset: pass --data or set DataPreparation.input")
    out = _resolve_output_dir(args.output_dir, None)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(data_path, target=config.settings.target)
    if dataset.rejected:
        print(f"rejected {dataset.rejected} invalid row(s) from {data_path}", file=sys.stderr)
    board = run_experiments(dataset, config.settings, output_path=out / "winner.model")
    (out / "leaderboard.csv").write_text(board.to_csv())
    (out / "leaderboard.txt").write_text(board.to_text())
    print(board.to_text(), end="")
    print(f"leaderboard: {out / 'leaderboard.csv'}")
    print(f"winner model: {board.winner_path}")
    return 0


def _parse_assignments(pairs: list[str]) -> dict[str, float]:
    values = {}
    for pair in pairs:
        if "=" not in pair:
            raise FaasprofError(f"--set expects name=value, got {pair!r}")
        name, _, raw = pair.partition("=")
        values[name.strip()] = float(raw)
    return values


def _predict_single(args, model_path: Path) -> int:
    model = load_model(model_path)
    rows: list[dict[str, float]]
    if args.sweep:
        import yaml

        sweep = yaml.safe_load(Path(args.sweep).read_text())
        if not isinstance(sweep, list):
            raise FaasprofError(f"{args.sweep}: sweep file must be a list of feature mappings")
        rows = [{k: float(v) for k, v in row.items()} for row in sweep]
    else:
        if not args.set:
            raise FaasprofError("pass --set name=value (repeatable) or --sweep file.yaml")
        rows = [_parse_assignments(args.set)]
    lines = [",".join(list(rows[0]) + ["prediction"])]
    for row in rows:
        prediction = model.predict_row(row)
        lines.append(",".join([f"{row[k]:g}" for k in rows[0]] + [f"{prediction:.6f}"]))
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
        print(f"predictions: {args.output}")
    else:
        print(text, end="")
    return 0


def _predict_workflow(args, manifest_path: Path) -> int:
    import yaml

    manifest = yaml.safe_load(manifest_path.read_text())
    if not isinstance(manifest, dict) or "components" not in manifest:
        raise FaasprofError(f"{manifest_path}: manifest needs a components list")
    mode = manifest.get("mode", "async")
    names, models = [], {}
    for entry in manifest["components"]:
        name = entry["name"]
        names.append(name)

        def _load(key):
            path = entry.get(key)
            return load_model(path) if path else None

        models[name] = ComponentModels(
            runtime=_load("runtime_model"),
            avg_compute=_load("avg_compute_model"),
            response=_load("response_model"),
            throughput=_load("throughput_model"),
        )
    model_set = ComponentModelSet(tuple(names), models)

    lines = []
    for case in manifest.get("sweep") or []:
        features = {n: {k: float(v) for k, v in (case.get(n) or {}).items()} for n in names}
        if mode == "async":
            total = predict_async_workflow(model_set, features, batch_size=case.get("batch_size"))
        else:
            total = predict_sync_workflow(model_set, features, lambda_in=float(case["lambda"]))
        lines.append(f"{json.dumps(case, sort_keys=True)},{total:.6f}")
    text = "\n".join(lines) + "\n" if lines else ""
    if args.output:
        Path(args.output).write_text(text)
        print(f"predictions: {args.output}")
    else:
        print(text, end="")
    return 0


def cmd_predict(args) -> int:
    path = Path(args.model)
    if not path.exists():
        raise FaasprofError(f"no such model or manifest file: {path}")
    with path.open("rb") as fh:
        is_model = fh.read(len(MAGIC)) == MAGIC
    return _predict_single(args, path) if is_model else _predict_workflow(args, path)


def cmd_report(args) -> int:
    out = _resolve_output_dir(args.output_dir, None)
    state_path = out / "state.json"
    if state_path.exists():
        state = json.loads(state_path.read_text())
        print(f"campaign state: {len(state.get('completed', []))} completed, "
              f"{len(state.get('failed', {}))} failed")
        for run_id, message in sorted(state.get("failed", {}).items()):
            print(f"  failed {run_id}: {message}")
    summary_path = out / "run_summary.csv"
    if summary_path.exists():
        lines = summary_path.read_text().splitlines()
        header = lines[0].split(",")
        workflow_rows = [l.split(",") for l in lines[1:] if l.split(",")[1] == ""]
        print(f"run summary: {len(lines) - 1} rows ({summary_path})")
        if workflow_rows:
            runtime_idx = header.index("runtime_s")
            runtimes = [float(r[runtime_idx]) for r in workflow_rows]
            print(
                f"full-workflow runtimes: n={len(runtimes)} "
                f"min={min(runtimes):.3f}s mean={sum(runtimes)/len(runtimes):.3f}s "
                f"max={max(runtimes):.3f}s"
            )
    board_path = out / "leaderboard.txt"
    if board_path.exists():
        print(board_path.read_text(), end="")
    if not any(p.exists() for p in (state_path, summary_path, board_path)):
        print(f"nothing to report under {out}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faasprof",
        description="Profile serverless workflows on a simulated backend and train performance models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("enumerate", help="list testing units, deployments, and configuration counts")
    p.add_argument("config", help="campaign YAML file")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("campaign", help="execute a profiling campaign and write CSVs")
    p.add_argument("config", help="campaign YAML file")
    p.add_argument("--output-dir", help="where to write traces, state, CSVs")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs (default 1)")
    p.add_argument("--verbose", action="store_true", help="print every run id")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("train", help="train the 8-experiment model grid on a profiling CSV")
    p.add_argument("config", help="training YAML file")
    p.add_argument("--data", help="profiling CSV (overrides DataPreparation.input)")
    p.add_argument("--output-dir", help="where to write leaderboard and winner model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="run inference with a trained model or a workflow manifest")
    p.add_argument("model", help="model file, or YAML manifest of per-component models")
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                   help="feature value (repeatable)")
    p.add_argument("--sweep", help="YAML list of feature mappings to sweep")
    p.add_argument("--output", help="write predictions CSV here instead of stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="summarize campaign state, run summaries, and leaderboards")
    p.add_argument("--output-dir", help="campaign/training output directory")
    p.set_defaults(func=cmd_report)
    return parser


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except FaasprofError as exc:
        if hasattr(exc, "errors") and len(getattr(exc, "errors")) > 1:
            print("configuration errors:", file=sys.stderr)
            for message in exc.errors:
                print(f"  - {message}", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
