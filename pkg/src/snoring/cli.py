"""Command-line driver: mine, issues, szz, label, dataset, synth, rq1, rq2.

Exit codes: 0 success, 1 input error, 2 degenerate-data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from .config import load_config, write_resolved
from .dataset import assemble, export_csv
from .errors import DegenerateDataError, InputError, SnoringError
from .experiment import run_rq1, run_rq2
from .history import ingest_history, link_tickets, load_history, save_history
from .issues import fetch_raw_issues, load_issues, normalize_issues
from .labeling import ObservationPoint, end_of_project, label_at, write_labels_csv
from .report import write_rq1_report, write_rq2_report
from .synth import SynthConfig, generate, write_ground_truth_csv, write_issues_json
from .szz import fixed_release_of, resolve_introductions, write_introductions_csv

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # map usage problems onto exit code 1
        raise InputError(message)


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML experiment configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument(
        "--offline", action="store_true", help="never touch the network"
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="snoring", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    mine = sub.add_parser("mine", help="ingest a git repository into history.jsonl")
    mine.add_argument("--repo", type=Path, required=True)
    mine.add_argument("--tag-pattern", default=r"v.*")
    _common_flags(mine)

    issues = sub.add_parser("issues", help="fetch or normalize defect tickets")
    issues.add_argument("--endpoint", help="Jira-compatible base URL")
    issues.add_argument("--project", help="issue project key")
    issues.add_argument("--token", help="static bearer token")
    issues.add_argument("--file", type=Path, help="offline JSON issue array")
    _common_flags(issues)

    szz = sub.add_parser("szz", help="resolve defect-introducing releases")
    szz.add_argument("--history", type=Path, required=True)
    szz.add_argument("--issues", type=Path, required=True)
    _common_flags(szz)

    label = sub.add_parser("label", help="label class/release cells at an instant")
    label.add_argument("--history", type=Path, required=True)
    label.add_argument("--issues", type=Path, required=True)
    label.add_argument(
        "--observation",
        default="end",
        help="ISO instant or 'end' for end-of-project",
    )
    _common_flags(label)

    dataset = sub.add_parser("dataset", help="assemble the feature+label dataset")
    dataset.add_argument("--history", type=Path, required=True)
    dataset.add_argument("--issues", type=Path, required=True)
    dataset.add_argument("--observation", default="end")
    _common_flags(dataset)

    synth = sub.add_parser("synth", help="generate a synthetic project")
    synth.add_argument("--releases", type=int, default=20)
    synth.add_argument("--classes", type=int, default=40)
    synth.add_argument("--commits-per-release", type=float, default=25.0)
    synth.add_argument("--defect-rate", type=float, default=4.0)
    synth.add_argument("--dormancy", type=float, default=0.2)
    synth.add_argument("--av-availability", type=float, default=1.0)
    _common_flags(synth)

    rq1 = sub.add_parser("rq1", help="snoring vs clean training experiment")
    _common_flags(rq1)

    rq2 = sub.add_parser("rq2", help="drop-recent-rows countermeasure experiment")
    _common_flags(rq2)

    return parser


def _out_dir(args, default: str = "out") -> Path:
    out = args.out if args.out is not None else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_observation(token: str, history) -> ObservationPoint:
    if token == "end":
        return end_of_project(history)
    try:
        instant = datetime.fromisoformat(token)
    except ValueError as exc:
        raise InputError(f"unparseable observation instant {token!r}") from exc
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    return ObservationPoint(instant)


def _cmd_mine(args) -> None:
    out = _out_dir(args)
    history = ingest_history(args.repo, args.tag_pattern)
    save_history(history, out / "history.jsonl")
    print(
        f"mined {len(history.commits)} commits, {len(history.releases)} releases "
        f"-> {out / 'history.jsonl'}"
    )


def _cmd_issues(args) -> None:
    out = _out_dir(args)
    if args.file:
        tickets = load_issues(args.file)
        raw = json.loads(Path(args.file).read_text(encoding="utf-8"))
    else:
        if args.offline:
            raise InputError("--offline requires --file")
        if not args.endpoint or not args.project:
            raise InputError("issues needs --endpoint and --project (or --file)")
        raw = fetch_raw_issues(
            args.endpoint, args.project, cache_dir=out, token=args.token
        )
        tickets = normalize_issues(raw)
    (out / "issues.json").write_text(
        json.dumps(raw, indent=1, sort_keys=True), encoding="utf-8"
    )
    resolved = sum(1 for t in tickets if t.is_resolved)
    print(f"{len(tickets)} defect tickets ({resolved} resolved) -> {out / 'issues.json'}")


def _cmd_szz(args) -> None:
    out = _out_dir(args)
    history = load_history(args.history)
    tickets = load_issues(args.issues)
    links = link_tickets(history, tickets)
    estimates = resolve_introductions(tickets, links, history)
    fixed = {
        t.key: fixed_release_of(t, links, history)
        for t in tickets
        if t.is_resolved and links.get(t.key)
    }
    write_introductions_csv(
        sorted(estimates.values(), key=lambda e: e.ticket_key),
        fixed,
        out / "introductions.csv",
    )
    known = sum(1 for e in estimates.values() if e.source != "unknown")
    print(f"{known}/{len(estimates)} introductions resolved -> {out / 'introductions.csv'}")


def _cmd_label(args) -> None:
    out = _out_dir(args)
    history = load_history(args.history)
    tickets = load_issues(args.issues)
    observation = _parse_observation(args.observation, history)
    cells = label_at(history, tickets, observation)
    token = (
        "end"
        if args.observation == "end"
        else observation.instant.isoformat().replace(":", "")
    )
    path = out / f"labels-{token}.csv"
    write_labels_csv(cells, path)
    defective = sum(1 for c in cells if c.label == "defective")
    print(f"{len(cells)} cells ({defective} defective) -> {path}")


def _cmd_dataset(args) -> None:
    out = _out_dir(args)
    history = load_history(args.history)
    tickets = load_issues(args.issues)
    observation = _parse_observation(args.observation, history)
    data = assemble(history, tickets, observation)
    export_csv(data, out / "dataset.csv")
    print(f"{len(data.rows)} rows -> {out / 'dataset.csv'}")


def _cmd_synth(args) -> None:
    out = _out_dir(args)
    config = SynthConfig(
        releases=args.releases,
        classes=args.classes,
        commits_per_release=args.commits_per_release,
        defect_rate=args.defect_rate,
        dormancy=args.dormancy,
        av_availability=args.av_availability,
        seed=args.seed if args.seed is not None else 0,
    )
    history, tickets, truth = generate(config)
    save_history(history, out / "history.jsonl")
    write_issues_json(tickets, out / "issues.json")
    write_ground_truth_csv(truth, out / "ground_truth.csv")
    print(
        f"synthetic project: {len(history.commits)} commits, "
        f"{len(tickets)} tickets, {len(truth)} defects -> {out}"
    )


def _experiment_config(args):
    if not args.config:
        raise InputError("rq1/rq2 need --config")
    return load_config(
        args.config, seed=args.seed, out_dir=args.out, offline=args.offline
    )


def _cmd_rq1(args) -> None:
    config = _experiment_config(args)
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_resolved(config, out / "config_resolved.json")
    output = run_rq1(config)
    write_rq1_report(output, out)
    print(f"rq1 complete -> {out}")


def _cmd_rq2(args) -> None:
    config = _experiment_config(args)
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_resolved(config, out / "config_resolved.json")
    output = run_rq2(config)
    ks = sorted(set(config.drop_ks) | {0})
    write_rq2_report(output, ks, out)
    print(f"rq2 complete -> {out}")


_COMMANDS = {
    "mine": _cmd_mine,
    "issues": _cmd_issues,
    "szz": _cmd_szz,
    "label": _cmd_label,
    "dataset": _cmd_dataset,
    "synth": _cmd_synth,
    "rq1": _cmd_rq1,
    "rq2": _cmd_rq2,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DegenerateDataError as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return 2
    except SnoringError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
