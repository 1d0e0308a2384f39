"""``scriptclique`` command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or integrity error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__
from .calibration import load_labels, rows_to_csv, sweep
from .corpus import load_corpus
from .errors import ScriptCliqueError
from .filters import counterblock_report, parse_filter_list
from .graph import AnalysisConfig
from .harvest import DEFAULT_USER_AGENT, HarvestConfig, harvest
from .report import CliqueReport, analyze, categorize, top_cliques

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("scriptclique")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_config_file(path) -> dict:
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    return tomllib.loads(text.decode("utf-8"))


def analysis_config(data: dict) -> AnalysisConfig:
    section = data.get("analysis", data)
    known = {f.name for f in fields(AnalysisConfig)}
    return AnalysisConfig.from_dict({k: v for k, v in section.items() if k in known})


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_harvest(args, settings) -> int:
    if not args.out:
        raise UsageError("harvest needs --out <dir>")
    section = settings.get("harvest", {})
    config = HarvestConfig(
        url_list_path=Path(args.urls),
        out_dir=Path(args.out),
        timeout_secs=args.timeout or section.get("timeout_secs", 30),
        max_parallel_sites=args.parallel or section.get("max_parallel_sites", 8),
        max_script_bytes=section.get("max_script_bytes", 5_242_880),
        user_agent=args.user_agent or section.get("user_agent", DEFAULT_USER_AGENT),
        follow_redirects=section.get("follow_redirects", 5),
    )
    manifest = harvest(config)
    log.info("harvested %d pages, %d scripts into %s", len(manifest.pages), len(manifest.scripts), args.out)
    return EXIT_OK


def cmd_analyze(args, settings) -> int:
    config = analysis_config(settings)
    overrides = {}
    if args.threshold is not None:
        overrides["similarity_threshold"] = args.threshold
    if args.min_sites is not None:
        overrides["min_clique_sites"] = args.min_sites
    if overrides:
        config = AnalysisConfig.from_dict({**asdict(config), **overrides})
    report = analyze(args.corpus, config, args.rules, dump_graph=args.dump_graph)
    _emit(report.to_json(), args.out)
    summary = ", ".join(f"{tag}={s.n_cliques}" for tag, s in report.tag_summary.items())
    log.info("%d cliques (%s)", len(report.cliques), summary)
    return EXIT_OK


def cmd_calibrate(args, settings) -> int:
    manifest = load_corpus(args.corpus)
    labels = load_labels(args.labels) if args.labels else []
    rows = sweep(manifest, labels, args.min, args.max, args.step, analysis_config(settings))
    _emit(rows_to_csv(rows), args.out)
    return EXIT_OK


def _parse_list_arg(value: str) -> tuple[str, str]:
    name, sep, path = value.partition("=")
    if not sep or not name or not path:
        raise UsageError(f"--list expects name=path, got {value!r}")
    return name, path


def cmd_check_blocking(args, settings) -> int:
    report = CliqueReport.load(args.report)
    lists = {}
    for value in args.list:
        name, path = _parse_list_arg(value)
        rules, skipped = parse_filter_list(Path(path).read_bytes())
        log.info("list %s: %d rules parsed, %d lines skipped", name, len(rules), len(skipped))
        for line_no, reason in skipped:
            log.debug("%s:%d skipped (%s)", path, line_no, reason)
        lists[name] = rules
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["vendor_domain", "list_name", "decision", "witness_rule"])
    for row in counterblock_report(report.cliques, lists):
        writer.writerow([row.vendor_domain, row.list_name, row.decision, row.witness_rule])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_categorize(args, settings) -> int:
    table = categorize(CliqueReport.load(args.report), args.categories)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["category", "percent"])
    for category, percent in table.rows:
        writer.writerow([category, f"{percent:.1f}"])
    buf.write(f"# basis={table.basis} uncategorized_sites={table.n_uncategorized}\n")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_top(args, settings) -> int:
    rows = top_cliques(CliqueReport.load(args.report), args.k)
    lines = []
    for r in rows:
        sources = ",".join(r.source_fqdns) or "-"
        lines.append(f"{r.clique_id}\t{r.n_sites}\t{r.kind}\t{r.tag}\t{sources}\t{' '.join(r.keywords)}")
    _emit("".join(line + "\n" for line in lines), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON settings file")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--quiet", action="store_true", help="only log errors")

    parser = _Parser(prog="scriptclique", description="Shared third-party script clique detection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("harvest", parents=[common], help="fetch sites and their scripts into a corpus")
    p.add_argument("--urls", required=True, help="file with one URL per line")
    p.add_argument("--timeout", type=int)
    p.add_argument("--parallel", type=int)
    p.add_argument("--user-agent")
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("analyze", parents=[common], help="find shared-script cliques in a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--rules", help="signature ruleset JSON (default: built-in)")
    p.add_argument("--threshold", type=float)
    p.add_argument("--min-sites", type=int)
    p.add_argument("--dump-graph", help="write edges as CSV node_a,node_b,score")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", parents=[common], help="sweep the similarity threshold")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels")
    p.add_argument("--min", type=float, default=0.40)
    p.add_argument("--max", type=float, default=1.00)
    p.add_argument("--step", type=float, default=0.05)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("check-blocking", parents=[common], help="would filter lists block anti-adblock scripts")
    p.add_argument("--report", required=True)
    p.add_argument("--list", action="append", required=True, metavar="NAME=PATH")
    p.set_defaults(func=cmd_check_blocking)

    p = sub.add_parser("categorize", parents=[common], help="category mix of anti-adblocking sites")
    p.add_argument("--report", required=True)
    p.add_argument("--categories", required=True, help="CSV of site_id,category")
    p.set_defaults(func=cmd_categorize)

    p = sub.add_parser("top", parents=[common], help="largest cliques by site count")
    p.add_argument("--report", required=True)
    p.add_argument("-k", type=int, default=10)
    p.set_defaults(func=cmd_top)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        settings = load_config_file(args.config) if args.config else {}
        return args.func(args, settings)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"scriptclique: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScriptCliqueError, OSError, ValueError, KeyError, tomllib.TOMLDecodeError) as exc:
        print(f"scriptclique: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
