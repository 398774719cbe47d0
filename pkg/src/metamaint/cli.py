"""Command-line driver: ``metamaint <stage> [options]``.

Stages read and write flat files in the ``--out`` directory, so each one can
be rerun on its own once the stages before it have produced their output.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import gitio, lexer, opportunity, pipeline, report, store, synth
from .corpus import LANGUAGES, NO_FILTER, FilterCriteria
from .family import COMMON_MIN, DORMANCY_DAYS, SOMETIMES_MIN, SampleSpec

log = logging.getLogger("metamaint")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--manifest", default=d(None), help="JSON Lines manifest of repositories")
    p.add_argument("--out", default=d("out"), help="directory for stage outputs (default: out)")
    p.add_argument("--reference-date", default=d(None), metavar="YYYY-MM-DD",
                   help="date that dormancy is judged against")
    p.add_argument("--rng-seed", type=int, default=d(0), help="seed for sampling and synthesis")
    p.add_argument("--jobs", type=int, default=d(1), help="parallel workers")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def _filter_flags(p):
    g = p.add_argument_group("activity filter")
    g.add_argument("--min-commits", type=int, default=FilterCriteria.min_total_commits,
                   help="keep repositories with more commits than this")
    g.add_argument("--min-window-commits", type=int, default=FilterCriteria.min_two_year_commits,
                   help="minimum commits inside some two-year window")
    g.add_argument("--min-committers", type=int, default=FilterCriteria.min_committers)
    g.add_argument("--include-forks", action="store_true")
    g.add_argument("--no-activity-filter", action="store_true",
                   help="keep every repository in the manifest")


def _strata_flags(p):
    p.add_argument("--sometimes-min", type=int, default=SOMETIMES_MIN,
                   help="smallest family size in the 'sometimes' stratum")
    p.add_argument("--common-min", type=int, default=COMMON_MIN,
                   help="smallest family size in the 'common' stratum")


def _status_flags(p):
    p.add_argument("--dormancy-days", type=int, default=DORMANCY_DAYS)
    p.add_argument("--use-sample", action="store_true", help="classify only the sampled families")


def _opportunity_flags(p):
    p.add_argument("--keyword", action="append", dest="keywords",
                   help="commit message keyword (repeatable; default: fix)")
    p.add_argument("--keyword-preset", choices=sorted(opportunity.KEYWORD_PRESETS))
    p.add_argument("--max-unique", type=int, default=opportunity.DEFAULT_MAX_UNIQUE,
                   help="skip families with more unique matching commits than this")
    p.add_argument("--report", dest="opportunities_file", metavar="FILE",
                   help="write opportunities here instead of OUT/opportunities.jsonl")


def _report_flags(p):
    p.add_argument("--format", action="append", dest="formats", choices=report.FORMATS,
                   help="report format (repeatable; default: markdown)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="metamaint",
                     description="Track files shared across git repositories and how their copies diverge.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_, *extras):
        p = sub.add_parser(name, help=help_, description=help_)
        _global_flags(p, suppress=True)
        for extra in extras:
            extra(p)
        return p

    add("scan", "enumerate source blobs in every repository of the manifest", _filter_flags)
    fam = add("families", "group blobs shared by several repositories into seed families", _strata_flags)
    fam.add_argument("--min-size", type=int, default=2)
    fam.add_argument("--shard-threshold", type=int, default=2_000_000,
                     help="shard the blob index by id prefix above this many (blob, path) pairs")
    samp = add("sample", "draw a stratified random sample of families")
    samp.add_argument("--confidence-z", type=float, default=SampleSpec.confidence_z)
    samp.add_argument("--proportion", type=float, default=SampleSpec.proportion_p)
    samp.add_argument("--margin", type=float, default=SampleSpec.margin_e)
    add("status", "track variants and classify statuses and family types", _status_flags)
    add("metrics", "retention, uniqueness and evolution period per family")
    add("opportunities", "unique fix commits that sibling repositories lack", _opportunity_flags)
    add("report", "summary tables of statuses, family types and targets", _report_flags)
    pipe = add("pipeline", "run every stage in order", _filter_flags, _strata_flags, _status_flags,
               _opportunity_flags, _report_flags)
    pipe.add_argument("--min-size", type=int, default=2)
    pipe.add_argument("--shard-threshold", type=int, default=2_000_000)
    syn = add("synth", "generate a synthetic corpus with known ground truth")
    syn.add_argument("--spec", help="SynthSpec JSON file (default: random spec from --rng-seed)")
    syn.add_argument("--max-repos", type=int, default=15)
    syn.add_argument("--max-families", type=int, default=6)
    tok = add("tokens", "print the tokens of one source file")
    tok.add_argument("file")
    tok.add_argument("--lang", required=True, choices=LANGUAGES)
    return parser


def _config(args) -> pipeline.PipelineConfig:
    criteria = FilterCriteria()
    if hasattr(args, "no_activity_filter"):
        if args.no_activity_filter:
            criteria = NO_FILTER
        else:
            try:
                criteria = FilterCriteria(args.min_commits, args.min_window_commits,
                                          not args.include_forks, args.min_committers)
            except ValueError as e:
                raise pipeline.UserError(str(e)) from None
    keywords = opportunity.DEFAULT_KEYWORDS
    if getattr(args, "keyword_preset", None):
        keywords = opportunity.KEYWORD_PRESETS[args.keyword_preset]
    if getattr(args, "keywords", None):
        keywords = tuple(args.keywords)
    try:
        sample = SampleSpec(getattr(args, "confidence_z", SampleSpec.confidence_z),
                            getattr(args, "proportion", SampleSpec.proportion_p),
                            getattr(args, "margin", SampleSpec.margin_e),
                            args.rng_seed)
    except ValueError as e:
        raise pipeline.UserError(str(e)) from None
    return pipeline.PipelineConfig(
        out_dir=args.out,
        manifest=args.manifest,
        reference_date=args.reference_date,
        dormancy_days=getattr(args, "dormancy_days", DORMANCY_DAYS),
        sometimes_min=getattr(args, "sometimes_min", SOMETIMES_MIN),
        common_min=getattr(args, "common_min", COMMON_MIN),
        sample=sample,
        keywords=keywords,
        max_unique=getattr(args, "max_unique", opportunity.DEFAULT_MAX_UNIQUE),
        criteria=criteria,
        min_size=getattr(args, "min_size", 2),
        jobs=args.jobs,
        shard_threshold=getattr(args, "shard_threshold", 2_000_000),
        report_formats=tuple(getattr(args, "formats", None) or ("markdown",)),
        use_sample=getattr(args, "use_sample", False),
        opportunities_file=getattr(args, "opportunities_file", None),
    )


def _synth(args) -> None:
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = synth.SynthSpec.from_dict(json.load(fh))
    else:
        spec = synth.random_spec(args.rng_seed, args.max_repos, args.max_families)
    manifest = synth.generate_synthetic_corpus(spec, args.out)
    print(manifest)


def _tokens(args) -> None:
    with open(args.file, "rb") as fh:
        for tok in lexer.tokenize(fh.read(), args.lang):
            print(tok)


def _dispatch(args) -> None:
    if args.command == "synth":
        return _synth(args)
    if args.command == "tokens":
        return _tokens(args)
    cfg = _config(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    if args.command == "pipeline":
        pipeline.run_all(cfg)
    else:
        pipeline.STAGES[args.command](cfg)


def run(argv: list[str] | None = None) -> int:
    """Run one command; 0 on success, 1 on user error, 2 on internal error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(e, file=sys.stderr)
        print(parser.format_usage(), end="", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return 0 if e.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        _dispatch(args)
    except (pipeline.UserError, synth.OutDirNotEmpty, synth.InvalidSpec, store.SchemaMismatch,
            FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as e:
        print(f"metamaint: error: {e}", file=sys.stderr)
        return 1
    except gitio.GitError as e:
        print(f"metamaint: git failed: {e}", file=sys.stderr)
        return 2
    except Exception:
        log.exception("internal error")
        return 2
    return 0


def main() -> None:
    sys.exit(run())
