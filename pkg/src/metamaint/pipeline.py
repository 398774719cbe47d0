"""Pipeline stages. Each stage reads the files of earlier stages from the output
directory and writes its own, so any stage can be rerun on its own.

    scan           manifest          -> scan.jsonl
    families       scan.jsonl        -> families.jsonl, size_histogram.csv
    sample         families.jsonl    -> sample.jsonl
    status         families|sample, scan.jsonl -> status.jsonl
    metrics        status.jsonl, scan.jsonl    -> metrics.csv
    opportunities  status.jsonl, scan.jsonl    -> opportunities.jsonl
    report         status.jsonl      -> report.md (.csv/.jsonl), annotation.jsonl
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from . import corpus, gitio, lexer, metrics, opportunity, report, store
from .corpus import FilterCriteria, RepoRecord
from .family import (COMMON_MIN, DORMANCY_DAYS, SOMETIMES_MIN, STRATA, SampleSpec, SeedFamily,
                     build_blob_index, classify_family_type, classify_variant_status,
                     dedupe_duplicate_variants, dedupe_identical_repos, identify_seed_families,
                     reference_timestamp, sample_indices, select_variants_for_annotation,
                     stratify, track_variant)

log = logging.getLogger(__name__)

SCAN = "scan.jsonl"
FAMILIES = "families.jsonl"
SAMPLE = "sample.jsonl"
STATUS = "status.jsonl"
METRICS = "metrics.csv"
HISTOGRAM = "size_histogram.csv"
OPPORTUNITIES = "opportunities.jsonl"
ANNOTATION = "annotation.jsonl"

SCAN_SCHEMA = "scan/1"
FAMILY_SCHEMA = "family/1"
STATUS_SCHEMA = "status/1"
ANNOTATION_SCHEMA = "annotation/1"
METRICS_SCHEMA = "metrics/1"
HISTOGRAM_SCHEMA = "histogram/1"


class UserError(Exception):
    """Bad input or configuration; reported without a traceback."""


@dataclass
class PipelineConfig:
    out_dir: str
    manifest: str | None = None
    reference_date: str | None = None
    dormancy_days: int = DORMANCY_DAYS
    sometimes_min: int = SOMETIMES_MIN
    common_min: int = COMMON_MIN
    sample: SampleSpec = field(default_factory=SampleSpec)
    keywords: tuple[str, ...] = opportunity.DEFAULT_KEYWORDS
    max_unique: int = opportunity.DEFAULT_MAX_UNIQUE
    criteria: FilterCriteria = field(default_factory=FilterCriteria)
    min_size: int = 2
    jobs: int = 1
    shard_threshold: int = 2_000_000
    report_formats: tuple[str, ...] = ("markdown",)
    use_sample: bool = False
    opportunities_file: str | None = None

    def __post_init__(self):
        if not 2 <= self.sometimes_min <= self.common_min:
            raise UserError("strata thresholds must satisfy 2 <= sometimes <= common")
        if self.jobs < 1:
            raise UserError("--jobs must be at least 1")
        if self.min_size < 2:
            raise UserError("--min-size must be at least 2")
        if self.max_unique < 0:
            raise UserError("--max-unique must be non-negative")

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def need(self, name: str) -> str:
        p = self.path(name)
        if not os.path.exists(p):
            raise UserError(f"{p} not found; run the stage that produces it first")
        return p

    def stratum(self, size: int) -> str:
        return stratify(size, self.sometimes_min, self.common_min)


def _pmap(fn: Callable, items: Iterable, jobs: int) -> Iterator:
    """Ordered map; threads suffice because the work happens in git subprocesses."""
    if jobs == 1:
        yield from map(fn, items)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(fn, items)


# scan ----------------------------------------------------------------------

def scan_repo(record: RepoRecord, criteria: FilterCriteria) -> dict:
    entry = {
        "schema": SCAN_SCHEMA,
        "repo_id": record.repo_id,
        "path": record.local_path,
        "language": record.declared_language,
        "fork": record.is_fork,
        "default_branch": record.default_branch,
    }
    try:
        with record.handle() as repo:
            times, committers = gitio.commit_stats(repo)
            if not times:
                raise gitio.EmptyRepo(f"{record.repo_id}: no commits")
            record = corpus.fill_counts(record, times, committers)
            entry.update(total_commits=record.total_commits,
                         max_commits_in_two_year_window=record.max_commits_in_two_year_window,
                         committer_count=record.committer_count,
                         last_commit_time=times[-1])
            if not corpus.passes(record, criteria):
                entry["excluded"] = "activity filter"
                return entry
            branch = gitio.resolve_main_branch(repo, record.default_branch)
            entry["main_branch"] = branch
            entry["head_commit"] = gitio.head_commit(repo, branch)
            entry["blobs"] = sorted([b, p] for b, p in gitio.enumerate_blobs(repo)
                                    if corpus.extension_language(p))
    except gitio.GitError as e:
        log.warning("skipping %s: %s", record.repo_id, e)
        entry["excluded"] = f"{type(e).__name__}: {e}"
    return entry


def run_scan(cfg: PipelineConfig) -> str:
    if not cfg.manifest:
        raise UserError("--manifest is required for scan")
    try:
        records = corpus.load_manifest(cfg.manifest)
    except FileNotFoundError:
        raise UserError(f"manifest {cfg.manifest} not found") from None
    except (corpus.ManifestParseError, corpus.DuplicateRepoId) as e:
        raise UserError(str(e)) from None
    out = cfg.path(SCAN)
    with store.atomic_open(out) as fh:
        for entry in _pmap(lambda r: scan_repo(r, cfg.criteria), records, cfg.jobs):
            fh.write(store.dumps(entry) + "\n")
    return out


def _scan_entries(cfg: PipelineConfig) -> Iterator[dict]:
    path = cfg.need(SCAN)
    for e in store.read_jsonl(path):
        store.require_schema(e, SCAN_SCHEMA, path)
        if not e.get("excluded"):
            yield e


def _repo_table(cfg: PipelineConfig) -> dict[str, dict]:
    return {e["repo_id"]: {k: v for k, v in e.items() if k != "blobs"}
            for e in _scan_entries(cfg)}


class _Handles:
    """Lazily opened repository handles shared across worker threads."""

    def __init__(self, repos: dict[str, dict]):
        self.repos = repos
        self.handles: dict[str, gitio.RepoHandle] = {}

    def __getitem__(self, repo_id: str) -> gitio.RepoHandle:
        h = self.handles.get(repo_id)
        if h is None:
            h = self.handles.setdefault(repo_id, gitio.RepoHandle(repo_id, self.repos[repo_id]["path"]))
        return h

    def read(self, repo_id: str, blob: str) -> bytes:
        return gitio.read_blob(self[repo_id], blob)

    def close(self):
        for h in self.handles.values():
            h.close()


# families --------------------------------------------------------------------

def run_families(cfg: PipelineConfig) -> str:
    total = sum(len(e["blobs"]) for e in _scan_entries(cfg))
    prefixes = [""] if total <= cfg.shard_threshold else list("0123456789abcdef")
    sizes = []
    out = cfg.path(FAMILIES)
    with store.atomic_open(out) as fh:
        for prefix in prefixes:
            index = build_blob_index(
                (e["repo_id"], [(b, p) for b, p in e["blobs"] if b.startswith(prefix)])
                for e in _scan_entries(cfg)
            )
            for fam in identify_seed_families(index, cfg.min_size):
                fam.stratum = cfg.stratum(fam.size)
                sizes.append(fam.size)
                fh.write(store.dumps({
                    "schema": FAMILY_SCHEMA,
                    "blob": fam.seed.blob,
                    "language": fam.seed.language,
                    "size": fam.size,
                    "stratum": fam.stratum,
                    "occurrences": [list(o) for o in fam.seed.occurrences],
                }) + "\n")
            del index
    buf = io.StringIO()
    buf.write(f"#schema={HISTOGRAM_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["size", "count"])
    w.writerows(metrics.family_size_distribution(sizes))
    store.write_text(cfg.path(HISTOGRAM), buf.getvalue())
    return out


def _read_families(path: str, schema: str) -> Iterator[dict]:
    for rec in store.read_jsonl(path):
        yield store.require_schema(rec, schema, path)


# sample ------------------------------------------------------------------------

def run_sample(cfg: PipelineConfig) -> str:
    path = cfg.need(FAMILIES)
    counts = {s: 0 for s in STRATA}
    for rec in _read_families(path, FAMILY_SCHEMA):
        counts[rec["stratum"]] += 1
    picked = sample_indices(counts, cfg.sample)
    seen = {s: 0 for s in STRATA}
    out = cfg.path(SAMPLE)
    with store.atomic_open(out) as fh:
        for rec in _read_families(path, FAMILY_SCHEMA):
            st = rec["stratum"]
            if seen[st] in picked[st]:
                fh.write(store.dumps(rec) + "\n")
            seen[st] += 1
    return out


# status -------------------------------------------------------------------------

def classify_family(rec: dict, repos: dict[str, dict], handles: _Handles,
                    reference_ts: int, dormancy_days: int) -> SeedFamily:
    fam = SeedFamily.from_dict(rec)
    blob = fam.seed.blob
    variants = []
    for repo_id, path in fam.seed.occurrences:
        info = repos[repo_id]
        v = track_variant(handles[repo_id], info["main_branch"], path, blob)
        v.head_commit = info["head_commit"]
        v.last_commit_time = info["last_commit_time"]
        v.status = classify_variant_status(v, blob, reference_ts, dormancy_days)
        variants.append(v)
    fam.variants = variants
    fam = dedupe_identical_repos(fam)
    seed_content = handles.read(fam.seed.occurrences[0][0], blob)
    fam.family_type = classify_family_type(fam, seed_content)
    return dedupe_duplicate_variants(fam)


def run_status(cfg: PipelineConfig) -> str:
    if not cfg.reference_date:
        raise UserError("--reference-date is required for status")
    try:
        ref = reference_timestamp(cfg.reference_date)
    except ValueError:
        raise UserError(f"invalid --reference-date {cfg.reference_date!r} (want YYYY-MM-DD)") from None
    source = cfg.need(SAMPLE if cfg.use_sample else FAMILIES)
    repos = _repo_table(cfg)
    handles = _Handles(repos)
    out = cfg.path(STATUS)
    try:
        with store.atomic_open(out) as fh:
            work = _read_families(source, FAMILY_SCHEMA)
            fn = lambda rec: classify_family(rec, repos, handles, ref, cfg.dormancy_days)  # noqa: E731
            for fam in _pmap(fn, work, cfg.jobs):
                fh.write(store.dumps({
                    "schema": STATUS_SCHEMA,
                    "reference_date": cfg.reference_date,
                    "dormancy_days": cfg.dormancy_days,
                    **fam.to_dict(),
                }) + "\n")
    finally:
        handles.close()
    return out


def load_status(path: str) -> list[SeedFamily]:
    return [SeedFamily.from_dict(r) for r in _read_families(path, STATUS_SCHEMA)]


# metrics ---------------------------------------------------------------------------

def family_trigram_sets(fam: SeedFamily, handles: _Handles) -> tuple[list[frozenset], frozenset]:
    lang = fam.seed.language
    seed = lexer.trigram_set(handles.read(fam.seed.occurrences[0][0], fam.seed.blob), lang)
    variants = [lexer.trigram_set(handles.read(v.repo_id, v.head_blob), lang)
                for v in fam.maintained()]
    return variants, seed


def run_metrics(cfg: PipelineConfig) -> str:
    path = cfg.need(STATUS)
    handles = _Handles(_repo_table(cfg))

    def compute(rec):
        fam = SeedFamily.from_dict(rec)
        if not fam.maintained():
            return None
        variant_sets, seed_set = family_trigram_sets(fam, handles)
        return fam, metrics.family_metrics(fam, variant_sets, seed_set)

    buf = io.StringIO()
    buf.write(f"#schema={METRICS_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family_id", "stratum", "variant_count", "retention", "uniqueness", "evolution_years"])
    try:
        for row in _pmap(compute, _read_families(path, STATUS_SCHEMA), cfg.jobs):
            if row is None:
                continue
            fam, m = row
            w.writerow([fam.family_id, fam.stratum, m.variant_count, f"{m.retention:.6f}",
                        f"{m.uniqueness:.6f}", f"{m.evolution_period_years:.6f}"])
    finally:
        handles.close()
    out = cfg.path(METRICS)
    store.write_text(out, buf.getvalue())
    return out


# opportunities ----------------------------------------------------------------------

def run_opportunities(cfg: PipelineConfig) -> str:
    path = cfg.need(STATUS)
    handles = _Handles(_repo_table(cfg))
    out = cfg.opportunities_file or cfg.path(OPPORTUNITIES)
    try:
        with store.atomic_open(out) as fh:
            for rec in _read_families(path, STATUS_SCHEMA):
                fam = SeedFamily.from_dict(rec)
                if fam.family_type != "non_zero_variance":
                    continue
                rep = opportunity.propose_opportunities(fam, cfg.keywords, cfg.max_unique)
                if rep is None:
                    continue
                d = rep.to_dict()
                for uc in d["unique_commits"]:
                    uc["commit_patch_id"] = gitio.commit_patch_identity(
                        handles[uc["repo_id"]], uc["commit"]["commit_id"])
                fh.write(store.dumps(d) + "\n")
    finally:
        handles.close()
    return out


# report ------------------------------------------------------------------------------

def run_report(cfg: PipelineConfig) -> list[str]:
    families = load_status(cfg.need(STATUS))
    try:
        written = report.emit_report(families, cfg.out_dir, cfg.report_formats)
    except report.UnsupportedFormat as e:
        raise UserError(str(e)) from None
    annotation = []
    for fam in families:
        if fam.family_type != "non_zero_variance":
            continue
        for v in select_variants_for_annotation(fam):
            annotation.append({
                "schema": ANNOTATION_SCHEMA,
                "family": fam.family_id,
                "stratum": fam.stratum,
                "repo_id": v.repo_id,
                "path": v.path,
                "post_seed_commits": v.commit_count,
                # filled in by human annotators
                "file_type": None,
                "relationship": None,
                "change_type": None,
            })
    store.write_jsonl(cfg.path(ANNOTATION), annotation)
    return written + [cfg.path(ANNOTATION)]


STAGES = {
    "scan": run_scan,
    "families": run_families,
    "sample": run_sample,
    "status": run_status,
    "metrics": run_metrics,
    "opportunities": run_opportunities,
    "report": run_report,
}


def run_all(cfg: PipelineConfig) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    order = ["scan", "families"] + (["sample"] if cfg.use_sample else []) + \
        ["status", "metrics", "opportunities", "report"]
    for name in order:
        log.info("stage %s", name)
        STAGES[name](cfg)
