"""Corpus manifest loading, repository activity filters and language mapping."""

from __future__ import annotations

import bisect
import json
import os
from dataclasses import dataclass, replace

from . import gitio

LANGUAGES = ("C", "C++", "Java", "JavaScript", "Python", "PHP", "Ruby")
TWO_YEARS = 730 * 86400

_EXTENSIONS = {
    "c": "C", "h": "C",
    "cc": "C++", "cp": "C++", "cpp": "C++", "cx": "C++", "cxx": "C++", "c++": "C++",
    "hh": "C++", "hp": "C++", "hpp": "C++", "hxx": "C++", "h++": "C++",
    "java": "Java",
    "js": "JavaScript",
    "py": "Python",
    "php": "PHP",
    "rb": "Ruby",
}
_LANGUAGE_NAMES = {name.lower(): name for name in LANGUAGES}


class ManifestParseError(ValueError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"manifest line {lineno}: {reason}")
        self.lineno = lineno


class DuplicateRepoId(ValueError):
    pass


@dataclass
class RepoRecord:
    repo_id: str
    local_path: str
    declared_language: str = "other"
    is_fork: bool = False
    total_commits: int | None = None
    max_commits_in_two_year_window: int | None = None
    committer_count: int | None = None
    default_branch: str | None = None

    def handle(self) -> gitio.RepoHandle:
        return gitio.RepoHandle(self.repo_id, self.local_path)

    @property
    def counts_known(self) -> bool:
        return None not in (self.total_commits, self.max_commits_in_two_year_window,
                            self.committer_count)


@dataclass(frozen=True)
class FilterCriteria:
    min_total_commits: int = 500
    min_two_year_commits: int = 100
    exclude_forks: bool = True
    min_committers: int = 2

    def __post_init__(self):
        if min(self.min_total_commits, self.min_two_year_commits, self.min_committers) < 0:
            raise ValueError("filter thresholds must be non-negative")


NO_FILTER = FilterCriteria(0, 0, False, 0)


def extension_language(path: str) -> str | None:
    name = path.rsplit("/", 1)[-1]
    if "." not in name:
        return None
    return _EXTENSIONS.get(name.rsplit(".", 1)[1].lower())


def _language(value) -> str:
    if value is None:
        return "other"
    return _LANGUAGE_NAMES.get(str(value).strip().lower(), "other")


def _count(obj: dict, key: str, lineno: int) -> int | None:
    v = obj.get(key)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ManifestParseError(lineno, f"{key} must be a non-negative integer")
    return v


def load_manifest(file: str | os.PathLike) -> list[RepoRecord]:
    """Parse a JSON Lines manifest. Relative repo paths resolve against the manifest's directory."""
    base = os.path.dirname(os.path.abspath(file))
    records: list[RepoRecord] = []
    seen: set[str] = set()
    with open(file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestParseError(lineno, f"invalid JSON ({e.msg})") from None
            if not isinstance(obj, dict):
                raise ManifestParseError(lineno, "expected a JSON object")
            repo_id, path = obj.get("repo_id"), obj.get("path")
            if not isinstance(repo_id, str) or not repo_id:
                raise ManifestParseError(lineno, "missing repo_id")
            if not isinstance(path, str) or not path:
                raise ManifestParseError(lineno, "missing path")
            if repo_id in seen:
                raise DuplicateRepoId(f"manifest line {lineno}: duplicate repo_id {repo_id!r}")
            seen.add(repo_id)
            fork = obj.get("fork", False)
            if not isinstance(fork, bool):
                raise ManifestParseError(lineno, "fork must be a boolean")
            branch = obj.get("default_branch")
            if branch is not None and not isinstance(branch, str):
                raise ManifestParseError(lineno, "default_branch must be a string")
            records.append(RepoRecord(
                repo_id=repo_id,
                local_path=os.path.normpath(os.path.join(base, path)),
                declared_language=_language(obj.get("language")),
                is_fork=fork,
                total_commits=_count(obj, "total_commits", lineno),
                max_commits_in_two_year_window=_count(obj, "max_commits_in_two_year_window", lineno),
                committer_count=_count(obj, "committer_count", lineno),
                default_branch=branch or None,
            ))
    return records


def two_year_window_max(commit_times: list[int]) -> int:
    """Most commits falling inside any 730-day window (times sorted ascending)."""
    best = 0
    for i, start in enumerate(commit_times):
        j = bisect.bisect_right(commit_times, start + TWO_YEARS, lo=i)
        best = max(best, j - i)
    return best


def fill_counts(record: RepoRecord, commit_times: list[int], committers: set[str]) -> RepoRecord:
    """Complete missing activity counts from sorted commit times and committer identities."""
    return replace(
        record,
        total_commits=len(commit_times) if record.total_commits is None else record.total_commits,
        max_commits_in_two_year_window=(two_year_window_max(commit_times)
                                        if record.max_commits_in_two_year_window is None
                                        else record.max_commits_in_two_year_window),
        committer_count=(len(committers) if record.committer_count is None
                         else record.committer_count),
    )


def populate_counts(record: RepoRecord) -> RepoRecord:
    """Fill in any missing activity counts from the repository itself."""
    if record.counts_known:
        return record
    with record.handle() as repo:
        times, committers = gitio.commit_stats(repo)
    return fill_counts(record, times, committers)


def passes(record: RepoRecord, criteria: FilterCriteria) -> bool:
    if criteria.exclude_forks and record.is_fork:
        return False
    return (record.total_commits > criteria.min_total_commits
            and record.max_commits_in_two_year_window >= criteria.min_two_year_commits
            and record.committer_count >= criteria.min_committers)


def apply_activity_filters(records: list[RepoRecord], criteria: FilterCriteria) -> list[RepoRecord]:
    for r in records:
        if not r.counts_known:
            raise ValueError(f"{r.repo_id}: activity counts not populated")
    return [r for r in records if passes(r, criteria)]
