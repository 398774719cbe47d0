"""Commits unique to one repository of a family, and where they could be propagated."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .family import SeedFamily
from .gitio import CommitMeta

SCHEMA = "opportunity/1"
DEFAULT_KEYWORDS = ("fix",)
KEYWORD_PRESETS = {
    "fix": ("fix",),
    "extended": ("fix", "security", "performance"),
}
DEFAULT_MAX_UNIQUE = 2


@dataclass
class UniqueCommit:
    family_ref: str
    repo_id: str
    path: str
    commit: CommitMeta
    patch: str
    matched_keywords: list[str] = field(default_factory=list)
    # every keyword hit sits inside a longer word ("prefix")
    substring_only: bool = False
    targets: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "repo_id": self.repo_id,
            "path": self.path,
            "commit": self.commit.to_dict(),
            "patch_id": self.patch,
            "matched_keywords": list(self.matched_keywords),
            "substring_only": self.substring_only,
            "targets": list(self.targets),
        }


@dataclass
class OpportunityReport:
    family_ref: str
    unique_commits: list[UniqueCommit]
    candidate_targets: list[str]
    stratum: str | None = None

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "family": self.family_ref,
            "stratum": self.stratum,
            "commit_equivalence": "per-path stable patch-id",
            "history": "main branch only",
            "unique_commits": [u.to_dict() for u in self.unique_commits],
            "candidate_targets": list(self.candidate_targets),
        }


def collect_family_patches(family: SeedFamily) -> dict[str, set[str]]:
    """Map each post-seed patch id to the repositories whose history contains it."""
    patches: dict[str, set[str]] = {}
    for v in family.independent_variants():
        for commit in v.post_seed_commits:
            pid = v.patches.get(commit.commit_id)
            if pid:
                patches.setdefault(pid, set()).add(v.repo_id)
    return patches


def _maintained_repos(family: SeedFamily) -> list[str]:
    return sorted({v.repo_id for v in family.independent_variants() if v.status == "maintained"})


def find_unique_commits(family: SeedFamily) -> list[UniqueCommit]:
    patches = collect_family_patches(family)
    maintained = _maintained_repos(family)
    found = []
    for v in sorted(family.independent_variants(), key=lambda v: v.key):
        for commit in v.post_seed_commits:
            pid = v.patches.get(commit.commit_id)
            if pid and len(patches[pid]) == 1:
                found.append(UniqueCommit(
                    family.family_id, v.repo_id, v.path, commit, pid,
                    targets=[r for r in maintained if r != v.repo_id],
                ))
    return found


def filter_fix_commits(commits: Iterable[UniqueCommit], keywords: Sequence[str] = DEFAULT_KEYWORDS
                       ) -> list[UniqueCommit]:
    """Keep commits whose message contains any keyword (case-insensitive substring)."""
    words = sorted({k.lower() for k in keywords if k})
    kept = []
    for uc in commits:
        message = uc.commit.message.lower()
        hits = [k for k in words if k in message]
        if not hits:
            continue
        whole = any(re.search(r"(?<![a-z0-9_])" + re.escape(k), message) for k in hits)
        kept.append(replace(uc, matched_keywords=hits, substring_only=not whole))
    return kept


def propose_opportunities(family: SeedFamily, keywords: Sequence[str] = DEFAULT_KEYWORDS,
                          max_unique: int = DEFAULT_MAX_UNIQUE) -> OpportunityReport | None:
    fixes = filter_fix_commits(find_unique_commits(family), keywords)
    if not fixes or len(fixes) > max_unique:
        return None
    sources = {uc.repo_id for uc in fixes}
    targets = [r for r in _maintained_repos(family) if r not in sources]
    return OpportunityReport(family.family_id, fixes, targets, family.stratum)
