"""Seed families: blob index, variant tracking, classification and sampling."""

from __future__ import annotations

import datetime as dt
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable

from . import gitio, lexer
from .corpus import LANGUAGES, extension_language
from .gitio import CommitMeta

STRATA = ("common", "sometimes", "rare")
STATUSES = ("dormant", "inactive", "unchanged", "maintained")
FAMILY_TYPES = ("not_maintained", "empty_seed", "zero_variance", "non_zero_variance")

SOMETIMES_MIN = 28
COMMON_MIN = 331
DORMANCY_DAYS = 365

Occurrence = tuple[str, str]


class InvalidSize(ValueError):
    pass


@dataclass(frozen=True)
class SeedFile:
    blob: str
    language: str
    occurrences: tuple[Occurrence, ...]

    @property
    def repos(self) -> list[str]:
        return sorted({repo for repo, _ in self.occurrences})

    @property
    def size(self) -> int:
        return len(self.repos)


@dataclass
class Variant:
    repo_id: str
    path: str
    seed_intro_commit: CommitMeta | None = None
    post_seed_commits: list[CommitMeta] = field(default_factory=list)
    head_blob: str | None = None
    head_commit: str | None = None
    last_commit_time: int | None = None
    status: str | None = None
    # patch id of each post-seed commit, restricted to this path
    patches: dict[str, str] = field(default_factory=dict)

    @property
    def key(self) -> Occurrence:
        return (self.repo_id, self.path)

    @property
    def commit_count(self) -> int:
        return len(self.post_seed_commits)

    @property
    def churned(self) -> bool:
        """Content equals the seed again although the path was changed in between."""
        return self.status == "unchanged" and bool(self.post_seed_commits)

    def to_dict(self) -> dict:
        return {
            "repo_id": self.repo_id,
            "path": self.path,
            "status": self.status,
            "head_blob": self.head_blob,
            "head_commit": self.head_commit,
            "last_commit_time": self.last_commit_time,
            "churned": self.churned,
            "seed_intro_commit": self.seed_intro_commit.to_dict() if self.seed_intro_commit else None,
            "post_seed_commits": [
                dict(c.to_dict(), patch_id=self.patches.get(c.commit_id))
                for c in self.post_seed_commits
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Variant":
        commits, patches = [], {}
        for c in d.get("post_seed_commits", []):
            c = dict(c)
            pid = c.pop("patch_id", None)
            meta = CommitMeta.from_dict(c)
            commits.append(meta)
            if pid:
                patches[meta.commit_id] = pid
        intro = d.get("seed_intro_commit")
        return cls(
            repo_id=d["repo_id"], path=d["path"],
            seed_intro_commit=CommitMeta.from_dict(intro) if intro else None,
            post_seed_commits=commits,
            head_blob=d.get("head_blob"), head_commit=d.get("head_commit"),
            last_commit_time=d.get("last_commit_time"), status=d.get("status"),
            patches=patches,
        )


@dataclass
class DroppedVariant:
    variant: Variant
    reason: str  # "identical_repo" or "duplicate"
    kept: Occurrence

    def to_dict(self) -> dict:
        return {"reason": self.reason, "kept": list(self.kept), "variant": self.variant.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "DroppedVariant":
        return cls(Variant.from_dict(d["variant"]), d["reason"], tuple(d["kept"]))


@dataclass
class SeedFamily:
    seed: SeedFile
    variants: list[Variant] = field(default_factory=list)
    stratum: str | None = None
    family_type: str | None = None
    dropped: list[DroppedVariant] = field(default_factory=list)

    @property
    def family_id(self) -> str:
        return self.seed.blob

    @property
    def size(self) -> int:
        return self.seed.size

    def all_variants(self) -> list[Variant]:
        return self.variants + [d.variant for d in self.dropped]

    def independent_variants(self) -> list[Variant]:
        """Variants left after removing copies of identical repositories."""
        return self.variants + [d.variant for d in self.dropped if d.reason == "duplicate"]

    def maintained(self) -> list[Variant]:
        return [v for v in self.variants if v.status == "maintained"]

    def to_dict(self) -> dict:
        return {
            "blob": self.seed.blob,
            "language": self.seed.language,
            "size": self.size,
            "stratum": self.stratum,
            "family_type": self.family_type,
            "occurrences": [list(o) for o in self.seed.occurrences],
            "variants": [v.to_dict() for v in self.variants],
            "dropped": [d.to_dict() for d in self.dropped],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeedFamily":
        seed = SeedFile(d["blob"], d["language"], tuple(tuple(o) for o in d["occurrences"]))
        return cls(
            seed=seed,
            variants=[Variant.from_dict(v) for v in d.get("variants", [])],
            stratum=d.get("stratum"),
            family_type=d.get("family_type"),
            dropped=[DroppedVariant.from_dict(x) for x in d.get("dropped", [])],
        )


# index and family identification ---------------------------------------

def build_blob_index(enumerations: Iterable[tuple[str, Iterable[tuple[str, str]]]]
                     ) -> dict[str, set[Occurrence]]:
    """Merge per-repository (blob, path) listings into blob -> {(repo, path)}, sorted by blob."""
    index: dict[str, set[Occurrence]] = defaultdict(set)
    for repo_id, pairs in enumerations:
        for blob, path in pairs:
            index[blob].add((repo_id, path))
    return {b: index[b] for b in sorted(index)}


def family_language(occurrences: Iterable[Occurrence]) -> str:
    counts = Counter(extension_language(p) for _, p in occurrences)
    counts.pop(None, None)
    if not counts:
        return "other"
    return max(counts, key=lambda lang: (counts[lang], -LANGUAGES.index(lang)))


def identify_seed_families(index: dict[str, set[Occurrence]], min_size: int = 2) -> list[SeedFamily]:
    families = []
    for blob in sorted(index):
        occ = tuple(sorted(index[blob]))
        if len({repo for repo, _ in occ}) < max(2, min_size):
            continue
        families.append(SeedFamily(SeedFile(blob, family_language(occ), occ)))
    return families


# strata and sampling ------------------------------------------------------

def stratify(family_size: int, sometimes_min: int = SOMETIMES_MIN, common_min: int = COMMON_MIN) -> str:
    if family_size < 2:
        raise InvalidSize(f"family size {family_size} < 2")
    if family_size >= common_min:
        return "common"
    if family_size >= sometimes_min:
        return "sometimes"
    return "rare"


@dataclass(frozen=True)
class SampleSpec:
    confidence_z: float = 1.96
    proportion_p: float = 0.5
    margin_e: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.proportion_p < 1:
            raise ValueError("proportion must lie strictly between 0 and 1")
        if self.margin_e <= 0 or self.confidence_z <= 0:
            raise ValueError("margin and z must be positive")


def sample_size(population_n: int, spec: SampleSpec = SampleSpec()) -> int:
    """Cochran's sample size with finite population correction, rounded half up."""
    if population_n < 1:
        raise ValueError("population must be at least 1")
    p = spec.proportion_p
    n0 = spec.confidence_z ** 2 * p * (1 - p) / spec.margin_e ** 2
    n = n0 / (1 + (n0 - 1) / population_n)
    return min(population_n, math.floor(n + 0.5))


def sample_indices(counts: dict[str, int], spec: SampleSpec = SampleSpec()) -> dict[str, set[int]]:
    """Positions, within each stratum's blob-sorted list, drawn for the sample."""
    rng = random.Random(spec.rng_seed)
    picked = {}
    for stratum in STRATA:
        n = counts.get(stratum, 0)
        picked[stratum] = set(rng.sample(range(n), sample_size(n, spec))) if n else set()
    return picked


def stratified_sample(families: list[SeedFamily], spec: SampleSpec = SampleSpec()
                      ) -> dict[str, list[SeedFamily]]:
    by_stratum: dict[str, list[SeedFamily]] = {s: [] for s in STRATA}
    for fam in families:
        by_stratum[fam.stratum].append(fam)
    pools = {s: sorted(fams, key=lambda f: f.family_id) for s, fams in by_stratum.items()}
    picked = sample_indices({s: len(p) for s, p in pools.items()}, spec)
    return {s: [f for i, f in enumerate(pools[s]) if i in picked[s]] for s in STRATA}


# variant tracking and status ---------------------------------------------

def track_variant(repo: gitio.RepoHandle, branch: str, path: str, seed_blob: str,
                  with_patches: bool = True) -> Variant:
    """Follow ``path`` on the main branch from the first commit that holds the seed blob."""
    history = gitio.path_history(repo, branch, path)
    intro_at = None
    for i, commit in enumerate(history):
        if gitio.blob_at(repo, commit.commit_id, path) == seed_blob:
            intro_at = i
            break
    variant = Variant(repo.repo_id, path, head_blob=gitio.head_blob(repo, branch, path))
    if intro_at is not None:
        variant.seed_intro_commit = history[intro_at]
        variant.post_seed_commits = history[intro_at + 1:]
    if with_patches and variant.post_seed_commits:
        ids = gitio.patch_identities(repo, branch, path)
        variant.patches = {c.commit_id: ids[c.commit_id]
                           for c in variant.post_seed_commits if c.commit_id in ids}
    return variant


def reference_timestamp(reference_date: dt.date | dt.datetime | int | str) -> int:
    if isinstance(reference_date, int):
        return reference_date
    if isinstance(reference_date, str):
        reference_date = dt.date.fromisoformat(reference_date)
    if isinstance(reference_date, dt.datetime):
        if reference_date.tzinfo is None:
            reference_date = reference_date.replace(tzinfo=dt.timezone.utc)
        return int(reference_date.timestamp())
    return int(dt.datetime(reference_date.year, reference_date.month, reference_date.day,
                           tzinfo=dt.timezone.utc).timestamp())


def classify_variant_status(variant: Variant, seed_blob: str, reference_date,
                            dormancy_days: int = DORMANCY_DAYS) -> str:
    cutoff = reference_timestamp(reference_date) - dormancy_days * 86400
    if variant.last_commit_time is not None and variant.last_commit_time < cutoff:
        return "dormant"
    if variant.head_blob is None:
        return "inactive"
    if variant.head_blob == seed_blob:
        return "unchanged"
    return "maintained"


# de-duplication and family types ------------------------------------------

def dedupe_identical_repos(family: SeedFamily) -> SeedFamily:
    """Keep one repository among those whose main-branch tips are the same commit."""
    keeper: dict[str, str] = {}
    for v in family.variants:
        if v.head_commit is not None:
            current = keeper.get(v.head_commit)
            if current is None or v.repo_id < current:
                keeper[v.head_commit] = v.repo_id
    kept, dropped = [], list(family.dropped)
    for v in family.variants:
        owner = keeper.get(v.head_commit) if v.head_commit is not None else None
        if owner is None or owner == v.repo_id:
            kept.append(v)
        else:
            match = next((k.path for k in family.variants if k.repo_id == owner and k.path == v.path),
                         min(k.path for k in family.variants if k.repo_id == owner))
            dropped.append(DroppedVariant(v, "identical_repo", (owner, match)))
    return replace(family, variants=kept, dropped=dropped)


def dedupe_duplicate_variants(family: SeedFamily) -> SeedFamily:
    """Among maintained variants with the same head content keep the most-changed one."""
    best: dict[str, Variant] = {}
    for v in family.variants:
        if v.status != "maintained":
            continue
        cur = best.get(v.head_blob)
        if cur is None or (-v.commit_count, v.repo_id, v.path) < (-cur.commit_count, cur.repo_id, cur.path):
            best[v.head_blob] = v
    kept, dropped = [], list(family.dropped)
    for v in family.variants:
        winner = best.get(v.head_blob) if v.status == "maintained" else None
        if winner is None or winner is v:
            kept.append(v)
        else:
            dropped.append(DroppedVariant(v, "duplicate", winner.key))
    return replace(family, variants=kept, dropped=dropped)


def classify_family_type(family: SeedFamily, seed_content: bytes) -> str:
    lang = family.seed.language
    if lang in lexer.SYNTAXES:
        empty = lexer.is_empty_source(seed_content, lang)
    else:
        empty = not seed_content.strip()
    if empty:
        return "empty_seed"
    heads = {v.head_blob for v in family.variants if v.status == "maintained"}
    if not heads:
        return "not_maintained"
    if len(heads) == 1:
        return "zero_variance"
    return "non_zero_variance"


def select_variants_for_annotation(family: SeedFamily, limit: int = 5) -> list[Variant]:
    """Up to ``limit`` variants: the three with most post-seed commits and the two with fewest."""
    variants = family.variants
    if len(variants) <= limit:
        return sorted(variants, key=lambda v: (v.repo_id, v.path))
    top_n = limit - 2 if limit > 2 else limit
    by_most = sorted(variants, key=lambda v: (-v.commit_count, v.repo_id, v.path))
    top = by_most[:top_n]
    rest = sorted(by_most[top_n:], key=lambda v: (v.commit_count, v.repo_id, v.path))
    return top + rest[:limit - top_n]
