"""Retention and Uniqueness of variants, evolution period, family-size histogram."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .family import SeedFamily

YEAR_SECONDS = 365.25 * 86400


class EmptyVariantSet(ValueError):
    pass


@dataclass(frozen=True)
class FamilyMetrics:
    retention: float
    uniqueness: float
    evolution_period_years: float
    variant_count: int


def retention_f(v: frozenset, s: frozenset) -> float:
    """Share of the variant's trigrams still present in the seed (1.0 for an empty variant)."""
    if not v:
        return 1.0
    return len(v & s) / len(v)


def retention_family(variants: Sequence[frozenset], s: frozenset) -> float:
    if not variants:
        raise EmptyVariantSet("retention needs at least one variant")
    return sum(retention_f(v, s) for v in variants) / len(variants)


def uniqueness_u(v: frozenset, others: Iterable[frozenset]) -> float:
    """Share of the variant's trigrams found in none of ``others`` (0.0 for an empty variant)."""
    if not v:
        return 0.0
    rest = set(v)
    for f in others:
        rest -= f
        if not rest:
            break
    return len(rest) / len(v)


def uniqueness_family(variants: Sequence[frozenset], s: frozenset) -> float:
    if not variants:
        raise EmptyVariantSet("uniqueness needs at least one variant")
    total = 0.0
    for i, v in enumerate(variants):
        others = [s, *variants[:i], *variants[i + 1:]]
        total += uniqueness_u(v, others)
    return total / len(variants)


def evolution_period(family: SeedFamily) -> float:
    """Years from the earliest seed introduction to the latest post-seed change."""
    starts, ends = [], []
    for v in family.variants:
        if v.seed_intro_commit is None:
            continue
        starts.append(v.seed_intro_commit.commit_time)
        last = v.post_seed_commits[-1] if v.post_seed_commits else v.seed_intro_commit
        ends.append(max(last.commit_time, v.seed_intro_commit.commit_time))
    if not starts:
        return 0.0
    return max(0.0, (max(ends) - min(starts)) / YEAR_SECONDS)


def family_metrics(family: SeedFamily, variant_sets: Sequence[frozenset], seed_set: frozenset
                   ) -> FamilyMetrics:
    return FamilyMetrics(
        retention=retention_family(variant_sets, seed_set),
        uniqueness=uniqueness_family(variant_sets, seed_set),
        evolution_period_years=evolution_period(family),
        variant_count=len(variant_sets),
    )


def family_size_distribution(families: Iterable) -> list[tuple[int, int]]:
    """Histogram of family sizes as ascending (size, number of families) pairs.

    Accepts families or bare integer sizes.
    """
    counts = Counter(f if isinstance(f, int) else f.size for f in families)
    return sorted(counts.items())
