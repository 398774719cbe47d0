"""Summary tables: variant statuses, family types and the filtered target set, per stratum."""

from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass

from . import store
from .family import FAMILY_TYPES, STATUSES, STRATA, SeedFamily

FORMATS = ("markdown", "csv", "jsonl")
SCHEMA = "report/1"


class UnsupportedFormat(ValueError):
    pass


@dataclass
class Table:
    name: str
    title: str
    rows: list[str]
    counts: dict[str, dict[str, int]]  # row -> stratum -> count
    with_percent: bool = True

    def total(self, stratum: str) -> int:
        return sum(self.counts[r][stratum] for r in self.rows)

    def percents(self, stratum: str) -> dict[str, int]:
        return percentages([self.counts[r][stratum] for r in self.rows], self.rows)


def percentages(values: list[int], keys: list[str]) -> dict[str, int]:
    """Integer percentages that sum to exactly 100 (largest remainder), or all 0 for no data."""
    total = sum(values)
    if total == 0:
        return {k: 0 for k in keys}
    raw = [100 * v / total for v in values]
    floors = [int(x) for x in raw]
    short = 100 - sum(floors)
    order = sorted(range(len(values)), key=lambda i: (-(raw[i] - floors[i]), i))
    for i in order[:short]:
        floors[i] += 1
    return dict(zip(keys, floors))


def status_table(families: list[SeedFamily]) -> Table:
    counts = {s: {st: 0 for st in STRATA} for s in STATUSES}
    for fam in families:
        for v in fam.all_variants():
            counts[v.status][fam.stratum] += 1
    return Table("statuses", "Frequency of variant statuses", list(STATUSES), counts)


def type_table(families: list[SeedFamily]) -> Table:
    counts = {t: {st: 0 for st in STRATA} for t in FAMILY_TYPES}
    for fam in families:
        counts[fam.family_type][fam.stratum] += 1
    return Table("family_types", "Frequency of seed family types", list(FAMILY_TYPES), counts)


def target_table(families: list[SeedFamily]) -> Table:
    rows = ["seed_families", "variants"]
    counts = {r: {st: 0 for st in STRATA} for r in rows}
    for fam in families:
        if fam.family_type != "non_zero_variance":
            continue
        counts["seed_families"][fam.stratum] += 1
        counts["variants"][fam.stratum] += len(fam.maintained())
    return Table("targets", "Non-zero-variance families and their remaining variants",
                 rows, counts, with_percent=False)


def build_tables(families: list[SeedFamily]) -> list[Table]:
    return [status_table(families), type_table(families), target_table(families)]


def _notes(families: list[SeedFamily]) -> list[str]:
    dropped = Counter(d.reason for fam in families for d in fam.dropped)
    return [
        "## Notes",
        "",
        "- Commit histories come from each repository's main branch only.",
        f"- Variants merged because their repositories share a head commit: {dropped['identical_repo']}.",
        f"- Variants merged because their head contents are byte-identical: {dropped['duplicate']}.",
        "- Two commits count as the same change when their per-path stable patch ids match.",
        "- Retention and uniqueness are computed on the head content of each variant.",
        "",
    ]


def _markdown(tables: list[Table], families: list[SeedFamily]) -> str:
    out = ["# Seed family report", ""]
    for t in tables:
        out += [f"## {t.title}", ""]
        if t.with_percent:
            out.append("| | " + " | ".join(STRATA) + " |")
            out.append("|---|" + "---:|" * len(STRATA))
            pct = {st: t.percents(st) for st in STRATA}
            for r in t.rows:
                cells = [f"{t.counts[r][st]} ({pct[st][r]}%)" for st in STRATA]
                out.append(f"| {r} | " + " | ".join(cells) + " |")
            sums = [f"**{t.total(st)}** (**{100 if t.total(st) else 0}%**)" for st in STRATA]
            out.append("| **sum** | " + " | ".join(sums) + " |")
        else:
            out.append("| | " + " | ".join(t.rows) + " |")
            out.append("|---|" + "---:|" * len(t.rows))
            for st in STRATA:
                out.append(f"| {st} | " + " | ".join(str(t.counts[r][st]) for r in t.rows) + " |")
            sums = [f"**{sum(t.counts[r][st] for st in STRATA)}**" for r in t.rows]
            out.append("| **sum** | " + " | ".join(sums) + " |")
        out.append("")
    out += _notes(families)
    return "\n".join(out)


def _rows(tables: list[Table]):
    for t in tables:
        for r in t.rows:
            for st in STRATA:
                pct = t.percents(st)[r] if t.with_percent else None
                yield t.name, r, st, t.counts[r][st], pct


def _csv(tables: list[Table]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["table", "row", "stratum", "count", "percent"])
    for name, r, st, count, pct in _rows(tables):
        w.writerow([name, r, st, count, "" if pct is None else pct])
    return buf.getvalue()


def emit_report(families: list[SeedFamily], out_dir: str, formats=("markdown",)) -> list[str]:
    """Write the summary tables in each requested format; return the written paths."""
    for fmt in formats:
        if fmt not in FORMATS:
            raise UnsupportedFormat(f"unsupported report format {fmt!r}")
    tables = build_tables(families)
    written = []
    for fmt in formats:
        if fmt == "markdown":
            path = os.path.join(out_dir, "report.md")
            store.write_text(path, _markdown(tables, families))
        elif fmt == "csv":
            path = os.path.join(out_dir, "report.csv")
            store.write_text(path, _csv(tables))
        else:
            path = os.path.join(out_dir, "report.jsonl")
            store.write_jsonl(path, (
                {"schema": SCHEMA, "table": name, "row": r, "stratum": st,
                 "count": count, "percent": pct}
                for name, r, st, count, pct in _rows(tables)
            ))
        written.append(path)
    return written
