import csv
import json
import os
import shutil

import pytest

from metamaint import cli, lexer, pipeline, report, store, synth
from metamaint.corpus import NO_FILTER
from metamaint.family import SeedFamily, SeedFile, Variant
from metamaint.synth import FamilyPlan, SynthSpec, VariantPlan

import oracles

REF = "2019-01-01"
OUTPUTS = ["scan.jsonl", "families.jsonl", "status.jsonl", "metrics.csv", "size_histogram.csv",
           "opportunities.jsonl", "report.md", "annotation.jsonl"]


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    manifest = synth.generate_synthetic_corpus(synth.random_spec(4), root / "c")
    return str(manifest)


def config(out, manifest, **kw):
    return pipeline.PipelineConfig(out_dir=str(out), manifest=manifest, reference_date=REF,
                                   criteria=NO_FILTER, **kw)


def read_all(out):
    return {name: (out / name).read_bytes() for name in sorted(os.listdir(out))}


class TestStages:
    def test_full_run_matches_ground_truth(self, corpus, tmp_path):
        cfg = config(tmp_path, corpus)
        pipeline.run_all(cfg)
        for name in OUTPUTS:
            assert (tmp_path / name).exists(), name
        truth = json.load(open(os.path.join(os.path.dirname(corpus), "ground_truth.json")))
        assert synth.observed(pipeline.load_status(cfg.path(pipeline.STATUS))) == truth["families"]

    def test_stage_isolation(self, corpus, tmp_path):
        cfg = config(tmp_path, corpus)
        pipeline.run_all(cfg)
        before = read_all(tmp_path)
        for name in ["status.jsonl", "metrics.csv", "opportunities.jsonl", "report.md", "annotation.jsonl"]:
            os.remove(tmp_path / name)
        for stage in ["status", "metrics", "opportunities", "report"]:
            pipeline.STAGES[stage](cfg)
        assert read_all(tmp_path) == before

    def test_parallel_equals_serial(self, corpus, tmp_path):
        pipeline.run_all(config(tmp_path / "a", corpus))
        pipeline.run_all(config(tmp_path / "b", corpus, jobs=4))
        assert read_all(tmp_path / "a") == read_all(tmp_path / "b")

    def test_sharded_index_equals_unsharded(self, corpus, tmp_path):
        for d, shard in (("a", 10**9), ("b", 1)):
            cfg = config(tmp_path / d, corpus, shard_threshold=shard)
            os.makedirs(cfg.out_dir)
            pipeline.run_scan(cfg)
            pipeline.run_families(cfg)
        for name in ("families.jsonl", "size_histogram.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_missing_input_is_user_error(self, tmp_path):
        with pytest.raises(pipeline.UserError):
            pipeline.run_families(config(tmp_path, None))
        with pytest.raises(pipeline.UserError):
            pipeline.run_scan(config(tmp_path, None))

    def test_status_needs_reference_date(self, corpus, tmp_path):
        cfg = config(tmp_path, corpus)
        pipeline.run_scan(cfg)
        pipeline.run_families(cfg)
        cfg.reference_date = None
        with pytest.raises(pipeline.UserError):
            pipeline.run_status(cfg)

    def test_metrics_match_oracle(self, corpus, tmp_path):
        cfg = config(tmp_path, corpus)
        pipeline.run_all(cfg)
        repos = {e["repo_id"]: e["path"] for e in store.read_jsonl(cfg.path("scan.jsonl"))}

        def trigram_set(repo_id, blob):
            from metamaint.gitio import RepoHandle, read_blob
            with RepoHandle(repo_id, repos[repo_id]) as h:
                return lexer.trigram_set(read_blob(h, blob), fam.seed.language)

        rows = list(csv.DictReader(l for l in open(cfg.path("metrics.csv")) if not l.startswith("#")))
        by_id = {r["family_id"]: r for r in rows}
        checked = 0
        for fam in pipeline.load_status(cfg.path("status.jsonl")):
            maintained = fam.maintained()
            if not maintained:
                assert fam.family_id not in by_id
                continue
            seed = trigram_set(fam.seed.occurrences[0][0], fam.seed.blob)
            sets = [trigram_set(v.repo_id, v.head_blob) for v in maintained]
            row = by_id[fam.family_id]
            assert int(row["variant_count"]) == len(maintained)
            assert float(row["retention"]) == pytest.approx(float(oracles.retention_family(sets, seed)), abs=5e-7)
            assert float(row["uniqueness"]) == pytest.approx(float(oracles.uniqueness_family(sets, seed)), abs=5e-7)
            checked += 1
        assert checked == len(rows) > 0

    def test_histogram_matches_families(self, corpus, tmp_path):
        cfg = config(tmp_path, corpus)
        pipeline.run_all(cfg)
        sizes = [r["size"] for r in store.read_jsonl(cfg.path("families.jsonl"))]
        lines = open(cfg.path("size_histogram.csv")).read().splitlines()
        assert lines[0] == "#schema=histogram/1" and lines[1] == "size,count"
        got = [tuple(map(int, l.split(","))) for l in lines[2:]]
        assert got == sorted((s, sizes.count(s)) for s in set(sizes))

    def test_sample_stage_feeds_status(self, corpus, tmp_path):
        cfg = config(tmp_path, corpus, use_sample=True)
        pipeline.run_all(cfg)
        sampled = [r["blob"] for r in store.read_jsonl(cfg.path("sample.jsonl"))]
        classified = [r["blob"] for r in store.read_jsonl(cfg.path("status.jsonl"))]
        assert sampled == classified and sampled

    def test_unreadable_repo_is_excluded_not_fatal(self, corpus, tmp_path):
        manifest = tmp_path / "m.jsonl"
        lines = open(corpus).read().splitlines()
        lines.append(json.dumps({"repo_id": "zz-missing", "path": str(tmp_path / "nowhere")}))
        manifest.write_text("\n".join(lines) + "\n")
        cfg = config(tmp_path / "out", str(manifest))
        os.makedirs(cfg.out_dir)
        pipeline.run_scan(cfg)
        (entry,) = [e for e in store.read_jsonl(cfg.path("scan.jsonl")) if e["repo_id"] == "zz-missing"]
        assert entry["excluded"].startswith("RepoUnreadable")

    def test_activity_filter_excludes_small_repos(self, corpus, tmp_path):
        cfg = pipeline.PipelineConfig(out_dir=str(tmp_path), manifest=corpus, reference_date=REF)
        pipeline.run_scan(cfg)
        entries = list(store.read_jsonl(cfg.path("scan.jsonl")))
        assert entries and all(e["excluded"] == "activity filter" for e in entries)

    def test_schema_mismatch(self, corpus, tmp_path):
        cfg = config(tmp_path, corpus)
        pipeline.run_scan(cfg)
        shutil.copy(cfg.path("scan.jsonl"), cfg.path("families.jsonl"))
        with pytest.raises(store.SchemaMismatch):
            pipeline.run_sample(cfg)

    def test_config_validation(self):
        for bad in (dict(sometimes_min=1), dict(sometimes_min=400), dict(jobs=0), dict(min_size=1),
                    dict(max_unique=-1)):
            with pytest.raises(pipeline.UserError):
                pipeline.PipelineConfig(out_dir="x", **bad)


def planted_family(tmp_path):
    """Three maintained variants and one dormant one."""
    variants = [VariantPlan(r, "lib/util.c", ops) for r, ops in enumerate([["edit"], ["fix"], ["edit", "edit"], []])]
    spec = SynthSpec(4, [FamilyPlan("C", variants)], dormant=[3])
    return synth.generate_synthetic_corpus(spec, tmp_path / "c")


class TestReport:
    def test_empty_corpus_gives_zero_tables(self, tmp_path):
        report.emit_report([], str(tmp_path), report.FORMATS)
        md = (tmp_path / "report.md").read_text()
        assert "| maintained | 0 (0%) | 0 (0%) | 0 (0%) |" in md
        rows = list(store.read_jsonl(tmp_path / "report.jsonl"))
        assert rows and all(r["count"] == 0 for r in rows)
        assert (tmp_path / "report.csv").read_text().startswith("table,row,stratum,count,percent\n")

    def test_planted_counts(self, tmp_path):
        manifest = planted_family(tmp_path)
        cfg = config(tmp_path / "out", manifest)
        pipeline.run_all(cfg)
        md = (tmp_path / "out" / "report.md").read_text()
        assert "| dormant | 0 (0%) | 0 (0%) | 1 (25%) |" in md
        assert "| maintained | 0 (0%) | 0 (0%) | 3 (75%) |" in md
        assert "| non_zero_variance | 0 (0%) | 0 (0%) | 1 (100%) |" in md
        assert "| rare | 1 | 3 |" in md
        assert "share a head commit: 0." in md and "byte-identical: 0." in md
        (opp,) = store.read_jsonl(cfg.path("opportunities.jsonl"))
        (uc,) = opp["unique_commits"]
        assert opp["candidate_targets"] == sorted(uc["targets"]) and len(uc["targets"]) == 2
        assert len(uc["commit_patch_id"]) == 40

    def test_percentages_sum_to_100(self):
        for values in ([1, 1, 1], [1, 2, 3, 4], [0, 0, 7, 0], [333, 333, 334, 1]):
            pct = report.percentages(values, list("abcd")[:len(values)])
            assert sum(pct.values()) == 100
            for v, p in zip(values, pct.values()):
                assert abs(p - 100 * v / sum(values)) < 1
        assert report.percentages([0, 0], ["a", "b"]) == {"a": 0, "b": 0}

    def test_unsupported_format(self, tmp_path):
        with pytest.raises(report.UnsupportedFormat):
            report.emit_report([], str(tmp_path), ["pdf"])

    def test_status_counts_sum_to_variants(self):
        fams = []
        for i, statuses in enumerate([["maintained", "dormant"], ["inactive", "unchanged", "maintained"]]):
            vs = [Variant(f"r{j}", "a.c", status=s) for j, s in enumerate(statuses)]
            f = SeedFamily(SeedFile(f"{i}" * 40, "C", tuple(v.key for v in vs)), vs, "rare", "not_maintained")
            fams.append(f)
        t = report.status_table(fams)
        assert t.total("rare") == 5 and t.total("common") == 0


class TestCli:
    def test_help(self, capsys):
        assert cli.run(["--help"]) == 0
        assert "usage" in capsys.readouterr().out
        assert cli.run(["status", "--help"]) == 0

    def test_unknown_flag(self, capsys):
        assert cli.run(["scan", "--bogus"]) == 1
        assert "unrecognized" in capsys.readouterr().err

    def test_missing_command(self):
        assert cli.run([]) == 1

    def test_bad_format_choice(self):
        assert cli.run(["report", "--format", "pdf"]) == 1

    def test_user_errors(self, tmp_path, capsys):
        assert cli.run(["scan", "--out", str(tmp_path), "--manifest", str(tmp_path / "none.jsonl")]) == 1
        assert cli.run(["families", "--out", str(tmp_path / "empty")]) == 1
        err = capsys.readouterr().err
        assert "not found" in err and "Traceback" not in err

    def test_bad_reference_date(self, corpus, tmp_path):
        out = str(tmp_path)
        assert cli.run(["scan", "--manifest", corpus, "--out", out, "--no-activity-filter"]) == 0
        assert cli.run(["families", "--out", out]) == 0
        assert cli.run(["status", "--out", out]) == 1
        assert cli.run(["status", "--out", out, "--reference-date", "yesterday"]) == 1
        assert not (tmp_path / "status.jsonl").exists()

    def test_full_pipeline_artifacts(self, corpus, tmp_path):
        out = tmp_path / "o"
        rc = cli.run(["--manifest", corpus, "pipeline", "--out", str(out), "--reference-date", REF,
                      "--no-activity-filter", "--format", "markdown", "--format", "csv", "--format", "jsonl",
                      "--report", str(tmp_path / "opps.jsonl"), "--jobs", "2"])
        assert rc == 0
        for name in OUTPUTS:
            if name != "opportunities.jsonl":
                assert (out / name).exists(), name
        assert (tmp_path / "opps.jsonl").exists()
        assert (out / "report.csv").exists() and (out / "report.jsonl").exists()
        assert not [n for n in os.listdir(out) if n.startswith(".tmp-")]

    def test_stage_by_stage_equals_pipeline(self, corpus, tmp_path):
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        common = ["--reference-date", REF, "--manifest", corpus]
        assert cli.run(["pipeline", "--out", a, "--no-activity-filter", "--keyword", "fix", *common]) == 0
        assert cli.run(["scan", "--out", b, "--no-activity-filter", *common]) == 0
        for stage in ["families", "status", "metrics", "opportunities", "report"]:
            assert cli.run([stage, "--out", b, *common]) == 0, stage
        assert read_all(tmp_path / "a") == read_all(tmp_path / "b")

    def test_synth_command(self, tmp_path, capsys):
        assert cli.run(["synth", "--out", str(tmp_path / "s"), "--rng-seed", "9"]) == 0
        assert capsys.readouterr().out.strip().endswith("manifest.jsonl")
        assert cli.run(["synth", "--out", str(tmp_path / "s"), "--rng-seed", "9"]) == 1
        spec_file = tmp_path / "s" / "synth_spec.json"
        assert cli.run(["synth", "--out", str(tmp_path / "t"), "--spec", str(spec_file)]) == 0
        assert (tmp_path / "s" / "ground_truth.json").read_bytes() == \
            (tmp_path / "t" / "ground_truth.json").read_bytes()

    def test_tokens_command(self, tmp_path, capsys):
        src = tmp_path / "x.c"
        src.write_text("int x; // note\n")
        assert cli.run(["tokens", str(src), "--lang", "C"]) == 0
        assert capsys.readouterr().out.split() == ["int", "x", ";"]
        assert cli.run(["tokens", str(src), "--lang", "Fortran"]) == 1

    def test_keyword_preset_and_sample_flags(self, corpus, tmp_path):
        out = str(tmp_path)
        assert cli.run(["scan", "--manifest", corpus, "--out", out, "--no-activity-filter"]) == 0
        assert cli.run(["families", "--out", out, "--sometimes-min", "3", "--common-min", "4"]) == 0
        strata = {r["stratum"] for r in store.read_jsonl(tmp_path / "families.jsonl")}
        assert strata <= {"rare", "sometimes", "common"}
        assert cli.run(["sample", "--out", out, "--rng-seed", "5", "--margin", "0.5"]) == 0
        assert cli.run(["sample", "--out", out, "--proportion", "1.5"]) == 1
        assert cli.run(["status", "--out", out, "--reference-date", REF, "--use-sample"]) == 0
        assert cli.run(["opportunities", "--out", out, "--keyword-preset", "extended"]) == 0


def test_atomic_open_leaves_nothing_on_failure(tmp_path):
    target = tmp_path / "out.jsonl"
    target.write_text("old\n")
    with pytest.raises(RuntimeError):
        with store.atomic_open(target) as fh:
            fh.write("partial")
            raise RuntimeError("boom")
    assert target.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["out.jsonl"]
    store.write_jsonl(target, [{"b": 1, "a": "é"}])
    assert target.read_bytes() == '{"a":"é","b":1}\n'.encode()
    assert os.stat(target).st_mode & 0o777 == 0o644
