import json
import os

import pytest
from hypothesis import given, settings, strategies as st

from metamaint import gitio, synth
from metamaint.synth import FamilyPlan, SynthSpec, VariantPlan


def truth(out):
    with open(os.path.join(out, "ground_truth.json")) as fh:
        return json.load(fh)


def one_family(ops_by_repo, lang="C", **kw):
    variants = [VariantPlan(r, f"src/x{synth.EXTENSIONS[lang]}", ops) for r, ops in enumerate(ops_by_repo)]
    return SynthSpec(len(ops_by_repo), [FamilyPlan(lang, variants)], **kw)


def test_one_family_of_three(tmp_path):
    synth.generate_synthetic_corpus(one_family([[], [], []]), tmp_path / "c")
    (fam,) = truth(tmp_path / "c")["families"]
    assert fam["size"] == 3 and fam["family_type"] == "not_maintained"
    assert [v["status"] for v in fam["variants"]] == ["unchanged"] * 3


def test_same_seed_gives_byte_identical_output(tmp_path):
    spec = synth.random_spec(11)
    for d in ("a", "b"):
        synth.generate_synthetic_corpus(spec, tmp_path / d)
    for name in ("ground_truth.json", "manifest.jsonl", "synth_spec.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    for repo in sorted(os.listdir(tmp_path / "a" / "repos")):
        heads = [gitio.RepoHandle(repo, tmp_path / d / "repos" / repo).run("rev-parse", "HEAD") for d in "ab"]
        assert heads[0] == heads[1]


def test_cherry_pick_is_not_unique(tmp_path):
    spec = one_family([["pick:t0"], ["pick:t0"], ["fix"]])
    synth.generate_synthetic_corpus(spec, tmp_path / "c")
    t = truth(tmp_path / "c")
    seed_family = max(t["families"], key=lambda f: f["size"])
    unique_repos = {u[0] for u in seed_family["unique_commits"]}
    assert len(unique_repos) == 1
    # the two picked commits carry equal per-path patch ids in the real repositories
    picked = [v for v in seed_family["variants"] if v["repo_id"] not in unique_repos]
    pids = set()
    for v in picked:
        h = gitio.RepoHandle(v["repo_id"], tmp_path / "c" / "repos" / f"{v['repo_id']}.git")
        branch = gitio.resolve_main_branch(h)
        (commit,) = gitio.path_history(h, branch, v["path"])[1:]
        assert commit.author_name != commit.committer_name
        pids.add(gitio.patch_identity(h, commit, v["path"]))
    assert len(pids) == 1
    # the picked content itself is shared by two repositories, so it seeds a family too
    assert sorted(f["size"] for f in t["families"]) == [2, 3]


def test_planted_scenarios(tmp_path):
    spec = one_family([["edit", "revert"], ["rename"], ["edit"], ["dup:2"], ["delete"], []], dormant=[5])
    synth.generate_synthetic_corpus(spec, tmp_path / "c")
    seed = max(truth(tmp_path / "c")["families"], key=lambda f: f["size"])
    moved = [v for v in seed["variants"] if v["path"].startswith("moved/")]
    planted = [v for v in seed["variants"] if v["path"] == "src/x.c"]
    # the old path goes inactive; the moved copy is a separate, unchanged occurrence
    assert [v["status"] for v in moved] == ["unchanged"]
    assert sorted(v["status"] for v in planted) == \
        ["dormant", "inactive", "inactive", "maintained", "maintained", "unchanged"]
    assert seed["family_type"] == "zero_variance"
    assert [v["dropped"] for v in seed["variants"]].count("duplicate") == 1


def test_clone_is_dropped_as_identical(tmp_path):
    spec = one_family([["edit"], ["fix"]], clones=[0])
    synth.generate_synthetic_corpus(spec, tmp_path / "c")
    (fam,) = [f for f in truth(tmp_path / "c")["families"] if f["size"] == 3]
    assert [v["dropped"] for v in fam["variants"]].count("identical_repo") == 1


def test_side_branch_seed_counts_for_detection(tmp_path):
    spec = one_family([["branch"], []])
    synth.generate_synthetic_corpus(spec, tmp_path / "c")
    (fam,) = truth(tmp_path / "c")["families"]
    assert sorted(v["status"] for v in fam["variants"]) == ["inactive", "unchanged"]


def test_empty_seed(tmp_path):
    spec = one_family([["edit"], ["edit"]], lang="Ruby")
    spec.families[0].empty_seed = True
    synth.generate_synthetic_corpus(spec, tmp_path / "c")
    (fam,) = truth(tmp_path / "c")["families"]
    assert fam["family_type"] == "empty_seed"


def test_out_dir_must_be_empty(tmp_path):
    (tmp_path / "junk").write_text("x")
    with pytest.raises(synth.OutDirNotEmpty):
        synth.generate_synthetic_corpus(one_family([[], []]), tmp_path)


@pytest.mark.parametrize("bad", [
    one_family([[], []], clones=[5]),
    one_family([["dup:0"], []]),
    one_family([["edit"], ["dup:0", "edit"]]),
    one_family([["delete", "edit"], []]),
    one_family([["edit", "pick:t0"], []]),
    one_family([["branch", "edit"], []]),
    one_family([["explode"], []]),
    SynthSpec(1, [FamilyPlan("C", [VariantPlan(0, "a.c"), VariantPlan(0, "b.c")])]),
    SynthSpec(2, [FamilyPlan("C", [VariantPlan(0, "a.md"), VariantPlan(1, "a.md")])]),
])
def test_invalid_specs(bad):
    with pytest.raises(synth.InvalidSpec):
        bad.validate()


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_random_specs_are_valid_and_round_trip(seed):
    spec = synth.random_spec(seed)
    spec.validate()
    assert spec.repo_count + len(spec.clones) <= 15 and len(spec.families) <= 6
    assert all(f.size >= 2 for f in spec.families)
    assert SynthSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
