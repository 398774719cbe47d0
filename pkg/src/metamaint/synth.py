"""Synthetic corpora: real git repositories with planted seed families.

A corpus is first simulated in memory: every repository is a list of commits,
each holding a full snapshot of the tree. The simulation is written out with
``git fast-import`` and, independently of any git plumbing, the same
simulation yields the ground truth (families, statuses, family types,
unique commits and opportunities) that the pipeline must reproduce.

Variant plans are small op scripts:

    edit / fix   insert a new statement (``fix`` commits carry a fix message)
    revert       restore the seed content
    delete       remove the file
    rename       move the file to a new path
    branch       plant the seed only on a side branch (must be the only op)
    pick:TAG     apply the family's shared change TAG (must come first)
    dup:J        squash variant J's final content into one commit (only op)
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import shutil
import subprocess
from collections import defaultdict
from dataclasses import asdict, dataclass, field

from . import gitio
from .corpus import LANGUAGES, extension_language
from .family import DORMANCY_DAYS, reference_timestamp, stratify

SPEC_SCHEMA = "synthspec/1"
TRUTH_SCHEMA = "groundtruth/1"
DAY = 86400

EXTENSIONS = {"C": ".c", "C++": ".cpp", "Java": ".java", "JavaScript": ".js",
              "Python": ".py", "PHP": ".php", "Ruby": ".rb"}

_COMMENT = {
    "C": "/* {} */", "C++": "// {}", "Java": "/* {} */", "JavaScript": "// {}",
    "Python": "# {}", "PHP": "# {}", "Ruby": "# {}",
}
_STATEMENTS = {
    "C": ["int {n} = {v};", 'static const char *{n} = "v{v} // kept";'],
    "C++": ["auto {n} = {v};", "std::size_t {n} = {v}u >> 1;"],
    "Java": ["static int {n} = {v};", 'String {n} = "/* {v} */";'],
    "JavaScript": ["var {n} = {v};", "const {n} = (x) => x * {v};"],
    "Python": ["{n} = {v}", "{n} = '# {v}'"],
    "PHP": ["${n} = {v};", "${n} = '// {v}';"],
    "Ruby": ["{n} = {v}", '{n} = "#{{{v}}}"'],
}


class OutDirNotEmpty(Exception):
    pass


class InvalidSpec(ValueError):
    pass


@dataclass
class VariantPlan:
    repo: int
    path: str
    ops: list[str] = field(default_factory=list)


@dataclass
class FamilyPlan:
    language: str
    variants: list[VariantPlan]
    empty_seed: bool = False
    seed_statements: int = 6

    @property
    def size(self) -> int:
        return len({v.repo for v in self.variants})


@dataclass
class SynthSpec:
    repo_count: int
    families: list[FamilyPlan]
    rng_seed: int = 0
    dormant: list[int] = field(default_factory=list)
    clones: list[int] = field(default_factory=list)
    reference_date: str = "2019-01-01"
    dormancy_days: int = DORMANCY_DAYS

    def to_dict(self) -> dict:
        return {"schema": SPEC_SCHEMA, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = {k: v for k, v in d.items() if k != "schema"}
        fams = [FamilyPlan(**{**f, "variants": [VariantPlan(**v) for v in f["variants"]]})
                for f in d.pop("families")]
        return cls(families=fams, **d)

    def validate(self):
        if self.repo_count < 1:
            raise InvalidSpec("repo_count must be positive")
        for r in [*self.dormant, *self.clones]:
            if not 0 <= r < self.repo_count:
                raise InvalidSpec(f"repository index {r} out of range")
        for k, fam in enumerate(self.families):
            if fam.language not in EXTENSIONS:
                raise InvalidSpec(f"family {k}: unknown language {fam.language!r}")
            if fam.size < 2:
                raise InvalidSpec(f"family {k}: needs at least two repositories")
            keys = [(v.repo, v.path) for v in fam.variants]
            if len(set(keys)) != len(keys):
                raise InvalidSpec(f"family {k}: repeated (repo, path)")
            for i, vp in enumerate(fam.variants):
                if not 0 <= vp.repo < self.repo_count:
                    raise InvalidSpec(f"family {k}: repository {vp.repo} out of range")
                if extension_language(vp.path) is None:
                    raise InvalidSpec(f"family {k}: {vp.path} has no source extension")
                _check_ops(k, i, vp.ops, fam)


def _check_ops(k: int, i: int, ops: list[str], fam: FamilyPlan):
    where = f"family {k} variant {i}"
    for pos, op in enumerate(ops):
        name, _, arg = op.partition(":")
        if name not in ("edit", "fix", "revert", "delete", "rename", "branch", "pick", "dup"):
            raise InvalidSpec(f"{where}: unknown op {op!r}")
        if name in ("branch", "dup") and len(ops) != 1:
            raise InvalidSpec(f"{where}: {name} must be the only op")
        if name == "pick" and (pos != 0 or not arg):
            raise InvalidSpec(f"{where}: pick must be the first op and carry a tag")
        if name == "delete" and pos != len(ops) - 1:
            raise InvalidSpec(f"{where}: nothing may follow delete")
        if name == "dup":
            j = int(arg)
            if j == i or not 0 <= j < len(fam.variants):
                raise InvalidSpec(f"{where}: bad dup target {arg}")
            target = fam.variants[j].ops
            if not target or any(o.partition(":")[0] not in ("edit", "fix", "pick") for o in target):
                raise InvalidSpec(f"{where}: dup target must only edit its file")


# random specifications ----------------------------------------------------------

def random_spec(rng_seed: int, max_repos: int = 15, max_families: int = 6,
                reference_date: str = "2019-01-01") -> SynthSpec:
    rng = random.Random(rng_seed)
    n_clones = rng.choice([0, 0, 0, 1, 2]) if max_repos > 3 else 0
    repo_count = rng.randint(2, max_repos - n_clones)
    clones = [rng.randrange(repo_count) for _ in range(n_clones)]
    dormant = [r for r in range(repo_count) if rng.random() < 0.2]
    families = []
    for k in range(rng.randint(1, max_families)):
        lang = rng.choice(LANGUAGES)
        ext = EXTENSIONS[lang]
        size = min(repo_count, 2 + int(rng.expovariate(0.4)))
        variants = []
        for r in sorted(rng.sample(range(repo_count), size)):
            base = f"src/f{k}/module{ext}" if rng.random() < 0.8 else f"vendor/f{k}/module{ext}"
            variants.append(VariantPlan(r, base, _random_ops(rng)))
            if rng.random() < 0.1:
                variants.append(VariantPlan(r, f"lib/f{k}/copy{ext}", _random_ops(rng)))
        _plant_shared(rng, variants)
        families.append(FamilyPlan(lang, variants, empty_seed=rng.random() < 0.1,
                                   seed_statements=rng.randint(3, 9)))
    spec = SynthSpec(repo_count, families, rng_seed, dormant, clones, reference_date)
    spec.validate()
    return spec


def _random_ops(rng: random.Random) -> list[str]:
    scenario = rng.choices(
        ["untouched", "edits", "revert", "delete", "rename", "branch"],
        weights=[25, 40, 8, 8, 10, 5])[0]
    if scenario == "untouched":
        return []
    if scenario == "edits":
        return [rng.choice(["edit", "edit", "fix"]) for _ in range(rng.randint(1, 3))]
    if scenario == "revert":
        return [rng.choice(["edit", "fix"]), "revert"]
    if scenario == "delete":
        return rng.choice([["delete"], ["edit", "delete"]])
    if scenario == "rename":
        return rng.choice([["rename"], ["rename", "edit"]])
    return ["branch"]


def _plant_shared(rng: random.Random, variants: list[VariantPlan]):
    open_ = [i for i, v in enumerate(variants) if "branch" not in v.ops]
    by_repo = {}
    for i in open_:
        by_repo.setdefault(variants[i].repo, i)
    if len(by_repo) >= 2 and rng.random() < 0.3:
        chosen = rng.sample(sorted(by_repo.values()), rng.randint(2, min(3, len(by_repo))))
        for i in chosen:
            variants[i].ops.insert(0, "pick:t0")
    editors = [i for i, v in enumerate(variants)
               if v.ops and all(o.partition(":")[0] in ("edit", "fix", "pick") for o in v.ops)]
    if editors and rng.random() < 0.3:
        j = rng.choice(editors)
        others = [i for i, v in enumerate(variants)
                  if i != j and v.repo != variants[j].repo and not v.ops]
        if others:
            variants[rng.choice(others)].ops = [f"dup:{j}"]


# simulation --------------------------------------------------------------------

def _git_blob_id(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class _Commit:
    branch: str
    parent: int | None
    snapshot: dict[str, bytes]
    message: str
    author: tuple[str, str]
    committer: tuple[str, str]
    time: int = 0


@dataclass
class _Repo:
    repo_id: str
    origin: int
    main: str
    dormant: bool
    commits: list[_Commit] = field(default_factory=list)
    default_branch_in_manifest: bool = False

    def main_commits(self) -> list[_Commit]:
        return [c for c in self.commits if c.branch == self.main]


class _Simulation:
    def __init__(self, spec: SynthSpec):
        spec.validate()
        self.spec = spec
        self.rng = random.Random(spec.rng_seed)
        self.counter = 0
        self.empty_blobs: set[str] = set()
        self.ref_ts = reference_timestamp(spec.reference_date)
        total = spec.repo_count + len(spec.clones)
        slots = list(range(total))
        self.rng.shuffle(slots)
        ids = [f"repo{s:02d}" for s in slots]
        self.repos = []
        for r in range(spec.repo_count):
            main = self.rng.choices(["master", "main", "develop"], weights=[5, 3, 2])[0]
            self.repos.append(_Repo(ids[r], r, main, r in spec.dormant,
                                    default_branch_in_manifest=self.rng.random() < 0.2))
        self.clone_ids = [(ids[spec.repo_count + c], src) for c, src in enumerate(spec.clones)]

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def render(self, lines: list[tuple[bool, str]]) -> bytes:
        data = ("\n".join(text for _, text in lines) + "\n").encode()
        if not any(code for code, _ in lines):
            self.empty_blobs.add(_git_blob_id(data))
        return data

    def statement(self, lang: str, tag: str) -> tuple[bool, str]:
        template = self.rng.choice(_STATEMENTS[lang])
        return True, template.format(n=self.fresh(tag + "_"), v=self.rng.randint(1, 999))

    def seed_lines(self, k: int, fam: FamilyPlan) -> list[tuple[bool, str]]:
        lang = fam.language
        lines = [(False, _COMMENT[lang].format(f"family {k} seed {self.spec.rng_seed}"))]
        if fam.empty_seed:
            return lines + [(False, ""), (False, _COMMENT[lang].format("no code here"))]
        if lang == "PHP":
            lines.insert(0, (True, "<?php"))
        return lines + [self.statement(lang, f"f{k}s") for _ in range(fam.seed_statements)]

    def insert(self, lines, lang: str, tag: str):
        pos = self.rng.randint(1, len(lines))
        return lines[:pos] + [self.statement(lang, tag)] + lines[pos:]

    def plan_family(self, k: int, fam: FamilyPlan):
        """Per-variant step lists; contents are fixed before any scheduling."""
        lang = fam.language
        seed = self.seed_lines(k, fam)
        shared = {}
        for vp in fam.variants:
            for op in vp.ops:
                if op.startswith("pick:") and op not in shared:
                    tag = op.partition(":")[2]
                    shared[op] = (self.insert(seed, lang, f"f{k}p"),
                                  f"Fix crash in family {k} module ({tag})")
        order = sorted(range(len(fam.variants)), key=lambda i: fam.variants[i].ops[:1] == ["dup"]
                       or any(o.startswith("dup:") for o in fam.variants[i].ops))
        finals, plans = {}, {}
        for i in order:
            vp = fam.variants[i]
            cur, path, steps = seed, vp.path, []
            for op in vp.ops:
                name, _, arg = op.partition(":")
                if name in ("edit", "fix"):
                    cur = self.insert(cur, lang, f"f{k}e")
                    msg = (f"Fix bounds check in family {k} module ({self.fresh('c')})" if name == "fix"
                           else f"Update family {k} module ({self.fresh('c')})")
                    steps.append(("modify", path, cur, msg, False))
                elif name == "revert":
                    cur = seed
                    steps.append(("modify", path, cur, f"Restore upstream {path} ({self.fresh('c')})", False))
                elif name == "delete":
                    steps.append(("delete", path, None, f"Remove {path} ({self.fresh('c')})", False))
                elif name == "rename":
                    new = f"moved/f{k}/renamed_{self.fresh('n')}{EXTENSIONS[lang]}"
                    steps.append(("rename", path, new, f"Move {path} to {new}", False))
                    path = new
                elif name == "pick":
                    cur, msg = shared[op]
                    steps.append(("modify", path, cur, msg, True))
                elif name == "dup":
                    cur = finals[int(arg)]
                    steps.append(("modify", path, cur, f"Sync family {k} module ({self.fresh('c')})", False))
            finals[i] = cur
            plans[i] = steps
        return seed, plans

    def build(self):
        queues = defaultdict(list)
        for k, fam in enumerate(self.spec.families):
            seed, plans = self.plan_family(k, fam)
            seed_bytes = self.render(seed)
            for i, vp in enumerate(fam.variants):
                if vp.ops == ["branch"]:
                    queues[vp.repo].append([("side", vp.path, seed_bytes, f"Add {vp.path} on topic branch", False)])
                    continue
                q = [("modify", vp.path, seed_bytes, f"Add {vp.path}", False)]
                for kind, path, payload, msg, upstream in plans[i]:
                    if kind == "modify":
                        payload = self.render(payload)
                    q.append((kind, path, payload, msg, upstream))
                queues[vp.repo].append(q)
        for repo in self.repos:
            self.build_repo(repo, queues[repo.origin])

    def build_repo(self, repo: _Repo, queues: list[list]):
        rng = self.rng
        devs = [(f"Dev {x} {repo.repo_id}", f"dev{x.lower()}@{repo.repo_id}.example") for x in "AB"]
        upstream = ("Upstream Maintainer", "maintainer@upstream.example")
        filler = self.render([(True, f"APP_{repo.repo_id.upper()}_{self.spec.rng_seed} = {rng.randint(1, 99)}")])
        snap = {"README.md": f"# {repo.repo_id}\n".encode(), f"app/{repo.repo_id}_app.py": filler}
        commits = [_Commit(repo.main, None, dict(snap), "Initial commit", devs[0], devs[0])]
        head = 0
        pending = [q for q in queues if q]
        while pending:
            q = rng.choice(pending)
            kind, path, payload, msg, from_upstream = q.pop(0)
            if not q:
                pending.remove(q)
            dev = devs[len(commits) % 2]
            author = upstream if from_upstream else dev
            if kind == "side":
                side = dict(commits[head].snapshot)
                side[path] = payload
                commits.append(_Commit(f"topic/{self.fresh('t')}", head, side, msg, dev, dev))
                continue
            snap = dict(commits[head].snapshot)
            if kind == "modify":
                snap[path] = payload
            elif kind == "delete":
                del snap[path]
            else:
                snap[payload] = snap.pop(path)
            commits.append(_Commit(repo.main, head, snap, msg, author, dev))
            head = len(commits) - 1
        if not repo.dormant:
            snap = dict(commits[head].snapshot)
            snap["README.md"] += b"\nStill maintained.\n"
            commits.append(_Commit(repo.main, head, snap, "Update README", devs[1], devs[1]))
        if repo.dormant:
            end = self.ref_ts - (self.spec.dormancy_days + rng.randint(30, 500)) * DAY
        else:
            end = self.ref_ts - rng.randint(1, self.spec.dormancy_days - 60) * DAY
        span = rng.randint(400, 2000) * DAY
        step = max(DAY, span // max(1, len(commits)))
        for n, c in enumerate(commits):
            c.time = end - (len(commits) - 1 - n) * step - rng.randint(0, 3600)
        repo.commits = commits

    # ground truth -------------------------------------------------------------

    def all_repos(self) -> list[_Repo]:
        out = list(self.repos)
        for cid, src in self.clone_ids:
            base = self.repos[src]
            out.append(_Repo(cid, base.origin, base.main, base.dormant, base.commits))
        return sorted(out, key=lambda r: r.repo_id)

    def truth(self, keywords=("fix",), max_unique: int = 2) -> dict:
        repos = {r.repo_id: r for r in self.all_repos()}
        index = defaultdict(set)
        for r in repos.values():
            for c in r.commits:
                for p, data in c.snapshot.items():
                    if extension_language(p):
                        index[_git_blob_id(data)].add((r.repo_id, p))
        cutoff = self.ref_ts - self.spec.dormancy_days * DAY
        families = []
        for blob in sorted(index):
            occ = sorted(index[blob])
            size = len({rid for rid, _ in occ})
            if size < 2:
                continue
            variants = [self._variant(repos[rid], p, blob, cutoff) for rid, p in occ]
            families.append(self._family(blob, size, variants, keywords, max_unique))
        return {
            "schema": TRUTH_SCHEMA,
            "rng_seed": self.spec.rng_seed,
            "reference_date": self.spec.reference_date,
            "dormancy_days": self.spec.dormancy_days,
            "repos": [{"repo_id": r.repo_id, "main_branch": r.main, "dormant": r.dormant,
                       "origin": self.repos[r.origin].repo_id, "plan_index": r.origin}
                      for r in repos.values()],
            "families": families,
        }

    def _variant(self, repo: _Repo, path: str, blob: str, cutoff: int) -> dict:
        main = repo.main_commits()
        touched, prev = [], None
        for c in main:
            cur = c.snapshot.get(path)
            if cur != prev:
                touched.append((c, prev, cur))
            prev = cur
        intro = next((n for n, (_, _, cur) in enumerate(touched)
                      if cur is not None and _git_blob_id(cur) == blob), None)
        post = touched[intro + 1:] if intro is not None else []
        head = main[-1].snapshot.get(path)
        head_blob = _git_blob_id(head) if head is not None else None
        if max(c.time for c in repo.commits) < cutoff:
            status = "dormant"
        elif head_blob is None:
            status = "inactive"
        elif head_blob == blob:
            status = "unchanged"
        else:
            status = "maintained"
        return {"repo_id": repo.repo_id, "path": path, "status": status, "origin": repo.origin,
                "head_blob": head_blob,
                "post": [(path, old, new, c.message) for c, old, new in post]}

    def _family(self, blob, size, variants, keywords, max_unique) -> dict:
        for v in variants:
            v["dropped"] = None
        keeper = {}
        for v in variants:
            keeper[v["origin"]] = min(keeper.get(v["origin"], v["repo_id"]), v["repo_id"])
        for v in variants:
            if v["repo_id"] != keeper[v["origin"]]:
                v["dropped"] = "identical_repo"
        kept = [v for v in variants if v["dropped"] is None]
        heads = {v["head_blob"] for v in kept if v["status"] == "maintained"}
        if blob in self.empty_blobs:
            ftype = "empty_seed"
        elif not heads:
            ftype = "not_maintained"
        elif len(heads) == 1:
            ftype = "zero_variance"
        else:
            ftype = "non_zero_variance"
        best = {}
        for v in kept:
            if v["status"] == "maintained":
                key = (-len(v["post"]), v["repo_id"], v["path"])
                if v["head_blob"] not in best or key < best[v["head_blob"]][0]:
                    best[v["head_blob"]] = (key, v)
        for v in kept:
            if v["status"] == "maintained" and best[v["head_blob"]][1] is not v:
                v["dropped"] = "duplicate"
        independent = [v for v in variants if v["dropped"] != "identical_repo"]
        holders = defaultdict(set)
        for v in independent:
            for p, old, new, _ in v["post"]:
                holders[(p, old, new)].add(v["repo_id"])
        unique = sorted(
            (v["repo_id"], v["path"], msg)
            for v in independent for p, old, new, msg in v["post"]
            if len(holders[(p, old, new)]) == 1
        )
        opp = None
        if ftype == "non_zero_variance":
            fixes = [u for u in unique if any(k in u[2].lower() for k in keywords)]
            if 0 < len(fixes) <= max_unique:
                maintained = {v["repo_id"] for v in independent if v["status"] == "maintained"}
                sources = {u[0] for u in fixes}
                opp = {"unique_commits": [list(u) for u in fixes],
                       "candidate_targets": sorted(maintained - sources)}
        return {
            "blob": blob,
            "size": size,
            "stratum": stratify(size),
            "family_type": ftype,
            "variants": [{"repo_id": v["repo_id"], "path": v["path"], "status": v["status"],
                          "dropped": v["dropped"], "post_seed_commits": len(v["post"])}
                         for v in variants],
            "unique_commits": [list(u) for u in unique],
            "opportunity": opp,
        }


# writing repositories ----------------------------------------------------------

def _fast_import_stream(repo: _Repo) -> bytes:
    out = bytearray()
    for n, c in enumerate(repo.commits, 1):
        msg = c.message.encode() + b"\n"
        out += f"commit refs/heads/{c.branch}\nmark :{n}\n".encode()
        out += f"author {c.author[0]} <{c.author[1]}> {c.time} +0000\n".encode()
        out += f"committer {c.committer[0]} <{c.committer[1]}> {c.time} +0000\n".encode()
        out += b"data %d\n" % len(msg) + msg
        if c.parent is not None:
            out += b"from :%d\n" % (c.parent + 1)
        out += b"deleteall\n"
        for path in sorted(c.snapshot):
            data = c.snapshot[path]
            out += f"M 100644 inline {path}\n".encode() + b"data %d\n" % len(data) + data + b"\n"
        out += b"\n"
    return bytes(out)


def _write_repo(repo: _Repo, directory: str):
    git = gitio.git_executable()
    env = {**os.environ, "GIT_CONFIG_NOSYSTEM": "1"}
    subprocess.run([git, "init", "-q", "--bare", directory], check=True, env=env)
    subprocess.run([git, "-C", directory, "fast-import", "--quiet", "--date-format=raw"],
                   input=_fast_import_stream(repo), check=True, env=env, capture_output=True)
    with open(os.path.join(directory, "HEAD"), "w") as fh:
        fh.write(f"ref: refs/heads/{repo.main}\n")


def generate_synthetic_corpus(spec: SynthSpec, out_dir: str) -> str:
    """Create the repositories, ``manifest.jsonl`` and ``ground_truth.json``; return the manifest path."""
    if os.path.exists(out_dir) and os.listdir(out_dir):
        raise OutDirNotEmpty(f"{out_dir} is not empty")
    sim = _Simulation(spec)
    sim.build()
    repo_root = os.path.join(out_dir, "repos")
    os.makedirs(repo_root, exist_ok=True)
    for repo in sim.repos:
        _write_repo(repo, os.path.join(repo_root, f"{repo.repo_id}.git"))
    for cid, src in sim.clone_ids:
        shutil.copytree(os.path.join(repo_root, f"{sim.repos[src].repo_id}.git"),
                        os.path.join(repo_root, f"{cid}.git"))
    lang_of = defaultdict(list)
    for fam in spec.families:
        for vp in fam.variants:
            lang_of[vp.repo].append(fam.language)
    manifest = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest, "w", encoding="utf-8") as fh:
        for repo in sim.all_repos():
            langs = lang_of.get(repo.origin)
            entry = {"repo_id": repo.repo_id, "path": f"repos/{repo.repo_id}.git",
                     "language": max(sorted(set(langs)), key=langs.count) if langs else "other",
                     "fork": False}
            if sim.repos[repo.origin].default_branch_in_manifest:
                entry["default_branch"] = repo.main
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "synth_spec.json"), "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "ground_truth.json"), "w", encoding="utf-8") as fh:
        json.dump(sim.truth(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def observed(families, keywords=("fix",), max_unique: int = 2) -> list[dict]:
    """Pipeline results reduced to the ground-truth family shape, for comparison."""
    from .opportunity import find_unique_commits, propose_opportunities

    out = []
    for fam in families:
        rows = [(v, None) for v in fam.variants] + [(d.variant, d.reason) for d in fam.dropped]
        rows.sort(key=lambda x: x[0].key)
        unique = sorted((u.repo_id, u.path, u.commit.message.rstrip("\n"))
                        for u in find_unique_commits(fam))
        opp = None
        if fam.family_type == "non_zero_variance":
            rep = propose_opportunities(fam, keywords, max_unique)
            if rep is not None:
                opp = {"unique_commits": sorted([u.repo_id, u.path, u.commit.message.rstrip("\n")]
                                                for u in rep.unique_commits),
                       "candidate_targets": rep.candidate_targets}
        out.append({
            "blob": fam.family_id,
            "size": fam.size,
            "stratum": fam.stratum,
            "family_type": fam.family_type,
            "variants": [{"repo_id": v.repo_id, "path": v.path, "status": v.status,
                          "dropped": reason, "post_seed_commits": v.commit_count}
                         for v, reason in rows],
            "unique_commits": [list(u) for u in unique],
            "opportunity": opp,
        })
    return out
