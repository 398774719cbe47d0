"""Read-only access to local git repositories through the git command line.

Every query shells out to the standard git tools. Bulk object reads go
through one long-lived ``git cat-file --batch`` process per repository.
"""

from __future__ import annotations

import hashlib
import os
import re
import subprocess
import threading
from dataclasses import asdict, dataclass
from typing import Iterable

GIT_ENV_VAR = "METAMAINT_GIT"
EMPTY_BLOB = "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"

_HEX40 = re.compile(r"[0-9a-f]{40}")

# Neutralise user configuration that changes output formats.
_GIT_OPTS = [
    "-c", "core.quotepath=off",
    "-c", "log.showSignature=false",
    "-c", "diff.noprefix=false",
    "-c", "diff.mnemonicPrefix=false",
    "-c", "core.abbrev=40",
    "--literal-pathspecs",
]

_REGULAR_MODES = (b"100644", b"100755", b"100664")
_TREE_MODE = b"40000"


class GitError(Exception):
    pass


class RepoUnreadable(GitError):
    pass


class ObjectNotFound(GitError):
    pass


class NoBranch(GitError):
    pass


class EmptyRepo(GitError):
    pass


def git_executable() -> str:
    return os.environ.get(GIT_ENV_VAR) or "git"


def blob_hash(content: bytes) -> str:
    """Object name git assigns to ``content`` stored as a blob."""
    h = hashlib.sha1(b"blob %d\0" % len(content))
    h.update(content)
    return h.hexdigest()


def is_object_id(value: str) -> bool:
    return bool(_HEX40.fullmatch(value or ""))


@dataclass(frozen=True)
class CommitMeta:
    commit_id: str
    author_name: str
    author_email: str
    committer_name: str
    committer_email: str
    author_time: int
    commit_time: int
    message: str

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CommitMeta":
        return cls(**d)


_LOG_FORMAT = "%H%x00%an%x00%ae%x00%cn%x00%ce%x00%at%x00%ct%x00%B"
_LOG_FIELDS = 8


def _parse_log(out: bytes) -> list[CommitMeta]:
    parts = out.split(b"\0")
    if parts and parts[-1] in (b"", b"\n"):
        parts.pop()
    commits = []
    for i in range(0, len(parts) - _LOG_FIELDS + 1, _LOG_FIELDS):
        f = [p.decode("utf-8", "replace") for p in parts[i:i + _LOG_FIELDS]]
        commits.append(CommitMeta(
            commit_id=f[0].strip(),
            author_name=f[1], author_email=f[2],
            committer_name=f[3], committer_email=f[4],
            author_time=int(f[5]), commit_time=int(f[6]),
            message=f[7],
        ))
    return commits


class _CatFile:
    """One ``git cat-file --batch`` channel; callers serialise via the lock."""

    def __init__(self, repo: "RepoHandle", mode: str):
        self.lock = threading.Lock()
        self.proc = subprocess.Popen(
            [git_executable(), *_GIT_OPTS, "-C", str(repo.local_path), "cat-file", mode],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
        )

    def header(self, name: str) -> list[bytes]:
        if "\n" in name:
            return [name.encode(), b"missing"]
        self.proc.stdin.write(name.encode("utf-8", "surrogateescape") + b"\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise GitError("cat-file channel closed unexpectedly")
        line = line.rstrip(b"\n")
        if line.endswith((b" missing", b" ambiguous")):
            return [line, b"missing"]
        return line.split(b" ")

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            self.proc.wait()


class RepoHandle:
    """A repository on local disk (work tree or bare) identified by ``repo_id``."""

    def __init__(self, repo_id: str, local_path: str | os.PathLike):
        self.repo_id = repo_id
        self.local_path = os.fspath(local_path)
        self._batch: _CatFile | None = None
        self._check: _CatFile | None = None
        self._lock = threading.Lock()
        self._validated = False
        self._branches: dict[str, bool] = {}

    def __repr__(self):
        return f"RepoHandle({self.repo_id!r}, {self.local_path!r})"

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        with self._lock:
            for ch in (self._batch, self._check):
                if ch is not None:
                    ch.close()
            self._batch = self._check = None

    def run(self, *args: str, input: bytes | None = None, check: bool = True) -> bytes:
        cmd = [git_executable(), *_GIT_OPTS, "-C", self.local_path, *args]
        try:
            proc = subprocess.run(cmd, input=input, capture_output=True)
        except OSError as e:
            raise GitError(f"cannot run git: {e}") from e
        if check and proc.returncode != 0:
            msg = proc.stderr.decode("utf-8", "replace").strip()
            raise GitError(f"{' '.join(args[:2])} failed in {self.local_path}: {msg}")
        return proc.stdout

    def validate(self):
        if self._validated:
            return
        if not os.path.isdir(self.local_path):
            raise RepoUnreadable(f"{self.repo_id}: no such directory {self.local_path}")
        try:
            fmt = self.run("rev-parse", "--show-object-format").strip()
        except GitError as e:
            raise RepoUnreadable(f"{self.repo_id}: {e}") from e
        if fmt != b"sha1":
            raise RepoUnreadable(f"{self.repo_id}: unsupported object format {fmt.decode()}")
        self._validated = True

    def _channel(self, mode: str) -> _CatFile:
        with self._lock:
            if mode == "--batch":
                if self._batch is None:
                    self._batch = _CatFile(self, mode)
                return self._batch
            if self._check is None:
                self._check = _CatFile(self, mode)
            return self._check

    def read_object(self, name: str) -> tuple[str, bytes]:
        """Return (type, content) for any object name git can resolve."""
        ch = self._channel("--batch")
        with ch.lock:
            hdr = ch.header(name)
            if len(hdr) != 3:
                raise ObjectNotFound(f"{self.repo_id}: {name} not found")
            size = int(hdr[2])
            data = ch.proc.stdout.read(size)
            ch.proc.stdout.read(1)
        return hdr[1].decode(), data

    def object_info(self, name: str) -> tuple[str, str] | None:
        """Return (object id, type) for ``name``, or None if it does not resolve."""
        ch = self._channel("--batch-check")
        with ch.lock:
            hdr = ch.header(name)
        if len(hdr) != 3:
            return None
        return hdr[0].decode(), hdr[1].decode()


def _tree_entries(data: bytes) -> Iterable[tuple[bytes, bytes, str]]:
    i, n = 0, len(data)
    while i < n:
        sp = data.index(b" ", i)
        nul = data.index(b"\0", sp)
        mode, name = data[i:sp], data[sp + 1:nul]
        oid = data[nul + 1:nul + 21].hex()
        i = nul + 21
        yield mode, name, oid


def enumerate_blobs(repo: RepoHandle) -> set[tuple[str, str]]:
    """All (blob id, path) pairs reachable from any ref.

    Walks every distinct root tree, so a blob stored at several paths is
    reported once per path. Only regular files are included.
    """
    repo.validate()
    roots = repo.run("log", "--all", "--format=%T").split()
    pairs: set[tuple[str, str]] = set()
    seen: set[tuple[str, str]] = set()
    stack = [(r.decode(), "") for r in dict.fromkeys(roots)]
    while stack:
        tree, prefix = stack.pop()
        if (tree, prefix) in seen:
            continue
        seen.add((tree, prefix))
        kind, data = repo.read_object(tree)
        if kind != "tree":
            continue
        for mode, name, oid in _tree_entries(data):
            path = prefix + name.decode("utf-8", "surrogateescape")
            if mode == _TREE_MODE:
                stack.append((oid, path + "/"))
            elif mode in _REGULAR_MODES:
                pairs.add((oid, path))
    return pairs


def read_blob(repo: RepoHandle, blob: str) -> bytes:
    if not is_object_id(blob):
        raise ObjectNotFound(f"{repo.repo_id}: {blob!r} is not an object id")
    kind, data = repo.read_object(blob)
    if kind != "blob":
        raise ObjectNotFound(f"{repo.repo_id}: {blob} is a {kind}, not a blob")
    return data


def branch_exists(repo: RepoHandle, branch: str) -> bool:
    # read-only handles: a branch seen once stays valid for the handle's lifetime
    known = repo._branches.get(branch)
    if known is None:
        out = repo.run("rev-parse", "--verify", "-q", f"refs/heads/{branch}^{{commit}}", check=False)
        known = repo._branches[branch] = bool(out.strip())
    return known


def resolve_main_branch(repo: RepoHandle, override: str | None = None) -> str:
    if override:
        return override
    repo.validate()
    target = repo.run("symbolic-ref", "-q", "HEAD", check=False).decode().strip()
    if target.startswith("refs/heads/"):
        name = target[len("refs/heads/"):]
        if branch_exists(repo, name):
            return name
    for name in ("master", "main"):
        if branch_exists(repo, name):
            return name
    raise NoBranch(f"{repo.repo_id}: no main branch (HEAD, master, main all absent)")


def _rev(repo: RepoHandle, branch: str) -> str:
    return f"refs/heads/{branch}" if branch_exists(repo, branch) else branch


def head_commit(repo: RepoHandle, branch: str) -> str:
    out = repo.run("rev-parse", "--verify", "-q", f"{_rev(repo, branch)}^{{commit}}", check=False)
    oid = out.decode().strip()
    if not oid:
        raise NoBranch(f"{repo.repo_id}: branch {branch!r} does not exist")
    return oid


def path_history(repo: RepoHandle, branch: str, path: str) -> list[CommitMeta]:
    """Commits on ``branch`` that change ``path``, oldest first. Renames are not followed."""
    out = repo.run("log", "-z", "--no-renames", "--topo-order", "--reverse",
                   f"--format={_LOG_FORMAT}", _rev(repo, branch), "--", path)
    return _parse_log(out)


def blob_at(repo: RepoHandle, rev: str, path: str) -> str | None:
    info = repo.object_info(f"{rev}:{path}")
    if info is None or info[1] != "blob":
        return None
    return info[0]


def head_blob(repo: RepoHandle, branch: str, path: str) -> str | None:
    return blob_at(repo, _rev(repo, branch), path)


def _patch_ids(repo: RepoHandle, diff: bytes) -> dict[str, str]:
    if not diff.strip():
        return {}
    out = repo.run("patch-id", "--stable", input=diff)
    ids = {}
    for line in out.decode().splitlines():
        pid, cid = line.split()
        ids[cid] = pid
    return ids


def _commit_id(commit: CommitMeta | str) -> str:
    return commit.commit_id if isinstance(commit, CommitMeta) else commit


def patch_identity(repo: RepoHandle, commit: CommitMeta | str, path: str) -> str | None:
    """Stable patch id of ``commit``'s diff restricted to ``path`` (None if untouched)."""
    cid = _commit_id(commit)
    diff = repo.run("show", "-p", "--format=commit %H", "--no-renames",
                    "--diff-merges=first-parent", cid, "--", path)
    return _patch_ids(repo, diff).get(cid)


def patch_identities(repo: RepoHandle, branch: str, path: str) -> dict[str, str]:
    """Patch ids for every commit on ``branch`` touching ``path``, in one pass."""
    diff = repo.run("log", "-p", "--format=commit %H", "--no-renames",
                    "--diff-merges=first-parent", _rev(repo, branch), "--", path)
    return _patch_ids(repo, diff)


def commit_patch_identity(repo: RepoHandle, commit: CommitMeta | str) -> str | None:
    """Patch id over the whole commit; kept for diagnostics."""
    cid = _commit_id(commit)
    diff = repo.run("show", "-p", "--format=commit %H", "--no-renames",
                    "--diff-merges=first-parent", cid)
    return _patch_ids(repo, diff).get(cid)


def commit_stats(repo: RepoHandle) -> tuple[list[int], set[str]]:
    """Sorted commit times and distinct committer emails over all refs."""
    repo.validate()
    out = repo.run("log", "--all", "--format=%ct %ce")
    times, committers = [], set()
    for line in out.decode("utf-8", "replace").splitlines():
        ts, _, email = line.partition(" ")
        times.append(int(ts))
        committers.add(email.strip().lower())
    times.sort()
    return times, committers


def last_commit_time(repo: RepoHandle) -> int:
    times, _ = commit_stats(repo)
    if not times:
        raise EmptyRepo(f"{repo.repo_id}: no commits")
    return times[-1]
