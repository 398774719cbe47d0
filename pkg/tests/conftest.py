import hashlib
import os
import subprocess

import pytest

BASE_TS = 1_500_000_000  # 2017-07-14
DAY = 86400


def git_blob_id(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


class Repo:
    """A throwaway work-tree repository driven through porcelain commands."""

    def __init__(self, path, branch="master"):
        self.path = str(path)
        self.clock = BASE_TS
        os.makedirs(self.path, exist_ok=True)
        self.git("init", "-q", "-b", branch)

    def git(self, *args, env=None, input=None) -> str:
        full_env = {
            **os.environ,
            "GIT_CONFIG_NOSYSTEM": "1",
            "HOME": self.path,
            "GIT_AUTHOR_NAME": "Alice", "GIT_AUTHOR_EMAIL": "alice@example.org",
            "GIT_COMMITTER_NAME": "Alice", "GIT_COMMITTER_EMAIL": "alice@example.org",
            **(env or {}),
        }
        out = subprocess.run(["git", "-C", self.path, *args], env=full_env, input=input,
                             capture_output=True, text=True)
        if out.returncode:
            raise RuntimeError(f"git {' '.join(args)}: {out.stderr}")
        return out.stdout.strip()

    def write(self, relpath, content):
        full = os.path.join(self.path, relpath)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        with open(full, "wb") as fh:
            fh.write(content.encode() if isinstance(content, str) else content)

    def commit(self, message, files=None, when=None, author=None, committer=None, remove=()) -> str:
        for p, c in (files or {}).items():
            self.write(p, c)
        for p in remove:
            self.git("rm", "-q", p)
        self.git("add", "-A")
        self.clock = when if when is not None else self.clock + DAY
        env = {"GIT_AUTHOR_DATE": f"@{self.clock} +0000", "GIT_COMMITTER_DATE": f"@{self.clock} +0000"}
        if author:
            env.update(GIT_AUTHOR_NAME=author[0], GIT_AUTHOR_EMAIL=author[1])
        if committer:
            env.update(GIT_COMMITTER_NAME=committer[0], GIT_COMMITTER_EMAIL=committer[1])
        self.git("commit", "-q", "--allow-empty", "-m", message, env=env)
        return self.head()

    def mv(self, src, dst, message="move", when=None) -> str:
        os.makedirs(os.path.dirname(os.path.join(self.path, dst)) or self.path, exist_ok=True)
        self.git("mv", src, dst)
        return self.commit(message, when=when)

    def cherry_pick(self, other: "Repo", commit: str, when=None) -> str:
        self.git("fetch", "-q", other.path, "HEAD")
        self.clock = when if when is not None else self.clock + DAY
        env = {"GIT_COMMITTER_DATE": f"@{self.clock} +0000",
               "GIT_COMMITTER_NAME": "Bob", "GIT_COMMITTER_EMAIL": "bob@example.org"}
        self.git("cherry-pick", "--allow-empty", commit, env=env)
        return self.head()

    def head(self) -> str:
        return self.git("rev-parse", "HEAD")


@pytest.fixture
def make_repo(tmp_path):
    counter = iter(range(10_000))

    def make(name=None, branch="master"):
        return Repo(tmp_path / (name or f"repo{next(counter)}"), branch)

    return make
