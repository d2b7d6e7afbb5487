#!/usr/bin/env python
# _version.py
"""Translation of 'git describe' output into a PEP 440 version.

Handled forms:
0.1.0                    -> 0.1.0
0.1.0-3-g1a2b3c4         -> 0.1.0.post3
0.1.0-3-g1a2b3c4-dirty   -> 0.1.0.post3.dev
1a2b3c4                  -> 0.0.0.dev (no tag reachable)
"""

class Version():
    """Parsed version of the package."""

    def __init__(self, git_version: str):
        git_version = git_version.strip().lstrip("v")

        self.DIRTY = git_version.endswith("-dirty")

        if self.DIRTY:
            git_version = git_version[:-len("-dirty")]

        parts = git_version.split("-")
        release = parts[0].split(".")

        if not all([ _p.isdigit() for _p in release ]):
            # No tag, only an abbreviated commit
            release, parts, self.DIRTY = ["0", "0", "0"], [parts[0], None, parts[0]], True

        self.RELEASE = [ int(_p) for _p in release ] + [0] * (3 - len(release))
        self.POST = int(parts[1]) if len(parts) > 2 and parts[1] is not None else None
        self.COMMIT = parts[-1] if len(parts) > 1 else None


    def __str__(self):
        return ".".join([ str(_p) for _p in self.RELEASE ]) \
            + (".post%d" % self.POST if self.POST else "") \
            + (".dev" if self.DIRTY else "")


    def __repr__(self):
        return self.__str__() + (" (%s)" % self.COMMIT if self.COMMIT else "")
