"""flagtrace: compiler-flag provenance across a project's build history.

Reconstructs the effective flag set of every translation unit and link
target from build evidence (logs, compilation databases, wrapper
spools), stores immutable snapshots, diffs and audits them, and can
stamp the provenance into ELF binaries.
"""

__version__ = "0.1.0"
