"""Persisted vocabulary mapping external string ids to dense integer indices.

Index 0 of every namespace is reserved for out-of-vocabulary lookups, so
embedding tables are sized ``count + 1`` and unknown ids hit row 0.

File format ``vocab.v1``: namespace, external id, index (tab-separated).
"""

from __future__ import annotations

from pathlib import Path

from .data import FileFormatError
from .validation import ValidationError, check_safe_token

NAMESPACES = ("video", "author", "product", "category", "token", "user")
OOV_INDEX = 0


class Vocabulary:
    def __init__(self) -> None:
        self._maps: dict[str, dict[str, int]] = {ns: {} for ns in NAMESPACES}
        self._rev: dict[str, list[str]] = {ns: [""] for ns in NAMESPACES}

    def add(self, namespace: str, external: str) -> int:
        table = self._maps[namespace]
        idx = table.get(external)
        if idx is None:
            check_safe_token(external, f"{namespace} id")
            idx = len(self._rev[namespace])
            table[external] = idx
            self._rev[namespace].append(external)
        return idx

    def lookup(self, namespace: str, external: str) -> int:
        """Map an external id to its index; unknown ids map to OOV_INDEX."""
        return self._maps[namespace].get(external, OOV_INDEX)

    def require(self, namespace: str, external: str) -> int:
        idx = self._maps[namespace].get(external)
        if idx is None:
            raise ValidationError(f"unknown {namespace} id {external!r}")
        return idx

    def external(self, namespace: str, index: int) -> str:
        rev = self._rev[namespace]
        if not 0 < index < len(rev):
            raise ValidationError(f"index {index} out of range for namespace {namespace!r}")
        return rev[index]

    def size(self, namespace: str) -> int:
        """Number of embedding rows needed: known ids plus the OOV row."""
        return len(self._rev[namespace])

    def save(self, path: Path) -> None:
        lines = ["#schema=vocab.v1"]
        for ns in NAMESPACES:
            for ext, idx in sorted(self._maps[ns].items(), key=lambda kv: kv[1]):
                lines.append(f"{ns}\t{ext}\t{idx}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        vocab = cls()
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0] != "#schema=vocab.v1":
            raise FileFormatError(f"{path}: expected '#schema=vocab.v1' header")
        for line in lines[1:]:
            if not line:
                continue
            ns, ext, idx_s = line.split("\t")
            idx = int(idx_s)
            if idx != len(vocab._rev[ns]):
                raise FileFormatError(f"{path}: non-contiguous index {idx} in namespace {ns}")
            vocab._maps[ns][ext] = idx
            vocab._rev[ns].append(ext)
        return vocab
