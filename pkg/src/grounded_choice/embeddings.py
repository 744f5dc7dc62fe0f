"""Word-embedding and image-vector stores plus the similarity primitives.

Vectors are kept un-normalized; cosine normalizes on the fly.  Lookup is
exact and case-sensitive, so a multiword label such as ``chocolate_sauce``
is found only if that exact token exists in the vocabulary.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateKey,
    FormatError,
    GroundingError,
    NoUsableLabels,
    OutOfVocabulary,
)


class _VectorStore:
    """Immutable key -> vector mapping backed by one contiguous matrix."""

    kind = "vector store"

    def __init__(self, keys: Sequence[str], matrix, name: str = ""):
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise DimensionMismatch(f"{self.kind}: expected a 2-d matrix, got shape {matrix.shape}")
        if len(keys) != matrix.shape[0]:
            raise DimensionMismatch(
                f"{self.kind}: {len(keys)} keys but {matrix.shape[0]} vectors")
        if matrix.shape[1] < 1:
            raise DimensionMismatch(f"{self.kind}: dimension must be positive")
        if not np.all(np.isfinite(matrix)):
            raise GroundingError(f"{self.kind}: non-finite vector component")
        index = {}
        for i, key in enumerate(keys):
            if not isinstance(key, str) or not key:
                raise GroundingError(f"{self.kind}: keys must be non-empty strings")
            if key in index:
                raise DuplicateKey(f"{self.kind}: duplicate key {key!r}")
            index[key] = i
        matrix.setflags(write=False)
        self._keys = tuple(keys)
        self._index = MappingProxyType(index)
        self._matrix = matrix
        self.name = name

    @classmethod
    def from_dict(cls, entries: Mapping[str, Sequence[float]], name: str = ""):
        keys = list(entries)
        if not keys:
            raise GroundingError(f"{cls.kind}: no entries")
        return cls(keys, np.array([entries[k] for k in keys], dtype=np.float64), name=name)

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def keys(self) -> tuple[str, ...]:
        return self._keys

    @property
    def matrix(self) -> np.ndarray:
        """Read-only (n, dim) view, rows in ``keys`` order."""
        return self._matrix

    def __len__(self):
        return len(self._keys)

    def __contains__(self, key):
        return key in self._index

    def __iter__(self):
        return iter(self._keys)

    def get(self, key: str) -> np.ndarray | None:
        i = self._index.get(key)
        return None if i is None else self._matrix[i]

    def __getitem__(self, key: str) -> np.ndarray:
        v = self.get(key)
        if v is None:
            raise OutOfVocabulary(f"{key!r} not in {self.name or self.kind}")
        return v

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, n={len(self)}, dim={self.dim})"


class EmbeddingSpace(_VectorStore):
    """Vocabulary of words mapped to dense vectors (textual or grounded)."""

    kind = "embedding space"

    @property
    def vocab(self) -> tuple[str, ...]:
        return self._keys


class ImageVectorStore(_VectorStore):
    """Image id -> feature vector, as produced by an external CNN."""

    kind = "image store"


def vector(space: _VectorStore, word: str) -> np.ndarray | None:
    """Exact-match lookup; ``None`` when the word is absent."""
    return space.get(word)


def load_embeddings(path, expected_dim: int | None = None, name: str | None = None) -> EmbeddingSpace:
    """Read a whitespace-separated ``word v1 ... vd`` text file."""
    path = Path(path)
    words, rows = [], []
    seen = {}
    dim = expected_dim
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise FormatError("no vector components", path, lineno)
            if len(values) != dim:
                raise FormatError(
                    f"dimension mismatch: expected {dim} components, got {len(values)}",
                    path, lineno)
            if word in seen:
                raise FormatError(
                    f"duplicate word {word!r} (first seen on line {seen[word]})", path, lineno)
            try:
                row = [float(v) for v in values]
            except ValueError as exc:
                raise FormatError(f"non-numeric component ({exc})", path, lineno) from None
            if not all(math.isfinite(v) for v in row):
                raise FormatError("non-finite component", path, lineno)
            seen[word] = lineno
            words.append(word)
            rows.append(row)
    if not words:
        raise FormatError("empty embedding file", path)
    return EmbeddingSpace(words, np.array(rows), name=name or path.stem)


def save_embeddings(space: EmbeddingSpace, path) -> None:
    # repr() round-trips float64 exactly
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for word, row in zip(space.keys, space.matrix):
            fh.write(word + " " + " ".join(repr(float(v)) for v in row) + "\n")


def load_image_vectors(path) -> ImageVectorStore:
    """Read a CSV with header ``image_id,v1,...,vd``."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "image_id" or len(header) < 2:
            raise FormatError("header must be image_id,v1,...,vd", path, 1)
        dim = len(header) - 1
        ids, rows = [], []
        for lineno, rec in enumerate(reader, 2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) - 1 != dim:
                raise FormatError(f"expected {dim} components, got {len(rec) - 1}", path, lineno)
            try:
                rows.append([float(c) for c in rec[1:]])
            except ValueError as exc:
                raise FormatError(f"non-numeric component ({exc})", path, lineno) from None
            ids.append(rec[0].strip())
    if not ids:
        raise FormatError("no image vectors", path)
    try:
        return ImageVectorStore(ids, np.array(rows), name=path.stem)
    except GroundingError as exc:
        raise FormatError(str(exc), path) from None


def save_image_vectors(store: ImageVectorStore, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id"] + [f"v{i + 1}" for i in range(store.dim)])
        for key, row in zip(store.keys, store.matrix):
            w.writerow([key] + [repr(float(v)) for v in row])


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cosine of vectors with shapes {a.shape} and {b.shape}")
    # rescale by max-abs first so huge or tiny magnitudes don't overflow
    sa = np.max(np.abs(a))
    sb = np.max(np.abs(b))
    if sa == 0 or sb == 0:
        raise GroundingError("cosine undefined for a zero-norm vector")
    a = a / sa
    b = b / sb
    value = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return min(1.0, max(-1.0, value))


def mean_label_similarity(space: EmbeddingSpace, target: str, labels: Iterable[str]) -> tuple[float, int]:
    """Mean cosine between ``target`` and every in-vocabulary label.

    Returns ``(mean, used)``; labels missing from the space are skipped.
    """
    t = space.get(target)
    if t is None:
        raise OutOfVocabulary(f"target {target!r} not in {space.name or 'space'}")
    sims = [cosine(t, v) for v in (space.get(lab) for lab in labels) if v is not None]
    if not sims:
        raise NoUsableLabels(f"no label for target {target!r} is in the vocabulary")
    return math.fsum(sims) / len(sims), len(sims)


def cosine_scores(store: _VectorStore, query) -> np.ndarray:
    """Cosine of ``query`` against every row of ``store`` (in ``store.keys`` order)."""
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (store.dim,):
        raise DimensionMismatch(f"query has shape {q.shape}, store dim is {store.dim}")
    qn = np.linalg.norm(q)
    if qn == 0:
        raise GroundingError("cosine undefined for a zero-norm query")
    m = store.matrix
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0):
        bad = store.keys[int(np.argmax(norms == 0))]
        raise GroundingError(f"zero-norm vector for {bad!r}")
    return np.clip((m @ q) / (norms * qn), -1.0, 1.0)


def nearest_neighbors(store: _VectorStore, query, k: int) -> list[tuple[str, float]]:
    """Top-k ids by descending cosine; ties go to the lexicographically smaller id."""
    if k < 1:
        raise GroundingError("k must be >= 1")
    if len(store) == 0:
        raise GroundingError("empty store")
    scores = cosine_scores(store, query)
    keys = store.keys
    order = sorted(range(len(keys)), key=lambda i: (-scores[i], keys[i]))
    return [(keys[i], float(scores[i])) for i in order[:k]]
