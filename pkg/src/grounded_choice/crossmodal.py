"""Text-to-vision linear mapping with prototype and exemplar retrieval.

Two training regimes share one ridge solver:

* prototype: one row per (word, class-mean image vector)
* exemplar:  one row per (word, image), the word vector repeated for every image

Retrieval maps a word into image space and then picks an existing training
image, either directly (exemplar) or through the nearest class prototype.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .embeddings import EmbeddingSpace, ImageVectorStore, nearest_neighbors
from .errors import DimensionMismatch, FormatError, GroundingError, OutOfVocabulary, SingularSystem

MODES = ("prototype", "exemplar", "zsg-alignment")
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class LinearMap:
    matrix: np.ndarray
    mode: str = "prototype"
    ridge: float = 0.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2 or 0 in m.shape:
            raise DimensionMismatch(f"map matrix must be 2-d and non-empty, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise GroundingError("map matrix has non-finite entries")
        if self.mode not in MODES:
            raise GroundingError(f"unknown map mode {self.mode!r}")
        if not self.ridge >= 0:
            raise GroundingError("ridge must be non-negative")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def d_in(self) -> int:
        return self.matrix.shape[0]

    @property
    def d_out(self) -> int:
        return self.matrix.shape[1]

    def apply(self, x) -> np.ndarray:
        """Row-vector product ``x @ M`` (x may be a single vector or a stack)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.d_in:
            raise DimensionMismatch(f"input dim {x.shape[-1]} != map d_in {self.d_in}")
        return x @ self.matrix


def save_map(lmap: LinearMap, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{lmap.d_in} {lmap.d_out} {lmap.mode} {lmap.ridge!r}\n")
        for row in lmap.matrix:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_map(path) -> LinearMap:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty map file", path)
    head = lines[0].split()
    if len(head) != 4:
        raise FormatError("header must be 'd_in d_out mode lambda'", path, 1)
    try:
        d_in, d_out, mode, lam = int(head[0]), int(head[1]), head[2], float(head[3])
    except ValueError:
        raise FormatError("bad header values", path, 1) from None
    if len(lines) - 1 != d_in:
        raise FormatError(f"expected {d_in} matrix rows, found {len(lines) - 1}", path)
    rows = []
    for i, ln in enumerate(lines[1:], 2):
        try:
            row = [float(v) for v in ln.split()]
        except ValueError:
            raise FormatError("non-numeric matrix entry", path, i) from None
        if len(row) != d_out:
            raise FormatError(f"expected {d_out} columns, got {len(row)}", path, i)
        rows.append(row)
    try:
        return LinearMap(np.array(rows), mode=mode, ridge=lam)
    except GroundingError as exc:
        raise FormatError(str(exc), path) from None


@dataclass(frozen=True)
class Prototype:
    vector: np.ndarray
    members: tuple[str, ...]


@dataclass(frozen=True)
class PrototypeTable:
    entries: Mapping[str, Prototype] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, cls):
        return self.entries[cls]

    @property
    def classes(self) -> list[str]:
        return sorted(self.entries)


def load_membership(path) -> dict[str, list[str]]:
    """Read a ``class,image_id`` CSV into class -> ordered member ids."""
    path = Path(path)
    out: dict[str, list[str]] = {}
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or [h.strip() for h in header[:2]] != ["class", "image_id"]:
            raise FormatError("header must be class,image_id", path, 1)
        for lineno, rec in enumerate(reader, 2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 2:
                raise FormatError("expected 2 fields", path, lineno)
            out.setdefault(rec[0].strip(), []).append(rec[1].strip())
    if not out:
        raise FormatError("no class memberships", path)
    return out


def build_prototypes(store: ImageVectorStore, membership: Mapping[str, Sequence[str]]) -> PrototypeTable:
    entries = {}
    for cls, members in membership.items():
        members = tuple(members)
        if not members:
            raise GroundingError(f"class {cls!r} has no member images")
        missing = [m for m in members if m not in store]
        if missing:
            raise GroundingError(f"class {cls!r}: unknown image id(s) {missing[:3]}")
        vecs = np.stack([store[m] for m in members])
        # shifted mean: exact when all members are identical
        proto = vecs[0] + (vecs - vecs[0]).mean(axis=0)
        proto.setflags(write=False)
        entries[cls] = Prototype(proto, members)
    return PrototypeTable(entries)


def default_ridge(T) -> float:
    """``1e-2 * trace(T'T) / d_in``."""
    T = np.asarray(T, dtype=np.float64)
    return 1e-2 * float(np.sum(T * T)) / T.shape[1]


def fit_linear_map(T, V, ridge: float, mode: str = "prototype") -> LinearMap:
    """Solve ``min ||T M - V||^2 + ridge ||M||^2`` in closed form.

    Uses a Cholesky factorization of ``T'T + ridge I``.  At ``ridge == 0`` the
    Gram matrix must have condition number below 1e12.
    """
    T = np.asarray(T, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if T.ndim != 2 or V.ndim != 2:
        raise DimensionMismatch("T and V must be 2-d")
    if T.shape[0] != V.shape[0]:
        raise DimensionMismatch(f"T has {T.shape[0]} rows but V has {V.shape[0]}")
    if T.shape[0] < 1:
        raise GroundingError("need at least one training row")
    if not (np.all(np.isfinite(T)) and np.all(np.isfinite(V))):
        raise GroundingError("non-finite training data")
    if not ridge >= 0:
        raise GroundingError("ridge must be non-negative")
    gram = T.T @ T
    if ridge == 0:
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise SingularSystem(
                f"T'T is singular or ill-conditioned (condition number {cond:.3g}) "
                "at lambda=0; use a positive ridge lambda")
    A = gram + ridge * np.eye(T.shape[1])
    try:
        factor = scipy.linalg.cho_factor(A)
    except np.linalg.LinAlgError:
        raise SingularSystem("T'T + lambda I is not positive definite; increase lambda") from None
    M = scipy.linalg.cho_solve(factor, T.T @ V)
    return LinearMap(M, mode=mode, ridge=float(ridge))


def condition_number(T, ridge: float = 0.0) -> float:
    T = np.asarray(T, dtype=np.float64)
    return float(np.linalg.cond(T.T @ T + ridge * np.eye(T.shape[1])))


def training_rows(space: EmbeddingSpace, store: ImageVectorStore, membership, protos: PrototypeTable | None,
                  mode: str):
    """Assemble aligned (T, V) matrices for a mapping fit.

    Classes whose name is not in the vocabulary are skipped and reported.
    Rows follow sorted class order, then member order.
    """
    T, V, skipped = [], [], []
    for cls in sorted(membership):
        t = space.get(cls)
        if t is None:
            skipped.append(cls)
            continue
        if mode == "prototype":
            T.append(t)
            V.append(protos[cls].vector)
        elif mode == "exemplar":
            for img in membership[cls]:
                T.append(t)
                V.append(store[img])
        else:
            raise GroundingError(f"unknown training mode {mode!r}")
    if not T:
        raise GroundingError("no class word is in the embedding vocabulary")
    return np.array(T), np.array(V), skipped


def predict_image_vector(lmap: LinearMap, space: EmbeddingSpace, word: str) -> np.ndarray:
    t = space.get(word)
    if t is None:
        raise OutOfVocabulary(f"{word!r} not in {space.name or 'space'}")
    if space.dim != lmap.d_in:
        raise DimensionMismatch(f"space dim {space.dim} != map d_in {lmap.d_in}")
    return lmap.apply(t)


def retrieve_exemplar(lmap: LinearMap, space: EmbeddingSpace, word: str, training: ImageVectorStore) -> str:
    pred = predict_image_vector(lmap, space, word)
    return nearest_neighbors(training, pred, 1)[0][0]


def retrieve_prototype(lmap: LinearMap, space: EmbeddingSpace, word: str, protos: PrototypeTable,
                       training: ImageVectorStore, within_class: bool = True) -> str:
    """Nearest prototype first, then the training image nearest to that prototype.

    With ``within_class`` (the default) the second step only considers the
    winning class's member images; otherwise every training image competes.
    """
    if len(protos) == 0:
        raise GroundingError("empty prototype table")
    pred = predict_image_vector(lmap, space, word)
    classes = protos.classes
    proto_store = ImageVectorStore(classes, np.stack([protos[c].vector for c in classes]))
    best_class = nearest_neighbors(proto_store, pred, 1)[0][0]
    proto = protos[best_class]
    if not proto.members:
        raise GroundingError(f"class {best_class!r} has no members")
    if within_class:
        members = sorted(set(proto.members))
        candidates = ImageVectorStore(members, np.stack([training[m] for m in members]))
    else:
        candidates = training
    return nearest_neighbors(candidates, proto.vector, 1)[0][0]


def residual_norm(lmap: LinearMap, T, V) -> float:
    return float(np.linalg.norm(np.asarray(T) @ lmap.matrix - np.asarray(V)))


__all__ = [
    "LinearMap", "Prototype", "PrototypeTable", "build_prototypes", "fit_linear_map",
    "default_ridge", "condition_number", "training_rows", "predict_image_vector",
    "retrieve_exemplar", "retrieve_prototype", "load_map", "save_map", "load_membership",
    "residual_norm",
]
