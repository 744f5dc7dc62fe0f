"""Zero-shot grounding: learn one linear alignment M through a caption encoder.

Every caption token vector is pushed through M, an encoder squeezes the mapped
sequence into one sentence vector, and the pair (M, encoder) is trained to
regress the caption's image vector under MSE.  Only M is kept afterwards; a
grounded space is then ``g = t @ M`` for every word in the vocabulary,
including words that never appeared in a caption.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .crossmodal import LinearMap, fit_linear_map
from .embeddings import EmbeddingSpace, ImageVectorStore
from .errors import ConvergenceError, DimensionMismatch, FormatError, GroundingError

ENCODER_KINDS = ("mean-pool", "gated-recurrent")


@dataclass(frozen=True)
class CaptionCorpus:
    samples: tuple[tuple[str, tuple[str, ...]], ...]
    split: str = "train"

    def __post_init__(self):
        samples = tuple((img, tuple(toks)) for img, toks in self.samples)
        for img, toks in samples:
            if not toks:
                raise GroundingError(f"empty caption for image {img!r}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)


def load_captions(path, split: str = "train") -> CaptionCorpus:
    """TSV ``image_id<TAB>caption text``; captions are split on whitespace."""
    path = Path(path)
    samples = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            img, sep, text = line.rstrip("\n").partition("\t")
            if not sep or not img.strip():
                raise FormatError("expected image_id<TAB>caption", path, lineno)
            tokens = tuple(text.split())
            if not tokens:
                raise FormatError("empty caption", path, lineno)
            samples.append((img.strip(), tokens))
    if not samples:
        raise FormatError("empty caption file", path)
    return CaptionCorpus(tuple(samples), split)


@dataclass(frozen=True)
class EncoderConfig:
    encoder_kind: str = "mean-pool"
    hidden_dim: int = 32
    epochs: int = 200
    batch_size: int = 16
    learning_rate: float = 0.01
    seed: int = 0
    early_stop_patience: int = 20
    grounded_dim: int | None = None  # None -> same as the textual dim

    def __post_init__(self):
        if self.encoder_kind not in ENCODER_KINDS:
            raise GroundingError(f"encoder_kind must be one of {ENCODER_KINDS}")
        if self.hidden_dim < 1 or self.batch_size < 1:
            raise GroundingError("hidden_dim and batch_size must be positive")
        if self.epochs < 0 or self.early_stop_patience < 0:
            raise GroundingError("epochs and early_stop_patience must be non-negative")
        if not self.learning_rate > 0:
            raise GroundingError("learning_rate must be positive")
        if self.grounded_dim is not None and self.grounded_dim < 1:
            raise GroundingError("grounded_dim must be positive")


@dataclass
class TrainingLog:
    initial_train_mse: float = math.nan
    initial_val_mse: float = math.nan
    rows: list[tuple[int, float, float]] = field(default_factory=list)
    best_epoch: int = 0

    def best_val_mse(self) -> float:
        if self.best_epoch == 0:
            return self.initial_val_mse
        return self.rows[self.best_epoch - 1][2]

    def write_csv(self, path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_mse", "val_mse"])
            w.writerow([0, f"{self.initial_train_mse:.6g}", f"{self.initial_val_mse:.6g}"])
            for epoch, tr, va in self.rows:
                w.writerow([epoch, f"{tr:.6g}", f"{va:.6g}"])


def _torch():
    import torch
    return torch


def _resolve(corpus: CaptionCorpus, space: EmbeddingSpace, images: ImageVectorStore):
    """Token index lists (OOV dropped) and target matrix for a corpus."""
    index = {w: i for i, w in enumerate(space.keys)}
    seqs, targets = [], []
    for img, toks in corpus.samples:
        ids = [index[t] for t in toks if t in index]
        if not ids:
            raise GroundingError(f"caption for {img!r} has no in-vocabulary token: {' '.join(toks)!r}")
        if img not in images:
            raise GroundingError(f"caption references unknown image {img!r}")
        seqs.append(ids)
        targets.append(images[img])
    return seqs, np.array(targets)


class CaptionEncoder:
    """Mean-pool or single-layer GRU over mapped token vectors, plus an optional linear head.

    Mean-pool has no head when the grounded dim equals the image dim, which
    keeps it an exact linear model of M.
    """

    def __init__(self, kind: str, d_mapped: int, d_image: int, hidden_dim: int):
        torch = _torch()
        self.kind = kind
        self.gru = None
        self.head = None
        if kind == "gated-recurrent":
            self.gru = torch.nn.GRU(d_mapped, hidden_dim, batch_first=True, dtype=torch.float64)
            self.head = torch.nn.Linear(hidden_dim, d_image, dtype=torch.float64)
        elif d_mapped != d_image:
            self.head = torch.nn.Linear(d_mapped, d_image, dtype=torch.float64)

    def parameters(self):
        params = []
        for mod in (self.gru, self.head):
            if mod is not None:
                params.extend(mod.parameters())
        return params

    def sentence(self, mapped, lengths):
        """mapped: (batch, max_len, d) padded; lengths: (batch,) long tensor."""
        torch = _torch()
        if self.kind == "mean-pool":
            mask = (torch.arange(mapped.shape[1])[None, :] < lengths[:, None]).to(mapped.dtype)
            return (mapped * mask[:, :, None]).sum(dim=1) / lengths[:, None].to(mapped.dtype)
        packed = torch.nn.utils.rnn.pack_padded_sequence(
            mapped, lengths, batch_first=True, enforce_sorted=False)
        _, h = self.gru(packed)
        return h[-1]

    def forward(self, mapped, lengths):
        s = self.sentence(mapped, lengths)
        return self.head(s) if self.head is not None else s


def _pad(seqs):
    torch = _torch()
    lengths = torch.tensor([len(s) for s in seqs], dtype=torch.long)
    out = torch.zeros((len(seqs), int(lengths.max())), dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, :len(s)] = torch.tensor(s, dtype=torch.long)
    return out, lengths


def _initial_map(space, seqs, targets, d_out, rng):
    d_in = space.dim
    if d_out == d_in:
        return np.eye(d_in)
    if d_out == targets.shape[1]:
        means = np.array([space.matrix[s].mean(axis=0) for s in seqs])
        return fit_linear_map(means, targets, 1e-2 * float(np.sum(means ** 2)) / d_in + 1e-12).matrix
    bound = 1.0 / math.sqrt(d_in)
    return rng.uniform(-bound, bound, size=(d_in, d_out))


def train_alignment(space: EmbeddingSpace, corpus: CaptionCorpus, val: CaptionCorpus | None,
                    images: ImageVectorStore, cfg: EncoderConfig = EncoderConfig(),
                    return_encoder: bool = False):
    """Fit M (and a throwaway encoder) by mini-batch Adam on caption -> image MSE.

    Returns ``(LinearMap, TrainingLog)``; the map is the one from the epoch with
    the lowest validation MSE (train MSE when no validation corpus is given).
    Epoch 0 in the log is the untrained initialization.
    """
    torch = _torch()
    if len(corpus) == 0:
        raise GroundingError("empty training corpus")
    seqs, targets = _resolve(corpus, space, images)
    val_data = _resolve(val, space, images) if val is not None and len(val) else None
    d_out = cfg.grounded_dim or space.dim
    rng = np.random.default_rng(cfg.seed)
    M0 = _initial_map(space, seqs, targets, d_out, rng)

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        E = torch.tensor(space.matrix, dtype=torch.float64)
        M = torch.nn.Parameter(torch.tensor(M0, dtype=torch.float64))
        encoder = CaptionEncoder(cfg.encoder_kind, d_out, images.dim, cfg.hidden_dim)
        opt = torch.optim.Adam([M] + encoder.parameters(), lr=cfg.learning_rate)
        gen = torch.Generator().manual_seed(cfg.seed)

        train_idx, train_len = _pad(seqs)
        train_y = torch.tensor(targets, dtype=torch.float64)
        if val_data is not None:
            val_idx, val_len = _pad(val_data[0])
            val_y = torch.tensor(val_data[1], dtype=torch.float64)

        def mse(idx, lengths, y):
            return ((encoder.forward(E[idx] @ M, lengths) - y) ** 2).mean()

        def evaluate():
            with torch.no_grad():
                tr = float(mse(train_idx, train_len, train_y))
                va = float(mse(val_idx, val_len, val_y)) if val_data is not None else tr
            return tr, va

        log = TrainingLog()
        log.initial_train_mse, log.initial_val_mse = evaluate()
        best_val, best_M, stale = log.initial_val_mse, M0.copy(), 0
        n = len(seqs)
        for epoch in range(1, cfg.epochs + 1):
            perm = torch.randperm(n, generator=gen)
            for start in range(0, n, cfg.batch_size):
                b = perm[start:start + cfg.batch_size]
                opt.zero_grad()
                loss = mse(train_idx[b], train_len[b], train_y[b])
                if not torch.isfinite(loss):
                    raise ConvergenceError(f"non-finite training loss at epoch {epoch}")
                loss.backward()
                opt.step()
            tr, va = evaluate()
            if not (math.isfinite(tr) and math.isfinite(va)):
                raise ConvergenceError(f"training diverged at epoch {epoch} (non-finite MSE)")
            log.rows.append((epoch, tr, va))
            if va < best_val:
                best_val, best_M, stale = va, M.detach().numpy().copy(), 0
                log.best_epoch = epoch
            else:
                stale += 1
                if cfg.early_stop_patience and stale >= cfg.early_stop_patience:
                    break

    lmap = LinearMap(best_M, mode="zsg-alignment", ridge=0.0)
    if return_encoder:
        return lmap, log, encoder
    return lmap, log


def ground(space: EmbeddingSpace, lmap: LinearMap) -> EmbeddingSpace:
    """Grounded copy of ``space``: every vector replaced by ``t @ M``."""
    if space.dim != lmap.d_in:
        raise DimensionMismatch(f"space dim {space.dim} != map d_in {lmap.d_in}")
    return EmbeddingSpace(space.keys, space.matrix @ lmap.matrix, name=f"{space.name}-grounded")


def encode_caption(lmap: LinearMap, space: EmbeddingSpace, caption: Sequence[str],
                   encoder: CaptionEncoder | None = None) -> np.ndarray:
    """Sentence representation of a caption (before any output head).

    Without an encoder the mean-pool rule is used.
    """
    torch = _torch()
    vecs = [space.get(t) for t in caption]
    vecs = [v for v in vecs if v is not None]
    if not vecs:
        raise GroundingError("caption has no in-vocabulary token")
    mapped = lmap.apply(np.stack(vecs))
    if encoder is None or encoder.kind == "mean-pool":
        return mapped.mean(axis=0)
    with torch.no_grad():
        x = torch.tensor(mapped[None, :, :], dtype=torch.float64)
        return encoder.sentence(x, torch.tensor([len(vecs)])).numpy()[0]
