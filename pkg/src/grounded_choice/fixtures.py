"""Seeded synthetic data sets for tests, demos and the acceptance run.

Nothing here touches real corpora; everything is generated from a seed so
the files written by ``write_fixture`` are byte-identical across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .embeddings import EmbeddingSpace, ImageVectorStore, cosine_scores, save_embeddings, save_image_vectors
from .simulate import CELLS, ResponseSet, Trial, save_responses, save_trials
from .zsg import CaptionCorpus


@dataclass
class BehaviorFixture:
    space: EmbeddingSpace
    images: ImageVectorStore
    trials: list[Trial]


def behavior_fixture(seed: int = 0, per_cell: int = 20, dim: int = 16, vocab_size: int = 300,
                     min_labels: int = 3, max_labels: int = 8) -> BehaviorFixture:
    """Trials whose predicted-image labels are the target's nearest vocabulary
    neighbours and whose random-image labels are its farthest ones.

    Label counts vary per image and up to two out-of-vocabulary labels
    (multiword CNN-style names) are mixed in, so the object counts vary too.
    """
    rng = np.random.default_rng(seed)
    words = [f"w{i:04d}" for i in range(vocab_size)]
    space = EmbeddingSpace(words, rng.normal(size=(vocab_size, dim)), name="synthetic")
    n_trials = per_cell * len(CELLS)
    img_ids = [f"img{i:04d}" for i in range(2 * n_trials)]
    images = ImageVectorStore(img_ids, rng.normal(size=(2 * n_trials, 12)), name="synthetic-images")
    targets = rng.choice(vocab_size, size=n_trials, replace=False)
    trials = []
    for i, ti in enumerate(targets):
        target = words[ti]
        scores = cosine_scores(space, space.matrix[ti])
        order = [j for j in np.argsort(-scores, kind="stable") if j != ti]
        n_near, n_far = rng.integers(min_labels, max_labels + 1, size=2)
        near = [words[j] for j in order[:n_near]]
        far = [words[j] for j in order[::-1][:n_far]]
        near += [f"oov_{i}_p{j}" for j in range(int(rng.integers(0, 3)))]
        far += [f"oov_{i}_r{j}" for j in range(int(rng.integers(0, 3)))]
        wt, dist = CELLS[i % len(CELLS)]
        trials.append(Trial(f"t{i:03d}", target, wt, dist, img_ids[2 * i], img_ids[2 * i + 1],
                            tuple(near), tuple(far)))
    return BehaviorFixture(space, images, trials)


def synthetic_responses(trials, measures, n_participants: int = 20, seed: int = 0,
                        setup: str = "prototype") -> ResponseSet:
    """Participants who prefer the predicted image with a logistic function of
    the similarity gap, shifted for concrete words."""
    rng = np.random.default_rng(seed)
    rows = []
    for p in range(n_participants):
        for t in trials:
            m = measures.get(t.trial_id)
            if m is None:
                continue
            eta = (1.5 * (m.pred_sim - m.rand_sim) - 1.2 + 0.6 * (t.word_type == "concrete")
                   + 0.15 * (m.pred_n_obj - 5) + 0.8 * np.sin(4 * m.inter_image_sim))
            choice = "predicted" if rng.uniform() < expit(eta) else "random"
            rows.append((f"p{p:02d}", t.trial_id, choice))
    return ResponseSet(tuple(rows), setup)


def crossmodal_fixture(seed: int = 0, n_classes: int = 3, per_class: int = 6, d_text: int = 6,
                       d_image: int = 5, extra_words: int = 4):
    """Word vectors for a few classes plus clustered image vectors per class."""
    rng = np.random.default_rng(seed)
    classes = [f"class{c}" for c in range(n_classes)]
    words = classes + [f"word{i}" for i in range(extra_words)]
    space = EmbeddingSpace(words, rng.normal(size=(len(words), d_text)), name="text")
    centers = rng.normal(size=(n_classes, d_image)) * 3
    ids, vecs, membership = [], [], {}
    for c, cls in enumerate(classes):
        for j in range(per_class):
            iid = f"{cls}_img{j}"
            ids.append(iid)
            vecs.append(centers[c] + 0.3 * rng.normal(size=d_image))
            membership.setdefault(cls, []).append(iid)
    return space, ImageVectorStore(ids, np.array(vecs), name="images"), membership


def caption_fixture(seed: int = 0, n_images: int = 10, captions_per_image: int = 5,
                    val_per_image: int = 2, dim: int = 8, vocab_size: int = 30):
    """Toy caption corpus: each image vector is a fixed linear image of the
    mean of its three content words; captions add one or two filler words."""
    rng = np.random.default_rng(seed)
    words = [f"tok{i:02d}" for i in range(vocab_size)]
    E = rng.normal(size=(vocab_size, dim))
    space = EmbeddingSpace(words, E, name="toy-text")
    M_true = np.eye(dim) + 0.6 * rng.normal(size=(dim, dim))
    content = [rng.choice(vocab_size, size=3, replace=False) for _ in range(n_images)]
    img_ids = [f"im{i:02d}" for i in range(n_images)]
    images = ImageVectorStore(img_ids, np.array([E[c].mean(axis=0) @ M_true for c in content]),
                              name="toy-images")

    def captions(count):
        out = []
        for i in range(n_images):
            for _ in range(count):
                filler = rng.choice(vocab_size, size=int(rng.integers(1, 3)), replace=False)
                toks = [words[j] for j in content[i]] + [words[j] for j in filler]
                order = rng.permutation(len(toks))
                out.append((img_ids[i], tuple(toks[j] for j in order)))
        return out

    train = CaptionCorpus(tuple(captions(captions_per_image)), "train")
    val = CaptionCorpus(tuple(captions(val_per_image)), "validation")
    return space, images, train, val


def _write_captions(corpus: CaptionCorpus, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for img, toks in corpus.samples:
            fh.write(f"{img}\t{' '.join(toks)}\n")


def write_fixture(out_dir, seed: int = 0) -> dict[str, Path]:
    """Write a complete synthetic input bundle and return the file paths."""
    from .simulate import simulate

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    beh = behavior_fixture(seed)
    paths["embeddings"] = out / "embeddings.txt"
    save_embeddings(beh.space, paths["embeddings"])
    paths["images"] = out / "image_vectors.csv"
    save_image_vectors(beh.images, paths["images"])
    paths["trials"] = out / "trials.csv"
    save_trials(beh.trials, paths["trials"])
    sim = simulate(beh.trials, beh.space, beh.images)
    paths["responses"] = out / "responses.csv"
    save_responses(synthetic_responses(beh.trials, sim.measures, seed=seed), paths["responses"])

    space, store, membership = crossmodal_fixture(seed)
    paths["cm_embeddings"] = out / "cm_embeddings.txt"
    save_embeddings(space, paths["cm_embeddings"])
    paths["cm_images"] = out / "cm_image_vectors.csv"
    save_image_vectors(store, paths["cm_images"])
    paths["membership"] = out / "membership.csv"
    with paths["membership"].open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("class,image_id\n")
        for cls in sorted(membership):
            for iid in membership[cls]:
                fh.write(f"{cls},{iid}\n")

    tspace, timages, train, val = caption_fixture(seed)
    paths["toy_embeddings"] = out / "toy_embeddings.txt"
    save_embeddings(tspace, paths["toy_embeddings"])
    paths["toy_images"] = out / "toy_image_vectors.csv"
    save_image_vectors(timages, paths["toy_images"])
    paths["captions"] = out / "captions_train.tsv"
    _write_captions(train, paths["captions"])
    paths["val_captions"] = out / "captions_val.tsv"
    _write_captions(val, paths["val_captions"])

    paths["benchmark"] = out / "benchmark.tsv"
    rng = np.random.default_rng(seed + 1)
    with paths["benchmark"].open("w", encoding="utf-8", newline="\n") as fh:
        seen = set()
        while len(seen) < 40:
            a, b = sorted(rng.choice(len(beh.space), size=2, replace=False))
            if (a, b) in seen:
                continue
            seen.add((a, b))
            w1, w2 = beh.space.keys[a], beh.space.keys[b]
            score = 5 + 5 * float(np.dot(beh.space[w1], beh.space[w2])
                                  / np.linalg.norm(beh.space[w1]) / np.linalg.norm(beh.space[w2]))
            fh.write(f"{w1}\t{w2}\t{score + rng.normal(scale=0.5):.3f}\n")
    return paths
