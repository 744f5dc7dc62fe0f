"""Trial measures, the Max choice rule and condition-level reports.

A trial shows one target word with two images: the one retrieved by the
cross-modal model ("predicted") and a random control.  Each image comes with
up to ten object labels.  The Max rule picks whichever image's labels are
closer, on average, to the target word.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .embeddings import EmbeddingSpace, ImageVectorStore, cosine, mean_label_similarity
from .errors import FormatError, GroundingError, NoUsableLabels, OutOfVocabulary
from .stats import TestResult, binomial_test, sign_test

log = logging.getLogger(__name__)

WORD_TYPES = ("abstract", "concrete")
DISTANCES = ("far", "near", "max")
CELLS = (
    ("abstract", "far"),
    ("abstract", "near"),
    ("concrete", "far"),
    ("concrete", "near"),
    ("concrete", "max"),
)
CELL_LABELS = ("A.Far", "A.Near", "C.Far", "C.Near", "C.Max")
CHOICES = ("predicted", "random")
MAX_LABELS = 10

TRIAL_HEADER = ["trial_id", "target", "word_type", "distance", "pred_image_id", "rand_image_id",
                "pred_labels", "rand_labels", "is_catch"]
RESPONSE_HEADER = ["participant_id", "trial_id", "choice"]


@dataclass(frozen=True)
class Trial:
    trial_id: str
    target: str
    word_type: str
    distance: str
    pred_image_id: str
    rand_image_id: str
    pred_labels: tuple[str, ...]
    rand_labels: tuple[str, ...]
    is_catch: bool = False

    def __post_init__(self):
        if self.word_type not in WORD_TYPES:
            raise GroundingError(f"trial {self.trial_id}: word_type must be one of {WORD_TYPES}")
        if self.distance not in DISTANCES:
            raise GroundingError(f"trial {self.trial_id}: distance must be one of {DISTANCES}")
        if self.distance == "max" and self.word_type != "concrete":
            raise GroundingError(f"trial {self.trial_id}: distance=max requires a concrete word")
        if len(self.pred_labels) > MAX_LABELS or len(self.rand_labels) > MAX_LABELS:
            raise GroundingError(f"trial {self.trial_id}: more than {MAX_LABELS} labels on an image")

    @property
    def cell(self) -> tuple[str, str]:
        return (self.word_type, self.distance)

    def swapped(self) -> "Trial":
        return Trial(self.trial_id, self.target, self.word_type, self.distance,
                     self.rand_image_id, self.pred_image_id, self.rand_labels, self.pred_labels,
                     self.is_catch)


def _labels(field_value: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in field_value.split(";") if x.strip())


def _flag(value: str) -> bool:
    v = value.strip().lower()
    if v in ("", "0", "false", "no"):
        return False
    if v in ("1", "true", "yes"):
        return True
    raise ValueError(f"bad boolean {value!r}")


def load_trials(path) -> list[Trial]:
    path = Path(path)
    trials = []
    seen = set()
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError("empty trials file", path)
        missing = [h for h in TRIAL_HEADER[:-1] if h not in reader.fieldnames]
        if missing:
            raise FormatError(f"missing columns {missing}", path, 1)
        for lineno, rec in enumerate(reader, 2):
            try:
                t = Trial(
                    trial_id=rec["trial_id"].strip(),
                    target=rec["target"].strip(),
                    word_type=rec["word_type"].strip(),
                    distance=rec["distance"].strip(),
                    pred_image_id=rec["pred_image_id"].strip(),
                    rand_image_id=rec["rand_image_id"].strip(),
                    pred_labels=_labels(rec["pred_labels"] or ""),
                    rand_labels=_labels(rec["rand_labels"] or ""),
                    is_catch=_flag(rec.get("is_catch") or ""),
                )
            except (GroundingError, ValueError, AttributeError) as exc:
                raise FormatError(str(exc), path, lineno) from None
            if t.trial_id in seen:
                raise FormatError(f"duplicate trial_id {t.trial_id!r}", path, lineno)
            seen.add(t.trial_id)
            trials.append(t)
    if not trials:
        raise FormatError("no trials", path)
    return trials


def save_trials(trials: Iterable[Trial], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_HEADER)
        for t in trials:
            w.writerow([t.trial_id, t.target, t.word_type, t.distance, t.pred_image_id,
                        t.rand_image_id, ";".join(t.pred_labels), ";".join(t.rand_labels),
                        int(t.is_catch)])


@dataclass(frozen=True)
class ResponseSet:
    rows: tuple[tuple[str, str, str], ...]
    setup: str = "prototype"

    def __post_init__(self):
        seen = set()
        for pid, tid, choice in self.rows:
            if choice not in CHOICES:
                raise GroundingError(f"choice must be one of {CHOICES}, got {choice!r}")
            if (pid, tid) in seen:
                raise GroundingError(f"duplicate response for participant {pid!r}, trial {tid!r}")
            seen.add((pid, tid))

    def __len__(self):
        return len(self.rows)


def load_responses(path, setup: str = "prototype") -> ResponseSet:
    path = Path(path)
    rows = []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(h not in reader.fieldnames for h in RESPONSE_HEADER):
            raise FormatError("header must be participant_id,trial_id,choice", path, 1)
        for rec in reader:
            rows.append((rec["participant_id"].strip(), rec["trial_id"].strip(),
                         rec["choice"].strip()))
    try:
        return ResponseSet(tuple(rows), setup)
    except GroundingError as exc:
        raise FormatError(str(exc), path) from None


def save_responses(responses: ResponseSet, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESPONSE_HEADER)
        w.writerows(responses.rows)


@dataclass(frozen=True)
class TrialMeasures:
    pred_sim: float
    rand_sim: float
    inter_image_sim: float
    pred_n_obj: int
    rand_n_obj: int


def compute_trial_measures(trial: Trial, space: EmbeddingSpace, images: ImageVectorStore) -> TrialMeasures:
    if trial.target not in space:
        raise OutOfVocabulary(f"trial {trial.trial_id}: target {trial.target!r} out of vocabulary")
    for img in (trial.pred_image_id, trial.rand_image_id):
        if img not in images:
            raise GroundingError(f"trial {trial.trial_id}: unknown image id {img!r}")
    try:
        pred_sim, pred_n = mean_label_similarity(space, trial.target, trial.pred_labels)
    except NoUsableLabels:
        raise NoUsableLabels(f"trial {trial.trial_id}: no usable label on the predicted image") from None
    try:
        rand_sim, rand_n = mean_label_similarity(space, trial.target, trial.rand_labels)
    except NoUsableLabels:
        raise NoUsableLabels(f"trial {trial.trial_id}: no usable label on the random image") from None
    inter = cosine(images[trial.pred_image_id], images[trial.rand_image_id])
    return TrialMeasures(pred_sim, rand_sim, inter, pred_n, rand_n)


def max_select(m: TrialMeasures) -> str:
    """``predicted`` iff pred_sim >= rand_sim."""
    if m.pred_sim == m.rand_sim:
        log.info("Max tie (pred_sim == rand_sim == %r); choosing predicted", m.pred_sim)
    return "predicted" if m.pred_sim >= m.rand_sim else "random"


@dataclass
class Simulation:
    """Measures and Max choices for every usable trial, in trial-id order."""

    trials: list[Trial]
    measures: dict[str, TrialMeasures]
    choices: dict[str, str]
    exclusions: list[tuple[str, str]] = field(default_factory=list)

    @property
    def used(self) -> list[Trial]:
        return [t for t in self.trials if t.trial_id in self.measures]


def simulate(trials: Sequence[Trial], space: EmbeddingSpace, images: ImageVectorStore,
             include_catch: bool = False) -> Simulation:
    """Run the Max model over a trial list.

    Trials without usable labels (or, when excluded, catch trials) are
    dropped and listed with a reason instead of failing the whole run.
    """
    ordered = sorted(trials, key=lambda t: t.trial_id)
    measures, choices, exclusions = {}, {}, []
    for t in ordered:
        if t.is_catch and not include_catch:
            exclusions.append((t.trial_id, "catch trial"))
            continue
        try:
            m = compute_trial_measures(t, space, images)
        except NoUsableLabels as exc:
            log.warning("excluding %s", exc)
            exclusions.append((t.trial_id, str(exc)))
            continue
        measures[t.trial_id] = m
        choices[t.trial_id] = max_select(m)
    return Simulation(list(ordered), measures, choices, exclusions)


@dataclass(frozen=True)
class ConditionReport:
    cells: Mapping[tuple[str, str], float]
    mean: float
    participant_mean: float | None = None
    delta: float | None = None
    participant_cells: Mapping[tuple[str, str], float] | None = None

    def row(self) -> list[float]:
        return [self.cells[c] for c in CELLS if c in self.cells]


def _cell_mean(cells: Mapping) -> float:
    present = [cells[c] for c in CELLS if c in cells]
    if not present:
        raise GroundingError("no design cell has data")
    return math.fsum(present) / len(present)


def report_from_cells(cells, participant=None) -> ConditionReport:
    """Aggregate per-cell percentages into a report.

    ``cells`` and ``participant`` may be mappings keyed by cell or sequences in
    the canonical A.Far, A.Near, C.Far, C.Near, C.Max order.  ``participant``
    may also be a single number (the participants' mean).
    """
    cells = _as_cells(cells)
    mean = _cell_mean(cells)
    if participant is None:
        return ConditionReport(cells, mean)
    if isinstance(participant, (int, float)):
        pmean, pcells = float(participant), None
    else:
        pcells = _as_cells(participant)
        pmean = _cell_mean(pcells)
    return ConditionReport(cells, mean, pmean, abs(mean - pmean), pcells)


def _as_cells(values) -> dict:
    if isinstance(values, Mapping):
        return {c: float(values[c]) for c in CELLS if c in values}
    values = list(values)
    if len(values) != len(CELLS):
        raise GroundingError(f"expected {len(CELLS)} cell values, got {len(values)}")
    return {c: float(v) for c, v in zip(CELLS, values)}


def selection_percentages(sim: Simulation) -> dict:
    """Percent of trials per cell where Max picked the predicted image."""
    counts: dict = {}
    for t in sim.used:
        hit, n = counts.get(t.cell, (0, 0))
        counts[t.cell] = (hit + (sim.choices[t.trial_id] == "predicted"), n + 1)
    return {c: 100.0 * counts[c][0] / counts[c][1] for c in CELLS if c in counts}


def virtual_report(trials: Sequence[Trial], space: EmbeddingSpace, images: ImageVectorStore,
                   participant_means, include_catch: bool = False) -> ConditionReport:
    """Treat an embedding space as one virtual participant."""
    sim = simulate(trials, space, images, include_catch)
    cells = selection_percentages(sim)
    empty = [lab for c, lab in zip(CELLS, CELL_LABELS) if c not in cells]
    if empty:
        raise GroundingError(f"design cell(s) without usable trials: {', '.join(empty)}")
    return report_from_cells(cells, participant_means)


def participant_percentages(responses: ResponseSet, trials: Sequence[Trial]) -> dict:
    """Per-cell percent of predicted choices, averaged over participants."""
    cell_of = {t.trial_id: t.cell for t in trials}
    per: dict = {}
    for pid, tid, choice in responses.rows:
        if tid not in cell_of:
            continue
        key = (cell_of[tid], pid)
        hit, n = per.get(key, (0, 0))
        per[key] = (hit + (choice == "predicted"), n + 1)
    out = {}
    for c in CELLS:
        pcts = [100.0 * h / n for (cell, _), (h, n) in sorted(per.items()) if cell == c]
        if pcts:
            out[c] = math.fsum(pcts) / len(pcts)
    return out


def accuracy_vs_participants(model_choices: Mapping[str, str], responses: ResponseSet,
                             trials: Sequence[Trial]) -> ConditionReport:
    """Percent of (participant, trial) rows where the model matches the participant."""
    cell_of = {t.trial_id: t.cell for t in trials}
    counts: dict = {}
    for pid, tid, choice in responses.rows:
        if tid not in model_choices:
            raise GroundingError(f"response for trial {tid!r} has no model choice")
        if tid not in cell_of:
            raise GroundingError(f"response for unknown trial {tid!r}")
        hit, n = counts.get(cell_of[tid], (0, 0))
        counts[cell_of[tid]] = (hit + (model_choices[tid] == choice), n + 1)
    cells = {c: 100.0 * counts[c][0] / counts[c][1] for c in CELLS if c in counts}
    return report_from_cells(cells)


def above_chance_check(model_choices: Mapping[str, str] | Sequence[str]) -> TestResult:
    values = list(model_choices.values()) if isinstance(model_choices, Mapping) else list(model_choices)
    if not values:
        raise GroundingError("no model choices to test")
    successes = sum(1 for c in values if c == "predicted")
    return binomial_test(successes, len(values), 0.5)


def compare_reports(textual: ConditionReport, grounded: ConditionReport, mode: str = "closer"):
    """Per-cell sign test between a textual and a grounded report.

    ``closer``: a success is a cell where the grounded value is nearer the
    participants' cell value.  ``larger``: grounded value strictly larger.
    Ties are dropped.  Returns ``(successes, n, p_value)``; the p-value is
    ``None`` when every cell is tied.
    """
    succ = n = 0
    for c in CELLS:
        if c not in textual.cells or c not in grounded.cells:
            continue
        if mode == "closer":
            ref = textual.participant_cells or grounded.participant_cells
            if ref is None or c not in ref:
                raise GroundingError("'closer' comparison needs participant cell values")
            dt, dg = abs(textual.cells[c] - ref[c]), abs(grounded.cells[c] - ref[c])
        elif mode == "larger":
            dt, dg = -textual.cells[c], -grounded.cells[c]
        else:
            raise GroundingError(f"unknown comparison mode {mode!r}")
        if dg == dt:
            continue
        n += 1
        succ += dg < dt
    if n == 0:
        return 0, 0, None
    return succ, n, sign_test(succ, n)
