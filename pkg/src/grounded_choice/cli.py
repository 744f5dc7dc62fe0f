"""Command-line pipeline: train-map, ground, simulate, fit-gam, bench, stats.

Every command reads a plain ``key = value`` config (``--config``) whose keys
match the long flag names with dashes replaced by underscores; flags given on
the command line win.  Outputs are staged and only copied into ``--out-dir``
once the whole command has succeeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import crossmodal, gam, simulate as sim, stats, zsg
from .embeddings import load_embeddings, load_image_vectors, save_embeddings
from .errors import FormatError, GroundingError, ValidationError

log = logging.getLogger("grounded_choice")

PATH_KEYS = ("embeddings", "grounded_embeddings", "images", "membership", "captions",
             "val_captions", "trials", "responses", "benchmark", "map", "gam_spec", "measures",
             "grounded_measures")
# keys that never influence results and so stay out of the config hash
UNHASHED = {"out_dir", "config", "command", "verbose"}


# ---------------------------------------------------------------- config


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key in PATH_KEYS and value:
            # relative paths resolve against the config file's directory
            value = ",".join(str((path.parent / v.strip()).resolve()) if not Path(v.strip()).is_absolute()
                             else v.strip() for v in value.split(","))
        out[key] = value
    return out


class Config(dict):
    """Merged config: file values overridden by explicit flags."""

    def get_str(self, key, default=None):
        v = self.get(key)
        return default if v in (None, "") else str(v)

    def get_float(self, key, default=None):
        v = self.get(key)
        if v in (None, ""):
            return default
        try:
            return float(v)
        except ValueError:
            raise ValidationError(f"{key} must be a number, got {v!r}") from None

    def get_int(self, key, default=None):
        v = self.get(key)
        if v in (None, ""):
            return default
        try:
            return int(v)
        except ValueError:
            raise ValidationError(f"{key} must be an integer, got {v!r}") from None

    def get_bool(self, key, default=False):
        v = self.get(key)
        if v in (None, ""):
            return default
        if isinstance(v, bool):
            return v
        return str(v).strip().lower() in ("1", "true", "yes", "on")

    def path(self, key, required=True):
        v = self.get_str(key)
        if v is None:
            if required:
                raise ValidationError(f"missing required input: {key}")
            return None
        p = Path(v)
        if not p.is_file():
            raise ValidationError(f"{key}: file not found: {p}")
        return p

    def paths(self, key):
        v = self.get_str(key)
        if v is None:
            raise ValidationError(f"missing required input: {key}")
        out = []
        for part in v.split(","):
            p = Path(part.strip())
            if not p.is_file():
                raise ValidationError(f"{key}: file not found: {p}")
            out.append(p)
        return out

    @property
    def seed(self) -> int:
        return self.get_int("seed", 0)

    def digest(self) -> str:
        items = sorted((k, str(v)) for k, v in self.items() if k not in UNHASHED and v not in (None, ""))
        return hashlib.sha256(json.dumps(items).encode()).hexdigest()[:16]

    def provenance(self) -> list[str]:
        return [f"config_hash={self.digest()} seed={self.seed}"]


def merge_config(args: argparse.Namespace) -> Config:
    cfg = Config()
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key, value in vars(args).items():
        if key in ("func",) or value is None:
            continue
        cfg[key] = value
    return cfg


# ---------------------------------------------------------------- output helpers


class Outputs:
    """Collects files in a staging directory; ``commit`` copies them out."""

    def __init__(self, cfg: Config):
        self.cfg = cfg
        self._tmp = tempfile.TemporaryDirectory(prefix="grounded-choice-")
        self.dir = Path(self._tmp.name)
        self.names: list[str] = []

    def path(self, name: str) -> Path:
        self.names.append(name)
        return self.dir / name

    def text(self, name: str, content: str) -> None:
        self.path(name).write_text(content, encoding="utf-8", newline="")

    def csv(self, name: str, rows, comment=True) -> None:
        buf = io.StringIO()
        if comment:
            for line in self.cfg.provenance():
                buf.write(f"# {line}\n")
        csv.writer(buf, lineterminator="\n").writerows(rows)
        self.text(name, buf.getvalue())

    def json(self, name: str, payload: dict) -> None:
        payload = {"config_hash": self.cfg.digest(), "seed": self.cfg.seed, **payload}
        self.text(name, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")

    def commit(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name in self.names:
            shutil.copyfile(self.dir / name, out / name)
            written.append(out / name)
        self._tmp.cleanup()
        return written

    def discard(self):
        self._tmp.cleanup()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return float(f"{x:.6g}") if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def g6(x) -> str:
    return f"{float(x):.6g}"


def f2(x) -> str:
    return f"{float(x):.2f}"


# ---------------------------------------------------------------- train-map


def cmd_train_map(cfg: Config, out: Outputs) -> dict:
    setup = cfg.get_str("setup", "prototype")
    space = load_embeddings(cfg.path("embeddings"))
    store = load_image_vectors(cfg.path("images"))
    membership = crossmodal.load_membership(cfg.path("membership"))
    protos = crossmodal.build_prototypes(store, membership)
    T, V, skipped = crossmodal.training_rows(space, store, membership, protos, setup)
    ridge = cfg.get_float("ridge")
    if ridge is None:
        ridge = crossmodal.default_ridge(T)
    lmap = crossmodal.fit_linear_map(T, V, ridge, mode=setup)
    crossmodal.save_map(lmap, out.path(f"map_{setup}.txt"))
    report = {
        "setup": setup,
        "ridge": ridge,
        "rows": int(T.shape[0]),
        "d_in": lmap.d_in,
        "d_out": lmap.d_out,
        "residual_norm": crossmodal.residual_norm(lmap, T, V),
        "condition_number": crossmodal.condition_number(T, ridge),
        "skipped_classes": skipped,
    }
    words = [w.strip() for w in (cfg.get_str("retrieve") or "").split(",") if w.strip()]
    if words:
        within = not cfg.get_bool("global_search")
        rows = [["word", "image_id"]]
        for w in words:
            if setup == "prototype":
                iid = crossmodal.retrieve_prototype(lmap, space, w, protos, store, within_class=within)
            else:
                iid = crossmodal.retrieve_exemplar(lmap, space, w, store)
            rows.append([w, iid])
        out.csv("retrievals.csv", rows)
    out.json("fit_report.json", report)
    return report


# ---------------------------------------------------------------- ground


def encoder_config(cfg: Config) -> zsg.EncoderConfig:
    try:
        return zsg.EncoderConfig(
            encoder_kind=cfg.get_str("encoder", "mean-pool"),
            hidden_dim=cfg.get_int("hidden_dim", 32),
            epochs=cfg.get_int("epochs", 200),
            batch_size=cfg.get_int("batch_size", 16),
            learning_rate=cfg.get_float("learning_rate", 0.01),
            seed=cfg.seed,
            early_stop_patience=cfg.get_int("patience", 20),
            grounded_dim=cfg.get_int("grounded_dim"),
        )
    except GroundingError as exc:
        raise ValidationError(str(exc)) from None


def cmd_ground(cfg: Config, out: Outputs) -> dict:
    space = load_embeddings(cfg.path("embeddings"))
    summary = {"vocab_size": len(space)}
    if cfg.get_str("map"):
        lmap = crossmodal.load_map(cfg.path("map"))
        summary["alignment"] = "loaded"
    else:
        ecfg = encoder_config(cfg)
        images = load_image_vectors(cfg.path("images"))
        train = zsg.load_captions(cfg.path("captions"), "train")
        val_path = cfg.path("val_captions", required=False)
        val = zsg.load_captions(val_path, "validation") if val_path else None
        lmap, tlog = zsg.train_alignment(space, train, val, images, ecfg)
        buf = out.path("training_log.csv")
        tlog.write_csv(buf)
        crossmodal.save_map(lmap, out.path("alignment.txt"))
        summary.update(alignment="trained", encoder=ecfg.encoder_kind, best_epoch=tlog.best_epoch,
                       epochs_run=len(tlog.rows), initial_val_mse=tlog.initial_val_mse,
                       best_val_mse=tlog.best_val_mse())
    grounded = zsg.ground(space, lmap)
    save_embeddings(grounded, out.path("grounded_embeddings.txt"))
    summary["grounded_dim"] = grounded.dim
    out.json("ground_summary.json", summary)
    return summary


# ---------------------------------------------------------------- simulate


def _participant_cells(cfg: Config, responses, trials):
    raw = cfg.get_str("participant_means")
    if raw:
        try:
            vals = [float(v) for v in raw.split(",") if v.strip()]
        except ValueError:
            raise ValidationError(f"participant_means must be numbers, got {raw!r}") from None
        if len(vals) == 1:
            return vals[0]
        if len(vals) != len(sim.CELLS):
            raise ValidationError("participant_means needs 1 or 5 values")
        return vals
    if responses is not None:
        return sim.participant_percentages(responses, trials)
    return None


def _spaces(cfg: Config):
    which = cfg.get_str("space", "textual")
    if which not in ("textual", "grounded", "both"):
        raise ValidationError("--space must be textual, grounded or both")
    out = []
    if which in ("textual", "both"):
        out.append(("textual", "embeddings"))
    if which in ("grounded", "both"):
        out.append(("grounded", "grounded_embeddings"))
    return out


MEASURE_HEADER = ["trial_id", "target", "word_type", "distance", "pred_sim", "rand_sim",
                  "inter_image_sim", "pred_n_obj", "rand_n_obj", "choice"]


def _measure_rows(result: sim.Simulation):
    rows = [MEASURE_HEADER]
    for t in result.used:
        m = result.measures[t.trial_id]
        rows.append([t.trial_id, t.target, t.word_type, t.distance, g6(m.pred_sim), g6(m.rand_sim),
                     g6(m.inter_image_sim), m.pred_n_obj, m.rand_n_obj, result.choices[t.trial_id]])
    return rows


def _table_rows(named_reports, participant=None):
    header = ["Embeddings"] + list(sim.CELL_LABELS) + ["Mean", "Delta"]
    rows = [header]
    for name, rep in named_reports:
        rows.append([name] + [f2(rep.cells[c]) if c in rep.cells else "NA" for c in sim.CELLS]
                    + [f2(rep.mean), f2(rep.delta) if rep.delta is not None else "NA"])
    if participant is not None:
        if isinstance(participant, float):
            rows.append(["Participants"] + ["NA"] * len(sim.CELLS) + [f2(participant), ""])
        else:
            prep = sim.report_from_cells(participant)
            rows.append(["Participants"] + [f2(prep.cells[c]) for c in sim.CELLS] + [f2(prep.mean), ""])
    return rows


def _report_dict(rep: sim.ConditionReport) -> dict:
    return {"cells": {lab: rep.cells.get(c) for c, lab in zip(sim.CELLS, sim.CELL_LABELS)},
            "mean": rep.mean, "participant_mean": rep.participant_mean, "delta": rep.delta}


def cmd_simulate(cfg: Config, out: Outputs) -> dict:
    trials = sim.load_trials(cfg.path("trials"))
    images = load_image_vectors(cfg.path("images"))
    setup = cfg.get_str("setup", "prototype")
    responses = None
    if cfg.get_str("responses"):
        responses = sim.load_responses(cfg.path("responses"), setup)
    include_catch = cfg.get_bool("include_catch")
    used_trials = [t for t in trials if include_catch or not t.is_catch]
    if not used_trials:
        raise ValidationError("no non-catch trials to simulate")
    participant = _participant_cells(cfg, responses, used_trials)
    summary = {"setup": setup, "spaces": {}}
    virtual, accuracy = [], []
    for label, key in _spaces(cfg):
        space = load_embeddings(cfg.path(key))
        result = sim.simulate(trials, space, images, include_catch)
        if not result.measures:
            raise GroundingError(f"{label}: every trial was excluded")
        cells = sim.selection_percentages(result)
        rep = sim.report_from_cells(cells, participant)
        test = sim.above_chance_check(result.choices)
        out.csv(f"measures_{label}.csv", _measure_rows(result))
        entry = {
            "virtual": _report_dict(rep),
            "above_chance": {"successes": test.successes, "n": test.n, "p_two_sided": test.p_value,
                             "p_one_sided_greater": test.p_greater},
            "excluded": [{"trial_id": tid, "reason": why} for tid, why in result.exclusions],
        }
        virtual.append((f"Max: {label}", rep))
        if responses is not None:
            acc = sim.accuracy_vs_participants(
                result.choices, _responses_for(responses, result), result.used)
            entry["accuracy"] = _report_dict(acc)
            accuracy.append((f"Max: {label}", acc))
        summary["spaces"][label] = entry
    out.csv("virtual_report.csv", _table_rows(virtual, participant))
    if accuracy:
        out.csv("accuracy_report.csv", _table_rows(accuracy, participant))
    if len(virtual) == 2:
        comp = {}
        if virtual[0][1].participant_cells is not None:
            s, n, p = sim.compare_reports(virtual[0][1], virtual[1][1], "closer")
            comp["virtual_closer"] = {"successes": s, "n": n, "p": p}
        if len(accuracy) == 2:
            s, n, p = sim.compare_reports(accuracy[0][1], accuracy[1][1], "larger")
            comp["accuracy_larger"] = {"successes": s, "n": n, "p": p}
        summary["sign_test_grounded_vs_textual"] = comp
    excl = [["space", "trial_id", "reason"]]
    for label, entry in summary["spaces"].items():
        excl.extend([label, e["trial_id"], e["reason"]] for e in entry["excluded"])
    out.csv("exclusions.csv", excl)
    out.json("simulate_summary.json", summary)
    return summary


def _responses_for(responses: sim.ResponseSet, result: sim.Simulation) -> sim.ResponseSet:
    """Drop responses to excluded trials; unknown trial ids still fail."""
    known = {t.trial_id for t in result.trials}
    orphans = sorted({tid for _, tid, _ in responses.rows if tid not in known})
    if orphans:
        raise GroundingError(f"responses reference unknown trial(s): {', '.join(orphans[:5])}")
    rows = tuple(r for r in responses.rows if r[1] in result.measures)
    return sim.ResponseSet(rows, responses.setup)


# ---------------------------------------------------------------- fit-gam


def load_measures(path) -> dict[str, dict]:
    out = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        missing = [h for h in MEASURE_HEADER if h not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path}: measures file lacks columns {missing}")
        for rec in reader:
            out[rec["trial_id"]] = rec
    if not out:
        raise ValidationError(f"{path}: no measure rows")
    return out


def _measures_inline(cfg: Config, key: str) -> dict[str, dict]:
    trials = sim.load_trials(cfg.path("trials"))
    images = load_image_vectors(cfg.path("images"))
    space = load_embeddings(cfg.path(key))
    result = sim.simulate(trials, space, images, cfg.get_bool("include_catch"))
    rows = _measure_rows(result)
    return {r[0]: dict(zip(MEASURE_HEADER, r)) for r in rows[1:]}


def gam_frame(measures: dict[str, dict], responses: sim.ResponseSet):
    """One row per response joined with its trial's measures; y = chose predicted."""
    cols = {k: [] for k in ("trial_id", "word_type", "distance", "pred_sim", "rand_sim", "inter_sim",
                            "pred_n_obj", "rand_n_obj")}
    y = []
    for _, tid, choice in sorted(responses.rows, key=lambda r: (r[1], r[0])):
        m = measures.get(tid)
        if m is None:
            continue
        cols["trial_id"].append(tid)
        cols["word_type"].append(m["word_type"])
        cols["distance"].append(m["distance"])
        cols["pred_sim"].append(float(m["pred_sim"]))
        cols["rand_sim"].append(float(m["rand_sim"]))
        cols["inter_sim"].append(float(m["inter_image_sim"]))
        cols["pred_n_obj"].append(float(m["pred_n_obj"]))
        cols["rand_n_obj"].append(float(m["rand_n_obj"]))
        y.append(1.0 if choice == "predicted" else 0.0)
    if not y:
        raise ValidationError("no response matches a measured trial")
    return cols, np.array(y)


def cmd_fit_gam(cfg: Config, out: Outputs) -> dict:
    setup = cfg.get_str("setup", "prototype")
    responses = sim.load_responses(cfg.path("responses"), setup)
    spec = gam.load_spec(cfg.path("gam_spec")) if cfg.get_str("gam_spec") else gam.GamSpec()
    if cfg.get_bool("per_smooth"):
        spec = gam.GamSpec(spec.parametric, spec.smooths, spec.k, spec.lambda_grid, True, spec.intercept)
    grid_size = cfg.get_int("grid_size", 100)
    svg = not cfg.get_bool("no_svg")
    sources = []
    for label, key in _spaces(cfg):
        mkey = "measures" if label == "textual" else "grounded_measures"
        if cfg.get_str(mkey):
            sources.append((label, load_measures(cfg.path(mkey))))
        else:
            sources.append((label, _measures_inline(cfg, key)))
    summary = {"setup": setup, "models": {}}
    fits, labels, accuracy = [], [], []
    participant = None
    for label, measures in sources:
        data, y = gam_frame(measures, responses)
        design = gam.build_design(data, spec)
        fit = gam.fit_gam(design, y, spec)
        s = gam.summarize(fit)
        out.csv(f"gam_summary_{label}.csv", gam.summary_rows(s) + [
            [], ["deviance", f"{s.deviance:.4f}"], ["edf", f"{s.edf_total:.4f}"],
            ["AIC", f"{s.aic:.4f}"], ["lambda"] + [g6(x) for x in s.lambdas]])
        for name in spec.smooths:
            pe = gam.partial_effects(fit, name, grid_size)
            out.csv(f"partial_{label}_{name}.csv", [["x", "effect", "se"]] + [
                [g6(a), g6(b), g6(c)] for a, b, c in zip(pe.x, pe.effect, pe.se)])
            if svg:
                out.text(f"partial_{label}_{name}.svg", gam.partial_svg(pe))
        # trial-level predictors are shared by all participants, so one choice per trial
        trial_ids = sorted(set(data["trial_id"]))
        first = {tid: data["trial_id"].index(tid) for tid in trial_ids}
        X = design.X[[first[t] for t in trial_ids]]
        probs = gam.predict_prob(fit, X)
        choices = {t: ("predicted" if p >= 0.5 else "random") for t, p in zip(trial_ids, probs)}
        trials = [sim.Trial(t, "x", measures[t]["word_type"], measures[t]["distance"], "a", "b", (), ())
                  for t in trial_ids]
        kept = sim.ResponseSet(tuple(r for r in responses.rows if r[1] in choices), setup)
        acc = sim.accuracy_vs_participants(choices, kept, trials)
        if participant is None:
            participant = sim.participant_percentages(kept, trials)
        accuracy.append((f"GAM: {label}", acc))
        fits.append(fit)
        labels.append(label)
        summary["models"][label] = {
            "aic": fit.aic, "deviance": fit.deviance, "edf_total": fit.edf_total,
            "edf": dict(fit.edf), "lambda": list(fit.lambdas), "iterations": fit.iterations,
            "n": len(y), "accuracy": _report_dict(acc),
        }
    out.csv("gam_accuracy.csv", _table_rows(accuracy, participant or None))
    if len(fits) >= 2:
        ranking = gam.compare_aic(fits, labels)
        rows = [["model", "AIC", "delta_vs_best"]]
        rows.extend([r.name, f"{r.aic:.4f}", f"{r.delta:.4f}"] for r in ranking)
        D = gam.pairwise_delta(fits)
        rows.append([])
        rows.append(["pair", "delta_AIC"])
        for i in range(len(fits)):
            for j in range(i + 1, len(fits)):
                rows.append([f"{labels[j]} - {labels[i]}", f"{D[j, i]:.4f}"])
        out.csv("aic_comparison.csv", rows)
        summary["aic_ranking"] = [{"model": r.name, "aic": r.aic, "delta": r.delta} for r in ranking]
    out.json("gam_summary.json", summary)
    return summary


# ---------------------------------------------------------------- bench / stats


def cmd_bench(cfg: Config, out: Outputs) -> dict:
    benches = [stats.load_benchmark(p) for p in cfg.paths("benchmark")]
    rows = [["space", "benchmark", "spearman", "coverage"]]
    result = {}
    for label, key in _spaces(cfg):
        space = load_embeddings(cfg.path(key))
        scores = {}
        for b in benches:
            rho, cov = stats.benchmark_eval(space, b)
            scores[b.name] = {"spearman": rho, "coverage": cov}
            rows.append([label, b.name, g6(rho), g6(cov)])
        mean = float(np.mean([v["spearman"] for v in scores.values()]))
        rows.append([label, "mean", g6(mean), ""])
        result[label] = {"benchmarks": scores, "mean_spearman": mean}
    out.csv("bench.csv", rows)
    out.json("bench_summary.json", result)
    return result


def cmd_stats(cfg: Config, out: Outputs) -> dict:
    test = cfg.get_str("test", "sign")
    k, n = cfg.get_int("successes"), cfg.get_int("n")
    if k is None or n is None:
        raise ValidationError("stats needs --successes and --n")
    p0 = 0.5 if test == "sign" else cfg.get_float("p0", 0.5)
    if test not in ("sign", "proportions"):
        raise ValidationError("--test must be sign or proportions")
    try:
        r = stats.binomial_test(k, n, p0)
    except GroundingError as exc:
        raise ValidationError(str(exc)) from None
    res = {"test": test, "successes": k, "n": n, "p0": p0, "p_two_sided": r.p_value,
           "p_one_sided_greater": r.p_greater, "p_one_sided_less": r.p_less, "exact": r.exact}
    out.json("stats.json", res)
    print(json.dumps(_jsonable(res), sort_keys=True))
    return res


def cmd_make_fixture(cfg: Config, out: Outputs) -> dict:
    from .fixtures import write_fixture

    paths = write_fixture(out.dir, cfg.seed)
    out.names.extend(p.name for p in paths.values())
    return {k: p.name for k, p in paths.items()}


# ---------------------------------------------------------------- argparse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--space", choices=("textual", "grounded", "both"))
    common.add_argument("--setup", choices=("prototype", "exemplar"))
    common.add_argument("-v", "--verbose", action="store_true", default=None)

    p = argparse.ArgumentParser(prog="grounded-choice", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("train-map", cmd_train_map, "fit a prototype or exemplar text-to-image mapping")
    sp.add_argument("--embeddings")
    sp.add_argument("--images")
    sp.add_argument("--membership")
    sp.add_argument("--ridge", type=float, help="ridge lambda (default 1e-2 * trace(T'T) / d_in)")
    sp.add_argument("--retrieve", help="comma-separated words to retrieve images for")
    sp.add_argument("--global-search", dest="global_search", action="store_true", default=None,
                    help="prototype retrieval searches all training images in step 2")

    sp = add("ground", cmd_ground, "train the alignment (or load one) and ground an embedding file")
    sp.add_argument("--embeddings")
    sp.add_argument("--images")
    sp.add_argument("--captions")
    sp.add_argument("--val-captions", dest="val_captions")
    sp.add_argument("--map", help="use an existing alignment instead of training")
    sp.add_argument("--encoder", choices=zsg.ENCODER_KINDS)
    sp.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", dest="batch_size", type=int)
    sp.add_argument("--learning-rate", dest="learning_rate", type=float)
    sp.add_argument("--patience", type=int)
    sp.add_argument("--grounded-dim", dest="grounded_dim", type=int)

    sp = add("simulate", cmd_simulate, "Max-model choices, virtual-participant and accuracy reports")
    sp.add_argument("--trials")
    sp.add_argument("--images")
    sp.add_argument("--embeddings")
    sp.add_argument("--grounded-embeddings", dest="grounded_embeddings")
    sp.add_argument("--responses")
    sp.add_argument("--participant-means", dest="participant_means",
                    help="1 or 5 comma-separated percentages (A.Far ... C.Max)")
    sp.add_argument("--include-catch", dest="include_catch", action="store_true", default=None)

    sp = add("fit-gam", cmd_fit_gam, "fit logistic GAMs to participant responses")
    sp.add_argument("--responses")
    sp.add_argument("--measures")
    sp.add_argument("--grounded-measures", dest="grounded_measures")
    sp.add_argument("--trials")
    sp.add_argument("--images")
    sp.add_argument("--embeddings")
    sp.add_argument("--grounded-embeddings", dest="grounded_embeddings")
    sp.add_argument("--gam-spec", dest="gam_spec")
    sp.add_argument("--per-smooth", dest="per_smooth", action="store_true", default=None)
    sp.add_argument("--grid-size", dest="grid_size", type=int)
    sp.add_argument("--no-svg", dest="no_svg", action="store_true", default=None)

    sp = add("bench", cmd_bench, "Spearman evaluation on word-similarity benchmarks")
    sp.add_argument("--embeddings")
    sp.add_argument("--grounded-embeddings", dest="grounded_embeddings")
    sp.add_argument("--benchmark", help="comma-separated TSV files")

    sp = add("stats", cmd_stats, "exact sign / proportions test")
    sp.add_argument("--test", choices=("sign", "proportions"))
    sp.add_argument("--successes", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p0", type=float)

    add("make-fixture", cmd_make_fixture, "write the synthetic demo data bundle")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = merge_config(args)
        outputs = Outputs(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        args.func(cfg, outputs)
    except (ValidationError, FormatError) as exc:
        outputs.discard()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GroundingError, OSError) as exc:
        outputs.discard()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    written = outputs.commit(cfg.get_str("out_dir", "."))
    for p in written:
        log.info("wrote %s", p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
