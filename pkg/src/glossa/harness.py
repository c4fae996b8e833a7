"""Experiment orchestration: the tagger x data-condition grid, the
narrative-level active-learning loop, and leave-one-narrative-out
cross-validation.

The active-learning loop is a step-wise state machine so an in-process
oracle run and the HTTP annotation service drive the identical code
path and produce identical logs.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .corpus import Corpus, Narrative, ParallelCorpus, Sentence
from .dictionary import TagDictionary
from .metrics import narrative_sentences, token_accuracy, vocabulary_coverage
from .projection import ProjectionFilter, build_projected_dictionary
from .tags import Tag
from .taggers import Tagger, TrainData

PROJECTION_MODES = ("none", "clp", "clpa")


@dataclass(frozen=True)
class DataCondition:
    add_projection: str = "none"      # none | clp | clpa
    add_monolingual: bool = False

    def __post_init__(self) -> None:
        if self.add_projection not in PROJECTION_MODES:
            raise ValueError(f"unknown projection mode {self.add_projection!r}")

    @property
    def label(self) -> str:
        parts = []
        if self.add_monolingual:
            parts.append("mono")
        if self.add_projection != "none":
            parts.append(self.add_projection)
        return "+".join(parts) if parts else "base"


@dataclass
class ExperimentData:
    """Everything the harness can draw on for one experiment."""
    annotated: list[Sentence]
    test: list[Narrative]
    mono: list[Sentence] = field(default_factory=list)
    parallel_train: ParallelCorpus | None = None
    parallel_test: ParallelCorpus | None = None
    projection_filter: ProjectionFilter = field(default_factory=ProjectionFilter)
    alignment_iters: int = 15
    seed: int = 0

    def dictionary_for(self, mode: str) -> TagDictionary | None:
        if mode == "none":
            return None
        if self.parallel_train is None:
            raise ValueError(f"{mode} requires train-side parallel data")
        if mode == "clp":
            result = build_projected_dictionary(
                self.parallel_train, mode="train_only",
                filt=self.projection_filter, em_iters=self.alignment_iters)
        elif mode == "clpa":
            if self.parallel_test is None:
                raise ValueError("clpa requires test-side parallel data")
            result = build_projected_dictionary(
                self.parallel_train, self.parallel_test, mode="transductive",
                filt=self.projection_filter, em_iters=self.alignment_iters)
        else:
            raise ValueError(f"unknown projection mode {mode!r}")
        return result.dictionary

    def train_data(self, condition: DataCondition,
                   pool: list[Sentence] | None = None) -> TrainData:
        return TrainData(
            annotated=pool if pool is not None else self.annotated,
            dictionary=self.dictionary_for(condition.add_projection),
            mono=self.mono if condition.add_monolingual else None,
            seed=self.seed,
        )


# ---------------------------------------------------------------------------
# Grid


@dataclass
class GridCell:
    tagger: str
    condition: str
    accuracy: float


@dataclass
class GridResult:
    cells: list[GridCell]

    def accuracy(self, tagger: str, condition: str) -> float:
        for cell in self.cells:
            if cell.tagger == tagger and cell.condition == condition:
                return cell.accuracy
        raise KeyError((tagger, condition))

    def rows(self) -> list[dict]:
        return [{"tagger": c.tagger, "condition": c.condition, "accuracy": c.accuracy}
                for c in self.cells]


def evaluate_tagger(fitted, narratives: Iterable[Narrative]) -> float:
    sentences = narrative_sentences(narratives)
    predictions = [fitted.predict(s) for s in sentences]
    return token_accuracy(sentences, predictions)


def run_grid(taggers: Sequence[Tagger], conditions: Sequence[DataCondition],
             data: ExperimentData) -> GridResult:
    """Train each tagger under each condition, scoring token accuracy on
    the non-excluded test stream. Dictionaries are built once per mode."""
    dictionaries = {mode: data.dictionary_for(mode)
                    for mode in {c.add_projection for c in conditions}}
    cells = []
    for condition in conditions:
        base = TrainData(annotated=data.annotated,
                         dictionary=dictionaries[condition.add_projection],
                         mono=data.mono if condition.add_monolingual else None,
                         seed=data.seed)
        for tagger in taggers:
            fitted = tagger.train(base)
            cells.append(GridCell(tagger.name, condition.label,
                                  evaluate_tagger(fitted, data.test)))
    return GridResult(cells)


# ---------------------------------------------------------------------------
# Active learning


class Annotator(Protocol):
    def annotate(self, narrative: Narrative,
                 predictions: list[list[Tag]]) -> list[list[Tag]]: ...


class OracleAnnotator:
    """Returns the narrative's gold tags (they exist on desk benchmarks)."""

    def annotate(self, narrative: Narrative, predictions):
        return [list(s.tags) for s in narrative.active_sentences()]


class PredictionsAnnotator:
    """Accepts the tagger output unchanged: the noisy-pool degenerate mode."""

    def annotate(self, narrative: Narrative, predictions):
        return [list(p) for p in predictions]


@dataclass
class Proposal:
    iteration: int
    narrative_id: str
    tagger: str
    predictions: list[list[Tag]]
    confidences: list[list[float]]


def narrative_sort_key(n: Narrative) -> tuple[int, str]:
    return (n.token_length(), n.id)


class ActiveLearningLoop:
    """Queue of test narratives, ascending by length; per iteration all
    taggers retrain on the pool, the previously-best tagger pre-annotates
    the next narrative, corrections join the pool."""

    def __init__(self, base_pool: list[Sentence], test_narratives: list[Narrative],
                 taggers: Sequence[Tagger], make_train_data: Callable[[list[Sentence]], TrainData],
                 seed: int = 0, starter_fraction: float = 0.9):
        if not test_narratives:
            raise ValueError("queue must be non-empty")
        self.queue: list[Narrative] = sorted(test_narratives, key=narrative_sort_key)
        self.final_story_id = self.queue[-1].id
        self.base_pool: list[Sentence] = list(base_pool)
        # accepted corrections per narrative, in annotation order; the pool
        # is always base + these segments, so a narrative contributes
        # exactly once even if its corrections are later superseded
        self.accepted: list[tuple[str, list[Sentence]]] = []
        self.taggers = list(taggers)
        self.make_train_data = make_train_data
        self.seed = seed
        self.starter_fraction = starter_fraction
        self.iteration = 0
        self.log: list[dict] = []
        self.fitted: dict[str, object] = {}
        self.last_accuracy_on_annotated: dict[str, float] | None = None
        self._pending: Proposal | None = None
        self._trained_for_iteration = -1

    @property
    def pool(self) -> list[Sentence]:
        out = list(self.base_pool)
        for _, sentences in self.accepted:
            out.extend(sentences)
        return out

    @property
    def annotated_ids(self) -> list[str]:
        return [nid for nid, _ in self.accepted]

    def replace_corrections(self, narrative_id: str, corrections: list[list[Tag]]) -> None:
        """Supersede an accepted narrative's corrections (re-review)."""
        for idx, (nid, sentences) in enumerate(self.accepted):
            if nid == narrative_id:
                if len(corrections) != len(sentences):
                    raise ValueError("corrections/sentence count mismatch")
                replacement = [Sentence(s.tokens, tuple(tags))
                               for s, tags in zip(sentences, corrections)]
                self.accepted[idx] = (nid, replacement)
                self._trained_for_iteration = -1  # models are stale now
                return
        raise KeyError(narrative_id)

    # -- steps -------------------------------------------------------------

    def train_all(self) -> None:
        data = self.make_train_data(self.pool)
        self.fitted = {t.name: t.train(data) for t in self.taggers}
        self._trained_for_iteration = self.iteration

    def _starter_tagger(self) -> str:
        """Seeded 90/10 split of the pool picks the first iteration's tagger."""
        pool = self.pool
        rng = np.random.RandomState(self.seed)
        order = rng.permutation(len(pool))
        cut = max(1, int(len(pool) * self.starter_fraction))
        if cut >= len(pool):
            cut = len(pool) - 1
        train = [pool[i] for i in order[:cut]]
        held = [pool[i] for i in order[cut:]]
        data = self.make_train_data(train)
        scores = {}
        for tagger in self.taggers:
            fitted = tagger.train(data)
            scores[tagger.name] = token_accuracy(held, [fitted.predict(s) for s in held])
        best = max(sorted(scores), key=lambda name: scores[name])
        return best

    def select_tagger(self) -> str:
        if self.last_accuracy_on_annotated is None:
            if len(self.taggers) == 1:
                return self.taggers[0].name
            return self._starter_tagger()
        scores = self.last_accuracy_on_annotated
        return max(sorted(scores), key=lambda name: scores[name])

    def propose(self) -> Proposal:
        """Predictions for the shortest remaining narrative; idempotent
        until the matching accept()."""
        if self._pending is not None:
            return self._pending
        if not self.queue:
            raise IndexError("queue is empty")
        if self._trained_for_iteration != self.iteration:
            self.train_all()
        narrative = self.queue[0]
        name = self.select_tagger()
        fitted = self.fitted[name]
        predictions, confidences = [], []
        for sent in narrative.active_sentences():
            tags, confs = fitted.predict_with_confidence(sent)
            predictions.append(list(tags))
            confidences.append(list(confs))
        self._pending = Proposal(self.iteration + 1, narrative.id, name,
                                 predictions, confidences)
        return self._pending

    def accept(self, corrections: list[list[Tag]]) -> dict:
        """Fold the corrected narrative into the pool and log the iteration."""
        proposal = self._pending
        if proposal is None:
            raise RuntimeError("no pending proposal")
        narrative = self.queue.pop(0)
        sentences = narrative.active_sentences()
        if len(corrections) != len(sentences):
            raise ValueError("corrections/sentence count mismatch")
        for tags, sent in zip(corrections, sentences):
            if len(tags) != len(sent):
                raise ValueError("corrections length mismatch")

        corrected = [Sentence(s.tokens, tuple(tags))
                     for s, tags in zip(sentences, corrections)]
        changed = 0
        for pred_tags, corr_tags in zip(proposal.predictions, corrections):
            changed += sum(1 for p, c in zip(pred_tags, corr_tags) if p != c)

        gold_like = corrected
        accuracy_on_annotated = {
            name: token_accuracy(gold_like, [fitted.predict(s) for s in gold_like])
            for name, fitted in sorted(self.fitted.items())
        }
        # remaining/final-story scores need gold tags on the queue; live
        # (human) runs on untagged narratives simply skip them
        remaining = list(self.queue)
        evaluable = [n for n in [narrative] + remaining if n.is_tagged]
        accuracy_on_remaining = None
        if len(evaluable) == len(remaining) + 1:
            accuracy_on_remaining = {
                name: evaluate_tagger(fitted, evaluable)
                for name, fitted in sorted(self.fitted.items())
            }
        final_story = next((n for n in remaining if n.id == self.final_story_id), None)
        accuracy_on_final_story = None
        if final_story is not None and final_story.is_tagged:
            accuracy_on_final_story = {
                name: evaluate_tagger(fitted, [final_story])
                for name, fitted in sorted(self.fitted.items())
            }

        self.accepted.append((narrative.id, corrected))
        self.iteration += 1
        self.last_accuracy_on_annotated = accuracy_on_annotated
        record = {
            "iteration": self.iteration,
            "narrative_id": narrative.id,
            "best_method": proposal.tagger,
            "pool_sentences": len(self.pool),
            "changed_count": changed,
            "noisy_pool": changed == 0,
            "accuracy_on_annotated": accuracy_on_annotated[proposal.tagger],
            "prediction_accuracy": token_accuracy(gold_like, proposal.predictions),
            "accuracy_on_annotated_per_tagger": accuracy_on_annotated,
            "accuracy_on_remaining": accuracy_on_remaining,
            "accuracy_on_final_story": accuracy_on_final_story,
        }
        self.log.append(record)
        self._pending = None
        return record

    @property
    def done(self) -> bool:
        return not self.queue

    def state_view(self) -> dict:
        return {
            "iteration": self.iteration,
            "queue": [n.id for n in self.queue],
            "annotated": list(self.annotated_ids),
            "pool_sentences": len(self.pool),
            "log": self.log,
        }


@dataclass
class ActiveLearningResult:
    log: list[dict]
    without_al: dict[str, dict[str, float]]   # narrative id -> {tagger: accuracy}
    pool_size: int


def run_active_learning(base_pool: list[Sentence], test_narratives: list[Narrative],
                        taggers: Sequence[Tagger],
                        make_train_data: Callable[[list[Sentence]], TrainData],
                        annotator: Annotator | None = None,
                        seed: int = 0) -> ActiveLearningResult:
    """Oracle-driven loop over the whole queue, plus the static
    ("without AL") per-narrative accuracies of the iteration-1 models."""
    annotator = annotator or OracleAnnotator()
    loop = ActiveLearningLoop(base_pool, test_narratives, taggers,
                              make_train_data, seed=seed)
    loop.train_all()
    without_al = {
        n.id: {name: evaluate_tagger(fitted, [n])
               for name, fitted in sorted(loop.fitted.items())}
        for n in loop.queue
    }
    while not loop.done:
        proposal = loop.propose()
        narrative = loop.queue[0]
        corrections = annotator.annotate(narrative, proposal.predictions)
        loop.accept(corrections)
    return ActiveLearningResult(loop.log, without_al, len(loop.pool))


# ---------------------------------------------------------------------------
# Cross-validation


class TooFewNarratives(ValueError):
    pass


@dataclass
class CrossValResult:
    folds: list[tuple[str, float]]
    mean: float
    sd: float
    min_fold: tuple[str, float]
    max_fold: tuple[str, float]

    def rows(self) -> list[dict]:
        return [{"fold": fid, "accuracy": acc} for fid, acc in self.folds]


def cross_validate(narratives: Sequence[Narrative], tagger: Tagger,
                   make_train_data: Callable[[list[Sentence]], TrainData],
                   base_pool: Sequence[Sentence] = ()) -> CrossValResult:
    """Leave-one-narrative-out: train on the rest (plus the base corpus),
    evaluate on the held-out narrative."""
    narratives = list(narratives)
    if len(narratives) < 2:
        raise TooFewNarratives("cross-validation needs at least 2 narratives")
    folds: list[tuple[str, float]] = []
    for held in narratives:
        train_sents = list(base_pool)
        for n in narratives:
            if n.id != held.id:
                train_sents.extend(n.active_sentences())
        fitted = tagger.train(make_train_data(train_sents))
        folds.append((held.id, evaluate_tagger(fitted, [held])))
    accs = [a for _, a in folds]
    mean = sum(accs) / len(accs)
    sd = statistics.stdev(accs) if len(accs) > 1 else 0.0
    return CrossValResult(
        folds, mean, sd,
        min(folds, key=lambda f: (f[1], f[0])),
        max(folds, key=lambda f: (f[1], f[0])),
    )
