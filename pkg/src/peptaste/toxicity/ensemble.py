"""Descriptor selection, weight search, and the weighted soft-voting ensemble.

Forward selection scores every single descriptor, then every pair, seeds
the greedy stage with the best of those, and keeps adding the descriptor
that most improves cross-validated MCC until the improvement falls to the
epsilon threshold.  Weight search enumerates the full step-0.1 simplex
over the fitted members and scores each vector by pooled out-of-fold MCC.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .. import descriptors
from ..errors import ConfigError, DataError, ValidationError
from . import metrics
from .classifiers import ClassifierSpec, make_classifier

FORMAT_NAME = "peptaste-toxicity-ensemble"
FORMAT_VERSION = 1


@dataclass
class SelectionTraceRow:
    stage: str
    ids: tuple[str, ...]
    mcc: float


@dataclass
class SelectionResult:
    selected: tuple[str, ...]
    mcc: float
    trace: list[SelectionTraceRow]


def forward_select(
    universe,
    selector_spec: ClassifierSpec,
    x_builder,
    y,
    folds: int = 10,
    seed: int = 0,
    epsilon: float = 0.001,
) -> SelectionResult:
    """Stagewise descriptor selection by cross-validated MCC.

    x_builder(ids) must return the feature matrix for an ordered descriptor
    tuple.  Ties keep the earlier-evaluated candidate, so results are
    deterministic for a fixed universe order.
    """
    if epsilon < 0:
        raise ConfigError(f"epsilon must be >= 0, got {epsilon}")
    universe = tuple(universe)
    if not universe:
        raise ConfigError("descriptor universe must be non-empty")
    y = np.asarray(y).astype(np.int64)
    trace: list[SelectionTraceRow] = []

    def score(ids: tuple[str, ...]) -> float:
        X = x_builder(ids)
        report = metrics.cross_validate(
            lambda: make_classifier(selector_spec), X, y, folds=folds, seed=seed
        )
        return report.mcc

    best_ids: tuple[str, ...] | None = None
    best_mcc = -2.0
    for did in universe:
        mcc = score((did,))
        trace.append(SelectionTraceRow("single", (did,), mcc))
        if mcc > best_mcc:
            best_ids, best_mcc = (did,), mcc
    for a, b in itertools.combinations(universe, 2):
        mcc = score((a, b))
        trace.append(SelectionTraceRow("pair", (a, b), mcc))
        if mcc > best_mcc:
            best_ids, best_mcc = (a, b), mcc

    current, current_mcc = best_ids, best_mcc
    while True:
        remaining = [d for d in universe if d not in current]
        if not remaining:
            break
        round_best = None
        round_mcc = -2.0
        for did in remaining:
            ids = tuple(d for d in universe if d in current or d == did)
            mcc = score(ids)
            trace.append(SelectionTraceRow("greedy", ids, mcc))
            if mcc > round_mcc:
                round_best, round_mcc = ids, mcc
        if round_best is None or round_mcc <= current_mcc + epsilon:
            break
        current, current_mcc = round_best, round_mcc
    return SelectionResult(current, current_mcc, trace)


def enumerate_weight_vectors(n_members: int, step: float = 0.1) -> list[tuple[float, ...]]:
    """Every non-negative weight vector on the step-grid simplex summing to 1,
    in lexicographic order."""
    units = round(1.0 / step)
    if abs(units * step - 1.0) > 1e-9:
        raise ConfigError(f"step {step} must divide 1 evenly")
    if not 2 <= n_members <= 5:
        raise ConfigError(f"member count must be between 2 and 5, got {n_members}")

    out = []

    def rec(prefix, left):
        if len(prefix) == n_members - 1:
            out.append(prefix + (left,))
            return
        for u in range(left + 1):
            rec(prefix + (u,), left - u)

    rec((), units)
    return [tuple(u * step for u in vec) for vec in out]


def weight_grid_search(
    member_specs: dict[str, ClassifierSpec],
    X,
    y,
    folds: int = 10,
    seed: int = 0,
    step: float = 0.1,
) -> tuple[tuple[float, ...], float, np.ndarray]:
    """Exhaustive simplex search for soft-voting weights.

    Members are refitted per fold once; every candidate weight vector is
    then scored on the cached out-of-fold probabilities by pooled MCC.
    Ties keep the lexicographically smallest vector.  Returns the winning
    weights, their MCC, and the (n, members) out-of-fold proba matrix.
    """
    y = np.asarray(y).astype(np.int64)
    probas = np.column_stack(
        [
            metrics.cross_val_probas(
                lambda spec=spec: make_classifier(spec), X, y, folds=folds, seed=seed
            )
            for spec in member_specs.values()
        ]
    )
    best_w = None
    best_mcc = -2.0
    for w in enumerate_weight_vectors(probas.shape[1], step):
        combined = probas @ np.asarray(w)
        mcc = metrics.metrics_from_probas(y, combined).mcc
        if mcc > best_mcc:
            best_w, best_mcc = w, mcc
    return best_w, best_mcc, probas


@dataclass
class EnsembleModel:
    """Fitted voting ensemble plus everything needed to encode new peptides."""

    member_names: tuple[str, ...]
    member_specs: dict[str, ClassifierSpec]
    members: dict[str, object]
    weights: tuple[float, ...]
    descriptor_ids: tuple[str, ...]
    config: descriptors.DescriptorConfig
    scaler: descriptors.FeatureScaler
    cv_mcc: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.member_names) != len(self.weights):
            raise ValidationError("one weight per member required")
        if any(w < 0 for w in self.weights):
            raise ValidationError("weights must be non-negative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValidationError("weights must sum to 1")

    def _encode(self, peptides) -> np.ndarray:
        raw = descriptors.encode_matrix(self.descriptor_ids, peptides, self.config)
        return self.scaler.transform(raw)

    def predict_proba_features(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        combined = np.zeros(X.shape[0])
        for name, w in zip(self.member_names, self.weights):
            if w:
                combined += w * self.members[name].predict_proba(X)
        return combined

    def predict(self, peptides) -> list[dict]:
        """Per-peptide probability and call; descriptor failures are
        reported per row without aborting the batch."""
        rows = []
        for pep in peptides:
            try:
                if len(str(pep)) > self.config.pad_len:
                    raise ValidationError(
                        f"sequence length {len(str(pep))} exceeds the model's "
                        f"maximum of {self.config.pad_len}"
                    )
                X = self._encode([pep])
            except (ValidationError, DataError) as exc:
                rows.append(
                    {
                        "sequence": str(pep),
                        "probability": None,
                        "call": None,
                        "error": str(exc),
                    }
                )
                continue
            proba = float(self.predict_proba_features(X)[0])
            rows.append(
                {
                    "sequence": str(pep),
                    "probability": proba,
                    "call": "toxic" if proba >= metrics.CALL_THRESHOLD else "nontoxic",
                    "error": "",
                }
            )
        return rows


def fit_members(
    member_specs: dict[str, ClassifierSpec], X, y
) -> dict[str, object]:
    fitted = {}
    for name, spec in member_specs.items():
        model = make_classifier(spec)
        model.fit(X, y)
        fitted[name] = model
    return fitted


# --- serialization ----------------------------------------------------------


def save_model(model: EnsembleModel, path):
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "member_names": list(model.member_names),
        "member_specs": {
            name: {
                "algorithm": s.algorithm,
                "trees": s.trees,
                "depth": s.depth,
                "k": s.k,
                "learning_rate": s.learning_rate,
                "l2": s.l2,
                "seed": s.seed,
            }
            for name, s in model.member_specs.items()
        },
        "members": {n: model.members[n].to_state() for n in model.member_names},
        "weights": list(model.weights),
        "descriptor_ids": list(model.descriptor_ids),
        "descriptor_config": {
            "pad_len": model.config.pad_len,
            "window": model.config.window,
            "k_max": model.config.k_max,
            "lam": model.config.lam,
            "weight": model.config.weight,
        },
        "scaler": {
            "mean": model.scaler.mean.tolist(),
            "scale": model.scaler.scale.tolist(),
        },
        "cv_mcc": model.cv_mcc,
        "metadata": model.metadata,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> EnsembleModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_NAME:
        raise ValidationError(f"not a {FORMAT_NAME} file: {path}")
    if doc.get("version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported model version {doc.get('version')}")
    member_specs = {
        name: ClassifierSpec(**spec) for name, spec in doc["member_specs"].items()
    }
    members = {}
    for name in doc["member_names"]:
        members[name] = make_classifier(member_specs[name]).from_state(
            doc["members"][name]
        )
    config = descriptors.DescriptorConfig(**doc["descriptor_config"])
    scaler = descriptors.FeatureScaler(
        np.asarray(doc["scaler"]["mean"], dtype=float),
        np.asarray(doc["scaler"]["scale"], dtype=float),
    )
    return EnsembleModel(
        member_names=tuple(doc["member_names"]),
        member_specs=member_specs,
        members=members,
        weights=tuple(doc["weights"]),
        descriptor_ids=tuple(doc["descriptor_ids"]),
        config=config,
        scaler=scaler,
        cv_mcc=float(doc["cv_mcc"]),
        metadata=doc.get("metadata", {}),
    )


def predict_rows_tsv(rows) -> str:
    lines = ["sequence\tprobability\tcall\terror"]
    for r in rows:
        prob = "" if r["probability"] is None else repr(r["probability"])
        call = r["call"] or ""
        lines.append(f"{r['sequence']}\t{prob}\t{call}\t{r['error']}")
    return "\n".join(lines) + "\n"
