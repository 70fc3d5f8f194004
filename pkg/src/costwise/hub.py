"""Training, storage and lookup of the signature-keyed cost models."""

from __future__ import annotations

import json
import logging
import threading
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .features import (
    CONTEXT_IDS,
    FAMILIES,
    FEATURE_IDS,
    META_IDS,
    BasicFeatures,
    ContextFeatures,
    FeatureVector,
    basic_features,
    context_features,
    derived_features,
    feature_matrix,
    meta_matrix,
)
from .learners import FitConfig, GbtCostModel, LinearCostModel, fit_elastic_net, fit_gbt
from .learners.rng import derive_seed
from .logs import LoggedJob
from .plan import PlanError, PlanNode
from .signatures import SignatureSet, compute_signatures, signature_map

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
INPUT_FEATURE_IDS = FEATURE_IDS + CONTEXT_IDS


class StoreError(ValueError):
    pass


class UnknownOperatorError(KeyError):
    def __init__(self, kind: str):
        super().__init__(kind)
        self.kind = kind

    def __str__(self) -> str:
        return f"no operator model for kind {self.kind!r}"


@dataclass(eq=False)
class TrainingRow:
    kind: str
    signatures: SignatureSet
    basic: BasicFeatures
    features: FeatureVector
    context: ContextFeatures
    actual_ms: float
    job_id: str = ""
    day: int = 0
    template: str = ""

    def family_key(self, family: str) -> int:
        s = self.signatures
        return {"subgraph": s.subgraph, "approx": s.subgraph_approx, "input": s.op_input, "operator": s.operator}[family]

    def family_vector(self, family: str) -> np.ndarray:
        if family == "input":
            return np.concatenate([self.features.values, [self.context.CL, self.context.D]])
        return self.features.values


def _as_job(item: Union[PlanNode, LoggedJob], idx: int) -> LoggedJob:
    if isinstance(item, LoggedJob):
        return item
    return LoggedJob(job_id=f"plan-{idx}", template="", day=0, adhoc=False, plan=item)


def extract_training_rows(plans: Iterable[Union[PlanNode, LoggedJob]]) -> list[TrainingRow]:
    """One row per operator of every logged plan."""
    rows: list[TrainingRow] = []
    for idx, item in enumerate(plans):
        job = _as_job(item, idx)
        sigs = signature_map(job.plan)
        for node in job.plan.walk():
            if node.actual_latency_ms is None:
                raise PlanError(f"missing actual latency on {node.kind.value} in job {job.job_id}")
            if node.actual_latency_ms <= 0:
                raise PlanError(f"non-positive actual latency in job {job.job_id}")
            b = basic_features(node)
            rows.append(TrainingRow(
                kind=node.kind.value, signatures=sigs[id(node)], basic=b, features=derived_features(b),
                context=context_features(node), actual_ms=node.actual_latency_ms,
                job_id=job.job_id, day=job.day, template=job.template,
            ))
    return rows


@dataclass(frozen=True)
class Prediction:
    subgraph: Optional[float]
    approx: Optional[float]
    input: Optional[float]
    operator: Optional[float]
    combined: float

    @property
    def source_flags(self) -> tuple[bool, bool, bool, bool]:
        return tuple(getattr(self, f) is not None for f in FAMILIES)

    def get(self, family: str) -> Optional[float]:
        return getattr(self, family)


@dataclass(eq=False)
class CostModelStore:
    subgraph: dict[int, LinearCostModel] = field(default_factory=dict)
    approx: dict[int, LinearCostModel] = field(default_factory=dict)
    input: dict[int, LinearCostModel] = field(default_factory=dict)
    operator: dict[int, LinearCostModel] = field(default_factory=dict)
    combined: dict[int, GbtCostModel] = field(default_factory=dict)
    kinds: dict[int, str] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._lock = threading.Lock()
        self._evaluations = 0

    def family(self, name: str) -> dict:
        return getattr(self, name)

    @property
    def evaluations(self) -> int:
        return self._evaluations

    def reset_counter(self) -> None:
        with self._lock:
            self._evaluations = 0

    def _count(self, n: int) -> None:
        with self._lock:
            self._evaluations += n

    def counts(self) -> dict[str, int]:
        return {f: len(self.family(f)) for f in FAMILIES + ("combined",)}


# --------------------------------------------------------------------------
# training


def _group(rows: Sequence[TrainingRow], family: str) -> dict[int, list[TrainingRow]]:
    groups: dict[int, list[TrainingRow]] = defaultdict(list)
    for r in rows:
        groups[r.family_key(family)].append(r)
    return groups


def _fit_group(args) -> LinearCostModel:
    family, members, cfg = args
    X = np.vstack([r.family_vector(family) for r in members])
    y = np.array([r.actual_ms for r in members])
    ids = INPUT_FEATURE_IDS if family == "input" else FEATURE_IDS
    return fit_elastic_net(X, y, cfg, feature_ids=ids)


def group_and_fit(
    rows: Sequence[TrainingRow],
    min_occurrences: int = 5,
    cfg: FitConfig = FitConfig(),
    jobs: int = 1,
) -> CostModelStore:
    """Fit one elastic net per signature group with at least ``min_occurrences`` rows."""
    if not rows:
        raise ValueError("no training rows")
    store = CostModelStore()
    counts: dict[str, dict[str, int]] = {}
    tasks = []
    for family in FAMILIES:
        groups = _group(rows, family)
        kept = sorted(k for k, g in groups.items() if len(g) >= min_occurrences)
        counts[family] = {"groups": len(groups), "models": len(kept), "skipped": len(groups) - len(kept)}
        tasks.extend((family, key, groups[key]) for key in kept)
    work = [(fam, members, cfg) for fam, _, members in tasks]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            models = list(pool.map(_fit_group, work))
    else:
        models = [_fit_group(w) for w in work]
    for (family, key, _), model in zip(tasks, models):
        store.family(family)[key] = model
    for r in rows:
        store.kinds.setdefault(r.signatures.operator, r.kind)
    store.kinds = dict(sorted(store.kinds.items()))
    store.meta = {
        "train_days": sorted({r.day for r in rows}),
        "created_at": f"day-{max(r.day for r in rows)}",
        "min_occurrences": min_occurrences,
        "counts": counts,
        "config": cfg.to_dict(),
    }
    return store


def _individual_predictions(store: CostModelStore, sigs: SignatureSet, X: np.ndarray, ctx: ContextFeatures) -> dict:
    preds: dict[str, Optional[np.ndarray]] = {}
    keys = {"subgraph": sigs.subgraph, "approx": sigs.subgraph_approx, "input": sigs.op_input, "operator": sigs.operator}
    for fam in FAMILIES:
        model = store.family(fam).get(keys[fam])
        if model is None:
            preds[fam] = None
            continue
        Xf = X
        if fam == "input":
            Xf = np.hstack([X, np.tile([ctx.CL, ctx.D], (X.shape[0], 1))])
        preds[fam] = model.predict_many(Xf)
    return preds


def _family_predictions(store: CostModelStore, rows: Sequence[TrainingRow]) -> dict[str, np.ndarray]:
    out = {fam: np.full(len(rows), np.nan) for fam in FAMILIES}
    for fam in FAMILIES:
        models = store.family(fam)
        groups: dict[int, list[int]] = defaultdict(list)
        for i, r in enumerate(rows):
            groups[r.family_key(fam)].append(i)
        for key, idx in groups.items():
            model = models.get(key)
            if model is not None:
                out[fam][idx] = model.predict_many(np.vstack([rows[i].family_vector(fam) for i in idx]))
    return out


def fit_combined(
    store: CostModelStore,
    rows_next_day: Sequence[TrainingRow],
    cfg: FitConfig = FitConfig(),
    fallback_rows: Sequence[TrainingRow] = (),
) -> CostModelStore:
    """Fit one boosted-tree meta model per operator kind on a later day's rows.

    Kinds that have an operator model but no rows on the later day are fit on
    ``fallback_rows`` (normally the individual models' own training rows) so
    every trained kind keeps a combined model.
    """
    if not rows_next_day:
        raise ValueError("no rows for the combined models")
    train_days = set(store.meta.get("train_days", []))
    if train_days and min(r.day for r in rows_next_day) <= max(train_days):
        log.warning("combined-model rows overlap the individual training days")
    by_kind: dict[int, list[TrainingRow]] = defaultdict(list)
    for r in rows_next_day:
        if r.signatures.operator not in store.operator:
            raise UnknownOperatorError(r.kind)
        by_kind[r.signatures.operator].append(r)
    spare: dict[int, list[TrainingRow]] = defaultdict(list)
    for r in fallback_rows:
        spare[r.signatures.operator].append(r)
    for key, members in spare.items():
        if key in store.operator and key not in by_kind:
            by_kind[key] = members
    for key in sorted(by_kind):
        members = by_kind[key]
        M = _meta_rows(_family_predictions(store, members), members)
        y = np.array([r.actual_ms for r in members])
        seed = derive_seed(cfg.seed, key)
        kcfg = FitConfig(**{**cfg.to_dict(), "seed": seed})
        store.combined[key] = fit_gbt(M, y, kcfg, feature_ids=META_IDS)
    store.meta = {
        **store.meta,
        "combined_days": sorted({r.day for r in rows_next_day}),
        "combined_config": cfg.to_dict(),
    }
    store.meta["counts"] = {**store.meta.get("counts", {}), "combined": {"models": len(store.combined)}}
    return store


def train_store(
    day_rows: Sequence[TrainingRow],
    next_day_rows: Sequence[TrainingRow],
    min_occurrences: int = 5,
    cfg: FitConfig = FitConfig(),
    combined_cfg: Optional[FitConfig] = None,
    jobs: int = 1,
) -> CostModelStore:
    store = group_and_fit(day_rows, min_occurrences, cfg, jobs)
    return fit_combined(store, next_day_rows, combined_cfg or cfg, fallback_rows=day_rows)


# --------------------------------------------------------------------------
# lookup


def predict_node(
    store: CostModelStore,
    node: PlanNode,
    partitions: Sequence[int],
    sigs: Optional[SignatureSet] = None,
    basic: Optional[BasicFeatures] = None,
    context: Optional[ContextFeatures] = None,
) -> tuple[dict[str, Optional[np.ndarray]], np.ndarray]:
    """Predictions of every family and of the combined model at each partition count.

    Counts one model evaluation per present model per partition count.
    """
    sigs = sigs or compute_signatures(node)
    combined = store.combined.get(sigs.operator)
    if combined is None or sigs.operator not in store.operator:
        raise UnknownOperatorError(node.kind.value)
    P = np.asarray(partitions, dtype=np.int64)
    b = basic or basic_features(node, partitions=int(P[0]))
    ctx = context or context_features(node)
    X = feature_matrix(b, P)
    preds = _individual_predictions(store, sigs, X, ctx)
    M = meta_matrix(preds, b, P)
    comb = combined.predict_many(M)
    store._count(len(P) * (1 + sum(v is not None for v in preds.values())))
    return preds, comb


def _meta_rows(preds: dict[str, np.ndarray], rows: Sequence[TrainingRow]) -> np.ndarray:
    """Meta-model design for rows whose operator prediction is known (NaN marks absence)."""
    op = preds["operator"]
    cols, flags = [], []
    for fam in FAMILIES:
        v = preds[fam]
        have = ~np.isnan(v)
        flags.append(have.astype(np.float64))
        cols.append(np.where(have, v, op))
    B = np.array([[r.basic.I, r.basic.B, r.basic.C, r.basic.P] for r in rows], dtype=np.float64).reshape(-1, 4)
    I, Bc, C, P = B.T
    return np.column_stack(cols + flags + [I, Bc, C, I / P, Bc / P, C / P, P])


def predict_rows(store: CostModelStore, rows: Sequence[TrainingRow]) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Batched predictions for logged rows at their own partition counts.

    Returns per-family arrays and the combined array, NaN where no model
    covers the row.
    """
    preds = _family_predictions(store, rows)
    combined = np.full(len(rows), np.nan)
    groups: dict[int, list[int]] = defaultdict(list)
    for i, r in enumerate(rows):
        groups[r.signatures.operator].append(i)
    for key, idx in groups.items():
        model = store.combined.get(key)
        if model is None or key not in store.operator:
            continue
        sub = {fam: preds[fam][idx] for fam in FAMILIES}
        combined[idx] = model.predict_many(_meta_rows(sub, [rows[i] for i in idx]))
    present = sum(int(np.count_nonzero(~np.isnan(v))) for v in preds.values())
    store._count(present + int(np.count_nonzero(~np.isnan(combined))))
    return preds, combined


def lookup(store: CostModelStore, node: PlanNode, partitions: Optional[int] = None) -> Prediction:
    """Predicted exclusive cost (ms) of ``node`` at its own (or the given) partition count."""
    p = partitions if partitions is not None else node.partition_count
    if p is None:
        raise PlanError("node has no partition count")
    preds, comb = predict_node(store, node, [p])
    return Prediction(
        **{f: (None if v is None else float(v[0])) for f, v in preds.items()},
        combined=float(comb[0]),
    )


# --------------------------------------------------------------------------
# persistence


def _models_doc(models: dict) -> dict:
    return {format(k, "016x"): m.to_dict() for k, m in sorted(models.items())}


def store_to_document(store: CostModelStore) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "meta": store.meta,
        "kinds": {format(k, "016x"): v for k, v in sorted(store.kinds.items())},
        "subgraph": _models_doc(store.subgraph),
        "approx": _models_doc(store.approx),
        "input": _models_doc(store.input),
        "operator": _models_doc(store.operator),
        "combined": _models_doc(store.combined),
    }


def dumps_store(store: CostModelStore) -> str:
    return json.dumps(store_to_document(store), separators=(",", ":"))


def save_store(store: CostModelStore, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_store(store), encoding="utf-8")


def loads_store(text: str) -> CostModelStore:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoreError(f"truncated or malformed store file: {exc}") from exc
    if not isinstance(doc, dict) or "schema" not in doc:
        raise StoreError("not a cost-model store")
    if doc["schema"] != SCHEMA_VERSION:
        raise StoreError(f"unsupported store schema {doc['schema']!r} (expected {SCHEMA_VERSION})")
    try:
        store = CostModelStore(
            subgraph={int(k, 16): LinearCostModel.from_dict(v) for k, v in doc["subgraph"].items()},
            approx={int(k, 16): LinearCostModel.from_dict(v) for k, v in doc["approx"].items()},
            input={int(k, 16): LinearCostModel.from_dict(v) for k, v in doc["input"].items()},
            operator={int(k, 16): LinearCostModel.from_dict(v) for k, v in doc["operator"].items()},
            combined={int(k, 16): GbtCostModel.from_dict(v) for k, v in doc["combined"].items()},
            kinds={int(k, 16): v for k, v in doc.get("kinds", {}).items()},
            meta=doc.get("meta", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StoreError(f"corrupt store: {exc}") from exc
    return store


def load_store(path: Union[str, Path]) -> CostModelStore:
    return loads_store(Path(path).read_text(encoding="utf-8"))
