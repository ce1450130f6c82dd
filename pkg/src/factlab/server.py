"""Blind annotation server.

Serves claim/evidence pairs to annotators over a small REST API and
persists their judgements. Dataset labels stay server-side: no response
ever carries one, so annotators cannot be primed by the expected answer.

API (all JSON):
  GET  /api/tasks/next?annotator=ID  -> {"pair_id", "claim", "evidence"} | 204
  POST /api/annotations {"pair_id", "annotator", "label", "grammar_flag"?}
       -> 201; resubmission by the same annotator overwrites
  GET  /api/progress?annotator=ID    -> {"done", "total"}
  GET  /api/agreement                -> pairwise and vs-dataset kappa
  GET  /                              -> static annotation UI, when provided
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from factlab.adversarial import (
    AnnotationRecord,
    AnnotationStore,
    QCItem,
    cohen_kappa,
    now_timestamp,
)
from factlab.corpus import Label


class AnnotationIn(BaseModel):
    pair_id: str
    annotator: str
    label: str
    grammar_flag: bool = False


def _pairwise_entry(name_a: str, name_b: str, a: list, b: list) -> dict:
    result = cohen_kappa(a, b)
    return {
        "annotator_a": name_a,
        "annotator_b": name_b,
        "n_items": result.n_items,
        "kappa": result.kappa,
        "observed_agreement": result.observed_agreement,
    }


def create_annotation_app(
    tasks: Sequence[QCItem],
    store_path: str | Path,
    dataset_labels: Mapping[str, Label] | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    """Wire the annotation API around a task list and a JSONL store.

    ``dataset_labels`` (pair_id -> label) is optional; when present the
    agreement report also compares each annotator against the dataset.
    """
    task_ids = [t.pair_id for t in tasks]
    if len(set(task_ids)) != len(task_ids):
        raise ValueError("task pair_ids must be unique")
    by_id = {t.pair_id: t for t in tasks}
    store = AnnotationStore(store_path)
    dataset_labels = dict(dataset_labels or {})

    app = FastAPI(title="annotation server")

    @app.get("/api/tasks/next")
    def next_task(annotator: str = Query(min_length=1)):
        done = store.by_annotator(annotator)
        for task in tasks:
            if task.pair_id not in done:
                return {
                    "pair_id": task.pair_id,
                    "claim": task.claim,
                    "evidence": task.evidence,
                }
        return Response(status_code=204)

    @app.post("/api/annotations", status_code=201)
    def submit(body: AnnotationIn):
        if body.pair_id not in by_id:
            raise HTTPException(status_code=404, detail=f"unknown pair_id {body.pair_id!r}")
        try:
            label = Label(body.label)
        except ValueError:
            valid = [l.value for l in Label]
            raise HTTPException(
                status_code=400, detail=f"unknown label {body.label!r}; expected one of {valid}"
            )
        store.add(
            AnnotationRecord(
                pair_id=body.pair_id,
                annotator_id=body.annotator,
                label=label,
                grammar_flag=body.grammar_flag,
                timestamp=now_timestamp(),
            )
        )
        return {"pair_id": body.pair_id, "annotator": body.annotator, "stored": True}

    @app.get("/api/progress")
    def progress(annotator: str = Query(min_length=1)):
        done = store.by_annotator(annotator)
        return {
            "done": sum(1 for pid in task_ids if pid in done),
            "total": len(task_ids),
        }

    @app.get("/api/agreement")
    def agreement():
        annotators = store.annotators()
        pairwise = []
        for i, name_a in enumerate(annotators):
            ann_a = store.by_annotator(name_a)
            for name_b in annotators[i + 1 :]:
                ann_b = store.by_annotator(name_b)
                shared = sorted(set(ann_a) & set(ann_b))
                if len(shared) < 2:
                    continue
                pairwise.append(
                    _pairwise_entry(
                        name_a,
                        name_b,
                        [ann_a[p].label for p in shared],
                        [ann_b[p].label for p in shared],
                    )
                )
        vs_dataset = []
        if dataset_labels:
            for name in annotators:
                ann = store.by_annotator(name)
                shared = sorted(set(ann) & set(dataset_labels))
                if len(shared) < 2:
                    continue
                vs_dataset.append(
                    _pairwise_entry(
                        name,
                        "dataset",
                        [ann[p].label for p in shared],
                        [dataset_labels[p] for p in shared],
                    )
                )
        return {"pairwise": pairwise, "vs_dataset": vs_dataset}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
