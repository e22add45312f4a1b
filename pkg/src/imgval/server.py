"""HTTP facade over the recommender and evaluation engine."""

from __future__ import annotations

import uuid
from threading import Lock

from fastapi import FastAPI, HTTPException
from fastapi.responses import Response

from .aggregate import AggregationSpec
from .cheatsheets import METRIC_REGISTRY, resolve_metric_id
from .core import IncompleteFingerprint, ProblemFingerprint
from .evaluate import EvaluationError, evaluate_pool
from .io import SchemaError, canonical_json, parse_dataset
from .recommend import (MetricPool, OutOfFrontier, Session, export_graph,
                        recommend)


def _json_response(payload, status_code: int = 200) -> Response:
    """Canonical serialization so CLI and HTTP emit identical bytes."""
    return Response(canonical_json(payload), status_code=status_code,
                    media_type="application/json")


def create_app() -> FastAPI:
    app = FastAPI(title="imgval", version="0.1.0")
    sessions: dict[str, Session] = {}
    lock = Lock()

    def session_of(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return session

    @app.get("/graph")
    def get_graph():
        return _json_response(export_graph())

    @app.post("/session", status_code=201)
    def create_session(body: dict | None = None):
        session_id = uuid.uuid4().hex
        with lock:
            session = Session(session_id)
            if body and body.get("transcript"):
                try:
                    session = Session.replay(body["transcript"], session_id)
                except (OutOfFrontier, ValueError) as exc:
                    raise HTTPException(400, str(exc))
            sessions[session_id] = session
        question = session.next_question()
        return _json_response({
            "id": session_id,
            "question": question.to_json() if question else None,
            "category": session.category_value(),
            "transcript": session.transcript,
        }, 201)

    @app.get("/session/{session_id}/question")
    def get_question(session_id: str):
        session = session_of(session_id)
        question = session.next_question()
        return _json_response({
            "question": question.to_json() if question else None,
            "complete": question is None,
            "category": session.category_value(),
            "transcript": session.transcript,
        })

    @app.post("/session/{session_id}/answer")
    def post_answer(session_id: str, body: dict):
        session = session_of(session_id)
        if "item" not in body or "value" not in body:
            raise HTTPException(400, "answer needs 'item' and 'value'")
        with lock:
            try:
                session.answer(body["item"], body["value"])
            except OutOfFrontier as exc:
                raise HTTPException(409, str(exc))
            except (ValueError, KeyError) as exc:
                raise HTTPException(400, str(exc))
        question = session.next_question()
        return _json_response({
            "question": question.to_json() if question else None,
            "complete": question is None,
            "category": session.category_value(),
        })

    @app.post("/session/{session_id}/guide")
    def post_guide(session_id: str, body: dict):
        session = session_of(session_id)
        if "key" not in body or "choice" not in body:
            raise HTTPException(400, "guide resolution needs 'key' and 'choice'")
        with lock:
            try:
                session.resolve_guide(body["key"], body["choice"])
            except IncompleteFingerprint as exc:
                raise HTTPException(409, str(exc))
            except KeyError as exc:
                raise HTTPException(404, str(exc))
            except ValueError as exc:
                raise HTTPException(400, str(exc))
        return _json_response({"resolved": body["key"],
                               "choice": body["choice"]})

    @app.get("/session/{session_id}/pool")
    def get_pool(session_id: str):
        session = session_of(session_id)
        try:
            pool = session.pool()
        except IncompleteFingerprint as exc:
            raise HTTPException(409, f"fingerprint incomplete: {exc}")
        return _json_response(pool.to_json())

    @app.post("/recommend")
    def post_recommend(body: dict):
        try:
            fingerprint = ProblemFingerprint.from_json(body)
            pool = recommend(fingerprint)
        except IncompleteFingerprint as exc:
            raise HTTPException(400, str(exc))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return _json_response(pool.to_json())

    @app.post("/evaluate")
    def post_evaluate(body: dict):
        if "dataset" not in body or "pool" not in body:
            raise HTTPException(400, "evaluate needs 'dataset' and 'pool'")
        try:
            dataset = parse_dataset(body["dataset"], source="request")
            pool = MetricPool.from_json(body["pool"])
            agg = (AggregationSpec.from_json(body["aggregation"])
                   if body.get("aggregation") else None)
            report = evaluate_pool(
                dataset, pool, agg=agg, seed=body.get("seed"),
                resolve_default_guides=bool(body.get("resolve_defaults")))
        except (SchemaError, EvaluationError, ValueError) as exc:
            raise HTTPException(400, str(exc))
        payload = report.to_json()
        payload["curves"] = report.curves
        return _json_response(payload)

    @app.get("/metrics/{metric_id}/cheatsheet")
    def get_cheatsheet(metric_id: str):
        try:
            info = METRIC_REGISTRY[resolve_metric_id(metric_id)]
        except KeyError:
            raise HTTPException(404, f"unknown metric {metric_id!r}")
        return _json_response(info.to_json())

    @app.get("/metrics")
    def list_metrics():
        return _json_response(sorted(METRIC_REGISTRY))

    return app
