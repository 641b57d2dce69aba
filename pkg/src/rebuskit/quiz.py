"""HTTP backend for human participants answering benchmark puzzles.

Sessions hold a seeded stratified sample of puzzles (text, icon, and overlap
pairs with both variants). Answers are persisted to an append-only JSONL log
per session, so a restarted server can resume every session. The correct
answer never leaves the server before a session is complete.
"""
from __future__ import annotations

import json
import random
import secrets
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from pydantic import BaseModel

from .benchmark import Puzzle, load_benchmark
from .evaluation import CHOICES

DEFAULT_STRATA = {"text": 37, "icon": 40, "pairs": 13}


class QuizError(Exception):
    pass


@dataclass
class Session:
    id: str
    participant: str
    puzzle_ids: list[str]
    answers: dict[str, dict] = field(default_factory=dict)

    @property
    def cursor(self) -> int:
        return len(self.answers)

    @property
    def complete(self) -> bool:
        return len(self.answers) == len(self.puzzle_ids)


class QuizService:
    """Session logic, independent of the HTTP layer."""

    def __init__(self, benchmark_dir: str | Path, data_dir: str | Path):
        self.benchmark_dir = Path(benchmark_dir)
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        partitions = load_benchmark(benchmark_dir)
        self.puzzles: dict[str, Puzzle] = {}
        for puzzles in partitions.values():
            for p in puzzles:
                self.puzzles[p.id] = p
        self.sessions: dict[str, Session] = {}
        self._reload_sessions()

    # -- persistence ------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.jsonl"

    def _append(self, session_id: str, record: dict) -> None:
        with open(self._log_path(session_id), "a", encoding="utf-8") as f:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")

    def _reload_sessions(self) -> None:
        for path in sorted(self.data_dir.glob("*.jsonl")):
            session = None
            for line in path.read_text(encoding="utf-8").splitlines():
                record = json.loads(line)
                if record["event"] == "created":
                    session = Session(
                        id=record["session_id"],
                        participant=record["participant"],
                        puzzle_ids=record["puzzle_ids"],
                    )
                elif record["event"] == "answer" and session is not None:
                    session.answers[record["puzzle_id"]] = {
                        "choice": record["choice"],
                        "timestamp": record["timestamp"],
                    }
            if session is not None:
                self.sessions[session.id] = session

    # -- operations --------------------------------------------------------

    def create_session(
        self,
        participant: str,
        seed: int = 42,
        text_count: int | None = None,
        icon_count: int | None = None,
        pair_count: int | None = None,
    ) -> Session:
        """Seeded stratified sample over non-overlap text/icon puzzles and
        overlap pairs; both variants of a sampled pair are included."""
        strata = {
            "text": DEFAULT_STRATA["text"] if text_count is None else text_count,
            "icon": DEFAULT_STRATA["icon"] if icon_count is None else icon_count,
            "pairs": DEFAULT_STRATA["pairs"] if pair_count is None else pair_count,
        }
        text_pool = sorted(
            p.id for p in self.puzzles.values()
            if p.partition == "text" and p.overlap_pair_id is None
        )
        icon_pool = sorted(
            p.id for p in self.puzzles.values()
            if p.partition == "icon" and p.overlap_pair_id is None
        )
        pair_pool: dict[str, list[str]] = {}
        for p in self.puzzles.values():
            if p.overlap_pair_id:
                pair_pool.setdefault(p.overlap_pair_id, []).append(p.id)
        pair_ids = sorted(pid for pid, members in pair_pool.items() if len(members) == 2)

        for name, pool_size, want in (
            ("text", len(text_pool), strata["text"]),
            ("icon", len(icon_pool), strata["icon"]),
            ("pairs", len(pair_ids), strata["pairs"]),
        ):
            if want > pool_size:
                raise QuizError(f"requested {want} {name} puzzles, only {pool_size} available")

        rng = random.Random(seed)
        chosen = rng.sample(text_pool, strata["text"]) + rng.sample(icon_pool, strata["icon"])
        for pair_id in rng.sample(pair_ids, strata["pairs"]):
            chosen += sorted(pair_pool[pair_id])
        rng.shuffle(chosen)

        session = Session(
            id=secrets.token_urlsafe(12), participant=participant, puzzle_ids=chosen
        )
        self.sessions[session.id] = session
        self._append(
            session.id,
            {
                "event": "created",
                "session_id": session.id,
                "participant": participant,
                "seed": seed,
                "strata": strata,
                "puzzle_ids": chosen,
                "timestamp": time.time(),
            },
        )
        return session

    def _session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise QuizError(f"unknown session {session_id!r}")
        return session

    def get_puzzle(self, session_id: str, index: int) -> dict:
        """Puzzle view for the participant; never includes the answer."""
        session = self._session(session_id)
        if not 0 <= index < len(session.puzzle_ids):
            raise QuizError(f"puzzle index {index} out of range")
        if index > session.cursor:
            raise QuizError(f"puzzle index {index} is ahead of the session cursor")
        puzzle = self.puzzles[session.puzzle_ids[index]]
        return {
            "puzzle_id": puzzle.id,
            "image_url": f"/images/{puzzle.id}.png",
            "question": "Which word/phrase is conveyed in this image from the "
            "following options (either A, B, C, or D)?",
            "options": puzzle.options,
            "progress": {"index": index + 1, "total": len(session.puzzle_ids)},
        }

    def submit_answer(self, session_id: str, puzzle_id: str, choice: str) -> dict:
        session = self._session(session_id)
        if choice not in CHOICES:
            raise QuizError(f"choice must be one of {CHOICES}")
        if puzzle_id not in session.puzzle_ids:
            raise QuizError(f"puzzle {puzzle_id!r} is not part of this session")
        if puzzle_id in session.answers:
            raise QuizError(f"puzzle {puzzle_id!r} was already answered")
        record = {"choice": choice, "timestamp": time.time()}
        session.answers[puzzle_id] = record
        self._append(
            session_id,
            {"event": "answer", "puzzle_id": puzzle_id, "choice": choice,
             "timestamp": record["timestamp"]},
        )
        return {
            "ok": True,
            "answered": session.cursor,
            "total": len(session.puzzle_ids),
            "complete": session.complete,
        }

    def results(self, session_id: str) -> dict:
        """Overall and per-partition accuracy; partial sessions are flagged."""
        session = self._session(session_id)
        per_partition = {p: {"answered": 0, "correct": 0} for p in ("text", "icon")}
        n_correct = 0
        for puzzle_id, record in session.answers.items():
            puzzle = self.puzzles[puzzle_id]
            stats = per_partition[puzzle.partition]
            stats["answered"] += 1
            correct = record["choice"] == puzzle.correct_letter
            stats["correct"] += correct
            n_correct += correct
        for stats in per_partition.values():
            stats["accuracy"] = (
                round(100.0 * stats["correct"] / stats["answered"], 2)
                if stats["answered"]
                else None
            )
        answered = session.cursor
        return {
            "participant": session.participant,
            "complete": session.complete,
            "partial": not session.complete,
            "answered": answered,
            "total": len(session.puzzle_ids),
            "overall_accuracy": round(100.0 * n_correct / answered, 2) if answered else None,
            "per_partition": per_partition,
        }

    def image_path(self, puzzle_id: str) -> Path:
        puzzle = self.puzzles.get(puzzle_id)
        if puzzle is None:
            raise QuizError(f"unknown puzzle {puzzle_id!r}")
        return self.benchmark_dir / puzzle.partition / "images" / puzzle.image


# -- HTTP layer -----------------------------------------------------------------


class CreateSessionBody(BaseModel):
    participant: str
    seed: int = 42
    text_count: int | None = None
    icon_count: int | None = None
    pair_count: int | None = None


class AnswerBody(BaseModel):
    puzzle_id: str
    choice: str


def create_app(benchmark_dir: str | Path, data_dir: str | Path) -> FastAPI:
    service = QuizService(benchmark_dir, data_dir)
    app = FastAPI(title="rebus quiz")
    app.state.service = service

    def _http(exc: QuizError, not_found_hint: str = "unknown") -> HTTPException:
        message = str(exc)
        if "unknown" in message or "out of range" in message:
            return HTTPException(status_code=404, detail=message)
        if "already answered" in message or "ahead of" in message:
            return HTTPException(status_code=409, detail=message)
        return HTTPException(status_code=400, detail=message)

    @app.post("/sessions")
    def post_session(body: CreateSessionBody):
        try:
            session = service.create_session(
                body.participant, body.seed, body.text_count, body.icon_count, body.pair_count
            )
        except QuizError as exc:
            raise _http(exc)
        return {"session_id": session.id, "total": len(session.puzzle_ids)}

    @app.get("/sessions/{session_id}/puzzles/{index}")
    def get_puzzle(session_id: str, index: int):
        try:
            return service.get_puzzle(session_id, index)
        except QuizError as exc:
            raise _http(exc)

    @app.post("/sessions/{session_id}/answers")
    def post_answer(session_id: str, body: AnswerBody):
        try:
            return service.submit_answer(session_id, body.puzzle_id, body.choice)
        except QuizError as exc:
            raise _http(exc)

    @app.get("/sessions/{session_id}/results")
    def get_results(session_id: str):
        try:
            return service.results(session_id)
        except QuizError as exc:
            raise _http(exc)

    @app.get("/images/{image_name}")
    def get_image(image_name: str):
        puzzle_id = image_name.removesuffix(".png")
        try:
            path = service.image_path(puzzle_id)
        except QuizError as exc:
            raise _http(exc)
        return FileResponse(path, media_type="image/png")

    return app
