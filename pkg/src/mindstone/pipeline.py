"""Cascade orchestration: retrieve, rank, optional RM3 second pass, read
the top ranked slice, fuse the three stage scores, and emit sorted answers.

All stages are pure over an immutable index and paragraph store, so a batch
can fan out across workers without changing any result.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import scorers
from .corpus import Paragraph
from .errors import MindstoneError, StageError
from .eval import normalize_answer
from .expansion import ExpansionParams, expand_query, question_vector
from .fusion import FusionWeights, fuse, normalize_scores
from .index import InvertedIndex
from .scorers import TruncationLimits

DEFAULT_WEIGHTS = FusionWeights(1 / 3, 1 / 3, 1 / 3)


@dataclass(frozen=True)
class PipelineConfig:
    n_retriever: int = 100
    read_fraction: float = 0.025
    n_reader: int | None = None  # explicit override of the read cutoff
    rm3_enabled: bool = False
    rm3: ExpansionParams = ExpansionParams()
    weights: FusionWeights = DEFAULT_WEIGHTS
    k_spans_per_paragraph: int = 1
    limits: TruncationLimits = TruncationLimits()

    def __post_init__(self):
        if self.n_retriever < 0:
            raise ValueError("n_retriever must be >= 0")
        if not 0.0 < self.read_fraction <= 1.0:
            raise ValueError("read_fraction must be in (0, 1]")
        if self.n_reader is not None and self.n_reader < 1:
            raise ValueError("n_reader must be >= 1 when set")
        if self.k_spans_per_paragraph < 1:
            raise ValueError("k_spans_per_paragraph must be >= 1")

    @property
    def n_reader_effective(self) -> int:
        if self.n_reader is not None:
            return self.n_reader
        return max(1, math.ceil(self.read_fraction * self.n_retriever))

    def to_dict(self) -> dict:
        return {
            "n_retriever": self.n_retriever,
            "read_fraction": self.read_fraction,
            "n_reader": self.n_reader,
            "k_spans_per_paragraph": self.k_spans_per_paragraph,
            "rm3": {
                "enabled": self.rm3_enabled,
                "alpha": self.rm3.alpha,
                "terms": self.rm3.top_terms,
                "second_pass_n": self.rm3.second_pass_n,
            },
            "fusion": {
                "w_retriever": self.weights.w_retriever,
                "w_ranker": self.weights.w_ranker,
                "w_reader": self.weights.w_reader,
            },
            "limits": {
                "ranker_para_tokens": self.limits.ranker_para_tokens,
                "reader_total_tokens": self.limits.reader_total_tokens,
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PipelineConfig":
        base = cls()
        rm3 = data.get("rm3", {})
        fusion_cfg = data.get("fusion", {})
        limits = data.get("limits", {})
        return cls(
            n_retriever=data.get("n_retriever", base.n_retriever),
            read_fraction=data.get("read_fraction", base.read_fraction),
            n_reader=data.get("n_reader", base.n_reader),
            k_spans_per_paragraph=data.get("k_spans_per_paragraph",
                                           base.k_spans_per_paragraph),
            rm3_enabled=rm3.get("enabled", base.rm3_enabled),
            rm3=ExpansionParams(
                alpha=rm3.get("alpha", base.rm3.alpha),
                top_terms=rm3.get("terms", base.rm3.top_terms),
                second_pass_n=rm3.get("second_pass_n",
                                      base.rm3.second_pass_n)),
            weights=FusionWeights(
                w_retriever=fusion_cfg.get("w_retriever",
                                           base.weights.w_retriever),
                w_ranker=fusion_cfg.get("w_ranker", base.weights.w_ranker),
                w_reader=fusion_cfg.get("w_reader", base.weights.w_reader)),
            limits=TruncationLimits(
                ranker_para_tokens=limits.get("ranker_para_tokens",
                                              base.limits.ranker_para_tokens),
                reader_total_tokens=limits.get(
                    "reader_total_tokens", base.limits.reader_total_tokens)),
        )


@dataclass(frozen=True)
class ScoredCandidate:
    para_id: str
    s_retriever: float  # 0 for candidates only found by the RM3 pass
    s_ranker: float
    provenance: str  # "first_pass" | "rm3_pass"


@dataclass(frozen=True)
class SpanCandidate:
    """A reader span with its raw and normalized stage scores."""

    para_id: str
    start_char: int
    end_char: int
    text: str
    s_retriever: float
    s_ranker: float
    s_reader: float
    n_retriever: float
    n_ranker: float
    n_reader: float


@dataclass(frozen=True)
class RankedAnswer:
    answer_text: str
    para_id: str
    start_char: int
    end_char: int
    s_retriever: float
    s_ranker: float
    s_reader: float
    fused: float


@dataclass
class StageTrace:
    counts: dict[str, int] = field(default_factory=dict)
    times_ms: dict[str, float] = field(default_factory=dict)


@dataclass
class PipelineResult:
    answers: list[RankedAnswer]
    trace: StageTrace
    retrieved: list[tuple[str, float]]  # first-pass retrieval order
    ranked: list[tuple[str, float]]     # full pool in ranker order
    candidates: list[SpanCandidate] = field(default_factory=list)
    error: str | None = None


class Pipeline:
    """Immutable serving object tying the stages together."""

    def __init__(self, index: InvertedIndex,
                 paragraphs: Mapping[str, Paragraph], ranker, reader,
                 config: PipelineConfig = PipelineConfig()):
        self.index = index
        self.paragraphs = paragraphs
        self.ranker = ranker
        self.reader = reader
        self.config = config
        self.paragraph_texts = {pid: p.full_text
                                for pid, p in paragraphs.items()}

    def _paragraph(self, para_id: str, stage: str) -> Paragraph:
        try:
            return self.paragraphs[para_id]
        except KeyError:
            raise StageError(stage, f"no paragraph text for {para_id!r}")

    def _rank_many(self, question: str,
                   para_ids: Sequence[str]) -> dict[str, float]:
        out = {}
        for pid in para_ids:
            para = self._paragraph(pid, "rank")
            try:
                out[pid] = scorers.rank(self.ranker, question, para,
                                        self.config.limits)
            except MindstoneError:
                raise
            except Exception as exc:
                raise StageError("rank", f"{pid}: {exc}")
        return out

    def answer(self, question: str) -> PipelineResult:
        cfg = self.config
        trace = StageTrace()

        t0 = time.perf_counter()
        retrieval = self.index.retrieve(question, cfg.n_retriever)
        trace.times_ms["retrieve"] = (time.perf_counter() - t0) * 1000.0
        trace.counts["retrieved"] = len(retrieval.hits)

        t0 = time.perf_counter()
        rank_scores = self._rank_many(question, retrieval.para_ids())
        trace.times_ms["rank"] = (time.perf_counter() - t0) * 1000.0

        pool = [ScoredCandidate(pid, s_ret, rank_scores[pid], "first_pass")
                for pid, s_ret in retrieval.hits]

        t0 = time.perf_counter()
        if cfg.rm3_enabled and pool:
            q = question_vector(self.index, question)
            expanded = expand_query(
                q, [(c.para_id, c.s_ranker) for c in pool], self.index,
                cfg.rm3)
            depth = (cfg.rm3.second_pass_n
                     if cfg.rm3.second_pass_n is not None
                     else cfg.n_retriever)
            second = self.index.retrieve_weighted(expanded, depth)
            seen = {c.para_id for c in pool}
            new_ids = [pid for pid, _ in second.hits if pid not in seen]
            new_scores = self._rank_many(question, new_ids)
            pool.extend(ScoredCandidate(pid, 0.0, new_scores[pid], "rm3_pass")
                        for pid in new_ids)
            trace.counts["rm3_added"] = len(new_ids)
        else:
            trace.counts["rm3_added"] = 0
        trace.times_ms["rm3"] = (time.perf_counter() - t0) * 1000.0

        pool.sort(key=lambda c: (-c.s_ranker, c.para_id))
        trace.counts["ranked"] = len(pool)
        to_read = pool[:cfg.n_reader_effective]
        trace.counts["read"] = len(to_read)

        t0 = time.perf_counter()
        raw: list[tuple[ScoredCandidate, scorers.AnswerSpan]] = []
        for cand in to_read:
            para = self._paragraph(cand.para_id, "read")
            try:
                spans = scorers.read(self.reader, question, para,
                                     cfg.k_spans_per_paragraph, cfg.limits)
            except MindstoneError:
                raise
            except Exception as exc:
                raise StageError("read", f"{cand.para_id}: {exc}")
            raw.extend((cand, span) for span in spans)
        trace.times_ms["read"] = (time.perf_counter() - t0) * 1000.0
        trace.counts["spans"] = len(raw)

        t0 = time.perf_counter()
        n_ret = normalize_scores([c.s_retriever for c, _ in raw])
        n_rank = normalize_scores([c.s_ranker for c, _ in raw])
        n_read = normalize_scores([s.s_reader for _, s in raw])
        candidates = [SpanCandidate(
            para_id=cand.para_id, start_char=span.start_char,
            end_char=span.end_char, text=span.text,
            s_retriever=cand.s_retriever, s_ranker=cand.s_ranker,
            s_reader=span.s_reader, n_retriever=n_ret[i], n_ranker=n_rank[i],
            n_reader=n_read[i])
            for i, (cand, span) in enumerate(raw)]
        answers = self.fuse_candidates(candidates, cfg.weights)
        trace.times_ms["fuse"] = (time.perf_counter() - t0) * 1000.0
        trace.counts["answers"] = len(answers)

        return PipelineResult(
            answers=answers, trace=trace, retrieved=list(retrieval.hits),
            ranked=[(c.para_id, c.s_ranker) for c in pool],
            candidates=candidates)

    def collect_candidates(self, question: str) -> list[SpanCandidate]:
        """Stage scores for weight tuning: everything except fusion."""
        return self.answer(question).candidates

    @staticmethod
    def fuse_candidates(candidates: Sequence[SpanCandidate],
                        weights: FusionWeights) -> list[RankedAnswer]:
        """Fuse, sort (fused desc, ties para_id then start), and dedupe by
        normalized answer text keeping the highest-fused span."""
        scored = [(fuse((c.n_retriever, c.n_ranker, c.n_reader), weights), c)
                  for c in candidates]
        scored.sort(key=lambda t: (-t[0], t[1].para_id, t[1].start_char))
        answers = []
        seen: set[str] = set()
        for fused_score, c in scored:
            key = normalize_answer(c.text)
            if key in seen:
                continue
            seen.add(key)
            answers.append(RankedAnswer(
                answer_text=c.text, para_id=c.para_id,
                start_char=c.start_char, end_char=c.end_char,
                s_retriever=c.s_retriever, s_ranker=c.s_ranker,
                s_reader=c.s_reader, fused=fused_score))
        return answers

    def answer_batch(self, questions: Sequence[str],
                     workers: int = 1) -> list[PipelineResult]:
        """Element-wise answer(); output order matches input order and is
        independent of worker count. Per-question stage errors are recorded
        and the batch continues."""

        def safe(question: str) -> PipelineResult:
            try:
                return self.answer(question)
            except MindstoneError as exc:
                return PipelineResult(answers=[], trace=StageTrace(),
                                      retrieved=[], ranked=[],
                                      error=str(exc))

        if workers <= 1:
            return [safe(q) for q in questions]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(safe, questions))

    def with_config(self, config: PipelineConfig) -> "Pipeline":
        return Pipeline(self.index, self.paragraphs, self.ranker,
                        self.reader, config)


def answer_record(qid: str, result: PipelineResult) -> dict:
    """JSONL record for one answered question."""
    rec = {
        "qid": qid,
        "answers": [{
            "text": a.answer_text, "para_id": a.para_id,
            "start": a.start_char, "end": a.end_char,
            "s_retriever": a.s_retriever, "s_ranker": a.s_ranker,
            "s_reader": a.s_reader, "fused": a.fused,
        } for a in result.answers],
        "trace": {"counts": result.trace.counts,
                  "times_ms": result.trace.times_ms},
    }
    if result.error is not None:
        rec["error"] = result.error
    return rec


def dump_answer_line(qid: str, result: PipelineResult) -> str:
    return json.dumps(answer_record(qid, result), ensure_ascii=False)
