"""Ranker-dataset builders over question records and a paragraph corpus.

Three strategies: paired gold/non-gold paragraphs from the gold article
("finetune"), retrieval top-n labeled by answer containment ("aug1"), and
retrieve-m-then-rerank-keep-n ("aug2", defaults m=100, n=5). Labels always
come from case-insensitive containment of a normalized gold answer string.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..corpus import Paragraph
from ..eval import GoldRecord, contains_answer, jaccard
from ..index import InvertedIndex
from . import RankExample, TruncationLimits, rank


def _by_article(paragraphs: Iterable[Paragraph]) -> dict[str, list[Paragraph]]:
    grouped: dict[str, list[Paragraph]] = {}
    for p in paragraphs:
        grouped.setdefault(p.article_id, []).append(p)
    for plist in grouped.values():
        plist.sort(key=lambda p: p.position)
    return grouped


def resolve_gold_paragraph(record: GoldRecord,
                           article_paragraphs: Sequence[Paragraph],
                           ) -> Paragraph | None:
    """Locate the annotated source paragraph inside its article: exact body
    match first, then highest token-set Jaccard."""
    if record.gold_paragraph is None or not article_paragraphs:
        return None
    for p in article_paragraphs:
        if p.body == record.gold_paragraph:
            return p
    return max(article_paragraphs,
               key=lambda p: (jaccard(p.body, record.gold_paragraph),
                              -p.position))


def build_dataset_finetune(records: Sequence[GoldRecord],
                           paragraphs: Iterable[Paragraph],
                           ) -> list[RankExample]:
    """One positive (the gold paragraph) per question, plus one same-article
    paragraph that lacks every gold answer string, when one exists."""
    grouped = _by_article(paragraphs)
    examples: list[RankExample] = []
    for record in records:
        article = grouped.get(record.gold_article_id or "", [])
        gold = resolve_gold_paragraph(record, article)
        if gold is None:
            continue
        examples.append(RankExample(question=record.question,
                                    para_id=gold.para_id,
                                    text=gold.full_text, label=1))
        for p in article:
            if p.para_id == gold.para_id:
                continue
            if not contains_answer(p.full_text, record.gold_answers):
                examples.append(RankExample(question=record.question,
                                            para_id=p.para_id,
                                            text=p.full_text, label=0))
                break
    return examples


def build_dataset_aug1(records: Sequence[GoldRecord], index: InvertedIndex,
                       paragraphs: Mapping[str, Paragraph],
                       n: int = 5) -> list[RankExample]:
    """Top-n retrieved paragraphs per question, labeled by containment."""
    examples: list[RankExample] = []
    for record in records:
        for para_id, _ in index.retrieve(record.question, n).hits:
            text = paragraphs[para_id].full_text
            label = int(contains_answer(text, record.gold_answers))
            examples.append(RankExample(question=record.question,
                                        para_id=para_id, text=text,
                                        label=label))
    return examples


def build_dataset_aug2(records: Sequence[GoldRecord], index: InvertedIndex,
                       paragraphs: Mapping[str, Paragraph], ranker,
                       m: int = 100, n: int = 5,
                       limits: TruncationLimits = TruncationLimits(),
                       ) -> list[RankExample]:
    """Retrieve m, rerank by ranker score (ties by para_id), keep top n."""
    if m < n:
        raise ValueError(f"m must be >= n, got m={m}, n={n}")
    examples: list[RankExample] = []
    for record in records:
        scored = []
        for para_id, _ in index.retrieve(record.question, m).hits:
            para = paragraphs[para_id]
            scored.append((rank(ranker, record.question, para, limits),
                           para_id))
        scored.sort(key=lambda t: (-t[0], t[1]))
        for _, para_id in scored[:n]:
            text = paragraphs[para_id].full_text
            label = int(contains_answer(text, record.gold_answers))
            examples.append(RankExample(question=record.question,
                                        para_id=para_id, text=text,
                                        label=label))
    return examples


def write_rank_examples(examples: Iterable[RankExample],
                        path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({"question": ex.question,
                                 "para_id": ex.para_id, "text": ex.text,
                                 "label": ex.label}, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_rank_examples(path: str | Path) -> list[RankExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            examples.append(RankExample(question=rec["question"],
                                        para_id=rec["para_id"],
                                        text=rec["text"],
                                        label=int(rec["label"])))
    return examples
