"""Phase 1: a short natural-language explanation of the debt behind each comment."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import prompts
from .corpus import CONTEXT_CAP, Dataset, SatdComment, SourceContext, extract_context
from .gateway import ChatRequest, Gateway


class ExplainError(RuntimeError):
    pass


@dataclass(frozen=True)
class Explanation:
    comment_id: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ExplainError(f"comment {self.comment_id!r}: empty explanation")


def number_lines(lines, start: int) -> str:
    width = len(str(start + len(lines) - 1))
    return "\n".join(f"{n:>{width}} | {line}" for n, line in enumerate(lines, start))


def build_explain_prompt(comment: SatdComment, context: SourceContext,
                         temperature: float = 1.0) -> ChatRequest:
    user = prompts.EXPLAIN_USER.format(
        line=comment.line_number,
        file=comment.file_path,
        comment=comment.text,
        first=context.start_line,
        last=context.end_line,
        truncated=" (window around the comment; file truncated)" if context.truncated else " (entire file)",
        code=number_lines(context.lines, context.start_line),
    )
    return ChatRequest(prompts.EXPLAIN_SYSTEM, user, temperature=temperature, tag="explain")


def generate_explanations(dataset: Dataset, gateway: Gateway, context_cap: int = CONTEXT_CAP) -> list[Explanation]:
    """One provider call per comment; the result is always in dataset order."""
    requests = [
        build_explain_prompt(c, extract_context(dataset, c, context_cap), gateway.temperature)
        for c in dataset.comments
    ]

    def run(i: int) -> Explanation:
        comment = dataset.comments[i]
        try:
            reply = gateway.complete(requests[i]).text.strip()
        except Exception as e:
            raise ExplainError(f"comment {comment.id!r}: {e}") from e
        if not reply:
            raise ExplainError(f"comment {comment.id!r}: provider returned an empty explanation")
        return Explanation(comment.id, reply)

    if not requests:
        return []
    if gateway.max_concurrency == 1:
        return [run(i) for i in range(len(requests))]
    with ThreadPoolExecutor(max_workers=gateway.max_concurrency) as pool:
        return list(pool.map(run, range(len(requests))))


def save_explanations(explanations: list[Explanation], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in explanations:
            fh.write(json.dumps({"comment_id": e.comment_id, "explanation": e.text}, ensure_ascii=False) + "\n")


def load_explanations(path) -> list[Explanation]:
    out = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if raw.strip():
            obj = json.loads(raw)
            out.append(Explanation(obj["comment_id"], obj["explanation"]))
    return out
