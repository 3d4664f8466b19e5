"""Loading SATD datasets and extracting bounded source context around comments.

A dataset manifest is JSON Lines, one object per comment::

    {"id": "c1", "text": "TODO: fix race", "file": "pkg/mod.py", "line": 10,
     "human_main": "Design", "human_sub": "Concurrency"}

``human_main`` / ``human_sub`` are optional and carry the human reference labels.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

CONTEXT_CAP = 2000


class CorpusError(ValueError):
    """Malformed dataset, reference, or unreadable source."""


@dataclass(frozen=True)
class SatdComment:
    id: str
    text: str
    file_path: str
    line_number: int
    human_main: str | None = None
    human_sub: str | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise CorpusError(f"comment id must be a non-empty string, got {self.id!r}")
        if not isinstance(self.text, str) or not self.text.strip():
            raise CorpusError(f"comment {self.id!r}: empty comment text")
        if isinstance(self.line_number, bool) or not isinstance(self.line_number, int):
            raise CorpusError(f"comment {self.id!r}: line must be an integer")
        if self.line_number < 1:
            raise CorpusError(f"comment {self.id!r}: line_number {self.line_number} < 1")
        if self.human_sub is not None and self.human_main is None:
            raise CorpusError(f"comment {self.id!r}: human_sub given without human_main")

    def to_record(self) -> dict:
        rec = {"id": self.id, "text": self.text, "file": self.file_path, "line": self.line_number}
        if self.human_main is not None:
            rec["human_main"] = self.human_main
        if self.human_sub is not None:
            rec["human_sub"] = self.human_sub
        return rec


@dataclass(frozen=True)
class Dataset:
    name: str
    comments: tuple[SatdComment, ...]
    source_root: Path

    def __len__(self):
        return len(self.comments)

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.comments]

    def source_path(self, comment: SatdComment) -> Path:
        return resolve_under(self.source_root, comment.file_path, comment.id)

    def validate_sources(self) -> None:
        """Check that every comment's file exists under ``source_root``."""
        for c in self.comments:
            path = self.source_path(c)
            if not path.is_file():
                raise CorpusError(f"comment {c.id!r}: source file not found: {path}")


@dataclass(frozen=True)
class SourceContext:
    lines: tuple[str, ...]
    start_line: int
    truncated: bool

    @property
    def end_line(self) -> int:
        return self.start_line + len(self.lines) - 1


@dataclass(frozen=True)
class HumanTaxonomyRef:
    """Human-defined categories. Name tuples keep first-appearance order."""

    main_names: tuple[str, ...]
    sub_names: tuple[str, ...]
    assignments: dict[str, tuple[str, str | None]] = field(default_factory=dict)

    def labels(self, level: str) -> dict[str, str]:
        """Map comment id -> category name at ``level`` (ids without a label are skipped)."""
        if level == "main":
            return {cid: m for cid, (m, _) in self.assignments.items()}
        if level == "sub":
            return {cid: s for cid, (_, s) in self.assignments.items() if s is not None}
        raise ValueError(f"unknown level {level!r}")

    def names(self, level: str) -> tuple[str, ...]:
        if level == "main":
            return self.main_names
        if level == "sub":
            return self.sub_names
        raise ValueError(f"unknown level {level!r}")


def resolve_under(root: Path, rel: str, cid: str = "?") -> Path:
    root = Path(root).resolve()
    path = (root / rel).resolve()
    if path != root and root not in path.parents:
        raise CorpusError(f"comment {cid!r}: file {rel!r} escapes source root {root}")
    return path


def _parse_record(obj, lineno: int) -> SatdComment:
    if not isinstance(obj, dict):
        raise CorpusError(f"manifest line {lineno}: expected a JSON object")
    cid = obj.get("id")
    missing = [k for k in ("id", "text", "file", "line") if k not in obj]
    if missing:
        raise CorpusError(f"record {cid!r} (manifest line {lineno}): missing {', '.join(missing)}")
    return SatdComment(
        id=str(cid),
        text=obj["text"],
        file_path=obj["file"],
        line_number=obj["line"],
        human_main=obj.get("human_main") or None,
        human_sub=obj.get("human_sub") or None,
    )


def load_dataset(manifest_path, source_root=None, name: str | None = None) -> Dataset:
    """Load a JSONL manifest into a :class:`Dataset`, preserving record order.

    ``source_root`` defaults to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise CorpusError(f"manifest not found: {manifest_path}")
    comments: list[SatdComment] = []
    seen: set[str] = set()
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as e:
                raise CorpusError(f"manifest line {lineno}: parse failure: {e}") from e
            comment = _parse_record(obj, lineno)
            if comment.id in seen:
                raise CorpusError(f"duplicate comment id {comment.id!r}")
            seen.add(comment.id)
            comments.append(comment)
    if not comments:
        raise CorpusError("dataset contains no comments")
    root = Path(source_root) if source_root is not None else manifest_path.parent
    ds = Dataset(name=name or manifest_path.stem, comments=tuple(comments), source_root=root)
    for c in ds.comments:
        ds.source_path(c)
    return ds


def save_dataset(dataset: Dataset, manifest_path) -> None:
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for c in dataset.comments:
            fh.write(json.dumps(c.to_record(), ensure_ascii=False) + "\n")


def split_source_lines(text: str) -> list[str]:
    """Split on LF, strip one trailing CR per line; an unterminated last line still counts."""
    if not text:
        return []
    parts = text.split("\n")
    if parts[-1] == "":
        parts.pop()
    return [p[:-1] if p.endswith("\r") else p for p in parts]


def read_source_lines(path: Path) -> list[str]:
    data = Path(path).read_bytes()
    return split_source_lines(data.decode("utf-8", errors="replace"))


def context_window(n_lines: int, line_number: int, cap: int = CONTEXT_CAP) -> tuple[int, int, bool]:
    """Return the inclusive 1-based (first, last, truncated) window for a comment line.

    Files within ``cap`` lines are returned whole. Longer files get ``cap // 2``
    lines before the comment and the rest after it, clamped to the file without
    shifting the window back in.
    """
    if n_lines <= cap:
        return 1, n_lines, False
    before = cap // 2
    first = max(1, line_number - before)
    last = min(n_lines, line_number - before + cap - 1)
    return first, last, True


def extract_context(dataset: Dataset, comment: SatdComment, cap: int = CONTEXT_CAP) -> SourceContext:
    path = dataset.source_path(comment)
    if not path.is_file():
        raise CorpusError(f"comment {comment.id!r}: source file not found: {path}")
    lines = read_source_lines(path)
    if not lines:
        raise CorpusError(f"comment {comment.id!r}: source file is empty: {path}")
    if comment.line_number > len(lines):
        raise CorpusError(
            f"comment {comment.id!r}: line {comment.line_number} beyond end of file ({len(lines)} lines)"
        )
    first, last, truncated = context_window(len(lines), comment.line_number, cap)
    return SourceContext(lines=tuple(lines[first - 1:last]), start_line=first, truncated=truncated)


def _reference_from_pairs(pairs: dict[str, tuple[str, str | None]]) -> HumanTaxonomyRef:
    mains: dict[str, None] = {}
    subs: dict[str, None] = {}
    for cid, (m, s) in pairs.items():
        if s is not None and m is None:
            raise CorpusError(f"comment {cid!r}: sub label {s!r} without a main label")
        if m is not None:
            mains.setdefault(m)
        if s is not None:
            subs.setdefault(s)
    clean = {cid: (m, s) for cid, (m, s) in pairs.items() if m is not None}
    if not clean:
        raise CorpusError("reference contains no labeled comments")
    return HumanTaxonomyRef(tuple(mains), tuple(subs), clean)


def load_human_reference(manifest_path) -> HumanTaxonomyRef:
    """Read human labels from a JSONL dataset manifest or a ``{"assignments": {...}}`` JSON file."""
    path = Path(manifest_path)
    if not path.is_file():
        raise CorpusError(f"reference not found: {path}")
    pairs: dict[str, tuple[str, str | None]] = {}
    if path.suffix == ".json":
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise CorpusError(f"{path}: parse failure: {e}") from e
        raw = doc.get("assignments") if isinstance(doc, dict) else None
        if not isinstance(raw, dict):
            raise CorpusError(f"{path}: expected an object with an 'assignments' map")
        for cid, val in raw.items():
            if isinstance(val, str):
                val = [val]
            if not isinstance(val, list) or not 1 <= len(val) <= 2:
                raise CorpusError(f"comment {cid!r}: assignment must be [main, sub]")
            main = val[0] or None
            sub = (val[1] or None) if len(val) == 2 else None
            pairs[str(cid)] = (main, sub)
    else:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                if not raw.strip():
                    continue
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as e:
                    raise CorpusError(f"reference line {lineno}: parse failure: {e}") from e
                main, sub = obj.get("human_main") or None, obj.get("human_sub") or None
                if main is None and sub is None:
                    continue
                pairs[str(obj.get("id"))] = (main, sub)
    return _reference_from_pairs(pairs)
