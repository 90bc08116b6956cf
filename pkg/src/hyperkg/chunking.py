"""Sliding-window document chunking with boundary-aware cuts.

Sizes are in characters. Each chunk ends at the last boundary marker found in
the window [target_size - overlap, target_size] from its start; if no marker
falls in that window the chunk hard-cuts at target_size. The next chunk starts
``overlap`` characters before the previous end, so adjacent chunks share a
localized context.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ChunkingError

DEFAULT_BOUNDARY_MARKERS = ("\n\n", ". ", "! ", "? ")


@dataclass
class ChunkingConfig:
    target_size: int = 1200
    overlap: int = 200
    boundary_markers: tuple[str, ...] = DEFAULT_BOUNDARY_MARKERS

    def validate(self) -> None:
        if self.target_size <= 0:
            raise ChunkingError(f"target_size must be positive, got {self.target_size}")
        if not 0 <= self.overlap < self.target_size:
            raise ChunkingError(
                f"overlap must satisfy 0 <= overlap < target_size, got {self.overlap}"
            )


@dataclass
class Chunk:
    id: str
    text: str
    span: tuple[int, int] = field(default=(0, 0))


def _find_cut(document: str, start: int, config: ChunkingConfig) -> int:
    """End offset for the chunk starting at ``start``."""
    tentative = start + config.target_size
    if tentative >= len(document):
        return len(document)
    window_lo = max(start + config.target_size - config.overlap, start + 1)
    for marker in config.boundary_markers:
        # Latest marker whose start lies inside the window; chunk ends after it.
        idx = document.rfind(marker, window_lo, tentative)
        if idx != -1:
            return idx + len(marker)
    return tentative


def chunk_document(document: str, config: ChunkingConfig | None = None) -> list[Chunk]:
    """Split a document into ordered, overlapping chunks covering every character."""
    if not document:
        raise ChunkingError("cannot chunk an empty document")
    config = config or ChunkingConfig()
    config.validate()
    chunks: list[Chunk] = []
    start = 0
    while start < len(document):
        end = _find_cut(document, start, config)
        chunks.append(Chunk(id=f"c{len(chunks):04d}", text=document[start:end], span=(start, end)))
        if end >= len(document):
            break
        # Guarantee forward progress even for degenerate overlap settings.
        start = max(end - config.overlap, start + 1)
    return chunks
