"""Splittings of a chain into overlapping A/B segments."""
from __future__ import annotations

from dataclasses import dataclass


class GeometryError(ValueError):
    """Infeasible (n, segment length, overlap) combination."""


@dataclass(frozen=True)
class SplittingGeometry:
    """Alternating segments A_1, B_1, A_2, B_2, ... covering the chain.

    Segments are tuples of sites in chain order (a periodic segment may wrap
    past site n-1).  ``X_cover`` is the list of all segments.
    """

    n: int
    segment_length: int
    overlap: int
    boundary: str
    A_segments: tuple[tuple[int, ...], ...]
    B_segments: tuple[tuple[int, ...], ...]

    @property
    def m(self) -> int:
        return len(self.A_segments)

    @property
    def A(self) -> frozenset:
        return frozenset(s for seg in self.A_segments for s in seg)

    @property
    def B(self) -> frozenset:
        return frozenset(s for seg in self.B_segments for s in seg)

    @property
    def A_c(self) -> tuple[int, ...]:
        return tuple(sorted(set(range(self.n)) - self.A))

    @property
    def B_c(self) -> tuple[int, ...]:
        return tuple(sorted(set(range(self.n)) - self.B))

    @property
    def X_cover(self) -> list[tuple[int, ...]]:
        out = []
        for k in range(max(len(self.A_segments), len(self.B_segments))):
            if k < len(self.A_segments):
                out.append(self.A_segments[k])
            if k < len(self.B_segments):
                out.append(self.B_segments[k])
        return out

    def validate(self) -> None:
        """Raise GeometryError unless every splitting invariant holds."""
        chain = set(range(self.n))
        for name, segs in (("A", self.A_segments), ("B", self.B_segments)):
            seen = set()
            for seg in segs:
                if not seg or not set(seg) <= chain:
                    raise GeometryError(f"{name} segment {seg} is empty or leaves the chain")
                if seen & set(seg):
                    raise GeometryError(f"{name} segments overlap")
                seen |= set(seg)
        if self.A | self.B != chain:
            raise GeometryError("A and B do not cover the chain")
        for i, (a, b) in enumerate(zip(self.A_segments, self.B_segments)):
            if not set(a) & set(b):
                raise GeometryError(f"A_{i + 1} and B_{i + 1} do not overlap")
            if i + 1 < len(self.A_segments) and not set(b) & set(self.A_segments[i + 1]):
                raise GeometryError(f"B_{i + 1} and A_{i + 2} do not overlap")
        if set().union(*map(set, self.X_cover)) != chain:
            raise GeometryError("X cover does not cover the chain")

    def to_dict(self) -> dict:
        return {
            "n": self.n, "segment_length": self.segment_length, "overlap": self.overlap,
            "boundary": self.boundary,
            "A_segments": [list(s) for s in self.A_segments],
            "B_segments": [list(s) for s in self.B_segments],
        }


def build_geometry(n: int, length: int, overlap: int, boundary: str = "periodic") -> SplittingGeometry:
    """Tile the chain left to right with alternating A/B segments.

    Segments have ``length`` sites and start every ``length - overlap``
    sites.  The number of segments is even; the last B segment runs to the
    end of the chain, absorbing the remainder, and on a periodic chain also
    wraps onto the first ``overlap`` sites so that it meets A_1.
    """
    if length < 1 or overlap < 1:
        raise GeometryError("segment length and overlap must be positive")
    if n < 2 * length:
        raise GeometryError(f"n={n} < 2*length={2 * length}")
    if 2 * overlap >= length:
        raise GeometryError(f"overlap {overlap} must be < length/2 = {length / 2}")
    stride = length - overlap
    count = 2 * (n // (2 * stride))
    starts = [k * stride for k in range(count)]
    segs = [tuple(range(s, s + length)) for s in starts[:-1]]
    last = tuple(range(starts[-1], n))
    if boundary == "periodic":
        last = last + tuple(range(overlap))
    elif boundary != "open":
        raise GeometryError(f"unknown boundary {boundary!r}")
    segs.append(last)
    geo = SplittingGeometry(n, length, overlap, boundary, tuple(segs[0::2]), tuple(segs[1::2]))
    geo.validate()
    return geo


def two_block_geometry(n: int, overlap: int, boundary: str = "periodic") -> SplittingGeometry:
    """One A and one B region whose complements are separated by ``overlap`` sites.

    On a ring the complements are separated on both sides, so
    ``n - 2*overlap`` sites are split between ``B^c`` (first) and ``A^c``.
    """
    if overlap < 1:
        raise GeometryError("overlap must be positive")
    if boundary == "periodic":
        free = n - 2 * overlap
        if free < 2:
            raise GeometryError(f"n={n} too small for two complements separated by {overlap} sites")
        bc = free // 2
        ac = free - bc
        b_seg = tuple(range(bc, n))
        a_seg = tuple(range(bc + overlap + ac, n)) + tuple(range(0, bc + overlap))
    elif boundary == "open":
        free = n - overlap
        if free < 2:
            raise GeometryError(f"n={n} too small for overlap {overlap}")
        bc = free // 2
        a_seg = tuple(range(0, bc + overlap))
        b_seg = tuple(range(bc, n))
    else:
        raise GeometryError(f"unknown boundary {boundary!r}")
    geo = SplittingGeometry(n, len(a_seg), overlap, boundary, (a_seg,), (b_seg,))
    geo.validate()
    return geo
