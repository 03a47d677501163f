"""Exact proper metric space models with finite ball enumeration.

Four models are provided:

* ``LatticeSpace`` -- Z^k (or the sub-semigroup N^k) with a word metric.
  The standard generating set {+-e_i} gives the l1 metric; custom
  generating sets fall back to breadth-first word length.  N^k carries
  the restriction of the Z^k word metric, so it sits isometrically
  inside Z^k.
* ``FreeGroupSpace`` -- the rank-2 free group as reduced strings over
  ``aAbB`` (``A`` is the inverse of ``a``).  With standard generators the
  Cayley graph is a tree and d(u, v) = |u| + |v| - 2 lcp(u, v).
* ``BinaryTreeSpace`` -- the rooted binary tree.  A vertex is a tuple of
  bits stored least-significant-bit first; the empty tuple is the
  basepoint and the parent of a vertex drops its last (most significant)
  bit.
* ``ConeSpace`` -- lives in :mod:`coarselab.cone`; distance there is the
  grid upper-bound approximation.

All lattice / word / tree distances are exact integers; no floating
point enters these models.  Ball enumeration is capped (default 10^6
points) and exceeding the cap raises ``CapExceeded`` rather than
truncating silently.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

DEFAULT_CAP = 1_000_000

LETTERS = "aAbB"
_INVERSE = {"a": "A", "A": "a", "b": "B", "B": "b"}


class ModelMismatch(ValueError):
    """A point does not belong to the model of the space handle."""


class CapExceeded(RuntimeError):
    """An enumeration would exceed the configured cardinality cap."""


@dataclass(frozen=True)
class BallSpec:
    """A closed metric ball given by center and radius."""

    center: Any
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("ball radius must be >= 0")


# ---------------------------------------------------------------------------
# free-word arithmetic


def reduce_word(letters: Iterable[str]) -> str:
    """Freely reduce a letter sequence over {a, A, b, B}.

    Stack-based; idempotent and independent of cancellation order.
    """
    stack: list[str] = []
    for ch in letters:
        if ch not in _INVERSE:
            raise ValueError(f"invalid letter {ch!r}; expected one of {LETTERS!r}")
        if stack and stack[-1] == _INVERSE[ch]:
            stack.pop()
        else:
            stack.append(ch)
    return "".join(stack)


def word_inverse(w: str) -> str:
    return w[::-1].swapcase()


def word_multiply(u: str, v: str) -> str:
    """Product of two reduced words, reduced at the junction."""
    stack = list(u)
    for ch in v:
        if stack and stack[-1] == _INVERSE[ch]:
            stack.pop()
        else:
            stack.append(ch)
    return "".join(stack)


def is_reduced(w: str) -> bool:
    return all(ch in _INVERSE for ch in w) and all(
        w[i + 1] != _INVERSE[w[i]] for i in range(len(w) - 1)
    )


def enumerate_reduced_words(length: int) -> Iterator[str]:
    """All reduced words of exactly the given length (4 * 3^(n-1) of them)."""
    if length == 0:
        yield ""
        return
    for first in LETTERS:
        stack = [(first,)]
        while stack:
            w = stack.pop()
            if len(w) == length:
                yield "".join(w)
                continue
            for ch in LETTERS:
                if ch != _INVERSE[w[-1]]:
                    stack.append(w + (ch,))


# ---------------------------------------------------------------------------
# space handles


class Space:
    """Common surface of the space handles.

    Subclasses provide ``model``, ``integer_metric``, ``basepoint``,
    ``validate``, ``distance``, ``closed_ball`` and vectorized
    ``pairwise`` / ``paired`` distance evaluation.
    """

    model: str = "abstract"
    integer_metric: bool = False
    cap: int = DEFAULT_CAP

    @property
    def basepoint(self):
        raise NotImplementedError

    def validate(self, p):
        """Check that ``p`` belongs to this model; return its canonical form."""
        raise NotImplementedError

    def distance(self, p, q):
        raise NotImplementedError

    def closed_ball(self, center, r) -> list:
        raise NotImplementedError

    def format_point(self, p) -> str:
        raise NotImplementedError

    # vectorized fallbacks; concrete models override with numpy paths
    def pairwise(self, ps: Sequence, qs: Sequence) -> np.ndarray:
        """Full distance matrix between two point sequences."""
        out = np.empty((len(ps), len(qs)))
        for i, p in enumerate(ps):
            for j, q in enumerate(qs):
                out[i, j] = self.distance(p, q)
        return out

    def paired(self, ps: Sequence, qs: Sequence) -> np.ndarray:
        """Elementwise distances of two equal-length point sequences."""
        if len(ps) != len(qs):
            raise ValueError("paired distance needs equal-length sequences")
        return np.array([self.distance(p, q) for p, q in zip(ps, qs)], dtype=float)

    def _check_cap(self, n: int, what: str = "ball enumeration"):
        if n > self.cap:
            raise CapExceeded(f"{what} exceeded cap of {self.cap} points")


def _as_int_radius(r) -> int:
    if r < 0:
        raise ValueError("radius must be >= 0")
    return int(np.floor(r))


@dataclass(frozen=True)
class LatticeSpace(Space):
    """Z^k (signed) or N^k (unsigned) with a word metric.

    ``generators`` is an optional tuple of integer vectors; its symmetric
    closure generates Z^k.  ``None`` means the standard basis, for which
    the word metric is l1.  For N^k the point set is the non-negative
    orthant while the metric stays the ambient Z^k word metric.
    """

    rank: int
    signed: bool = True
    generators: tuple[tuple[int, ...], ...] | None = None
    cap: int = DEFAULT_CAP

    model = "lattice"
    integer_metric = True

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.generators is not None:
            for g in self.generators:
                if len(g) != self.rank:
                    raise ValueError("generator length must equal rank")
                if all(c == 0 for c in g):
                    raise ValueError("zero vector cannot generate")

    @property
    def basepoint(self) -> tuple[int, ...]:
        return (0,) * self.rank

    @cached_property
    def moves(self) -> tuple[tuple[int, ...], ...]:
        if self.generators is None:
            gens = []
            for i in range(self.rank):
                e = [0] * self.rank
                e[i] = 1
                gens.append(tuple(e))
        else:
            gens = list(self.generators)
        sym = {g for g in gens} | {tuple(-c for c in g) for g in gens}
        return tuple(sorted(sym))

    @property
    def standard(self) -> bool:
        return self.generators is None

    def validate(self, p):
        if not isinstance(p, tuple) or len(p) != self.rank:
            raise ModelMismatch(f"expected integer tuple of length {self.rank}: {p!r}")
        if not all(isinstance(c, (int, np.integer)) for c in p):
            raise ModelMismatch(f"lattice coordinates must be integers: {p!r}")
        if not self.signed and any(c < 0 for c in p):
            raise ModelMismatch(f"N^{self.rank} point has a negative coordinate: {p!r}")
        return tuple(int(c) for c in p)

    def distance(self, p, q) -> int:
        p = self.validate(p)
        q = self.validate(q)
        delta = tuple(b - a for a, b in zip(p, q))
        if self.standard:
            return sum(abs(c) for c in delta)
        return self._word_length(delta)

    @cached_property
    def _word_length_memo(self) -> dict:
        return {(0,) * self.rank: 0}

    def _word_length(self, delta: tuple[int, ...]) -> int:
        # breadth-first word length over the symmetrized generating set,
        # grown on demand and memoized
        memo = self._word_length_memo
        if delta in memo:
            return memo[delta]
        frontier = [v for v, d in memo.items() if d == max(memo.values())]
        depth = max(memo.values())
        while delta not in memo:
            self._check_cap(len(memo), "word-length search")
            nxt = []
            for v in frontier:
                for m in self.moves:
                    w = tuple(a + b for a, b in zip(v, m))
                    if w not in memo:
                        memo[w] = depth + 1
                        nxt.append(w)
            if not nxt:
                raise ModelMismatch(f"{delta!r} is not generated by {self.moves!r}")
            frontier = nxt
            depth += 1
        return memo[delta]

    def closed_ball(self, center, r) -> list:
        center = self.validate(center)
        radius = _as_int_radius(r)
        # enumerate in the ambient Z^k, then restrict to the orthant for N^k
        seen = {center: 0}
        queue = deque([center])
        while queue:
            v = queue.popleft()
            if seen[v] == radius:
                continue
            for m in self.moves:
                w = tuple(a + b for a, b in zip(v, m))
                if w not in seen:
                    self._check_cap(len(seen) + 1)
                    seen[w] = seen[v] + 1
                    queue.append(w)
        pts = seen.keys()
        if not self.signed:
            pts = (p for p in pts if all(c >= 0 for c in p))
        return sorted(pts)

    def pairwise(self, ps, qs) -> np.ndarray:
        if not self.standard:
            return super().pairwise(ps, qs)
        a = np.asarray(ps, dtype=np.int64).reshape(len(ps), self.rank)
        b = np.asarray(qs, dtype=np.int64).reshape(len(qs), self.rank)
        return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=-1)

    def paired(self, ps, qs) -> np.ndarray:
        if not self.standard:
            return super().paired(ps, qs)
        if len(ps) != len(qs):
            raise ValueError("paired distance needs equal-length sequences")
        a = np.asarray(ps, dtype=np.int64).reshape(len(ps), self.rank)
        b = np.asarray(qs, dtype=np.int64).reshape(len(qs), self.rank)
        return np.abs(a - b).sum(axis=-1)

    def format_point(self, p) -> str:
        return "(" + ",".join(str(c) for c in p) + ")"


@dataclass(frozen=True)
class FreeGroupSpace(Space):
    """The rank-2 free group on {a, b} as reduced strings.

    With the standard generating set the word metric is computed from the
    longest common prefix; a custom generating set (tuple of reduced
    words, symmetrized automatically) switches to breadth-first word
    length with the cap as guard.
    """

    generators: tuple[str, ...] = ("a", "b")
    cap: int = DEFAULT_CAP

    model = "free-group"
    integer_metric = True

    def __post_init__(self):
        for g in self.generators:
            if not g or not is_reduced(g):
                raise ValueError(f"generator must be a nonempty reduced word: {g!r}")

    @property
    def basepoint(self) -> str:
        return ""

    @property
    def standard(self) -> bool:
        return set(self.generators) in ({"a", "b"}, {"a", "A", "b", "B"})

    @cached_property
    def moves(self) -> tuple[str, ...]:
        sym = set(self.generators) | {word_inverse(g) for g in self.generators}
        return tuple(sorted(sym))

    def validate(self, p):
        if not isinstance(p, str) or not is_reduced(p):
            raise ModelMismatch(f"expected a reduced word over {LETTERS!r}: {p!r}")
        return p

    def distance(self, p, q) -> int:
        p = self.validate(p)
        q = self.validate(q)
        if self.standard:
            lcp = 0
            for x, y in zip(p, q):
                if x != y:
                    break
                lcp += 1
            return len(p) + len(q) - 2 * lcp
        return self._word_length(word_multiply(word_inverse(p), q))

    @cached_property
    def _word_length_memo(self) -> dict:
        return {"": 0}

    def _word_length(self, w: str) -> int:
        memo = self._word_length_memo
        if w in memo:
            return memo[w]
        depth = max(memo.values())
        frontier = [v for v, d in memo.items() if d == depth]
        while w not in memo:
            self._check_cap(len(memo), "word-length search")
            nxt = []
            for v in frontier:
                for m in self.moves:
                    u = word_multiply(v, m)
                    if u not in memo:
                        memo[u] = depth + 1
                        nxt.append(u)
            if not nxt:
                raise ModelMismatch(f"{w!r} is not generated by {self.moves!r}")
            frontier = nxt
            depth += 1
        return memo[w]

    def closed_ball(self, center, r) -> list:
        center = self.validate(center)
        radius = _as_int_radius(r)
        seen = {center: 0}
        queue = deque([center])
        while queue:
            v = queue.popleft()
            if seen[v] == radius:
                continue
            for m in self.moves:
                w = word_multiply(v, m)
                if w not in seen:
                    self._check_cap(len(seen) + 1)
                    seen[w] = seen[v] + 1
                    queue.append(w)
        return sorted(seen, key=lambda w: (len(w), w))

    # words of <= 20 letters pack into one int64, 3 bits per letter
    # (letters coded 1..4, 0 is the pad): the longest common prefix is the
    # trailing-zero count of the XOR, divided by 3
    _PACK_LIMIT = 20

    def _pack(self, ws: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        code = {c: i + 1 for i, c in enumerate(LETTERS)}
        packed = np.empty(len(ws), dtype=np.int64)
        lens = np.empty(len(ws), dtype=np.int64)
        for i, w in enumerate(ws):
            acc = 0
            for j, ch in enumerate(w):
                acc |= code[ch] << (3 * j)
            packed[i] = acc
            lens[i] = len(w)
        return packed, lens

    @staticmethod
    def _lcp_from_xor(x: np.ndarray, la, lb) -> np.ndarray:
        lowbit = x & -x
        with np.errstate(divide="ignore"):
            first_diff = np.where(
                x == 0, 63, np.log2(np.maximum(lowbit, 1)).astype(np.int64) // 3
            )
        return np.minimum(np.minimum(la, lb), first_diff)

    def pairwise(self, ps, qs) -> np.ndarray:
        if not self.standard or any(
            len(w) > self._PACK_LIMIT for w in itertools.chain(ps, qs)
        ):
            return super().pairwise(ps, qs)
        wa, la = self._pack(ps)
        wb, lb = self._pack(qs)
        out = np.empty((len(ps), len(qs)), dtype=np.int64)
        chunk = max(1, 8_000_000 // max(len(qs), 1))  # bound the intermediates
        for i0 in range(0, len(ps), chunk):
            i1 = min(i0 + chunk, len(ps))
            lcp = self._lcp_from_xor(
                wa[i0:i1, None] ^ wb[None, :], la[i0:i1, None], lb[None, :]
            )
            out[i0:i1] = la[i0:i1, None] + lb[None, :] - 2 * lcp
        return out

    def paired(self, ps, qs) -> np.ndarray:
        if len(ps) != len(qs):
            raise ValueError("paired distance needs equal-length sequences")
        if not self.standard or any(
            len(w) > self._PACK_LIMIT for w in itertools.chain(ps, qs)
        ):
            return super().paired(ps, qs)
        wa, la = self._pack(ps)
        wb, lb = self._pack(qs)
        lcp = self._lcp_from_xor(wa ^ wb, la, lb)
        return la + lb - 2 * lcp

    def format_point(self, p) -> str:
        return p if p else "e"


def tree_vertex_value(v: tuple[int, ...]) -> int:
    """Integer encoded by a vertex's bits (index 0 = least significant)."""
    return sum(b << k for k, b in enumerate(v))


@dataclass(frozen=True)
class BinaryTreeSpace(Space):
    """Rooted binary tree; vertices are bit tuples, LSB first, () is the root.

    A vertex of depth n+1 is joined to the depth-n vertex obtained by
    dropping its last (most significant) bit, and the root is joined to
    (0,) and (1,).
    """

    cap: int = DEFAULT_CAP

    model = "binary-tree"
    integer_metric = True

    @property
    def basepoint(self) -> tuple[int, ...]:
        return ()

    def validate(self, p):
        if not isinstance(p, tuple) or not all(b in (0, 1) for b in p):
            raise ModelMismatch(f"expected a tuple of bits: {p!r}")
        return p

    def distance(self, p, q) -> int:
        p = self.validate(p)
        q = self.validate(q)
        # XOR of the encoded values locates the first disagreeing bit
        x = tree_vertex_value(p) ^ tree_vertex_value(q)
        if x == 0:
            lcp = min(len(p), len(q))
        else:
            lcp = min((x & -x).bit_length() - 1, len(p), len(q))
        return len(p) + len(q) - 2 * lcp

    def neighbors(self, v: tuple[int, ...]) -> list[tuple[int, ...]]:
        out = [v + (0,), v + (1,)]
        if v:
            out.append(v[:-1])
        return out

    def closed_ball(self, center, r) -> list:
        center = self.validate(center)
        radius = _as_int_radius(r)
        seen = {center: 0}
        queue = deque([center])
        while queue:
            v = queue.popleft()
            if seen[v] == radius:
                continue
            for w in self.neighbors(v):
                if w not in seen:
                    self._check_cap(len(seen) + 1)
                    seen[w] = seen[v] + 1
                    queue.append(w)
        return sorted(seen, key=lambda w: (len(w), w))

    def pairwise(self, ps, qs) -> np.ndarray:
        if any(len(p) > 62 for p in itertools.chain(ps, qs)):
            return super().pairwise(ps, qs)
        va = np.array([tree_vertex_value(p) for p in ps], dtype=np.int64)
        vb = np.array([tree_vertex_value(q) for q in qs], dtype=np.int64)
        la = np.array([len(p) for p in ps], dtype=np.int64)
        lb = np.array([len(q) for q in qs], dtype=np.int64)
        out = np.empty((len(ps), len(qs)), dtype=np.int64)
        chunk = max(1, 8_000_000 // max(len(qs), 1))  # bound the intermediates
        for i0 in range(0, len(ps), chunk):
            i1 = min(i0 + chunk, len(ps))
            x = va[i0:i1, None] ^ vb[None, :]
            lowbit = x & -x
            with np.errstate(divide="ignore"):
                tz = np.where(
                    x == 0, 63, np.log2(np.maximum(lowbit, 1)).astype(np.int64)
                )
            lcp = np.minimum(np.minimum(la[i0:i1, None], lb[None, :]), tz)
            out[i0:i1] = la[i0:i1, None] + lb[None, :] - 2 * lcp
        return out

    def paired(self, ps, qs) -> np.ndarray:
        if len(ps) != len(qs):
            raise ValueError("paired distance needs equal-length sequences")
        return np.array([self.distance(p, q) for p, q in zip(ps, qs)], dtype=np.int64)

    def format_point(self, p) -> str:
        return "".join(str(b) for b in p) if p else "*"


def word_metric_bfs_oracle(space: Space, r) -> dict:
    """Breadth-first distance table from the basepoint, radius <= r.

    Independent of the model's closed-form ``distance``; used as the
    acceptance oracle.  Supported for the finitely generated models
    (lattice, free group, binary tree).
    """
    radius = _as_int_radius(r)
    if isinstance(space, LatticeSpace):
        ambient = LatticeSpace(space.rank, True, space.generators, space.cap)
        step = lambda v: (
            tuple(a + b for a, b in zip(v, m)) for m in ambient.moves
        )
        keep = (lambda v: all(c >= 0 for c in v)) if not space.signed else (lambda v: True)
    elif isinstance(space, FreeGroupSpace):
        step = lambda v: (word_multiply(v, m) for m in space.moves)
        keep = lambda v: True
    elif isinstance(space, BinaryTreeSpace):
        step = space.neighbors
        keep = lambda v: True
    else:
        raise ValueError(f"BFS oracle is not defined for model {space.model!r}")

    base = space.basepoint
    seen = {base: 0}
    queue = deque([base])
    while queue:
        v = queue.popleft()
        if seen[v] == radius:
            continue
        for w in step(v):
            if w not in seen:
                if len(seen) + 1 > space.cap:
                    raise CapExceeded(f"BFS oracle exceeded cap of {space.cap}")
                seen[w] = seen[v] + 1
                queue.append(w)
    return {v: d for v, d in seen.items() if keep(v)}


# ---------------------------------------------------------------------------
# configuration


def _parse_generators_lattice(text: str, rank: int) -> tuple[tuple[int, ...], ...]:
    gens = []
    for part in text.split(","):
        coords = tuple(int(c) for c in part.split())
        if len(coords) != rank:
            raise ValueError(f"generator {part!r} does not have rank {rank}")
        gens.append(coords)
    return tuple(gens)


def space_from_config(cfg: dict) -> Space:
    """Build a space handle from a flat key-value mapping.

    Recognized ``space`` values: ``Z^k``, ``N^k`` (k a positive integer),
    ``F2``, ``tree`` (or ``T2``), ``cone``.  Lattice and free-group
    handles accept an optional ``generators`` entry; cone handles are
    delegated to :mod:`coarselab.cone` and use its grid keys.
    """
    name = str(cfg.get("space", "")).strip()
    if not name:
        raise ValueError("missing required field 'space'")
    cap = int(cfg.get("cap", DEFAULT_CAP))
    low = name.lower()
    if low.startswith(("z^", "n^")) or low in ("z", "n"):
        rank = int(low[2:]) if "^" in low else 1
        signed = low.startswith("z")
        gens = None
        if "generators" in cfg:
            gens = _parse_generators_lattice(str(cfg["generators"]), rank)
        return LatticeSpace(rank=rank, signed=signed, generators=gens, cap=cap)
    if low == "f2":
        gens = ("a", "b")
        if "generators" in cfg:
            gens = tuple(w.strip() for w in str(cfg["generators"]).split(","))
        return FreeGroupSpace(generators=gens, cap=cap)
    if low in ("tree", "t2", "binary-tree"):
        return BinaryTreeSpace(cap=cap)
    if low == "cone":
        from . import cone

        return cone.cone_space_from_config(cfg, cap=cap)
    raise ValueError(f"unknown space model {name!r}")
