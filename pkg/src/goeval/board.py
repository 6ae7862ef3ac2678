"""Legal-move Go board: captures, atari flags, spatial patterns, per-move annotations.

Ruleset: suicide forbidden, simple ko (KGS-compatible). Coordinates are
(column, row), 1-based. Cell codes 0/1/2/3 = empty/black/white/off-board.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

from .records import BLACK, WHITE, GameRecord, Point

CELL_EMPTY = 0
CELL_BLACK = 1
CELL_WHITE = 2
CELL_OFF = 3

_CODE = {BLACK: CELL_BLACK, WHITE: CELL_WHITE}
_COLOR = {CELL_BLACK: BLACK, CELL_WHITE: WHITE}
_SWAP = (CELL_EMPTY, CELL_WHITE, CELL_BLACK, CELL_OFF)

PATTERN_SIZES = (2, 3, 4, 5, 6)


class IllegalMoveError(ValueError):
    """A move rejected by the rules; .rule is one of occupied/suicide/ko/off_board."""

    def __init__(self, rule: str, color: str, point: Point):
        super().__init__(f"illegal move: {rule} ({color} at {point})")
        self.rule = rule
        self.point = point


class AnnotationError(ValueError):
    """Replay failed mid-game; carries the 1-based move number."""

    def __init__(self, move_number: int, cause: IllegalMoveError):
        super().__init__(f"move {move_number}: {cause}")
        self.move_number = move_number
        self.cause = cause


def gridcular_distance(p: Point, q: Point) -> int:
    """Circle-like board metric: |dx| + |dy| + max(|dx|, |dy|)."""
    dx = abs(p[0] - q[0])
    dy = abs(p[1] - q[1])
    return dx + dy + (dx if dx > dy else dy)


def border_distance(p: Point, size: int) -> int:
    """Line number of a point, counting from the nearest board edge (1-based)."""
    x, y = p
    if not (1 <= x <= size and 1 <= y <= size):
        raise ValueError(f"point {p} off a {size}x{size} board")
    return min(x, y, size + 1 - x, size + 1 - y)


@lru_cache(maxsize=None)
def neighborhood_offsets(d: int) -> tuple[tuple[int, int], ...]:
    """Offsets at gridcular distance 1..d from the center, sorted by (row, col)."""
    offs = []
    for dy in range(-d, d + 1):
        for dx in range(-d, d + 1):
            g = abs(dx) + abs(dy) + max(abs(dx), abs(dy))
            if 1 <= g <= d:
                offs.append((dx, dy))
    return tuple(sorted(offs, key=lambda o: (o[1], o[0])))


# the 8 dihedral symmetries of the square as (a, b, c, d): (x,y) -> (ax+by, cx+dy)
_DIHEDRAL = (
    (1, 0, 0, 1),
    (-1, 0, 0, 1),
    (1, 0, 0, -1),
    (-1, 0, 0, -1),
    (0, 1, 1, 0),
    (0, -1, 1, 0),
    (0, 1, -1, 0),
    (0, -1, -1, 0),
)


@lru_cache(maxsize=None)
def _symmetry_perms(d: int) -> tuple[tuple[int, ...], ...]:
    offs = neighborhood_offsets(d)
    index = {o: i for i, o in enumerate(offs)}
    perms = []
    for a, b, c, dd in _DIHEDRAL:
        perms.append(tuple(index[(a * dx + b * dy, c * dx + dd * dy)] for dx, dy in offs))
    return tuple(perms)


def _pack(codes) -> bytes:
    out = bytearray((len(codes) + 3) // 4)
    for i, c in enumerate(codes):
        out[i >> 2] |= c << (6 - 2 * (i & 3))
    return bytes(out)


@dataclass(frozen=True)
class RawPattern:
    """Stone configuration around a move, before the move is played."""

    size: int
    cells: tuple[tuple[tuple[int, int], int], ...]  # ((dx, dy), cell code)
    to_move: str


class PatternKey(NamedTuple):
    """Canonical pattern encoding plus the move's atari flags.

    Equal keys mean the raw patterns are equivalent under the 8 board
    symmetries composed with the black-to-move color normalization.
    """

    cells: bytes
    atari_flag: bool
    atari_escape_flag: bool


def canonicalize(raw: RawPattern, atari_flag: bool, atari_escape_flag: bool) -> PatternKey:
    """Normalize to black's turn, minimize over the dihedral orbit, pack 2 bits/cell."""
    codes = [c for _, c in raw.cells]
    if raw.to_move == WHITE:
        codes = [_SWAP[c] for c in codes]
    best = min(_pack([codes[i] for i in perm]) for perm in _symmetry_perms(raw.size))
    return PatternKey(best, bool(atari_flag), bool(atari_escape_flag))


class MoveResult(NamedTuple):
    captures: int
    atari_flag: bool
    atari_escape_flag: bool
    captured_points: tuple[Point, ...]


class _Chain:
    __slots__ = ("stones", "libs")

    def __init__(self, stones: set, libs: set):
        self.stones = stones
        self.libs = libs


class Board:
    """Board with incremental chain/liberty tracking and prisoner counts."""

    def __init__(self, size: int):
        if size < 5:
            raise ValueError(f"board size {size} below minimum 5")
        self.size = size
        self._grid = [CELL_EMPTY] * (size * size)
        self._chain_id = [0] * (size * size)
        self._chains: dict[int, _Chain] = {}
        self._next_id = 1
        self._neighbors = _neighbor_table(size)
        self._ko_idx: Optional[int] = None
        self._ko_code = 0
        self.prisoners = {BLACK: 0, WHITE: 0}

    # -- coordinates ------------------------------------------------------
    def _idx(self, point: Point) -> int:
        x, y = point
        if not (1 <= x <= self.size and 1 <= y <= self.size):
            raise IllegalMoveError("off_board", "?", point)
        return (y - 1) * self.size + (x - 1)

    def _point(self, idx: int) -> Point:
        return idx % self.size + 1, idx // self.size + 1

    # -- queries ----------------------------------------------------------
    def stone_at(self, point: Point) -> Optional[str]:
        return _COLOR.get(self._grid[self._idx(point)])

    def cell_code(self, point: Point) -> int:
        x, y = point
        if not (1 <= x <= self.size and 1 <= y <= self.size):
            return CELL_OFF
        return self._grid[(y - 1) * self.size + (x - 1)]

    def chain_of(self, point: Point) -> frozenset[Point]:
        cid = self._chain_id[self._idx(point)]
        if not cid:
            return frozenset()
        return frozenset(self._point(i) for i in self._chains[cid].stones)

    def liberties_of(self, point: Point) -> frozenset[Point]:
        cid = self._chain_id[self._idx(point)]
        if not cid:
            return frozenset()
        return frozenset(self._point(i) for i in self._chains[cid].libs)

    def stones_on_board(self) -> int:
        return sum(1 for c in self._grid if c != CELL_EMPTY)

    @property
    def ko_point(self) -> Optional[Point]:
        return self._point(self._ko_idx) if self._ko_idx is not None else None

    def atari_liberties(self, color: str) -> list[Point]:
        """Last liberties of `color` chains currently in atari."""
        code = _CODE[color]
        out = []
        for ch in self._chains.values():
            if len(ch.libs) == 1 and self._grid[next(iter(ch.stones))] == code:
                out.append(self._point(next(iter(ch.libs))))
        return sorted(out)

    def empty_points(self) -> list[Point]:
        return [self._point(i) for i, c in enumerate(self._grid) if c == CELL_EMPTY]

    # -- legality ---------------------------------------------------------
    def is_legal(self, color: str, point: Point) -> bool:
        try:
            self._check_legal(_CODE[color], self._idx(point))
            return True
        except IllegalMoveError:
            return False

    def _check_legal(self, code: int, idx: int) -> None:
        if self._grid[idx] != CELL_EMPTY:
            raise IllegalMoveError("occupied", _COLOR[code], self._point(idx))
        if idx == self._ko_idx and code == self._ko_code:
            raise IllegalMoveError("ko", _COLOR[code], self._point(idx))
        enemy = 3 - code
        captures = False
        has_empty = False
        safe_friend = False
        for n in self._neighbors[idx]:
            g = self._grid[n]
            if g == CELL_EMPTY:
                has_empty = True
            elif g == enemy:
                if len(self._chains[self._chain_id[n]].libs) == 1:
                    captures = True
            elif len(self._chains[self._chain_id[n]].libs) >= 2:
                safe_friend = True
        if not (captures or has_empty or safe_friend):
            raise IllegalMoveError("suicide", _COLOR[code], self._point(idx))

    # -- mutation ---------------------------------------------------------
    def place_setup(self, color: str, point: Point) -> None:
        """Put a setup stone (AB/AW) on the board; no captures, no flags."""
        code = _CODE[color]
        idx = self._idx(point)
        if self._grid[idx] != CELL_EMPTY:
            raise IllegalMoveError("occupied", color, point)
        self._merge_in(code, idx)
        self._ko_idx = None
        self._ko_code = 0

    def play(self, color: str, point: Point) -> MoveResult:
        """Play a move; returns capture count, atari flags and captured points."""
        code = _CODE[color]
        idx = self._idx(point)
        self._check_legal(code, idx)
        enemy = 3 - code

        friendly_chains = {self._chain_id[n] for n in self._neighbors[idx] if self._grid[n] == code}
        escape_candidate = any(len(self._chains[c].libs) == 1 for c in friendly_chains)

        new_id = self._merge_in(code, idx)

        captured: list[int] = []
        enemy_chains = {self._chain_id[n] for n in self._neighbors[idx] if self._grid[n] == enemy}
        for cid in enemy_chains:
            ch = self._chains[cid]
            ch.libs.discard(idx)
            if not ch.libs:
                for s in ch.stones:
                    self._grid[s] = CELL_EMPTY
                    self._chain_id[s] = 0
                    captured.append(s)
                for s in ch.stones:
                    for n in self._neighbors[s]:
                        nid = self._chain_id[n]
                        if nid:
                            self._chains[nid].libs.add(s)
                del self._chains[cid]
        if captured:
            self.prisoners[color] += len(captured)

        merged = self._chains[new_id]
        atari_flag = False
        for n in self._neighbors[idx]:
            if self._grid[n] == enemy and len(self._chains[self._chain_id[n]].libs) == 1:
                atari_flag = True
                break
        atari_escape = escape_candidate and len(merged.libs) >= 2

        if len(captured) == 1 and len(merged.stones) == 1 and len(merged.libs) == 1:
            self._ko_idx = captured[0]
            self._ko_code = enemy
        else:
            self._ko_idx = None
            self._ko_code = 0

        return MoveResult(
            len(captured), atari_flag, atari_escape,
            tuple(sorted(self._point(s) for s in captured)),
        )

    def _merge_in(self, code: int, idx: int) -> int:
        """Place a stone and merge it with adjacent friendly chains."""
        self._grid[idx] = code
        stones = {idx}
        libs = set()
        merge_ids = set()
        for n in self._neighbors[idx]:
            g = self._grid[n]
            if g == CELL_EMPTY:
                libs.add(n)
            elif g == code:
                merge_ids.add(self._chain_id[n])
        for cid in merge_ids:
            ch = self._chains.pop(cid)
            stones |= ch.stones
            libs |= ch.libs
        libs.discard(idx)
        new_id = self._next_id
        self._next_id += 1
        self._chains[new_id] = _Chain(stones, libs)
        for s in stones:
            self._chain_id[s] = new_id
        # placing may fill an enemy liberty even in setup
        enemy = 3 - code
        for n in self._neighbors[idx]:
            if self._grid[n] == enemy:
                self._chains[self._chain_id[n]].libs.discard(idx)
        return new_id


@lru_cache(maxsize=None)
def _neighbor_table(size: int) -> tuple[tuple[int, ...], ...]:
    table = []
    for idx in range(size * size):
        x, y = idx % size, idx // size
        nbrs = []
        if x > 0:
            nbrs.append(idx - 1)
        if x < size - 1:
            nbrs.append(idx + 1)
        if y > 0:
            nbrs.append(idx - size)
        if y < size - 1:
            nbrs.append(idx + size)
        table.append(tuple(nbrs))
    return tuple(table)


def extract_raw_pattern(board: Board, center: Point, d: int, to_move: str) -> RawPattern:
    """Record the cells at gridcular distance 1..d around center; off-board kept."""
    cx, cy = center
    size = board.size
    grid = board._grid
    cells = []
    for dx, dy in neighborhood_offsets(d):
        x, y = cx + dx, cy + dy
        if 1 <= x <= size and 1 <= y <= size:
            cells.append(((dx, dy), grid[(y - 1) * size + (x - 1)]))
        else:
            cells.append(((dx, dy), CELL_OFF))
    return RawPattern(size=d, cells=tuple(cells), to_move=to_move)


@dataclass
class MoveAnnotation:
    move_number: int
    color: str
    point: Point
    atari_flag: bool
    atari_escape_flag: bool
    captures: int
    contiguity: Optional[int]
    border_distance: int
    raw_patterns: dict[int, RawPattern]


def annotate_game(game: GameRecord, pattern_sizes=PATTERN_SIZES) -> list[MoveAnnotation]:
    """Replay a game and emit one annotation per non-pass move.

    Setup (handicap) stones are placed without annotations. A pass produces
    no annotation and resets contiguity for the following move.
    """
    board = Board(game.board_size)
    for p in game.setup_black:
        board.place_setup(BLACK, p)
    for p in game.setup_white:
        board.place_setup(WHITE, p)

    annotations: list[MoveAnnotation] = []
    prev: Optional[Point] = None
    for number, (color, point) in enumerate(game.moves, start=1):
        if point is None:
            prev = None
            continue
        raw = {d: extract_raw_pattern(board, point, d, color) for d in pattern_sizes}
        bdist = border_distance(point, game.board_size)
        contiguity = gridcular_distance(prev, point) if prev is not None else None
        try:
            result = board.play(color, point)
        except IllegalMoveError as e:
            raise AnnotationError(number, e) from e
        annotations.append(
            MoveAnnotation(
                move_number=number,
                color=color,
                point=point,
                atari_flag=result.atari_flag,
                atari_escape_flag=result.atari_escape_flag,
                captures=result.captures,
                contiguity=contiguity,
                border_distance=bdist,
                raw_patterns=raw,
            )
        )
        prev = point
    return annotations


def format_annotations(annotations: list[MoveAnnotation]) -> list[str]:
    """Debug dump: one tab-separated line per annotation with pattern hashes."""
    lines = []
    for a in annotations:
        keys = " ".join(
            f"{d}:{canonicalize(a.raw_patterns[d], a.atari_flag, a.atari_escape_flag).cells.hex()}"
            for d in sorted(a.raw_patterns)
        )
        cont = "-" if a.contiguity is None else str(a.contiguity)
        lines.append(
            f"{a.move_number}\t{a.color}\t{a.point[0]},{a.point[1]}\t"
            f"atari={int(a.atari_flag)}\tescape={int(a.atari_escape_flag)}\t"
            f"caps={a.captures}\tcont={cont}\tline={a.border_distance}\t{keys}"
        )
    return lines
