"""SGF game records: parsing, result/rank interpretation, labeled game-set assembly."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

BLACK = "black"
WHITE = "white"

Point = tuple[int, int]  # (column, row), 1-based

# Outcome kinds
WIN_BY_POINTS = "win_by_points"
WIN_BY_RESIGNATION = "win_by_resignation"
OTHER = "other"

MIN_SET_GAMES = 10
MAX_SET_GAMES = 50
STYLE_GAMES = 192
STYLE_SETS = 12
STYLE_SET_SIZE = 16


def opponent(color: str) -> str:
    return WHITE if color == BLACK else BLACK


class ParseError(ValueError):
    """Raised on malformed SGF input; carries the byte offset of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Outcome:
    kind: str = OTHER
    winner: Optional[str] = None
    margin: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (WIN_BY_POINTS, WIN_BY_RESIGNATION, OTHER):
            raise ValueError(f"unknown outcome kind {self.kind!r}")
        if self.kind == WIN_BY_POINTS and (self.margin is None or self.margin < 0):
            raise ValueError("win_by_points requires a nonnegative margin")
        if self.kind != WIN_BY_POINTS and self.margin is not None:
            raise ValueError("margin is only present for wins by points")
        if self.kind == OTHER and self.winner is not None:
            raise ValueError("kind=other carries no winner")


@dataclass(frozen=True)
class Rank:
    grade: int
    kind: str  # "kyu" or "dan"

    def __post_init__(self):
        if self.kind == "kyu":
            if not 1 <= self.grade <= 30:
                raise ValueError(f"kyu grade {self.grade} outside [1, 30]")
        elif self.kind == "dan":
            if not 1 <= self.grade <= 9:
                raise ValueError(f"dan grade {self.grade} outside [1, 9]")
        else:
            raise ValueError(f"unknown rank kind {self.kind!r}")

    def __str__(self) -> str:
        return f"{self.grade}{'k' if self.kind == 'kyu' else 'd'}"


@dataclass(frozen=True)
class GameRecord:
    moves: tuple[tuple[str, Optional[Point]], ...]
    board_size: int = 19
    result: Outcome = Outcome()
    black_rank: Optional[Rank] = None
    white_rank: Optional[Rank] = None
    handicap: int = 0
    komi: float = 0.0
    setup_black: tuple[Point, ...] = ()
    setup_white: tuple[Point, ...] = ()
    black_player: Optional[str] = None
    white_player: Optional[str] = None

    def __post_init__(self):
        if self.board_size < 5:
            raise ValueError(f"board size {self.board_size} below minimum 5")

    def rank_of(self, color: str) -> Optional[Rank]:
        return self.black_rank if color == BLACK else self.white_rank

    def player_of(self, color: str) -> Optional[str]:
        return self.black_player if color == BLACK else self.white_player


@dataclass(frozen=True)
class ColoredGameSet:
    """Games paired with the color of the player under study."""

    entries: tuple[tuple[GameRecord, str], ...]
    player_id: str

    def __post_init__(self):
        if not self.entries:
            raise ValueError("a colored game set cannot be empty")
        for _, color in self.entries:
            if color not in (BLACK, WHITE):
                raise ValueError(f"bad color of interest {color!r}")

    def __len__(self) -> int:
        return len(self.entries)


class CorpusGame(NamedTuple):
    """One corpus record: parsed game plus optional manifest overrides."""

    record: GameRecord
    player_id: Optional[str] = None
    rank_override: Optional[Rank] = None


class ManifestEntry(NamedTuple):
    path: Path
    player_id: Optional[str] = None
    rank_override: Optional[Rank] = None


# ---------------------------------------------------------------------------
# result and rank interpretation

_RANK_RE = re.compile(r"^\s*(\d{1,2})\s*[- ]?\s*(k|kyu|d|dan)[\s?*+]*$", re.IGNORECASE)


def parse_result(token: Optional[str]) -> Outcome:
    """Interpret an SGF RE value. Unrecognized tokens become Outcome(other)."""
    if not token:
        return Outcome()
    token = token.strip()
    m = re.match(r"^([BbWw])\+(.*)$", token)
    if m:
        winner = BLACK if m.group(1).upper() == "B" else WHITE
        rest = m.group(2).strip()
        if rest and rest[0] in "Rr" and rest.lower() in ("r", "resign", "res", "resignation"):
            return Outcome(WIN_BY_RESIGNATION, winner)
        try:
            margin = float(rest)
        except ValueError:
            return Outcome()  # forfeit, time, etc.
        if margin >= 0:
            return Outcome(WIN_BY_POINTS, winner, margin)
    return Outcome()


def parse_rank(text: Optional[str]) -> Optional[Rank]:
    """Parse rank strings such as '6d', '20k', '1-dan'; None when unusable."""
    if not text:
        return None
    m = _RANK_RE.match(text)
    if not m:
        return None
    grade = int(m.group(1))
    kind = "kyu" if m.group(2).lower().startswith("k") else "dan"
    try:
        return Rank(grade, kind)
    except ValueError:
        return None


def rank_to_target(rank: Rank) -> float:
    """Map a rank onto the learning target: 20k -> 20, 1d -> 0, 6d -> -5."""
    if rank.kind == "kyu":
        return float(rank.grade)
    return float(1 - rank.grade)


def target_to_rank(y: float) -> Rank:
    """Inverse of rank_to_target for integer-valued targets."""
    g = int(round(y))
    return Rank(g, "kyu") if g >= 1 else Rank(1 - g, "dan")


# ---------------------------------------------------------------------------
# SGF parsing (main line only)

_IDENT_RE = re.compile(r"[A-Za-z]+")


class _Node:
    __slots__ = ("props",)

    def __init__(self):
        self.props: list[tuple[str, list[tuple[str, int]]]] = []


def parse_sgf(text: str) -> GameRecord:
    """Parse one SGF game tree; variations beyond the main line are ignored."""
    nodes, end = _parse_tree(text)
    tail = text[end:].strip()
    if tail:
        raise ParseError("trailing content after game tree", end)
    return _interpret(nodes)


def _parse_tree(text: str) -> tuple[list[_Node], int]:
    pos = 0
    n = len(text)

    def skip_ws(p: int) -> int:
        while p < n and text[p].isspace():
            p += 1
        return p

    pos = skip_ws(pos)
    if pos >= n or text[pos] != "(":
        raise ParseError("expected '(' at start of game tree", pos)

    main: list[_Node] = []
    depth = 0
    # collect marks whether the current branch lies on the main line;
    # per depth we remember whether a subtree was already taken there
    collect_stack: list[bool] = []
    branch_seen: list[bool] = []
    current: Optional[_Node] = None

    while pos < n:
        pos = skip_ws(pos)
        if pos >= n:
            break
        c = text[pos]
        if c == "(":
            collecting = (depth == 0) or (collect_stack[-1] and not branch_seen[-1])
            if depth > 0:
                branch_seen[-1] = True
            collect_stack.append(collecting)
            branch_seen.append(False)
            depth += 1
            current = None
            pos += 1
        elif c == ")":
            if depth == 0:
                raise ParseError("unbalanced ')'", pos)
            collect_stack.pop()
            branch_seen.pop()
            depth -= 1
            current = None
            pos += 1
            if depth == 0:
                return main, pos
        elif c == ";":
            if depth == 0:
                raise ParseError("node outside game tree", pos)
            current = _Node()
            if collect_stack[-1]:
                main.append(current)
            pos += 1
        else:
            m = _IDENT_RE.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {c!r}", pos)
            if current is None:
                raise ParseError("property outside node", pos)
            ident = re.sub("[a-z]", "", m.group(0)) or m.group(0)
            pos = m.end()
            values: list[tuple[str, int]] = []
            pos = skip_ws(pos)
            if pos >= n or text[pos] != "[":
                raise ParseError(f"property {ident} lacks a value", pos)
            while pos < n and text[pos] == "[":
                start = pos + 1
                p = start
                buf = []
                while p < n:
                    ch = text[p]
                    if ch == "\\" and p + 1 < n:
                        buf.append(text[p + 1])
                        p += 2
                        continue
                    if ch == "]":
                        break
                    buf.append(ch)
                    p += 1
                if p >= n:
                    raise ParseError("unterminated property value", start)
                values.append(("".join(buf), start))
                pos = skip_ws(p + 1)
            current.props.append((ident, values))
    raise ParseError("unbalanced '(': game tree not closed", n)


def _decode_point(value: str, offset: int, size: int, size_given: bool) -> Optional[Point]:
    if value == "" or (value == "tt" and size <= 19):
        return None
    if len(value) != 2 or not value.islower() or not value.isalpha():
        raise ParseError(f"illegal coordinates {value!r}", offset)
    col = ord(value[0]) - ord("a") + 1
    row = ord(value[1]) - ord("a") + 1
    if col > size or row > size:
        if not size_given:
            raise ParseError(
                f"coordinates {value!r} exceed the default 19x19 board and SZ is missing", offset
            )
        raise ParseError(f"coordinates {value!r} outside {size}x{size} board", offset)
    return col, row


def _expand_points(values: list[tuple[str, int]], size: int, size_given: bool) -> list[Point]:
    pts: list[Point] = []
    for value, offset in values:
        if ":" in value:
            lo, hi = value.split(":", 1)
            p1 = _decode_point(lo, offset, size, size_given)
            p2 = _decode_point(hi, offset, size, size_given)
            if p1 is None or p2 is None:
                raise ParseError(f"illegal point range {value!r}", offset)
            for x in range(min(p1[0], p2[0]), max(p1[0], p2[0]) + 1):
                for y in range(min(p1[1], p2[1]), max(p1[1], p2[1]) + 1):
                    pts.append((x, y))
        else:
            p = _decode_point(value, offset, size, size_given)
            if p is not None:
                pts.append(p)
    return pts


def _interpret(nodes: list[_Node]) -> GameRecord:
    size = 19
    size_given = False
    # first pass: SZ must win before any coordinate is decoded
    for node in nodes:
        for ident, values in node.props:
            if ident == "SZ" and values:
                raw, offset = values[0]
                try:
                    size = int(raw)
                except ValueError:
                    raise ParseError(f"non-integer board size {raw!r}", offset) from None
                if size < 5:
                    raise ParseError(f"unsupported board size {size}", offset)
                if size > 26:
                    raise ParseError(f"board size {size} beyond letter coordinates", offset)
                size_given = True

    moves: list[tuple[str, Optional[Point]]] = []
    result = Outcome()
    black_rank = white_rank = None
    handicap = 0
    komi = 0.0
    setup_black: list[Point] = []
    setup_white: list[Point] = []
    black_player = white_player = None

    for node in nodes:
        for ident, values in node.props:
            if not values:
                continue
            raw, offset = values[0]
            if ident == "B" or ident == "W":
                color = BLACK if ident == "B" else WHITE
                moves.append((color, _decode_point(raw, offset, size, size_given)))
            elif ident == "AB":
                if not moves:
                    setup_black.extend(_expand_points(values, size, size_given))
            elif ident == "AW":
                if not moves:
                    setup_white.extend(_expand_points(values, size, size_given))
            elif ident == "RE":
                result = parse_result(raw)
            elif ident == "BR":
                black_rank = parse_rank(raw)
            elif ident == "WR":
                white_rank = parse_rank(raw)
            elif ident == "HA":
                try:
                    handicap = max(0, int(raw))
                except ValueError:
                    handicap = 0
            elif ident == "KM":
                try:
                    komi = float(raw)
                except ValueError:
                    komi = 0.0
            elif ident == "PB":
                black_player = raw or None
            elif ident == "PW":
                white_player = raw or None
            # anything else is skipped

    return GameRecord(
        moves=tuple(moves),
        board_size=size,
        result=result,
        black_rank=black_rank,
        white_rank=white_rank,
        handicap=handicap,
        komi=komi,
        setup_black=tuple(setup_black),
        setup_white=tuple(setup_white),
        black_player=black_player,
        white_player=white_player,
    )


def _encode_point(point: Point) -> str:
    return chr(ord("a") + point[0] - 1) + chr(ord("a") + point[1] - 1)


def _result_token(outcome: Outcome) -> str:
    if outcome.kind == WIN_BY_POINTS:
        return f"{'B' if outcome.winner == BLACK else 'W'}+{outcome.margin:g}"
    if outcome.kind == WIN_BY_RESIGNATION:
        return f"{'B' if outcome.winner == BLACK else 'W'}+Resign"
    return "?"


def serialize_sgf(record: GameRecord) -> str:
    """Render a GameRecord back to SGF; parse(serialize(g)) reproduces g."""
    root = [f"FF[4]GM[1]SZ[{record.board_size}]", f"KM[{record.komi:g}]"]
    if record.handicap:
        root.append(f"HA[{record.handicap}]")
    root.append(f"RE[{_result_token(record.result)}]")
    if record.black_player:
        root.append(f"PB[{record.black_player}]")
    if record.white_player:
        root.append(f"PW[{record.white_player}]")
    if record.black_rank:
        root.append(f"BR[{record.black_rank}]")
    if record.white_rank:
        root.append(f"WR[{record.white_rank}]")
    if record.setup_black:
        root.append("AB" + "".join(f"[{_encode_point(p)}]" for p in record.setup_black))
    if record.setup_white:
        root.append("AW" + "".join(f"[{_encode_point(p)}]" for p in record.setup_white))
    body = []
    for color, point in record.moves:
        tag = "B" if color == BLACK else "W"
        body.append(f";{tag}[{_encode_point(point) if point else ''}]")
    return "(;" + "".join(root) + "".join(body) + ")"


# ---------------------------------------------------------------------------
# corpus manifests and game-set assembly

def load_manifest(path: Path) -> list[ManifestEntry]:
    """Read a corpus manifest: one tab-separated record per line,
    `sgf-path [player-id [rank-override]]`, '#' comments allowed."""
    path = Path(path)
    entries = []
    base = path.parent
    for line in path.read_text().splitlines():
        line = line.rstrip()
        if not line or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        sgf_path = Path(parts[0])
        if not sgf_path.is_absolute():
            sgf_path = base / sgf_path
        player = parts[1].strip() if len(parts) > 1 and parts[1].strip() else None
        rank = parse_rank(parts[2]) if len(parts) > 2 and parts[2].strip() else None
        entries.append(ManifestEntry(sgf_path, player, rank))
    return entries


def _strength_eligible(record: GameRecord) -> bool:
    return (
        record.board_size == 19
        and record.handicap == 0
        and not record.setup_black
        and not record.setup_white
        and len(record.moves) > 0
    )


def assemble_strength_sets(
    corpus: Sequence[CorpusGame], seed
) -> list[tuple[ColoredGameSet, float]]:
    """Group eligible games by (player, rank-at-time) into colored sets.

    Groups below 10 games are dropped; groups above 50 are subsampled to a
    size drawn uniformly from [10, 50]. Targets come from rank_to_target.
    """
    groups: dict[tuple[str, str, int], list[tuple[GameRecord, str]]] = {}
    for cg in corpus:
        record = cg.record
        if not _strength_eligible(record):
            continue
        for color in (BLACK, WHITE):
            name = record.player_of(color)
            if name is None:
                continue
            if cg.player_id is not None and name != cg.player_id:
                continue
            rank = cg.rank_override if cg.rank_override is not None else record.rank_of(color)
            if rank is None:
                continue
            groups.setdefault((name, rank.kind, rank.grade), []).append((record, color))

    rng = np.random.default_rng(seed)
    out = []
    for (name, kind, grade) in sorted(groups):
        entries = groups[(name, kind, grade)]
        if len(entries) < MIN_SET_GAMES:
            continue
        if len(entries) > MAX_SET_GAMES:
            k = int(rng.integers(MIN_SET_GAMES, MAX_SET_GAMES + 1))
            idx = np.sort(rng.choice(len(entries), size=k, replace=False))
            entries = [entries[i] for i in idx]
        rank = Rank(grade, kind)
        out.append(
            (ColoredGameSet(tuple(entries), f"{name}@{rank}"), rank_to_target(rank))
        )
    return out


def assemble_style_sets(
    entries: Sequence[tuple[GameRecord, str]],
    labels: Sequence[float],
    player_id: str,
    seed,
) -> list[tuple[ColoredGameSet, tuple[float, ...]]]:
    """Randomly split one professional's 192 games into 12 disjoint sets of 16,
    each carrying the player's 4-component style target."""
    if len(entries) != STYLE_GAMES:
        raise ValueError(f"need exactly {STYLE_GAMES} games, got {len(entries)}")
    if len(labels) != 4:
        raise ValueError(f"need exactly 4 style labels, got {len(labels)}")
    for v in labels:
        if not 1.0 <= float(v) <= 10.0:
            raise ValueError(f"style label {v} outside [1, 10]")
    target = tuple(float(v) for v in labels)
    rng = np.random.default_rng(seed)
    order = rng.permutation(STYLE_GAMES)
    out = []
    for j in range(STYLE_SETS):
        chunk = sorted(order[j * STYLE_SET_SIZE : (j + 1) * STYLE_SET_SIZE])
        gs = ColoredGameSet(tuple(entries[i] for i in chunk), f"{player_id}#{j:02d}")
        out.append((gs, target))
    return out
