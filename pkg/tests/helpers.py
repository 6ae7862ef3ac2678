"""Independent naive oracles used to cross-check the production pipeline.

Everything here is deliberately implemented from scratch: flood-fill liberty
counting, window-scan neighborhoods, explicit dihedral transforms, and
straight-line tallies for the feature families. None of it shares code with
the package beyond the data types under test.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from goeval.board import RawPattern, neighborhood_offsets
from goeval.model import NetworkParams, forward
from goeval.records import BLACK, WHITE, GameRecord, opponent, parse_result

DIHEDRAL_MAPS = [
    lambda x, y: (x, y),
    lambda x, y: (-x, y),
    lambda x, y: (x, -y),
    lambda x, y: (-x, -y),
    lambda x, y: (y, x),
    lambda x, y: (-y, x),
    lambda x, y: (y, -x),
    lambda x, y: (-y, -x),
]


def flood_liberties(grid: dict, point) -> tuple[set, set]:
    """Flood-fill liberty counter: returns (liberties, chain stones)."""
    color = grid.get(point)
    assert color is not None
    chain = set()
    libs = set()
    stack = [point]
    while stack:
        p = stack.pop()
        if p in chain:
            continue
        chain.add(p)
        x, y = p
        for q in ((x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)):
            if q in grid:
                c = grid[q]
                if c is None:
                    libs.add(q)
                elif c == color and q not in chain:
                    stack.append(q)
    return libs, chain


class NaiveBoard:
    """Dict-grid replay engine; captures and flags via flood fill only."""

    def __init__(self, size):
        self.size = size
        self.grid = {(x, y): None for x in range(1, size + 1) for y in range(1, size + 1)}
        self.prisoners = {BLACK: 0, WHITE: 0}

    def place(self, color, point):
        self.grid[point] = color

    def play(self, color, point):
        """Returns (captures, atari_flag, atari_escape_flag)."""
        enemy = opponent(color)
        x, y = point
        nbrs = [q for q in ((x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)) if q in self.grid]

        friendly_in_atari_before = False
        for q in nbrs:
            if self.grid[q] == color:
                libs, _ = flood_liberties(self.grid, q)
                if len(libs) == 1:
                    friendly_in_atari_before = True

        self.grid[point] = color
        captured = 0
        for q in nbrs:
            if self.grid[q] == enemy:
                libs, chain = flood_liberties(self.grid, q)
                if not libs:
                    for s in chain:
                        self.grid[s] = None
                    captured += len(chain)
        self.prisoners[color] += captured

        atari = False
        for q in nbrs:
            if self.grid[q] == enemy:
                libs, _ = flood_liberties(self.grid, q)
                if len(libs) == 1:
                    atari = True
        own_libs, _ = flood_liberties(self.grid, point)
        escape = friendly_in_atari_before and len(own_libs) >= 2
        return captured, atari, escape


def window_neighborhood(center, d):
    """All offsets within gridcular distance 1..d found by scanning a window."""
    out = []
    for dy in range(-2 * d, 2 * d + 1):
        for dx in range(-2 * d, 2 * d + 1):
            g = abs(dx) + abs(dy) + max(abs(dx), abs(dy))
            if 1 <= g <= d:
                out.append((dx, dy))
    return set(out)


def naive_pack(codes):
    bits = "".join(format(c, "02b") for c in codes)
    bits += "0" * (-len(bits) % 8)
    return bytes(int(bits[i : i + 8], 2) for i in range(0, len(bits), 8))


def naive_canonical_cells(cellmap: dict, to_move: str) -> bytes:
    """Canonical encoding via explicit transforms of an offset->code map."""
    if to_move == WHITE:
        cellmap = {o: {0: 0, 1: 2, 2: 1, 3: 3}[c] for o, c in cellmap.items()}

    def encode(m):
        return tuple(c for _, c in sorted(m.items(), key=lambda kv: (kv[0][1], kv[0][0])))

    best = min(encode({f(dx, dy): c for (dx, dy), c in cellmap.items()}) for f in DIHEDRAL_MAPS)
    return naive_pack(best)


def naive_annotations(record: GameRecord, sizes=(2, 3, 4, 5, 6)):
    """Fully independent annotation pipeline over a game record.

    Yields one dict per non-pass move: number, color, point, captures, atari,
    escape, contiguity, border, and canonical pattern cells per size.
    """
    board = NaiveBoard(record.board_size)
    for p in record.setup_black:
        board.place(BLACK, p)
    for p in record.setup_white:
        board.place(WHITE, p)
    out = []
    prev = None
    for number, (color, point) in enumerate(record.moves, start=1):
        if point is None:
            prev = None
            continue
        patterns = {}
        for d in sizes:
            cellmap = {}
            for dx, dy in window_neighborhood((0, 0), d):
                q = (point[0] + dx, point[1] + dy)
                if q in board.grid:
                    c = board.grid[q]
                    cellmap[(dx, dy)] = 0 if c is None else (1 if c == BLACK else 2)
                else:
                    cellmap[(dx, dy)] = 3
            patterns[d] = cellmap
        if prev is None:
            contiguity = None
        else:
            dx, dy = abs(point[0] - prev[0]), abs(point[1] - prev[1])
            contiguity = dx + dy + max(dx, dy)
        x, y = point
        border = min(x, y, record.board_size + 1 - x, record.board_size + 1 - y)
        captures, atari, escape = board.play(color, point)
        out.append(
            dict(
                number=number, color=color, point=point, captures=captures,
                atari=atari, escape=escape, contiguity=contiguity, border=border,
                keys={d: (naive_canonical_cells(patterns[d], color), atari, escape)
                      for d in sizes},
            )
        )
        prev = point
    return out


# ---------------------------------------------------------------------------
# naive feature-family tallies (integer counts before |GC| normalization)

def _bin_of(intervals, x):
    for i, (lo, hi) in enumerate(intervals):
        if x >= lo and (hi is None or x <= hi):
            return i
    raise AssertionError


def naive_pattern_counts(entries, vocab_keys, sizes, both_colors=True) -> list[int]:
    """entries: [(record, color)]; vocab_keys: [(cells, atari, escape)]."""
    counts = [0] * len(vocab_keys)
    lookup = {k: i for i, k in enumerate(vocab_keys)}
    for record, color in entries:
        for ann in naive_annotations(record, sizes):
            if not both_colors and ann["color"] != color:
                continue
            for d in sizes:
                i = lookup.get(ann["keys"][d])
                if i is not None:
                    counts[i] += 1
    return counts


def naive_vocab_counter(entries_records, sizes) -> Counter:
    counter: Counter = Counter()
    for record in entries_records:
        for ann in naive_annotations(record, sizes):
            for d in sizes:
                counter[ann["keys"][d]] += 1
    return counter


def naive_sente_gote(entries, omega) -> tuple[int, int]:
    """Total sente and gote sequence counts attributed to the colored player."""
    sente = gote = 0
    for record, color in entries:
        anns = naive_annotations(record, sizes=(2,))
        breaks = [0]
        for i, ann in enumerate(anns):
            if i == 0:
                continue
            if ann["contiguity"] is None or ann["contiguity"] >= omega:
                breaks.append(i)
        breaks.append(len(anns))
        for s, e in zip(breaks, breaks[1:]):
            if s == e:
                continue
            starter = anns[s]["color"]
            ender = anns[e - 1]["color"]
            if starter == color:
                if starter != ender:
                    sente += 1
                else:
                    gote += 1
    return sente, gote


def naive_border_hist(entries, by_moves, by_dist, both_colors=False) -> list[int]:
    hist = [0] * (len(by_moves) * len(by_dist))
    for record, color in entries:
        for ann in naive_annotations(record, sizes=(2,)):
            if not both_colors and ann["color"] != color:
                continue
            m = _bin_of(by_moves, ann["number"])
            d = _bin_of(by_dist, ann["border"])
            hist[m * len(by_dist) + d] += 1
    return hist


def naive_capture_hist(entries, by_moves) -> tuple[list[int], list[int]]:
    own = [0] * len(by_moves)
    opp = [0] * len(by_moves)
    for record, color in entries:
        for ann in naive_annotations(record, sizes=(2,)):
            if ann["captures"]:
                b = _bin_of(by_moves, ann["number"])
                if ann["color"] == color:
                    own[b] += ann["captures"]
                else:
                    opp[b] += ann["captures"]
    return own, opp


def naive_winloss(entries):
    """(win_count, win_resign, loss_count, loss_resign, sum win margins, sum loss margins)."""
    wc = wr = lc = lr = 0
    wm = lm = 0.0
    for record, color in entries:
        o = record.result
        if o.kind == "win_by_points":
            if o.winner == color:
                wc += 1
                wm += o.margin
            else:
                lc += 1
                lm += o.margin
        elif o.kind == "win_by_resignation":
            if o.winner == color:
                wr += 1
            else:
                lr += 1
    return wc, wr, lc, lr, wm, lm


# ---------------------------------------------------------------------------
# hand-scripted 9x9 games with fully hand-computed annotation tables

def _g(moves, result="?", **kw):
    return GameRecord(moves=tuple(moves), board_size=9, result=parse_result(result), **kw)


B, W = BLACK, WHITE

# game 1: white captures the black corner stone on move 4
HAND_GAME_1 = _g(
    [(B, (1, 1)), (W, (1, 2)), (B, (5, 5)), (W, (2, 1)), (B, (2, 2)), (W, (8, 8))],
    result="W+Resign",
)
# (number, color, point, atari, escape, captures, contiguity, border)
HAND_TABLE_1 = [
    (1, B, (1, 1), False, False, 0, None, 1),
    (2, W, (1, 2), True, False, 0, 2, 1),
    (3, B, (5, 5), False, False, 0, 11, 5),
    (4, W, (2, 1), False, False, 1, 11, 1),
    (5, B, (2, 2), False, False, 0, 2, 2),
    (6, W, (8, 8), False, False, 0, 18, 2),
]

# game 2: black escapes atari by extending, white later captures the pair
HAND_GAME_2 = _g(
    [(B, (1, 1)), (W, (1, 2)), (B, (2, 1)), (W, (2, 2)), (B, (9, 9)), (W, (3, 1))],
    result="B+3.5",
)
HAND_TABLE_2 = [
    (1, B, (1, 1), False, False, 0, None, 1),
    (2, W, (1, 2), True, False, 0, 2, 1),
    (3, B, (2, 1), False, True, 0, 3, 1),
    (4, W, (2, 2), True, False, 0, 2, 2),
    (5, B, (9, 9), False, False, 0, 21, 1),
    (6, W, (3, 1), False, False, 2, 22, 1),
]

# game 3: a pass resets contiguity; result is a jigo (disregarded class)
HAND_GAME_3 = _g(
    [(B, (5, 5)), (W, (5, 6)), (B, None), (W, (7, 7)), (B, (3, 3))],
    result="0",
)
HAND_TABLE_3 = [
    (1, B, (5, 5), False, False, 0, None, 5),
    (2, W, (5, 6), False, False, 0, 2, 4),
    (4, W, (7, 7), False, False, 0, None, 3),
    (5, B, (3, 3), False, False, 0, 12, 3),
]

HAND_GAMES = [
    (HAND_GAME_1, HAND_TABLE_1),
    (HAND_GAME_2, HAND_TABLE_2),
    (HAND_GAME_3, HAND_TABLE_3),
]


# ---------------------------------------------------------------------------
# random pattern construction and explicit transforms

def random_raw_pattern(rng, d) -> RawPattern:
    cells = tuple((off, int(rng.integers(0, 4))) for off in neighborhood_offsets(d))
    to_move = BLACK if rng.random() < 0.5 else WHITE
    return RawPattern(size=d, cells=cells, to_move=to_move)


def transform_raw_pattern(raw: RawPattern, t_index: int, swap_colors: bool) -> RawPattern:
    f = DIHEDRAL_MAPS[t_index]
    swap = {0: 0, 1: 2, 2: 1, 3: 3}
    moved = {f(dx, dy): (swap[c] if swap_colors else c) for (dx, dy), c in raw.cells}
    cells = tuple(sorted(moved.items(), key=lambda kv: (kv[0][1], kv[0][0])))
    to_move = raw.to_move
    if swap_colors:
        to_move = WHITE if to_move == BLACK else BLACK
    return RawPattern(size=raw.size, cells=cells, to_move=to_move)


# ---------------------------------------------------------------------------
# central finite differences for the network's batch MSE loss

def loss_of(params, X, y) -> float:
    diff = forward(params, X) - y
    return float(diff @ diff) / len(y)


def fd_gradients(params: NetworkParams, X, y, h=1e-5):
    grads = []
    for arr in (params.w1, params.b1, params.w2):
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_of(params, X, y)
            flat[i] = orig - h
            down = loss_of(params, X, y)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads.append(g)
    orig = params.b2
    params.b2 = orig + h
    up = loss_of(params, X, y)
    params.b2 = orig - h
    down = loss_of(params, X, y)
    params.b2 = orig
    grads.append((up - down) / (2 * h))
    return grads


def assert_gradients_close(analytic, numeric, tol=1e-4):
    for a, n in zip(analytic, numeric):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        n = np.atleast_1d(np.asarray(n, dtype=float))
        err = np.abs(a - n)
        scale = np.maximum(np.abs(a), np.abs(n))
        assert np.all((err <= tol * scale) | (err < 1e-8))
