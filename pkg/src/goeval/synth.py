"""Synthetic SGF corpora with a planted latent signal, for end-to-end checks.

Each synthetic player carries a latent strength target (a rank). Under the
"planted" profile the move policy depends on the latent: weaker players play
low lines, capture eagerly and rarely resign; stronger players answer locally
on the third and fourth line and resign lost games. The "null" profile uses
one fixed policy for everyone, so features carry no signal about the target.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .board import Board, border_distance, neighborhood_offsets
from .records import (
    BLACK,
    WHITE,
    WIN_BY_POINTS,
    WIN_BY_RESIGNATION,
    GameRecord,
    Outcome,
    opponent,
    serialize_sgf,
    target_to_rank,
)

PROFILES = ("planted", "null")

_LINE_BINS = ((1, 2), (3, 3), (4, 4), (5, None))
_LOCAL_RADIUS = 8
_PASS_PROB = 0.003


@dataclass(frozen=True)
class PolicyParams:
    line_weights: tuple[float, float, float, float]
    p_capture_open: float
    p_capture_late: float
    p_local: float
    p_resign: float
    margin_scale: float


def policy_params(profile: str, u: float) -> PolicyParams:
    """Policy knobs for a player with normalized latent u (0 strongest, 1 weakest)."""
    if profile == "planted":
        return PolicyParams(
            line_weights=(0.10 + 0.55 * u, 0.45 - 0.25 * u, 0.30 - 0.20 * u, 0.15 - 0.10 * u),
            p_capture_open=0.10 + 0.75 * u,
            p_capture_late=0.10 + 0.30 * u,
            p_local=0.65 - 0.45 * u,
            p_resign=0.15 + 0.60 * (1.0 - u),
            margin_scale=6.0 + 30.0 * u,
        )
    if profile == "null":
        return PolicyParams(
            line_weights=(0.30, 0.30, 0.20, 0.20),
            p_capture_open=0.35,
            p_capture_late=0.20,
            p_local=0.40,
            p_resign=0.45,
            margin_scale=20.0,
        )
    raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")


def _line_bin(point, size) -> int:
    d = border_distance(point, size)
    for i, (lo, hi) in enumerate(_LINE_BINS):
        if d >= lo and (hi is None or d <= hi):
            return i
    raise AssertionError


class _EmptyTracker:
    """Empty points grouped by line band, in sorted lists for deterministic draws."""

    def __init__(self, size: int):
        self.size = size
        self.bins: list[list] = [[] for _ in _LINE_BINS]
        self.order: list = []
        self.present: set = set()
        for x in range(1, size + 1):
            for y in range(1, size + 1):
                self.add((x, y))

    def remove(self, point):
        b = self.bins[_line_bin(point, self.size)]
        b.pop(bisect_left(b, point))
        self.order.pop(bisect_left(self.order, point))
        self.present.discard(point)

    def add(self, point):
        insort(self.bins[_line_bin(point, self.size)], point)
        insort(self.order, point)
        self.present.add(point)

    def sample_by_line(self, rng: np.random.Generator, weights) -> Optional[tuple]:
        avail = [i for i, b in enumerate(self.bins) if b]
        if not avail:
            return None
        w = np.array([weights[i] for i in avail])
        i = avail[int(rng.choice(len(avail), p=w / w.sum()))]
        pts = self.bins[i]
        return pts[int(rng.integers(len(pts)))]

    def sample_near(self, rng: np.random.Generator, center, radius) -> Optional[tuple]:
        cx, cy = center
        pts = [
            p for dx, dy in neighborhood_offsets(radius)
            if (p := (cx + dx, cy + dy)) in self.present
        ]
        if not pts:
            return None
        return pts[int(rng.integers(len(pts)))]

    def sample_any(self, rng: np.random.Generator) -> Optional[tuple]:
        if not self.order:
            return None
        return self.order[int(rng.integers(len(self.order)))]


def generate_game(
    profile: str,
    u: float,
    rng: np.random.Generator,
    board_size: int = 19,
    min_moves: int = 40,
    max_moves: int = 70,
) -> tuple[tuple[tuple[str, Optional[tuple]], ...], Outcome]:
    """One legal random game whose policy is a deterministic function of (u, rng)."""
    pol = policy_params(profile, u)
    board = Board(board_size)
    empties = _EmptyTracker(board_size)
    moves: list[tuple[str, Optional[tuple]]] = []
    target_len = int(rng.integers(min_moves, max_moves + 1))
    color = BLACK
    prev: Optional[tuple] = None
    for number in range(1, target_len + 1):
        if rng.random() < _PASS_PROB:
            moves.append((color, None))
            prev = None
            color = opponent(color)
            continue
        point = _pick_move(board, empties, rng, pol, color, prev, number)
        if point is None:
            break
        result = board.play(color, point)
        empties.remove(point)
        for p in result.captured_points:
            empties.add(p)
        moves.append((color, point))
        prev = point
        color = opponent(color)

    winner = BLACK if rng.random() < 0.5 else WHITE
    if rng.random() < pol.p_resign:
        outcome = Outcome(WIN_BY_RESIGNATION, winner)
    else:
        margin = round(abs(rng.normal(0.0, pol.margin_scale)) * 2) / 2 + 0.5
        outcome = Outcome(WIN_BY_POINTS, winner, margin)
    return tuple(moves), outcome


def _pick_move(board, empties, rng, pol, color, prev, number) -> Optional[tuple]:
    p_capture = pol.p_capture_open if number <= 60 else pol.p_capture_late
    captures = board.atari_liberties(opponent(color))
    if captures and rng.random() < p_capture:
        legal = [p for p in captures if board.is_legal(color, p)]
        if legal:
            return legal[int(rng.integers(len(legal)))]
    if prev is not None and rng.random() < pol.p_local:
        for _ in range(6):
            cand = empties.sample_near(rng, prev, _LOCAL_RADIUS)
            if cand is None:
                break
            if board.is_legal(color, cand):
                return cand
    for _ in range(10):
        cand = empties.sample_by_line(rng, pol.line_weights)
        if cand is None:
            break
        if board.is_legal(color, cand):
            return cand
    for _ in range(10):
        cand = empties.sample_any(rng)
        if cand is None:
            return None
        if board.is_legal(color, cand):
            return cand
    for cand in empties.order:
        if board.is_legal(color, cand):
            return cand
    return None


_RANK_TARGETS = tuple(range(-5, 21))  # 6d .. 20k


def generate_corpus(
    profile: str,
    n_players: int,
    games_per_player: int,
    seed: int,
    out_dir: Path,
    board_size: int = 19,
    min_moves: int = 40,
    max_moves: int = 70,
) -> tuple[Path, Path]:
    """Write a synthetic SGF corpus plus manifest and label files.

    Returns (manifest_path, labels_path). Byte-identical for identical seeds.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    out_dir = Path(out_dir)
    games_dir = out_dir / "games"
    games_dir.mkdir(parents=True, exist_ok=True)
    manifest_lines = []
    label_lines = ["# player\ttarget\trank\tprofile"]
    for p in range(n_players):
        pid = f"p{p:03d}"
        player_rng = np.random.default_rng([seed, p])
        y = float(_RANK_TARGETS[int(player_rng.integers(len(_RANK_TARGETS)))])
        rank = target_to_rank(y)
        u = (y + 5.0) / 25.0
        label_lines.append(f"{pid}\t{y:g}\t{rank}\t{profile}")
        for g in range(games_per_player):
            rng = np.random.default_rng([seed, p, g])
            moves, outcome = generate_game(profile, u, rng, board_size, min_moves, max_moves)
            player_is_black = g % 2 == 0
            record = GameRecord(
                moves=moves,
                board_size=board_size,
                result=outcome,
                black_rank=rank,
                white_rank=rank,
                handicap=0,
                komi=6.5,
                black_player=pid if player_is_black else f"{pid}-op{g:03d}",
                white_player=f"{pid}-op{g:03d}" if player_is_black else pid,
            )
            name = f"games/{pid}-g{g:03d}.sgf"
            (out_dir / name).write_text(serialize_sgf(record) + "\n")
            manifest_lines.append(f"{name}\t{pid}")
    manifest_path = out_dir / "manifest.tsv"
    manifest_path.write_text("\n".join(manifest_lines) + "\n")
    labels_path = out_dir / "labels.tsv"
    labels_path.write_text("\n".join(label_lines) + "\n")
    return manifest_path, labels_path


def load_labels(path: Path) -> dict[str, float]:
    """Read a labels file into {player_id: latent target}."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        out[parts[0]] = float(parts[1])
    return out
