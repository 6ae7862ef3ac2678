"""Aggregate annotated games into the five feature families and one vector per set."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .board import PATTERN_SIZES, PatternKey, annotate_game, canonicalize
from .records import (
    WIN_BY_POINTS,
    WIN_BY_RESIGNATION,
    ColoredGameSet,
    GameRecord,
    Outcome,
)

log = logging.getLogger(__name__)

Interval = tuple[int, Optional[int]]  # inclusive lo, inclusive hi (None = unbounded)

SEGMENT_NAMES = ("patterns", "sente_gote", "border", "captures", "winloss")


def _validate_intervals(intervals: Sequence[Interval]) -> tuple[Interval, ...]:
    if not intervals or intervals[0][0] != 1 or intervals[-1][1] is not None:
        raise ValueError(f"intervals must start at 1 and end unbounded: {intervals}")
    for (lo, hi), (nlo, _) in zip(intervals, intervals[1:]):
        if hi is None or nlo != hi + 1:
            raise ValueError(f"intervals must be disjoint, ordered, covering: {intervals}")
    return tuple(tuple(iv) for iv in intervals)


def interval_index(intervals: Sequence[Interval], x: int) -> int:
    for i, (lo, hi) in enumerate(intervals):
        if x >= lo and (hi is None or x <= hi):
            return i
    raise ValueError(f"{x} not covered by {intervals}")


@dataclass(frozen=True)
class FeatureConfig:
    name: str = "STRENGTH"
    vocab_size: int = 1000
    omega: int = 10
    by_dist: tuple[Interval, ...] = ((1, 2), (3, 3), (4, 4), (5, None))
    by_moves_border: tuple[Interval, ...] = ((1, 10), (11, 64), (65, 200), (201, None))
    by_moves_capture: tuple[Interval, ...] = ((1, 60), (61, 240), (241, None))
    pattern_sizes: tuple[int, ...] = PATTERN_SIZES
    patterns_both_colors: bool = True
    border_both_colors: bool = False

    def __post_init__(self):
        _validate_intervals(self.by_dist)
        _validate_intervals(self.by_moves_border)
        _validate_intervals(self.by_moves_capture)
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be at least 1")
        if self.omega < 1:
            raise ValueError("omega must be at least 1")
        for d in self.pattern_sizes:
            if d not in PATTERN_SIZES:
                raise ValueError(f"pattern size {d} outside {PATTERN_SIZES}")

    @property
    def vector_length(self) -> int:
        return self.vocab_size + 2 + 16 + 9 + 6


STRENGTH_CONFIG = FeatureConfig()
STYLE_CONFIG = FeatureConfig(
    name="STYLE",
    vocab_size=600,
    omega=5,
    by_moves_border=((1, 16), (17, 64), (65, 160), (161, None)),
)
PRESETS = {"STRENGTH": STRENGTH_CONFIG, "STYLE": STYLE_CONFIG}


def _parse_intervals(text: str) -> tuple[Interval, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if part.endswith("-"):
            out.append((int(part[:-1]), None))
        elif "-" in part:
            lo, hi = part.split("-", 1)
            out.append((int(lo), int(hi)))
        else:
            v = int(part)
            out.append((v, v))
    return _validate_intervals(out)


def _format_intervals(intervals: Sequence[Interval]) -> str:
    return ",".join(f"{lo}-{hi}" if hi is not None else f"{lo}-" for lo, hi in intervals)


def load_feature_config(path: Path) -> FeatureConfig:
    """Read a key=value config file; a `preset=` line supplies the defaults."""
    values: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (want key=value): {line!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    base = PRESETS[values.pop("preset", "STRENGTH").upper()]
    kwargs = {}
    if "name" in values:
        kwargs["name"] = values.pop("name")
    for key in ("vocab_size", "omega"):
        if key in values:
            kwargs[key] = int(values.pop(key))
    for key in ("by_dist", "by_moves_border", "by_moves_capture"):
        if key in values:
            kwargs[key] = _parse_intervals(values.pop(key))
    if "pattern_sizes" in values:
        kwargs["pattern_sizes"] = tuple(int(v) for v in values.pop("pattern_sizes").split(","))
    for key in ("patterns_both_colors", "border_both_colors"):
        if key in values:
            kwargs[key] = values.pop(key).lower() in ("1", "true", "yes")
    if values:
        raise ValueError(f"unknown config keys: {sorted(values)}")
    merged = {f: getattr(base, f) for f in base.__dataclass_fields__}
    merged.update(kwargs)
    return FeatureConfig(**merged)


def format_feature_config(config: FeatureConfig) -> str:
    lines = [
        f"name={config.name}",
        f"vocab_size={config.vocab_size}",
        f"omega={config.omega}",
        f"by_dist={_format_intervals(config.by_dist)}",
        f"by_moves_border={_format_intervals(config.by_moves_border)}",
        f"by_moves_capture={_format_intervals(config.by_moves_capture)}",
        f"pattern_sizes={','.join(str(d) for d in config.pattern_sizes)}",
        f"patterns_both_colors={str(config.patterns_both_colors).lower()}",
        f"border_both_colors={str(config.border_both_colors).lower()}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# annotated games: the per-move facts the feature families consume

class AnnotatedMove(NamedTuple):
    number: int
    color: str
    atari_flag: bool
    atari_escape_flag: bool
    captures: int
    contiguity: Optional[int]
    border: int
    keys: tuple[PatternKey, ...]  # aligned with the config's pattern_sizes


@dataclass(frozen=True)
class AnnotatedGame:
    board_size: int
    outcome: Outcome
    moves: tuple[AnnotatedMove, ...]


@dataclass(frozen=True)
class AnnotatedSet:
    entries: tuple[tuple[AnnotatedGame, str], ...]
    player_id: str

    def __len__(self) -> int:
        return len(self.entries)


def annotate_for_features(game: GameRecord, config: FeatureConfig) -> AnnotatedGame:
    """Replay one game and canonicalize its patterns for the configured sizes."""
    moves = []
    for a in annotate_game(game, pattern_sizes=config.pattern_sizes):
        keys = tuple(
            canonicalize(a.raw_patterns[d], a.atari_flag, a.atari_escape_flag)
            for d in config.pattern_sizes
        )
        moves.append(
            AnnotatedMove(
                a.move_number, a.color, a.atari_flag, a.atari_escape_flag,
                a.captures, a.contiguity, a.border_distance, keys,
            )
        )
    return AnnotatedGame(game.board_size, game.result, tuple(moves))


def annotate_set(game_set: ColoredGameSet, config: FeatureConfig,
                 cache: Optional[dict] = None) -> AnnotatedSet:
    """Annotate every game of a colored set; identical games share cache entries."""
    entries = []
    for record, color in game_set.entries:
        if cache is not None:
            key = id(record)
            ag = cache.get(key)
            if ag is None:
                ag = cache[key] = annotate_for_features(record, config)
        else:
            ag = annotate_for_features(record, config)
        entries.append((ag, color))
    return AnnotatedSet(tuple(entries), game_set.player_id)


# ---------------------------------------------------------------------------
# pattern vocabulary

@dataclass(frozen=True)
class PatternVocabulary:
    keys: tuple[PatternKey, ...]
    counts: tuple[int, ...]
    requested: int
    index: dict = field(compare=False, repr=False, default_factory=dict)

    def __post_init__(self):
        self.index.update({k: i for i, k in enumerate(self.keys)})

    def __len__(self) -> int:
        return len(self.keys)


def count_patterns(games: Sequence[AnnotatedGame]) -> Counter:
    """Tally every (canonical pattern, flags) key: one occurrence per move per size."""
    counter: Counter = Counter()
    for game in games:
        for move in game.moves:
            counter.update(move.keys)
    return counter


def vocabulary_from_counts(counter: Counter, n: int) -> PatternVocabulary:
    if not counter:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:n]
    if len(ranked) < n:
        log.warning("vocabulary saturated: %d distinct keys for requested %d", len(ranked), n)
    keys, counts = zip(*ranked)
    return PatternVocabulary(tuple(keys), tuple(counts), n)


def build_vocabulary(games: Sequence[AnnotatedGame], n: int) -> PatternVocabulary:
    """The n most frequent canonical pattern keys over the whole corpus."""
    if not games:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    return vocabulary_from_counts(count_patterns(games), n)


_CELLS_TO_SIZE = {1: 2, 2: 3, 3: 4, 5: 5, 7: 6}


def format_vocabulary(vocab: PatternVocabulary) -> str:
    lines = [
        "# goeval pattern vocabulary v1",
        f"# requested={vocab.requested} stored={len(vocab)}",
        "# rank\tcount\tsize\tatari\tescape\tcells",
    ]
    for i, (key, count) in enumerate(zip(vocab.keys, vocab.counts)):
        lines.append(
            f"{i}\t{count}\t{_CELLS_TO_SIZE[len(key.cells)]}\t"
            f"{int(key.atari_flag)}\t{int(key.atari_escape_flag)}\t{key.cells.hex()}"
        )
    return "\n".join(lines) + "\n"


def save_vocabulary(path: Path, vocab: PatternVocabulary) -> None:
    Path(path).write_text(format_vocabulary(vocab))


def load_vocabulary(path: Path) -> PatternVocabulary:
    keys, counts, requested = [], [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            m = line.find("requested=")
            if m >= 0:
                requested = int(line[m:].split()[0].split("=")[1])
            continue
        if not line.strip():
            continue
        _, count, _, atari, escape, cells = line.split("\t")
        keys.append(PatternKey(bytes.fromhex(cells), atari == "1", escape == "1"))
        counts.append(int(count))
    return PatternVocabulary(tuple(keys), tuple(counts), requested or len(keys))


# ---------------------------------------------------------------------------
# the five feature families

def pattern_feature(aset: AnnotatedSet, vocab: PatternVocabulary,
                    both_colors: bool = True) -> np.ndarray:
    """Occurrence counts of each vocabulary key over the set, divided by |GC|."""
    if len(aset) < 1:
        raise ValueError("empty game set")
    c = np.zeros(len(vocab))
    index = vocab.index
    for game, color in aset.entries:
        for move in game.moves:
            if not both_colors and move.color != color:
                continue
            for key in move.keys:
                i = index.get(key)
                if i is not None:
                    c[i] += 1
    return c / len(aset)


def _sequences(game: AnnotatedGame, omega: int) -> list[tuple[str, str]]:
    """Partition a game into omega-local sequences; yields (starter, ender) colors."""
    seqs = []
    starter = ender = None
    for move in game.moves:
        local = move.contiguity is not None and move.contiguity < omega
        if starter is None or not local:
            if starter is not None:
                seqs.append((starter, ender))
            starter = move.color
        ender = move.color
    if starter is not None:
        seqs.append((starter, ender))
    return seqs


def sente_gote_feature(aset: AnnotatedSet, omega: int) -> np.ndarray:
    """Average counts per game of sente and gote sequences started by the player."""
    sente = gote = 0
    for game, color in aset.entries:
        for starter, ender in _sequences(game, omega):
            if starter != color:
                continue
            if starter != ender:
                sente += 1
            else:
                gote += 1
    return np.array([sente, gote], dtype=float) / len(aset)


def border_distance_feature(aset: AnnotatedSet, config: FeatureConfig) -> np.ndarray:
    """Histogram over (game stage, board line) of the player's moves, / |GC|."""
    n_dist = len(config.by_dist)
    counts = np.zeros(len(config.by_moves_border) * n_dist)
    for game, color in aset.entries:
        for move in game.moves:
            if not config.border_both_colors and move.color != color:
                continue
            m = interval_index(config.by_moves_border, move.number)
            d = interval_index(config.by_dist, move.border)
            counts[m * n_dist + d] += 1
    return counts / len(aset)


def captured_stones_feature(aset: AnnotatedSet, config: FeatureConfig) -> np.ndarray:
    """Per game stage: (player's captives, opponent's captives, difference), / |GC|."""
    stages = len(config.by_moves_capture)
    own = np.zeros(stages)
    opp = np.zeros(stages)
    for game, color in aset.entries:
        for move in game.moves:
            if not move.captures:
                continue
            b = interval_index(config.by_moves_capture, move.number)
            if move.color == color:
                own[b] += move.captures
            else:
                opp[b] += move.captures
    g = len(aset)
    out = np.zeros(stages * 3)
    for b in range(stages):
        out[b * 3] = own[b] / g
        out[b * 3 + 1] = opp[b] / g
        out[b * 3 + 2] = own[b] / g - opp[b] / g
    return out


def winloss_feature(aset: AnnotatedSet) -> np.ndarray:
    """Win/loss rates by counting and resignation, plus mean win/loss margins."""
    wins_c = wins_r = losses_c = losses_r = 0
    win_margins: list[float] = []
    loss_margins: list[float] = []
    for game, color in aset.entries:
        o = game.outcome
        if o.kind == WIN_BY_POINTS:
            if o.winner == color:
                wins_c += 1
                win_margins.append(o.margin)
            else:
                losses_c += 1
                loss_margins.append(o.margin)
        elif o.kind == WIN_BY_RESIGNATION:
            if o.winner == color:
                wins_r += 1
            else:
                losses_r += 1
    g = len(aset)
    return np.array(
        [
            wins_c / g,
            wins_r / g,
            losses_c / g,
            losses_r / g,
            sum(win_margins) / len(win_margins) if win_margins else 0.0,
            sum(loss_margins) / len(loss_margins) if loss_margins else 0.0,
        ]
    )


@dataclass(frozen=True)
class EvaluationVector:
    values: np.ndarray
    segments: tuple[tuple[str, int, int], ...]  # (name, offset, length)

    def segment(self, name: str) -> np.ndarray:
        for seg, off, length in self.segments:
            if seg == name:
                return self.values[off : off + length]
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self.values)


def evaluate_set(aset: AnnotatedSet, vocab: PatternVocabulary,
                 config: FeatureConfig) -> EvaluationVector:
    """Concatenate the five families in fixed order with a segment-offset table."""
    parts = [
        ("patterns", pattern_feature(aset, vocab, config.patterns_both_colors)),
        ("sente_gote", sente_gote_feature(aset, config.omega)),
        ("border", border_distance_feature(aset, config)),
        ("captures", captured_stones_feature(aset, config)),
        ("winloss", winloss_feature(aset)),
    ]
    segments = []
    offset = 0
    for name, arr in parts:
        segments.append((name, offset, len(arr)))
        offset += len(arr)
        if name in ("patterns", "border") and np.any(arr < 0):
            raise ValueError(f"negative {name} component")
    values = np.concatenate([arr for _, arr in parts])
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite feature component")
    return EvaluationVector(values, tuple(segments))


# ---------------------------------------------------------------------------
# evaluation-matrix persistence

def format_matrix(
    ids: Sequence[str],
    targets: np.ndarray,
    vectors: np.ndarray,
    target_names: Sequence[str],
    segments: Sequence[tuple[str, int, int]],
    preset: str = "custom",
) -> str:
    """Delimited text matrix: set id, target value(s), then feature components."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape[0] != len(ids):
        targets = targets.T
    seg_text = ",".join(f"{n}:{o}:{l}" for n, o, l in segments)
    cols = ["set_id"] + [f"target:{t}" for t in target_names]
    for name, _, length in segments:
        cols.extend(f"{name}.{i}" for i in range(length))
    lines = [
        "# goeval evaluation matrix v1",
        f"# preset={preset}",
        f"# segments={seg_text}",
        "\t".join(cols),
    ]
    for i, set_id in enumerate(ids):
        row = [set_id]
        row.extend(repr(float(v)) for v in targets[i])
        row.extend(repr(float(v)) for v in vectors[i])
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def write_matrix(
    path: Path,
    ids: Sequence[str],
    targets: np.ndarray,
    vectors: np.ndarray,
    target_names: Sequence[str],
    segments: Sequence[tuple[str, int, int]],
    preset: str = "custom",
) -> None:
    Path(path).write_text(format_matrix(ids, targets, vectors, target_names, segments, preset))


class Matrix(NamedTuple):
    ids: tuple[str, ...]
    targets: np.ndarray  # (n, n_targets)
    vectors: np.ndarray  # (n, dim)
    target_names: tuple[str, ...]
    segments: tuple[tuple[str, int, int], ...]
    preset: str


def read_matrix(path: Path) -> Matrix:
    lines = Path(path).read_text().splitlines()
    preset = "custom"
    segments: tuple[tuple[str, int, int], ...] = ()
    header = None
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("#"):
            if "preset=" in line:
                preset = line.split("preset=", 1)[1].strip()
            elif "segments=" in line:
                segs = []
                for part in line.split("segments=", 1)[1].strip().split(","):
                    name, off, length = part.split(":")
                    segs.append((name, int(off), int(length)))
                segments = tuple(segs)
            continue
        if not line.strip():
            continue
        if header is None:
            header = line.split("\t")
            continue
        parts = line.split("\t")
        if len(parts) != len(header):
            raise ValueError(f"malformed matrix row {lineno}: {len(parts)} fields, "
                             f"expected {len(header)}")
        rows.append(parts)
    if header is None or not rows:
        raise ValueError(f"empty evaluation matrix: {path}")
    target_names = tuple(c[len("target:"):] for c in header if c.startswith("target:"))
    n_targets = len(target_names)
    ids = tuple(r[0] for r in rows)
    try:
        data = np.array([[float(v) for v in r[1:]] for r in rows])
    except ValueError as e:
        raise ValueError(f"malformed matrix value in {path}: {e}") from None
    return Matrix(ids, data[:, :n_targets], data[:, n_targets:], target_names, segments, preset)


# ---------------------------------------------------------------------------
# sparse per-set pattern counts (for fold-local vocabulary rebuilds)

def format_pattern_counts(ids: Sequence[str], sizes: Sequence[int],
                          counts: Sequence[Counter]) -> str:
    lines = ["# goeval pattern counts v1",
             "# set_index\tset_id\tgames\t(count:size:atari:escape:cells)*"]
    for i, (set_id, g, counter) in enumerate(zip(ids, sizes, counts)):
        items = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
        packed = " ".join(
            f"{c}:{_CELLS_TO_SIZE[len(k.cells)]}:{int(k.atari_flag)}:"
            f"{int(k.atari_escape_flag)}:{k.cells.hex()}"
            for k, c in items
        )
        lines.append(f"{i}\t{set_id}\t{g}\t{packed}")
    return "\n".join(lines) + "\n"


def write_pattern_counts(path: Path, ids: Sequence[str], sizes: Sequence[int],
                         counts: Sequence[Counter]) -> None:
    Path(path).write_text(format_pattern_counts(ids, sizes, counts))


def read_pattern_counts(path: Path) -> tuple[tuple[str, ...], tuple[int, ...], list[Counter]]:
    ids, sizes, counts = [], [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        parts = line.split("\t")
        ids.append(parts[1])
        sizes.append(int(parts[2]))
        counter: Counter = Counter()
        if len(parts) > 3 and parts[3]:
            for item in parts[3].split(" "):
                c, _, atari, escape, cells = item.split(":")
                counter[PatternKey(bytes.fromhex(cells), atari == "1", escape == "1")] = int(c)
        counts.append(counter)
    return tuple(ids), tuple(sizes), counts


def set_pattern_counts(aset: AnnotatedSet, both_colors: bool = True) -> Counter:
    """Raw pattern-key counts of one set (numerators of pattern_feature)."""
    counter: Counter = Counter()
    for game, color in aset.entries:
        for move in game.moves:
            if not both_colors and move.color != color:
                continue
            counter.update(move.keys)
    return counter
