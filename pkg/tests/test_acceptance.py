"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run `pytest tests/test_acceptance.py -s` to see the lines for passing criteria.
"""

import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from goeval.board import PATTERN_SIZES, canonicalize, gridcular_distance, neighborhood_offsets
from goeval.cli import main
from goeval.crossval import (
    LabeledDataset,
    cross_validate,
    feature_ablation,
    kfold_split,
)
from goeval.features import (
    FeatureConfig,
    annotate_set,
    border_distance_feature,
    build_vocabulary,
    captured_stones_feature,
    pattern_feature,
    read_matrix,
    sente_gote_feature,
    winloss_feature,
)
from goeval.model import HIDDEN_UNITS, NetworkParams, gradients
from goeval.records import BLACK, WHITE, ColoredGameSet, GameRecord
from goeval.synth import generate_game

from helpers import (
    HAND_GAMES,
    assert_gradients_close,
    fd_gradients,
    naive_annotations,
    random_raw_pattern,
    transform_raw_pattern,
)


@contextmanager
def criterion(n, label):
    try:
        yield
    except BaseException:
        print(f"\n[acceptance] criterion {n}: FAIL — {label}")
        raise
    print(f"\n[acceptance] criterion {n}: PASS — {label}")


# ---------------------------------------------------------------------------

def test_criterion_1_mean_regression_anchor():
    with criterion(1, "mean-regression RMSE on 26 balanced ranks in [7.4, 7.6]"):
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        targets = np.repeat(np.arange(-5, 21, dtype=float), 120)  # 26 ranks x 120 sets
        vectors = rng.normal(size=(len(targets), 4))
        data = LabeledDataset(vectors, targets)
        report = cross_validate(data, "mean", k=10, repeats=5, seed=17)
        elapsed = time.perf_counter() - start
        assert 7.4 <= report.mean_rmse <= 7.6, report
        assert elapsed < 10.0, f"took {elapsed:.1f}s"


def _scripted_nine_by_nine():
    """3 hand-verified games plus 7 seeded generator games, with interest colors."""
    entries = [(game, BLACK if i % 2 == 0 else WHITE)
               for i, (game, _) in enumerate(HAND_GAMES)]
    for j in range(7):
        rng = np.random.default_rng([400, j])
        moves, outcome = generate_game("planted", j / 6.0, rng, board_size=9,
                                       min_moves=20, max_moves=32)
        record = GameRecord(moves=moves, board_size=9, result=outcome)
        entries.append((record, BLACK if j % 2 == 0 else WHITE))
    return entries


def test_criterion_2_feature_oracle_equivalence():
    with criterion(2, "five feature families equal a naive recount on 10 scripted games"):
        start = time.perf_counter()
        entries = _scripted_nine_by_nine()
        g = len(entries)
        config = FeatureConfig(pattern_sizes=PATTERN_SIZES, vocab_size=40)
        aset = annotate_set(ColoredGameSet(tuple(entries), "scripted"), config)
        vocab = build_vocabulary([ag for ag, _ in aset.entries], 40)

        naive = {record: naive_annotations(record, PATTERN_SIZES)
                 for record, _ in entries}

        # patterns: counts of each vocabulary key over all moves of both players
        feat = pattern_feature(aset, vocab, config.patterns_both_colors)
        lookup = {(k.cells, k.atari_flag, k.atari_escape_flag): i
                  for i, k in enumerate(vocab.keys)}
        counts = [0] * len(vocab)
        for record, _ in entries:
            for ann in naive[record]:
                for d in PATTERN_SIZES:
                    i = lookup.get(ann["keys"][d])
                    if i is not None:
                        counts[i] += 1
        assert feat.tolist() == [c / g for c in counts]

        # sente/gote sequences under the strength omega
        feat = sente_gote_feature(aset, config.omega)
        sente = gote = 0
        for (record, color) in entries:
            anns = naive[record]
            seq_bounds = [0]
            for i in range(1, len(anns)):
                c = anns[i]["contiguity"]
                if c is None or c >= config.omega:
                    seq_bounds.append(i)
            seq_bounds.append(len(anns))
            for s, e in zip(seq_bounds, seq_bounds[1:]):
                if s == e or anns[s]["color"] != color:
                    continue
                if anns[s]["color"] != anns[e - 1]["color"]:
                    sente += 1
                else:
                    gote += 1
        assert feat.tolist() == [sente / g, gote / g]

        # border-distance histogram of the interest player's moves
        feat = border_distance_feature(aset, config)
        hist = [0] * 16
        for (record, color) in entries:
            for ann in naive[record]:
                if ann["color"] != color:
                    continue
                m = next(i for i, (lo, hi) in enumerate(config.by_moves_border)
                         if ann["number"] >= lo and (hi is None or ann["number"] <= hi))
                dd = next(i for i, (lo, hi) in enumerate(config.by_dist)
                          if ann["border"] >= lo and (hi is None or ann["border"] <= hi))
                hist[m * 4 + dd] += 1
        assert feat.tolist() == [c / g for c in hist]

        # captured stones per game stage
        feat = captured_stones_feature(aset, config)
        own = [0] * 3
        opp = [0] * 3
        for (record, color) in entries:
            for ann in naive[record]:
                if ann["captures"]:
                    b = next(i for i, (lo, hi) in enumerate(config.by_moves_capture)
                             if ann["number"] >= lo and (hi is None or ann["number"] <= hi))
                    if ann["color"] == color:
                        own[b] += ann["captures"]
                    else:
                        opp[b] += ann["captures"]
        assert sum(own) + sum(opp) > 0  # the scripted corpus does contain captures
        for b in range(3):
            assert feat[b * 3] == own[b] / g
            assert feat[b * 3 + 1] == opp[b] / g
            assert feat[b * 3 + 2] == own[b] / g - opp[b] / g

        # win/loss statistic
        feat = winloss_feature(aset)
        wc = wr = lc = lr = 0
        wins, losses = [], []
        for (record, color) in entries:
            o = record.result
            if o.kind == "win_by_points":
                if o.winner == color:
                    wc += 1
                    wins.append(o.margin)
                else:
                    lc += 1
                    losses.append(o.margin)
            elif o.kind == "win_by_resignation":
                if o.winner == color:
                    wr += 1
                else:
                    lr += 1
        assert feat[:4].tolist() == [wc / g, wr / g, lc / g, lr / g]
        assert feat[4] == (sum(wins) / len(wins) if wins else 0.0)
        assert feat[5] == (sum(losses) / len(losses) if losses else 0.0)

        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


def test_criterion_3_canonicalization_invariance():
    with criterion(3, "1000 random patterns invariant under dihedral + color transforms"):
        rng = np.random.default_rng(31415)
        failures = 0
        for _ in range(1000):
            d = int(rng.choice(PATTERN_SIZES))
            raw = random_raw_pattern(rng, d)
            atari = bool(rng.random() < 0.5)
            escape = bool(rng.random() < 0.5)
            key = canonicalize(raw, atari, escape)
            twin = transform_raw_pattern(raw, int(rng.integers(8)),
                                         bool(rng.random() < 0.5))
            if canonicalize(twin, atari, escape) != key:
                failures += 1
        assert failures == 0


def test_criterion_4_gridcular_metric_properties():
    with criterion(4, "metric axioms on 1e5 triples; neighborhoods equal brute force"):
        rng = np.random.default_rng(999)
        pts = rng.integers(-25, 26, size=(100_000, 3, 2))
        for p, q, r in pts:
            p, q, r = tuple(p), tuple(q), tuple(r)
            d_pq = gridcular_distance(p, q)
            assert d_pq == gridcular_distance(q, p)
            assert (d_pq == 0) == (p == q)
            assert gridcular_distance(p, r) <= d_pq + gridcular_distance(q, r)

        size = 19
        board_points = [(x, y) for x in range(1, size + 1) for y in range(1, size + 1)]
        for d in PATTERN_SIZES:
            offsets = neighborhood_offsets(d)
            for c in board_points:
                brute = {q for q in board_points if 1 <= gridcular_distance(c, q) <= d}
                mine = {(c[0] + dx, c[1] + dy) for dx, dy in offsets
                        if 1 <= c[0] + dx <= size and 1 <= c[1] + dy <= size}
                assert mine == brute


def _random_sets(n_sets, seed):
    config = FeatureConfig(pattern_sizes=(2,), vocab_size=4)
    out = []
    for i in range(n_sets):
        rng = np.random.default_rng([seed, i])
        entries = []
        for j in range(int(rng.integers(1, 5))):
            moves, outcome = generate_game(
                "planted", float(rng.random()), np.random.default_rng([seed, i, j]),
                board_size=9, min_moves=12, max_moves=26,
            )
            record = GameRecord(moves=moves, board_size=9, result=outcome)
            entries.append((record, BLACK if rng.random() < 0.5 else WHITE))
        out.append(annotate_set(ColoredGameSet(tuple(entries), f"s{i}"), config))
    return config, out


def test_criterion_5_conservation_invariants():
    with criterion(5, "conservation invariants over 200 random synthetic sets"):
        config, sets = _random_sets(200, seed=808)
        for aset in sets:
            g = len(aset)
            hist = border_distance_feature(aset, config)
            interest_moves = sum(
                1 for game, color in aset.entries for mv in game.moves if mv.color == color
            )
            assert hist.sum() * g == pytest.approx(interest_moves, abs=1e-9)

            caps = captured_stones_feature(aset, config)
            for b in range(3):
                assert caps[b * 3 + 2] == caps[b * 3] - caps[b * 3 + 1]

            wl = winloss_feature(aset)
            assert wl[:4].sum() <= 1.0 + 1e-12
            assert np.all(wl[:4] >= 0)


def test_criterion_6_gradient_check():
    with criterion(6, "analytic gradient vs central differences on 50 instances"):
        rng = np.random.default_rng(606)
        for _ in range(50):
            params = NetworkParams(
                w1=rng.uniform(-1, 1, size=(HIDDEN_UNITS, 5)),
                b1=rng.uniform(-1, 1, size=HIDDEN_UNITS),
                w2=rng.uniform(-1, 1, size=HIDDEN_UNITS),
                b2=float(rng.uniform(-1, 1)),
            )
            X = rng.uniform(-1, 1, size=(8, 5))
            y = rng.uniform(-1, 1, size=8)
            assert_gradients_close(gradients(params, X, y), fd_gradients(params, X, y),
                                   tol=1e-4)


def _run_strength_pipeline(tmp, profile, config_path, seed):
    d = tmp / profile
    assert main(["synth", "--profile", profile, "--players", "100",
                 "--games-per-player", "12", "--seed", "77", "--min-moves", "40",
                 "--max-moves", "70", "--out-dir", str(d)]) == 0
    assert main(["build-vocab", "--manifest", str(d / "manifest.tsv"),
                 "--config", str(config_path), "--out", str(d / "vocab.tsv")]) == 0
    assert main(["extract", "--manifest", str(d / "manifest.tsv"),
                 "--vocab", str(d / "vocab.tsv"), "--config", str(config_path),
                 "--mode", "strength", "--seed", str(seed),
                 "--out", str(d / "eval.tsv")]) == 0
    m = read_matrix(d / "eval.tsv")
    data = LabeledDataset(m.vectors, m.targets[:, 0], m.segments)
    base = cross_validate(data, "mean", k=10, repeats=5, seed=11)
    nn = cross_validate(data, "bagged-nn", k=10, repeats=5, seed=11)
    return base.mean_rmse, nn.mean_rmse


def test_criterion_7_planted_signal_learning(tmp_path):
    with criterion(7, "bagged net halves the planted-signal RMSE; null control flat"):
        start = time.perf_counter()
        cfg = tmp_path / "accept.cfg"
        cfg.write_text("preset=STRENGTH\nname=accept\nvocab_size=100\npattern_sizes=2,3\n")
        base, nn = _run_strength_pipeline(tmp_path, "planted", cfg, seed=1)
        assert nn < 0.5 * base, f"planted: bagged {nn:.3f} vs mean {base:.3f}"
        base0, nn0 = _run_strength_pipeline(tmp_path, "null", cfg, seed=1)
        improvement = 1.0 - nn0 / base0
        assert improvement < 0.05, f"null: improvement {improvement:.3%}"
        elapsed = time.perf_counter() - start
        assert elapsed < 300.0, f"took {elapsed:.0f}s"


def test_criterion_8_determinism(corpus, tiny_config, vocab_file, tmp_path):
    with criterion(8, "extract and crossval outputs byte-identical across reruns"):
        outs = []
        for tag in ("one", "two"):
            out = tmp_path / f"{tag}.tsv"
            counts = tmp_path / f"{tag}.counts.tsv"
            assert main(["extract", "--manifest", str(corpus / "manifest.tsv"),
                         "--vocab", str(vocab_file), "--config", str(tiny_config),
                         "--mode", "strength", "--seed", "3", "--out", str(out),
                         "--counts-out", str(counts)]) == 0
            outs.append((out.read_bytes(), counts.read_bytes()))
        assert outs[0] == outs[1]

        reports = []
        for tag in ("one", "two"):
            prefix = tmp_path / f"cv-{tag}"
            assert main(["crossval", "--matrix", str(tmp_path / "one.tsv"),
                         "--model", "mean", "--ablate", "--folds", "4",
                         "--repeats", "3", "--seed", "9",
                         "--out-prefix", str(prefix)]) == 0
            reports.append(
                (Path(f"{prefix}.strength.txt").read_bytes(),
                 Path(f"{prefix}.strength.tsv").read_bytes())
            )
        assert reports[0] == reports[1]


def test_criterion_9_protocol_shape(matrix_file):
    with criterion(9, "5 repeat RMSEs, exact fold coverage, full ablation table"):
        m = read_matrix(matrix_file)
        data = LabeledDataset(m.vectors, m.targets[:, 0], m.segments)
        report = cross_validate(data, "mean", k=4, repeats=5, seed=21)
        assert len(report.repeat_rmses) == 5

        # every row appears in exactly one test fold per repeat
        for r in range(5):
            folds = kfold_split(len(data), 4, np.random.SeedSequence([21, r]))
            merged = np.concatenate(folds)
            assert sorted(merged.tolist()) == list(range(len(data)))
            assert max(len(f) for f in folds) - min(len(f) for f in folds) <= 1

        rows = feature_ablation(data, "mean", k=4, repeats=5, seed=21)
        labels = [row.label for row in rows]
        assert labels == ["none (mean regression)", "patterns", "sente_gote",
                          "border", "captures", "winloss", "all features combined"]
        base = rows[0].report.mean_rmse
        for row in rows:
            assert row.mean_cmp == pytest.approx(base / row.report.mean_rmse)
