"""Command line: vocabulary building, feature extraction, cross-validation,
prediction, and synthetic-corpus generation.

Logs go to stderr, data to files; every run writes a JSON manifest sidecar.
Exit codes: 0 success, 1 input error (including partial corpora), 2 internal.
"""

from __future__ import annotations

import argparse
import json
import logging
import multiprocessing
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .board import AnnotationError
from .crossval import (
    AblationRow,
    LabeledDataset,
    cross_validate,
    cross_validate_fold_vocab,
    feature_ablation,
    format_report_delimited,
    format_report_table,
)
from .features import (
    AnnotatedSet,
    FeatureConfig,
    PRESETS,
    annotate_for_features,
    build_vocabulary,
    evaluate_set,
    format_matrix,
    format_pattern_counts,
    format_vocabulary,
    load_feature_config,
    load_vocabulary,
    read_matrix,
    read_pattern_counts,
    set_pattern_counts,
)
from .model import (
    format_model_bundle,
    input_clamp_fraction,
    load_model_bundle,
    predict_batch,
    predict_mean,
    train_bagged,
    train_mean,
)
from .records import (
    BLACK,
    WHITE,
    ColoredGameSet,
    CorpusGame,
    GameRecord,
    ParseError,
    assemble_strength_sets,
    assemble_style_sets,
    load_manifest,
    parse_sgf,
)
from .synth import PROFILES, generate_corpus

log = logging.getLogger("goeval")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2

STYLE_TARGETS = ("territoriality", "orthodoxity", "aggressivity", "thickness")


class InputError(Exception):
    """A problem with user-supplied inputs (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_INPUT)


def atomic_write(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_run_manifest(out_path: Path, command: str, args: argparse.Namespace,
                       inputs: Sequence[str], outputs: Sequence[str]) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "preset": getattr(args, "preset", None),
        "config": str(getattr(args, "config", None)) if getattr(args, "config", None) else None,
        "options": {k: str(v) for k, v in sorted(vars(args).items()) if k != "func"},
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    atomic_write(Path(out_path), json.dumps(manifest, indent=2) + "\n")


def _resolve_config(args) -> FeatureConfig:
    if getattr(args, "config", None):
        return load_feature_config(Path(args.config))
    preset = getattr(args, "preset", None) or "STRENGTH"
    if preset.upper() not in PRESETS:
        raise InputError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    return PRESETS[preset.upper()]


# ---------------------------------------------------------------------------
# corpus loading and annotation

def _load_corpus(manifest_path: Path) -> tuple[list[CorpusGame], int]:
    """Parse every manifest entry; unreadable or malformed files are logged."""
    try:
        entries = load_manifest(manifest_path)
    except OSError as e:
        raise InputError(f"cannot read manifest {manifest_path}: {e}") from e
    if not entries:
        raise InputError(f"manifest {manifest_path} lists no games")
    corpus: list[CorpusGame] = []
    failures = 0
    for entry in entries:
        try:
            record = parse_sgf(entry.path.read_text(errors="replace"))
        except (OSError, ParseError, ValueError) as e:
            log.error("skipping %s: %s", entry.path, e)
            failures += 1
            continue
        corpus.append(CorpusGame(record, entry.player_id, entry.rank_override))
    if not corpus:
        raise InputError(f"no parseable games in {manifest_path}")
    return corpus, failures


def _annotate_one(payload):
    record, config = payload
    try:
        return annotate_for_features(record, config)
    except AnnotationError as e:
        return e


def _annotate_records(records: Sequence[GameRecord], config: FeatureConfig,
                      jobs: int = 1) -> dict[int, object]:
    """Annotate records (in parallel when jobs > 1); failures map to None."""
    payloads = [(r, config) for r in records]
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            results = pool.map(_annotate_one, payloads)
    else:
        results = [_annotate_one(p) for p in payloads]
    out = {}
    for record, result in zip(records, results):
        if isinstance(result, AnnotationError):
            log.warning("skipping game (replay failed at move %d): %s",
                        result.move_number, result)
            out[id(record)] = None
        else:
            out[id(record)] = result
    return out


def _annotate_sets(sets: Sequence[ColoredGameSet], config: FeatureConfig,
                   jobs: int) -> list[Optional[AnnotatedSet]]:
    distinct: dict[int, GameRecord] = {}
    for gs in sets:
        for record, _ in gs.entries:
            distinct[id(record)] = record
    annotated = _annotate_records(list(distinct.values()), config, jobs)
    out = []
    for gs in sets:
        entries = []
        for record, color in gs.entries:
            ag = annotated[id(record)]
            if ag is not None:
                entries.append((ag, color))
        if not entries:
            log.warning("dropping set %s: no replayable games", gs.player_id)
            out.append(None)
        else:
            out.append(AnnotatedSet(tuple(entries), gs.player_id))
    return out


def _load_style_labels(path: Path) -> dict[str, tuple[float, ...]]:
    labels = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 5:
            raise InputError(f"{path}:{lineno}: want player + 4 style values")
        labels[parts[0]] = tuple(float(v) for v in parts[1:5])
    return labels


# ---------------------------------------------------------------------------
# subcommands

def cmd_build_vocab(args) -> int:
    config = _resolve_config(args)
    corpus, failures = _load_corpus(Path(args.manifest))
    annotated = _annotate_records([cg.record for cg in corpus], config, args.jobs)
    games = [ag for ag in annotated.values() if ag is not None]
    if not games:
        raise InputError("no replayable games in corpus")
    vocab = build_vocabulary(games, config.vocab_size)
    out = Path(args.out)
    atomic_write(out, format_vocabulary(vocab))
    write_run_manifest(out.with_suffix(out.suffix + ".manifest.json"),
                       "build-vocab", args, [args.manifest], [out])
    print(f"vocabulary: {len(vocab)} keys from {len(games)} games")
    for i in range(min(10, len(vocab))):
        k = vocab.keys[i]
        print(f"  #{i + 1} count={vocab.counts[i]} cells={k.cells.hex()} "
              f"atari={int(k.atari_flag)} escape={int(k.atari_escape_flag)}")
    return EXIT_INPUT if failures else EXIT_OK


def cmd_extract(args) -> int:
    config = _resolve_config(args)
    vocab = load_vocabulary(Path(args.vocab))
    if vocab.requested != config.vocab_size:
        raise InputError(
            f"vocabulary was built for N={vocab.requested}, config wants {config.vocab_size}"
        )
    corpus, failures = _load_corpus(Path(args.manifest))

    if args.mode == "strength":
        labeled = assemble_strength_sets(corpus, args.seed)
        sets = [gs for gs, _ in labeled]
        targets = np.array([[y] for _, y in labeled])
        target_names = ("strength",)
    else:
        if not args.labels:
            raise InputError("style extraction needs --labels")
        labels = _load_style_labels(Path(args.labels))
        by_player: dict[str, list[tuple[GameRecord, str]]] = {}
        for cg in corpus:
            pid = cg.player_id
            if pid is None:
                log.warning("style corpus line without player id; skipping a game")
                continue
            if cg.record.black_player == pid:
                color = BLACK
            elif cg.record.white_player == pid:
                color = WHITE
            else:
                log.warning("player %s absent from game (PB=%s PW=%s); skipped",
                            pid, cg.record.black_player, cg.record.white_player)
                continue
            by_player.setdefault(pid, []).append((cg.record, color))
        sets = []
        target_rows = []
        for idx, pid in enumerate(sorted(by_player)):
            if pid not in labels:
                raise InputError(f"no style labels for player {pid}")
            player_seed = np.random.SeedSequence([args.seed, idx])
            for gs, tgt in assemble_style_sets(by_player[pid], labels[pid], pid, player_seed):
                sets.append(gs)
                target_rows.append(tgt)
        targets = np.array(target_rows)
        target_names = STYLE_TARGETS

    if not sets:
        raise InputError("no game sets could be assembled from the corpus")

    annotated = _annotate_sets(sets, config, args.jobs)
    ids, rows, kept_targets, counts, set_sizes = [], [], [], [], []
    segments = None
    for gs, aset, tgt in zip(sets, annotated, targets):
        if aset is None:
            continue
        ev = evaluate_set(aset, vocab, config)
        segments = ev.segments
        ids.append(gs.player_id)
        rows.append(ev.values)
        kept_targets.append(tgt)
        if args.counts_out:
            counts.append(set_pattern_counts(aset, config.patterns_both_colors))
            set_sizes.append(len(aset))
    if not rows:
        raise InputError("every assembled set failed annotation")

    out = Path(args.out)
    atomic_write(out, format_matrix(ids, np.array(kept_targets), np.array(rows),
                                    target_names, segments, preset=config.name))
    outputs = [out]
    if args.counts_out:
        atomic_write(Path(args.counts_out), format_pattern_counts(ids, set_sizes, counts))
        outputs.append(Path(args.counts_out))
    write_run_manifest(out.with_suffix(out.suffix + ".manifest.json"), "extract",
                       args, [args.manifest, args.vocab], outputs)
    log.info("extracted %d evaluation vectors of length %d", len(rows), len(rows[0]))
    return EXIT_INPUT if failures else EXIT_OK


def cmd_crossval(args) -> int:
    matrix = read_matrix(Path(args.matrix))
    n = len(matrix.ids)
    if n < args.folds:
        raise InputError(f"{n} rows cannot fill {args.folds} folds")
    groups = None
    if args.group_aware:
        groups = tuple(i.split("#")[0].split("@")[0] for i in matrix.ids)
    outputs = []
    for t, target_name in enumerate(matrix.target_names):
        data = LabeledDataset(matrix.vectors, matrix.targets[:, t], matrix.segments,
                              groups)
        if args.ablate:
            rows = feature_ablation(data, args.model, None, args.folds, args.repeats,
                                    args.seed, group_aware=args.group_aware)
        else:
            baseline = cross_validate(data, "mean", args.folds, args.repeats, args.seed,
                                      "none", group_aware=args.group_aware)
            rows = [AblationRow("none (mean regression)", baseline, 1.0)]
            if args.model != "mean":
                rep = cross_validate(data, args.model, args.folds, args.repeats,
                                     args.seed, group_aware=args.group_aware)
                rows.append(AblationRow("all features combined", rep,
                                        baseline.mean_rmse / rep.mean_rmse))
        if args.vocab_from_train:
            if not args.counts:
                raise InputError("--vocab-from-train needs --counts from cmd_extract")
            ids, sizes, counters = read_pattern_counts(Path(args.counts))
            if ids != matrix.ids:
                raise InputError("counts file does not match the matrix rows")
            pat_len = dict((nm, ln) for nm, _, ln in matrix.segments)["patterns"]
            rest = [v for nm, off, ln in matrix.segments if nm != "patterns"
                    for v in range(off, off + ln)]
            rep = cross_validate_fold_vocab(
                counters, sizes, matrix.vectors[:, rest], matrix.targets[:, t],
                pat_len, args.model if args.model != "mean" else "bagged-nn",
                args.folds, args.repeats, args.seed,
            )
            base = rows[0].report.mean_rmse
            rows.append(AblationRow(rep.feature_label, rep, base / rep.mean_rmse))

        text_path = Path(f"{args.out_prefix}.{target_name}.txt")
        tsv_path = Path(f"{args.out_prefix}.{target_name}.tsv")
        atomic_write(text_path, f"target: {target_name}  model: {args.model}  "
                                f"folds: {args.folds}  repeats: {args.repeats}\n"
                                + format_report_table(rows))
        atomic_write(tsv_path, format_report_delimited(rows))
        outputs += [text_path, tsv_path]
        print(f"[{target_name}]")
        print(format_report_table(rows), end="")
    write_run_manifest(Path(f"{args.out_prefix}.manifest.json"), "crossval", args,
                       [args.matrix], outputs)
    return EXIT_OK


def cmd_train(args) -> int:
    matrix = read_matrix(Path(args.matrix))
    models = {}
    for t, target_name in enumerate(matrix.target_names):
        y = matrix.targets[:, t]
        if args.model == "mean":
            models[target_name] = train_mean(y)
        else:
            models[target_name] = train_bagged(
                matrix.vectors, y, np.random.SeedSequence([args.seed, t])
            )
        log.info("trained %s model for %s on %d rows", args.model, target_name, len(y))
    out = Path(args.out)
    atomic_write(out, format_model_bundle(models, preset=matrix.preset,
                                          segments=matrix.segments))
    write_run_manifest(out.with_suffix(out.suffix + ".manifest.json"), "train", args,
                       [args.matrix], [out])
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = load_model_bundle(Path(args.model))
    vocab = load_vocabulary(Path(args.vocab))
    if args.config:
        config = load_feature_config(Path(args.config))
    elif args.preset:
        config = _resolve_config(args)
    elif bundle.preset in PRESETS:
        config = PRESETS[bundle.preset]
    else:
        raise InputError(f"model preset {bundle.preset!r} unknown; pass --preset/--config")

    entries = []
    for path in args.games:
        try:
            record = parse_sgf(Path(path).read_text(errors="replace"))
        except (OSError, ParseError, ValueError) as e:
            log.error("skipping %s: %s", path, e)
            continue
        if args.player:
            if record.black_player == args.player:
                color = BLACK
            elif record.white_player == args.player:
                color = WHITE
            else:
                log.warning("player %s absent from %s; skipped", args.player, path)
                continue
        else:
            color = args.color
        entries.append((record, color))
    if not entries:
        raise InputError("no usable games to evaluate")

    gs = ColoredGameSet(tuple(entries), args.player or f"({args.color})")
    aset = _annotate_sets([gs], config, args.jobs)[0]
    if aset is None:
        raise InputError("no game could be replayed")
    ev = evaluate_set(aset, vocab, config)

    print(f"evaluated {len(aset)} games for {gs.player_id}")
    for name, off, length in ev.segments:
        seg = ev.segment(name)
        print(f"  segment {name:<11} len={length:<5} mean={seg.mean():.4f} max={seg.max():.4f}")
    for target_name, m in bundle.models.items():
        if hasattr(m, "members"):
            value = float(predict_batch(m, ev.values[None, :])[0])
            clamped = input_clamp_fraction(m.scaler, ev.values[None, :])
            note = ""
            if clamped > 0:
                note = f"  [note: {clamped:.1%} of inputs outside training range, clamped]"
            print(f"predicted {target_name}: {value:.3f}{note}")
        else:
            print(f"predicted {target_name}: {predict_mean(m, ev.values[None, :])[0]:.3f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    manifest_path, labels_path = generate_corpus(
        args.profile, args.players, args.games_per_player, args.seed, out_dir,
        board_size=args.board_size, min_moves=args.min_moves, max_moves=args.max_moves,
    )
    write_run_manifest(out_dir / "run.manifest.json", "synth", args, [],
                       [manifest_path, labels_path])
    log.info("wrote %d games under %s", args.players * args.games_per_player, out_dir)
    print(f"manifest: {manifest_path}")
    print(f"labels:   {labels_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="goeval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, preset=True):
        p.add_argument("--seed", type=int, default=0, help="64-bit seed for all randomness")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for annotation")
        if preset:
            p.add_argument("--preset", choices=sorted(PRESETS), default=None)
            p.add_argument("--config", default=None, help="feature-config file")

    p = sub.add_parser("build-vocab", help="count patterns and keep the N most frequent")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("extract", help="assemble game sets and write the evaluation matrix")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--mode", choices=("strength", "style"), default="strength")
    p.add_argument("--labels", default=None, help="style labels file (player + 4 values)")
    p.add_argument("--out", required=True)
    p.add_argument("--counts-out", default=None,
                   help="also write per-set pattern counts (for --vocab-from-train)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("crossval", help="repeated k-fold cross-validation on a matrix")
    common(p, preset=False)
    p.add_argument("--matrix", required=True)
    p.add_argument("--model", choices=("mean", "bagged-nn"), required=True)
    p.add_argument("--ablate", action="store_true", help="one row per feature segment")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--vocab-from-train", action="store_true",
                   help="rebuild the pattern vocabulary from training folds only")
    p.add_argument("--counts", default=None, help="pattern counts file from extract")
    p.add_argument("--group-aware", action="store_true",
                   help="keep one player's sets inside a single fold")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("train", help="train a model bundle on a full matrix")
    common(p, preset=False)
    p.add_argument("--matrix", required=True)
    p.add_argument("--model", choices=("mean", "bagged-nn"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict targets for one player's games")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--player", default=None, help="player name to locate in each game")
    p.add_argument("--color", choices=(BLACK, WHITE), default=BLACK,
                   help="color of interest when --player is not given")
    p.add_argument("games", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="generate a synthetic SGF corpus with known latents")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=PROFILES, required=True)
    p.add_argument("--players", type=int, default=100)
    p.add_argument("--games-per-player", type=int, default=12)
    p.add_argument("--board-size", type=int, default=19)
    p.add_argument("--min-moves", type=int, default=40)
    p.add_argument("--max-moves", type=int, default=70)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (InputError, ParseError, FileNotFoundError) as e:
        log.error("%s", e)
        return EXIT_INPUT
    except ValueError as e:
        log.error("%s", e)
        return EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
