import pytest

from goeval.cli import main
from goeval.features import FeatureConfig, format_feature_config


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Small 19x19 strength corpus: 12 players x 10 games."""
    root = tmp_path_factory.mktemp("corpus")
    assert main(["synth", "--profile", "planted", "--players", "12",
                 "--games-per-player", "10", "--seed", "5", "--min-moves", "25",
                 "--max-moves", "35", "--out-dir", str(root)]) == 0
    return root


@pytest.fixture(scope="session")
def tiny_config(tmp_path_factory):
    root = tmp_path_factory.mktemp("cfg")
    cfg = FeatureConfig(name="tiny", vocab_size=60, omega=10, pattern_sizes=(2, 3))
    path = root / "tiny.cfg"
    path.write_text(format_feature_config(cfg))
    return path


@pytest.fixture(scope="session")
def vocab_file(corpus, tiny_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("vocab") / "vocab.tsv"
    code = main(["build-vocab", "--manifest", str(corpus / "manifest.tsv"),
                 "--config", str(tiny_config), "--out", str(out)])
    assert code == 0
    return out


@pytest.fixture(scope="session")
def matrix_file(corpus, tiny_config, vocab_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("matrix") / "eval.tsv"
    code = main(["extract", "--manifest", str(corpus / "manifest.tsv"),
                 "--vocab", str(vocab_file), "--config", str(tiny_config),
                 "--mode", "strength", "--seed", "3", "--out", str(out),
                 "--counts-out", str(out.parent / "counts.tsv")])
    assert code == 0
    return out
