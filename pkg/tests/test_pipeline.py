import pytest

from riskrank import cli
from riskrank.errors import ConfigError
from riskrank.pipeline import echo_config, load_config

MINIMAL = """\
[data]
left_records = records_left.csv
right_records = records_right.csv
pairs = pairs.csv

[schema]
title = text
year = number

[split]
ratio = 3:2:5
seed = 4
"""


@pytest.fixture
def config_dir(tmp_path):
    (tmp_path / "records_left.csv").write_text("id,title,year\na,x,1\n")
    (tmp_path / "records_right.csv").write_text("id,title,year\nb,x,1\n")
    (tmp_path / "pairs.csv").write_text(
        "left_id,right_id,classifier_prob,ground_truth\na,b,0.9,1\n")
    (tmp_path / "config.ini").write_text(MINIMAL)
    return tmp_path


class TestConfig:
    def test_defaults_materialized(self, config_dir):
        cfg = load_config(config_dir / "config.ini")
        assert cfg.forest.lam == 0.2
        assert cfg.forest.tau == 0.1
        assert cfg.forest.max_depth == 4
        assert cfg.forest.min_leaf == 5
        assert cfg.forest.match_class_weight == 1000.0
        assert cfg.train.learning_rate == 0.001
        assert cfg.train.epochs == 1000
        assert cfg.theta == 0.9
        assert cfg.bins == 10
        # default descriptor set derived from the two-attribute schema
        assert len(cfg.descriptors) == 5

    def test_explicit_metric_list(self, config_dir):
        text = MINIMAL + "\n[metrics]\nonly_one = token_jaccard title\n"
        (config_dir / "config.ini").write_text(text)
        cfg = load_config(config_dir / "config.ini")
        assert [d.name for d in cfg.descriptors] == ["only_one"]
        assert cfg.descriptors[0].metric == "token_jaccard"

    def test_metric_params_parsed(self, config_dir):
        text = MINIMAL + ("\n[metrics]\nkeys = diff_key_token title "
                          "key_threshold=1.5\n")
        (config_dir / "config.ini").write_text(text)
        cfg = load_config(config_dir / "config.ini")
        assert cfg.descriptors[0].params == {"key_threshold": "1.5"}

    def test_bad_metric_rejected(self, config_dir):
        text = MINIMAL + "\n[metrics]\nx = soundex title\n"
        (config_dir / "config.ini").write_text(text)
        with pytest.raises(ConfigError):
            load_config(config_dir / "config.ini")

    def test_metric_family_mismatch_rejected(self, config_dir):
        text = MINIMAL + "\n[metrics]\nx = entity_jaccard title\n"
        (config_dir / "config.ini").write_text(text)
        with pytest.raises(ConfigError):
            load_config(config_dir / "config.ini")

    def test_missing_schema_rejected(self, config_dir):
        (config_dir / "config.ini").write_text(
            "[data]\nleft_records = records_left.csv\npairs = pairs.csv\n")
        with pytest.raises(ConfigError):
            load_config(config_dir / "config.ini")

    def test_bad_ratio_rejected(self, config_dir):
        (config_dir / "config.ini").write_text(
            MINIMAL.replace("3:2:5", "3:2"))
        with pytest.raises(ConfigError):
            load_config(config_dir / "config.ini")

    def test_unknown_section_rejected(self, config_dir):
        (config_dir / "config.ini").write_text(MINIMAL + "\n[mystery]\nx = 1\n")
        with pytest.raises(ConfigError):
            load_config(config_dir / "config.ini")

    def test_seed_and_out_overrides(self, config_dir):
        cfg = load_config(config_dir / "config.ini", seed_override=99,
                          out_override=config_dir / "elsewhere")
        assert cfg.split_seed == 99
        assert cfg.train.seed == 99
        assert cfg.out_dir == config_dir / "elsewhere"

    def test_echo_round_trips(self, config_dir, tmp_path):
        cfg = load_config(config_dir / "config.ini")
        echoed = config_dir / "echo.ini"
        echo_config(cfg, echoed)
        again = load_config(echoed)
        assert again.forest == cfg.forest
        assert again.train == cfg.train
        assert [d.name for d in again.descriptors] == \
            [d.name for d in cfg.descriptors]
        assert again.ratio == cfg.ratio


class TestCliSeedOverride:
    def test_seed_changes_split(self, config_dir, tmp_path):
        root = tmp_path / "c1"
        assert cli.main(["synth", "--out", str(root), "--pairs", "300",
                         "--seed", "2"]) == 0
        cfg = str(root / "config.ini")
        assert cli.main(["gen-features", "--config", cfg]) == 0
        base = (root / "out" / "rules.txt").read_bytes()
        assert cli.main(["gen-features", "--config", cfg, "--seed", "3",
                         "--out", str(root / "alt")]) == 0
        assert (root / "alt" / "rules.txt").read_bytes() != base
