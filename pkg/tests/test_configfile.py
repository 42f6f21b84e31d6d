"""key=value config files: parsing, round trips, and scripted-policy
constant overrides."""

import pytest

from hideseek import heuristics
from hideseek.configfile import (
    HEURISTIC_KEYS,
    ConfigFileError,
    dump_config,
    load_config,
    parse_config_text,
    save_config,
)
from hideseek.world import ShapeKind, WorldConfig


@pytest.fixture(autouse=True)
def restore_heuristic_constants():
    saved = {attr: getattr(heuristics, attr) for attr, _ in HEURISTIC_KEYS.values()}
    yield
    for attr, value in saved.items():
        setattr(heuristics, attr, value)


class TestParsing:
    def test_comments_and_blanks_skipped(self):
        text = "# header\n\narena_side = 40  # trailing\n\n# tail\n"
        assert parse_config_text(text) == {"arena_side": "40"}

    def test_keys_lowercased(self):
        assert parse_config_text("Arena_Side=40") == {"arena_side": "40"}

    def test_duplicate_key_reports_line(self):
        with pytest.raises(ConfigFileError, match="line 3.*duplicate"):
            parse_config_text("a = 1\nb = 2\na = 3")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigFileError, match="line 1"):
            parse_config_text("just words")

    def test_value_may_contain_equals(self):
        assert parse_config_text("a = b=c") == {"a": "b=c"}


class TestLoadConfig:
    def test_round_trip(self, tmp_path):
        cfg = WorldConfig(
            arena_side=40.0,
            n_obstacles=3,
            obstacle_types=(ShapeKind.CYLINDER, ShapeKind.CROSS),
            n_seekers=2,
            n_hiders=2,
            max_time=30.0,
            seed=9,
        )
        path = tmp_path / "run.cfg"
        save_config(cfg, path)
        loaded, _ = load_config(path)
        assert loaded.to_dict() == cfg.to_dict()

    def test_defaults_when_file_sparse(self, tmp_path):
        path = tmp_path / "sparse.cfg"
        path.write_text("n_seekers = 3\n")
        loaded, constants = load_config(path)
        assert loaded.n_seekers == 3
        assert loaded.arena_side == 50.0
        assert constants == {}

    def test_unknown_key_listed(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("arena_sid = 50\nwibble = 1\n")
        with pytest.raises(ConfigFileError, match="arena_sid, wibble"):
            load_config(path)

    def test_bad_value_reported_with_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("n_seekers = two\n")
        with pytest.raises(ConfigFileError, match="n_seekers"):
            load_config(path)

    def test_bad_shape_name_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("obstacle_types = Blob\n")
        with pytest.raises(ConfigFileError, match="obstacle_types"):
            load_config(path)

    def test_world_validation_still_applies(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("n_seekers = 0\n")
        with pytest.raises(ConfigFileError, match="1..4"):
            load_config(path)


class TestHeuristicConstants:
    def test_constants_applied_and_returned(self, tmp_path):
        path = tmp_path / "tuned.cfg"
        path.write_text("lam_wall = 3.5\nn_escape_directions = 16\n")
        _, constants = load_config(path)
        assert constants == {"lam_wall": 3.5, "n_escape_directions": 16}
        assert heuristics.LAM_WALL == 3.5
        assert heuristics.N_ESCAPE_DIRECTIONS == 16

    def test_dump_includes_current_constants(self):
        heuristics.INTERCEPT_CAP = 7.25
        text = dump_config(WorldConfig())
        assert "intercept_cap = 7.25" in text

    def test_dump_can_omit_constants(self):
        text = dump_config(WorldConfig(), include_heuristics=False)
        assert "lam_wall" not in text
