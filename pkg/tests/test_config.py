import pytest

from gnssweight.config import DEFAULTS, load_config
from gnssweight.errors import ConfigInvalid


def test_defaults_load_and_validate():
    cfg = load_config()
    assert cfg == DEFAULTS
    assert cfg is not DEFAULTS  # caller gets a private copy


def test_file_and_override_merge(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("seed: 7\nsimulate:\n  epochs_per_session: 50\n", encoding="utf-8")
    cfg = load_config(path, {"train": {"hidden": 8}})
    assert cfg["seed"] == 7
    assert cfg["simulate"]["epochs_per_session"] == 50
    assert cfg["train"]["hidden"] == 8
    # untouched keys keep their defaults
    assert cfg["simulate"]["rate_hz"] == DEFAULTS["simulate"]["rate_hz"]


def test_unknown_key_is_named(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("simulate:\n  epocs_per_session: 50\n", encoding="utf-8")
    with pytest.raises(ConfigInvalid, match="simulate.epocs_per_session"):
        load_config(path)


def test_value_validation():
    with pytest.raises(ConfigInvalid, match="rate_hz"):
        load_config(None, {"simulate": {"rate_hz": 0.0}})
    with pytest.raises(ConfigInvalid, match="feature_mode"):
        load_config(None, {"train": {"feature_mode": "everything"}})
    with pytest.raises(ConfigInvalid, match="strategies"):
        load_config(None, {"evaluate": {"strategies": ["magic"]}})
    with pytest.raises(ConfigInvalid, match="version"):
        load_config(None, {"version": 2})


def test_non_mapping_rejected(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("- just\n- a\n- list\n", encoding="utf-8")
    with pytest.raises(ConfigInvalid):
        load_config(path)
    path.write_text("simulate: 12\n", encoding="utf-8")
    with pytest.raises(ConfigInvalid, match="mapping"):
        load_config(path)
