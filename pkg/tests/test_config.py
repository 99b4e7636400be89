import json

import pytest

from itoedit.config import ConfigError, RunConfig, dump_config, load_config


def test_defaults_prefilled(tmp_path):
    d = RunConfig().to_dict()
    assert set(d) == {"schedule", "scene", "edit", "mask", "output"}
    assert d["schedule"] == {"T": 25, "kind": "cosine"}
    assert d["edit"]["lambda"] == 0.6 and d["edit"]["t_u"] == 15 and d["edit"]["gamma"] == 0.1
    assert d["mask"]["tau"] == 0.1 and d["mask"]["n_seeds"] == 10


def test_roundtrip(tmp_path):
    cfg = RunConfig().with_edit(lam=0.2, seeds=(5, 6))
    p = dump_config(cfg, tmp_path / "c.json")
    assert load_config(p) == cfg


def test_partial_document(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"mask": {"n_seeds": 3}, "scene": {"sigma": 0.1}}))
    cfg = load_config(p)
    assert cfg.edit.seeds == (0, 1, 2) and cfg.scene.sigma == 0.1 and cfg.edit.lam == 0.6


def test_missing_file_names_path(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        load_config(tmp_path / "nope.json")


@pytest.mark.parametrize("doc", [
    {"extra": {}},
    {"edit": {"lambda": 2.0}},
    {"schedule": {"T": 1}},
    {"mask": {"radius": 2}},
    {"output": {"image_range": [1, 0]}},
    [1, 2],
])
def test_invalid_documents(tmp_path, doc):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        load_config(p)


def test_malformed_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="c.json"):
        load_config(p)


def test_none_gives_defaults():
    assert load_config(None) == RunConfig()
