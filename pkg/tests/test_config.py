"""Config loading: defaults, overrides, validation, and the content hash."""

import json

import pytest

from botdetect.config import RunConfig, config_from_dict, load_config
from botdetect.errors import InputError


def write_config(path, **extra):
    doc = {"block_range": [100, 199], **extra}
    path.write_text(json.dumps(doc))
    return path


def test_defaults_fill_unspecified_fields(tmp_path):
    cfg = load_config(str(write_config(tmp_path / "run.json")))
    assert cfg.block_range == (100, 199)
    assert cfg.test_block_count == 2
    assert cfg.seed == 1
    assert cfg.preprocessing["scale"] == "minmax"
    assert cfg.cluster["k_values"] == [5, 15, 30]
    assert cfg.classify["folds"] == 20
    assert cfg.explain["background_size"] == 100
    assert cfg.mev_labels is None


def test_test_blocks_property():
    cfg = config_from_dict({"block_range": [10, 50], "test_block_count": 3})
    assert cfg.test_blocks == (48, 50)


def test_relative_paths_resolve_against_config_dir(tmp_path):
    sub = tmp_path / "nested"
    sub.mkdir()
    cfg = load_config(str(write_config(sub / "run.json", blocks="data/b.ndjson")))
    assert cfg.blocks == str(sub / "data" / "b.ndjson")
    assert cfg.out_dir == str(sub / "out")
    absolute = load_config(str(write_config(sub / "run2.json",
                                            blocks="/tmp/b.ndjson")))
    assert absolute.blocks == "/tmp/b.ndjson"


def test_unknown_keys_rejected_with_dotted_path(tmp_path):
    with pytest.raises(InputError, match="unknown config key 'blokcs'"):
        load_config(str(write_config(tmp_path / "a.json", blokcs="x")))
    with pytest.raises(InputError, match=r"cluster\.'kvals'"):
        load_config(str(write_config(tmp_path / "b.json",
                                     cluster={"kvals": [2]})))


def test_nested_sections_merge_not_replace(tmp_path):
    cfg = load_config(str(write_config(tmp_path / "run.json",
                                       classify={"folds": 5})))
    assert cfg.classify["folds"] == 5
    assert cfg.classify["n_trees"] == 400          # untouched default


def test_overrides_win_over_file_values(tmp_path):
    path = write_config(tmp_path / "run.json", seed=3, classify={"folds": 10})
    cfg = load_config(str(path), overrides={"seed": 9, "classify.folds": 4,
                                            "explain.top_n": 2})
    assert cfg.seed == 9
    assert cfg.classify["folds"] == 4
    assert cfg.explain["top_n"] == 2
    ignored = load_config(str(path), overrides={"seed": None})
    assert ignored.seed == 3                        # None means "not given"


@pytest.mark.parametrize("doc,message", [
    ({}, "block_range"),
    ({"block_range": [5]}, "block_range must be"),
    ({"block_range": [9, 5]}, "lo 9 > hi 5"),
    ({"block_range": [0, 1], "test_block_count": 0}, "positive integer"),
    ({"block_range": [0, 2], "test_block_count": 3}, "leaves no clustering blocks"),
    ({"block_range": [0, 9], "seed": "one"}, "seed must be"),
    ({"block_range": [0, 9], "preprocessing": {"scale": "log"}},
     "preprocessing.scale"),
    ({"block_range": [0, 9], "cluster": {"algorithms": ["dbscan"]}},
     "cluster.algorithms"),
    ({"block_range": [0, 9], "cluster": {"k_values": []}}, "k_values"),
    ({"block_range": [0, 9], "classify": {"datasets": ["ternary"]}},
     "classify.datasets"),
    ({"block_range": [0, 9], "classify": {"folds": 1}}, "folds"),
    ({"block_range": [0, 9], "explain": {"top_n": 0}}, "top_n"),
])
def test_validation_rejects_bad_documents(doc, message):
    with pytest.raises(InputError, match=message):
        config_from_dict(doc)


def test_sha256_depends_on_content_not_location(tmp_path):
    a_dir = tmp_path / "a"
    b_dir = tmp_path / "b"
    a_dir.mkdir()
    b_dir.mkdir()
    cfg_a = load_config(str(write_config(a_dir / "run.json", seed=5)))
    cfg_b = load_config(str(write_config(b_dir / "run.json", seed=5)))
    assert cfg_a.sha256 == cfg_b.sha256
    assert cfg_a.blocks != cfg_b.blocks            # paths did resolve differently
    changed = load_config(str(write_config(b_dir / "run2.json", seed=6)))
    assert changed.sha256 != cfg_b.sha256
    assert len(cfg_a.sha256) == 64


def test_sha256_reflects_overrides(tmp_path):
    path = write_config(tmp_path / "run.json")
    plain = load_config(str(path))
    overridden = load_config(str(path), overrides={"seed": 77})
    assert plain.sha256 != overridden.sha256


def test_load_config_io_errors(tmp_path):
    with pytest.raises(InputError, match="cannot read config"):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(InputError, match="not valid JSON"):
        load_config(str(bad))
    array = tmp_path / "array.json"
    array.write_text("[1,2]")
    with pytest.raises(InputError, match="root must be a JSON object"):
        load_config(str(array))


def test_out_path_joins_out_dir():
    cfg = config_from_dict({"block_range": [0, 9], "out_dir": "/x/out"})
    assert cfg.out_path("clusters.json") == "/x/out/clusters.json"


def test_config_is_frozen():
    cfg = config_from_dict({"block_range": [0, 9]})
    with pytest.raises(AttributeError):
        cfg.seed = 2
    assert isinstance(cfg, RunConfig)
