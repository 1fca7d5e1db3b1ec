import struct

import numpy as np
import pytest

from crforest import persistence
from crforest.forest import Forest, TrainingParameters, train
from crforest.simulation import generate


@pytest.fixture(scope="module")
def forest():
    ds = generate(120, 3).dataset
    return train(ds, TrainingParameters(ntree=2, mtry=2, node_size=5, random_seed=1, cores=1))


def test_tree_bytes_roundtrip(forest):
    for tree in forest.trees:
        buf = persistence.tree_to_bytes(tree)
        assert buf[0] == persistence.FORMAT_VERSION
        back = persistence.tree_from_bytes(buf)
        assert persistence.tree_to_bytes(back) == buf
        np.testing.assert_array_equal(back.in_bag, tree.in_bag)
        assert len(back.leaves) == len(tree.leaves)


def test_categorical_levels_survive(forest):
    tree = persistence.tree_from_bytes(persistence.tree_to_bytes(forest.trees[0]))
    tree.levels[0] = np.array([1.0, 3.0])
    back = persistence.tree_from_bytes(persistence.tree_to_bytes(tree))
    np.testing.assert_array_equal(back.levels[0], [1.0, 3.0])


def test_bad_version_and_truncation(forest):
    buf = persistence.tree_to_bytes(forest.trees[0])
    with pytest.raises(persistence.FormatError):
        persistence.tree_from_bytes(bytes([99]) + buf[1:])
    with pytest.raises(persistence.FormatError):
        persistence.tree_from_bytes(buf[:-3])
    with pytest.raises(persistence.FormatError):
        persistence.tree_from_bytes(buf + b"\0")


def test_meta_layout(tmp_path):
    persistence.write_meta(tmp_path, {"b": 1, "a": [1, 2]})
    raw = (tmp_path / persistence.META_NAME).read_bytes()
    version, length = struct.unpack_from("<BI", raw)
    assert version == persistence.FORMAT_VERSION and length == len(raw) - 5
    assert raw[5:] == b'{"a":[1,2],"b":1}'
    assert persistence.read_meta(tmp_path) == {"a": [1, 2], "b": 1}


def test_load_reports_missing_trees(forest, tmp_path):
    forest.save(tmp_path)
    persistence.tree_path(tmp_path, 1).unlink()
    with pytest.raises(persistence.FormatError, match="missing"):
        Forest.load(tmp_path)


def test_meta_excludes_runtime_knobs(forest):
    meta = forest.meta()
    assert "cores" not in meta["parameters"] and "save_path" not in meta["parameters"]
