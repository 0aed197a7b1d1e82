import math
import textwrap

import pytest

from awt.config import ConfigError, load_config


def _write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


BLOBS = """
    [experiment]
    dataset = blobs
    model = 2, 8, 2
    seed = 3
    eval_epsilon = 0.1
    blob_n = 64
    density = 0.5

    [search]
    epochs = 2
    batch_size = 16
    attack_epsilon = 0.1
    attack_steps = 2

    [train]
    epochs = 3
    batch_size = 16
    attack_epsilon = 0.1
    attack_steps = 3
"""


class TestLoadConfig:
    def test_blobs_round_trip(self, tmp_path):
        cfg = load_config(_write(tmp_path, BLOBS))
        assert cfg.dataset == "blobs"
        assert cfg.model.layer_sizes == (2, 8, 2)
        assert cfg.seed == 3
        assert cfg.search.epochs == 2
        assert cfg.search.attack.epsilon == 0.1
        assert cfg.search.attack.steps == 2
        assert cfg.train.epochs == 3
        assert cfg.train.attack is not None
        assert cfg.train.attack.steps == 3
        assert cfg.density == 0.5
        assert len(cfg.config_hash) == 12

    def test_hash_depends_on_bytes(self, tmp_path):
        a = load_config(_write(tmp_path, BLOBS, "a.ini"))
        b = load_config(_write(tmp_path, BLOBS + "\n# comment\n", "b.ini"))
        assert a.config_hash != b.config_hash

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "nope.ini")

    def test_unparseable(self, tmp_path):
        with pytest.raises(ConfigError, match="parse"):
            load_config(_write(tmp_path, "not an ini file ]["))

    def test_unknown_dataset(self, tmp_path):
        with pytest.raises(ConfigError, match="dataset"):
            load_config(_write(tmp_path, """
                [experiment]
                dataset = cifar
                model = 2, 1
            """))

    def test_missing_model(self, tmp_path):
        with pytest.raises(ConfigError, match="model"):
            load_config(_write(tmp_path, """
                [experiment]
                dataset = blobs
            """))

    def test_zero_density(self, tmp_path):
        with pytest.raises(ConfigError, match=r"density must be in \(0,1\]"):
            load_config(_write(tmp_path, BLOBS.replace("density = 0.5",
                                                       "density = 0")))

    def test_mnist_requires_existing_paths(self, tmp_path):
        with pytest.raises(ConfigError, match="mnist_images"):
            load_config(_write(tmp_path, """
                [experiment]
                dataset = mnist_subset
                model = 784, 10
                mnist_images = /does/not/exist
                mnist_labels = /does/not/exist/either
            """))

    def test_mnist_requires_paths_at_all(self, tmp_path):
        with pytest.raises(ConfigError, match="mnist"):
            load_config(_write(tmp_path, """
                [experiment]
                dataset = mnist_subset
                model = 784, 10
            """))

    def test_bad_norm(self, tmp_path):
        with pytest.raises(ConfigError, match="norm"):
            load_config(_write(tmp_path, """
                [experiment]
                dataset = blobs
                model = 2, 1
                eval_norm = l7
            """))

    def test_natural_training_when_eps_zero(self, tmp_path):
        cfg = load_config(_write(tmp_path, """
            [experiment]
            dataset = blobs
            model = 2, 8, 2

            [train]
            attack_epsilon = 0
        """))
        assert cfg.train.attack is None

    def test_eval_norm_l2(self, tmp_path):
        cfg = load_config(_write(tmp_path, """
            [experiment]
            dataset = blobs
            model = 2, 8, 2
            eval_norm = l2
        """))
        assert cfg.eval_norm == 2.0
        assert cfg.eval_epsilon == 0.3  # default
