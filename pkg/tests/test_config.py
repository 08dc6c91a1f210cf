import pytest

from ventpress.config import ConfigError, build, load_file, parse_text
from ventpress.lung_sim import SimConfig
from ventpress.pid import PidGains
from ventpress.train_eval import ModelConfig, TrainConfig


def test_defaults():
    cfg = build({})
    assert cfg["sim"] == SimConfig() and cfg["train"] == TrainConfig()
    assert cfg["model"] == ModelConfig() and cfg["pid"] == PidGains()


def test_parse_and_coerce():
    text = """
    # desk-scale run
    sim.noise_sd = 0.1
    train.epochs = 50   # shorter
    train.optimizer = sgd
    model.hidden_size = 8
    pid.kp = 2
    """
    cfg = build(parse_text(text))
    assert cfg["sim"].noise_sd == 0.1
    assert cfg["train"].epochs == 50 and cfg["train"].optimizer == "sgd"
    assert cfg["model"].hidden_size == 8
    assert cfg["pid"].kp == 2.0 and isinstance(cfg["pid"].kp, float)


@pytest.mark.parametrize("key", ["sim.nope", "optim.lr", "train", "model."])
def test_unknown_keys_rejected(key):
    with pytest.raises(ConfigError, match="unknown config key"):
        build({key: "1"})


def test_bad_values():
    with pytest.raises(ConfigError, match="train.epochs"):
        build({"train.epochs": "many"})
    with pytest.raises(ConfigError, match="train"):
        build({"train.epochs": "0"})
    with pytest.raises(ConfigError, match=":2:"):
        parse_text("sim.seed = 1\nnonsense\n")


def test_load_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("sim.seed = 9\n")
    assert load_file(path) == {"sim.seed": "9"}
    with pytest.raises(ConfigError, match="cannot read"):
        load_file(tmp_path / "absent.cfg")
