import json
import os
import pickle

import pytest

import config
from config import ExperimentConfig, load_config, parse_config
from utils.errors import ConfigError

BASE = {
    "schema": 1,
    "experiment": "separation",
    "gamma": 2.0,
    "d": 1,
    "t_grid": [100, 1000],
    "side": 101,
    "realizations": 4,
    "base_seed": 20240601,
}


def _with(**changes):
    data = dict(BASE)
    data.update(changes)
    return data


def test_parse_minimal():
    cfg = parse_config(BASE)
    assert cfg.t_grid == (100.0, 1000.0)
    assert cfg.t_max == 1000.0
    assert cfg.theta == 0.25
    assert cfg.scales(100).side == 101


@pytest.mark.parametrize("data", [
    _with(schema=2),
    _with(gamma=0),
    _with(gamma=-1.5),
    _with(realizations=0),
    _with(d=True),
    _with(d="1"),
    _with(side=100),
    _with(theta=0.5),
    _with(t_grid="100"),
    _with(base_seed=-3),
    _with(params=[1, 2]),
    {k: v for k, v in BASE.items() if k != "gamma"},
    [],
])
def test_invalid_config(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_realization_seed_depends_only_on_base_and_index():
    cfg = parse_config(BASE)
    seeds = [cfg.realization_seed(i) for i in range(50)]
    assert len(set(seeds)) == 50
    assert seeds == [cfg.with_overrides(workers=8).realization_seed(i) for i in range(50)]
    assert seeds[0] != cfg.with_overrides(base_seed=1).realization_seed(0)
    assert all(0 <= s < 2 ** 63 for s in seeds)


def test_input_hash_ignores_workers_and_output_dir():
    cfg = parse_config(BASE)
    assert cfg.input_hash() == cfg.with_overrides(workers=4, output_dir="/tmp/elsewhere").input_hash()
    assert cfg.input_hash() != cfg.with_overrides(base_seed=7).input_hash()


def test_config_echo():
    echo = parse_config(_with(field={"seed": 7}, solve={"method": "ode"})).to_dict()
    assert echo["schema"] == 1
    assert echo["field"] == {"seed": 7}
    assert echo["solve"] == {"method": "ode"}
    assert "field_opts" not in echo


def test_with_overrides_validates():
    cfg = parse_config(BASE)
    assert cfg.with_overrides(realizations=None) == cfg
    with pytest.raises(ConfigError):
        cfg.with_overrides(realizations=0)


def test_picklable():
    cfg = parse_config(_with(params={"levels": [0.25]}))
    assert pickle.loads(pickle.dumps(cfg)) == cfg


def test_load_config_applies_seed_env(tmp_path, monkeypatch):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(BASE), encoding="utf-8")
    monkeypatch.delenv("PAM_SEED", raising=False)
    assert load_config(str(path)).base_seed == 20240601
    monkeypatch.setenv("PAM_SEED", "99")
    assert load_config(str(path)).base_seed == 99
    monkeypatch.setenv("PAM_SEED", "abc")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_load_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(broken))


def test_output_path_default(monkeypatch, tmp_path):
    monkeypatch.setattr(config, "OUTPUT_DIR", str(tmp_path))
    cfg = parse_config(BASE)
    assert cfg.output_path("a.csv") == str(tmp_path / "separation" / "a.csv")
    assert cfg.with_overrides(output_dir="x").output_path("a.csv") == "x/a.csv"


def test_empty_grid_has_no_max():
    cfg = ExperimentConfig(experiment=None, gamma=2.0, d=1)
    with pytest.raises(ConfigError):
        cfg.t_max


def test_shipped_configs_parse(monkeypatch):
    from service.registry import ExperimentRegistry

    monkeypatch.delenv("PAM_SEED", raising=False)
    root = os.path.join(config.BASE_DIR, "configs")
    names = sorted(f for f in os.listdir(root) if f.endswith(".json"))
    assert names
    for name in names:
        cfg = load_config(os.path.join(root, name))
        if cfg.experiment is not None:
            assert ExperimentRegistry.get(cfg.experiment) is not None


def test_shipped_monte_carlo_sizes(monkeypatch):
    monkeypatch.delenv("PAM_SEED", raising=False)
    root = os.path.join(config.BASE_DIR, "configs")
    for name in ("ageing.json", "localisation.json"):
        assert load_config(os.path.join(root, name)).realizations >= 500
    eigen = load_config(os.path.join(root, "eigen_correspondence.json"))
    assert (eigen.d, eigen.side) == (1, 201)
