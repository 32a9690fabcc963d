import numpy as np
import pytest

from utils.lattice import TorusGeometry
from utils.potential import field_from_values, sample_field


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 长时间 Monte Carlo 用例（可用 -m \"not slow\" 跳过）")


@pytest.fixture
def line7():
    return TorusGeometry(1, 7)


@pytest.fixture
def square5():
    return TorusGeometry(2, 5)


@pytest.fixture
def weibull_field_1d():
    """γ=2, d=1, 31 个站点的固定种子势场"""
    return sample_field(TorusGeometry(1, 31), 2.0, 12345)


@pytest.fixture
def weibull_field_2d():
    return sample_field(TorusGeometry(2, 11), 2.0, 777)


@pytest.fixture
def peaked_field_1d():
    """原点处单个高峰，其余为 1"""
    g = TorusGeometry(1, 21)
    values = np.ones(g.size)
    values[g.half] = 10.0
    return field_from_values(g, values, 2.0)


@pytest.fixture
def isolate_env(monkeypatch, tmp_path):
    """把日志、输出与台账重定向到临时目录"""
    import config

    monkeypatch.delenv("PAM_SEED", raising=False)
    monkeypatch.setattr(config, "LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setattr(config, "OUTPUT_DIR", str(tmp_path / "output"))
    monkeypatch.setattr(config, "DB_PATH", str(tmp_path / "database" / "runs.db"))
    return tmp_path
