"""
实验共用：按 (base_seed, realization) 采样势场，并按时刻取子窗口
"""

import logging
from typing import Iterable

import config
from config import ExperimentConfig
from utils.errors import ConfigError
from utils.lattice import TorusGeometry
from utils.potential import PotentialField, sample_field, window

logger = logging.getLogger(__name__)


def box_side(cfg: ExperimentConfig, t: float) -> int:
    side = cfg.side if cfg.side is not None else cfg.scales(t).side
    if side ** cfg.d > config.MAX_SITES:
        raise ConfigError(f"t={t:g} 时环面站点数 {side}^{cfg.d} 超过上限 {config.MAX_SITES}，请在配置中给出 side")
    return side


def realization_field(cfg: ExperimentConfig, index: int, times: Iterable[float]) -> PotentialField:
    """覆盖全部给定时刻的最大环面上的势场；坐标键控保证各时刻子窗口取值一致"""
    side = max(box_side(cfg, t) for t in times)
    return sample_field(TorusGeometry(cfg.d, side), cfg.gamma, cfg.realization_seed(index))


def field_at(field: PotentialField, cfg: ExperimentConfig, t: float) -> PotentialField:
    side = box_side(cfg, t)
    if side == field.geometry.side:
        return field
    return window(field, side)


def row_head(cfg: ExperimentConfig, index: int) -> dict:
    return {"base_seed": cfg.base_seed, "realization": index}
