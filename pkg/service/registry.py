import logging
from types import ModuleType
from typing import List, Optional

from service import (
    ageing_experiment,
    distance_law,
    eigen_correspondence,
    extremal_tail,
    field_profile,
    level_set_size,
    localisation_experiment,
    point_process,
    separation_experiment,
)

logger = logging.getLogger(__name__)


class ExperimentRegistry:
    """固定的实验注册表；每个实验模块提供 realization / aggregate / gates"""

    LOCALISATION = localisation_experiment
    DISTANCE_LAW = distance_law
    FIELD_PROFILE = field_profile
    AGEING = ageing_experiment
    EXTREMAL_TAIL = extremal_tail
    POINT_PROCESS = point_process
    EIGEN_CORRESPONDENCE = eigen_correspondence
    SEPARATION = separation_experiment
    LEVEL_SET_SIZE = level_set_size

    @classmethod
    def get(cls, name: str) -> Optional[ModuleType]:
        """根据名称获取实验模块"""
        module = getattr(cls, name.upper(), None) if name else None
        if not isinstance(module, ModuleType):
            logger.warning(f"未找到实验 '{name}'，可用实验: {cls.list_experiments()}")
            return None
        return module

    @classmethod
    def list_experiments(cls) -> List[str]:
        """列出所有实验名称"""
        return sorted(
            value.NAME for attr, value in vars(cls).items()
            if attr.isupper() and isinstance(value, ModuleType)
        )
