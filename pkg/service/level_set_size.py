"""
超越集规模：|Π^{(L_{t,a})}| / |V_t|^a，期望恰为 1
"""

import logging
from typing import Dict, List

import numpy as np

from config import ExperimentConfig
from service.fields import field_at, realization_field, row_head
from service.gates import GateResult, within
from utils.potential import level_set
from utils.stats import bootstrap_ci

logger = logging.getLogger(__name__)

NAME = "level_set_size"


def _levels(cfg: ExperimentConfig) -> List[float]:
    return [float(a) for a in cfg.param("levels", [cfg.theta])]


def realization(cfg: ExperimentConfig, index: int) -> List[Dict]:
    field = realization_field(cfg, index, cfg.t_grid)
    rows = []
    for t in cfg.t_grid:
        scales = cfg.scales(t)
        window = field_at(field, cfg, t)
        for a in _levels(cfg):
            size = len(level_set(window, scales.level(a)))
            rows.append({
                **row_head(cfg, index),
                "t": t,
                "a": a,
                "pi_size": size,
                "ratio": size / scales.V_size ** a,
            })
    return rows


def aggregate(cfg: ExperimentConfig, rows: List[Dict]) -> Dict:
    result = {"experiment": NAME}
    for t in cfg.t_grid:
        for a in _levels(cfg):
            ratios = [r["ratio"] for r in rows if r["t"] == t and r["a"] == a]
            if not ratios:
                continue
            tag = f"[t={t:g},a={a:g}]"
            ci = bootstrap_ci(ratios, seed=cfg.base_seed)
            result[f"mean_ratio{tag}"] = float(np.mean(ratios))
            result[f"mean_ratio_ci_low{tag}"] = ci.low
            result[f"mean_ratio_ci_high{tag}"] = ci.high
    return result


def gates(cfg: ExperimentConfig, agg: Dict) -> List[GateResult]:
    tolerance = float(cfg.gate("ratio_tolerance", 0.15))
    results = []
    for a in _levels(cfg):
        key = f"mean_ratio[t={cfg.t_max:g},a={a:g}]"
        results.append(within(key, agg.get(key), 1 - tolerance, 1 + tolerance))
    return results
