"""
高超越集 Π^{(L_t)} 的分离半径：r(Π) > 2j 的频率
"""

import logging
import math
from typing import Dict, List

import numpy as np

from config import ExperimentConfig
from service.fields import field_at, realization_field, row_head
from service.gates import GateResult, at_least, skipped
from utils.potential import level_set, separation

logger = logging.getLogger(__name__)

NAME = "separation"


def realization(cfg: ExperimentConfig, index: int) -> List[Dict]:
    field = realization_field(cfg, index, cfg.t_grid)
    rows = []
    for t in cfg.t_grid:
        scales = cfg.scales(t)
        window = field_at(field, cfg, t)
        pi = level_set(window, scales.L_t)
        radius = separation(pi, window.geometry)
        rows.append({
            **row_head(cfg, index),
            "t": t,
            "pi_size": len(pi),
            "separation": radius if math.isfinite(radius) else None,
            "separated": radius > 2 * scales.j,
        })
    return rows


def aggregate(cfg: ExperimentConfig, rows: List[Dict]) -> Dict:
    result = {"experiment": NAME}
    for t in cfg.t_grid:
        at_t = [r for r in rows if r["t"] == t]
        if not at_t:
            continue
        result[f"separated_frequency[t={t:g}]"] = float(np.mean([bool(r["separated"]) for r in at_t]))
        result[f"mean_pi_size[t={t:g}]"] = float(np.mean([r["pi_size"] for r in at_t]))
    return result


def gates(cfg: ExperimentConfig, agg: Dict) -> List[GateResult]:
    key = f"separated_frequency[t={cfg.t_max:g}]"
    if key not in agg:
        return [skipped(key, "无样本")]
    return [at_least(key, agg[key], float(cfg.gate("min_frequency", 0.9)))]
