"""
局域化站点的位置律：Z1/r_t 的各坐标独立且服从 Laplace(1)
"""

import logging
from typing import Dict, List

import numpy as np

from api.localisation import top_two
from config import ExperimentConfig
from service.fields import field_at, realization_field, row_head
from service.gates import GateResult, at_most, skipped, within
from utils.errors import ConvergenceError, RegimeError
from utils.stats import bootstrap_ci, ks_distance, laplace_cdf

logger = logging.getLogger(__name__)

NAME = "distance_law"


def realization(cfg: ExperimentConfig, index: int) -> List[Dict]:
    t = cfg.t_max
    scales = cfg.scales(t)
    field = field_at(realization_field(cfg, index, [t]), cfg, t)
    row = {**row_head(cfg, index), "t": t, "r_t": scales.r_t}
    try:
        top = top_two(scales.rho, 0.0, t, field, scales)
    except (RegimeError, ConvergenceError) as e:
        logger.warning(f"⚠️ realization {index} 被标记: {e}")
        return [{**row, "flagged": True}]
    for axis, coordinate in enumerate(top.Z1):
        row[f"x_{axis + 1}"] = coordinate / scales.r_t
    row["flagged"] = False
    return [row]


def aggregate(cfg: ExperimentConfig, rows: List[Dict]) -> Dict:
    used = [r for r in rows if not r.get("flagged")]
    result = {"experiment": NAME, "t": cfg.t_max, "used": len(used)}
    if not used:
        return result
    columns = np.array([[r[f"x_{a + 1}"] for a in range(cfg.d)] for r in used], dtype=np.float64)
    for a in range(cfg.d):
        column = columns[:, a]
        moment = np.abs(column)
        ci = bootstrap_ci(moment, seed=cfg.base_seed)
        result[f"abs_moment_{a + 1}"] = float(moment.mean())
        result[f"abs_moment_ci_low_{a + 1}"] = ci.low
        result[f"abs_moment_ci_high_{a + 1}"] = ci.high
        result[f"ks_laplace_{a + 1}"] = ks_distance(column, laplace_cdf)
    if cfg.d >= 2 and len(used) > 2:
        correlation = np.corrcoef(columns, rowvar=False)
        off = correlation[np.triu_indices(cfg.d, 1)]
        result["max_abs_correlation"] = float(np.max(np.abs(off)))
    return result


def gates(cfg: ExperimentConfig, agg: Dict) -> List[GateResult]:
    if not agg.get("used"):
        return [skipped("abs_moment", "无有效样本")]
    low, high = cfg.gate("abs_moment_range", [0.85, 1.15])
    ks_limit = float(cfg.gate("ks_max", 0.08))
    results = []
    for a in range(cfg.d):
        results.append(within(f"abs_moment_{a + 1}", agg[f"abs_moment_{a + 1}"], float(low), float(high)))
        results.append(at_most(f"ks_laplace_{a + 1}", agg[f"ks_laplace_{a + 1}"], ks_limit))
    if "max_abs_correlation" in agg:
        results.append(at_most("max_abs_correlation", agg["max_abs_correlation"],
                               float(cfg.gate("max_correlation", 0.1))))
    return results
