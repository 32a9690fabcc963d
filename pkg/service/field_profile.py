"""
局域化站点周围的势场剖面：ξ(z)/a_t^{q(|z−Z1|)}，z ∈ B(Z1,ρ)
"""

import logging
from typing import Dict, List

import numpy as np

from api.localisation import top_two
from config import ExperimentConfig
from service.fields import field_at, realization_field, row_head
from service.gates import GateResult, skipped, within
from utils.errors import ConvergenceError, RegimeError
from utils.lattice import ball_indices, distances_from
from utils.scales import q_exponent
from utils.stats import quartiles

logger = logging.getLogger(__name__)

NAME = "field_profile"


def realization(cfg: ExperimentConfig, index: int) -> List[Dict]:
    t = cfg.t_max
    scales = cfg.scales(t)
    field = field_at(realization_field(cfg, index, [t]), cfg, t)
    row = {**row_head(cfg, index), "t": t, "rho": scales.rho}
    try:
        top = top_two(scales.rho, 0.0, t, field, scales)
    except (RegimeError, ConvergenceError) as e:
        logger.warning(f"⚠️ realization {index} 被标记: {e}")
        return [{**row, "flagged": True}]

    g = field.geometry
    dist = distances_from(top.Z1, g)
    members = ball_indices(top.Z1, scales.rho, g)
    for r in range(scales.rho + 1):
        shell = members[dist[members] == r]
        ratios = field.values[shell] / scales.a_t ** q_exponent(r, cfg.gamma)
        row[f"ratio_d{r}"] = float(np.median(ratios))
    row["flagged"] = False
    return [row]


def aggregate(cfg: ExperimentConfig, rows: List[Dict]) -> Dict:
    used = [r for r in rows if not r.get("flagged")]
    rho = cfg.scales(cfg.t_max).rho
    result = {"experiment": NAME, "t": cfg.t_max, "rho": rho, "used": len(used)}
    if not used:
        return result
    for r in range(rho + 1):
        summary = quartiles([row[f"ratio_d{r}"] for row in used])
        result[f"median_ratio_d{r}"] = summary["median"]
        result[f"iqr_ratio_d{r}"] = summary["q3"] - summary["q1"]
    return result


def gates(cfg: ExperimentConfig, agg: Dict) -> List[GateResult]:
    if not agg.get("used"):
        return [skipped("median_ratio_d0", "无有效样本")]
    tolerance = cfg.gate("ratio_tolerance", [0.1, 0.2])
    results = [within("median_ratio_d0", agg["median_ratio_d0"], 1 - tolerance[0], 1 + tolerance[0])]
    if agg["rho"] >= 1:
        results.append(within("median_ratio_d1", agg["median_ratio_d1"], 1 - tolerance[1], 1 + tolerance[1]))
    else:
        results.append(skipped("median_ratio_d1", "ρ=0：B(Z1,0) 只含 Z1"))
    return results
