"""
λ̃^{(n)}(0) 的极值尾：t^d P(λ̃^{(n)}(0) > A^{(n)}_t + x d_t) → e^{−x}

n=0 时 A^{(0)}_t = a_t，整条曲线有闭式；n ≥ 1 时 A^{(n)}_t 取 λ̃^{(n)}(0) 的经验 (1 − t^{−d}) 分位数。
"""

import logging
import math
from typing import Dict, List

import numpy as np
from scipy import stats

from api.spectra import local_principal_eigenvalues
from config import ExperimentConfig
from service.fields import row_head
from service.gates import GateResult, at_least, at_most, skipped
from utils.errors import ParameterError, SampleSizeError
from utils.lattice import TorusGeometry, all_coords, indices_of
from utils.potential import sample_field
from utils.scales import ScaleSet
from utils.stats import ks_distance

logger = logging.getLogger(__name__)

NAME = "extremal_tail"

X_GRID = (-1.0, 0.0, 1.0, 2.0, 3.0)
MIN_EXCEEDANCES = 10


def weibull_tail_rescaled(scales: ScaleSet, x: float) -> float:
    """n=0：t^d·P(ξ > a_t + x d_t) = t^d·exp(−(a_t + x d_t)^γ)"""
    level = scales.a_t + x * scales.d_t
    if level <= 0:
        return float(scales.t ** scales.d)
    return math.exp(scales.d * math.log(scales.t) - level ** scales.gamma)


def finite_t_factor(scales: ScaleSet, x: float) -> float:
    """t^d·P(ξ > a_t + x d_t) 与极限 e^{−x} 之比"""
    return weibull_tail_rescaled(scales, x) / math.exp(-x)


def finite_t_factor_closed_form(scales: ScaleSet, x: float) -> float:
    """γ=2 时因子为 e^{−x² d_t²}"""
    if scales.gamma != 2:
        raise ParameterError(f"闭式因子仅对 γ=2 成立: gamma={scales.gamma}")
    return math.exp(-(x * scales.d_t) ** 2)


def _sample_origin_values(cfg: ExperimentConfig, index: int, n: int, scales: ScaleSet) -> np.ndarray:
    """互不相交的 n-球中心处的 λ̃^{(n)}，同一 realization 内相互独立"""
    per_axis = max(1, round(int(cfg.param("samples_per_realization", 1000)) ** (1.0 / cfg.d)))
    spacing = 2 * n + 1
    side = per_axis * spacing
    side += 1 - side % 2
    g = TorusGeometry(cfg.d, max(side, 3))
    field = sample_field(g, cfg.gamma, cfg.realization_seed(index))
    offsets = np.stack(np.meshgrid(*[np.arange(per_axis) * spacing] * cfg.d, indexing="ij"), -1).reshape(-1, cfg.d)
    centres = indices_of(offsets - g.half, g)
    return local_principal_eigenvalues(field, n, scales.L_t, centres)


def realization(cfg: ExperimentConfig, index: int) -> List[Dict]:
    n = int(cfg.param("n", 0))
    t = cfg.t_max
    scales = cfg.scales(t)
    if n > scales.j:
        raise ParameterError(f"n 必须 ≤ j={scales.j}: n={n}")
    values = _sample_origin_values(cfg, index, n, scales)
    head = row_head(cfg, index)
    return [{**head, "sample": i, "n": n, "lambda": float(v)} for i, v in enumerate(values)]


def aggregate(cfg: ExperimentConfig, rows: List[Dict]) -> Dict:
    n = int(cfg.param("n", 0))
    t = cfg.t_max
    scales = cfg.scales(t)
    result = {"experiment": NAME, "n": n, "t": t, "a_t": scales.a_t, "d_t": scales.d_t}
    values = np.array([r["lambda"] for r in rows], dtype=np.float64)
    result["samples"] = int(values.size)

    if n == 0:
        for x in X_GRID:
            result[f"analytic_tail[x={x:g}]"] = weibull_tail_rescaled(scales, x)
            result[f"finite_t_factor[x={x:g}]"] = finite_t_factor(scales, x)
            if cfg.gamma == 2:
                result[f"finite_t_factor_closed_form[x={x:g}]"] = finite_t_factor_closed_form(scales, x)
        level = scales.a_t
    else:
        tail_probability = t ** (-cfg.d)
        expected = values.size * tail_probability
        if expected < MIN_EXCEEDANCES:
            raise SampleSizeError(
                f"样本量 {values.size} 不足以估计 (1 − t^-d) 分位数：期望超越数 {expected:.2f} < {MIN_EXCEEDANCES}")
        level = float(np.quantile(values, 1.0 - tail_probability))
        result["A_calibrated"] = level
        result["A_calibration"] = "empirical-quantile"

    exceed = (values[values > level] - level) / scales.d_t
    result["exceedances"] = int(exceed.size)
    for x in X_GRID:
        result[f"empirical_tail[x={x:g}]"] = float(
            np.mean(values > level + x * scales.d_t) * t ** cfg.d) if values.size else None
    result["ks_exp1"] = ks_distance(exceed, stats.expon.cdf) if exceed.size else None
    return result


def gates(cfg: ExperimentConfig, agg: Dict) -> List[GateResult]:
    if agg["n"] == 0:
        results = [at_most("analytic_tail_at_0", abs(agg["analytic_tail[x=0]"] - 1.0), 1e-12)]
        if cfg.gamma == 2:
            gap = abs(agg["finite_t_factor[x=1]"] - agg["finite_t_factor_closed_form[x=1]"])
            results.append(at_most("finite_t_factor_at_1", gap, 1e-12))
        else:
            results.append(skipped("finite_t_factor_at_1", "闭式因子仅对 γ=2"))
        return results
    if agg["ks_exp1"] is None:
        return [skipped("ks_exp1", "无超越样本")]
    return [
        at_most("ks_exp1", agg["ks_exp1"], float(cfg.gate("ks_max", 0.1))),
        at_least("exceedances", agg["exceedances"], MIN_EXCEEDANCES),
    ]
