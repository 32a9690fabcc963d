"""
点过程：Σ_z δ(z/r_t, (Ψ̃^{(n)}_{t,c}(z) − A^{(n)}_{r_t})/d_{r_t}) 在窗口 Ĥ^α_τ 上的计数，
以及前两名 (Z1/r_t, Z2/r_t, Y1, Y2) 与极限密度 p 的边缘分布比较

A^{(n)}_{r_t} 取首阶 a_{r_t}。
"""

import logging
import math
from typing import Dict, List

import numpy as np
from scipy import integrate, stats

from api.localisation import psi_values
from config import ExperimentConfig
from service.fields import field_at, realization_field, row_head
from service.gates import GateResult, at_most, holds, skipped, within
from utils.errors import ConvergenceError, ParameterError, QuadratureError, RegimeError
from utils.lattice import all_coords
from utils.stats import bootstrap_ci, ks_distance, laplace_cdf

logger = logging.getLogger(__name__)

NAME = "point_process"


def expected_window_count(tau: float, alpha: float, d: int) -> float:
    """ν(Ĥ^α_τ) = e^{−τ}(2/(1+α))^d"""
    if not alpha > -1:
        raise ParameterError(f"α 必须 > −1: alpha={alpha}")
    return math.exp(-tau) * (2.0 / (1.0 + alpha)) ** d


def top_value_cdf(y, d: int):
    """Y1 的分布函数 exp(−2^d e^{−y})"""
    with np.errstate(over="ignore"):
        return np.exp(-(2.0 ** d) * np.exp(-np.asarray(y, dtype=np.float64)))


def second_value_cdf(y, d: int):
    """Y2 的分布函数 (1+w)e^{−w}，w = 2^d e^{−y}"""
    with np.errstate(over="ignore", invalid="ignore"):
        w = (2.0 ** d) * np.exp(-np.asarray(y, dtype=np.float64))
        return np.where(np.isinf(w), 0.0, (1.0 + w) * np.exp(-w))


def density_normalisation(d: int, tol: float = 1e-3) -> float:
    """∫p：x 方向与 y1 > y2 的内层积分取闭式，对 y2 数值求积"""

    def integrand(y: float) -> float:
        with np.errstate(over="ignore"):
            return float(4.0 ** d * np.exp(-2.0 * y - 2.0 ** d * np.exp(-y)))

    value, error = integrate.quad(integrand, -np.inf, np.inf, epsabs=tol * 0.01)
    if error > tol:
        raise QuadratureError(f"密度归一化求积误差 {error:.2e} 超出容差 {tol:.1e}")
    return float(value)


def realization(cfg: ExperimentConfig, index: int) -> List[Dict]:
    t = cfg.t_max
    scales = cfg.scales(t)
    n = int(cfg.param("n", scales.rho))
    c = float(cfg.param("c", 0.0))
    tau = float(cfg.param("tau", 0.0))
    alpha = float(cfg.param("alpha", 1.0))
    if n > scales.j:
        raise ParameterError(f"n 必须 ≤ j={scales.j}: n={n}")
    centring = scales.with_t(scales.r_t)

    field = field_at(realization_field(cfg, index, [t]), cfg, t)
    row = {**row_head(cfg, index), "t": t, "n": n, "A_r_t": centring.a_t, "d_r_t": centring.d_t}
    try:
        psi = psi_values(n, c, t, field, scales)
    except (RegimeError, ConvergenceError) as e:
        logger.warning(f"⚠️ realization {index} 被标记: {e}")
        return [{**row, "flagged": True}]

    x = all_coords(field.geometry) / scales.r_t
    y = (psi - centring.a_t) / centring.d_t
    row["window_count"] = int(np.count_nonzero(y >= alpha * np.abs(x).sum(axis=1) + tau))

    order = np.lexsort((np.arange(y.size), -y))[:2]
    for rank, i in enumerate(order, start=1):
        for axis in range(cfg.d):
            row[f"x{rank}_{axis + 1}"] = float(x[i, axis])
        row[f"y{rank}"] = float(y[i])
    row["flagged"] = False
    return [row]


def aggregate(cfg: ExperimentConfig, rows: List[Dict]) -> Dict:
    tau = float(cfg.param("tau", 0.0))
    alpha = float(cfg.param("alpha", 1.0))
    used = [r for r in rows if not r.get("flagged")]
    result = {
        "experiment": NAME,
        "t": cfg.t_max,
        "used": len(used),
        "expected_window_count": expected_window_count(tau, alpha, cfg.d),
        "density_integral": density_normalisation(cfg.d),
        "centring": "a_r_t",
    }
    if not used:
        return result
    counts = np.array([r["window_count"] for r in used], dtype=np.float64)
    ci = bootstrap_ci(counts, seed=cfg.base_seed)
    result["mean_window_count"] = float(counts.mean())
    result["mean_window_count_ci_low"] = ci.low
    result["mean_window_count_ci_high"] = ci.high

    y1 = np.array([r["y1"] for r in used])
    y2 = np.array([r["y2"] for r in used])
    result["ordering_violations"] = int(np.count_nonzero(y1 < y2))
    result["ks_y1"] = ks_distance(y1, lambda v: top_value_cdf(v, cfg.d))
    result["ks_y2"] = ks_distance(y2, lambda v: second_value_cdf(v, cfg.d))
    for axis in range(cfg.d):
        result[f"ks_x1_{axis + 1}"] = ks_distance([r[f"x1_{axis + 1}"] for r in used], laplace_cdf)
    return result


def gates(cfg: ExperimentConfig, agg: Dict) -> List[GateResult]:
    results = [at_most("density_integral", abs(agg["density_integral"] - 1.0), float(cfg.gate("density_tol", 1e-3)))]
    if not agg.get("used"):
        return results + [skipped("mean_window_count", "无有效样本")]
    expected = agg["expected_window_count"]
    low, high = cfg.gate("window_count_range", [0.8 * expected, 1.2 * expected])
    results.append(within("mean_window_count", agg["mean_window_count"], float(low), float(high)))
    results.append(holds("y1_above_y2", agg["ordering_violations"] == 0, agg["ordering_violations"]))
    return results
