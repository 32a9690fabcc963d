"""
老化实验：T^{(ρ)}_t/t 与 T^ε_t/t 的经验分布，以及极限 Θ 的尾概率

P(Θ > ω) = ∫ exp{−ν(D_ω(x,y))} ν(dx,dy)，ν = dx ⊗ e^{−y−|x|} dy。
"""

import logging
import math
import warnings
from functools import lru_cache
from typing import Dict, List

import numpy as np
from scipy import integrate

import config
from api.hamiltonian import full_hamiltonian
from api.localisation import ageing_time, solution_ageing_time
from api.spectra import top_k_eigenpairs
from config import ExperimentConfig
from service.fields import realization_field, row_head
from service.gates import GateResult, at_most, holds, skipped, within
from utils.errors import ConvergenceError, ParameterError, QuadratureError, RegimeError
from utils.stats import empirical_cdf, ks_distance

logger = logging.getLogger(__name__)

NAME = "ageing"


def theta_tail_closed_form(omega: float) -> float:
    """d=1：ν(D_ω(x,y)) = 2e^{−y}(1+ωe^{−|x|})，积分得 log(1+ω)/ω"""
    if omega < 0:
        raise ParameterError(f"ω 必须非负: {omega}")
    if omega == 0:
        return 1.0
    return math.log1p(omega) / omega


@lru_cache(maxsize=4096)
def _inner_measure(abs_x: float, omega: float) -> float:
    """e^{y}·ν(D_ω(x,y))：对 x̄ 求积，ȳ 方向解析积分"""
    s = omega / (1.0 + omega)
    near, err_near = integrate.quad(lambda u: math.exp(-u), 0.0, abs_x, epsabs=1e-12)
    far, err_far = integrate.quad(lambda u: math.exp(-u + s * (u - abs_x)), abs_x, np.inf, epsabs=1e-12)
    return 2.0 * (near + far)


def theta_tail_numeric(omega: float, d: int = 1, tol: float = 1e-3) -> float:
    """嵌套自适应求积计算 P(Θ > ω)"""
    if d != 1:
        raise ParameterError(f"Θ 尾概率的数值积分仅支持 d=1: d={d}")
    if omega < 0:
        raise ParameterError(f"ω 必须非负: {omega}")

    def integrand(y: float, x: float) -> float:
        with np.errstate(over="ignore"):
            w = np.exp(-y)
            return float(np.exp(-w * _inner_measure(x, omega) - y - x))

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            half, error = integrate.dblquad(integrand, 0.0, np.inf, -np.inf, np.inf,
                                            epsabs=tol * 0.1, epsrel=1e-8)
        except integrate.IntegrationWarning as e:
            raise QuadratureError(f"Θ 尾概率求积未收敛 (ω={omega}): {e}")
    if 2.0 * error > tol:
        raise QuadratureError(f"Θ 尾概率求积误差 {2.0 * error:.2e} 超出容差 {tol:.1e}")
    return 2.0 * half


def realization(cfg: ExperimentConfig, index: int) -> List[Dict]:
    t = cfg.t_max
    factor = float(cfg.param("horizon_factor", 8.0))
    if factor < 4:
        raise ParameterError(f"horizon 必须 ≥ 4t: horizon_factor={factor}")
    eps = float(cfg.param("eps", 0.1))
    horizon = factor * t
    scales = cfg.scales(t)
    field = realization_field(cfg, index, [t, t + horizon])
    row = {**row_head(cfg, index), "t": t, "horizon": horizon}
    try:
        by_site = ageing_time(scales.rho, t, horizon, field, scales)
        k = min(int(cfg.param("k", config.SPECTRAL_K)), field.geometry.size)
        spectrum = top_k_eigenpairs(full_hamiltonian(field), k, cfg.tolerance("eig_tol", config.EIG_TOL))
        by_profile = solution_ageing_time(eps, t, horizon, field, scales, spectrum=spectrum)
    except (RegimeError, ConvergenceError) as e:
        logger.warning(f"⚠️ realization {index} 被标记: {e}")
        return [{**row, "flagged": True}]
    row.update({
        "T_rho_over_t": by_site.value / t,
        "censored_rho": by_site.censored,
        "T_eps_over_t": by_profile.value / t,
        "censored_eps": by_profile.censored,
        "degenerate": spectrum.degenerate,
        "flagged": spectrum.degenerate,
    })
    return [row]


def aggregate(cfg: ExperimentConfig, rows: List[Dict]) -> Dict:
    used = [r for r in rows if not r.get("flagged")]
    result = {"experiment": NAME, "t": cfg.t_max, "used": len(used), "eps": float(cfg.param("eps", 0.1))}
    if not used:
        return result
    by_site = np.array([r["T_rho_over_t"] for r in used])
    by_profile = np.array([r["T_eps_over_t"] for r in used])
    result["min_T_rho_over_t"] = float(by_site.min())
    result["min_T_eps_over_t"] = float(by_profile.min())
    result["censored_fraction_rho"] = float(np.mean([r["censored_rho"] for r in used]))
    result["censored_fraction_eps"] = float(np.mean([r["censored_eps"] for r in used]))
    cdf_at_one = float(empirical_cdf(by_site)(1.0))
    result["cdf_rho_at_1"] = cdf_at_one
    result["cdf_eps_at_1"] = float(empirical_cdf(by_profile)(1.0))
    result["ks_two_sample"] = ks_distance(by_site, by_profile)
    result["theta_tail_closed_form_at_1"] = theta_tail_closed_form(1.0)
    if cfg.d == 1:
        result["theta_tail_numeric_at_1"] = theta_tail_numeric(1.0)
        result["theta_tail_gap_at_1"] = abs(result["theta_tail_numeric_at_1"] - (1.0 - cdf_at_one))
    return result


def gates(cfg: ExperimentConfig, agg: Dict) -> List[GateResult]:
    if not agg.get("used"):
        return [skipped("positivity", "无有效样本")]
    low, high = cfg.gate("cdf_range", [0.05, 0.95])
    results = [
        holds("positivity", agg["min_T_rho_over_t"] > 0 and agg["min_T_eps_over_t"] > 0,
              min(agg["min_T_rho_over_t"], agg["min_T_eps_over_t"])),
        within("cdf_rho_at_1", agg["cdf_rho_at_1"], float(low), float(high), open_interval=True),
        at_most("ks_two_sample", agg["ks_two_sample"], float(cfg.gate("ks_max", 0.15))),
    ]
    if "theta_tail_gap_at_1" in agg:
        results.append(at_most("theta_tail_gap_at_1", agg["theta_tail_gap_at_1"],
                               float(cfg.gate("theta_gap_max", 0.1))))
    else:
        results.append(skipped("theta_tail_gap_at_1", "数值 Θ 尾概率仅在 d=1 时计算"))
    return results
