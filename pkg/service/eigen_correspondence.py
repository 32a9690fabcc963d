"""
局部与全局特征值的对应、特征函数指数衰减、Assumption A 以及 log|φ(0)| 的上下界
"""

import logging
import math
from typing import Dict, List

import numpy as np

import config
from api.envelope import DecayEnvelope
from api.hamiltonian import HamiltonianSpec, Punctured, SinglePeak, build_hamiltonian, full_hamiltonian
from api.spectra import principal_eigenpair, top_k_eigenpairs
from config import ExperimentConfig
from service.fields import field_at, realization_field, row_head
from service.gates import GateResult, at_least, at_most, skipped, within
from utils.errors import ConvergenceError, RegimeError
from utils.lattice import distances_from, origin_distances, site_index
from utils.potential import level_set, separation

logger = logging.getLogger(__name__)

NAME = "eigen_correspondence"

MAX_CORRESPONDENCE_INDICES = 5
DECAY_FLOOR = 1e-12
# λ̃_t(x) ≤ λ_{t,1} 精确成立，比较时留出舍入余量
H_SET_TOL = 1e-9


class LocalEigenvalues:
    """λ̃_t(x)：x ∉ Π 时等于穿孔算子的主特征值，x ∈ Π 时逐个求解"""

    def __init__(self, field, L: float):
        self.field = field
        self.L = L
        self.pi = level_set(field, L)
        self.bulk, _ = principal_eigenpair(build_hamiltonian(HamiltonianSpec(field, Punctured(L))))
        self.peaks = {}
        for z, index in zip(self.pi.sites, self.pi.indices):
            self.peaks[index], _ = principal_eigenpair(build_hamiltonian(HamiltonianSpec(field, SinglePeak(L, z))))

    def at(self, index: int) -> float:
        return self.peaks.get(int(index), self.bulk)

    def level_set(self, lam: float) -> List[int]:
        """H(λ) = {x : λ̃_t(x) ≥ λ}，返回线性下标"""
        threshold = lam - H_SET_TOL * max(1.0, abs(lam))
        if self.bulk >= threshold:
            return list(range(self.field.geometry.size))
        return [i for i, value in self.peaks.items() if value >= threshold]


def _decay_rate(phi: np.ndarray, dist: np.ndarray, radius: float):
    """在 1 ≤ |x − z₁| ≤ radius 上拟合 log|φ| 的斜率"""
    magnitude = np.abs(phi)
    keep = (magnitude > DECAY_FLOOR * magnitude.max()) & (dist >= 1) & (dist <= radius)
    if np.unique(dist[keep]).size < 2:
        return None
    slope, _ = np.polyfit(dist[keep].astype(np.float64), np.log(magnitude[keep]), 1)
    return -float(slope)


def fit_radius(scales, g) -> float:
    """衰减拟合半径 r_t·g_t，截断到环面直径"""
    return float(min(scales.r_t * scales.g_t, g.diameter))


def realization(cfg: ExperimentConfig, index: int) -> List[Dict]:
    t = cfg.t_max
    scales = cfg.scales(t)
    field = field_at(realization_field(cfg, index, [t]), cfg, t)
    g = field.geometry
    row = {**row_head(cfg, index), "t": t}
    try:
        k = max(2, min(50, math.ceil(scales.V_size ** scales.eps), g.size))
        sd = top_k_eigenpairs(full_hamiltonian(field), k, cfg.tolerance("eig_tol", config.EIG_TOL))
        local = LocalEigenvalues(field, scales.L_t)
    except (RegimeError, ConvergenceError) as e:
        logger.warning(f"⚠️ realization {index} 被标记: {e}")
        return [{**row, "flagged": True}]

    pi_separation = separation(local.pi, g)
    row["k"] = k
    row["pi_size"] = len(local.pi)
    row["separation"] = pi_separation if math.isfinite(pi_separation) else None
    row["well_separated"] = pi_separation > 2 * scales.j
    for i in range(min(k, MAX_CORRESPONDENCE_INDICES)):
        row[f"correspondence_{i + 1}"] = abs(float(sd.eigenvalues[i]) - local.at(sd.argmax_indices[i]))

    lam1 = float(sd.eigenvalues[0])
    z1 = sd.argmax_sites[0]
    phi1 = sd.eigenvectors[:, 0]
    dist = distances_from(z1, g)
    row["fit_radius"] = fit_radius(scales, g)
    rate = _decay_rate(phi1, dist, row["fit_radius"])
    row["decay_rate"] = rate
    row["decay_ratio"] = rate / (scales.loglog_t / scales.gamma) if rate is not None else None

    envelope = DecayEnvelope.for_separation(scales, pi_separation)
    try:
        bound = envelope.eigenvector_bound(lam1, dist)
        row["envelope_violations"] = int(np.count_nonzero(np.abs(phi1) > bound * (1 + 1e-9)))
    except RegimeError:
        row["envelope_violations"] = None

    z1_norm = int(origin_distances(g)[site_index(z1, g)])
    members = local.level_set(lam1)
    nearest = int(origin_distances(g)[members].min()) if members else math.inf
    row["assumption_a"] = nearest > z1_norm * (1 + scales.h_t)

    at_origin = abs(float(phi1[site_index(g.origin, g)]))
    log_origin = math.log(at_origin) if at_origin > 0 else None
    c = float(cfg.param("c", 0.0))
    row["log_phi_origin"] = log_origin
    if log_origin is not None:
        row["upper_slack"] = envelope.origin_log_upper(z1_norm, c) - log_origin
        row["lower_slack"] = log_origin - envelope.origin_log_lower_form(z1_norm)
    row["degenerate"] = sd.degenerate
    row["flagged"] = sd.degenerate
    return [row]


def aggregate(cfg: ExperimentConfig, rows: List[Dict]) -> Dict:
    used = [r for r in rows if not r.get("flagged")]
    result = {"experiment": NAME, "t": cfg.t_max, "used": len(used)}
    separated = [r["correspondence_1"] for r in used if r["well_separated"]]
    result["well_separated"] = len(separated)
    if separated:
        result["median_correspondence_1"] = float(np.median(separated))
    ratios = [r["decay_ratio"] for r in used if r["well_separated"] and r.get("decay_ratio") is not None]
    if ratios:
        result["median_decay_ratio"] = float(np.median(ratios))
    if used:
        result["assumption_a_frequency"] = float(np.mean([bool(r["assumption_a"]) for r in used]))
    violations = [r["envelope_violations"] for r in used if r.get("envelope_violations") is not None]
    result["envelope_violations"] = int(sum(violations))
    return result


def gates(cfg: ExperimentConfig, agg: Dict) -> List[GateResult]:
    results = []
    if "median_correspondence_1" in agg:
        results.append(at_most("median_correspondence_1", agg["median_correspondence_1"],
                               float(cfg.gate("correspondence_max", 1e-6))))
    else:
        results.append(skipped("median_correspondence_1", "无分离良好的 realization"))
    if "median_decay_ratio" in agg:
        low, high = cfg.gate("decay_ratio_range", [0.5, 1.5])
        results.append(within("median_decay_ratio", agg["median_decay_ratio"], float(low), float(high)))
    else:
        results.append(skipped("median_decay_ratio", "衰减拟合点不足"))
    # Assumption A 的频率默认只报告；配置了 assumption_a_min 才设闸门
    if "assumption_a_frequency" in agg and "assumption_a_min" in cfg.gates:
        results.append(at_least("assumption_a_frequency", agg["assumption_a_frequency"],
                                float(cfg.gates["assumption_a_min"])))
    return results
