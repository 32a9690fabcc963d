"""
完全局域化实验：质量集中度 u(Z1)/U、Z1 附近的对数剖面比、B_t 之外的尾部统计量、ℰ_{t,c} 各分量的频率
"""

import logging
import math
from typing import Dict, List

import numpy as np

import config
from api.hamiltonian import full_hamiltonian
from api.localisation import localisation_report, mass_concentration
from api.solver import snapshot_from_spectrum
from api.spectra import top_k_eigenpairs
from config import ExperimentConfig
from service.fields import field_at, realization_field, row_head
from service.gates import GateResult, at_least, skipped, within
from utils.errors import ConvergenceError, RegimeError
from utils.lattice import ball_indices, distances_from, origin_distances, site_index
from utils.stats import median_stderr, quartiles

logger = logging.getLogger(__name__)

NAME = "localisation"

# 低于该相对量级的 u/U 已是浮点噪声
PROFILE_FLOOR = 1e-12
# ℰ 的分量，最后一项是合取
EVENTS = ("S_j", "S_rho", "G_0", "G_c", "H", "I", "E")


def _measure(cfg: ExperimentConfig, field, t: float) -> dict:
    scales = cfg.scales(t)
    g = field.geometry
    k = min(int(cfg.param("k", config.SPECTRAL_K)), g.size)
    sd = top_k_eigenpairs(full_hamiltonian(field), k, cfg.tolerance("eig_tol", config.EIG_TOL))
    snapshot = snapshot_from_spectrum(sd, t, g)
    report = localisation_report(field, t, scales, scales.rho, float(cfg.param("c", 0.0)), snapshot)
    z1 = site_index(report.Z1, g)

    u = np.maximum(snapshot.u, 0.0)
    total = float(u.sum())
    radius = int(math.floor(scales.r_t * scales.kappa_t))
    inside = ball_indices(report.Z1, radius, g)
    dist = distances_from(report.Z1, g)

    ratios = []
    for i in inside:
        share = u[i] / total
        if dist[i] == 0 or share <= PROFILE_FLOOR:
            continue
        ratios.append(math.log(share) / (dist[i] * scales.loglog_t / scales.gamma))

    phi1_sq = sd.eigenvectors[:, 0] ** 2
    outside = max(total - float(u[inside].sum()), 0.0) / total
    log_tail = scales.t * scales.d_t * scales.kappa_t + math.log(outside) if outside > 0 else None
    return {
        "t": t,
        "side": g.side,
        "z1": report.Z1,
        "z1_distance": int(origin_distances(g)[z1]),
        "psi_gap": report.gap,
        "z1_is_mass_argmax": int(np.argmax(u)) == z1,
        "mass_at_Z1": report.mass_at_Z1,
        "mass_top_two": mass_concentration(snapshot, [z1, site_index(report.Z2, g)]),
        "phi1_mass_max": float(phi1_sq.max() / phi1_sq.sum()),
        "phi1_argmax_is_Z1": int(sd.argmax_indices[0]) == z1,
        "lambda_local_at_Z1": report.lambda_local_at_Z1,
        "profile_median_ratio": float(np.median(ratios)) if ratios else None,
        "profile_sites": len(ratios),
        "log_tail_statistic": log_tail,
        "spectral_remainder": snapshot.remainder,
        "degenerate": sd.degenerate,
        **{f"event_{name}": flag for name, flag in report.event_flags.to_dict().items()},
    }


def realization(cfg: ExperimentConfig, index: int) -> List[Dict]:
    field = realization_field(cfg, index, cfg.t_grid)
    rows = []
    for t in cfg.t_grid:
        row = row_head(cfg, index)
        try:
            row.update(_measure(cfg, field_at(field, cfg, t), t))
            row["flagged"] = bool(row["degenerate"])
            row["flag_reason"] = "degenerate" if row["degenerate"] else ""
        except (RegimeError, ConvergenceError) as e:
            logger.warning(f"⚠️ realization {index} t={t:g} 被标记: {e}")
            row.update({"t": t, "flagged": True, "flag_reason": type(e).__name__})
        rows.append(row)
    return rows


def _valid(rows: List[Dict], t: float, key: str) -> List[float]:
    return [r[key] for r in rows
            if r["t"] == t and not r.get("flagged") and r.get(key) is not None]


def aggregate(cfg: ExperimentConfig, rows: List[Dict]) -> Dict:
    result = {"experiment": NAME, "realizations": cfg.realizations}
    for t in cfg.t_grid:
        masses = _valid(rows, t, "mass_at_Z1")
        tag = f"[t={t:g}]"
        result[f"used{tag}"] = len(masses)
        if not masses:
            continue
        summary = quartiles(masses)
        result[f"median_mass{tag}"] = summary["median"]
        result[f"q1_mass{tag}"] = summary["q1"]
        result[f"q3_mass{tag}"] = summary["q3"]
        result[f"median_mass_stderr{tag}"] = median_stderr(masses)
        result[f"fraction_localised{tag}"] = float(np.mean(np.asarray(masses) > 0.99))
        profiles = _valid(rows, t, "profile_median_ratio")
        result[f"profile_median_ratio{tag}"] = float(np.median(profiles)) if profiles else None
        result[f"median_mass_top_two{tag}"] = float(np.median(_valid(rows, t, "mass_top_two")))
        result[f"median_phi1_mass_max{tag}"] = float(np.median(_valid(rows, t, "phi1_mass_max")))
        result[f"fraction_z1_mass_argmax{tag}"] = float(np.mean(_valid(rows, t, "z1_is_mass_argmax")))
        result[f"fraction_phi1_argmax_is_Z1{tag}"] = float(np.mean(_valid(rows, t, "phi1_argmax_is_Z1")))
        for name in EVENTS[:-1]:
            result[f"event_{name}_frequency{tag}"] = float(np.mean(_valid(rows, t, f"event_{name}")))
        p = float(np.mean(_valid(rows, t, "event_E")))
        result[f"event_frequency{tag}"] = p
        result[f"event_frequency_stderr{tag}"] = math.sqrt(p * (1 - p) / len(masses))
    return result


def gates(cfg: ExperimentConfig, agg: Dict) -> List[GateResult]:
    results = []
    sigma = float(cfg.gate("trend_sigma", 2.0))
    for a, b in zip(cfg.t_grid, cfg.t_grid[1:]):
        ma, mb = agg.get(f"median_mass[t={a:g}]"), agg.get(f"median_mass[t={b:g}]")
        if ma is None or mb is None:
            results.append(skipped(f"median_mass_trend[{a:g}->{b:g}]", "无有效样本"))
            continue
        slack = sigma * math.hypot(agg[f"median_mass_stderr[t={a:g}]"], agg[f"median_mass_stderr[t={b:g}]"])
        results.append(at_least(f"median_mass_trend[{a:g}->{b:g}]", mb - ma, -slack))

        ea, eb = agg[f"event_frequency[t={a:g}]"], agg[f"event_frequency[t={b:g}]"]
        slack = sigma * math.hypot(agg[f"event_frequency_stderr[t={a:g}]"], agg[f"event_frequency_stderr[t={b:g}]"])
        results.append(at_least(f"event_frequency_trend[{a:g}->{b:g}]", eb - ea, -slack))

    last = f"[t={cfg.t_max:g}]"
    results.append(at_least(f"fraction_localised{last}", agg.get(f"fraction_localised{last}"),
                              float(cfg.gate("min_fraction_localised", 0.9))))
    low, high = cfg.gate("profile_range", [-1.3, -0.7])
    results.append(within(f"profile_median_ratio{last}", agg.get(f"profile_median_ratio{last}"),
                          float(low), float(high)))
    return results
