"""
环面上 ∂u/∂t = (Δ + ξ)u, u(0,·) = 1_0 的三种独立解法：谱展开、ODE 积分、Feynman–Kac Monte Carlo

数值量统一带 log_scale：真实值 = 存储值 · exp(log_scale)，以免 e^{tλ} 溢出。
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy import sparse

import config
from api.hamiltonian import full_hamiltonian
from api.spectra import top_k_eigenpairs
from utils.errors import InputError, ParameterError, StiffnessError
from utils.lattice import Site, TorusGeometry, all_coords, distances_from, indices_of, neighbor_table, site_index
from utils.potential import PotentialField
from utils.scales import ScaleSet

logger = logging.getLogger(__name__)

SPECTRAL = "spectral"
ODE = "ode"
FEYNMAN_KAC = "fk"
METHODS = (SPECTRAL, ODE, FEYNMAN_KAC)


@dataclass(frozen=True, eq=False)
class SolutionSnapshot:
    t: float
    u: np.ndarray
    total_mass: float
    method: str
    geometry: TorusGeometry
    log_scale: float = 0.0
    mc_stderr: Optional[np.ndarray] = None
    mass_stderr: Optional[float] = None
    seed: Optional[int] = None
    remainder: Optional[float] = None

    @property
    def normalized(self) -> np.ndarray:
        """u/U"""
        return self.u / self.total_mass

    @property
    def log_total_mass(self) -> float:
        return math.log(self.total_mass) + self.log_scale

    def rescaled(self, log_scale: float) -> np.ndarray:
        """换算到另一个 log_scale 下的 u"""
        return self.u * math.exp(self.log_scale - log_scale)

    def sidecar(self) -> dict:
        return {
            "t": self.t,
            "method": self.method,
            "U": self.total_mass,
            "log_scale": self.log_scale,
            "log_U": self.log_total_mass,
            "seed": self.seed,
            "remainder": self.remainder,
            "mass_stderr": self.mass_stderr,
        }


def _origin_indicator(g: TorusGeometry) -> np.ndarray:
    u = np.zeros(g.size)
    u[site_index(g.origin, g)] = 1.0
    return u


def _check_time(t: float):
    if not t >= 0 or not math.isfinite(t):
        raise ParameterError(f"时间必须为有限非负实数: t={t}")


def solve_spectral(field: PotentialField, t: float, k: Optional[int] = None,
                   tol: Optional[float] = None) -> SolutionSnapshot:
    """u = Σ_i e^{tλ_i} φ_i(0) φ_i，截断到前 k 项"""
    _check_time(t)
    g = field.geometry
    k = min(config.SPECTRAL_K, g.size) if k is None else int(k)
    if k < 1:
        raise ParameterError(f"k 必须 ≥ 1: k={k}")
    sd = top_k_eigenpairs(full_hamiltonian(field), min(k, g.size), tol)
    return snapshot_from_spectrum(sd, t, g)


def snapshot_from_spectrum(sd, t: float, g: TorusGeometry) -> SolutionSnapshot:
    """由已有的 SpectralData 组装任意时刻的谱解"""
    origin = site_index(g.origin, g)
    lam = sd.eigenvalues
    weights = np.exp(t * (lam - lam[0])) * sd.eigenvectors[origin, :]
    u = sd.eigenvectors @ weights
    remainder = float(math.exp(t * (lam[-1] - lam[0]))) if sd.k < g.size else 0.0
    return SolutionSnapshot(t=float(t), u=u, total_mass=float(u.sum()), method=SPECTRAL,
                            geometry=g, log_scale=float(t * lam[0]), remainder=remainder)


def solve_ode(field: PotentialField, t: float, rel_tol: float = 1e-10) -> SolutionSnapshot:
    """自适应步长积分 v′ = (H − c)v，c = max ξ + 2d，u = e^{ct} v"""
    _check_time(t)
    g = field.geometry
    if rel_tol < 1e-12:
        raise ParameterError(f"rel_tol 必须 ≥ 1e-12: {rel_tol}")
    if g.size > config.ODE_MAX_SITES:
        raise ParameterError(f"ODE 仅用作 ≤ {config.ODE_MAX_SITES} 站点的参照解: {g.size}")
    u0 = _origin_indicator(g)
    if t == 0:
        return SolutionSnapshot(t=0.0, u=u0, total_mass=1.0, method=ODE, geometry=g)

    shift = float(field.values.max()) + 2 * g.d
    generator = (full_hamiltonian(field).matrix - shift * sparse.identity(g.size, format="csr")).tocsr()
    sol = solve_ivp(lambda s, v: generator @ v, (0.0, float(t)), u0, method="DOP853",
                    t_eval=[float(t)], rtol=rel_tol, atol=rel_tol * 1e-3)
    if sol.status != 0:
        raise StiffnessError(f"ODE 积分失败（建议改用谱方法）: {sol.message}")
    u = sol.y[:, -1]
    return SolutionSnapshot(t=float(t), u=u, total_mass=float(u.sum()), method=ODE,
                            geometry=g, log_scale=shift * t)


def _walk_block(values: np.ndarray, g: TorusGeometry, t: float, m: int,
                rng: np.random.Generator, shift: float):
    """m 个连续时间随机游走（总跳率 2d），返回终点下标与 exp(∫(ξ+2d) − shift)"""
    table = neighbor_table(g)
    origin = site_index(g.origin, g)
    position = np.full(m, origin, dtype=np.int64)
    clock = np.zeros(m)
    log_weight = np.zeros(m)
    rate = 2.0 * g.d
    active = np.flatnonzero(clock < t)
    while active.size:
        hold = rng.exponential(1.0 / rate, size=active.size)
        remaining = t - clock[active]
        finished = hold >= remaining
        segment = np.where(finished, remaining, hold)
        log_weight[active] += segment * (values[position[active]] + rate)
        clock[active] = np.where(finished, t, clock[active] + hold)
        jumping = active[~finished]
        if jumping.size:
            direction = rng.integers(0, table.shape[1], size=jumping.size)
            position[jumping] = table[position[jumping], direction]
        active = jumping
    return position, np.exp(log_weight - shift)


def feynman_kac_mc(field: PotentialField, t: float, walkers: int, seed: int) -> SolutionSnapshot:
    """u(t,z) = E[exp(∫₀ᵗ ξ(X_s)+2d ds)·1{X_t = z}] 的朴素估计"""
    _check_time(t)
    if walkers < 1000:
        raise ParameterError(f"游走数必须 ≥ 10³: walkers={walkers}")
    g = field.geometry
    shift = float(t * (field.values.max() + 2 * g.d))
    block = config.FK_BLOCK
    n_blocks = -(-walkers // block)
    streams = np.random.SeedSequence(int(seed)).spawn(n_blocks)

    first = np.zeros((n_blocks, g.size))
    second = np.zeros((n_blocks, g.size))
    for b, stream in enumerate(streams):
        m = min(block, walkers - b * block)
        position, weight = _walk_block(field.values, g, float(t), m, np.random.default_rng(stream), shift)
        first[b] = np.bincount(position, weights=weight, minlength=g.size)
        second[b] = np.bincount(position, weights=weight * weight, minlength=g.size)

    total_first = first.sum(axis=0)
    total_second = second.sum(axis=0)
    u = total_first / walkers
    variance = np.maximum(total_second / walkers - u * u, 0.0)
    stderr = np.sqrt(variance / (walkers - 1))
    mass = float(u.sum())
    mass_variance = max(float(total_second.sum()) / walkers - mass * mass, 0.0)
    logger.debug(f"📊 Feynman–Kac: {walkers} 个游走, {n_blocks} 块, U={mass:.6g}·e^{shift:.3g}")
    return SolutionSnapshot(t=float(t), u=u, total_mass=mass, method=FEYNMAN_KAC, geometry=g,
                            log_scale=shift, mc_stderr=stderr,
                            mass_stderr=math.sqrt(mass_variance / (walkers - 1)), seed=int(seed))


def solve(field: PotentialField, t: float, method: str, **kwargs) -> SolutionSnapshot:
    if method == SPECTRAL:
        return solve_spectral(field, t, kwargs.get("k"), kwargs.get("tol"))
    if method == ODE:
        return solve_ode(field, t, kwargs.get("rel_tol", 1e-10))
    if method == FEYNMAN_KAC:
        return feynman_kac_mc(field, t, kwargs.get("walkers", 100000), kwargs.get("seed", 0))
    raise ParameterError(f"未知的求解方法: {method!r}，可选 {list(METHODS)}")


@dataclass(frozen=True)
class MacroboxDeviation:
    max_abs_deviation: float
    mass_deviation: float
    total_mass: float


def macrobox_truncation_check(field_large: PotentialField, field_window: PotentialField,
                              t: float) -> MacroboxDeviation:
    """比较大环面与中心子窗口上的解：max_z |u_large − u_window| 与 |U_large − U_window|"""
    big, small = field_large.geometry, field_window.geometry
    if big.d != small.d or small.side > big.side:
        raise InputError(f"窗口 {small} 不在大环面 {big} 之内")
    members = indices_of(all_coords(small), big)
    if not np.array_equal(field_large.values[members], field_window.values):
        raise InputError("窗口上的势场取值与大环面不一致")

    large = solve_spectral(field_large, t, k=big.size)
    window = solve_spectral(field_window, t, k=small.size)
    scale = large.log_scale
    u_window = np.zeros(big.size)
    u_window[members] = window.rescaled(scale)
    factor = math.exp(scale)
    deviation = float(np.abs(large.u - u_window).max()) * factor
    mass_deviation = abs(large.total_mass - float(u_window.sum())) * factor
    return MacroboxDeviation(deviation, mass_deviation, large.total_mass * factor)


@dataclass(frozen=True)
class ProfileRecord:
    site: Site
    distance: int
    log_ratio: float
    normalized_ratio: Optional[float]


def profile_extract(s: SolutionSnapshot, Z: Sequence[int], scales: ScaleSet) -> List[ProfileRecord]:
    """log(u/U) 与 log(u/U) / ((1/γ)|z−Z| log log t)"""
    if not s.total_mass > 0:
        raise InputError("总质量必须为正")
    g = s.geometry
    dist = distances_from(Z, g)
    coords = all_coords(g)
    factor = scales.loglog_t / scales.gamma
    records = []
    for i in np.flatnonzero(s.u > 0):
        log_ratio = float(math.log(s.u[i] / s.total_mass))
        distance = int(dist[i])
        ratio = log_ratio / (distance * factor) if distance > 0 else None
        records.append(ProfileRecord(tuple(int(c) for c in coords[i]), distance, log_ratio, ratio))
    return records
