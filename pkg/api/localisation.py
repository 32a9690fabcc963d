"""
惩罚泛函 Ψ̃、局域化站点、惩罚谱、老化时间与事件 ℰ_{t,c}
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from api.hamiltonian import full_hamiltonian
from api.solver import SolutionSnapshot, snapshot_from_spectrum
from api.spectra import SpectralData, local_principal_eigenvalue, local_principal_eigenvalues, top_k_eigenpairs
from utils.errors import DegenerateSpectrumError, ParameterError
from utils.lattice import Site, TorusGeometry, all_coords, ball_indices, distances_from, origin_distances, site_index
from utils.potential import PotentialField, window
from utils.scales import ScaleSet, macrobox_level, q_exponent

logger = logging.getLogger(__name__)

GRID_DIVISIONS = 200
BISECTION_DIVISIONS = 100000


def _penalty_coefficient(t: float, gamma: float) -> float:
    return math.log(math.log(t)) / (gamma * t)


def psi(z: Sequence[int], n: int, c: float, t: float, field: PotentialField, scales: ScaleSet) -> float:
    """Ψ̃^{(n)}_{t,c}(z) = λ̃^{(n)}(z) − |z| log log t/(γt) + c|z|/t"""
    g = field.geometry
    distance = int(origin_distances(g)[site_index(z, g)])
    lam = local_principal_eigenvalue(field, z, n, scales.L_t)
    return lam - distance * _penalty_coefficient(t, field.gamma) + c * distance / t


def psi_values(n: int, c: float, t: float, field: PotentialField, scales: ScaleSet,
               sites: Optional[np.ndarray] = None, L: Optional[float] = None) -> np.ndarray:
    """批量 Ψ̃，sites 为线性下标"""
    g = field.geometry
    sites = np.arange(g.size) if sites is None else np.asarray(sites, dtype=np.int64)
    L = scales.L_t if L is None else L
    dist = origin_distances(g)[sites]
    lam = local_principal_eigenvalues(field, n, L, sites)
    return lam - dist * _penalty_coefficient(t, field.gamma) + c * dist / t


def psi_star(field: PotentialField, t: float) -> np.ndarray:
    """Ψ*_t(z) = ξ(z) − |z| log log t/(γt)"""
    return field.values - origin_distances(field.geometry) * _penalty_coefficient(t, field.gamma)


@dataclass(frozen=True)
class TopTwo:
    Z1: Site
    Z2: Site
    psi1: float
    psi2: float
    index1: int
    index2: int

    @property
    def gap(self) -> float:
        return self.psi1 - self.psi2


def _ranked_two(values: np.ndarray, sites: np.ndarray):
    # 值降序，并列按线性下标（字典序）升序
    order = np.lexsort((sites, -values))[:2]
    return sites[order], values[order]


def top_two(n: int, c: float, t: float, field: PotentialField, scales: ScaleSet,
            prune: bool = True, L: Optional[float] = None) -> TopTwo:
    """Ψ̃^{(n)}_{t,c} 的最大与次大站点"""
    g = field.geometry
    L = scales.L_t if L is None else L
    dist = origin_distances(g)
    drift = -dist * _penalty_coefficient(t, field.gamma) + c * dist / t

    if prune and n > 0:
        # ξ(z) ≤ λ̃^{(n)}(z) ≤ max{L, ξ(z)} + 2d
        lower = field.values + drift
        upper = np.maximum(L, field.values) + 2 * g.d + drift
        threshold = np.partition(lower, -2)[-2]
        candidates = np.flatnonzero(upper >= threshold)
    else:
        candidates = np.arange(g.size)

    values = local_principal_eigenvalues(field, n, L, candidates) + drift[candidates]
    best, best_values = _ranked_two(values, candidates)
    coords = all_coords(g)
    return TopTwo(
        Z1=tuple(int(v) for v in coords[best[0]]),
        Z2=tuple(int(v) for v in coords[best[1]]),
        psi1=float(best_values[0]),
        psi2=float(best_values[1]),
        index1=int(best[0]),
        index2=int(best[1]),
    )


@dataclass(frozen=True)
class PenalisedSpectrum:
    values: np.ndarray
    i1: int
    i2: int


def penalised_spectrum(sd: SpectralData, t: float, g: TorusGeometry) -> PenalisedSpectrum:
    """Ψ_t(i) = λ_i + log|φ_i(0)|/t，φ_i(0)=0 时为 −∞"""
    at_origin = np.abs(sd.eigenvectors[site_index(g.origin, g), :])
    with np.errstate(divide="ignore"):
        values = sd.eigenvalues + np.log(at_origin) / t
    values = np.where(at_origin == 0, -np.inf, values)
    finite = np.flatnonzero(np.isfinite(values))
    if finite.size < 2:
        raise DegenerateSpectrumError(f"惩罚谱有限值不足两个: {finite.size}")
    order = finite[np.lexsort((finite, -values[finite]))]
    return PenalisedSpectrum(values=values, i1=int(order[0]), i2=int(order[1]))


def mass_concentration(snapshot: SolutionSnapshot, sites: Sequence[int]) -> float:
    """给定线性下标集合上的质量占比"""
    return float(np.sum(snapshot.u[np.asarray(sites, dtype=np.int64)]) / snapshot.total_mass)


@dataclass(frozen=True)
class AgeingResult:
    value: float
    censored: bool


def _first_change(changed: Callable[[float], bool], t: float, horizon: float) -> AgeingResult:
    """网格步长 t/200 扫描，再二分到 t/10⁵"""
    step = t / GRID_DIVISIONS
    resolution = t / BISECTION_DIVISIONS
    count = int(math.floor(horizon / step + 1e-9))
    previous = 0.0
    for k in range(1, count + 1):
        s = k * step
        if changed(s):
            lo, hi = previous, s
            while hi - lo > resolution:
                mid = 0.5 * (lo + hi)
                if changed(mid):
                    hi = mid
                else:
                    lo = mid
            return AgeingResult(hi, False)
        previous = s
    return AgeingResult(horizon, True)


class _WindowedPsi:
    """按时间选子窗口，缓存各窗口的 λ̃"""

    def __init__(self, field: PotentialField, n: int, c: float, scales: ScaleSet):
        self.field = field
        self.n = n
        self.c = c
        self.scales = scales
        self._cache: Dict[int, tuple] = {}

    def side_at(self, time: float) -> int:
        if self.scales.side_overridden:
            return min(self.scales.side, self.field.geometry.side)
        return min(self.scales.with_t(time).side, self.field.geometry.side)

    def _window(self, side: int):
        if side not in self._cache:
            sub = window(self.field, side)
            level = macrobox_level(sub.geometry.size, self.scales.theta, self.field.gamma)
            lam = local_principal_eigenvalues(sub, self.n, level)
            self._cache[side] = (sub, lam, origin_distances(sub.geometry))
        return self._cache[side]

    def argmax(self, time: float) -> Site:
        sub, lam, dist = self._window(self.side_at(time))
        values = lam - dist * _penalty_coefficient(time, self.field.gamma) + self.c * dist / time
        best = int(np.argmax(values))
        return tuple(int(v) for v in all_coords(sub.geometry)[best])


def ageing_time(n: int, t: float, horizon: float, field_on_horizon_box: PotentialField,
                scales: ScaleSet, c: float = 0.0) -> AgeingResult:
    """T^{(n)}_t = inf{s > 0 : Z^{(1,n)}_{t+s} ≠ Z^{(1,n)}_t}，超出 horizon 记为删失"""
    if not horizon > 0:
        raise ParameterError(f"horizon 必须为正: {horizon}")
    functional = _WindowedPsi(field_on_horizon_box, n, c, scales)
    start = functional.argmax(t)
    return _first_change(lambda s: functional.argmax(t + s) != start, t, horizon)


def solution_ageing_time(eps: float, t: float, horizon: float, field: PotentialField,
                         scales: ScaleSet, k: Optional[int] = None,
                         spectrum: Optional[SpectralData] = None) -> AgeingResult:
    """T^ε_t：‖u(t)/U(t) − u(t+s)/U(t+s)‖_∞ 首次超过 ε 的 s"""
    if not 0 < eps < 0.5:
        raise ParameterError(f"ε 必须在 (0, 1/2) 内: {eps}")
    g = field.geometry
    if spectrum is None:
        k = g.size if k is None else min(k, g.size)
        spectrum = top_k_eigenpairs(full_hamiltonian(field), k)
    base = snapshot_from_spectrum(spectrum, t, g).normalized

    def changed(s: float) -> bool:
        profile = snapshot_from_spectrum(spectrum, t + s, g).normalized
        return float(np.abs(profile - base).max()) > eps

    return _first_change(changed, t, horizon)


@dataclass(frozen=True)
class EventFlags:
    S_j: bool
    S_rho: bool
    G_0: bool
    G_c: bool
    H: bool
    I: bool

    @property
    def E(self) -> bool:
        return all((self.S_j, self.S_rho, self.G_0, self.G_c, self.H, self.I))

    def to_dict(self) -> dict:
        return {**asdict(self), "E": self.E}


def in_profile_window(z: Sequence[int], n: int, field: PotentialField, scales: ScaleSet) -> bool:
    """𝒮^{(n)}(z)：ξ(z) ∈ a_t(1±f_t) 且邻域取值落在 S^{(n)} 中"""
    g = field.geometry
    a, f = scales.a_t, scales.f_t
    if not a * (1 - f) < field.value_at(z) < a * (1 + f):
        return False
    inner = min(n, scales.rho)
    dist = distances_from(z, g)
    for i in ball_indices(z, scales.j, g):
        r = int(dist[i])
        if r == 0:
            continue
        value = float(field.values[i])
        if r <= inner:
            centre = a ** q_exponent(r, field.gamma)
            if not centre * (1 - f) < value < centre * (1 + f):
                return False
        elif not 0 < value < a ** scales.eta:
            return False
    return True


def event_flags(t: float, c: float, field: PotentialField, scales: ScaleSet) -> EventFlags:
    """ℰ_{t,c} 的各分量"""
    j, rho = scales.j, scales.rho
    threshold = scales.d_t * scales.e_t
    top_j = top_two(j, 0.0, t, field, scales)
    top_jc = top_two(j, c, t, field, scales)
    top_rho = top_j if rho == j else top_two(rho, 0.0, t, field, scales)
    distance = int(origin_distances(field.geometry)[top_j.index1])
    return EventFlags(
        S_j=in_profile_window(top_j.Z1, j, field, scales),
        S_rho=in_profile_window(top_rho.Z1, rho, field, scales),
        G_0=top_j.gap > threshold,
        G_c=top_jc.gap > threshold,
        H=scales.r_t * scales.f_t < distance < scales.r_t * scales.g_t,
        I=top_j.psi1 > scales.a_t * (1 - scales.f_t),
    )


@dataclass(frozen=True)
class LocalisationReport:
    Z1: Site
    Z2: Site
    psi1: float
    psi2: float
    gap: float
    n_used: int
    c_used: float
    mass_at_Z1: float
    lambda_local_at_Z1: float
    event_flags: EventFlags


def localisation_report(field: PotentialField, t: float, scales: ScaleSet, n: int, c: float,
                        snapshot: SolutionSnapshot) -> LocalisationReport:
    top = top_two(n, c, t, field, scales)
    return LocalisationReport(
        Z1=top.Z1, Z2=top.Z2, psi1=top.psi1, psi2=top.psi2, gap=top.gap,
        n_used=n, c_used=c,
        mass_at_Z1=mass_concentration(snapshot, [top.index1]),
        lambda_local_at_Z1=local_principal_eigenvalue(field, top.Z1, n, scales.L_t),
        event_flags=event_flags(t, c, field, scales),
    )
