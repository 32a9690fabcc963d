"""
Weibull(γ) 势场：采样、次序统计、水平集 Π^{(L)}、穿孔与分离半径
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import InputError, ParameterError
from utils.lattice import (
    Site,
    TorusGeometry,
    all_coords,
    coordinate_gaps,
    indices_of,
    site_index,
    validate_site,
)

logger = logging.getLogger(__name__)


def _shell_order(g: TorusGeometry) -> np.ndarray:
    """站点按 (ℓ∞ 壳层, 坐标字典序) 排列的下标；小盒的顺序是大盒顺序的前缀"""
    coords = all_coords(g)
    shell = np.abs(coords).max(axis=1)
    keys = tuple(coords[:, axis] for axis in reversed(range(g.d))) + (shell,)
    return np.lexsort(keys)


def site_uniforms(coords: np.ndarray, seed: int) -> np.ndarray:
    """按 (seed, 坐标) 键控的 (0,1] 均匀数；与遍历顺序和环面大小无关

    Philox 流按壳层顺序铺在以原点为中心的最小立方体上。
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
    half = max(1, int(np.abs(coords).max()))
    cube = TorusGeometry(coords.shape[1], 2 * half + 1)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    u = np.empty(cube.size, dtype=np.float64)
    u[_shell_order(cube)] = 1.0 - rng.random(cube.size)
    return u[indices_of(coords, cube)]


@dataclass(frozen=True, eq=False)
class PotentialField:
    geometry: TorusGeometry
    values: np.ndarray
    gamma: float
    seed: Optional[int] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.geometry.size,):
            raise InputError(f"势场长度 {values.shape} 与站点数 {self.geometry.size} 不符")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InputError("势场取值必须为有限非负实数")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def value_at(self, z: Sequence[int]) -> float:
        return float(self.values[site_index(z, self.geometry)])

    def argmax(self) -> Site:
        """最大值站点，并列时取字典序最小"""
        coords = all_coords(self.geometry)
        return tuple(int(c) for c in coords[int(np.argmax(self.values))])

    def with_values(self, values: np.ndarray) -> "PotentialField":
        return PotentialField(self.geometry, values, self.gamma, self.seed)


@dataclass(frozen=True)
class LevelSet:
    level: float
    sites: List[Site] = field(default_factory=list)
    indices: Tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, z) -> bool:
        return tuple(z) in set(self.sites)


def sample_field(g: TorusGeometry, gamma: float, seed: int) -> PotentialField:
    """逆变换采样 ξ = E^{1/γ}，E ~ Exp(1)"""
    if not gamma > 0:
        raise ParameterError(f"γ 必须为正: gamma={gamma}")
    if int(seed) != seed or seed < 0:
        raise ParameterError(f"种子必须为非负整数: seed={seed}")
    u = site_uniforms(all_coords(g), int(seed))
    values = (-np.log(u)) ** (1.0 / gamma)
    logger.debug(f"🔄 采样势场: d={g.d}, side={g.side}, γ={gamma}, seed={seed}")
    return PotentialField(g, values, float(gamma), int(seed))


def field_from_values(g: TorusGeometry, values, gamma: float, seed: Optional[int] = None) -> PotentialField:
    if not gamma > 0:
        raise ParameterError(f"γ 必须为正: gamma={gamma}")
    return PotentialField(g, np.asarray(values, dtype=np.float64), float(gamma), seed)


def window(f: PotentialField, side: int) -> PotentialField:
    """以原点为中心的子窗口，保持同坐标取值"""
    sub = TorusGeometry(f.geometry.d, side)
    if sub.side > f.geometry.side:
        raise InputError(f"子窗口边长 {side} 大于原环面 {f.geometry.side}")
    values = f.values[indices_of(all_coords(sub), f.geometry)]
    return PotentialField(sub, values, f.gamma, f.seed)


def shifted(f: PotentialField, shift: Sequence[int]) -> PotentialField:
    """循环平移：新场在 z+shift 处取旧场在 z 处的值"""
    coords = all_coords(f.geometry)
    target = indices_of(coords + np.asarray(shift, dtype=np.int64)[None, :], f.geometry)
    values = np.empty_like(f.values)
    values[target] = f.values
    return f.with_values(values)


def level_set(f: PotentialField, L: float) -> LevelSet:
    """{z : ξ(z) > L}，字典序"""
    idx = np.flatnonzero(f.values > L)
    coords = all_coords(f.geometry)
    return LevelSet(float(L), [tuple(int(c) for c in coords[i]) for i in idx], tuple(int(i) for i in idx))


def puncture(f: PotentialField, pi: LevelSet, keep: Optional[Sequence[int]] = None) -> PotentialField:
    """ξ̃ = ξ·1_{V∖(Π∖{keep})}"""
    if not pi.indices:
        return f
    keep_index = site_index(keep, f.geometry) if keep is not None else None
    mask = np.zeros(f.geometry.size, dtype=bool)
    mask[list(pi.indices)] = True
    if keep_index is not None:
        mask[keep_index] = False
    values = np.where(mask, 0.0, f.values)
    return f.with_values(values)


def separation(pi: LevelSet, g: TorusGeometry) -> float:
    """Π 内两两最小距离；|Π| ≤ 1 时为 +∞"""
    if len(pi) <= 1:
        return math.inf
    coords = np.array([validate_site(z, g) for z in pi.sites], dtype=np.int64)
    best = math.inf
    for i in range(len(coords) - 1):
        gaps = coordinate_gaps(coords[i + 1:], coords[i][None, :], g).sum(axis=1)
        best = min(best, int(gaps.min()))
    return best


def top_values(f: PotentialField, k: int) -> List[Tuple[Site, float]]:
    """前 k 个次序统计量 ξ^{(1)} ≥ ξ^{(2)} ≥ …，并列按字典序"""
    k = min(int(k), f.geometry.size)
    order = np.lexsort((np.arange(f.geometry.size), -f.values))[:k]
    coords = all_coords(f.geometry)
    return [(tuple(int(c) for c in coords[i]), float(f.values[i])) for i in order]
