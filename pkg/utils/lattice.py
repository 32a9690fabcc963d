"""
环面 V_t 的坐标系、带环绕的 ℓ¹ 度量、球与邻点枚举
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from utils.errors import InvalidSiteError, ParameterError

logger = logging.getLogger(__name__)

Site = Tuple[int, ...]


@dataclass(frozen=True)
class TorusGeometry:
    """d 维环面，每轴 side 个站点，坐标 −(side−1)/2 … (side−1)/2"""
    d: int
    side: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"维数必须为正整数: d={self.d}")
        if int(self.side) != self.side or self.side < 3 or self.side % 2 == 0:
            raise ParameterError(f"边长必须为 ≥3 的奇数: side={self.side}")

    @property
    def half(self) -> int:
        return (self.side - 1) // 2

    @property
    def size(self) -> int:
        return self.side ** self.d

    @property
    def origin(self) -> Site:
        return (0,) * self.d

    @property
    def diameter(self) -> int:
        return self.d * self.half

    def to_dict(self) -> dict:
        return {"d": self.d, "side": self.side}


def validate_site(z: Iterable[int], g: TorusGeometry) -> Site:
    """校验并规范化站点坐标"""
    site = tuple(int(c) for c in z)
    if len(site) != g.d:
        raise InvalidSiteError(f"站点维数不符: {site}, 期望 d={g.d}")
    for c in site:
        if c < -g.half or c > g.half:
            raise InvalidSiteError(f"站点坐标越界: {site}, 轴范围 [{-g.half}, {g.half}]")
    return site


def wrap(coords: np.ndarray, g: TorusGeometry) -> np.ndarray:
    """把任意整数坐标约化到 [−half, half]"""
    return (np.asarray(coords, dtype=np.int64) + g.half) % g.side - g.half


def site_index(z: Sequence[int], g: TorusGeometry) -> int:
    """混合进制线性下标，与坐标字典序一致"""
    site = validate_site(z, g)
    index = 0
    for c in site:
        index = index * g.side + (c + g.half)
    return index


def indices_of(coords: np.ndarray, g: TorusGeometry) -> np.ndarray:
    """批量版 site_index，输入 (m, d)，自动环绕"""
    offsets = wrap(np.atleast_2d(coords), g) + g.half
    index = np.zeros(offsets.shape[0], dtype=np.int64)
    for axis in range(g.d):
        index = index * g.side + offsets[:, axis]
    return index


def site_from_index(index: int, g: TorusGeometry) -> Site:
    if index < 0 or index >= g.size:
        raise InvalidSiteError(f"线性下标越界: {index}")
    coords = []
    for _ in range(g.d):
        index, offset = divmod(index, g.side)
        coords.append(offset - g.half)
    return tuple(reversed(coords))


@lru_cache(maxsize=32)
def all_coords(g: TorusGeometry) -> np.ndarray:
    """全部站点坐标 (size, d)，按线性下标排列；只读"""
    axis = np.arange(-g.half, g.half + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * g.d), indexing="ij")
    coords = np.stack([grid.ravel() for grid in grids], axis=1)
    coords.setflags(write=False)
    return coords


@lru_cache(maxsize=32)
def neighbor_table(g: TorusGeometry) -> np.ndarray:
    """每个站点的 2d 个邻点下标 (size, 2d)；顺序为轴 0 的 −1,+1，轴 1 的 −1,+1 …"""
    coords = all_coords(g)
    columns = []
    for axis in range(g.d):
        for step in (-1, 1):
            shifted = coords.copy()
            shifted[:, axis] += step
            columns.append(indices_of(shifted, g))
    table = np.stack(columns, axis=1)
    table.setflags(write=False)
    return table


def coordinate_gaps(a: np.ndarray, b: np.ndarray, g: TorusGeometry) -> np.ndarray:
    """逐坐标的最小绝对环绕差"""
    diff = np.abs(np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)) % g.side
    return np.minimum(diff, g.side - diff)


def torus_distance(a: Sequence[int], b: Sequence[int], g: TorusGeometry) -> int:
    """带环绕的 ℓ¹ 距离"""
    sa = validate_site(a, g)
    sb = validate_site(b, g)
    return int(coordinate_gaps(np.array(sa), np.array(sb), g).sum())


def origin_distance(z: Sequence[int], g: TorusGeometry) -> int:
    return torus_distance(z, g.origin, g)


def distances_from(z: Sequence[int], g: TorusGeometry) -> np.ndarray:
    """z 到每个站点的环面距离，按线性下标排列"""
    site = np.array(validate_site(z, g), dtype=np.int64)
    return coordinate_gaps(all_coords(g), site[None, :], g).sum(axis=1)


@lru_cache(maxsize=32)
def origin_distances(g: TorusGeometry) -> np.ndarray:
    dist = distances_from(g.origin, g)
    dist.setflags(write=False)
    return dist


def ball_indices(z: Sequence[int], n: int, g: TorusGeometry) -> np.ndarray:
    """B(z, n) 的线性下标，升序（即字典序）"""
    if n < 0:
        raise ParameterError(f"球半径必须非负: n={n}")
    return np.flatnonzero(distances_from(z, g) <= n)


def ball(z: Sequence[int], n: int, g: TorusGeometry) -> List[Site]:
    """B(z, n) = {y : |y − z| ≤ n}，字典序"""
    coords = all_coords(g)
    return [tuple(int(c) for c in coords[i]) for i in ball_indices(z, n, g)]


def neighbors(z: Sequence[int], g: TorusGeometry) -> List[Site]:
    """z 的 2d 个最近邻，字典序"""
    coords = all_coords(g)
    table = neighbor_table(g)
    idx = sorted(set(int(i) for i in table[site_index(z, g)]))
    return [tuple(int(c) for c in coords[i]) for i in idx]


def translate(z: Sequence[int], shift: Sequence[int], g: TorusGeometry) -> Site:
    moved = wrap(np.array(z, dtype=np.int64) + np.array(shift, dtype=np.int64), g)
    return tuple(int(c) for c in moved)
