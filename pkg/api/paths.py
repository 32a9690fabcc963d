"""
受限路径族 Γ*_k(z,n) 的枚举，以及局部主特征值 / Green 函数的路径展开

λ = ξ(z) + Σ_{k≥2} Σ_{Γ*_k(z,n)} Π_{0<i<k} 1/(λ − ξ̃(y_i))
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from api.hamiltonian import adjacency
from utils.errors import ParameterError, RegimeError
from utils.lattice import (
    Site,
    TorusGeometry,
    all_coords,
    ball_indices,
    indices_of,
    neighbor_table,
    origin_distances,
    site_index,
    validate_site,
)
from utils.potential import PotentialField, level_set, puncture

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathFamily:
    base: Site
    n: int
    k: int
    paths: List[Tuple[Site, ...]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.paths)


def _canonical_geometry(g: TorusGeometry, n: int) -> TorusGeometry:
    # 球不自环绕时路径族只依赖 (d, n, k)
    if g.side > 2 * n + 1:
        return TorusGeometry(g.d, 2 * n + 3)
    return g


@lru_cache(maxsize=256)
def _relative_paths(g: TorusGeometry, n: int, k: int) -> np.ndarray:
    """以原点为基点的 Γ*_k，返回 (路径数, k+1) 的线性下标数组，字典序"""
    table = np.sort(neighbor_table(g), axis=1)
    dist = origin_distances(g)
    origin = site_index(g.origin, g)
    found: List[List[int]] = []

    def walk(path: List[int], remaining: int):
        current = path[-1]
        for nxt in table[current]:
            nxt = int(nxt)
            if remaining == 1:
                if nxt == origin:
                    found.append(path + [nxt])
                continue
            if nxt == origin or dist[nxt] > n or dist[nxt] > remaining - 1:
                continue
            walk(path + [nxt], remaining - 1)

    if n >= 1:
        walk([origin], k)
    result = np.array(found, dtype=np.int64).reshape(len(found), k + 1)
    result.setflags(write=False)
    return result


def _family_indices(z: Sequence[int], n: int, k: int, g: TorusGeometry) -> np.ndarray:
    """基点 z 的 Γ*_k 的线性下标 (路径数, k+1)"""
    canon = _canonical_geometry(g, n)
    relative = _relative_paths(canon, n, k)
    if relative.size == 0:
        return relative
    coords = all_coords(canon)[relative] + np.asarray(z, dtype=np.int64)
    return indices_of(coords.reshape(-1, g.d), g).reshape(relative.shape)


def enumerate_paths(z: Sequence[int], n: int, k: int, g: TorusGeometry) -> PathFamily:
    """起止于 z、步进为最近邻、留在 B(z,n) 内、内部不经过 z 的长 k 路径"""
    if k < 2:
        raise ParameterError(f"路径长度必须 ≥ 2: k={k}")
    base = validate_site(z, g)
    idx = _family_indices(base, n, k, g)
    coords = all_coords(g)
    paths = [tuple(tuple(int(c) for c in coords[i]) for i in row) for row in idx]
    return PathFamily(base=base, n=n, k=k, paths=paths)


def _interior_data(field: PotentialField, z: Sequence[int], n: int, L: float):
    g = field.geometry
    z = validate_site(z, g)
    tilde = puncture(field, level_set(field, L), keep=z).values
    zi = site_index(z, g)
    interior = np.setdiff1d(ball_indices(z, n, g), [zi])
    return g, z, zi, tilde, interior


def lambda_fixed_point(field: PotentialField, z: Sequence[int], n: int, L: float,
                       tol: float = 1e-12, max_iter: int = 500,
                       max_len: Optional[int] = None, margin: float = 1.0,
                       trace: Optional[list] = None) -> float:
    """从 λ₀ = ξ(z) 迭代路径展开的不动点；max_len=None 为非截断和"""
    g, z, zi, tilde, interior = _interior_data(field, z, n, L)
    xi_z = float(field.values[zi])
    if trace is not None:
        trace.append(xi_z)
    if n == 0 or interior.size == 0:
        return xi_z

    top = float(tilde[interior].max())
    if xi_z - top <= margin:
        raise RegimeError(f"ξ(z)={xi_z:.6g} 未以裕量 {margin} 高于球内最大值 {top:.6g}")

    if max_len is None:
        series = _untruncated_series(g, zi, tilde, interior)
    else:
        series = _truncated_series(g, z, n, tilde, max_len)

    lam = xi_z
    previous_step = None
    for _ in range(max_iter):
        new = xi_z + series(lam)
        step = new - lam
        if previous_step is not None and step * previous_step < 0 and abs(step) >= abs(previous_step):
            new = lam + 0.5 * step
            step = new - lam
        if not (xi_z < new <= xi_z + 2 * g.d):
            raise RegimeError(f"迭代值 {new:.12g} 离开区间 ({xi_z:.6g}, {xi_z + 2 * g.d:.6g}]")
        if trace is not None:
            trace.append(new)
        if abs(step) <= tol:
            return new
        lam = new
        previous_step = step
    raise RegimeError(f"不动点迭代 {max_iter} 步未收缩，最后步长 {abs(step):.3e}")


def _truncated_series(g: TorusGeometry, z: Site, n: int, tilde: np.ndarray, max_len: int):
    families = []
    for k in range(2, max_len + 1, 2):
        idx = _family_indices(z, n, k, g)
        if idx.size:
            families.append(idx[:, 1:-1])

    def series(lam: float) -> float:
        total = 0.0
        for interior in families:
            gaps = lam - tilde[interior]
            if np.any(gaps <= 0):
                raise RegimeError(f"λ={lam:.6g} 不高于路径上的势")
            total += float(np.prod(1.0 / gaps, axis=1).sum())
        return total

    return series


def _untruncated_series(g: TorusGeometry, zi: int, tilde: np.ndarray, interior: np.ndarray):
    """Σ_{y,y'∼z} G_D(λ; y, y')，D = B(z,n)∖{z}"""
    block = adjacency(interior, g).toarray() + np.diag(tilde[interior])
    spectral_top = float(np.linalg.eigvalsh(block)[-1])
    local = {int(s): i for i, s in enumerate(interior)}
    weights = np.zeros(interior.size)
    for y in neighbor_table(g)[zi]:
        if int(y) in local:
            weights[local[int(y)]] += 1.0

    def series(lam: float) -> float:
        if lam <= spectral_top:
            raise RegimeError(f"λ={lam:.6g} 不高于 B∖{{z}} 上的谱顶 {spectral_top:.6g}")
        solution = linalg.solve(lam * np.eye(interior.size) - block, weights, assume_a="pos")
        return float(weights @ solution)

    return series


def truncation_gap(field: PotentialField, z: Sequence[int], n: int, L: float, j: int) -> dict:
    """2j 截断、非截断与特征求解器三者的差，作为数据返回"""
    from api.spectra import local_principal_eigenvalue

    truncated = lambda_fixed_point(field, z, n, L, max_len=2 * j)
    untruncated = lambda_fixed_point(field, z, n, L)
    eigen = local_principal_eigenvalue(field, z, n, L)
    return {
        "truncated": truncated,
        "untruncated": untruncated,
        "eigensolver": eigen,
        "gap": abs(truncated - eigen),
        "bound_base": float(field.values[site_index(z, field.geometry)]) - L,
    }


def greens_path_partial_sum(zeta: Union[PotentialField, np.ndarray], lam: float,
                            x: Sequence[int], y: Sequence[int], max_len: int,
                            g: Optional[TorusGeometry] = None) -> float:
    """长度 ≤ max_len 的全部 x→y 最近邻路径之和，每个经过的顶点（含端点）贡献 1/(λ−ζ)"""
    if isinstance(zeta, PotentialField):
        g = zeta.geometry
        values = zeta.values
    else:
        values = np.asarray(zeta, dtype=np.float64)
    if g is None:
        raise ParameterError("数组形式的 ζ 需要同时给出几何")
    if not lam > float(values.max()) + 2 * g.d:
        raise RegimeError(f"λ={lam:.6g} 不满足 λ > max ζ + 2d = {values.max() + 2 * g.d:.6g}")
    if max_len < 0:
        raise ParameterError(f"max_len 必须非负: {max_len}")

    A = adjacency(np.arange(g.size), g)
    R = 1.0 / (lam - values)
    xi = site_index(x, g)
    v = np.zeros(g.size)
    v[site_index(y, g)] = R[site_index(y, g)]
    total = float(v[xi])
    for _ in range(max_len):
        v = R * (A @ v)
        total += float(v[xi])
    return total
