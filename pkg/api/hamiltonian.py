"""
哈密顿量的各种变体：H = Δ + ξ（Δ 无 −2d 对角项）及其穿孔 / 单峰 / 球内 Dirichlet 限制
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import sparse

from utils.lattice import Site, TorusGeometry, ball_indices, neighbor_table, site_index, validate_site
from utils.potential import PotentialField, level_set, puncture

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Full:
    """H = Δ + ξ"""


@dataclass(frozen=True)
class Punctured:
    """H̃ = Δ + ξ̃，ξ̃ 在 Π^{(L)} 上为零"""
    L: float


@dataclass(frozen=True)
class SinglePeak:
    """H̃^{(z)} = H̃ + ξ(z)1_z；z ∉ Π 时即 H̃"""
    L: float
    z: Site


@dataclass(frozen=True)
class SinglePunctured:
    """H^{(z)} = H − ξ(z)1_z"""
    z: Site


@dataclass(frozen=True)
class RestrictedPuncturedPeak:
    """H̃_n^{(z)}：球 B(z,n) 上的 Dirichlet 限制"""
    L: float
    z: Site
    n: int


Variant = Union[Full, Punctured, SinglePeak, SinglePunctured, RestrictedPuncturedPeak]


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    field: PotentialField
    variant: Variant

    @property
    def geometry(self) -> TorusGeometry:
        return self.field.geometry


@dataclass(frozen=True, eq=False)
class Operator:
    """活动区域上的对称稀疏矩阵；domain 为区域内站点在 V_t 中的线性下标（升序）"""
    matrix: sparse.csr_matrix
    domain: np.ndarray
    potential: np.ndarray
    geometry: TorusGeometry
    label: str

    @property
    def dimension(self) -> int:
        return int(self.domain.size)

    def embed(self, vectors: np.ndarray) -> np.ndarray:
        """把区域上的向量补零扩展到整个 V_t"""
        vectors = np.asarray(vectors)
        if self.domain.size == self.geometry.size:
            return vectors
        shape = (self.geometry.size,) + vectors.shape[1:]
        full = np.zeros(shape, dtype=vectors.dtype)
        full[self.domain] = vectors
        return full

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def adjacency(domain: np.ndarray, g: TorusGeometry) -> sparse.csr_matrix:
    """区域内环面邻接矩阵（每条边权重 1）"""
    local = np.full(g.size, -1, dtype=np.int64)
    local[domain] = np.arange(domain.size)
    cols_global = neighbor_table(g)[domain]
    cols = local[cols_global]
    rows = np.repeat(np.arange(domain.size), cols_global.shape[1]).reshape(cols.shape)
    inside = cols >= 0
    data = np.ones(int(inside.sum()))
    return sparse.csr_matrix((data, (rows[inside], cols[inside])), shape=(domain.size, domain.size))


def effective_potential(spec: HamiltonianSpec) -> np.ndarray:
    """按变体给出全 V_t 上的势（限制变体在球外的值由 domain 截断）"""
    f = spec.field
    variant = spec.variant
    if isinstance(variant, Full):
        return f.values
    if isinstance(variant, Punctured):
        return puncture(f, level_set(f, variant.L)).values
    if isinstance(variant, (SinglePeak, RestrictedPuncturedPeak)):
        return puncture(f, level_set(f, variant.L), keep=variant.z).values
    if isinstance(variant, SinglePunctured):
        values = f.values.copy()
        values[site_index(variant.z, f.geometry)] = 0.0
        return values
    raise TypeError(f"未知的哈密顿量变体: {variant!r}")


def build_hamiltonian(spec: HamiltonianSpec) -> Operator:
    g = spec.geometry
    variant = spec.variant
    z: Optional[Sequence[int]] = getattr(variant, "z", None)
    if z is not None:
        validate_site(z, g)

    if isinstance(variant, RestrictedPuncturedPeak):
        domain = ball_indices(variant.z, variant.n, g)
    else:
        domain = np.arange(g.size)

    potential = np.asarray(effective_potential(spec))[domain]
    matrix = (adjacency(domain, g) + sparse.diags(potential)).tocsr()
    label = type(variant).__name__
    logger.debug(f"🔄 构建 {label}: 维数 {domain.size}")
    return Operator(matrix=matrix, domain=domain, potential=potential, geometry=g, label=label)


def full_hamiltonian(field: PotentialField) -> Operator:
    return build_hamiltonian(HamiltonianSpec(field, Full()))
