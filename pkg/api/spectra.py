"""
特征对与 Green 函数

小维数走稠密 eigh；大维数走 ARPACK 隐式重启 Lanczos（eigsh），残差不达标时回退稠密。
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh, splu

import config
from api.hamiltonian import HamiltonianSpec, Operator, RestrictedPuncturedPeak, adjacency, build_hamiltonian
from utils.errors import ConvergenceError, InputError, SpectrumCollisionError
from utils.lattice import Site, all_coords, ball_indices, indices_of, site_index
from utils.potential import PotentialField, level_set, puncture

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    argmax_indices: np.ndarray
    argmax_sites: List[Site] = field(default_factory=list)
    degenerate: bool = False

    @property
    def k(self) -> int:
        return int(self.eigenvalues.size)


def _start_vector(dimension: int) -> np.ndarray:
    # 固定初始向量：ARPACK 的内部随机种子跨调用共享
    return np.random.default_rng(dimension).uniform(0.5, 1.5, dimension)


def _residuals(op: Operator, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return np.linalg.norm(op.matrix @ vectors - vectors * values[None, :], axis=0)


def _fix_signs(vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """每列在自身 |φ| 最大处为正"""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs[None, :], idx


def _dense_top(op: Operator, k: int) -> Tuple[np.ndarray, np.ndarray]:
    dim = op.dimension
    if k >= dim:
        values, vectors = linalg.eigh(op.dense())
    else:
        values, vectors = linalg.eigh(op.dense(), subset_by_index=[dim - k, dim - 1])
    return values[::-1], vectors[:, ::-1]


def _sparse_top(op: Operator, k: int, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    values, vectors = eigsh(op.matrix, k=k, which="LA", tol=tol * 0.1, v0=_start_vector(op.dimension))
    order = np.argsort(values)[::-1]
    return values[order], vectors[:, order]


def top_k_eigenpairs(op: Operator, k: int, tol: Optional[float] = None) -> SpectralData:
    """代数最大的 k 个特征对，特征向量补零扩展到 V_t"""
    tol = config.EIG_TOL if tol is None else tol
    dim = op.dimension
    if k < 1 or k > dim:
        raise InputError(f"k 必须在 [1, {dim}] 内: k={k}")

    use_dense = dim < config.DENSE_CUTOFF or k >= dim - 1
    values = vectors = None
    if not use_dense:
        try:
            values, vectors = _sparse_top(op, k, tol)
        except ArpackNoConvergence as e:
            logger.warning(f"⚠️ Lanczos 未收敛 ({op.label}, 维数 {dim}): {e}")
        if values is not None:
            res = _residuals(op, values, vectors)
            if np.any(res > tol * np.maximum(1.0, np.abs(values))):
                logger.warning(f"⚠️ Lanczos 残差超限 ({op.label}): {res.max():.3e}")
                values = None
        if values is None:
            if dim > config.DENSE_FALLBACK_MAX:
                raise ConvergenceError(f"{op.label} 特征求解失败，维数 {dim} 超出稠密回退上限",
                                       float("nan") if vectors is None else float(res.max()))
            use_dense = True

    if use_dense:
        values, vectors = _dense_top(op, k)

    vectors, local_argmax = _fix_signs(vectors)
    res = _residuals(op, values, vectors)
    bound = tol * np.maximum(1.0, np.abs(values))
    if np.any(res > bound):
        raise ConvergenceError(f"{op.label} 特征对残差超出容差 {tol:.1e}", float(res.max()))

    gaps = -np.diff(values)
    degenerate = bool(np.any(gaps < DEGENERACY_TOL * max(1.0, abs(values[0]))))
    if degenerate:
        logger.debug(f"⚠️ {op.label} 存在近简并特征值")

    full = op.embed(vectors)
    argmax_indices = op.domain[local_argmax]
    coords = all_coords(op.geometry)
    return SpectralData(
        eigenvalues=values,
        eigenvectors=full,
        residuals=res,
        argmax_indices=argmax_indices,
        argmax_sites=[tuple(int(c) for c in coords[i]) for i in argmax_indices],
        degenerate=degenerate,
    )


def principal_eigenpair(op: Operator, tol: Optional[float] = None) -> Tuple[float, np.ndarray]:
    """主特征对 (λ, φ)，φ 在 V_t 上补零"""
    if op.matrix.count_nonzero() == 0:
        raise InputError(f"{op.label} 为零算子")
    sd = top_k_eigenpairs(op, 1, tol)
    return float(sd.eigenvalues[0]), sd.eigenvectors[:, 0]


def greens_function(op: Operator, lam: float, y: Sequence[int]) -> np.ndarray:
    """G(λ; ·, y)，满足 (λ − H) G(λ; ·, y) = 1_y；返回 V_t 上的向量"""
    y_index = site_index(y, op.geometry)
    local = np.flatnonzero(op.domain == y_index)
    if local.size == 0:
        raise InputError(f"站点 {tuple(y)} 不在 {op.label} 的活动区域内")
    rhs = np.zeros(op.dimension)
    rhs[local[0]] = 1.0
    system = (lam * sparse.identity(op.dimension, format="csc") - op.matrix).tocsc()
    try:
        solution = splu(system).solve(rhs)
    except RuntimeError as e:
        raise SpectrumCollisionError(f"λ={lam} 处 (λ−H) 奇异: {e}")
    residual = np.linalg.norm(system @ solution - rhs)
    if not np.all(np.isfinite(solution)) or residual > 1e-10:
        raise SpectrumCollisionError(f"λ={lam} 过于接近 {op.label} 的谱 (残差 {residual:.3e})")
    return op.embed(solution)


def greens_matrix(op: Operator, lam: float) -> np.ndarray:
    """小算子的完整 Green 矩阵（区域坐标）"""
    system = lam * np.eye(op.dimension) - op.dense()
    try:
        return linalg.inv(system)
    except linalg.LinAlgError as e:
        raise SpectrumCollisionError(f"λ={lam} 处 (λ−H) 奇异: {e}")


def local_principal_eigenvalue(field: PotentialField, z: Sequence[int], n: int, L: float) -> float:
    """λ̃^{(n)}(z)：H̃_n^{(z)} 的主特征值"""
    op = build_hamiltonian(HamiltonianSpec(field, RestrictedPuncturedPeak(L, tuple(z), n)))
    if op.dimension == 1:
        return float(op.potential[0])
    return float(np.linalg.eigvalsh(op.dense())[-1])


def local_principal_eigenvalues(field: PotentialField, n: int, L: float,
                                sites: Optional[np.ndarray] = None) -> np.ndarray:
    """批量 λ̃^{(n)}；sites 为线性下标（缺省为全部站点）"""
    g = field.geometry
    sites = np.arange(g.size) if sites is None else np.asarray(sites, dtype=np.int64)
    if n == 0:
        return field.values[sites].copy()

    if g.side <= 2 * n + 1:
        # 球自环绕，逐点构建
        coords = all_coords(g)
        return np.array([local_principal_eigenvalue(field, coords[i], n, L) for i in sites])

    ball = ball_indices(g.origin, n, g)
    offsets = all_coords(g)[ball]
    centre = int(np.flatnonzero((offsets == 0).all(axis=1))[0])
    block = adjacency(ball, g).toarray()
    tilde = puncture(field, level_set(field, L)).values

    result = np.empty(sites.size)
    coords = all_coords(g)
    chunk = config.LOCAL_EIG_CHUNK
    for start in range(0, sites.size, chunk):
        part = sites[start:start + chunk]
        members = indices_of((coords[part][:, None, :] + offsets[None, :, :]).reshape(-1, g.d), g)
        potential = tilde[members].reshape(part.size, offsets.shape[0])
        potential[:, centre] = field.values[part]
        stack = np.broadcast_to(block, (part.size,) + block.shape).copy()
        diag = np.arange(block.shape[0])
        stack[:, diag, diag] = potential
        result[start:start + part.size] = np.linalg.eigvalsh(stack)[:, -1]
    return result
