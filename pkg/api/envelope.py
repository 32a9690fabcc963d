"""
特征函数衰减包络及其上下界形式
"""

import math
from dataclasses import dataclass

import numpy as np

from utils.errors import RegimeError
from utils.scales import ScaleSet, delta_t


@dataclass(frozen=True)
class DecayEnvelope:
    scales: ScaleSet
    separation: float
    delta_t: float

    @classmethod
    def for_separation(cls, scales: ScaleSet, separation: float) -> "DecayEnvelope":
        return cls(scales, separation, delta_t(scales, separation))

    @property
    def L(self) -> float:
        return self.scales.L_t

    @property
    def two_d(self) -> int:
        return 2 * self.scales.d

    def A(self, lam: float) -> float:
        """A(λ) = log((λ − L_t)/2d)，λ > L_t + 2d 时为正"""
        if not lam > self.L:
            raise RegimeError(f"A(λ) 需要 λ > L_t: λ={lam:.6g}, L_t={self.L:.6g}")
        return math.log((lam - self.L) / self.two_d)

    def b(self, lam: float) -> float:
        """b(λ) = (λ − L_t)² / (λ − L_t − 2d)"""
        if not lam > self.L + self.two_d:
            raise RegimeError(f"b(λ) 需要 λ > L_t + 2d: λ={lam:.6g}")
        gap = lam - self.L
        return gap * gap / (gap - self.two_d)

    def B(self, lam: float, xi_u: float, g_uu: float) -> float:
        """B(λ,u) = b(λ) λ⁻² |1/ξ(u) − G̃(λ;u,u)|⁻¹"""
        return self.b(lam) / (lam * lam * abs(1.0 / xi_u - g_uu))

    @property
    def prefactor(self) -> float:
        """4(1 + 2d/(L_{t,ε′} − L_t))"""
        return 4.0 * (1.0 + self.two_d / (self.scales.level(self.scales.eps_prime) - self.L))

    def eigenvector_bound(self, lam: float, distances: np.ndarray) -> np.ndarray:
        """|φ_i(z)| ≤ 4(1+2d/(L_{t,ε′}−L_t))·exp(−(1−δ_t)A(λ_i)|z−z_i|)"""
        rate = (1.0 - self.delta_t) * self.A(lam)
        return self.prefactor * np.exp(-rate * np.asarray(distances, dtype=np.float64))

    def decay_log_upper(self, distances: np.ndarray) -> np.ndarray:
        """log|φ_i(z)| ≤ −|z−z_i|(1−f_t) log log t/γ"""
        s = self.scales
        return -np.asarray(distances, dtype=np.float64) * (1.0 - s.f_t) * s.loglog_t / s.gamma

    def decay_log_lower(self, distances: np.ndarray) -> np.ndarray:
        """log|φ_i(x)| > −|z_i−x|(1+f_t) log log t/γ"""
        s = self.scales
        return -np.asarray(distances, dtype=np.float64) * (1.0 + s.f_t) * s.loglog_t / s.gamma

    def origin_log_upper(self, distance: float, c: float) -> float:
        """log|φ_i(0)| ≤ −|z_i| log log t/γ + c|z_i|"""
        s = self.scales
        return -distance * s.loglog_t / s.gamma + c * distance

    def origin_log_lower_form(self, distance: float) -> float:
        """log|φ(0)| > −|z| log log t/γ + o(t d_t e_t) 的主项"""
        s = self.scales
        return -distance * s.loglog_t / s.gamma
