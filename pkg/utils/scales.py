"""
确定性尺度函数：R_t、L_{t,a}、a_t、d_t、r_t、ρ、j、q(·)、辅助尺度与 δ_t
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional

from utils.errors import ParameterError

logger = logging.getLogger(__name__)

# 需要 log log t > 0
T_MIN = math.exp(math.e)

AUX_DEFAULTS = {
    "eps_dprime": 0.10,
    "eps": 0.15,
    "eps_prime": 0.20,
    "theta_prime": 0.30,
}

OVERRIDABLE = {"kappa_t", "f_t", "h_t", "e_t", "g_t", "eta"} | set(AUX_DEFAULTS)


@dataclass(frozen=True)
class ScaleSet:
    t: float
    d: int
    gamma: float
    theta: float
    R_t: float
    side_formula: int
    side: int
    side_overridden: bool
    V_size: int
    L_t: float
    a_t: float
    d_t: float
    r_t: float
    rho: int
    j: int
    kappa_t: float
    f_t: float
    h_t: float
    e_t: float
    g_t: float
    eta: float
    eps_dprime: float
    eps: float
    eps_prime: float
    theta_prime: float

    @property
    def loglog_t(self) -> float:
        return math.log(math.log(self.t))

    @property
    def log_V(self) -> float:
        return self.d * math.log(self.side)

    def level(self, a: float) -> float:
        """L_{t,a}"""
        return macrobox_level(self.V_size, a, self.gamma)

    def penalty(self, distance: float) -> float:
        """|z| log log t / (γ t)"""
        return distance * self.loglog_t / (self.gamma * self.t)

    def with_t(self, t: float, overrides: Optional[Dict] = None) -> "ScaleSet":
        return compute_scales(t, self.d, self.gamma, self.theta, overrides,
                              side=self.side if self.side_overridden else None)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


def rho_of(gamma: float) -> int:
    """ρ = ⌊(γ−1)/2⌋⁺"""
    return max(0, math.floor(round((gamma - 1.0) / 2.0, 12)))


def j_of(gamma: float) -> int:
    """满足 2j+1 > γ−1 的最小非负整数 j"""
    return max(0, math.floor(round((gamma - 2.0) / 2.0, 12)) + 1)


def q_exponent(x: int, gamma: float) -> float:
    """q(x) = (1 − 2x/(γ−1))⁺，约定 0/0 := 0"""
    if not gamma > 0:
        raise ParameterError(f"γ 必须为正: gamma={gamma}")
    if x < 0:
        raise ParameterError(f"距离必须非负: x={x}")
    if x == 0:
        return 1.0
    if gamma <= 1.0:
        return 0.0
    return max(0.0, 1.0 - 2.0 * x / (gamma - 1.0))


def macrobox_level(V_size: float, a: float, gamma: float) -> float:
    """L_{t,a} = ((1−a) log |V_t|)^{1/γ}"""
    if V_size < 2:
        raise ParameterError(f"|V_t| 必须 ≥ 2: {V_size}")
    if a > 1:
        raise ParameterError(f"a 必须 ≤ 1: a={a}")
    return ((1.0 - a) * math.log(V_size)) ** (1.0 / gamma)


def delta_t(scales: ScaleSet, separation: float) -> float:
    """δ_t = |V|^{(1−2θ′)/d} / (log(1 + (L_{t,ε′}−L_t)/2d) · r(Π))，分离为 ∞ 时取 0"""
    if math.isinf(separation):
        return 0.0
    gap = scales.level(scales.eps_prime) - scales.L_t
    denominator = math.log1p(gap / (2 * scales.d)) * separation
    log_numerator = (1.0 - 2.0 * scales.theta_prime) / scales.d * scales.log_V
    return math.exp(log_numerator) / denominator


def _auxiliary(t: float) -> Dict[str, float]:
    ll = math.log(math.log(t))
    return {
        "kappa_t": ll ** -1.0,
        "f_t": ll ** -0.5,
        "h_t": ll ** -0.25,
        "e_t": ll ** -0.125,
        "g_t": max(ll ** 0.0625, 1.05),
    }


def compute_scales(t: float, d: int, gamma: float, theta: float = 0.25,
                   overrides: Optional[Dict] = None, side: Optional[int] = None) -> ScaleSet:
    """计算全部尺度；side 给定时覆盖公式值并记录"""
    if not t >= T_MIN * (1 - 1e-15):
        raise ParameterError(f"t 必须 ≥ e^e ≈ {T_MIN:.4f}: t={t}")
    if not gamma > 0:
        raise ParameterError(f"γ 必须为正: gamma={gamma}")
    if int(d) != d or d < 1:
        raise ParameterError(f"维数必须为正整数: d={d}")
    if not 0 < theta < 0.5:
        raise ParameterError(f"θ 必须在 (0, 1/2) 内: theta={theta}")

    overrides = dict(overrides or {})
    if "side" in overrides and side is None:
        side = overrides.pop("side")
    unknown = set(overrides) - OVERRIDABLE
    if unknown:
        raise ParameterError(f"未知的尺度覆盖项: {sorted(unknown)}")

    log_t = math.log(t)
    loglog_t = math.log(log_t)
    R_t = t * log_t ** (1.0 / gamma)
    side_formula = 2 * int(math.floor(R_t)) + 1
    if side is not None:
        if int(side) != side or side < 3 or side % 2 == 0:
            raise ParameterError(f"边长覆盖必须为 ≥3 的奇数: side={side}")
        side_used = int(side)
    else:
        side_used = side_formula
    V_size = side_used ** int(d)

    rho = rho_of(gamma)
    params = {**AUX_DEFAULTS, **_auxiliary(t), "eta": (2 * rho - gamma + 3) / 2.0}
    params.update(overrides)

    chain = [params["eps_dprime"], params["eps"], params["eps_prime"], theta, params["theta_prime"]]
    if not (0 < chain[0] and all(a < b for a, b in zip(chain, chain[1:])) and chain[-1] < 0.5):
        raise ParameterError(f"常数链 0<ε″<ε<ε′<θ<θ′<1/2 不成立: {chain}")
    for name in ("kappa_t", "f_t", "h_t", "e_t"):
        if not 0 < params[name] < 1:
            raise ParameterError(f"{name} 必须在 (0,1) 内: {params[name]}")
    if not params["g_t"] > 1:
        raise ParameterError(f"g_t 必须 > 1: {params['g_t']}")

    d_log_t = d * log_t
    return ScaleSet(
        t=float(t), d=int(d), gamma=float(gamma), theta=float(theta),
        R_t=R_t, side_formula=side_formula, side=side_used, side_overridden=side is not None,
        V_size=V_size,
        L_t=macrobox_level(V_size, theta, gamma),
        a_t=d_log_t ** (1.0 / gamma),
        d_t=d_log_t ** (1.0 / gamma - 1.0) / gamma,
        r_t=t * d_log_t ** (1.0 / gamma - 1.0) / loglog_t,
        rho=rho,
        j=j_of(gamma),
        kappa_t=params["kappa_t"], f_t=params["f_t"], h_t=params["h_t"],
        e_t=params["e_t"], g_t=params["g_t"], eta=params["eta"],
        eps_dprime=params["eps_dprime"], eps=params["eps"],
        eps_prime=params["eps_prime"], theta_prime=params["theta_prime"],
    )


def scales_table(t_grid: Iterable[float], d: int, gamma: float, theta: float = 0.25,
                 overrides: Optional[Dict] = None, side: Optional[int] = None) -> List[ScaleSet]:
    return [compute_scales(t, d, gamma, theta, overrides, side) for t in t_grid]
