"""
统计小工具：经验分布、KS 距离、bootstrap 置信区间
"""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy import stats

from utils.errors import InputError

logger = logging.getLogger(__name__)

BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_LEVEL = 0.95


def _as_sample(series: Sequence[float], name: str = "样本") -> np.ndarray:
    sample = np.asarray(series, dtype=np.float64).ravel()
    if sample.size == 0:
        raise InputError(f"{name}为空")
    return sample


@dataclass(frozen=True, eq=False)
class EmpiricalCDF:
    support: np.ndarray

    def __call__(self, x: Union[float, np.ndarray]) -> np.ndarray:
        return np.searchsorted(self.support, x, side="right") / self.support.size

    @property
    def size(self) -> int:
        return int(self.support.size)


def empirical_cdf(series: Sequence[float]) -> EmpiricalCDF:
    return EmpiricalCDF(np.sort(_as_sample(series)))


def ks_distance(series: Sequence[float], reference: Union[str, Callable, Sequence[float]]) -> float:
    """sup |F̂ − F|；reference 为分布名 / CDF 可调用对象 / 另一组样本"""
    sample = _as_sample(series)
    if isinstance(reference, str) or callable(reference):
        return float(stats.kstest(sample, reference).statistic)
    return float(stats.ks_2samp(sample, _as_sample(reference, "参照样本")).statistic)


def ks_critical_value(n: int, alpha: float = 0.05) -> float:
    """单样本 KS 的渐近临界值，α=5% 时为 1.36/√n"""
    if n < 1:
        raise InputError(f"样本量必须 ≥ 1: {n}")
    return float(stats.kstwobign.isf(alpha) / np.sqrt(n))


@dataclass(frozen=True)
class ConfidenceInterval:
    low: float
    high: float
    estimate: float


def bootstrap_ci(series: Sequence[float], statistic: Callable = np.mean, seed: int = 0,
                 resamples: int = BOOTSTRAP_RESAMPLES,
                 level: float = BOOTSTRAP_LEVEL) -> ConfidenceInterval:
    """percentile bootstrap 置信区间"""
    sample = _as_sample(series)
    estimate = float(statistic(sample))
    if sample.size == 1 or np.all(sample == sample[0]):
        return ConfidenceInterval(estimate, estimate, estimate)
    result = stats.bootstrap((sample,), statistic, n_resamples=resamples, confidence_level=level,
                             method="percentile", vectorized=False,
                             random_state=np.random.default_rng(seed))
    ci = result.confidence_interval
    return ConfidenceInterval(float(ci.low), float(ci.high), estimate)


def quartiles(series: Sequence[float]) -> dict:
    sample = _as_sample(series)
    q1, median, q3 = np.quantile(sample, [0.25, 0.5, 0.75])
    return {"q1": float(q1), "median": float(median), "q3": float(q3)}


def median_stderr(series: Sequence[float]) -> float:
    """中位数的渐近标准误 1.2533·σ/√n"""
    sample = _as_sample(series)
    if sample.size < 2:
        return 0.0
    return float(1.2533 * sample.std(ddof=1) / np.sqrt(sample.size))


def laplace_cdf(x):
    """密度 ½e^{−|x|} 的分布函数"""
    return stats.laplace.cdf(x)
