"""
实验室异常层级
"""


class PamError(Exception):
    """所有领域异常的根类"""


class InvalidSiteError(PamError, ValueError):
    """站点坐标超出环面范围"""


class ParameterError(PamError, ValueError):
    """参数取值超出允许范围"""


class ConvergenceError(PamError, RuntimeError):
    """迭代求解器未在最大步数内收敛"""

    def __init__(self, message: str, last_residual: float = float("nan")):
        super().__init__(f"{message} (最后残差: {last_residual:.3e})")
        self.last_residual = last_residual


class SpectrumCollisionError(PamError, ArithmeticError):
    """谱参数 λ 过于接近算子的谱"""


class RegimeError(PamError, ArithmeticError):
    """路径展开不在收缩区域内"""


class StiffnessError(PamError, RuntimeError):
    """ODE 步长下溢"""


class DegenerateSpectrumError(PamError, ValueError):
    """惩罚谱中有限值少于两个"""


class SampleSizeError(PamError, ValueError):
    """样本量不足以估计所需分位数"""


class QuadratureError(PamError, RuntimeError):
    """数值积分未达到容差"""


class InputError(PamError, ValueError):
    """输入数据不一致或为空"""


class ConfigError(PamError, ValueError):
    """运行配置错误"""
