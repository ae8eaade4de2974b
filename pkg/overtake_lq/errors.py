"""
异常定义
数值库与场景运行器共用的异常层次
"""

from typing import Optional


class OvertakeError(Exception):
    """所有数值/场景异常的基类"""
    pass


# ---------------------------------------------------------------- 信号与积分

class SignalDomainError(OvertakeError, ValueError):
    """采样信号在定义区间之外求值"""

    def __init__(self, s: float, lo: float, hi: float):
        self.s, self.lo, self.hi = s, lo, hi
        super().__init__(f"采样信号求值越界: s={s!r} 不在 [{lo!r}, {hi!r}] 内")


class DivergentTailError(OvertakeError, ArithmeticError):
    """尾积分发散: 增长率不小于衰减率"""

    def __init__(self, alpha: float, mu: float, what: str = "尾积分"):
        self.alpha, self.mu = alpha, mu
        super().__init__(f"{what}发散: 增长率 α={alpha:.6g} ≥ 衰减率 μ={mu:.6g}")


class UnsupportedTailError(OvertakeError, ValueError):
    """有限范围的采样信号无法做无穷尾积分"""
    pass


class NotSquareIntegrableError(OvertakeError, ValueError):
    """控制不是平方可积的"""
    pass


class DegenerateSignalError(OvertakeError, ValueError):
    """信号在整个窗口上恒为零"""
    pass


# ---------------------------------------------------------------- 数值线性代数

class StateOverflowError(OvertakeError, OverflowError):
    """状态或矩阵指数出现非有限值"""

    def __init__(self, message: str, first_bad_time: Optional[float] = None):
        self.first_bad_time = first_bad_time
        if first_bad_time is not None:
            message = f"{message} (首个异常时刻 s={first_bad_time!r})"
        super().__init__(message)


class DegenerateSpectrumError(OvertakeError, ArithmeticError):
    """Hamilton矩阵在虚轴上有特征值，不存在镇定解"""
    pass


class RiccatiError(OvertakeError, ValueError):
    """Riccati方程输入不满足条件(如R非正定)或解未通过校验"""
    pass


class StabilizerRequiredError(OvertakeError, ValueError):
    """投影系统不稳定时必须给出镇定反馈"""
    pass


class SingularGramianError(OvertakeError, ArithmeticError):
    """可控Gram矩阵数值奇异"""
    pass


class RangeConditionError(OvertakeError, ValueError):
    """值域条件不成立 (如 Aη ∉ R(B))"""
    pass


# ---------------------------------------------------------------- 理论前提

class HypothesisViolationError(OvertakeError, ValueError):
    """标准形假设不成立 (如 A 不稳定)"""
    pass


class NotApplicableError(OvertakeError, ValueError):
    """公式在当前数据下不适用 (如非经典情形下的值函数)"""
    pass


class ContractionViolatedError(OvertakeError, ArithmeticError):
    """压缩常数 κ ≥ 1"""

    def __init__(self, kappa: float, empirical: Optional[float] = None):
        self.kappa, self.empirical = kappa, empirical
        msg = f"压缩条件不成立: κ={kappa:.6g}"
        if empirical is not None:
            msg += f", 经验算子范数={empirical:.6g}"
        super().__init__(msg)


class NumericalInconsistencyError(OvertakeError, RuntimeError):
    """迭代发散或两条计算路径不一致"""
    pass


# ---------------------------------------------------------------- 场景

class ScenarioError(OvertakeError, ValueError):
    """场景文件解析或校验失败"""

    def __init__(self, message: str, field_path: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.field_path = field_path
        self.line = line
        self.column = column
        location = ""
        if line is not None:
            location = f" (第{line}行, 第{column}列)"
        elif field_path:
            location = f" (字段: {field_path})"
        super().__init__(f"{message}{location}")
