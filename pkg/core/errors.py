"""
Exception types shared by the numerical modules.
"""

from typing import Any


class GridMismatchError(ValueError):
    """関数と双線形形式のグリッドが一致しない場合のエラー"""


class ConditionError(ValueError):
    """非線形項が (g1)-(g3) を満たさない場合のエラー"""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class LinkingGeometryError(ValueError):
    """リンキング幾何の構成に失敗した場合のエラー"""

    def __init__(self, message: str, sample_index: int | None = None, values: Any = None):
        super().__init__(message)
        self.sample_index = sample_index
        self.values = values


class SolverError(RuntimeError):
    """反復ソルバーが収束しなかった場合のエラー（最良の反復値を保持）"""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class RadiiSelectionError(SolverError):
    """半径 rho, R の選択に失敗した場合のエラー"""
