import numpy as np
import pytest

from core.assembly import Constants, assemble_form
from core.grid import build_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_grid():
    return build_grid(0.0, 1.0, 64)


@pytest.fixture
def small_grid():
    return build_grid(0.0, 1.0, 16)


@pytest.fixture(params=[1.5, 2.0, 3.0], ids=["p1.5", "p2", "p3"])
def form_p(request, small_grid):
    """p ごとに組み立てた小さな双線形形式"""
    return assemble_form(small_grid, Constants(p=request.param))


@pytest.fixture
def form_p2(unit_grid):
    return assemble_form(unit_grid, Constants())


@pytest.fixture
def isolated_settings(tmp_path, monkeypatch):
    """ログと出力先を一時ディレクトリに向ける"""
    from config.settings import settings

    monkeypatch.setattr(settings, "LOG_FILE", str(tmp_path / "logs" / "log.txt"))
    monkeypatch.setattr(settings, "OUTPUT_DIR", str(tmp_path / "runs"))
    return settings
