"""
Logging utilities for the numerical runs.
"""

import logging
import sys
from pathlib import Path
from typing import Optional


class DualLogger:
    """標準出力とファイルの両方にログを出力するクラス（core パッケージ全体のロガー）"""

    def __init__(
        self,
        log_file: str | Path = "log.txt",
        level: int | str = logging.INFO,
        quiet: bool = False,
    ):
        """
        Args:
            log_file: ログファイルのパス
            level: ログレベル
            quiet: True ならコンソールには WARNING 以上のみ出力
        """
        self.log_file = Path(log_file)
        # core.* の各モジュールのロガーはここに伝播する
        self.logger = logging.getLogger("core")
        self.logger.setLevel(level)

        # 既存のハンドラーをクリア
        for handler in list(self.logger.handlers):
            handler.close()
        self.logger.handlers.clear()

        formatter = logging.Formatter(
            "%(asctime)s - %(levelname)s - %(message)s", datefmt="%Y-%m-%d %H:%M:%S"
        )

        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(logging.WARNING if quiet else level)
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

        self.log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(self.log_file, encoding="utf-8")
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        self.logger.addHandler(file_handler)

        # プロパゲーションを無効にして重複を防ぐ
        self.logger.propagate = False

    def info(self, message: str):
        """情報レベルのログを出力"""
        self.logger.info(message)

    def warning(self, message: str):
        """警告レベルのログを出力"""
        self.logger.warning(message)

    def error(self, message: str):
        """エラーレベルのログを出力"""
        self.logger.error(message)

    def debug(self, message: str):
        """デバッグレベルのログを出力"""
        self.logger.debug(message)

    def close(self):
        """ハンドラーを閉じる"""
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)

    def log_run_start(self, command: str, seed: int, out_dir: Path):
        """実行開始のログ"""
        self.info("=" * 60)
        self.info(f"🚀 {command} を開始します")
        self.info(f"シード: {seed}")
        self.info(f"出力先: {out_dir}")
        self.info("=" * 60)

    def log_eigenpair(self, name: str, pair: dict):
        """固有値のログ"""
        label = f" [{pair['label']}]" if pair.get("label") else ""
        self.info(
            f"✅ {name} = {pair['value']:.12g}{label} "
            f"(残差: {pair['residual']:.3e}, 反復: {pair['iterations']:,})"
        )

    def log_spectrum(self, values: list[float], head: int = 5):
        """スペクトルのログ"""
        self.info(f"固有値数: {len(values):,}")
        for k, value in enumerate(values[:head], start=1):
            self.info(f"  - lambda_{k}: {value:.12g}")

    def log_condition_report(self, report: dict):
        """成長条件の検査結果のログ"""
        mark = "✅" if report["passed"] else "❌"
        self.info(f"{mark} 成長条件 (g1)-(g3) の検査結果:")
        self.info(f"  - g1 極限: {report['g1_limit']} ({'OK' if report['g1_passed'] else 'NG'})")
        self.info(f"  - g2 極限: {report['g2_limit']} ({'OK' if report['g2_passed'] else 'NG'})")
        if report["g3_feasible"]:
            self.info(f"  - g3: beta={report['g3_beta']:.4g}, t0={report['g3_t0']:.4g}")
        else:
            self.info("  - g3: 実行不能")

    def log_solver_report(self, report: dict):
        """臨界点ソルバーの結果のログ"""
        self.info(f"✅ {report['mode']}: 臨界値 c = {report['critical_value']:.12g}")
        self.info(
            f"  - 残差: {report['residual']:.3e} | L^p ノルム: {report['lp_norm']:.6g} | "
            f"反復: {report['iterations']:,}"
        )
        self.info(f"  - rho = {report['rho_used']:.3e}, R = {report['R_used']:.3e}")

    def log_inequality_report(self, report: dict):
        """不等式検査の結果のログ"""
        mark = "✅" if report["passed"] else "❌"
        drift = report["refinement_drift"]
        drift_text = f"{drift:.2%}" if drift is not None else "-"
        self.info(
            f"{mark} {report['name']}: 経験定数 {report['empirical_constant']:.6g} | "
            f"ドリフト {drift_text} | サンプル数 {report['samples']:,}"
        )

    def log_error(self, error: Exception, context: Optional[str] = None):
        """エラーログ"""
        if context:
            self.error(f"エラーが発生しました ({context}): {str(error)}")
        else:
            self.error(f"エラーが発生しました: {str(error)}")
