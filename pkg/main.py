import argparse
import sys
from pathlib import Path

import numpy as np
import polars as pl
from dotenv import find_dotenv, load_dotenv

from config.run_config import Config, ConfigError, load_config
from config.settings import settings
from core import (
    ConditionError,
    DualLogger,
    LinkingGeometryError,
    SolverError,
    assemble_form,
    build_linking_geometry_p2,
    check_growth_conditions,
    check_superlinearity,
    dump_weights,
    first_eigenpair,
    growth_bound_constant,
    mountain_pass,
    run_suite,
    sample_ensemble,
    second_eigenvalue_heuristic,
    solve_linking,
    spectrum_p2,
)
from core.report_writer import write_frame, write_function_csv, write_json, write_manifest

_ = load_dotenv(find_dotenv())

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_CONDITION = 3
# リンキング幾何の構成失敗（sup Phi(A) > inf Phi(B) またはスペクトルギャップ不足）
EXIT_GEOMETRY = 4


def cmd_eig(config: Config, out_dir: Path, logger: DualLogger, args: argparse.Namespace) -> int:
    """第1固有対（と要求があれば第2固有値の推定）を計算"""
    form = assemble_form(config.domain.grid(), config.constants.constants())
    if args.dump_weights:
        dump_weights(form, out_dir / "weights")
    options = config.solver.eigen_options(settings.WORKERS)

    pair = first_eigenpair(form, options)
    write_json(out_dir / "eigenpair.json", pair.to_dict())
    write_function_csv(out_dir / "eigenfunction.csv", pair.function)
    logger.log_eigenpair("lambda_1", pair.to_dict())

    if config.solver.lambda2 or args.lambda2:
        second = second_eigenvalue_heuristic(form, pair.function, options)
        write_json(out_dir / "eigenpair2.json", second.to_dict())
        write_function_csv(out_dir / "eigenfunction2.csv", second.function)
        logger.log_eigenpair("lambda_2", second.to_dict())
    return EXIT_OK


def cmd_spectrum(config: Config, out_dir: Path, logger: DualLogger, args: argparse.Namespace) -> int:
    """p = 2 の全スペクトルを CSV (k, lambda) に書き出す"""
    form = assemble_form(config.domain.grid(), config.constants.constants())
    if args.dump_weights:
        dump_weights(form, out_dir / "weights")
    spectrum = spectrum_p2(form)
    frame = pl.DataFrame({"k": np.arange(1, len(spectrum.values) + 1), "lambda": spectrum.values})
    write_frame(out_dir / "spectrum.csv", frame)
    write_json(out_dir / "spectrum.json", spectrum.to_dict())
    logger.log_spectrum(spectrum.values.tolist())
    return EXIT_OK


def cmd_solve(config: Config, out_dir: Path, logger: DualLogger, args: argparse.Namespace) -> int:
    """成長条件を確認してから峠の補題またはリンキングで非自明解を求める"""
    grid = config.domain.grid()
    form = assemble_form(grid, config.constants.constants())
    g = config.nonlinearity.spec(form.p)

    conditions = check_growth_conditions(g)
    write_json(out_dir / "conditions.json", conditions.to_dict())
    logger.log_condition_report(conditions.to_dict())
    if not conditions.passed:
        raise ConditionError(
            f"growth conditions fail: {', '.join(conditions.failures())}", report=conditions
        )

    options = config.solver.minimax_options(settings.WORKERS)
    if args.mode == "linking":
        if form.p != 2:
            raise ValueError(
                f"linking is only available for p = 2 (got p={form.p}); use --mode mountain-pass"
            )
        spectrum = spectrum_p2(form)
        geometry = build_linking_geometry_p2(form, spectrum, config.solver.k, g.lam, g, options)
        write_json(out_dir / "geometry.json", geometry.to_dict())
        report = solve_linking(form, g, geometry, options)
    else:
        report = mountain_pass(form, g, options)

    write_json(out_dir / "solution.json", report.to_dict())
    write_function_csv(out_dir / "solution.csv", report.solution)
    monitor = pl.DataFrame(
        {
            "iteration": np.arange(1, len(report.cerami_monitor) + 1),
            "phi": report.cerami_monitor[:, 0],
            "cerami": report.cerami_monitor[:, 1],
        }
    )
    write_frame(out_dir / "cerami_monitor.csv", monitor)
    logger.log_solver_report(report.to_dict())
    return EXIT_OK


def cmd_verify(config: Config, out_dir: Path, logger: DualLogger, args: argparse.Namespace) -> int:
    """不等式検査を全て実行してレポートを書き出す"""
    grid = config.domain.grid()
    form = assemble_form(grid, config.constants.constants())
    ensemble = sample_ensemble(grid, config.verify.samples, config.solver.seed, config.verify.recipe)

    g = config.nonlinearity.spec(form.p)
    conditions = check_growth_conditions(g)
    usable = g if conditions.g1_passed and conditions.g2_passed else None
    if usable is None:
        logger.warning("⚠️  (g1)/(g2) を満たさないため原点での漸近挙動の検査を省略します")

    reports = run_suite(form, ensemble, usable, config.verify.options())
    summary = []
    for report in reports:
        data = report.to_dict()
        write_json(out_dir / "verify" / f"{report.name}.json", data)
        write_frame(out_dir / "verify" / f"{report.name}.csv", report.to_frame())
        logger.log_inequality_report(data)
        summary.append({"name": report.name, "passed": report.passed})
    write_json(out_dir / "verify.json", {"reports": summary})
    return EXIT_OK if all(report.passed for report in reports) else EXIT_CONDITION


def cmd_check_g(config: Config, out_dir: Path, logger: DualLogger, args: argparse.Namespace) -> int:
    """非線形項の (g1)-(g3) を検査"""
    g = config.nonlinearity.spec(config.constants.p)
    report = check_growth_conditions(g)
    data = {"nonlinearity": g.to_dict(), "conditions": report.to_dict()}
    if report.g3_feasible:
        data["superlinearity"] = check_superlinearity(g, report=report).to_dict()
    data["growth_bound_constant_eps_0.1"] = growth_bound_constant(g, 0.1)
    write_json(out_dir / "conditions.json", data)
    write_frame(out_dir / "condition_samples.csv", pl.DataFrame(report.samples))
    logger.log_condition_report(report.to_dict())
    return EXIT_OK if report.passed else EXIT_CONDITION


COMMANDS = {
    "eig": cmd_eig,
    "spectrum": cmd_spectrum,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "check-g": cmd_check_g,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON configuration file")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None, help="overrides solver.seed")
    common.add_argument("--quiet", action="store_true", help="console shows warnings only")

    parser = argparse.ArgumentParser(
        prog="logplap", description="Logarithmic p-Laplacian eigenvalue and critical point toolkit"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    eig = subparsers.add_parser("eig", parents=[common], help="first eigenpair")
    eig.add_argument("--lambda2", action="store_true", help="also estimate lambda_2")
    eig.add_argument("--dump-weights", action="store_true", help="write assembled weight tables")

    spectrum = subparsers.add_parser("spectrum", parents=[common], help="dense p = 2 spectrum")
    spectrum.add_argument("--dump-weights", action="store_true", help="write assembled weight tables")

    solve = subparsers.add_parser("solve", parents=[common], help="nontrivial critical point")
    solve.add_argument("--mode", choices=["mountain-pass", "linking"], default="mountain-pass")

    subparsers.add_parser("verify", parents=[common], help="inequality harness")
    subparsers.add_parser("check-g", parents=[common], help="growth conditions (g1)-(g3)")
    return parser


def main(argv: list[str] | None = None) -> int:
    """メイン処理関数"""
    args = build_parser().parse_args(argv)
    logger = DualLogger(settings.LOG_FILE, settings.LOG_LEVEL, quiet=args.quiet)

    try:
        config = load_config(args.config).with_seed(args.seed)
    except ConfigError as e:
        logger.log_error(e, "設定")
        logger.close()
        return EXIT_CONFIG

    out_dir = args.out or Path(settings.OUTPUT_DIR) / args.command
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.log_run_start(args.command, config.solver.seed, out_dir)
    write_manifest(out_dir, args.command, config.dump_json(), config.solver.seed)

    try:
        code = COMMANDS[args.command](config, out_dir, logger, args)
    except ConditionError as e:
        logger.log_error(e, "成長条件")
        if e.report is not None:
            write_json(out_dir / "conditions.json", e.report.to_dict())
        code = EXIT_CONDITION
    except LinkingGeometryError as e:
        logger.log_error(e, "リンキング幾何")
        write_json(
            out_dir / "failure.json",
            {"error": str(e), "sample_index": e.sample_index, "values": e.values},
        )
        code = EXIT_GEOMETRY
    except (SolverError, FloatingPointError) as e:
        logger.log_error(e, "ソルバー")
        report = getattr(e, "report", None)
        if report is not None:
            write_json(out_dir / "failure.json", report.to_dict())
        code = EXIT_SOLVER
    except ValueError as e:
        logger.log_error(e, "前提条件")
        code = EXIT_CONFIG
    except KeyboardInterrupt:
        logger.warning("⚠️  ユーザーによって処理が中断されました")
        code = EXIT_SOLVER
    else:
        if code == EXIT_OK:
            logger.info("🎉 全ての処理が正常に完了しました！")
    logger.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
