import json

import pytest

from config.run_config import Config, ConfigError, load_config, parse_config


def test_defaults():
    config = load_config(None)
    assert config.domain.n == 64
    assert config.constants.p == 2.0
    assert config.nonlinearity.kind == "h2"
    assert config.solver.m_knots == 33
    assert config.verify.rho_list == [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
    assert parse_config("").domain.b == 1.0


def test_lambda_alias_and_conversion():
    config = parse_config(
        json.dumps(
            {
                "domain": {"a": -1.0, "b": 2.0, "n": 12},
                "constants": {"p": 3.0, "rho": 0.5},
                "nonlinearity": {"kind": "h1", "lambda": 0.7, "theta": 0.25},
            }
        )
    )
    assert config.nonlinearity.lam == 0.7
    grid = config.domain.grid()
    assert grid.n == 12 and grid.h == pytest.approx(3.0 / 13)
    constants = config.constants.constants()
    assert constants.p == 3.0 and constants.rho == 0.5
    g = config.nonlinearity.spec(constants.p)
    assert g.lam == 0.7 and g.theta == 0.25 and g.p == 3.0
    assert '"lambda": 0.7' in config.dump_json()


def test_unknown_field_reports_path_and_line():
    text = '{\n  "domain": {\n    "n": 8,\n    "width": 3\n  }\n}\n'
    with pytest.raises(ConfigError) as excinfo:
        parse_config(text, source="run.json")
    message = str(excinfo.value)
    assert message.startswith("run.json:4: domain.width:")


def test_constraint_violation_reports_line():
    text = '{\n  "solver": {\n    "tol": 1e-6,\n    "m_knots": 8\n  }\n}\n'
    with pytest.raises(ConfigError, match=r"^<config>:4: solver\.m_knots:"):
        parse_config(text)


def test_section_validator_reports_section_line():
    text = '{\n  "constants": {},\n  "domain": {"a": 2.0, "b": 1.0}\n}\n'
    with pytest.raises(ConfigError, match=r"^<config>:3: domain:"):
        parse_config(text)


def test_json_syntax_error_reports_line_and_column():
    with pytest.raises(ConfigError, match=r"^bad\.json:2:\d+: invalid JSON"):
        parse_config('{\n  "domain": {"n": 8,}\n}', source="bad.json")
    with pytest.raises(ConfigError, match="JSON object"):
        parse_config("[1, 2]")


@pytest.mark.parametrize(
    "rho_list",
    [[], [1e-1, 1e-1], [1e-3, 1e-2], [1e-1, -1e-2]],
)
def test_rho_list_must_be_positive_and_decreasing(rho_list):
    with pytest.raises(ConfigError, match="verify.rho_list"):
        parse_config(json.dumps({"verify": {"rho_list": rho_list}}))


@pytest.mark.parametrize(
    "section",
    [
        {"nonlinearity": {"theta": 1.0}},
        {"nonlinearity": {"t0": 2.0, "t1": 3.0}},
        {"nonlinearity": {"kind": "custom"}},
        {"nonlinearity": {"kind": "h4"}},
        {"constants": {"p": 1.0}},
        {"constants": {"C": 0.0}},
        {"verify": {"gamma": 1.0}},
    ],
)
def test_invalid_parameters(section):
    with pytest.raises(ConfigError):
        parse_config(json.dumps(section))


def test_relaxed_theta_is_accepted():
    config = parse_config(json.dumps({"nonlinearity": {"theta": 1.0, "relaxed": True}}))
    assert config.nonlinearity.spec(2.0).theta == 1.0


def test_with_seed_overrides_solver_seed():
    config = Config()
    assert config.with_seed(None) is config
    seeded = config.with_seed(42)
    assert seeded.solver.seed == 42
    assert config.solver.seed == 0
    assert seeded.solver.eigen_options().seed == 42
    assert seeded.solver.minimax_options().seed == 42


def test_solver_options_conversion():
    config = parse_config(json.dumps({"solver": {"tol": 1e-6, "m_knots": 20, "r_max": 50.0}}))
    eigen = config.solver.eigen_options(workers=2)
    assert eigen.tol == 1e-9
    assert eigen.workers == 2
    minimax = config.solver.minimax_options()
    assert minimax.m == 20 and minimax.tol == 1e-6 and minimax.r_max == 50.0


def test_verify_options_conversion():
    config = parse_config(json.dumps({"verify": {"rho_list": [0.5, 0.05], "refine": False}}))
    opts = config.verify.options()
    assert opts.rho_list == (0.5, 0.05)
    assert opts.refine is False


def test_load_config_from_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(Config().with_seed(3).dump_json(), encoding="utf-8")
    assert load_config(path).solver.seed == 3
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
