import pytest

from cdspaces.config import ConfigError, RunConfig, load_config, parse_config, validate

GOOD = """\
[space]
profile = valley
k = 3.0517578125e-05
K = 16

[grid]
nx = 64
nu = 16

[run]
nprime = 515
seed = 7

[mgh]
eps_list = 0.0625, 0.03125, 0.015625
"""


def test_parse_good_config():
    cfg = parse_config(GOOD)
    assert cfg.k == 2.0 ** -15 and cfg.K == 16.0
    assert (cfg.nx, cfg.nu, cfg.seed) == (64, 16, 7)
    assert cfg.get_floats("mgh", "eps_list", []) == [0.0625, 0.03125, 0.015625]
    assert cfg.get_int("mgh", "nx", 256) == 256


@pytest.mark.parametrize("text, line", [
    ("[space]\nk = abc\n", 2),
    ("k = 0.1\n[space]\n", 1),
    ("[grid]\nnx = 4\nnx = 8\n", 3),
    ("[grid]\nnx = 4\n[grid]\n", 3),
    ("[space]\nK = 0.5\n", 2),
    ("[run]\nseed = -1\n", 2),
    ("[space]\n\n\nk = 0.3\n", 4),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as e:
        parse_config(text, "run.ini")
    assert e.value.line == line
    assert str(e.value).startswith(f"run.ini:{line}:")


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[spaces]\nk = 0.1\n")


def test_keys_are_case_sensitive():
    cfg = parse_config("[space]\nk = 0.001\nK = 4\n")
    assert cfg.k == 0.001 and cfg.K == 4.0


def test_typed_getters_report_lines():
    cfg = parse_config("[mgh]\nnx = 1.5\neps_list = 0.1, x\n")
    with pytest.raises(ConfigError) as e:
        cfg.get_int("mgh", "nx", 8)
    assert e.value.line == 2
    with pytest.raises(ConfigError) as e:
        cfg.get_floats("mgh", "eps_list", [])
    assert e.value.line == 3


def test_validate_defaults_and_echo():
    cfg = validate(RunConfig())
    echo = cfg.echo()
    assert "out" not in echo and echo["profile"] == "valley"


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")
