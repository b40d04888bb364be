import pytest

from config.defaults import EXPERIMENT_KINDS, PARAM_DEFAULTS, param_defaults
from config.directory import results_directory, staging_directory, use_directory
from config.experiment import ExperimentConfig, load_config
from main import EXIT_CONFIG, EXIT_OK, main
from parser import experiment_parser, overrides_from_args
from utils.errors import InvalidConfigError


def _write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_defaults_only():
    config = load_config("dos")
    assert config.kind == "dos"
    assert config.params == param_defaults("dos")
    assert config.params["eps_ladder"] == (0.2, 0.1, 0.05)
    assert (config.ensemble.half_size, config.ensemble.bandwidth_half, config.master_seed) == (100, 1, 1)
    assert config.workers == 1


def test_every_kind_has_documented_parameters():
    assert set(PARAM_DEFAULTS) == set(EXPERIMENT_KINDS)
    for kind in EXPERIMENT_KINDS:
        assert all(p.help for p in PARAM_DEFAULTS[kind].values())


def test_file_values_and_flag_overrides(tmp_path):
    path = _write(
        tmp_path,
        'kind = "dos"\nworkers = 2\n\n[ensemble]\nN = 20\nL = 3\nseed = 9\n\n[ensemble.density]\nkind = "uniform"\n\n[params]\nsamples = 500\neps_ladder = [0.1, 0.05]\n',
    )
    config = load_config("dos", path, {"N": 30, "samples": 300, "density_scale": 2.0})
    assert config.ensemble.half_size == 30
    assert config.ensemble.bandwidth_half == 3
    assert config.master_seed == 9
    assert config.ensemble.density.kind == "uniform"
    assert config.ensemble.density.scale == 2.0
    assert config.params["samples"] == 300
    assert config.params["eps_ladder"] == (0.1, 0.05)
    assert config.workers == 2


def test_kind_taken_from_file(tmp_path):
    path = _write(tmp_path, 'kind = "les"\n')
    assert load_config(None, path).kind == "les"


def test_unknown_key_reports_its_line(tmp_path):
    path = _write(tmp_path, 'kind = "dos"\n\n[ensemble]\nN = 10\nbogus = 1\n')
    with pytest.raises(InvalidConfigError) as info:
        load_config("dos", path)
    assert info.value.line == 5
    assert str(info.value).startswith(f"{path}:5:")


def test_unknown_parameter_reports_its_line(tmp_path):
    path = _write(tmp_path, 'kind = "les"\n[params]\nalpha = 0.5\nsamples_x = 3\n')
    with pytest.raises(InvalidConfigError) as info:
        load_config("les", path)
    assert info.value.line == 4


def test_badly_typed_parameter(tmp_path):
    path = _write(tmp_path, 'kind = "dos"\n[params]\nsamples = 1.5\n')
    with pytest.raises(InvalidConfigError) as info:
        load_config("dos", path)
    assert info.value.line == 3
    assert "integer" in info.value.message


def test_kind_mismatch(tmp_path):
    path = _write(tmp_path, 'kind = "dos"\n')
    with pytest.raises(InvalidConfigError) as info:
        load_config("les", path)
    assert info.value.line == 1


def test_invalid_toml_and_missing_file(tmp_path):
    path = _write(tmp_path, 'kind = "dos"\nN = = 1\n')
    with pytest.raises(InvalidConfigError) as info:
        load_config("dos", path)
    assert info.value.line == 2
    with pytest.raises(InvalidConfigError):
        load_config("dos", str(tmp_path / "missing.toml"))


def test_invalid_ensemble_and_workers():
    with pytest.raises(InvalidConfigError):
        load_config("dos", overrides={"N": 2, "L": 5})
    with pytest.raises(InvalidConfigError):
        load_config("dos", overrides={"workers": 0})
    with pytest.raises(InvalidConfigError):
        load_config(None)


def test_config_dict_round_trip():
    config = load_config("locmoments", overrides={"N": 12, "averaging_E": [0.5], "high_energy": False})
    again = ExperimentConfig.from_dict(config.to_dict())
    assert again.to_dict() == config.to_dict()
    assert again.params["averaging_E"] == (0.5,)


def test_parser_flags_become_overrides():
    args = experiment_parser().parse_args(["locmoments", "--N", "12", "--no-high-energy", "--averaging-E", "0.5", "1.5", "--density-kind", "uniform"])
    assert overrides_from_args(args) == {"N": 12, "high_energy": False, "averaging_E": [0.5, 1.5], "density_kind": "uniform"}


def test_parser_help_shows_defaults(capsys, monkeypatch):
    monkeypatch.setenv("COLUMNS", "400")
    with pytest.raises(SystemExit) as info:
        experiment_parser().parse_args(["dos", "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    assert "(default: [0.2, 0.1, 0.05])" in text
    assert "(default: 2000)" in text


def test_usage_error_exits_with_config_status(capsys):
    with pytest.raises(SystemExit) as info:
        experiment_parser().parse_args(["dos", "--bogus"])
    assert info.value.code == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_dated_default_directory(tmp_path):
    assert use_directory("dos", base_path=str(tmp_path), date="2026-01-02") == str(tmp_path / "results" / "2026-01-02" / "dos")
    assert results_directory("dos", out=str(tmp_path / "x")) == str(tmp_path / "x")
    staging = staging_directory(str(tmp_path / "x"))
    assert staging.startswith(str(tmp_path / ".x.partial-"))


def test_main_runs_an_experiment(tmp_path, capsys):
    out = tmp_path / "runs" / "decoupling"
    argv = ["decoupling", "--terminal-output", "--out", str(out), "--s-values", "0.3", "--eta-grid", "10", "20", "--beta-grid", "0", "1"]
    assert main(argv) == EXIT_OK
    printed = capsys.readouterr().out
    assert f"results: {out}" in printed
    assert "upper.max_ratio:" in printed
    assert (out / "manifest.json").is_file()


def test_main_maps_config_errors_to_exit_status(tmp_path, capsys):
    assert main(["dos", "--terminal-output", "--N", "2", "--L", "5", "--out", str(tmp_path / "dos")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["all-acceptance", "--terminal-output", "--scale", "2", "--out", str(tmp_path / "acc")]) == EXIT_CONFIG
