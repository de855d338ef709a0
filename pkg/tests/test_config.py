import pytest
from pydantic import ValidationError

from app.core.config import (
    CalibrationExperiment,
    NormalExperiment,
    RunConfig,
    Settings,
    TwoStateExperiment,
    get_settings,
    parse_int_list,
    parse_seed,
)
from app.core.errors import ParameterError


def test_parse_seed():
    """Test seed desimal, hex, dan di luar rentang"""
    assert parse_seed("42") == 42
    assert parse_seed("0xFF") == 255
    assert parse_seed(str(2 ** 64 - 1)) == 2 ** 64 - 1
    for bad in ("abc", "-1", str(2 ** 64)):
        with pytest.raises(ParameterError):
            parse_seed(bad)


def test_parse_int_list():
    """Test daftar integer dipisah koma"""
    assert parse_int_list("5,10, 20") == [5, 10, 20]
    with pytest.raises(ParameterError):
        parse_int_list("5,x")
    with pytest.raises(ParameterError):
        parse_int_list(",")


def test_run_config_defaults():
    """Test nilai default RunConfig"""
    config = RunConfig()
    assert (config.K, config.B, config.M) == (20, 25, 1)
    assert config.tail_cap == 200
    assert config.k_effective == 500
    assert RunConfig(K=4).tail_cap == 40
    assert RunConfig(K=4, tail_cap=7).tail_cap == 7


def test_run_config_sub_blocks():
    """Test M harus membagi B"""
    assert RunConfig(B=10, M=5).sub_blocks == 2
    with pytest.raises(ValidationError):
        RunConfig(B=10, M=3)
    with pytest.raises(ValidationError):
        RunConfig(K=0)


def test_run_config_frozen():
    """Test RunConfig tidak bisa diubah"""
    config = RunConfig()
    with pytest.raises(ValidationError):
        config.K = 5


def test_experiment_echo_excludes_runtime_fields():
    """Test konfigurasi output tanpa jobs, out, format"""
    cfg = TwoStateExperiment(seed=1, n=10, jobs=8, out="x.csv", format="JSON")
    assert cfg.format == "json"
    echo = cfg.echo()
    assert "jobs" not in echo and "out" not in echo and "format" not in echo
    assert echo["ks"] == [5, 10, 20, 50, 100, 110]


def test_experiment_validation():
    """Test validasi parameter eksperimen"""
    with pytest.raises(ValidationError):
        TwoStateExperiment(format="xml")
    with pytest.raises(ValidationError):
        TwoStateExperiment(seed=2 ** 64)
    with pytest.raises(ValidationError):
        TwoStateExperiment(ks=[])
    with pytest.raises(ValidationError):
        CalibrationExperiment(target="ising")
    assert CalibrationExperiment(Bs=[5, 1, 5]).Bs == [1, 5]


def test_normal_block_length():
    """Test B default per dimensi"""
    assert NormalExperiment(d=5).block_length() == 25
    assert NormalExperiment(d=20, B=40).block_length() == 40
    assert NormalExperiment(d=2).echo()["B"] == 10
    with pytest.raises(ParameterError):
        NormalExperiment(d=15).block_length()


def test_settings_from_environment(monkeypatch):
    """Test Settings dibaca dari environment"""
    get_settings.cache_clear()
    monkeypatch.setenv("PERFECTSIM_SEED", "0x2A")
    monkeypatch.setenv("PERFECTSIM_JOBS", "3")
    monkeypatch.setenv("PERFECTSIM_API_MAX_UNITS", "500")
    try:
        settings = get_settings()
        assert settings.seed == 42
        assert settings.jobs == 3
        assert settings.api_max_units == 500
    finally:
        get_settings.cache_clear()


def test_settings_validation():
    """Test Settings menolak nilai tidak valid"""
    with pytest.raises(ValidationError):
        Settings(jobs=0)
    with pytest.raises(ValidationError):
        Settings(seed=-1)
