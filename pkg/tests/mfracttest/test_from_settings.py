import os
from unittest import mock

import pytest

from mfract.schema import (
    DensityFitConfig,
    GroupProcessorConfig,
    MfbConfig,
    RuntimeConfig,
    ScheduleConfig,
    SpectrumConfig,
)


def test_kwarg_overrides_env_var() -> None:
    """Config kwargs take precedence over environment variables."""
    env = {"MFRACT_THREADS": "2", "MFRACT_SEED": "7"}
    with mock.patch.dict(os.environ, env, clear=True):
        config = RuntimeConfig.from_settings(seed=11)
    assert config.seed == 11
    assert config.threads == 2


def test_seed_defaults_to_zero(clean_env) -> None:
    config = RuntimeConfig.from_settings()
    assert config.seed == 0
    assert config.threads is None
    assert config.resolved_threads >= 1


def test_windows_from_env() -> None:
    """MFRACT_WINDOWS replaces the default density windows."""
    with mock.patch.dict(os.environ, {"MFRACT_WINDOWS": "3,7,11"}, clear=True):
        config = DensityFitConfig.from_settings()
    assert config.windows == (3, 7, 11)
    assert config.R == 3


def test_malformed_windows_env_raises() -> None:
    with mock.patch.dict(os.environ, {"MFRACT_WINDOWS": "3,x"}, clear=True):
        with pytest.raises(ValueError, match="3,x"):
            DensityFitConfig.from_settings()


def test_anchors_from_env() -> None:
    with mock.patch.dict(os.environ, {"MFRACT_ANCHORS": "16"}, clear=True):
        config = MfbConfig.from_settings()
    assert config.anchors == 16
    assert config.out_channels == 3


def test_dotenv_file_is_read(tmp_path, clean_env) -> None:
    """A .env file in the working directory feeds the settings layer."""
    (tmp_path / ".env").write_text("MFRACT_SEED=42\n")
    assert RuntimeConfig.from_settings().seed == 42


@pytest.mark.parametrize(
    "windows",
    [(3, 5), (3, 4, 5), (1, 3, 5), (5, 3, 7), (3, 3, 5)],
)
def test_invalid_windows_rejected(windows) -> None:
    with pytest.raises(ValueError):
        DensityFitConfig(windows=windows)


def test_config_is_frozen_and_strict() -> None:
    config = DensityFitConfig()
    with pytest.raises(ValueError):
        config.windows = (3, 5, 7)  # type: ignore[misc]
    with pytest.raises(ValueError):
        DensityFitConfig(radius=3)  # type: ignore[call-arg]


def test_schedule_bounds() -> None:
    ScheduleConfig(T=2, beta_start=0.1, beta_end=0.2)
    for start, end in [(0.0, 0.1), (0.2, 0.1), (0.1, 1.0)]:
        with pytest.raises(ValueError, match="beta_start"):
            ScheduleConfig(beta_start=start, beta_end=end)
    with pytest.raises(ValueError):
        ScheduleConfig(T=1)


def test_spectrum_config_bounds() -> None:
    with pytest.raises(ValueError):
        SpectrumConfig(n_alpha_bins=4)
    with pytest.raises(ValueError):
        SpectrumConfig(box_sizes=(8, 4, 16))


def test_group_split_resolution() -> None:
    assert GroupProcessorConfig().resolve_split(64) == (16, 16, 16, 16)
    assert GroupProcessorConfig(split=(1, 2, 3, 4)).resolve_split(10) == (1, 2, 3, 4)
    assert GroupProcessorConfig().resolve_split(6) == (2, 2, 1, 1)
    assert GroupProcessorConfig().resolve_split(1) == (1, 0, 0, 0)
    with pytest.raises(ValueError, match="sums to"):
        GroupProcessorConfig(split=(1, 1, 1, 1)).resolve_split(8)
