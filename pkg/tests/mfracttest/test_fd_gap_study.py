import numpy as np

from mfract.examples.fd_gap_study import HURSTS, fd_gap_study


def test_study_table() -> None:
    frame = fd_gap_study(textures=4, size=128, scale=4)
    assert list(frame.columns) == ["hurst", "seed", "fd_hr", "fd_lr", "diff"]
    assert frame["hurst"].tolist() == list(HURSTS)
    np.testing.assert_allclose(frame["diff"], np.abs(frame["fd_hr"] - frame["fd_lr"]))
    assert frame["fd_hr"].between(1.5, 3.5).all()


def test_study_is_seeded() -> None:
    first = fd_gap_study(textures=2, size=128)
    second = fd_gap_study(textures=2, size=128)
    assert first.equals(second)
