"""Closed-form algebra of a linear DDPM noise schedule.

Timesteps run 1..T; arrays on :class:`NoiseSchedule` are indexed by t - 1
and ᾱ_0 is taken as 1. All randomness is supplied by the caller, either as
noise arrays or as seeds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .schema import ScheduleConfig

_logger = logging.getLogger(__name__)

ALPHA_BAR_FLOOR = 1e-300
MAX_CHAIN_STEPS = 200
ROUNDTRIP_TOLERANCE = 1e-9
Z_LIMIT = 4.0


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """β_t, α_t, ᾱ_t and the fixed posterior variance σ_t² for t = 1..T."""

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    one_minus_alpha_bar: np.ndarray
    sigma2: np.ndarray

    @property
    def T(self) -> int:
        """Number of diffusion steps."""
        return int(self.beta.size)

    def check_t(self, t: int, lowest: int = 0) -> int:
        """Return ``t`` or raise if it lies outside [lowest, T]."""
        if not lowest <= t <= self.T:
            raise ValueError(f"timestep must lie in [{lowest}, {self.T}], got {t}")
        return int(t)

    def alpha_bar_at(self, t: int) -> float:
        """ᾱ_t with ᾱ_0 = 1."""
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])

    def one_minus_alpha_bar_at(self, t: int) -> float:
        """1 - ᾱ_t with the value at t = 0 taken as 0."""
        return 0.0 if t == 0 else float(self.one_minus_alpha_bar[t - 1])

    def to_frame(self) -> pd.DataFrame:
        """Per-step table with columns t, beta, alpha, alpha_bar, sigma2."""
        return pd.DataFrame(
            {
                "t": np.arange(1, self.T + 1),
                "beta": self.beta,
                "alpha": self.alpha,
                "alpha_bar": self.alpha_bar,
                "sigma2": self.sigma2,
            }
        )


def linear_schedule(
    T: int = 1000, beta_start: float = 1e-6, beta_end: float = 1e-2
) -> NoiseSchedule:
    """β rising linearly from ``beta_start`` (t = 1) to ``beta_end`` (t = T).

    ᾱ is accumulated in the log domain; 1 - ᾱ uses expm1 so it stays
    accurate while ᾱ is close to one.
    """
    cfg = ScheduleConfig(T=T, beta_start=beta_start, beta_end=beta_end)
    return schedule_from_config(cfg)


def schedule_from_config(cfg: ScheduleConfig) -> NoiseSchedule:
    """Build the linear schedule described by ``cfg``."""
    beta = np.linspace(cfg.beta_start, cfg.beta_end, cfg.T)
    log_alpha_bar = np.cumsum(np.log1p(-beta))
    alpha_bar = np.exp(log_alpha_bar)
    one_minus = -np.expm1(log_alpha_bar)
    one_minus_prev = np.concatenate([[0.0], one_minus[:-1]])
    sigma2 = one_minus_prev / one_minus * beta
    _logger.debug(
        "schedule: T=%d beta=[%g, %g] alpha_bar_T=%.6g",
        cfg.T,
        beta[0],
        beta[-1],
        alpha_bar[-1],
    )
    return NoiseSchedule(beta, 1.0 - beta, alpha_bar, one_minus, sigma2)


def _same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} shape {b.shape} does not match {a.shape}")


def q_sample(
    x0: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule
) -> np.ndarray:
    """x_t = √ᾱ_t·x_0 + √(1 - ᾱ_t)·ε for t in [0, T]."""
    t = sched.check_t(t)
    x0, noise = np.asarray(x0, dtype=np.float64), np.asarray(noise, dtype=np.float64)
    _same_shape(x0, noise, "noise")
    return (
        np.sqrt(sched.alpha_bar_at(t)) * x0
        + np.sqrt(sched.one_minus_alpha_bar_at(t)) * noise
    )


def invert_x0(
    x_t: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule
) -> np.ndarray:
    """Recover x_0 from x_t and the noise that produced it."""
    t = sched.check_t(t)
    alpha_bar = sched.alpha_bar_at(t)
    if alpha_bar < ALPHA_BAR_FLOOR:
        raise ValueError(
            f"alpha_bar at t={t} is {alpha_bar:.3g}; x0 cannot be recovered"
        )
    x_t, noise = np.asarray(x_t, dtype=np.float64), np.asarray(noise, dtype=np.float64)
    _same_shape(x_t, noise, "noise")
    return (x_t - np.sqrt(sched.one_minus_alpha_bar_at(t)) * noise) / np.sqrt(
        alpha_bar
    )


predict_x0 = invert_x0


def posterior_step(
    x_t: np.ndarray,
    t: int,
    epsilon_hat: np.ndarray,
    sched: NoiseSchedule,
    z: np.ndarray | None = None,
) -> np.ndarray:
    """One reverse step x_t → x_{t-1} with fixed variance σ_t².

    μ = (x_t - β_t/√(1 - ᾱ_t)·ε̂)/√α_t; ``z`` defaults to zero.
    """
    t = sched.check_t(t, lowest=1)
    x_t = np.asarray(x_t, dtype=np.float64)
    epsilon_hat = np.asarray(epsilon_hat, dtype=np.float64)
    _same_shape(x_t, epsilon_hat, "epsilon_hat")
    beta = sched.beta[t - 1]
    mean = (x_t - beta / np.sqrt(sched.one_minus_alpha_bar_at(t)) * epsilon_hat) / (
        np.sqrt(sched.alpha[t - 1])
    )
    if z is None:
        return mean
    z = np.asarray(z, dtype=np.float64)
    _same_shape(x_t, z, "z")
    return mean + np.sqrt(sched.sigma2[t - 1]) * z


def posterior_mean_coefficients(sched: NoiseSchedule, t: int) -> tuple[float, float]:
    """(c0, ct) with E[x_{t-1} | x_t, x_0] = c0·x_0 + ct·x_t."""
    t = sched.check_t(t, lowest=1)
    one_minus = sched.one_minus_alpha_bar_at(t)
    coef_x0 = np.sqrt(sched.alpha_bar_at(t - 1)) * sched.beta[t - 1] / one_minus
    coef_xt = (
        np.sqrt(sched.alpha[t - 1]) * sched.one_minus_alpha_bar_at(t - 1) / one_minus
    )
    return float(coef_x0), float(coef_xt)


def loss_target(
    x0: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule
) -> tuple[np.ndarray, np.ndarray]:
    """The (network input, regression target) training pair."""
    return q_sample(x0, t, noise, sched), np.array(noise, dtype=np.float64)


@dataclass(frozen=True)
class ChainReport:
    """Step-by-step noising compared with the closed-form marginal.

    z-scores are the largest per-pixel deviations of the sample mean and
    sample variance from the marginal, in standard errors.
    """

    t: int
    trials: int
    max_z_mean: float
    max_z_var: float
    variance_ratio: float
    step_gap: float

    @property
    def max_z(self) -> float:
        """Largest z-score over mean and variance."""
        return max(self.max_z_mean, self.max_z_var)


def chain_equals_marginal(
    x0: np.ndarray,
    t: int,
    sched: NoiseSchedule,
    seed: int = 0,
    trials: int = 10_000,
) -> ChainReport:
    """Simulate t single noising steps over many seeded trials."""
    t = sched.check_t(t, lowest=1)
    if t > MAX_CHAIN_STEPS:
        raise ValueError(f"chain simulation is limited to t <= {MAX_CHAIN_STEPS}")
    if trials < 2:
        raise ValueError(f"need at least 2 trials, got {trials}")
    x0 = np.asarray(x0, dtype=np.float64)
    rng = np.random.default_rng(seed)
    x = np.broadcast_to(x0, (trials,) + x0.shape).copy()
    first_noise = None
    for s in range(1, t + 1):
        z = rng.standard_normal(x.shape)
        if first_noise is None:
            first_noise = z[0].copy()
        x = np.sqrt(sched.alpha[s - 1]) * x + np.sqrt(sched.beta[s - 1]) * z

    mean = np.sqrt(sched.alpha_bar_at(t)) * x0
    var = sched.one_minus_alpha_bar_at(t)
    sample_mean = x.mean(axis=0)
    sample_var = x.var(axis=0, ddof=1)
    z_mean = np.abs(sample_mean - mean) / np.sqrt(var / trials)
    z_var = np.abs(sample_var - var) / (var * np.sqrt(2.0 / (trials - 1)))

    one_step = np.sqrt(sched.alpha[0]) * x0 + np.sqrt(sched.beta[0]) * first_noise
    step_gap = float(np.max(np.abs(one_step - q_sample(x0, 1, first_noise, sched))))
    report = ChainReport(
        t=t,
        trials=trials,
        max_z_mean=float(z_mean.max()),
        max_z_var=float(z_var.max()),
        variance_ratio=float(sample_var.mean() / var),
        step_gap=step_gap,
    )
    _logger.debug("chain_equals_marginal: %s", report)
    return report


@dataclass(frozen=True)
class ScheduleCheck:
    """One named check with its measured value."""

    name: str
    value: float
    passed: bool


@dataclass(frozen=True)
class ScheduleVerification:
    """Outcome of :func:`verify_schedule`."""

    checks: list[ScheduleCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True when every check passed."""
        return all(c.passed for c in self.checks)

    def to_frame(self) -> pd.DataFrame:
        """Columns check, value, passed."""
        return pd.DataFrame(
            [
                {"check": c.name, "value": c.value, "passed": c.passed}
                for c in self.checks
            ]
        )


def verify_schedule(
    sched: NoiseSchedule,
    seed: int = 0,
    trials: int = 10_000,
    shape: tuple[int, int] = (4, 4),
) -> ScheduleVerification:
    """Run the schedule invariants, x0 roundtrips, chain-vs-marginal and
    single-step posterior checks on seeded inputs.
    """
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0.0, 1.0, shape)
    checks = []

    decreasing = bool(np.all(np.diff(sched.alpha_bar) < 0.0))
    checks.append(ScheduleCheck("alpha_bar_decreasing", float(decreasing), decreasing))
    in_unit = all(
        bool(np.all((arr > 0.0) & (arr < 1.0)))
        for arr in (sched.beta, sched.alpha, sched.alpha_bar)
    )
    checks.append(ScheduleCheck("arrays_in_unit_interval", float(in_unit), in_unit))
    sigma_ok = bool(sched.sigma2[0] == 0.0) and bool(
        np.all((sched.sigma2[1:] > 0.0) & (sched.sigma2[1:] <= sched.beta[1:]))
    )
    checks.append(ScheduleCheck("sigma2_bounds", float(sigma_ok), sigma_ok))

    for t in sorted({1, 10, 100, 500, sched.T} & set(range(1, sched.T + 1))):
        noise = rng.standard_normal(shape)
        x_t = q_sample(x0, t, noise, sched)
        err = float(np.max(np.abs(invert_x0(x_t, t, noise, sched) - x0)))
        checks.append(
            ScheduleCheck(f"roundtrip_t{t}", err, err <= ROUNDTRIP_TOLERANCE)
        )

    for t in sorted({1, 50, 100} & set(range(1, min(sched.T, MAX_CHAIN_STEPS) + 1))):
        report = chain_equals_marginal(x0, t, sched, seed + t, trials)
        checks.append(
            ScheduleCheck(f"chain_max_z_t{t}", report.max_z, report.max_z < Z_LIMIT)
        )

    noise = rng.standard_normal(shape)
    x1 = q_sample(x0, 1, noise, sched)
    err = float(np.max(np.abs(posterior_step(x1, 1, noise, sched) - x0)))
    checks.append(ScheduleCheck("posterior_t1", err, err <= ROUNDTRIP_TOLERANCE))

    result = ScheduleVerification(checks)
    if not result.passed:
        _logger.warning(
            "verify_schedule: failed checks %s",
            [c.name for c in checks if not c.passed],
        )
    return result
