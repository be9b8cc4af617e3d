"""Seeded Monte Carlo engine and the measurement / coherence sweep campaigns.

Trial ``i`` of a run with master seed ``s`` draws everything from
independent PCG64 streams seeded by ``stream_seed(trial_seed(s, i), j)``,
where stream 0 feeds the channel draw, stream 1 the shared BS training
beams, and stream ``2 + u`` the combiners and noise of user ``u``. Results
therefore do not depend on how trials are distributed over workers, and
aggregation always runs in trial-index order.
"""
from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache, partial
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from .channel import (
    AngleModel,
    ChannelConfig,
    ChannelRealization,
    channel_matrix,
    noise_power,
    nominal_snr,
    sample_channel,
)
from .geometry import ArrayGeometry, dictionary, nearest_virtual_index, virtual_grid
from .rates import (
    conjugate_beamformers,
    effective_rate,
    indicator_rate,
    rate_lower_bound,
    single_user_rate,
    sinr_rate,
    steering_beamformers,
)
from .recovery import Atom, SupportEstimate, recover_support_omp
from .training import (
    TrainingConfig,
    build_sensing_operator,
    gen_training_matrix,
    synthesize_measurements,
)

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


class RateMode(str, enum.Enum):
    SINR = "sinr"
    INDICATOR = "indicator"


class TrainingKind(str, enum.Enum):
    RANDOM = "random"
    # P = A_BS and Q = A_MS: every virtual direction pair measured once
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class MeasurementPoint:
    """A requested measurement budget and the (M_BS, M_MS) split realizing it."""

    requested: int
    m_bs: int
    m_ms: int

    @property
    def total(self) -> int:
        return self.m_bs * self.m_ms


@dataclass(frozen=True)
class MeasurementSweep:
    points: tuple[MeasurementPoint, ...]


@dataclass(frozen=True)
class CoherenceSweep:
    coherence_lengths: tuple[float, ...]
    points: tuple[MeasurementPoint, ...]
    epsilon: float = 0.05


def split_measurements(m_total: int, n_bs: int, n_ms: int) -> tuple[int, int]:
    """Split a measurement budget between BS beams and MS combiners.

    ``m_bs = round(sqrt(M * N_BS / N_MS))`` clamped to [1, M] and
    ``m_ms = ceil(M / m_bs)``, so ``m_bs * m_ms >= M``.
    """
    if m_total < 1:
        raise ValueError(f"measurement budget must be >= 1, got {m_total}")
    m_bs = int(round(math.sqrt(m_total * n_bs / n_ms)))
    m_bs = min(max(m_bs, 1), m_total)
    return m_bs, -(-m_total // m_bs)


def measurement_point(m_total: int, n_bs: int, n_ms: int) -> MeasurementPoint:
    return MeasurementPoint(m_total, *split_measurements(m_total, n_bs, n_ms))


@dataclass(frozen=True)
class ExperimentConfig:
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    training: TrainingConfig = field(default_factory=lambda: TrainingConfig(24, 13))
    n_trials: int = 1000
    master_seed: int = 0
    rate_mode: RateMode = RateMode.SINR
    sweep: Optional[Union[MeasurementSweep, CoherenceSweep]] = None
    training_kind: TrainingKind = TrainingKind.RANDOM
    noiseless_training: bool = False
    shared_noise: bool = False
    requantize_precoder: bool = False
    sparsity: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.sparsity < 1:
            raise ValueError(f"sparsity must be >= 1, got {self.sparsity}")
        object.__setattr__(self, "rate_mode", RateMode(self.rate_mode))
        object.__setattr__(self, "training_kind", TrainingKind(self.training_kind))
        if self.rate_mode is RateMode.INDICATOR and self.channel.angle_model is not AngleModel.ON_GRID:
            raise ValueError("indicator rate mode requires on-grid angles")
        if self.channel.bs_geometry.element_spacing_wavelengths != 0.5 or (
            self.channel.ms_geometry.element_spacing_wavelengths != 0.5
        ):
            raise ValueError("the virtual-grid dictionaries require half-wavelength arrays")

    def with_point(self, point: MeasurementPoint) -> "ExperimentConfig":
        return replace(self, training=replace(self.training, m_bs=point.m_bs, m_ms=point.m_ms))

    def with_measurements(self, m_total: int) -> "ExperimentConfig":
        n_bs = self.channel.bs_geometry.n_antennas
        n_ms = self.channel.ms_geometry.n_antennas
        return self.with_point(measurement_point(m_total, n_bs, n_ms))


def reference_config(**overrides) -> ExperimentConfig:
    """Downlink scenario of the reference campaign.

    64-antenna BS, four 32-antenna users, 28 GHz, 50 MHz, 500 m LOS,
    4-bit training phases, 37 dBm.
    """
    channel = ChannelConfig()
    training = TrainingConfig(24, 13, 4, 4, training_power_w=channel.link.tx_power_w)
    return replace(ExperimentConfig(channel=channel, training=training), **overrides)


# ---------------------------------------------------------------- seeding

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_seed(master_seed: int, trial_index: int) -> int:
    return splitmix64(splitmix64(master_seed & MASK64) ^ (trial_index & MASK64))


def stream_seed(seed: int, stream: int) -> int:
    return splitmix64(seed ^ splitmix64(stream & MASK64))


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(seed, stream)))


# ---------------------------------------------------------------- trials

@dataclass(frozen=True)
class TrialResult:
    per_user_success: tuple[bool, ...]
    per_user_rate: tuple[float, ...]
    per_user_single_rate: tuple[float, ...]
    per_user_perfect_rate: tuple[float, ...]
    training_symbols: int
    channels: tuple[ChannelRealization, ...] = field(repr=False, default=())
    estimates: tuple[SupportEstimate, ...] = field(repr=False, default=())


@lru_cache(maxsize=32)
def _grid_and_dictionary(geometry: ArrayGeometry):
    grid = virtual_grid(geometry.n_antennas, geometry.element_spacing_wavelengths)
    A = dictionary(geometry, grid)
    A.setflags(write=False)
    return grid, A


def _truth_indices(real: ChannelRealization, n_bs: int, n_ms: int) -> tuple[int, int]:
    if real.on_grid:
        return real.aoa_grid_index, real.aod_grid_index
    return nearest_virtual_index(real.aoa, n_ms), nearest_virtual_index(real.aod, n_bs)


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialResult:
    """Estimate every user's channel from one broadcast training phase, then beamform and rate."""
    ch = config.channel
    bs, ms = ch.bs_geometry, ch.ms_geometry
    n_bs, n_ms, n_users = bs.n_antennas, ms.n_antennas, ch.n_users
    tr = config.training
    bs_grid, A_bs = _grid_and_dictionary(bs)
    ms_grid, A_ms = _grid_and_dictionary(ms)

    seed = trial_seed(config.master_seed, trial_index)
    channels = sample_channel(ch, stream_rng(seed, 0))

    if config.training_kind is TrainingKind.EXHAUSTIVE:
        if (tr.m_bs, tr.m_ms) != (n_bs, n_ms):
            raise ValueError(
                f"exhaustive training needs m_bs={n_bs}, m_ms={n_ms}; got {tr.m_bs}, {tr.m_ms}"
            )
        P_mat = A_bs
    else:
        P_mat = gen_training_matrix(n_bs, tr.m_bs, tr.nq_bs, tr.normalize_columns, stream_rng(seed, 1))

    sigma2 = noise_power(ch.link)
    train_noise = 0.0 if config.noiseless_training else sigma2
    Hs = [channel_matrix(r, bs, ms) for r in channels]
    estimates = []
    for u, real in enumerate(channels):
        rng = stream_rng(seed, 2 + u)
        if config.training_kind is TrainingKind.EXHAUSTIVE:
            Q_mat = A_ms
        else:
            Q_mat = gen_training_matrix(n_ms, tr.m_ms, tr.nq_ms, tr.normalize_columns, rng)
        op = build_sensing_operator(P_mat, Q_mat, A_bs, A_ms)
        rec = synthesize_measurements(
            Hs[u], P_mat, Q_mat, tr.training_power_w, train_noise, rng, operator=op, shared_noise=config.shared_noise
        )
        estimates.append(recover_support_omp(op, rec.y, config.sparsity))

    truth_idx = [_truth_indices(r, n_bs, n_ms) for r in channels]
    success = tuple(
        e.aoa_index == aoa and e.aod_index == aod for e, (aoa, aod) in zip(estimates, truth_idx)
    )
    snr = nominal_snr(ch.link)
    single = tuple(single_user_rate(r.gain, snr, n_users, n_bs, n_ms) for r in channels)

    if config.rate_mode is RateMode.INDICATOR:
        oracle = [SupportEstimate((Atom(r.aoa_grid_index, r.aod_grid_index, 0j),), 0.0) for r in channels]
        rates = tuple(indicator_rate(u, r, estimates, snr, n_bs, n_ms) for u, r in enumerate(channels))
        perfect = tuple(indicator_rate(u, r, oracle, snr, n_bs, n_ms) for u, r in enumerate(channels))
    else:
        quant = tr.nq_bs if config.requantize_precoder else None
        p_t = ch.link.tx_power_w
        solution = conjugate_beamformers(estimates, bs_grid, ms_grid, bs, ms, quant)
        reference = steering_beamformers(
            [r.aoa for r in channels], [r.aod for r in channels], bs, ms, n_bs, quant
        )
        rates = tuple(sinr_rate(H, solution, u, p_t, sigma2) for u, H in enumerate(Hs))
        perfect = tuple(sinr_rate(H, reference, u, p_t, sigma2) for u, H in enumerate(Hs))

    return TrialResult(success, rates, single, perfect, tr.n_measurements, tuple(channels), tuple(estimates))


def run_trials(config: ExperimentConfig, n_trials: Optional[int] = None, threads: int = 1) -> list[TrialResult]:
    """Run trials ``0..n_trials-1`` and return them in trial-index order."""
    n = config.n_trials if n_trials is None else n_trials
    work = partial(run_trial, config)
    if threads <= 1 or n < 2:
        return [work(i) for i in range(n)]
    chunk = max(1, n // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, range(n), chunksize=chunk))


# ---------------------------------------------------------------- aggregation

def wilson_interval(successes: int, total: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(successes, total).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class RecoveryEstimate:
    p_hat: float
    wilson_low: float
    wilson_high: float
    successes: int
    total: int
    m_bs: int
    m_ms: int

    @property
    def training_symbols(self) -> int:
        return self.m_bs * self.m_ms


def _recovery_from_trials(trials: Sequence[TrialResult], m_bs: int, m_ms: int) -> RecoveryEstimate:
    hits = sum(sum(t.per_user_success) for t in trials)
    total = sum(len(t.per_user_success) for t in trials)
    low, high = wilson_interval(hits, total)
    return RecoveryEstimate(hits / total, low, high, hits, total, m_bs, m_ms)


def estimate_recovery_probability(
    config: ExperimentConfig, m_total: int, n_trials: Optional[int] = None, threads: int = 1
) -> RecoveryEstimate:
    """Pooled per-user support-recovery rate at budget ``m_total`` with a 95% Wilson interval."""
    cfg = config if config.training_kind is TrainingKind.EXHAUSTIVE else config.with_measurements(m_total)
    trials = run_trials(cfg, n_trials, threads)
    return _recovery_from_trials(trials, cfg.training.m_bs, cfg.training.m_ms)


class MEpsilonNotFound(RuntimeError):
    def __init__(self, eps: float, curve: list[tuple[int, RecoveryEstimate]]):
        self.eps = eps
        self.curve = curve
        best = max((r.p_hat for _, r in curve), default=float("nan"))
        super().__init__(f"no measurement count reaches success probability {1 - eps:.6g} (best {best:.6g})")


@dataclass(frozen=True)
class MEpsilonResult:
    m_eps: int
    point: MeasurementPoint
    curve: list[tuple[int, RecoveryEstimate]]


def find_m_epsilon(
    config: ExperimentConfig,
    eps: float,
    m_grid: Sequence[int],
    n_trials: Optional[int] = None,
    use_lower_bound: bool = False,
    threads: int = 1,
) -> MEpsilonResult:
    """Smallest budget in ``m_grid`` whose recovery probability reaches ``1 - eps``.

    With ``use_lower_bound`` the Wilson lower limit must reach the target
    instead of the point estimate. The whole grid is evaluated so the full
    curve is always available.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if list(m_grid) != sorted(m_grid):
        raise ValueError("m_grid must be ascending")
    curve = [(m, estimate_recovery_probability(config, m, n_trials, threads)) for m in m_grid]
    for m, est in curve:
        level = est.wilson_low if use_lower_bound else est.p_hat
        if level >= 1.0 - eps:
            return MEpsilonResult(m, MeasurementPoint(m, est.m_bs, est.m_ms), curve)
    raise MEpsilonNotFound(eps, curve)


@dataclass
class SweepRow:
    m_requested: int
    m_bs: int
    m_ms: int
    training_symbols: int
    n_users: int
    n_trials: int
    mean_rate: float
    stderr: float
    tagged_user_rate: float
    mean_sum_rate: float
    perfect_csi_rate: float
    perfect_csi_stderr: float
    single_user_rate: float
    p_hat: float
    p_wilson_low: float
    p_wilson_high: float
    lower_bound: float
    coherence_length: Optional[float] = None
    effective_rate: Optional[float] = None
    effective_stderr: Optional[float] = None
    effective_bound: Optional[float] = None
    is_argmax: Optional[bool] = None


@dataclass
class SweepTable:
    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)

    @staticmethod
    def columns() -> list[str]:
        return [f.name for f in fields(SweepRow)]


def _mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / np.sqrt(values.size))


def summarize(config: ExperimentConfig, point: MeasurementPoint, trials: Sequence[TrialResult]) -> SweepRow:
    """Aggregate per-trial results (trial-index order) into one sweep row."""
    rates = np.array([t.per_user_rate for t in trials])
    perfect = np.array([t.per_user_perfect_rate for t in trials])
    single = np.array([t.per_user_single_rate for t in trials])
    mean_rate, se = _mean_and_stderr(rates.mean(axis=1))
    perfect_rate, perfect_se = _mean_and_stderr(perfect.mean(axis=1))
    rec = _recovery_from_trials(trials, point.m_bs, point.m_ms)
    r_single = float(single.mean())
    ch = config.channel
    return SweepRow(
        m_requested=point.requested,
        m_bs=point.m_bs,
        m_ms=point.m_ms,
        training_symbols=trials[0].training_symbols,
        n_users=ch.n_users,
        n_trials=len(trials),
        mean_rate=mean_rate,
        stderr=se,
        tagged_user_rate=float(rates[:, 0].mean()),
        mean_sum_rate=float(rates.sum(axis=1).mean()),
        perfect_csi_rate=perfect_rate,
        perfect_csi_stderr=perfect_se,
        single_user_rate=r_single,
        p_hat=rec.p_hat,
        p_wilson_low=rec.wilson_low,
        p_wilson_high=rec.wilson_high,
        lower_bound=rate_lower_bound(r_single, ch.n_users, ch.bs_geometry.n_antennas, rec.p_hat),
    )


def _sweep_points(config: ExperimentConfig, expected: type):
    if not isinstance(config.sweep, expected):
        raise ValueError(f"config does not carry a {expected.__name__}")
    return config.sweep.points


def _metadata(config: ExperimentConfig, rows: Sequence[SweepRow]) -> dict:
    return {
        "master_seed": config.master_seed,
        "n_trials": config.n_trials,
        "n_users": config.channel.n_users,
        "training_symbols": [r.training_symbols for r in rows],
    }


def sweep_measurements(config: ExperimentConfig, threads: int = 1) -> SweepTable:
    """Mean per-user rate, perfect-CSI reference and recovery rate per measurement budget."""
    rows = []
    for point in _sweep_points(config, MeasurementSweep):
        log.info("measurement sweep: M=%d (%d x %d)", point.requested, point.m_bs, point.m_ms)
        trials = run_trials(config.with_point(point), threads=threads)
        rows.append(summarize(config, point, trials))
    return SweepTable(rows, _metadata(config, rows))


def sweep_coherence(config: ExperimentConfig, threads: int = 1) -> SweepTable:
    """Training-overhead-discounted rates over coherence lengths and budgets.

    The effective rate of a row is its mean rate times
    ``max(0, 1 - m_bs*m_ms / L_C)``; ``is_argmax`` marks the budget that
    maximizes it for each coherence length.
    """
    sweep = config.sweep
    points = _sweep_points(config, CoherenceSweep)
    base = []
    for point in points:
        log.info("coherence sweep: M=%d (%d x %d)", point.requested, point.m_bs, point.m_ms)
        base.append(summarize(config, point, run_trials(config.with_point(point), threads=threads)))

    ch = config.channel
    rows = []
    for lc in sweep.coherence_lengths:
        block = []
        for row in base:
            factor = max(0.0, 1.0 - row.training_symbols / lc)
            bound = rate_lower_bound(row.single_user_rate, ch.n_users, ch.bs_geometry.n_antennas, row.p_hat)
            block.append(
                replace(
                    row,
                    coherence_length=lc,
                    effective_rate=row.mean_rate * factor,
                    effective_stderr=row.stderr * factor,
                    effective_bound=bound * factor,
                    is_argmax=False,
                )
            )
        best = max(range(len(block)), key=lambda i: (block[i].effective_rate, -i))
        block[best].is_argmax = True
        rows.extend(block)
    meta = _metadata(config, base)
    meta["epsilon"] = sweep.epsilon
    reached = [row for row in base if row.p_hat >= 1.0 - sweep.epsilon]
    if reached:
        row = reached[0]
        meta["m_eps_training_symbols"] = row.training_symbols
        meta["bound_at_m_eps"] = [
            effective_rate(
                row.single_user_rate, ch.n_users, ch.bs_geometry.n_antennas,
                row.training_symbols, lc, sweep.epsilon, clamp=True,
            )
            for lc in sweep.coherence_lengths
        ]
    else:
        meta["m_eps_training_symbols"] = None
    return SweepTable(rows, meta)
