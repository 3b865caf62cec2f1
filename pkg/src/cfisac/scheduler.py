"""Adaptive precision/timeliness weighting and whole-grid sensing sweeps.

For each grid point the weight pair starts timeliness-heavy and shifts one
step toward precision per round until the measured detection probability
clears the target (strict >) or the schedule is exhausted; the final round is
re-scored with a larger Monte Carlo budget. Sweeps aggregate the per-point
records into the age-of-sensing total and the covered-area percentage
(coverage counts P_d >= threshold).

Randomness is fanned out deterministically: the scene uses the master seed
directly, and every (point, purpose) Monte Carlo stage draws from
SeedSequence([master_seed, point_index, purpose]). Weight rounds at one point
share streams on purpose (common random numbers), which makes candidates at
the same point directly comparable and keeps serial and pooled runs
identical.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .config import ScenarioConfig
from .detector import (
    SensingModel,
    assemble_sensing_model,
    calibrate_threshold,
    detection_probability,
    evaluate_detection,
)
from .optimizer import PointSolution, build_problem, solve_point
from .precoding import PrecoderSet, mrt_sensing_precoder, rzf_precoders
from .scene import Scene, build_scene

_PURPOSE_CALIBRATE = 1
_PURPOSE_PD = 2
_PURPOSE_REPORT = 3


def _stream(master_seed: int, point_index: int, purpose: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, point_index, purpose])


@dataclass(frozen=True)
class WeightSchedule:
    """Precision weight ladder w0(z) = 1 - step_size * (max_iterations - z)."""

    step_size: float
    max_iterations: int

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0.0 < self.step_size <= 1.0:
            raise ValueError("step_size must lie in (0, 1]")

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "WeightSchedule":
        return cls(step_size=config.weight_step_value, max_iterations=config.weight_steps)

    def weights(self, iteration: int) -> tuple[float, float]:
        """(precision, timeliness) at 1-indexed round `iteration`, clamped to [0, 1]."""
        if not 1 <= iteration <= self.max_iterations:
            raise ValueError(
                f"iteration {iteration} outside 1..{self.max_iterations}"
            )
        w0 = 1.0 - self.step_size * (self.max_iterations - iteration)
        w0 = min(1.0, max(0.0, w0))
        return w0, 1.0 - w0

    def grid(self) -> tuple[float, ...]:
        return tuple(self.weights(z)[0] for z in range(1, self.max_iterations + 1))


@dataclass(frozen=True)
class Candidate:
    """Outcome of one weight round at one point (optimizer + quick Monte Carlo)."""

    zeta: int
    weight_precision: float
    weight_timeliness: float
    solution: PointSolution
    threshold: float
    p_d: float

    @property
    def feasible(self) -> bool:
        return self.solution.feasible


@dataclass(frozen=True)
class PointRecord:
    """Final per-point row; the tabular schema emitted by the harness."""

    point_index: int
    x_m: float
    y_m: float
    blocklength: int
    sensing_power_w: float
    detection_prob: float
    threshold: float
    p_fa_empirical: float
    weight_precision: float
    weight_timeliness: float
    zeta: int  # 0 for fixed-weight sweeps
    feasible: bool
    outage: bool
    objective: float
    ccp_iterations: int
    converged: bool

    CSV_FIELDS = (
        "point_index",
        "x_m",
        "y_m",
        "blocklength",
        "sensing_power_w",
        "detection_prob",
        "threshold",
        "p_fa_empirical",
        "weight_precision",
        "weight_timeliness",
        "zeta",
        "feasible",
        "outage",
        "objective",
        "ccp_iterations",
        "converged",
    )

    def to_row(self) -> dict:
        return {name: getattr(self, name) for name in self.CSV_FIELDS}


@dataclass(frozen=True)
class SweepResult:
    """All per-point records plus the two aggregate sensing metrics."""

    records: tuple[PointRecord, ...]
    p_th: float
    symbol_rate_hz: float

    @property
    def aos_total_s(self) -> float:
        """Age of sensing: total grid revisit time, sum(tau) / symbol rate.

        Infeasible points transmit nothing and contribute zero symbols.
        """
        return sum(r.blocklength for r in self.records) / self.symbol_rate_hz

    @property
    def coverage_pct(self) -> float:
        return self.coverage_at(self.p_th)

    def coverage_at(self, p_th: float) -> float:
        """Share of grid points whose reported P_d reaches `p_th` (>=), percent."""
        if not self.records:
            return 0.0
        hits = sum(1 for r in self.records if r.detection_prob >= p_th)
        return 100.0 * hits / len(self.records)

    @property
    def outage_count(self) -> int:
        return sum(1 for r in self.records if r.outage)


def adaptive_search(
    schedule: WeightSchedule,
    p_th: float,
    evaluate: Callable[[int, float, float], Candidate],
) -> Candidate:
    """Walk the weight ladder until detection clears p_th (strict).

    `evaluate` maps (round, w0, w1) to a Candidate. The search stops early on
    an infeasible round: feasibility of the power/SINR stage does not depend
    on the weights, so no later round could recover.
    """
    cand = None
    for zeta in range(1, schedule.max_iterations + 1):
        w0, w1 = schedule.weights(zeta)
        cand = evaluate(zeta, w0, w1)
        if not cand.feasible:
            break
        if cand.p_d > p_th:
            break
    return cand


# ---------------------------------------------------------------------- #
# sweep plumbing


@dataclass
class SweepContext:
    """Shared per-deployment state: scene, UE precoding rows, bookkeeping."""

    scene: Scene
    config: ScenarioConfig
    ue_directions: np.ndarray  # (K, L*M) unit-norm RZF rows
    master_seed: int
    workers: int
    _setups: dict = field(default_factory=dict, repr=False)

    @classmethod
    def create(
        cls,
        config: ScenarioConfig,
        scene: Optional[Scene] = None,
        master_seed: Optional[int] = None,
        workers: Optional[int] = None,
    ) -> "SweepContext":
        seed = config.master_seed if master_seed is None else master_seed
        if scene is None:
            scene = build_scene(config, seed)
        if config.num_ues:
            ue_dirs = rzf_precoders(
                scene.channels.ue_channels, config.rzf_regularizer_value
            )
        else:
            dim = scene.channels.target_channel.shape[0]
            ue_dirs = np.zeros((0, dim), dtype=complex)
        return cls(
            scene=scene,
            config=config,
            ue_directions=ue_dirs,
            master_seed=seed,
            workers=config.workers if workers is None else workers,
        )

    def point_setup(self, point_index: int) -> "PointSetup":
        if point_index not in self._setups:
            sc = self.scene.for_point(point_index)
            probing = mrt_sensing_precoder(sc.channels.target_channel)
            precoders = PrecoderSet(
                vectors=np.vstack([probing[None, :], self.ue_directions]),
                antennas_per_ap=self.config.antennas_per_ap,
                rzf_regularizer=self.config.rzf_regularizer_value,
            )
            model = assemble_sensing_model(
                sc.channels, sc.angles, precoders.sensing_slices()
            )
            self._setups[point_index] = PointSetup(
                scene=sc, precoders=precoders, model=model
            )
        return self._setups[point_index]


@dataclass(frozen=True)
class PointSetup:
    scene: Scene
    precoders: PrecoderSet
    model: SensingModel


def _evaluate_candidate(
    ctx: SweepContext, setup: PointSetup, point_index: int, zeta: int, w0: float, w1: float
) -> Candidate:
    cfg = ctx.config
    problem = build_problem(
        setup.scene,
        setup.precoders,
        (w0, w1),
        cfg.sinr_threshold_linear,
        cfg.max_ap_power_w,
        (cfg.min_blocklength, cfg.max_blocklength),
        sensing_model=setup.model,
        eigenvalue_cutoff=cfg.eigenvalue_cutoff,
    )
    solution = solve_point(
        problem,
        tol=cfg.ccp_tol,
        max_iters=cfg.ccp_max_iters,
        fpp_penalty_base=cfg.fpp_penalty_base,
        fpp_slack_tol=cfg.fpp_slack_tol,
    )
    if not solution.feasible:
        return Candidate(
            zeta=zeta,
            weight_precision=w0,
            weight_timeliness=w1,
            solution=solution,
            threshold=float("nan"),
            p_d=0.0,
        )
    noise = setup.scene.channels.noise_power
    rho0 = float(solution.power_coefficients[0])
    threshold = calibrate_threshold(
        setup.model,
        rho0,
        solution.blocklength,
        noise,
        cfg.false_alarm_prob,
        cfg.opt_trials,
        _stream(ctx.master_seed, point_index, _PURPOSE_CALIBRATE),
    )
    p_d = detection_probability(
        setup.model,
        rho0,
        solution.blocklength,
        noise,
        threshold,
        cfg.opt_trials,
        _stream(ctx.master_seed, point_index, _PURPOSE_PD),
    )
    return Candidate(
        zeta=zeta,
        weight_precision=w0,
        weight_timeliness=w1,
        solution=solution,
        threshold=threshold,
        p_d=p_d,
    )


def _finalize_record(
    ctx: SweepContext, setup: PointSetup, point_index: int, cand: Candidate, p_th: float
) -> PointRecord:
    cfg = ctx.config
    sol = cand.solution
    position = ctx.scene.geometry.sensing_points[point_index]
    if sol.feasible:
        report = evaluate_detection(
            setup.model,
            float(sol.power_coefficients[0]),
            sol.blocklength,
            setup.scene.channels.noise_power,
            cfg.false_alarm_prob,
            cfg.report_trials,
            _stream(ctx.master_seed, point_index, _PURPOSE_REPORT),
        )
        p_d, threshold, p_fa = report.p_d, report.threshold, report.p_fa_empirical
    else:
        p_d, threshold, p_fa = 0.0, float("nan"), float("nan")
    outage = (not sol.feasible) or (p_d < p_th)
    return PointRecord(
        point_index=point_index,
        x_m=float(position[0]),
        y_m=float(position[1]),
        blocklength=sol.blocklength,
        sensing_power_w=float(sol.power_coefficients[0]) if sol.feasible else 0.0,
        detection_prob=p_d,
        threshold=threshold,
        p_fa_empirical=p_fa,
        weight_precision=cand.weight_precision,
        weight_timeliness=cand.weight_timeliness,
        zeta=cand.zeta,
        feasible=sol.feasible,
        outage=outage,
        objective=sol.objective,
        ccp_iterations=sol.ccp_iterations,
        converged=sol.converged,
    )


def adaptive_point_record(ctx: SweepContext, point_index: int) -> PointRecord:
    """Full adaptive pipeline for one grid point."""
    cfg = ctx.config
    setup = ctx.point_setup(point_index)
    schedule = WeightSchedule.from_config(cfg)
    cand = adaptive_search(
        schedule,
        cfg.detection_threshold,
        lambda zeta, w0, w1: _evaluate_candidate(ctx, setup, point_index, zeta, w0, w1),
    )
    return _finalize_record(ctx, setup, point_index, cand, cfg.detection_threshold)


def fixed_point_record(ctx: SweepContext, point_index: int, w0: float) -> PointRecord:
    """Single fixed-weight round for one grid point (zeta recorded as 0)."""
    setup = ctx.point_setup(point_index)
    cand = _evaluate_candidate(ctx, setup, point_index, 0, w0, 1.0 - w0)
    return _finalize_record(ctx, setup, point_index, cand, ctx.config.detection_threshold)


# worker-side globals for pooled sweeps
_WORKER_CTX: Optional[SweepContext] = None


def _init_worker(ctx: SweepContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _pool_point(args) -> PointRecord:
    point_index, w0 = args
    if w0 is None:
        return adaptive_point_record(_WORKER_CTX, point_index)
    return fixed_point_record(_WORKER_CTX, point_index, w0)


def _run_points(
    ctx: SweepContext, w0: Optional[float], progress: Optional[Callable[[str], None]]
) -> list[PointRecord]:
    count = ctx.scene.geometry.num_points
    if ctx.workers <= 1:
        records = []
        for i in range(count):
            if w0 is None:
                records.append(adaptive_point_record(ctx, i))
            else:
                records.append(fixed_point_record(ctx, i, w0))
            if progress and (i + 1) % 20 == 0:
                progress(f"    point {i + 1}/{count}")
        return records
    jobs = [(i, w0) for i in range(count)]
    with ProcessPoolExecutor(
        max_workers=ctx.workers, initializer=_init_worker, initargs=(ctx,)
    ) as pool:
        return list(pool.map(_pool_point, jobs))


def sweep_area(
    scene: Scene,
    config: ScenarioConfig,
    *,
    master_seed: Optional[int] = None,
    workers: Optional[int] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> SweepResult:
    """Adaptive-weight sweep over every sensing grid point."""
    ctx = SweepContext.create(config, scene=scene, master_seed=master_seed, workers=workers)
    records = _run_points(ctx, None, progress)
    return SweepResult(
        records=tuple(records),
        p_th=config.detection_threshold,
        symbol_rate_hz=config.symbol_rate_hz,
    )


def fixed_weight_sweep(
    scene: Scene,
    config: ScenarioConfig,
    w0: float,
    *,
    master_seed: Optional[int] = None,
    workers: Optional[int] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> SweepResult:
    """Sweep with one fixed precision weight for every point."""
    if not 0.0 <= w0 <= 1.0:
        raise ValueError(f"w0 must lie in [0, 1], got {w0}")
    ctx = SweepContext.create(config, scene=scene, master_seed=master_seed, workers=workers)
    records = _run_points(ctx, w0, progress)
    return SweepResult(
        records=tuple(records),
        p_th=config.detection_threshold,
        symbol_rate_hz=config.symbol_rate_hz,
    )
