"""Encoding-ladder optimization.

Minimizes the expected streaming bitrate R(r) subject to the expected
delivered quality Q(r) >= Q0, with per-entry bitrate bounds taken from the
rate-quality curves and ladder ordering r_1 + gap <= r_2 + gap <= ...

The solver is NLopt's method of moving asymptotes (``LD_MMA``) driven by
the analytic gradients of the player model. It works on log-bitrates so
entries spanning kbps to Mbps are equally scaled. The problem is not
convex, so several starts are tried and the cheapest feasible ladder wins.
"""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional, Sequence

import nlopt
import numpy as np

from .errors import InfeasibleProblemError, PreconditionError
from .player_model import Ladder, ModelEvaluation, evaluate
from .rq_model import ChunkRqModel, bitrate_range
from .stats_ingest import (
    SMOOTHING_MODES,
    BandwidthDistribution,
    Smoothing,
    ViewportDistribution,
)

logger = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    """Solver settings.

    Attributes:
        q0: Quality floor; None derives it from a reference ladder
        starts: Number of jittered starts added to the baseline starts
        seed: Seed for start jitter
        max_iters: Evaluation budget per start and phase
        min_gap_bps: Minimum bitrate gap between consecutive entries
        cdf_smoothing: Bandwidth CDF smoothing used while optimizing
        rel_tol: Relative objective change treated as stalled
        stall_window: Number of evaluations the change must stay below rel_tol
        jitter_sigma: Standard deviation of the log-space start jitter
        record_history: Keep the objective value of every evaluation
    """

    q0: Optional[float] = None
    starts: int = 8
    seed: int = 0
    max_iters: int = 500
    min_gap_bps: float = 1000.0
    cdf_smoothing: Smoothing = "piecewise_linear"
    rel_tol: float = 1e-6
    stall_window: int = 5
    jitter_sigma: float = 0.35
    record_history: bool = False

    def __post_init__(self):
        if self.starts < 0:
            raise ValueError(f"Start count must be >= 0, got {self.starts}")
        if self.max_iters < 1:
            raise ValueError(f"Iteration budget must be >= 1, got {self.max_iters}")
        if not self.min_gap_bps > 0:
            raise ValueError(f"Minimum gap must be positive, got {self.min_gap_bps}")
        if self.cdf_smoothing not in SMOOTHING_MODES:
            raise ValueError(f"Unknown CDF smoothing {self.cdf_smoothing!r}")
        if not self.rel_tol > 0 or self.stall_window < 1:
            raise ValueError("Stopping tolerance and window must be positive")
        if self.q0 is not None and not math.isfinite(self.q0):
            raise ValueError(f"Quality floor must be finite, got {self.q0}")


def project_ordered(
    bitrates: Sequence[float], lower: np.ndarray, upper: np.ndarray, gap: float
) -> np.ndarray:
    """Map bitrates into the box with consecutive entries at least ``gap`` apart.

    A forward pass raises entries to clear their predecessor, a backward pass
    lowers them below their successor. Feasible inputs come back unchanged;
    any input lands between the lowest and highest ordered ladders.
    """
    r = np.clip(np.asarray(bitrates, dtype=float), lower, upper)
    for i in range(1, r.size):
        r[i] = min(max(r[i], r[i - 1] + gap), upper[i])
    for i in range(r.size - 2, -1, -1):
        r[i] = max(min(r[i], r[i + 1] - gap), lower[i])
    return r


def fit_ladder(ladder: Ladder, model: ChunkRqModel, min_gap: float) -> Ladder:
    """Ladder moved into its curve ranges with consecutive bitrates ``min_gap`` apart.

    Ladders that already satisfy both come back with identical bitrates.
    """
    ranges = np.array([bitrate_range(model.curves[r]) for r in ladder.resolutions])
    fitted = project_ordered(ladder.bitrates, ranges[:, 0], ranges[:, 1], min_gap)
    if np.array_equal(fitted, ladder.bitrates):
        return ladder
    logger.debug("Moved ladder of chunk %s to keep a %.0f bps gap", model.chunk_id, min_gap)
    return Ladder.from_bitrates(ladder.resolutions, fitted, chunk_id=ladder.chunk_id)


@dataclass(frozen=True, eq=False)
class OptimizationProblem:
    """One chunk's ladder optimization problem.

    Attributes:
        model: Rate-quality curves of the chunk
        resolutions: Resolution of each ladder entry, non-decreasing
        viewport: Viewport distribution
        bandwidth: Bandwidth distribution, in the smoothing used to optimize
        quality_floor: Q0
        min_gap: Minimum bitrate gap between consecutive entries
        witnesses: Known ladders (bitrate vectors) that may certify Q0 is attainable
    """

    model: ChunkRqModel
    resolutions: tuple[int, ...]
    viewport: ViewportDistribution
    bandwidth: BandwidthDistribution
    quality_floor: float
    min_gap: float = 1000.0
    witnesses: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "resolutions", tuple(int(r) for r in self.resolutions))
        if not self.resolutions:
            raise PreconditionError("Problem needs at least one resolution")
        if list(self.resolutions) != sorted(self.resolutions):
            raise PreconditionError("Resolutions must be non-decreasing")
        missing = [r for r in self.resolutions if r not in self.model.curves]
        if missing:
            raise PreconditionError(f"Chunk {self.model.chunk_id!r} has no curve for {missing}")
        ranges = np.array([bitrate_range(self.model.curves[r]) for r in self.resolutions])
        object.__setattr__(self, "lower", ranges[:, 0].copy())
        object.__setattr__(self, "upper", ranges[:, 1].copy())

        lowest = project_ordered(self.lower, self.lower, self.upper, self.min_gap)
        if np.any(np.diff(lowest) < self.min_gap * (1 - 1e-12)) or np.any(lowest > self.upper):
            raise InfeasibleProblemError(
                f"Chunk {self.model.chunk_id!r}: bitrate bounds leave no ordered ladder"
            )
        if self.anchor() is None:
            raise InfeasibleProblemError(
                f"Chunk {self.model.chunk_id!r}: quality floor {self.quality_floor} "
                f"is not reached at the upper bounds or any reference ladder"
            )

    @property
    def n(self) -> int:
        return len(self.resolutions)

    @property
    def tolerance(self) -> float:
        """Allowed quality shortfall of a converged solution."""
        return 1e-6 * abs(self.quality_floor)

    def project(self, bitrates: Sequence[float]) -> np.ndarray:
        return project_ordered(bitrates, self.lower, self.upper, self.min_gap)

    def ladder(self, bitrates: Sequence[float]) -> Ladder:
        return Ladder.from_bitrates(self.resolutions, bitrates, chunk_id=self.model.chunk_id)

    def evaluate(self, bitrates: Sequence[float]) -> ModelEvaluation:
        return evaluate(self.ladder(bitrates), self.model, self.viewport, self.bandwidth)

    def anchor(self) -> Optional[np.ndarray]:
        """Highest-quality ordered ladder meeting the floor among the bound ladders and witnesses."""
        candidates = [self.project(self.upper), self.project(self.lower)]
        candidates += [self.project(w) for w in self.witnesses]
        best, best_quality = None, -math.inf
        for r in candidates:
            quality = self.evaluate(r).avg_quality
            if quality >= self.quality_floor and quality > best_quality:
                best, best_quality = r, quality
        return best


@dataclass
class OptimizationResult:
    """Best ladder found for one problem.

    Attributes:
        ladder: Optimized ladder r*
        evaluation: Model evaluation at r* in the optimization smoothing
        step_evaluation: Model evaluation at r* with the exact step CDF
        converged: Whether r* meets the quality floor within tolerance
        iterations: Model evaluations spent on the winning start
        starts_tried: Number of starts attempted
        constraint_violation: max(0, Q0 - Q(r*))
        quality_floor: Q0
        start_index: Index of the winning start
        objective_history: R at each evaluation of the winning start, if recorded
    """

    ladder: Ladder
    evaluation: ModelEvaluation
    step_evaluation: ModelEvaluation
    converged: bool
    iterations: int
    starts_tried: int
    constraint_violation: float
    quality_floor: float
    start_index: int = 0
    objective_history: Optional[list[float]] = None

    def to_dict(self) -> dict:
        result = {
            "ladder": self.ladder.to_dict(),
            "quality_floor": self.quality_floor,
            "converged": self.converged,
            "iterations": self.iterations,
            "starts_tried": self.starts_tried,
            "start_index": self.start_index,
            "constraint_violation": self.constraint_violation,
            "evaluation": self.evaluation.to_dict(),
            "step_evaluation": self.step_evaluation.to_dict(),
        }
        if self.objective_history is not None:
            result["objective_history"] = self.objective_history
        return result


class _StartRun:
    """Both solver phases for one start, with a shared evaluation cache."""

    CACHE_SIZE = 16

    def __init__(self, problem: OptimizationProblem, config: SolverConfig):
        self.problem = problem
        self.config = config
        self.evaluations = 0
        self.history: list[float] = []
        self._cache: OrderedDict[bytes, ModelEvaluation] = OrderedDict()
        self._q_scale = max(abs(problem.quality_floor), 1e-12)

    def evaluate(self, r: np.ndarray) -> ModelEvaluation:
        """Model evaluation at ``r``, or at its projection when ``r`` is out of order."""
        if not self._ordered(r):
            r = self.problem.project(r)
        key = r.tobytes()
        cached = self._cache.get(key)
        if cached is not None:
            self._cache.move_to_end(key)
            return cached
        result = self.problem.evaluate(r)
        self.evaluations += 1
        self._cache[key] = result
        if len(self._cache) > self.CACHE_SIZE:
            self._cache.popitem(last=False)
        return result

    def _ordered(self, r: np.ndarray) -> bool:
        return bool(np.all(np.diff(r) >= self.problem.min_gap * (1 - 1e-9)))

    def _new_opt(self) -> nlopt.opt:
        problem = self.problem
        opt = nlopt.opt(nlopt.LD_MMA, problem.n)
        opt.set_lower_bounds(np.log(problem.lower))
        opt.set_upper_bounds(np.log(problem.upper))
        opt.set_maxeval(self.config.max_iters)
        opt.set_ftol_rel(self.config.rel_tol)
        opt.set_xtol_rel(1e-12)
        if problem.n > 1:
            gap = problem.min_gap

            def ordering(result, x, grad):
                r = np.exp(x)
                result[:] = np.log(r[:-1] + gap) - x[1:]
                if grad.size > 0:
                    grad[:] = 0.0
                    idx = np.arange(problem.n - 1)
                    grad[idx, idx] = r[:-1] / (r[:-1] + gap)
                    grad[idx, idx + 1] = -1.0

            opt.add_inequality_mconstraint(ordering, [1e-12] * (problem.n - 1))
        return opt

    def _run(self, opt: nlopt.opt, x0: np.ndarray) -> None:
        lower, upper = opt.get_lower_bounds(), opt.get_upper_bounds()
        try:
            opt.optimize(np.clip(np.log(x0), lower, upper))
        except (nlopt.ForcedStop, nlopt.RoundoffLimited) as e:
            logger.debug("MMA stopped early: %s", type(e).__name__)
        except RuntimeError as e:
            logger.debug("MMA failed: %s", e)

    def _stalled(self, values: list[float]) -> bool:
        window = self.config.stall_window
        if len(values) <= window:
            return False
        last = values[-1]
        scale = max(abs(last), 1e-300)
        return all(abs(last - v) / scale < self.config.rel_tol for v in values[-window - 1 : -1])

    def _repair(self, feasible: np.ndarray, candidate: np.ndarray) -> np.ndarray:
        """Furthest point from ``feasible`` towards ``candidate`` that meets the floor."""
        floor = self.problem.quality_floor
        lo, hi = 0.0, 1.0
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            point = self.problem.project(feasible + mid * (candidate - feasible))
            if self.evaluate(point).avg_quality >= floor:
                lo = mid
            else:
                hi = mid
        return self.problem.project(feasible + lo * (candidate - feasible))

    def reach_floor(self, start: np.ndarray) -> np.ndarray:
        """Drive a start to Q >= Q0 by maximizing Q; falls back to the anchor ladder."""
        problem = self.problem
        floor = problem.quality_floor
        if self.evaluate(start).avg_quality >= floor:
            return start

        reached: list[np.ndarray] = []
        opt = self._new_opt()
        q_scale = self._q_scale

        def objective(x, grad):
            r = np.exp(x)
            ev = self.evaluate(r)
            if grad.size > 0:
                grad[:] = -r * ev.grad_quality / q_scale
            if ev.avg_quality >= floor and self._ordered(r):
                reached.append(r.copy())
                opt.force_stop()
            return -ev.avg_quality / q_scale

        opt.set_min_objective(objective)
        self._run(opt, start)

        if reached:
            point = problem.project(reached[-1])
            if self.evaluate(point).avg_quality >= floor:
                return point
        anchor = problem.anchor()
        logger.debug("Start did not reach the floor; bisecting towards the anchor ladder")
        return self._repair(anchor, start)

    def minimize_bitrate(self, feasible: np.ndarray) -> np.ndarray:
        """Minimize R from a feasible point, keeping the best feasible evaluation."""
        problem = self.problem
        floor = problem.quality_floor
        accept = floor - 0.5 * problem.tolerance
        r_scale = self.evaluate(feasible).avg_bitrate
        q_scale = self._q_scale
        best = {"r": feasible.copy(), "R": self.evaluate(feasible).avg_bitrate}
        trace: list[float] = []
        opt = self._new_opt()

        def objective(x, grad):
            r = np.exp(x)
            ev = self.evaluate(r)
            if grad.size > 0:
                grad[:] = r * ev.grad_bitrate / r_scale
            if self.config.record_history:
                self.history.append(ev.avg_bitrate)
            if ev.avg_quality >= accept and self._ordered(r) and ev.avg_bitrate < best["R"]:
                best["r"], best["R"] = r.copy(), ev.avg_bitrate
            trace.append(ev.avg_bitrate)
            if self._stalled(trace):
                opt.force_stop()
            return ev.avg_bitrate / r_scale

        def quality(x, grad):
            r = np.exp(x)
            ev = self.evaluate(r)
            if grad.size > 0:
                grad[:] = -r * ev.grad_quality / q_scale
            return (floor - ev.avg_quality) / q_scale

        opt.set_min_objective(objective)
        opt.add_inequality_constraint(quality, 1e-12)
        self._run(opt, feasible)

        point = problem.project(best["r"])
        if self.evaluate(point).avg_quality < floor - problem.tolerance:
            point = self._repair(feasible, point)
        if self.evaluate(point).avg_bitrate > self.evaluate(feasible).avg_bitrate:
            return feasible
        return point


def solve(
    problem: OptimizationProblem,
    starts: Sequence[Ladder],
    config: Optional[SolverConfig] = None,
) -> OptimizationResult:
    """Minimize expected bitrate subject to the quality floor over all starts.

    Every start is first projected onto the ordered box. Starts below the
    floor are pushed up to it by maximizing quality, then bitrate is
    minimized under the quality constraint. The cheapest feasible result
    wins; ties go to the earliest start.

    Raises:
        PreconditionError: If no starts are given or a start doesn't match the problem
        InfeasibleProblemError: If no start can be brought to the quality floor
    """
    config = config or SolverConfig()
    if not starts:
        raise PreconditionError("solve needs at least one start")

    best: Optional[tuple[float, int, np.ndarray, _StartRun]] = None
    for index, start in enumerate(starts):
        if start.resolutions != list(problem.resolutions):
            raise PreconditionError(
                f"Start {index} resolutions {start.resolutions} do not match "
                f"problem resolutions {list(problem.resolutions)}"
            )
        run = _StartRun(problem, config)
        try:
            feasible = run.reach_floor(problem.project(start.bitrates))
        except InfeasibleProblemError:
            logger.debug("Start %d could not reach the quality floor", index)
            continue
        point = run.minimize_bitrate(feasible)
        ev = run.evaluate(point)
        logger.debug(
            "Start %d: R=%.1f Q=%.6f after %d evaluations",
            index, ev.avg_bitrate, ev.avg_quality, run.evaluations,
        )
        if ev.avg_quality < problem.quality_floor - problem.tolerance:
            continue
        if best is None or ev.avg_bitrate < best[0]:
            best = (ev.avg_bitrate, index, point, run)

    if best is None:
        raise InfeasibleProblemError(
            f"Chunk {problem.model.chunk_id!r}: no start reached quality floor "
            f"{problem.quality_floor}"
        )

    _, index, point, run = best
    ladder = problem.ladder(point)
    evaluation = run.evaluate(point)
    step_evaluation = evaluate(
        ladder, problem.model, problem.viewport, problem.bandwidth.with_smoothing("step")
    )
    violation = max(0.0, problem.quality_floor - evaluation.avg_quality)
    logger.info(
        "Chunk %s: R=%.1f bps, Q=%.4f (floor %.4f), start %d of %d",
        problem.model.chunk_id, evaluation.avg_bitrate, evaluation.avg_quality,
        problem.quality_floor, index, len(starts),
    )
    return OptimizationResult(
        ladder=ladder,
        evaluation=evaluation,
        step_evaluation=step_evaluation,
        converged=violation <= problem.tolerance,
        iterations=run.evaluations,
        starts_tried=len(starts),
        constraint_violation=violation,
        quality_floor=problem.quality_floor,
        start_index=index,
        objective_history=list(run.history) if config.record_history else None,
    )


def default_starts(
    problem: OptimizationProblem,
    baselines: Sequence[Ladder],
    config: Optional[SolverConfig] = None,
) -> list[Ladder]:
    """Projected baselines followed by ``config.starts`` log-jittered copies.

    Jittered starts cycle through the baselines (or the geometric middle of
    the bounds when there are none) and are seeded by ``config.seed``.
    """
    config = config or SolverConfig()
    bases = []
    for ladder in baselines:
        if ladder.resolutions != list(problem.resolutions):
            raise PreconditionError(
                f"Baseline resolutions {ladder.resolutions} do not match "
                f"problem resolutions {list(problem.resolutions)}"
            )
        bases.append(problem.project(ladder.bitrates))
    starts = [problem.ladder(r) for r in bases]
    if not bases:
        bases = [problem.project(np.sqrt(problem.lower * problem.upper))]

    rng = np.random.default_rng(config.seed)
    for k in range(config.starts):
        base = bases[k % len(bases)]
        jitter = np.exp(config.jitter_sigma * rng.standard_normal(problem.n))
        starts.append(problem.ladder(problem.project(base * jitter)))
    return starts


def build_problem(
    model: ChunkRqModel,
    vd: ViewportDistribution,
    bd: BandwidthDistribution,
    config: Optional[SolverConfig] = None,
    reference: Optional[Ladder] = None,
    resolutions: Optional[Sequence[int]] = None,
    witnesses: Sequence[Ladder] = (),
) -> OptimizationProblem:
    """Set up a problem, deriving Q0 from ``reference`` when the config leaves it open.

    Raises:
        PreconditionError: If Q0 is automatic and no reference ladder is given
    """
    config = config or SolverConfig()
    bd = bd.with_smoothing(config.cdf_smoothing)
    if config.q0 is not None:
        q0 = config.q0
    elif reference is not None:
        q0 = evaluate(reference, model, vd, bd).avg_quality
    else:
        raise PreconditionError("Automatic Q0 needs a reference ladder")

    resolutions = tuple(resolutions or model.resolutions)
    ladders = ([reference] if reference is not None else []) + list(witnesses)
    return OptimizationProblem(
        model=model,
        resolutions=resolutions,
        viewport=vd,
        bandwidth=bd,
        quality_floor=q0,
        min_gap=config.min_gap_bps,
        witnesses=tuple(l.bitrates for l in ladders if l.resolutions == list(resolutions)),
    )
