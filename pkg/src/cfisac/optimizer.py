"""Joint sensing-blocklength and power optimization under SINR and power limits.

The design variables are the blocklength tau and per-symbol powers rho. The
substitution rho_bar = rho * tau makes the UE-SINR and per-AP power
constraints linear; the detection side enters through the mean statistic
separation, which an epigraph variable per Gram eigenvalue turns into a
difference-of-convex constraint. A convex-concave procedure (CCP) linearizes
the concave side around the previous iterate; when a fresh cut leaves the
subproblem infeasible, a penalized-slack phase (feasible-point pursuit)
restores it and the penalty doubles until the slack dies out.

Internally everything is scaled to noise units (statistic divided by the
noise power, epigraph curve x^2 / (x + 1)), which keeps subproblem
coefficients near unity and makes the precision weight comparable to the
timeliness weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import cvxpy as cp

from .detector import assemble_sensing_model, statistic_gap
from .precoding import PrecoderSet, stream_gains
from .scene import Scene


class SolverError(RuntimeError):
    """The convex backend returned an unusable status."""


@dataclass(frozen=True)
class OptimizationProblem:
    """Frozen per-point problem data.

    channel_gains[k, j] = |h_k^H w_j|^2 with column 0 the sensing stream;
    per_ap_norms[l, s] = ||w_{s, l}||^2; eigenvalues is the length-R retained
    Gram spectrum (descending, entries below the conditioning cutoff zeroed).
    """

    weight_precision: float  # drives the statistic separation
    weight_timeliness: float  # drives blocklength down
    sinr_threshold: float  # linear
    max_ap_power: float
    blocklength_bounds: tuple[float, float]
    channel_gains: np.ndarray  # (K, K+1)
    per_ap_norms: np.ndarray  # (L, K+1)
    eigenvalues: np.ndarray  # (R,) raw units
    antennas_per_ap: int
    noise_power: float

    @property
    def num_ues(self) -> int:
        return self.channel_gains.shape[0]

    @property
    def num_aps(self) -> int:
        return self.per_ap_norms.shape[0]

    @property
    def num_terms(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def statistic_scale(self) -> float:
        """Objective counts the statistic separation in noise units."""
        return 1.0 / self.noise_power

    def statistic_separation(self, sensing_power: float, blocklength: float) -> float:
        """Mean detector-statistic gap at a candidate operating point (raw units)."""
        return statistic_gap(
            self.eigenvalues,
            self.antennas_per_ap,
            sensing_power,
            blocklength,
            self.noise_power,
        )

    def objective_value(self, sensing_power: float, blocklength: float) -> float:
        gap = self.statistic_separation(sensing_power, blocklength)
        return (
            self.weight_precision * self.statistic_scale * gap
            - self.weight_timeliness * blocklength
        )


@dataclass(frozen=True)
class SubproblemState:
    """One CCP iterate. x/y live in noise units; lin_* feed the next cut."""

    rho_bar: np.ndarray  # (K+1,) power * blocklength
    blocklength: float
    x: np.ndarray  # (R,)
    y: np.ndarray  # (R,)
    lin_x: np.ndarray
    lin_y: np.ndarray
    surrogate: float
    slack_max: float
    iteration: int
    mode: str  # "ccp" or "fpp"
    penalty: float


@dataclass(frozen=True)
class PointSolution:
    """Final operating point for one sensing position."""

    blocklength: int
    power_coefficients: np.ndarray  # (K+1,) per-symbol watts
    objective: float  # true objective at the integer point
    surrogate_objective: float  # converged CCP surrogate (continuous point)
    ccp_iterations: int
    converged: bool
    feasible: bool
    diagnostics: dict


@dataclass(frozen=True)
class SubproblemSolution:
    status: str
    rho_bar: Optional[np.ndarray]
    blocklength: Optional[float]
    x: Optional[np.ndarray]
    y: Optional[np.ndarray]
    slack_max: float
    objective: float


@dataclass(frozen=True)
class _SubproblemData:
    """Noise-normalized, row-scaled constraint arrays fed to the backend."""

    sinr_rows: np.ndarray  # (K, K+1), includes the -g_kk / gamma_c own term
    tau_coeffs: np.ndarray  # (K,)
    norms: np.ndarray  # (L, K+1)
    max_ap_power: float
    coupling: np.ndarray  # (R,) x_i = coupling_i * rho_bar_0
    tau_min: float
    tau_max: float
    feas_tol: float


def build_problem(
    scene: Scene,
    precoders: PrecoderSet,
    weights: tuple[float, float],
    sinr_threshold: float,
    max_ap_power: float,
    blocklength_bounds: tuple[float, float],
    *,
    sensing_model=None,
    eigenvalue_cutoff: float = 1e-12,
) -> OptimizationProblem:
    """Assemble the per-point problem from channels, precoders, and spectrum.

    :param weights: (precision, timeliness), nonnegative and not both zero
    :param sinr_threshold: linear SINR floor per UE
    :param sensing_model: reuse a prebuilt spectral model; rebuilt here if None
    """
    w0, w1 = weights
    if w0 < 0 or w1 < 0 or (w0 == 0 and w1 == 0):
        raise ValueError(f"weights must be nonnegative and not both zero, got {weights}")
    if sinr_threshold <= 0:
        raise ValueError("sinr_threshold must be positive (linear units)")
    if max_ap_power <= 0:
        raise ValueError("max_ap_power must be positive")
    lo, hi = blocklength_bounds
    if not 0 < lo <= hi:
        raise ValueError(f"invalid blocklength bounds {blocklength_bounds}")
    gains = stream_gains(scene.channels, precoders)
    K = gains.shape[0]
    own = np.array([gains[k, k + 1] for k in range(K)])
    if np.any(own <= 0):
        raise ValueError("a UE has zero gain on its own stream; SINR floor unreachable")
    if sensing_model is None:
        sensing_model = assemble_sensing_model(
            scene.channels, scene.angles, precoders.sensing_slices()
        )
    R = sensing_model.num_receivers
    spectrum = np.array(sensing_model.gram_eigenvalues[:R])
    if spectrum.size and spectrum[0] > 0:
        spectrum[spectrum <= eigenvalue_cutoff * spectrum[0]] = 0.0
    return OptimizationProblem(
        weight_precision=float(w0),
        weight_timeliness=float(w1),
        sinr_threshold=float(sinr_threshold),
        max_ap_power=float(max_ap_power),
        blocklength_bounds=(float(lo), float(hi)),
        channel_gains=gains,
        per_ap_norms=precoders.per_ap_norms(),
        eigenvalues=spectrum,
        antennas_per_ap=sensing_model.antennas_per_ap,
        noise_power=scene.channels.noise_power,
    )


def _subproblem_data(problem: OptimizationProblem) -> _SubproblemData:
    K = problem.num_ues
    noise = problem.noise_power
    gains = problem.channel_gains / noise
    rows = np.zeros((K, K + 1))
    tau_coeffs = np.zeros(K)
    for k in range(K):
        row = gains[k].copy()
        row[k + 1] = -gains[k, k + 1] / problem.sinr_threshold
        scale = max(1.0, np.max(np.abs(row)))
        rows[k] = row / scale
        tau_coeffs[k] = 1.0 / scale  # the noise * tau term, after normalization
    coupling = problem.antennas_per_ap * problem.eigenvalues / noise
    lo, hi = problem.blocklength_bounds
    feas_tol = 1e-7 * max(1.0, problem.max_ap_power * hi)
    return _SubproblemData(
        sinr_rows=rows,
        tau_coeffs=tau_coeffs,
        norms=problem.per_ap_norms,
        max_ap_power=problem.max_ap_power,
        coupling=coupling,
        tau_min=lo,
        tau_max=hi,
        feas_tol=feas_tol,
    )


class CvxpyBackend:
    """Compiled convex subproblems for one (K, L, R) shape.

    Contract for alternative backends: given `_SubproblemData`, a cut point
    (lin_x, lin_y), weights, and an optional slack penalty, return a
    `SubproblemSolution` whose status is "optimal" or "infeasible";
    `check_feasible` returns the smallest uniform bound on the linear
    constraint rows (<= 0 means the linear stage is feasible). Problems are
    parametrized once and re-solved with new parameter values, which keeps a
    per-iteration solve around a couple of milliseconds.
    """

    def __init__(self, num_ues: int, num_aps: int, num_terms: int, solver: str = "CLARABEL"):
        self.num_ues = num_ues
        self.num_aps = num_aps
        self.num_terms = num_terms
        self.solver = solver
        self._programs: dict[str, dict] = {}

    # ------------------------------------------------------------------ #

    def _program(self, kind: str) -> dict:
        if kind not in self._programs:
            if kind == "feasibility":
                self._programs[kind] = self._build_feasibility()
            else:
                self._programs[kind] = self._build_subproblem(with_slack=(kind == "slack"))
        return self._programs[kind]

    def _base_params(self):
        K, L, n = self.num_ues, self.num_aps, self.num_terms
        p = {
            "norms": cp.Parameter((L, K + 1), nonneg=True),
            "pmax": cp.Parameter(nonneg=True),
            "tau_lo": cp.Parameter(nonneg=True),
            "tau_hi": cp.Parameter(nonneg=True),
        }
        if K:
            p["sinr_rows"] = cp.Parameter((K, K + 1))
            p["tau_coeffs"] = cp.Parameter(K, nonneg=True)
        return p

    def _build_subproblem(self, with_slack: bool) -> dict:
        K, L, n = self.num_ues, self.num_aps, self.num_terms
        rho = cp.Variable(K + 1, nonneg=True)
        tau = cp.Variable(nonneg=True)
        x = cp.Variable(n, nonneg=True)
        y = cp.Variable(n, nonneg=True)
        p = self._base_params()
        p.update(
            coupling=cp.Parameter(n, nonneg=True),
            cut_x=cp.Parameter(n, nonneg=True),  # 6 * lin_x
            cut_y=cp.Parameter(n, nonneg=True),  # 2 * lin_y
            cut_const=cp.Parameter(n),  # 3 lin_x^2 + lin_y^2
            w0=cp.Parameter(nonneg=True),
            w1=cp.Parameter(nonneg=True),
        )
        cons = [
            p["norms"] @ rho <= p["pmax"] * tau,
            tau >= p["tau_lo"],
            tau <= p["tau_hi"],
            x == cp.multiply(p["coupling"], rho[0]),
        ]
        if K:
            cons.append(p["sinr_rows"] @ rho + p["tau_coeffs"] * tau <= 0)
        # concave side of the statistic epigraph, linearized:
        #   (x + y)^2 + 2 y <= 6 x0 x + 2 y0 y - 3 x0^2 - y0^2   (noise units)
        quad = cp.square(x + y) + 2.0 * y
        cut = cp.multiply(p["cut_x"], x) + cp.multiply(p["cut_y"], y) - p["cut_const"]
        objective = p["w0"] * cp.sum(y) - p["w1"] * tau
        slack = None
        if with_slack:
            slack = cp.Variable(n, nonneg=True)
            p["penalty"] = cp.Parameter(nonneg=True)
            cons.append(quad <= cut + slack)
            objective = objective - p["penalty"] * cp.sum(slack)
        else:
            cons.append(quad <= cut)
        prob = cp.Problem(cp.Maximize(objective), cons)
        return {"prob": prob, "params": p, "vars": (rho, tau, x, y, slack)}

    def _build_feasibility(self) -> dict:
        K, L = self.num_ues, self.num_aps
        rho = cp.Variable(K + 1, nonneg=True)
        tau = cp.Variable(nonneg=True)
        v = cp.Variable()
        p = self._base_params()
        p["pscale"] = cp.Parameter(nonneg=True)
        cons = [
            p["norms"] @ rho - p["pmax"] * tau <= v * p["pscale"],
            tau >= p["tau_lo"],
            tau <= p["tau_hi"],
        ]
        if K:
            cons.append(p["sinr_rows"] @ rho + p["tau_coeffs"] * tau <= v)
        prob = cp.Problem(cp.Minimize(v), cons)
        return {"prob": prob, "params": p, "vars": (rho, tau, v)}

    # ------------------------------------------------------------------ #

    def _fill_base(self, params, data: _SubproblemData):
        params["norms"].value = data.norms
        params["pmax"].value = data.max_ap_power
        params["tau_lo"].value = data.tau_min
        params["tau_hi"].value = data.tau_max
        if self.num_ues:
            params["sinr_rows"].value = data.sinr_rows
            params["tau_coeffs"].value = data.tau_coeffs

    def check_feasible(self, data: _SubproblemData) -> float:
        """Smallest uniform slack on the linear rows; <= 0 means feasible."""
        prog = self._program("feasibility")
        params = prog["params"]
        self._fill_base(params, data)
        params["pscale"].value = max(1.0, data.max_ap_power * data.tau_max)
        status = self._run(prog["prob"])
        if status not in ("optimal", "optimal_inaccurate"):
            raise SolverError(f"feasibility check returned status {status!r}")
        return float(prog["vars"][2].value)

    def solve_subproblem(
        self,
        data: _SubproblemData,
        lin_x: np.ndarray,
        lin_y: np.ndarray,
        weight_precision: float,
        weight_timeliness: float,
        penalty: Optional[float] = None,
    ) -> SubproblemSolution:
        kind = "plain" if penalty is None else "slack"
        prog = self._program(kind)
        params = prog["params"]
        self._fill_base(params, data)
        params["coupling"].value = data.coupling
        params["cut_x"].value = 6.0 * lin_x
        params["cut_y"].value = 2.0 * lin_y
        params["cut_const"].value = 3.0 * lin_x**2 + lin_y**2
        params["w0"].value = weight_precision
        params["w1"].value = weight_timeliness
        if penalty is not None:
            params["penalty"].value = penalty
        status = self._run(prog["prob"])
        if status in ("infeasible", "infeasible_inaccurate"):
            return SubproblemSolution(
                status="infeasible",
                rho_bar=None,
                blocklength=None,
                x=None,
                y=None,
                slack_max=math.inf,
                objective=-math.inf,
            )
        if status not in ("optimal", "optimal_inaccurate"):
            raise SolverError(f"subproblem returned status {status!r}")
        rho, tau, x, y, slack = prog["vars"]
        slack_max = 0.0 if slack is None else float(np.max(slack.value))
        xv = np.maximum(np.asarray(x.value, dtype=float), 0.0)
        yv = np.maximum(np.asarray(y.value, dtype=float), 0.0)
        surrogate = weight_precision * float(np.sum(yv)) - weight_timeliness * float(tau.value)
        return SubproblemSolution(
            status="optimal",
            rho_bar=np.maximum(np.asarray(rho.value, dtype=float), 0.0),
            blocklength=float(tau.value),
            x=xv,
            y=yv,
            slack_max=slack_max,
            objective=surrogate,
        )

    def _run(self, prob: cp.Problem) -> str:
        import warnings

        with warnings.catch_warnings():
            # reduced-accuracy terminations surface through the status string
            warnings.simplefilter("ignore", UserWarning)
            # warm_start would reuse the previous solver object through an
            # in-place data update, making each solve depend on what this
            # program solved before; that destabilizes borderline re-solves
            # and breaks run-order independence, so every solve starts cold
            prob.solve(solver=self.solver, warm_start=False)
        return prob.status


_BACKEND_CACHE: dict[tuple, CvxpyBackend] = {}


def get_backend(num_ues: int, num_aps: int, num_terms: int) -> CvxpyBackend:
    """Shared compiled backend per problem shape (compilation dominates solves)."""
    key = (num_ues, num_aps, num_terms)
    if key not in _BACKEND_CACHE:
        _BACKEND_CACHE[key] = CvxpyBackend(*key)
    return _BACKEND_CACHE[key]


def initial_state(problem: OptimizationProblem) -> SubproblemState:
    """Budget start: equal per-stream power at full budget and max blocklength."""
    data = _subproblem_data(problem)
    load = np.sum(problem.per_ap_norms, axis=1)  # per-AP power at unit coefficients
    share = problem.max_ap_power / float(np.max(load))
    tau0 = problem.blocklength_bounds[1]
    rho_bar = np.full(problem.num_ues + 1, share * tau0)
    lin_x = data.coupling * rho_bar[0]
    lin_y = _curve(lin_x)
    return SubproblemState(
        rho_bar=rho_bar,
        blocklength=tau0,
        x=lin_x,
        y=lin_y,
        lin_x=lin_x,
        lin_y=lin_y,
        surrogate=-math.inf,
        slack_max=math.inf,
        iteration=0,
        mode="ccp",
        penalty=0.0,
    )


def _curve(x: np.ndarray) -> np.ndarray:
    """Exact epigraph boundary y = x^2 / (x + 1) in noise units."""
    return x**2 / (x + 1.0)


def ccp_iteration(
    problem: OptimizationProblem,
    state: SubproblemState,
    *,
    backend: Optional[CvxpyBackend] = None,
    data: Optional[_SubproblemData] = None,
    fpp_penalty_base: float = 1e3,
    fpp_slack_tol: float = 1e-8,
) -> SubproblemState:
    """One linearize-and-solve step; falls into the penalized phase on its own.

    A plain subproblem made infeasible by the current cut is re-solved with a
    nonnegative slack on the cut, penalized at fpp_penalty_base * (w0 + w1)
    and doubled on every following iteration until the slack drops below
    fpp_slack_tol, after which iterations continue unpenalized.
    """
    if data is None:
        data = _subproblem_data(problem)
    if backend is None:
        backend = get_backend(problem.num_ues, problem.num_aps, problem.num_terms)
    w0, w1 = problem.weight_precision, problem.weight_timeliness
    if state.mode == "ccp":
        sol = backend.solve_subproblem(data, state.lin_x, state.lin_y, w0, w1)
        if sol.status == "infeasible":
            penalty = fpp_penalty_base * (w0 + w1)
            sol = backend.solve_subproblem(
                data, state.lin_x, state.lin_y, w0, w1, penalty=penalty
            )
            if sol.status == "infeasible":
                raise SolverError("subproblem infeasible even with slack variables")
            mode, next_penalty = "fpp", 2.0 * penalty
        else:
            mode, next_penalty = "ccp", 0.0
    else:
        sol = backend.solve_subproblem(
            data, state.lin_x, state.lin_y, w0, w1, penalty=state.penalty
        )
        if sol.status == "infeasible":
            raise SolverError("penalized subproblem infeasible")
        if sol.slack_max < fpp_slack_tol:
            mode, next_penalty = "ccp", 0.0
        else:
            mode, next_penalty = "fpp", 2.0 * state.penalty
    lin_x = sol.x
    return SubproblemState(
        rho_bar=sol.rho_bar,
        blocklength=sol.blocklength,
        x=sol.x,
        y=sol.y,
        lin_x=lin_x,
        lin_y=_curve(lin_x),  # re-anchor the cut on the true curve
        surrogate=sol.objective,
        slack_max=sol.slack_max,
        iteration=state.iteration + 1,
        mode=mode,
        penalty=next_penalty,
    )


def verify_solution(
    problem: OptimizationProblem, blocklength: float, power_coefficients: np.ndarray
) -> dict:
    """Constraint audit at a candidate point; violations are relative."""
    rho = np.asarray(power_coefficients, dtype=float)
    gains = problem.channel_gains
    K = problem.num_ues
    sinr_margin = math.inf
    for k in range(K):
        signal = rho[k + 1] * gains[k, k + 1]
        interference = float(rho @ gains[k]) - signal
        sinr = signal / (interference + problem.noise_power)
        sinr_margin = min(sinr_margin, sinr / problem.sinr_threshold - 1.0)
    ap_power = problem.per_ap_norms @ rho
    power_margin = float(np.max(ap_power) / problem.max_ap_power - 1.0)
    lo, hi = problem.blocklength_bounds
    violations = {
        "sinr": max(0.0, -sinr_margin) if K else 0.0,
        "power": max(0.0, power_margin),
        "blocklength": max(0.0, (lo - blocklength) / hi, (blocklength - hi) / hi),
    }
    return {
        "sinr_margin": sinr_margin if K else math.inf,
        "power_margin": power_margin,
        "max_violation": max(violations.values()),
        "violations": violations,
    }


def solve_point(
    problem: OptimizationProblem,
    *,
    init: Union[str, SubproblemState] = "budget",
    tol: float = 1e-4,
    max_iters: int = 50,
    fpp_penalty_base: float = 1e3,
    fpp_slack_tol: float = 1e-8,
    backend: Optional[CvxpyBackend] = None,
) -> PointSolution:
    """Run the CCP to convergence and return an integer-blocklength solution.

    The continuous optimum (rho_bar*, tau*) is turned into per-symbol powers
    rho = rho_bar* / tau* and the blocklength is rounded up to the next
    integer; scaling rho_bar by ceil(tau*) / tau* keeps every constraint
    satisfied exactly, so the rounded point never violates the SINR floor.
    An infeasible linear stage short-circuits with a certificate (the
    smallest uniform constraint slack) in the diagnostics.
    """
    data = _subproblem_data(problem)
    if backend is None:
        backend = get_backend(problem.num_ues, problem.num_aps, problem.num_terms)
    certificate = backend.check_feasible(data)
    if certificate > data.feas_tol:
        return PointSolution(
            blocklength=0,
            power_coefficients=np.zeros(problem.num_ues + 1),
            objective=-math.inf,
            surrogate_objective=-math.inf,
            ccp_iterations=0,
            converged=False,
            feasible=False,
            diagnostics={"infeasibility_certificate": certificate, "trajectory": []},
        )
    state = initial_state(problem) if isinstance(init, str) else init
    trajectory = []
    converged = False
    prev_pure: Optional[float] = None
    for _ in range(max_iters):
        state = ccp_iteration(
            problem,
            state,
            backend=backend,
            data=data,
            fpp_penalty_base=fpp_penalty_base,
            fpp_slack_tol=fpp_slack_tol,
        )
        pure = state.slack_max <= fpp_slack_tol
        trajectory.append(
            {
                "iteration": state.iteration,
                "surrogate": state.surrogate,
                "slack_max": state.slack_max,
                "mode": state.mode,
                "pure": pure,
            }
        )
        if pure:
            if prev_pure is not None and abs(state.surrogate - prev_pure) <= tol * max(
                1.0, abs(state.surrogate)
            ):
                converged = True
                break
            prev_pure = state.surrogate
    lo, hi = problem.blocklength_bounds
    tau_cont = float(np.clip(state.blocklength, lo, hi))
    # ceil with a guard wider than solver tolerance, so tau = n + 1e-8 stays n
    blocklength = int(math.ceil(tau_cont - 1e-6 * max(1.0, tau_cont)))
    blocklength = int(np.clip(blocklength, math.ceil(lo), math.floor(hi)))
    rho = state.rho_bar / tau_cont
    audit = verify_solution(problem, blocklength, rho)
    feasible = audit["max_violation"] <= 1e-6
    objective = problem.objective_value(rho[0], blocklength)
    diagnostics = {
        "trajectory": trajectory,
        "continuous_blocklength": tau_cont,
        "rho_bar": state.rho_bar,
        "x": state.x,
        "y": state.y,
        "infeasibility_certificate": certificate,
        "statistic_separation": problem.statistic_separation(rho[0], blocklength),
        **audit,
    }
    return PointSolution(
        blocklength=blocklength,
        power_coefficients=rho,
        objective=objective,
        surrogate_objective=state.surrogate,
        ccp_iterations=state.iteration,
        converged=converged,
        feasible=feasible,
        diagnostics=diagnostics,
    )
