"""End-to-end demand-response scenarios with regret bookkeeping."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .. import core, regret
from ..core import QUADRATIC, EngineConfig, EngineTrace
from ..demand_response import (
    AbsoluteTrackingOracle,
    Building,
    CentralizedPath,
    DemandResponseOracle,
    DualDomain,
    SetpointProcess,
    build_dr_oracle,
    primal_recovery,
    solve_path,
)
from ..regret import BoundInputs, BoundTerms, RegretLedger
from ..topology import (
    MixingParameters,
    NetworkMatrix,
    build_ring,
    estimate_mixing,
    require_valid,
    stationary_distribution,
)
from .config import ExplicitBuildings, RingNetwork, ScenarioConfig

MIXING_HORIZON = 200


def substream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for a named purpose under one master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(label.encode())]))


def build_network(cfg: ScenarioConfig) -> NetworkMatrix:
    spec = cfg.network
    if isinstance(spec, RingNetwork):
        return build_ring(spec.n, spec.self_weight)
    return NetworkMatrix(np.array(spec.rows, dtype=float))


def sample_buildings(cfg: ScenarioConfig) -> list[Building]:
    spec = cfg.buildings
    if isinstance(spec, ExplicitBuildings):
        return [Building(b.a_lo, b.a_hi, b.c) for b in spec.items]
    rng = substream(cfg.seed, "capacities")
    out = []
    for i in range(cfg.n):
        if i < spec.small_count:
            m = rng.uniform(*spec.small_magnitude)
            out.append(Building(-m, m, spec.c))
        else:
            hi = rng.uniform(*spec.large_upper)
            lo = rng.uniform(*spec.large_lower)
            out.append(Building(lo, hi, spec.c))
    return out


def sample_setpoints(cfg: ScenarioConfig) -> np.ndarray:
    process = SetpointProcess(cfg.setpoint.sigma, cfg.setpoint.s0)
    return process.sample(cfg.T, substream(cfg.seed, "setpoint"))


@dataclass
class Problem:
    """Everything about a scenario that exists before the engine runs."""

    config: ScenarioConfig
    network: NetworkMatrix
    pi: np.ndarray
    mixing: MixingParameters
    buildings: list[Building]
    setpoints: np.ndarray
    domain: DualDomain
    oracle: DemandResponseOracle
    optimum: CentralizedPath

    @property
    def engine_config(self) -> EngineConfig:
        return EngineConfig(beta=self.config.beta, T=self.config.T)


def prepare(cfg: ScenarioConfig, seed: int | None = None) -> Problem:
    cfg = cfg.with_seed(seed)
    P = build_network(cfg)
    require_valid(P)
    pi = stationary_distribution(P)
    mixing = estimate_mixing(P, pi, max(MIXING_HORIZON, 2 * P.n))
    buildings = sample_buildings(cfg)
    s = sample_setpoints(cfg)
    domain = DualDomain.for_buildings(buildings)
    oracle = build_dr_oracle(buildings, s, cfg.virtual_split)
    optimum = solve_path(s, buildings, domain)
    return Problem(cfg, P, pi, mixing, buildings, s, domain, oracle, optimum)


def bound_inputs(L: float, n: int, mixing: MixingParameters, beta: float, alpha: float,
                 x_star: np.ndarray, V_T: float | None = None) -> BoundInputs:
    """Bound constants for a run whose round optima are ``x_star[0..T]``."""
    optima = np.asarray(x_star, dtype=float)[1:]
    if V_T is None:
        V_T = regret.path_length(optima)
    return BoundInputs(
        L=L, n=n, p=mixing.p_max, gamma=mixing.gamma, nu=mixing.nu,
        Y=regret.estimate_Y(optima, alpha), beta=beta, V_T=float(V_T),
    )


def problem_bound_inputs(problem: Problem, V_T: float | None = None) -> BoundInputs:
    cfg = problem.config
    return bound_inputs(
        problem.oracle.lipschitz, cfg.n, problem.mixing, cfg.beta,
        problem.engine_config.alpha, problem.optimum.nu_star, V_T,
    )


@dataclass(frozen=True)
class RegretReport:
    ledger: RegretLedger
    cum_regret: np.ndarray
    avg_abs_regret: np.ndarray
    inputs: BoundInputs
    terms: BoundTerms
    bound_cum: np.ndarray
    bound_avg: np.ndarray
    lemma_violations: dict


def assess(engine: EngineTrace, f_star: np.ndarray, x_star: np.ndarray, inputs: BoundInputs,
           mixing: MixingParameters, scaling: str = "mean") -> RegretReport:
    ledger = RegretLedger(losses=engine.losses, f_star=f_star, x_star=x_star)
    T = ledger.T
    V = regret.cumulative_path_length(x_star)
    bound_cum = regret.bound_curve(inputs, T, V)
    bound_avg = np.zeros(T + 1)
    bound_avg[1:] = bound_cum[1:] / np.arange(1, T + 1)
    return RegretReport(
        ledger=ledger,
        cum_regret=regret.cumulative_network_regret(ledger),
        avg_abs_regret=regret.average_absolute_regret(ledger, scaling=scaling),
        inputs=inputs,
        terms=regret.theorem1_terms(inputs),
        bound_cum=bound_cum,
        bound_avg=bound_avg,
        lemma_violations=regret.lemma_violations(engine, inputs.L, mixing.gamma, mixing.nu, mixing.p_max),
    )


@dataclass(frozen=True)
class RunTrace:
    """Per-round record of a demand-response run (rows ``t = 0..T``)."""

    t: np.ndarray
    s: np.ndarray
    nu: np.ndarray
    a: np.ndarray
    f: np.ndarray
    dual_gap: np.ndarray
    virtual: np.ndarray
    nu_star: np.ndarray
    a_star: np.ndarray
    f_star: np.ndarray
    saturated: np.ndarray
    ybar_norm: np.ndarray
    cum_regret: np.ndarray
    avg_abs_regret: np.ndarray
    bound_cum: np.ndarray
    bound_avg: np.ndarray

    @property
    def T(self) -> int:
        return len(self.t) - 1

    @property
    def n(self) -> int:
        return self.nu.shape[1]

    def relative_dual_gap(self, t: int | None = None) -> np.ndarray:
        """``|nu_{i,t} - nu*_t| / |nu*_t|`` per building."""
        t = self.T if t is None else t
        return np.abs(self.nu[t] - self.nu_star[t]) / abs(self.nu_star[t])


@dataclass
class ScenarioRun:
    problem: Problem
    engine: EngineTrace
    report: RegretReport
    trace: RunTrace

    @property
    def theorem1_bound(self) -> float:
        return self.report.terms.total

    def unsaturated_rounds(self, tol: float = 1e-9) -> np.ndarray:
        """Mask of rounds whose centralised dispatch keeps every building strictly inside its box."""
        lo = np.array([b.a_lo for b in self.problem.buildings])
        hi = np.array([b.a_hi for b in self.problem.buildings])
        a = self.trace.a_star
        return np.all((a > lo + tol) & (a < hi - tol), axis=1)


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> ScenarioRun:
    """Sample, simulate and score one scenario; deterministic per ``(cfg, seed)``."""
    problem = prepare(cfg, seed)
    cfg = problem.config
    engine = core.run(
        problem.engine_config, problem.network, problem.pi, QUADRATIC,
        problem.domain.as_box(), problem.oracle, cfg.n,
    )
    nu_star = problem.optimum.nu_star
    f_star = np.array([problem.oracle.network_value(t, [nu_star[t]], cfg.n) for t in range(cfg.T + 1)])
    report = assess(engine, f_star, nu_star, problem_bound_inputs(problem), problem.mixing,
                    cfg.absolute_regret_scaling)

    nu = engine.x[:, :, 0]
    a = np.column_stack([primal_recovery(nu[:, i], b) for i, b in enumerate(problem.buildings)])
    trace = RunTrace(
        t=np.arange(cfg.T + 1),
        s=problem.setpoints,
        nu=nu,
        a=a,
        f=engine.losses,
        dual_gap=engine.consensus_error,
        virtual=problem.oracle.shares,
        nu_star=nu_star,
        a_star=problem.optimum.a_star,
        f_star=f_star,
        saturated=problem.optimum.saturated,
        ybar_norm=engine.ybar_norm,
        cum_regret=report.cum_regret,
        avg_abs_regret=report.avg_abs_regret,
        bound_cum=report.bound_cum,
        bound_avg=report.bound_avg,
    )
    return ScenarioRun(problem, engine, report, trace)


@dataclass
class SubgradientRun:
    oracle: AbsoluteTrackingOracle
    engine: EngineTrace
    report: RegretReport
    x_star: np.ndarray


def run_subgradient_scenario(cfg: ScenarioConfig, seed: int | None = None, slope: float = 1.0,
                             spread: float = 0.5) -> SubgradientRun:
    """Swap the dispatch losses for ``slope * |nu - target_{i,t}|``.

    Targets are the scenario's centralised multipliers shifted by a fixed
    per-agent offset drawn from ``U(-spread, spread)``, so agents disagree and
    the network optimum is their median.
    """
    problem = prepare(cfg, seed)
    cfg = problem.config
    n, T = cfg.n, cfg.T
    offsets = substream(cfg.seed, "targets").uniform(-spread, spread, size=n)
    targets = problem.optimum.nu_star[:, None] + offsets[None, :]
    oracle = AbsoluteTrackingOracle(targets, np.full(n, float(slope)))
    box = problem.domain.as_box()
    engine = core.run(problem.engine_config, problem.network, problem.pi, QUADRATIC, box, oracle, n)
    x_star = np.array([oracle.optimum(t, box) for t in range(T + 1)])
    f_star = np.array([oracle.network_value(t, [x_star[t]], n) for t in range(T + 1)])
    inputs = bound_inputs(oracle.lipschitz, n, problem.mixing, cfg.beta,
                          problem.engine_config.alpha, x_star)
    report = assess(engine, f_star, x_star, inputs, problem.mixing, cfg.absolute_regret_scaling)
    return SubgradientRun(oracle, engine, report, x_star)
