"""Setpoint tracking with flexible buildings, solved through its dual.

Each building ``i`` picks a power adjustment ``a_i`` in ``[a_lo, a_hi]`` (kW).
The aggregator wants ``sum_i a_i = s_t`` at minimum ``sum_i c_i a_i^2``.
Dualising the coupling constraint with a scalar multiplier ``nu`` splits the
problem into per-building losses over ``nu`` that the distributed engine
minimises online.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DecisionSet, LossOracle
from .errors import ContractViolation, InfeasibleSetpoint, NumericFailure

DOMAIN_MARGIN = 0.25
BALANCE_TOL = 1e-10
KKT_TOL = 1e-8


@dataclass(frozen=True)
class Building:
    a_lo: float
    a_hi: float
    c: float = 1.0

    def __post_init__(self):
        if not self.a_lo < 0 < self.a_hi:
            raise ContractViolation(
                f"building capacity must satisfy a_lo < 0 < a_hi, got [{self.a_lo}, {self.a_hi}]"
            )
        if not self.c > 0:
            raise ContractViolation(f"cost weight must be positive, got {self.c}")

    @property
    def capacity(self) -> float:
        return max(-self.a_lo, self.a_hi)


def _arrays(buildings):
    lo = np.array([b.a_lo for b in buildings], dtype=float)
    hi = np.array([b.a_hi for b in buildings], dtype=float)
    c = np.array([b.c for b in buildings], dtype=float)
    return lo, hi, c


def primal_recovery(nu, b: Building):
    """Adjustment a building implements for multiplier ``nu``: ``clamp(-nu / 2c)``."""
    return np.clip(-np.asarray(nu, dtype=float) / (2 * b.c), b.a_lo, b.a_hi)


def gamma_i(nu, b: Building):
    """``min_{a in box} c a^2 + nu a`` (concave in ``nu``)."""
    a = primal_recovery(nu, b)
    return b.c * a * a + nu * a


def local_dual_loss(nu, b: Building, s_i: float):
    """``-Gamma_i(nu) + nu s_i``."""
    return -gamma_i(nu, b) + nu * s_i


def local_dual_gradient(nu, b: Building, s_i: float):
    """Envelope-theorem (sub)gradient ``s_i - a*(nu)``."""
    return s_i - primal_recovery(nu, b)


@dataclass(frozen=True)
class DualDomain:
    nu_lo: float
    nu_hi: float

    def __post_init__(self):
        if not self.nu_lo < self.nu_hi:
            raise ContractViolation("dual domain must have nu_lo < nu_hi")

    @classmethod
    def for_buildings(cls, buildings, margin: float = DOMAIN_MARGIN) -> "DualDomain":
        _, _, c = _arrays(buildings)
        cap = max(b.capacity for b in buildings)
        half = 2 * float(c.max()) * cap * (1 + margin)
        return cls(-half, half)

    def as_box(self) -> DecisionSet:
        return DecisionSet.interval(self.nu_lo, self.nu_hi)


@dataclass(frozen=True)
class OracleSolution:
    a: np.ndarray
    nu: float
    saturated: bool = False


def aggregate_response(nu: float, buildings) -> float:
    lo, hi, c = _arrays(buildings)
    return float(np.clip(-nu / (2 * c), lo, hi).sum())


def _kkt_ok(a, nu, lo, hi, c, tol=KKT_TOL) -> bool:
    stationarity = 2 * c * a + nu
    interior = (a > lo) & (a < hi)
    at_hi = (a >= hi) & ~interior
    at_lo = (a <= lo) & ~interior
    return bool(
        np.all(np.abs(stationarity[interior]) <= tol)
        and np.all(stationarity[at_hi] <= tol)
        and np.all(stationarity[at_lo] >= -tol)
    )


def centralized_oracle(s: float, buildings, domain: DualDomain | None = None,
                       saturate: bool = False, max_iter: int = 200) -> OracleSolution:
    """Exact round optimum of the dispatch problem and its multiplier.

    Bisects the nonincreasing map ``nu -> sum_i clamp(-nu/2c_i)`` on the dual
    domain, then solves the final linear piece exactly.  When ``s`` is outside
    the aggregate capacity, raises :class:`InfeasibleSetpoint` unless
    ``saturate`` is set, in which case every building sits at its binding
    bound and ``nu`` is the matching end of the domain.
    """
    if not buildings:
        raise ContractViolation("need at least one building")
    lo, hi, c = _arrays(buildings)
    if domain is None:
        domain = DualDomain.for_buildings(buildings)
    total_lo, total_hi = float(lo.sum()), float(hi.sum())
    if s > total_hi or s < total_lo:
        if not saturate:
            raise InfeasibleSetpoint(s, total_lo, total_hi)
        if s > total_hi:
            return OracleSolution(a=hi.copy(), nu=domain.nu_lo, saturated=True)
        return OracleSolution(a=lo.copy(), nu=domain.nu_hi, saturated=True)

    def response(nu):
        return np.clip(-nu / (2 * c), lo, hi)

    left, right = domain.nu_lo, domain.nu_hi
    if response(left).sum() < s - BALANCE_TOL or response(right).sum() > s + BALANCE_TOL:
        raise NumericFailure("dual domain does not bracket the optimal multiplier")
    nu = 0.5 * (left + right)
    for _ in range(max_iter):
        nu = 0.5 * (left + right)
        excess = response(nu).sum() - s
        if abs(excess) <= BALANCE_TOL:
            break
        if excess > 0:
            left = nu
        else:
            right = nu

    # Exact solve on the active set found by bisection.
    a = response(nu)
    free = (a > lo) & (a < hi)
    if free.any():
        pinned = a[~free].sum()
        nu_exact = -2 * (s - pinned) / np.sum(1 / c[free])
        a_exact = response(nu_exact)
        if abs(a_exact.sum() - s) <= abs(a.sum() - s):
            nu, a = nu_exact, a_exact

    if abs(a.sum() - s) > BALANCE_TOL * max(1.0, abs(s)):
        raise NumericFailure(f"bisection left imbalance {a.sum() - s:.3e}")
    if not _kkt_ok(a, nu, lo, hi, c):
        raise NumericFailure("optimality conditions fail at the bisection solution")
    return OracleSolution(a=a, nu=float(nu), saturated=False)


def kkt_residual(a, nu, buildings) -> float:
    """Largest violation of stationarity / multiplier sign across buildings."""
    lo, hi, c = _arrays(buildings)
    a = np.asarray(a, dtype=float)
    st = 2 * c * a + nu
    interior = (a > lo) & (a < hi)
    res = np.zeros_like(a)
    res[interior] = np.abs(st[interior])
    res[(a >= hi) & ~interior] = np.maximum(st[(a >= hi) & ~interior], 0)
    res[(a <= lo) & ~interior] = np.maximum(-st[(a <= lo) & ~interior], 0)
    return float(res.max())


@dataclass(frozen=True)
class SetpointProcess:
    sigma: float
    s0: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ContractViolation("sigma must be positive")

    def sample(self, T: int, rng: np.random.Generator) -> np.ndarray:
        """Setpoints ``s_0..s_T``; one Bernoulli(1/2) draw per step."""
        s = np.empty(T + 1)
        s[0] = self.s0
        for t in range(1, T + 1):
            s[t] = setpoint_step(s[t - 1], t, self.sigma, rng)
        return s


def setpoint_step(prev_s: float, t: int, sigma: float, rng: np.random.Generator) -> float:
    """``s_t = s_{t-1} + sigma (-1)^{b_t} / sqrt(t)`` with ``b_t ~ Bernoulli(1/2)``."""
    if t < 1:
        raise ContractViolation("setpoint steps start at t = 1")
    b = int(rng.integers(0, 2))
    return prev_s + sigma * (-1) ** b / np.sqrt(t)


def virtual_setpoints(s: np.ndarray, buildings, split: str = "uniform") -> np.ndarray:
    """Per-building shares ``(T+1, n)`` summing to ``s_t`` each round."""
    s = np.asarray(s, dtype=float)
    n = len(buildings)
    if split == "uniform":
        weights = np.full(n, 1.0 / n)
    elif split == "proportional":
        lo, hi, _ = _arrays(buildings)
        width = hi - lo
        weights = width / width.sum()
    else:
        raise ContractViolation(f"unknown virtual split {split!r}")
    return s[:, None] * weights[None, :]


class DemandResponseOracle(LossOracle):
    """Per-building dual losses over the scalar multiplier ``nu``."""

    def __init__(self, buildings, setpoints: np.ndarray, split: str = "uniform"):
        self.buildings = list(buildings)
        self.setpoints = np.asarray(setpoints, dtype=float)
        self.shares = virtual_setpoints(self.setpoints, self.buildings, split)
        caps = np.array([b.capacity for b in self.buildings])
        self.lipschitz = float(np.max(np.abs(self.shares).max(axis=0) + caps))

    def value(self, agent, t, x):
        return float(local_dual_loss(float(x[0]), self.buildings[agent], self.shares[t, agent]))

    def gradient(self, agent, t, x):
        return np.array([local_dual_gradient(float(x[0]), self.buildings[agent], self.shares[t, agent])])

    def network_value(self, t, x, n):
        nu = float(np.asarray(x).ravel()[0])
        return float(np.mean([local_dual_loss(nu, b, s) for b, s in zip(self.buildings, self.shares[t])]))


def build_dr_oracle(buildings, setpoints, split: str = "uniform") -> DemandResponseOracle:
    if not buildings:
        raise ContractViolation("need at least one building")
    return DemandResponseOracle(buildings, setpoints, split)


@dataclass
class CentralizedPath:
    """Round optima for a whole setpoint path."""

    a_star: np.ndarray
    nu_star: np.ndarray
    saturated: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def solve_path(setpoints, buildings, domain: DualDomain) -> CentralizedPath:
    sols = [centralized_oracle(float(s), buildings, domain, saturate=True) for s in setpoints]
    return CentralizedPath(
        a_star=np.stack([sol.a for sol in sols]),
        nu_star=np.array([sol.nu for sol in sols]),
        saturated=np.array([sol.saturated for sol in sols]),
    )


class AbsoluteTrackingOracle(LossOracle):
    """Piecewise-linear losses ``k_i |nu - target_{i,t}|`` with sign subgradients.

    The network optimum is a weighted median of the round's targets.
    """

    def __init__(self, targets: np.ndarray, slopes):
        self.targets = np.asarray(targets, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        if self.targets.ndim != 2 or self.targets.shape[1] != self.slopes.shape[0]:
            raise ContractViolation("targets must be (T+1, n) with one slope per agent")
        if np.any(self.slopes <= 0):
            raise ContractViolation("slopes must be positive")
        self.lipschitz = float(self.slopes.max())

    def value(self, agent, t, x):
        return float(self.slopes[agent] * abs(float(x[0]) - self.targets[t, agent]))

    def gradient(self, agent, t, x):
        return np.array([self.slopes[agent] * np.sign(float(x[0]) - self.targets[t, agent])])

    def optimum(self, t: int, box: DecisionSet) -> float:
        """Weighted median of the targets, clamped to the box."""
        order = np.argsort(self.targets[t], kind="stable")
        pts = self.targets[t, order]
        w = self.slopes[order]
        cum = np.cumsum(w)
        k = int(np.searchsorted(cum, 0.5 * cum[-1]))
        return float(np.clip(pts[k], box.lower[0], box.upper[0]))
