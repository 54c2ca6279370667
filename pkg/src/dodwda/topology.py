"""Gossip networks: construction, validation, stationary distributions and mixing rates."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .errors import InvalidTopology, MixingEstimationError, NumericFailure

STOCHASTIC_TOL = 1e-12
STATIONARY_TOL = 1e-10
# |(P^k)_ij - pi_j| below this is roundoff, not signal; such k do not constrain the fit.
MIXING_NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class NetworkMatrix:
    """Row-stochastic gossip matrix ``P``.

    Construction does not validate; call :func:`validate` (the engine does).
    """

    entries: np.ndarray

    def __post_init__(self):
        P = np.array(self.entries, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvalidTopology(f"network matrix must be square, got shape {P.shape}")
        P.setflags(write=False)
        object.__setattr__(self, "entries", P)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        adj = self.entries > 0
        np.fill_diagonal(adj, False)
        return adj

    @property
    def p_max(self) -> float:
        return float(self.entries.max())

    def permuted(self, perm) -> "NetworkMatrix":
        """Relabel agents: new agent ``k`` is old agent ``perm[k]``."""
        perm = np.asarray(perm)
        return NetworkMatrix(self.entries[np.ix_(perm, perm)])


@dataclass(frozen=True)
class MixingParameters:
    gamma: float
    nu: int
    p_max: float


@dataclass
class ValidationReport:
    checks: dict[str, bool] = field(default_factory=dict)
    messages: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, passed in self.checks.items() if not passed]

    def summary(self) -> str:
        lines = []
        for name, passed in self.checks.items():
            status = "PASS" if passed else "FAIL"
            msg = self.messages.get(name, "")
            lines.append(f"{status:4s}  {name}" + (f": {msg}" if msg else ""))
        return "\n".join(lines)


def build_ring(n: int, self_weight: float = 1 / 3) -> NetworkMatrix:
    """Ring where each agent keeps ``self_weight`` and splits the rest between its two neighbours."""
    if n < 3:
        raise InvalidTopology(
            f"ring needs n >= 3 so every agent has two distinct neighbours, got n={n}"
        )
    if not 0 < self_weight < 1:
        raise InvalidTopology(f"self_weight must lie in (0, 1), got {self_weight}")
    side = (1 - self_weight) / 2
    P = np.zeros((n, n))
    idx = np.arange(n)
    P[idx, idx] = self_weight
    P[idx, (idx - 1) % n] = side
    P[idx, (idx + 1) % n] = side
    return NetworkMatrix(P)


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u] & ~seen):
                seen[v] = True
                nxt.append(int(v))
        frontier = nxt
    return seen


def _period(adj: np.ndarray) -> int:
    """Period of a strongly connected digraph (gcd of cycle lengths), via BFS levels."""
    n = adj.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u] & (level < 0)):
                level[v] = level[u] + 1
                nxt.append(int(v))
        frontier = nxt
    g = 0
    for u, v in zip(*np.nonzero(adj)):
        g = gcd(g, int(level[u] + 1 - level[v]))
    return g


def validate(P: NetworkMatrix) -> ValidationReport:
    """Check every structural assumption on ``P`` and report each one separately."""
    M = P.entries
    n = P.n
    report = ValidationReport()

    finite = bool(np.all(np.isfinite(M)))
    report.checks["finite"] = finite
    if not finite:
        report.messages["finite"] = "matrix contains NaN or infinite entries"
        return report

    row_err = float(np.max(np.abs(M.sum(axis=1) - 1.0)))
    report.checks["row_stochastic"] = row_err <= STOCHASTIC_TOL
    if not report.checks["row_stochastic"]:
        report.messages["row_stochastic"] = f"max |row sum - 1| = {row_err:.3e}"

    report.checks["nonnegative"] = bool(np.all(M >= 0))
    if not report.checks["nonnegative"]:
        report.messages["nonnegative"] = f"min entry {M.min():.3e}"

    degrees = P.adjacency.sum(axis=1)
    report.checks["min_degree_2"] = bool(n >= 3 and np.all(degrees >= 2))
    if not report.checks["min_degree_2"]:
        bad = [int(i) for i in np.flatnonzero(degrees < 2)]
        report.messages["min_degree_2"] = (
            f"every agent must be connected to at least two other agents; "
            f"agents {bad} have fewer" if bad else f"n={n} agents cannot each have two neighbours"
        )

    support = M > 0
    strongly = bool(_reachable(support, 0).all() and _reachable(support.T, 0).all())
    report.checks["strongly_connected"] = strongly
    if not strongly:
        report.messages["strongly_connected"] = "communication graph is not strongly connected"

    if strongly:
        period = _period(support)
        report.checks["aperiodic"] = period == 1
        if period != 1:
            report.messages["aperiodic"] = f"chain has period {period}"
    else:
        report.checks["aperiodic"] = False
        report.messages["aperiodic"] = "undefined for a reducible matrix"

    report.checks["max_entry_below_one"] = bool(M.max() < 1)
    if not report.checks["max_entry_below_one"]:
        report.messages["max_entry_below_one"] = f"max entry {M.max():.6g} must be < 1"
    return report


def require_valid(P: NetworkMatrix) -> None:
    report = validate(P)
    if not report.ok:
        details = "; ".join(f"{k}: {report.messages.get(k, 'failed')}" for k in report.failures())
        raise InvalidTopology(f"network matrix rejected ({details})")


def stationary_distribution(P: NetworkMatrix, max_iter: int = 100_000) -> np.ndarray:
    """Left Perron vector of ``P`` normalised to sum to one.

    Solved directly from ``pi (P - I) = 0, sum(pi) = 1`` and then polished by
    power iteration on the transpose until the residual is at most 1e-12.
    """
    M = P.entries
    n = P.n
    A = np.vstack([M.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()

    for _ in range(max_iter):
        nxt = pi @ M
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) <= STOCHASTIC_TOL:
            pi = nxt
            break
        pi = nxt
    else:
        raise NumericFailure(f"stationary distribution did not converge in {max_iter} iterations")

    residual = float(np.max(np.abs(pi @ M - pi)))
    if residual > STATIONARY_TOL or not np.all((pi > 0) & (pi < 1)):
        raise NumericFailure(
            f"stationary distribution invalid (residual {residual:.3e}, min {pi.min():.3e})"
        )
    return pi


def _power_deviations(M: np.ndarray, pi: np.ndarray, horizon: int, until_floor: bool = False,
                      max_power: int = 0) -> np.ndarray:
    """``max_ij |(P^k)_ij - pi_j|`` for ``k = 1..horizon``.

    With ``until_floor`` the powers continue past ``horizon`` (up to
    ``max_power``) until a deviation drops to the noise floor.
    """
    devs = []
    Pk = np.eye(M.shape[0])
    k = 0
    while True:
        k += 1
        Pk = Pk @ M
        devs.append(float(np.max(np.abs(Pk - pi[None, :]))))
        if k >= horizon and (not until_floor or devs[-1] <= MIXING_NOISE_FLOOR or k >= max_power):
            break
    return np.array(devs)


def estimate_mixing(P: NetworkMatrix, pi: np.ndarray, horizon: int | None = None,
                    max_power: int = 20_000) -> MixingParameters:
    """Fit the geometric envelope ``max_ij |(P^k)_ij - pi_j| <= gamma^k`` with ``nu = 1``.

    ``gamma`` is the smallest rate consistent with every explicit power whose
    deviation sits above :data:`MIXING_NOISE_FLOOR`.  Powers are taken up to
    ``horizon`` and beyond it until the deviation reaches that floor, so a
    longer horizon cannot raise the fit.  The envelope is re-verified with the
    floor as absolute slack.
    """
    n = P.n
    if horizon is None:
        horizon = max(200, 2 * n)
    if horizon < 2 * n:
        raise MixingEstimationError(f"horizon must be >= 2n = {2 * n}, got {horizon}")
    devs = _power_deviations(P.entries, np.asarray(pi, dtype=float), horizon,
                             until_floor=True, max_power=max(max_power, horizon))
    if devs[-1] > MIXING_NOISE_FLOOR and len(devs) > horizon:
        raise MixingEstimationError(
            f"powers of P still deviate by {devs[-1]:.3e} from pi after {len(devs)} steps; "
            "matrix does not mix"
        )
    k = np.arange(1, len(devs) + 1)
    signal = devs > MIXING_NOISE_FLOOR
    gamma = MIXING_NOISE_FLOOR
    if signal.any():
        gamma = max(gamma, float(np.max(devs[signal] ** (1.0 / k[signal]))))
    if gamma >= 1:
        raise MixingEstimationError(f"fitted gamma = {gamma:.12g} >= 1; matrix does not mix")
    if np.any(devs > gamma**k + MIXING_NOISE_FLOOR):
        raise MixingEstimationError("fitted envelope fails post-verification")
    return MixingParameters(gamma=gamma, nu=1, p_max=P.p_max)


def mixing_envelope_holds(P: NetworkMatrix, pi: np.ndarray, params: MixingParameters, horizon: int) -> bool:
    """True iff ``|(P^k)_ij - pi_j| <= gamma^floor(k/nu)`` (plus noise floor) for all ``k <= horizon``."""
    devs = _power_deviations(P.entries, np.asarray(pi, dtype=float), horizon)
    k = np.arange(1, horizon + 1)
    env = params.gamma ** np.floor(k / params.nu)
    return bool(np.all(devs <= env + MIXING_NOISE_FLOOR))
