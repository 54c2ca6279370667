"""Dynamic regret, path length, and the closed-form regret bound.

Rounds are indexed ``0..T`` in traces; regret sums run over ``t = 1..T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EngineTrace, LossOracle
from .errors import ContractViolation, InvalidInputs

SIGN_TOL = 1e-9


@dataclass(frozen=True)
class RegretLedger:
    """Per-round losses of the played decisions against the round optimum.

    ``losses[t, i]`` is agent ``i``'s own loss at its own decision,
    ``f_star[t]`` the network loss at ``x_star[t]``.  Row 0 is the
    initial round and is excluded from every sum.
    """

    losses: np.ndarray
    f_star: np.ndarray
    x_star: np.ndarray

    def __post_init__(self):
        losses = np.atleast_2d(np.asarray(self.losses, dtype=float))
        f_star = np.atleast_1d(np.asarray(self.f_star, dtype=float))
        x_star = np.asarray(self.x_star, dtype=float)
        if x_star.ndim == 1:
            x_star = x_star[:, None]
        if not (losses.shape[0] == f_star.shape[0] == x_star.shape[0]):
            raise ContractViolation(
                f"ledger rounds disagree: losses {losses.shape[0]}, f_star {f_star.shape[0]}, "
                f"x_star {x_star.shape[0]}"
            )
        if not (np.all(np.isfinite(losses)) and np.all(np.isfinite(f_star))):
            raise ContractViolation("ledger has missing (non-finite) rounds")
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "f_star", f_star)
        object.__setattr__(self, "x_star", x_star)

    @property
    def T(self) -> int:
        return self.losses.shape[0] - 1

    @property
    def n(self) -> int:
        return self.losses.shape[1]

    def summands(self) -> np.ndarray:
        """Network regret terms for rounds ``0..T`` (index 0 unused by sums)."""
        return self.losses.mean(axis=1) - self.f_star


@dataclass(frozen=True)
class BoundInputs:
    L: float
    n: int
    p: float
    gamma: float
    nu: int
    Y: float
    beta: float
    V_T: float

    def __post_init__(self):
        problems = []
        if not self.gamma < 1:
            problems.append(f"gamma = {self.gamma} must be < 1")
        if not self.p < 1:
            problems.append(f"p = {self.p} must be < 1")
        for name in ("L", "n", "p", "gamma", "Y", "beta"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        if not self.nu >= 1:
            problems.append("nu must be >= 1")
        if not self.V_T >= 0:
            problems.append("V_T must be nonnegative")
        if problems:
            raise InvalidInputs("; ".join(problems))


@dataclass(frozen=True)
class BoundTerms:
    consensus: float
    dual_norm: float
    path: float

    @property
    def total(self) -> float:
        return self.consensus + self.dual_norm + self.path


def _require_rounds(ledger: RegretLedger, t: int | None = None):
    if ledger.T < 1:
        raise ContractViolation("ledger needs at least rounds 0..1")
    if t is not None and not 1 <= t <= ledger.T:
        raise ContractViolation(f"round {t} outside 1..{ledger.T}")


def cumulative_network_regret(ledger: RegretLedger, strict: bool = False) -> np.ndarray:
    """Running network regret ``R_t`` for ``t = 0..T`` (``R_0 = 0``).

    Each agent is scored on its own loss at its own decision, so a round can
    legitimately come in below the common-decision optimum when agents
    disagree.  ``strict=True`` rejects such rounds anyway.
    """
    _require_rounds(ledger)
    terms = ledger.summands()
    if strict:
        bad = np.flatnonzero(terms[1:] < -SIGN_TOL)
        if bad.size:
            t = int(bad[0]) + 1
            raise ContractViolation(f"round {t}: regret term {terms[t]:.6g} is negative")
    out = np.zeros(ledger.T + 1)
    out[1:] = np.cumsum(terms[1:])
    return out


def network_dynamic_regret(ledger: RegretLedger, strict: bool = False) -> float:
    return float(cumulative_network_regret(ledger, strict)[-1])


def local_regret_summands(ledger: RegretLedger, j: int, oracle: LossOracle, decisions: np.ndarray) -> np.ndarray:
    """``f_t(x_{j,t}) - f_t(x*_t)`` for ``t = 0..T``; every term must be >= -1e-9."""
    _require_rounds(ledger)
    decisions = np.asarray(decisions, dtype=float)
    n = ledger.n
    terms = np.array([
        oracle.network_value(t, decisions[t, j], n) - ledger.f_star[t]
        for t in range(ledger.T + 1)
    ])
    bad = np.flatnonzero(terms[1:] < -SIGN_TOL)
    if bad.size:
        t = int(bad[0]) + 1
        raise ContractViolation(
            f"round {t}: agent {j} beats the round optimum by {-terms[t]:.3e}; optimum is wrong"
        )
    return terms


def local_dynamic_regret(ledger: RegretLedger, j: int, oracle: LossOracle, decisions: np.ndarray) -> float:
    return float(local_regret_summands(ledger, j, oracle, decisions)[1:].sum())


def path_length(optima) -> float:
    """``sum_{t=1}^{T} ||x*_{t+1} - x*_t||`` with ``x*_{T+1} = x*_T``.

    ``optima`` holds ``x*_1..x*_T`` (rows).
    """
    optima = np.asarray(optima, dtype=float)
    if optima.ndim == 1:
        optima = optima[:, None]
    if len(optima) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(optima, axis=0), axis=1).sum())


def cumulative_path_length(x_star) -> np.ndarray:
    """``V_t`` for every ``t = 0..T`` from a trace-indexed optimum sequence (row 0 ignored)."""
    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim == 1:
        x_star = x_star[:, None]
    steps = np.linalg.norm(np.diff(x_star[1:], axis=0), axis=1)
    out = np.zeros(len(x_star))
    # V_t pairs x*_t with x*_{t+1}; the last round uses the padded zero step.
    out[1:-1] = np.cumsum(steps)
    out[-1] = out[-2] if len(out) > 2 else 0.0
    return out


def average_absolute_regret(ledger: RegretLedger, t: int | None = None, scaling: str = "mean"):
    """``(1/t) sum_{tau<=t} |loss_tau - f_tau(x*_tau)|``.

    ``scaling="mean"`` averages agent losses (matching the network regret);
    ``"sum"`` adds them.  With ``t=None`` the whole curve for ``t = 1..T`` is
    returned as an array indexed ``0..T`` with entry 0 set to 0.
    """
    _require_rounds(ledger)
    if t is not None and t == 0:
        raise ContractViolation("average absolute regret is undefined at t = 0")
    if scaling == "mean":
        played = ledger.losses.mean(axis=1)
    elif scaling == "sum":
        played = ledger.losses.sum(axis=1)
    else:
        raise ContractViolation(f"unknown scaling {scaling!r}")
    errs = np.abs(played - ledger.f_star)
    curve = np.zeros(ledger.T + 1)
    curve[1:] = np.cumsum(errs[1:]) / np.arange(1, ledger.T + 1)
    if t is None:
        return curve
    _require_rounds(ledger, t)
    return float(curve[t])


def theorem1_terms(inputs: BoundInputs) -> BoundTerms:
    b, L, n = inputs.beta, inputs.L, inputs.n
    g = inputs.gamma
    consensus = b * L**2 * (n / (g * (1 - g ** (1 / inputs.nu))) + 2)
    dual_norm = b * L * (n**2 * L / (1 - inputs.p) + L + inputs.Y)
    return BoundTerms(consensus=consensus, dual_norm=dual_norm, path=L * inputs.V_T)


def theorem1_bound(inputs: BoundInputs) -> float:
    """Dynamic regret bound; it also bounds every agent's local regret."""
    return theorem1_terms(inputs).total


def bound_curve(inputs: BoundInputs, T: int, V: np.ndarray) -> np.ndarray:
    """Bound restricted to the first ``t`` rounds, for ``t = 0..T``.

    The step-size terms accrue at ``alpha = beta/T`` per round and the path
    term uses the running ``V_t``.
    """
    terms = theorem1_terms(BoundInputs(**{**inputs.__dict__, "V_T": 0.0}))
    per_round = (terms.consensus + terms.dual_norm) / T
    return per_round * np.arange(T + 1) + inputs.L * np.asarray(V, dtype=float)


def lemma2_bound(n: int, L: float, gamma: float, nu: int = 1) -> float:
    """Bound on ``||ybar_t - y_{i,t}||``."""
    return n * L / (gamma * (1 - gamma ** (1 / nu))) + 2 * L


def lemma3_bound(n: int, L: float, p: float) -> float:
    """Bound on ``||ybar_t||``."""
    return n**2 * L / (1 - p) + L


def lemma_violations(trace: EngineTrace, L: float, gamma: float, nu: int, p: float) -> dict[str, int]:
    """Count rounds (t >= 1) breaking the consensus-error and dual-norm bounds."""
    n = trace.n
    b2 = lemma2_bound(n, L, gamma, nu)
    b3 = lemma3_bound(n, L, p)
    return {
        "lemma2": int(np.sum(trace.consensus_error[1:] > b2)),
        "lemma3": int(np.sum(trace.ybar_norm[1:] > b3)),
    }


def estimate_Y(x_star, alpha: float, padding: float = 0.1) -> float:
    """Preimage-norm constant for the quadratic proximal function on a box.

    The minimal-norm dual vector mapping to an interior optimum ``x*`` is
    ``-x*/alpha``; take the largest such norm, pad it, and floor at 1.
    """
    x_star = np.asarray(x_star, dtype=float)
    if x_star.size == 0:
        return 1.0
    if x_star.ndim == 1:
        x_star = x_star[:, None]
    largest = float(np.max(np.linalg.norm(x_star, axis=1))) / alpha
    return max(1.0, (1 + padding) * largest)
