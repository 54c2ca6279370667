"""Distributed online weighted dual averaging with a constant step size.

Each agent keeps a dual vector ``y_i`` that mixes its neighbours' duals through
the gossip matrix and accumulates its own loss gradients.  Decisions are the
regularised projection of the dual vector onto a box.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolation, NumericFailure, OracleError
from .topology import NetworkMatrix, require_valid

LIPSCHITZ_SLACK = 1e-9
FEASIBILITY_TOL = 1e-12


@dataclass(frozen=True)
class DecisionSet:
    """Axis-aligned box ``[lower, upper]`` in R^m."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ContractViolation("box bounds must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ContractViolation("box must be bounded")
        if np.any(lo > hi):
            raise ContractViolation("box lower bound exceeds upper bound")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "DecisionSet":
        return cls(np.array([lo]), np.array([hi]))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def clamp(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lower), self.upper)

    def contains(self, x: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


class ProximalFunction:
    """A 1-strongly convex, nonnegative function with ``psi(0) = 0``.

    ``smoothness`` is a Lipschitz constant of the gradient; it sets the step of
    the projected-gradient inner solver used when no closed form is known.
    """

    name = "generic"

    def __init__(self, value: Callable, gradient: Callable, smoothness: float, name: str | None = None):
        if smoothness < 1:
            raise ContractViolation("a 1-strongly convex function has smoothness >= 1")
        self._value = value
        self._gradient = gradient
        self.smoothness = float(smoothness)
        if name is not None:
            self.name = name

    def __call__(self, x) -> float:
        return float(self._value(np.asarray(x, dtype=float)))

    def gradient(self, x) -> np.ndarray:
        return np.asarray(self._gradient(np.asarray(x, dtype=float)), dtype=float)

    def project(self, y: np.ndarray, alpha: float, box: DecisionSet,
                tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
        step = alpha / self.smoothness
        x = box.clamp(-alpha * y)
        for _ in range(max_iter):
            grad = y + self.gradient(x) / alpha
            x_new = box.clamp(x - step * grad)
            residual = np.max(np.abs(x_new - x)) / step
            x = x_new
            if residual <= tol:
                return x
        raise NumericFailure(f"regularised projection did not converge (residual {residual:.3e})")


class QuadraticProximal(ProximalFunction):
    """``psi(x) = 0.5 ||x||_2^2``; its projection onto a box is a clamp."""

    name = "quadratic"

    def __init__(self):
        super().__init__(lambda x: 0.5 * float(x @ x), lambda x: x, smoothness=1.0)

    def project(self, y, alpha, box, tol=1e-10, max_iter=100_000):
        return box.clamp(-alpha * np.asarray(y, dtype=float))


QUADRATIC = QuadraticProximal()


def check_proximal(psi: ProximalFunction, dim: int, samples: int = 200, rng=None,
                   scale: float = 5.0, tol: float = 1e-9) -> bool:
    """Spot-check ``psi(0)=0``, nonnegativity and the 1-strong-convexity midpoint inequality."""
    rng = np.random.default_rng(rng)
    if abs(psi(np.zeros(dim))) > tol:
        return False
    for _ in range(samples):
        u, v = rng.uniform(-scale, scale, size=(2, dim))
        if psi(u) < -tol:
            return False
        d = u - v
        if psi((u + v) / 2) > (psi(u) + psi(v)) / 2 - d @ d / 8 + tol:
            return False
    return True


def regularized_projection(y, alpha: float, psi: ProximalFunction, box: DecisionSet) -> np.ndarray:
    """``argmin_{x in box} <y, x> + psi(x) / alpha``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not np.all(np.isfinite(y)):
        raise ContractViolation("dual vector must be finite")
    if not alpha > 0:
        raise ContractViolation(f"step size must be positive, got {alpha}")
    if y.shape != (box.dim,):
        raise ContractViolation(f"dual vector shape {y.shape} does not match box dimension {box.dim}")
    return psi.project(y, alpha, box)


class LossOracle(ABC):
    """Per-agent, per-round convex loss with (sub)gradients bounded by ``lipschitz``."""

    lipschitz: float

    @abstractmethod
    def value(self, agent: int, t: int, x: np.ndarray) -> float: ...

    @abstractmethod
    def gradient(self, agent: int, t: int, x: np.ndarray) -> np.ndarray: ...

    def network_value(self, t: int, x: np.ndarray, n: int) -> float:
        """Network loss ``f_t(x) = mean_i f_{i,t}(x)``."""
        return sum(self.value(i, t, x) for i in range(n)) / n


class FunctionOracle(LossOracle):
    """Oracle from plain callables ``value(i, t, x)`` and ``gradient(i, t, x)``."""

    def __init__(self, value: Callable, gradient: Callable, lipschitz: float):
        self._value = value
        self._gradient = gradient
        self.lipschitz = float(lipschitz)

    def value(self, agent, t, x):
        return float(self._value(agent, t, x))

    def gradient(self, agent, t, x):
        return np.atleast_1d(np.asarray(self._gradient(agent, t, x), dtype=float))


def spot_check_convexity(oracle: LossOracle, agent: int, t: int, box: DecisionSet,
                         samples: int = 100, rng=None, tol: float = 1e-9) -> bool:
    rng = np.random.default_rng(rng)
    for _ in range(samples):
        u = rng.uniform(box.lower, box.upper)
        v = rng.uniform(box.lower, box.upper)
        lam = rng.uniform()
        lhs = oracle.value(agent, t, lam * u + (1 - lam) * v)
        rhs = lam * oracle.value(agent, t, u) + (1 - lam) * oracle.value(agent, t, v)
        if lhs > rhs + tol * (1 + abs(rhs)):
            return False
    return True


@dataclass(frozen=True)
class EngineConfig:
    beta: float
    T: int

    def __post_init__(self):
        if not self.beta > 0:
            raise ContractViolation(f"beta must be positive, got {self.beta}")
        if int(self.T) != self.T or self.T < 1:
            raise ContractViolation(f"T must be an integer >= 1, got {self.T}")

    @property
    def alpha(self) -> float:
        return self.beta / self.T


def dual_update(Y: np.ndarray, P: NetworkMatrix, G: np.ndarray) -> np.ndarray:
    """``y_i <- sum_j P_ij y_j + g_i`` for all agents at once.

    ``Y`` and ``G`` are ``(n, m)``; every agent reads the same frozen ``Y``.
    """
    Y = np.asarray(Y, dtype=float)
    G = np.asarray(G, dtype=float)
    if Y.ndim != 2 or Y.shape != G.shape or Y.shape[0] != P.n:
        raise ContractViolation(
            f"dimension mismatch: duals {Y.shape}, gradients {G.shape}, network n={P.n}"
        )
    return P.entries @ Y + G


def primal_update(Y: np.ndarray, config: EngineConfig, psi: ProximalFunction, box: DecisionSet) -> np.ndarray:
    return np.stack([regularized_projection(y, config.alpha, psi, box) for y in np.asarray(Y)])


@dataclass(frozen=True)
class EngineTrace:
    """Everything recorded for rounds ``t = 0..T``.

    Shapes: ``x``, ``y``, ``grads`` are ``(T+1, n, m)``; ``losses`` and
    ``consensus_error`` are ``(T+1, n)``; ``ybar`` and ``gbar`` are ``(T+1, m)``.
    """

    x: np.ndarray
    y: np.ndarray
    losses: np.ndarray
    grads: np.ndarray
    ybar: np.ndarray
    consensus_error: np.ndarray
    ybar_norm: np.ndarray
    gbar: np.ndarray
    pi: np.ndarray
    alpha: float

    @property
    def T(self) -> int:
        return self.x.shape[0] - 1

    @property
    def n(self) -> int:
        return self.x.shape[1]


def run(config: EngineConfig, P: NetworkMatrix, pi: np.ndarray, psi: ProximalFunction,
        box: DecisionSet, oracle: LossOracle, n: int | None = None,
        check_network: bool = True) -> EngineTrace:
    """Run the dual-averaging protocol for rounds ``t = 0..T``.

    In each round every agent implements ``x_{i,t}``, the loss is recorded,
    the gradient is queried at that same point, and then all duals and
    decisions advance from the frozen round-``t`` snapshot.
    """
    if n is None:
        n = P.n
    if n != P.n:
        raise ContractViolation(f"agent count {n} does not match network size {P.n}")
    if check_network:
        require_valid(P)
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (n,):
        raise ContractViolation(f"stationary distribution must have shape ({n},)")
    T, m = int(config.T), box.dim
    L = float(oracle.lipschitz)
    limit = L * (1 + LIPSCHITZ_SLACK)

    xs = np.empty((T + 1, n, m))
    ys = np.empty((T + 1, n, m))
    losses = np.empty((T + 1, n))
    grads = np.empty((T + 1, n, m))

    Y = np.zeros((n, m))
    X = primal_update(Y, config, psi, box)
    for t in range(T + 1):
        xs[t], ys[t] = X, Y
        G = np.empty((n, m))
        for i in range(n):
            try:
                losses[t, i] = oracle.value(i, t, X[i])
                g = oracle.gradient(i, t, X[i])
            except Exception as exc:
                raise OracleError(f"oracle failed at round {t}, agent {i}: {exc}", round=t, agent=i) from exc
            if g.shape != (m,):
                raise ContractViolation(f"round {t}, agent {i}: gradient shape {g.shape}, expected ({m},)")
            gnorm = float(np.linalg.norm(g))
            if not gnorm <= limit:
                raise ContractViolation(
                    f"round {t}, agent {i}: gradient norm {gnorm:.6g} exceeds L = {L:.6g}"
                )
            G[i] = g
        grads[t] = G
        Y = dual_update(Y, P, G)
        X = primal_update(Y, config, psi, box)

    ybar = np.einsum("i,tim->tm", pi, ys)
    consensus = np.linalg.norm(ybar[:, None, :] - ys, axis=2)
    return EngineTrace(
        x=xs, y=ys, losses=losses, grads=grads, ybar=ybar,
        consensus_error=consensus, ybar_norm=np.linalg.norm(ybar, axis=1),
        gbar=np.einsum("i,tim->tm", pi, grads), pi=pi, alpha=config.alpha,
    )
