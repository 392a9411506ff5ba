"""Optimization procedures as pure state-transition functions.

Sequence runners (K sequential steps) drive the ordering-enumeration oracles;
round functions map (server params, problem, config, schedules) to a
:class:`RoundResult`. Conventions that the reduction-lattice and theorem
checks rely on:

* every parameter update goes through ``axpy(-alpha, g, y)``;
* cross-client aggregation is always ``mean_reduce`` over ascending
  participant order;
* SCAFFOLD's correction is applied as ``(g - g_i(x)) + mean_grad(x)`` so the
  K=1 full-batch round collapses to a plain GD step bit-for-bit;
* coupled comparisons reuse minibatch schedules built from identical streams.

Displacement-using rounds (gradalign, fedga, fedga_perstep, scaffold) cost 2
communication rounds; everything else costs 1.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, UsageError
from .objectives import FederatedProblem
from .params import SeededStream, axpy, mean_reduce

__all__ = [
    "AlgoConfig",
    "RoundResult",
    "VARIANTS",
    "run_sgd_sequence",
    "run_gd_sequence",
    "run_surrogate_gd_sequence",
    "linear_scaled_step",
    "gradalign_round",
    "largebatch_gd_round",
    "fedavg_round",
    "fedga_round",
    "fedga_perstep_round",
    "scaffold_round",
    "fedprox_round",
    "expected_round",
    "run_round",
]

VARIANTS = (
    "sgd_seq",
    "gd_seq",
    "surrogate_gd",
    "linear_scaled",
    "gradalign",
    "fedavg",
    "fedga",
    "fedga_perstep",
    "scaffold",
    "fedprox",
    "largebatch_gd",
)

_LOCAL_STEP_VARIANTS = frozenset({"fedavg", "fedga", "fedga_perstep", "scaffold", "fedprox"})
_TWO_COMM_VARIANTS = frozenset({"gradalign", "fedga", "fedga_perstep", "scaffold"})

DIVERGENCE_NORM = 1e8


@dataclass(frozen=True)
class AlgoConfig:
    """Algorithm selection plus hyperparameters; unused fields warn at load."""

    variant: str
    alpha: float
    beta: float = 0.0
    local_steps: int = 1
    batch_size: int | None = None  # None = FULL
    mu: float = 0.0

    def validate(self) -> list[str]:
        """Raise on hard errors; return warnings for ignored fields."""
        if self.variant not in VARIANTS:
            raise UsageError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if not self.alpha > 0:
            raise UsageError("alpha must be > 0")
        if self.beta < 0:
            raise UsageError("beta must be >= 0")
        if self.local_steps < 1:
            raise UsageError("local_steps must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise UsageError("batch_size must be >= 1 or full")
        if self.mu < 0:
            raise UsageError("mu must be >= 0")
        warnings = []
        uses_beta = self.variant in ("gradalign", "fedga", "fedga_perstep")
        if self.beta != 0.0 and not uses_beta:
            warnings.append(f"beta is ignored by variant {self.variant!r}")
        if self.mu != 0.0 and self.variant != "fedprox":
            warnings.append(f"mu is ignored by variant {self.variant!r}")
        return warnings


@dataclass(frozen=True)
class RoundResult:
    """Post-round server parameters plus per-client traces."""

    server_params: np.ndarray
    per_client_final: tuple
    participants: tuple
    comm_rounds_used: int
    displacement_norms: np.ndarray


def _guard(x: np.ndarray, algorithm: str, round_index, step):
    nrm = float(np.linalg.norm(x))
    if not np.isfinite(nrm) or nrm > DIVERGENCE_NORM:
        where = f"round {round_index}, " if round_index is not None else ""
        raise DivergenceError(
            f"{algorithm} diverged ({where}step {step}): iterate norm {nrm:.3e}",
            algorithm=algorithm,
            round_index=round_index,
            step=step,
        )
    return x


def _map_clients(fn, items, threads: int = 1):
    """Run fn over items, preserving order; results land in fixed slots."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _resolve(problem: FederatedProblem, participants):
    if participants is None:
        return list(range(problem.n))
    return sorted(int(i) for i in participants)


# ---------------------------------------------------------------------------
# sequence procedures
# ---------------------------------------------------------------------------


def run_sgd_sequence(objectives, order, x0, alpha, round_index=None):
    """K sequential steps x <- x - alpha * grad_{a_t}(x) in the given order."""
    objectives = list(objectives)
    k = len(objectives)
    if k < 1:
        raise UsageError("need at least one objective")
    order = list(order)
    if sorted(order) != list(range(k)):
        raise UsageError(f"order must be a permutation of 0..{k - 1}")
    x = x0
    for t, idx in enumerate(order):
        x = axpy(-alpha, objectives[idx].grad(x), x)
        _guard(x, "sgd_seq", round_index, t)
    return x


def run_gd_sequence(objectives_or_problem, x0, alpha, K, round_index=None):
    """K steps of GD on the mean objective of the multiset."""
    problem = _as_problem(objectives_or_problem)
    if K < 1:
        raise UsageError("K must be >= 1")
    x = x0
    for t in range(K):
        x = axpy(-alpha, problem.grad(x), x)
        _guard(x, "gd_seq", round_index, t)
    return x


def run_surrogate_gd_sequence(objectives_or_problem, x0, alpha, K, round_index=None):
    """K GD steps on the mean objective plus (alpha/2) times the gradient
    variance of the multiset."""
    from .regularizer import regularizer_report  # local import breaks a cycle

    problem = _as_problem(objectives_or_problem)
    if K < 1:
        raise UsageError("K must be >= 1")
    x = x0
    half_alpha = alpha / 2.0
    for t in range(K):
        g = problem.grad(x) + half_alpha * regularizer_report(problem, x).grad_r
        x = axpy(-alpha, g, x)
        _guard(x, "surrogate_gd", round_index, t)
    return x


def linear_scaled_step(objectives, x0, alpha, round_index=None):
    """One update x <- x - alpha * sum_i grad_{a_i}(x - (alpha/2) sum_{j!=i} grad_{a_j}(x))."""
    objectives = list(objectives)
    k = len(objectives)
    if k < 1:
        raise UsageError("need at least one objective")
    grads0 = [o.grad(x0) for o in objectives]
    total = np.zeros_like(x0)
    for g in grads0:
        total += g
    update = np.zeros_like(x0)
    for i, obj in enumerate(objectives):
        point = axpy(-alpha / 2.0, total - grads0[i], x0)
        update += obj.grad(point)
    x = axpy(-alpha, update, x0)
    return _guard(x, "linear_scaled", round_index, 0)


def _as_problem(objectives_or_problem) -> FederatedProblem:
    if isinstance(objectives_or_problem, FederatedProblem):
        return objectives_or_problem
    return FederatedProblem(list(objectives_or_problem))


# ---------------------------------------------------------------------------
# round procedures
# ---------------------------------------------------------------------------


def largebatch_gd_round(problem, x, alpha, participants=None, threads=1, round_index=None):
    """One parallel GD step: clients step from x with their own gradients,
    the server averages (equal to a GD step on the participant mean)."""
    part = _resolve(problem, participants)
    grads = _map_clients(lambda i: problem.clients[i].grad(x), part, threads)
    finals = [axpy(-alpha, g, x) for g in grads]
    for s, f in enumerate(finals):
        _guard(f, "largebatch_gd", round_index, s)
    return RoundResult(
        server_params=mean_reduce(finals),
        per_client_final=tuple(finals),
        participants=tuple(part),
        comm_rounds_used=1,
        displacement_norms=np.zeros(len(part)),
    )


def gradalign_round(problem, x, alpha, beta, participants=None, threads=1, round_index=None):
    """Displaced-gradient round: the iterate stays at x, each client's
    gradient is evaluated at x - beta*v_i with v_i = mean_grad(x) - grad_i(x)."""
    part = _resolve(problem, participants)
    grads0 = _map_clients(lambda i: problem.clients[i].grad(x), part, threads)
    gbar = mean_reduce(grads0)
    vs = [gbar - g for g in grads0]

    def one(j):
        i = part[j]
        point = axpy(-beta, vs[j], x) if beta != 0.0 else x
        return axpy(-alpha, problem.clients[i].grad(point), x)

    finals = _map_clients(one, list(range(len(part))), threads)
    for s, f in enumerate(finals):
        _guard(f, "gradalign", round_index, s)
    return RoundResult(
        server_params=mean_reduce(finals),
        per_client_final=tuple(finals),
        participants=tuple(part),
        comm_rounds_used=2,
        displacement_norms=np.array([abs(beta) * float(np.linalg.norm(v)) for v in vs]),
    )


def fedavg_round(problem, x, alpha, K, schedules=None, participants=None,
                 threads=1, round_index=None):
    """K local stochastic steps per client from x, then average."""
    part = _resolve(problem, participants)
    scheds = schedules if schedules is not None else [None] * len(part)

    def one(j):
        client = problem.clients[part[j]]
        sched = scheds[j]
        y = x
        for k in range(K):
            batch = sched.next_batch() if sched is not None else None
            y = axpy(-alpha, client.stoch_grad(y, batch), y)
            _guard(y, "fedavg", round_index, k)
        return y

    finals = _map_clients(one, list(range(len(part))), threads)
    return RoundResult(
        server_params=mean_reduce(finals),
        per_client_final=tuple(finals),
        participants=tuple(part),
        comm_rounds_used=1,
        displacement_norms=np.zeros(len(part)),
    )


def fedga_round(problem, x, alpha, beta, K, schedules=None, participants=None,
                threads=1, round_index=None):
    """Displacement applied once at the start of the round, then K plain
    local steps; the server averages the finals without reverting the
    displacements (they sum to zero across participants)."""
    part = _resolve(problem, participants)
    scheds = schedules if schedules is not None else [None] * len(part)
    grads0 = _map_clients(lambda i: problem.clients[i].grad(x), part, threads)
    gbar = mean_reduce(grads0)
    vs = [gbar - g for g in grads0]

    def one(j):
        client = problem.clients[part[j]]
        sched = scheds[j]
        y = axpy(-beta, vs[j], x) if beta != 0.0 else x
        for k in range(K):
            batch = sched.next_batch() if sched is not None else None
            y = axpy(-alpha, client.stoch_grad(y, batch), y)
            _guard(y, "fedga", round_index, k)
        return y

    finals = _map_clients(one, list(range(len(part))), threads)
    return RoundResult(
        server_params=mean_reduce(finals),
        per_client_final=tuple(finals),
        participants=tuple(part),
        comm_rounds_used=2,
        displacement_norms=np.array([abs(beta) * float(np.linalg.norm(v)) for v in vs]),
    )


def fedga_perstep_round(problem, x, alpha, beta, K, schedules=None, participants=None,
                        threads=1, round_index=None):
    """Per-step displacement variant: iterates stay undisplaced, every local
    gradient is evaluated at y - beta*v_i."""
    part = _resolve(problem, participants)
    scheds = schedules if schedules is not None else [None] * len(part)
    grads0 = _map_clients(lambda i: problem.clients[i].grad(x), part, threads)
    gbar = mean_reduce(grads0)
    vs = [gbar - g for g in grads0]

    def one(j):
        client = problem.clients[part[j]]
        sched = scheds[j]
        y = x
        for k in range(K):
            batch = sched.next_batch() if sched is not None else None
            point = axpy(-beta, vs[j], y) if beta != 0.0 else y
            y = axpy(-alpha, client.stoch_grad(point, batch), y)
            _guard(y, "fedga_perstep", round_index, k)
        return y

    finals = _map_clients(one, list(range(len(part))), threads)
    return RoundResult(
        server_params=mean_reduce(finals),
        per_client_final=tuple(finals),
        participants=tuple(part),
        comm_rounds_used=2,
        displacement_norms=np.array([abs(beta) * float(np.linalg.norm(v)) for v in vs]),
    )


def scaffold_round(problem, x, alpha, K, schedules=None, participants=None,
                   threads=1, round_index=None):
    """Control-variate round: local steps use
    (stoch_grad(y) - grad_i(x)) + mean_grad(x), variates computed among the
    participating clients only."""
    part = _resolve(problem, participants)
    scheds = schedules if schedules is not None else [None] * len(part)
    grads0 = _map_clients(lambda i: problem.clients[i].grad(x), part, threads)
    gbar = mean_reduce(grads0)

    def one(j):
        client = problem.clients[part[j]]
        sched = scheds[j]
        g0 = grads0[j]
        y = x
        for k in range(K):
            batch = sched.next_batch() if sched is not None else None
            d = (client.stoch_grad(y, batch) - g0) + gbar
            y = axpy(-alpha, d, y)
            _guard(y, "scaffold", round_index, k)
        return y

    finals = _map_clients(one, list(range(len(part))), threads)
    return RoundResult(
        server_params=mean_reduce(finals),
        per_client_final=tuple(finals),
        participants=tuple(part),
        comm_rounds_used=2,
        displacement_norms=np.array(
            [alpha * float(np.linalg.norm(gbar - g)) for g in grads0]
        ),
    )


def fedprox_round(problem, x, alpha, K, mu, schedules=None, participants=None,
                  threads=1, round_index=None):
    """Inexact proximal local steps y <- y - alpha*(stoch_grad(y) + mu*(y - x))."""
    if mu < 0:
        raise UsageError("mu must be >= 0")
    part = _resolve(problem, participants)
    scheds = schedules if schedules is not None else [None] * len(part)

    def one(j):
        client = problem.clients[part[j]]
        sched = scheds[j]
        y = x
        for k in range(K):
            batch = sched.next_batch() if sched is not None else None
            g = client.stoch_grad(y, batch)
            if mu != 0.0:
                g = g + mu * (y - x)
            y = axpy(-alpha, g, y)
            _guard(y, "fedprox", round_index, k)
        return y

    finals = _map_clients(one, list(range(len(part))), threads)
    return RoundResult(
        server_params=mean_reduce(finals),
        per_client_final=tuple(finals),
        participants=tuple(part),
        comm_rounds_used=1,
        displacement_norms=np.zeros(len(part)),
    )


def expected_round(round_fn, repeats: int, stream: SeededStream) -> np.ndarray:
    """Mean server result of ``round_fn(stream)`` over independent schedule
    draws. Deterministic rounds need repeats=1."""
    if repeats < 1:
        raise UsageError("repeats must be >= 1")
    servers = [round_fn(stream.derive("repeat", r)).server_params for r in range(repeats)]
    return mean_reduce(servers)


def run_round(cfg: AlgoConfig, problem, x, schedules=None, participants=None,
              threads=1, round_index=None) -> RoundResult:
    """Dispatch one round of cfg.variant; used by the harness."""
    common = dict(participants=participants, threads=threads, round_index=round_index)
    v = cfg.variant
    if v == "fedavg":
        return fedavg_round(problem, x, cfg.alpha, cfg.local_steps, schedules, **common)
    if v == "fedga":
        return fedga_round(problem, x, cfg.alpha, cfg.beta, cfg.local_steps, schedules, **common)
    if v == "fedga_perstep":
        return fedga_perstep_round(problem, x, cfg.alpha, cfg.beta, cfg.local_steps,
                                   schedules, **common)
    if v == "scaffold":
        return scaffold_round(problem, x, cfg.alpha, cfg.local_steps, schedules, **common)
    if v == "fedprox":
        return fedprox_round(problem, x, cfg.alpha, cfg.local_steps, cfg.mu, schedules, **common)
    if v == "gradalign":
        return gradalign_round(problem, x, cfg.alpha, cfg.beta, **common)
    if v == "largebatch_gd":
        return largebatch_gd_round(problem, x, cfg.alpha, **common)
    raise UsageError(f"variant {cfg.variant!r} is not a round procedure")
