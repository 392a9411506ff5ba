"""Gradient-variance regularizer r(x), its gradient, the surrogate objective,
and probe-based smoothness estimates.

r(x) is half the mean squared deviation of client gradients from their mean
(half the trace of the client-gradient covariance). Its gradient is assembled
from client Hessian-vector products applied to the per-client deviations:

    grad_r(x) = mean_i hvp_i(x, d_i) - mean_hvp(x, mean_i d_i),   d_i = g_i - gbar

which is exact for quadratics. A finite-difference-of-r path exists purely as
a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .objectives import FederatedProblem
from .params import SeededStream, mean_reduce

__all__ = [
    "RegularizerReport",
    "SmoothnessEstimate",
    "regularizer_report",
    "surrogate_value",
    "surrogate_grad",
    "estimate_smoothness_constants",
]


@dataclass(frozen=True)
class RegularizerReport:
    r_value: float
    per_client_dev: np.ndarray  # n gradient-deviation norms
    grad_r: np.ndarray
    method: str  # analytic | hvp_assembled | fd_of_r


def regularizer_report(problem: FederatedProblem, x: np.ndarray,
                       method: str = "auto") -> RegularizerReport:
    """Evaluate r(x), per-client deviation norms, and grad r(x)."""
    grads = problem.client_grads(x)
    gbar = mean_reduce(grads)
    devs = [g - gbar for g in grads]
    dev_norms = np.array([float(np.linalg.norm(d)) for d in devs])
    r_value = 0.0
    for dn in dev_norms:
        r_value += dn * dn
    r_value /= 2.0 * problem.n

    if method == "fd_of_r":
        grad_r = _fd_grad_of_r(problem, x)
        used = "fd_of_r"
    elif method in ("auto", "analytic", "hvp_assembled"):
        hvps = [c.hvp(x, d) for c, d in zip(problem.clients, devs)]
        dbar = mean_reduce(devs)
        grad_r = mean_reduce(hvps) - problem.hvp(x, dbar)
        used = "analytic" if all(c.has_analytic_hvp for c in problem.clients) else "hvp_assembled"
    else:
        raise UsageError(f"unknown regularizer method {method!r}")
    return RegularizerReport(r_value, dev_norms, grad_r, used)


def _fd_grad_of_r(problem, x, rel_step=None):
    eps = rel_step or float(np.cbrt(np.finfo(np.float64).eps)) * (1.0 + float(np.linalg.norm(x)))
    g = np.empty_like(x)
    e = np.zeros_like(x)
    for j in range(x.shape[0]):
        e[j] = eps
        up = regularizer_report(problem, x + e, method="auto").r_value
        dn = regularizer_report(problem, x - e, method="auto").r_value
        g[j] = (up - dn) / (2.0 * eps)
        e[j] = 0.0
    return g


def surrogate_value(problem: FederatedProblem, x: np.ndarray, lam: float) -> float:
    """f(x) + lam * r(x)."""
    if lam < 0:
        raise UsageError("regularization weight must be >= 0")
    if lam == 0:
        return problem.value(x)
    return problem.value(x) + lam * regularizer_report(problem, x).r_value


def surrogate_grad(problem: FederatedProblem, x: np.ndarray, lam: float) -> np.ndarray:
    if lam < 0:
        raise UsageError("regularization weight must be >= 0")
    rep = regularizer_report(problem, x)
    return problem.grad(x) + lam * rep.grad_r


@dataclass(frozen=True)
class SmoothnessEstimate:
    """Probe maxima: lower bounds of the true constants.

    Consumers that need upper bounds (descent conditions) inflate these by a
    safety factor.
    """

    L1: float  # smoothness of the mean objective
    L2: float  # smoothness of r
    rho: float  # Hessian Lipschitz constant, max over clients
    probes: int


def estimate_smoothness_constants(problem: FederatedProblem, region_center: np.ndarray,
                                  radius: float, probes: int,
                                  stream: SeededStream) -> SmoothnessEstimate:
    """Max difference-quotients of grad f, grad r, and client HVPs over probe
    pairs drawn in the ball around ``region_center``."""
    if probes < 2:
        raise UsageError("need at least 2 probes")
    if radius <= 0:
        raise UsageError("radius must be > 0")
    rng = stream.generator()
    d = region_center.shape[0]
    pts = []
    for _ in range(probes):
        z = rng.standard_normal(d)
        z /= max(np.linalg.norm(z), 1e-300)
        pts.append(region_center + radius * float(rng.uniform() ** (1.0 / d)) * z)

    n_dirs = min(3, d) if d > 0 else 1
    dirs = []
    for _ in range(n_dirs):
        w = rng.standard_normal(d)
        dirs.append(w / max(np.linalg.norm(w), 1e-300))

    grads = [problem.grad(p) for p in pts]
    grad_rs = [regularizer_report(problem, p).grad_r for p in pts]
    hvps = [[[c.hvp(p, w) for w in dirs] for c in problem.clients] for p in pts]

    L1 = L2 = rho = 0.0
    for i in range(probes):
        for j in range(i + 1, probes):
            gap = float(np.linalg.norm(pts[i] - pts[j]))
            if gap < 1e-12:
                continue
            L1 = max(L1, float(np.linalg.norm(grads[i] - grads[j])) / gap)
            L2 = max(L2, float(np.linalg.norm(grad_rs[i] - grad_rs[j])) / gap)
            for ci in range(problem.n):
                for wi in range(n_dirs):
                    diff = float(np.linalg.norm(hvps[i][ci][wi] - hvps[j][ci][wi]))
                    rho = max(rho, diff / gap)
    return SmoothnessEstimate(L1, L2, rho, probes)
