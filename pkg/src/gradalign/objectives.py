"""Client objectives: exact quadratics, logistic regression, and a tanh MLP.

Quadratics carry analytic gradients and Hessian-vector products and serve as
exact oracles for the theorem checks. Supervised clients get hand-written
backprop gradients (see :mod:`gradalign.kernels`) and Hessian-vector products
via central differences of the gradient. All objectives are immutable after
construction; minibatch sampling state belongs to the caller.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from . import kernels
from .errors import DimensionError, NumericError, UsageError
from .params import SeededStream, mean_reduce

__all__ = [
    "ClientObjective",
    "QuadraticClient",
    "LogisticClient",
    "MLPClient",
    "FederatedProblem",
    "make_quadratic_problem",
    "make_supervised_client",
]

_EPS_CBRT = float(np.cbrt(np.finfo(np.float64).eps))


class ClientObjective(ABC):
    """One client's loss f_i over a flat float64 parameter vector."""

    dim: int
    client_id: int | None = None
    has_analytic_hvp: bool = False
    #: number of local examples, or None for data-free objectives
    data_size: int | None = None

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        ...

    @abstractmethod
    def grad(self, x: np.ndarray) -> np.ndarray:
        ...

    def stoch_grad(self, x: np.ndarray, batch=None) -> np.ndarray:
        """Minibatch gradient; ``batch`` indexes this client's own data.

        ``None`` means the full set. Data-free objectives ignore the batch.
        """
        return self.grad(x)

    def hvp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Hessian-vector product via central differences of the gradient.

        A zero direction returns the zero vector rather than erroring.
        """
        if x.shape != v.shape:
            raise DimensionError(f"hvp length mismatch: {x.shape} vs {v.shape}")
        vn = float(np.linalg.norm(v))
        if vn == 0.0:
            return np.zeros_like(v)
        eps = _EPS_CBRT * (1.0 + float(np.linalg.norm(x))) / max(vn, 1e-12)
        return (self.grad(x + eps * v) - self.grad(x - eps * v)) / (2.0 * eps)

    def _checked(self, g: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient from client {self.client_id!r}")
        return g


class QuadraticClient(ClientObjective):
    """f(x) = 0.5 x'Ax + b'x with symmetric A; gradients and HVPs are exact."""

    has_analytic_hvp = True

    def __init__(self, A, b, client_id=None):
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
            raise DimensionError(f"quadratic shapes off: A {A.shape}, b {b.shape}")
        scale = 1.0 + float(np.abs(A).max(initial=0.0))
        if float(np.abs(A - A.T).max(initial=0.0)) > 1e-14 * scale:
            raise UsageError("quadratic matrix must be symmetric")
        self.A = A
        self.b = b
        self.dim = b.shape[0]
        self.client_id = client_id

    def value(self, x):
        return 0.5 * float(x @ (self.A @ x)) + float(self.b @ x)

    def grad(self, x):
        return self._checked(self.A @ x + self.b)

    def hvp(self, x, v):
        if x.shape != v.shape:
            raise DimensionError(f"hvp length mismatch: {x.shape} vs {v.shape}")
        return self.A @ v


class _SupervisedClient(ClientObjective):
    """Shared plumbing for data-backed clients (features, labels, L2 decay)."""

    def __init__(self, features, labels, n_classes, l2_decay=0.0, client_id=None):
        X = np.ascontiguousarray(features, dtype=np.float64)
        y = np.ascontiguousarray(labels, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DimensionError(f"data shapes off: X {X.shape}, y {y.shape}")
        if l2_decay < 0:
            raise UsageError("l2_decay must be >= 0")
        self.features = X
        self.labels = y
        self.n_classes = int(n_classes)
        self.l2_decay = float(l2_decay)
        self.data_size = X.shape[0]
        self.client_id = client_id

    def _slice(self, batch):
        if batch is None:
            return self.features, self.labels
        return self.features[batch], self.labels[batch]

    def logits(self, x, X=None):
        raise NotImplementedError

    def predict(self, x, X=None):
        return np.argmax(self.logits(x, X), axis=1)


class LogisticClient(_SupervisedClient):
    """Multinomial logistic regression; params are W (m x C) then bias (C)."""

    def __init__(self, features, labels, n_classes, l2_decay=0.0, client_id=None):
        super().__init__(features, labels, n_classes, l2_decay, client_id)
        m = self.features.shape[1]
        self.dim = m * self.n_classes + self.n_classes

    def _unpack(self, x):
        m = self.features.shape[1]
        c = self.n_classes
        return x[: m * c].reshape(m, c), x[m * c :]

    def value(self, x):
        W, b = self._unpack(x)
        loss, _, _ = kernels.logistic_value_grad(self.features, self.labels, W, b)
        return loss + 0.5 * self.l2_decay * float(x @ x)

    def grad(self, x):
        return self.stoch_grad(x, None)

    def stoch_grad(self, x, batch=None):
        X, y = self._slice(batch)
        W, b = self._unpack(x)
        _, gW, gb = kernels.logistic_value_grad(X, y, W, b)
        g = np.concatenate([gW.ravel(), gb])
        if self.l2_decay:
            g += self.l2_decay * x
        return self._checked(g)

    def logits(self, x, X=None):
        W, b = self._unpack(x)
        return kernels.logistic_logits(self.features if X is None else X, W, b)


class MLPClient(_SupervisedClient):
    """input -> hidden tanh -> softmax; smooth enough for Taylor-residual checks."""

    def __init__(self, features, labels, n_classes, hidden=16, l2_decay=0.0, client_id=None):
        super().__init__(features, labels, n_classes, l2_decay, client_id)
        m = self.features.shape[1]
        self.hidden = int(hidden)
        h, c = self.hidden, self.n_classes
        self._sizes = (m * h, h, h * c, c)
        self.dim = sum(self._sizes)

    def _unpack(self, x):
        m = self.features.shape[1]
        h, c = self.hidden, self.n_classes
        s0, s1, s2, s3 = self._sizes
        o1 = s0
        o2 = o1 + s1
        o3 = o2 + s2
        return (
            x[:o1].reshape(m, h),
            x[o1:o2],
            x[o2:o3].reshape(h, c),
            x[o3:],
        )

    def value(self, x):
        W1, b1, W2, b2 = self._unpack(x)
        loss = kernels.mlp_value_grad(self.features, self.labels, W1, b1, W2, b2)[0]
        return loss + 0.5 * self.l2_decay * float(x @ x)

    def grad(self, x):
        return self.stoch_grad(x, None)

    def stoch_grad(self, x, batch=None):
        X, y = self._slice(batch)
        W1, b1, W2, b2 = self._unpack(x)
        _, gW1, gb1, gW2, gb2 = kernels.mlp_value_grad(X, y, W1, b1, W2, b2)
        g = np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])
        if self.l2_decay:
            g += self.l2_decay * x
        return self._checked(g)

    def logits(self, x, X=None):
        W1, b1, W2, b2 = self._unpack(x)
        return kernels.mlp_logits(self.features if X is None else X, W1, b1, W2, b2)

    def init_params(self, stream: SeededStream) -> np.ndarray:
        """Symmetry-breaking start: scaled normal weights, zero biases."""
        rng = stream.generator()
        m = self.features.shape[1]
        h, c = self.hidden, self.n_classes
        W1 = rng.standard_normal((m, h)) / np.sqrt(m)
        W2 = rng.standard_normal((h, c)) / np.sqrt(h)
        return np.concatenate([W1.ravel(), np.zeros(h), W2.ravel(), np.zeros(c)])


def make_supervised_client(features, labels, n_classes, model="logistic", hidden=16,
                           l2_decay=0.0, client_id=None) -> ClientObjective:
    if model == "logistic":
        return LogisticClient(features, labels, n_classes, l2_decay, client_id)
    if model == "mlp":
        return MLPClient(features, labels, n_classes, hidden, l2_decay, client_id)
    raise UsageError(f"unknown model {model!r}")


def make_quadratic_problem(n: int, d: int, spread: float, stream: SeededStream):
    """n quadratic clients A_i = Abar + spread*S_i with mean-zero S_i and b_i.

    Abar is positive definite; the deviations sum to zero exactly across
    clients, so the homogeneous case is recovered at spread=0.
    """
    if n < 1 or d < 1 or spread < 0:
        raise UsageError("need n >= 1, d >= 1, spread >= 0")
    rng = stream.generator()
    M = rng.standard_normal((d, d))
    A_bar = M @ M.T / d + np.eye(d)
    devs_A = []
    devs_b = []
    for _ in range(n - 1):
        S = rng.standard_normal((d, d))
        devs_A.append((S + S.T) / 2.0)
        devs_b.append(rng.standard_normal(d))
    if n > 1:
        devs_A.append(-np.sum(devs_A, axis=0))
        devs_b.append(-np.sum(devs_b, axis=0))
    else:
        devs_A.append(np.zeros((d, d)))
        devs_b.append(np.zeros(d))
    return [
        QuadraticClient(A_bar + spread * devs_A[i], devs_b[i], client_id=i)
        for i in range(n)
    ]


class FederatedProblem:
    """n clients plus mean-objective services over them.

    The mean gradient is always assembled with :func:`mean_reduce` over
    ascending client index; every algorithm and check shares this one path so
    coupled comparisons stay bit-reproducible.
    """

    def __init__(self, clients):
        clients = list(clients)
        if not clients:
            raise UsageError("FederatedProblem needs at least one client")
        dims = {c.dim for c in clients}
        if len(dims) != 1:
            raise DimensionError(f"clients disagree on dimension: {sorted(dims)}")
        self.clients = clients
        self.dim = clients[0].dim

    @property
    def n(self) -> int:
        return len(self.clients)

    def value(self, x) -> float:
        total = 0.0
        for c in self.clients:
            total += c.value(x)
        return total / self.n

    def client_grads(self, x):
        return [c.grad(x) for c in self.clients]

    def grad(self, x) -> np.ndarray:
        return mean_reduce(self.client_grads(x))

    def hvp(self, x, v) -> np.ndarray:
        return mean_reduce([c.hvp(x, v) for c in self.clients])

    def subset(self, indices) -> "FederatedProblem":
        return FederatedProblem([self.clients[i] for i in indices])
