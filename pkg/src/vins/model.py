"""Matrix factorization scorer with a weighted pairwise logistic loss and sparse Adam."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit


@dataclass(eq=False)
class ModelParams:
    user_embeddings: np.ndarray
    item_embeddings: np.ndarray

    @property
    def dim(self) -> int:
        return self.user_embeddings.shape[1]

    @property
    def n_users(self) -> int:
        return self.user_embeddings.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_embeddings.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(self.user_embeddings.copy(), self.item_embeddings.copy())


@dataclass(eq=False)
class AdamState:
    """First/second moments for both tables plus optimizer hyperparameters."""

    m_user: np.ndarray
    v_user: np.ndarray
    m_item: np.ndarray
    v_item: np.ndarray
    learning_rate: float = 1e-3
    weight_decay: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParams, **kw) -> "AdamState":
        return cls(np.zeros_like(params.user_embeddings), np.zeros_like(params.user_embeddings),
                   np.zeros_like(params.item_embeddings), np.zeros_like(params.item_embeddings), **kw)


@dataclass(frozen=True)
class PairwiseTriple:
    u: int
    i: int
    j: int
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"triple weight must be positive, got {self.weight}")
        if self.i == self.j:
            raise ValueError("positive and negative item coincide")


@dataclass
class SparseGradient:
    """Gradient restricted to one user row and the positive/negative item rows."""

    u: int
    user_grad: np.ndarray
    item_rows: tuple
    item_grads: np.ndarray = field(repr=False)


def init_params(n_users: int, n_items: int, dim: int, scale: float = 0.1,
                rng: np.random.Generator | None = None) -> ModelParams:
    if min(n_users, n_items, dim) < 1:
        raise ValueError("table sizes and dimension must be positive")
    if not scale > 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng() if rng is None else rng
    return ModelParams(rng.normal(0.0, scale, size=(n_users, dim)),
                       rng.normal(0.0, scale, size=(n_items, dim)))


def score(params: ModelParams, u: int, i: int) -> float:
    if not (0 <= u < params.n_users and 0 <= i < params.n_items):
        raise ValueError(f"index out of range: ({u}, {i})")
    return float(params.user_embeddings[u] @ params.item_embeddings[i])


@njit(cache=True)
def softplus(x):
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True)
def sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def pairwise_loss(x_ui: float, x_uj: float, weight: float = 1.0) -> float:
    """-w * ln sigmoid(x_ui - x_uj), written as w * softplus(x_uj - x_ui)."""
    if not weight > 0:
        raise ValueError("weight must be positive")
    return weight * softplus(x_uj - x_ui)


def objective(params: ModelParams, triple: PairwiseTriple, lambda_reg: float = 0.0) -> float:
    """Per-triple loss plus L2 on the three touched rows."""
    pu = params.user_embeddings[triple.u]
    pi = params.item_embeddings[triple.i]
    pj = params.item_embeddings[triple.j]
    reg = lambda_reg * (pu @ pu + pi @ pi + pj @ pj)
    return pairwise_loss(pu @ pi, pu @ pj, triple.weight) + reg


def loss_gradients(params: ModelParams, triple: PairwiseTriple, lambda_reg: float = 0.0) -> SparseGradient:
    pu = params.user_embeddings[triple.u]
    pi = params.item_embeddings[triple.i]
    pj = params.item_embeddings[triple.j]
    g = -triple.weight * (1.0 - sigmoid(pu @ pi - pu @ pj))
    gu = g * (pi - pj) + 2 * lambda_reg * pu
    gi = g * pu + 2 * lambda_reg * pi
    gj = -g * pu + 2 * lambda_reg * pj
    return SparseGradient(triple.u, gu, (triple.i, triple.j), np.stack([gi, gj]))


def adam_step(state: AdamState, params: ModelParams, grad: SparseGradient):
    """Bias-corrected Adam on the touched rows only; other rows and moments are untouched."""
    if not (np.all(np.isfinite(grad.user_grad)) and np.all(np.isfinite(grad.item_grads))):
        raise FloatingPointError("non-finite gradient")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t

    def update(p, m, v, row, g):
        m[row] = b1 * m[row] + (1 - b1) * g
        v[row] = b2 * v[row] + (1 - b2) * g * g
        p[row] -= state.learning_rate * (m[row] / c1) / (np.sqrt(v[row] / c2) + state.epsilon)

    update(params.user_embeddings, state.m_user, state.v_user, grad.u, grad.user_grad)
    for row, g in zip(grad.item_rows, grad.item_grads):
        update(params.item_embeddings, state.m_item, state.v_item, row, g)
    return params, state


@njit(cache=True)
def _adam_row(p, m, v, g, lr, b1, b2, eps, c1, c2):
    for k in range(p.shape[0]):
        m[k] = b1 * m[k] + (1 - b1) * g[k]
        v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k]
        p[k] -= lr * (m[k] / c1) / (math.sqrt(v[k] / c2) + eps)


@njit(cache=True)
def triple_step(U, V, mU, vU, mV, vV, t, u, i, j, w, lr, lam, b1, b2, eps):
    """Fused gradient + Adam update for one triple at step ``t``; returns the pre-update loss.

    Same arithmetic as ``loss_gradients`` followed by ``adam_step``.
    """
    d = U.shape[1]
    pu, pi, pj = U[u], V[i], V[j]
    x = 0.0
    for k in range(d):
        x += pu[k] * (pi[k] - pj[k])
    loss = w * softplus(-x)
    g = -w * (1.0 - sigmoid(x))
    gu = np.empty(d)
    gi = np.empty(d)
    gj = np.empty(d)
    for k in range(d):
        gu[k] = g * (pi[k] - pj[k]) + 2 * lam * pu[k]
        gi[k] = g * pu[k] + 2 * lam * pi[k]
        gj[k] = -g * pu[k] + 2 * lam * pj[k]
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    _adam_row(U[u], mU[u], vU[u], gu, lr, b1, b2, eps, c1, c2)
    _adam_row(V[i], mV[i], vV[i], gi, lr, b1, b2, eps, c1, c2)
    _adam_row(V[j], mV[j], vV[j], gj, lr, b1, b2, eps, c1, c2)
    return loss


def save_checkpoint(params: ModelParams, path) -> None:
    """Text checkpoint: header ``d n_users n_items`` then users' rows, then items' rows."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{params.dim} {params.n_users} {params.n_items}\n")
        for table in (params.user_embeddings, params.item_embeddings):
            for row in table:
                fh.write(" ".join(f"{x:.17g}" for x in row))
                fh.write("\n")


def load_checkpoint(path) -> ModelParams:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: bad checkpoint header")
        d, nu, ni = map(int, header)
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if data.shape != (nu + ni, d):
        raise ValueError(f"{path}: expected {(nu + ni, d)} values, found {data.shape}")
    return ModelParams(np.ascontiguousarray(data[:nu]), np.ascontiguousarray(data[nu:]))
