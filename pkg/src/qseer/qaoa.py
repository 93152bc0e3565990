"""Dense statevector simulation of depth-p QAOA Max-Cut circuits.

Internals are batched over parameter sets (leading axis B) so multi-start
optimization runs all starts in lockstep; the public API wraps batch size 1.
Gradients are exact reverse-mode (adjoint) sweeps: one forward pass, then the
layers are peeled off the state and the costate simultaneously.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, DomainError, ParameterError
from .graph import Graph, max_cut_bruteforce

SIM_MAX_QUBITS = 20

__all__ = [
    "ParamVector",
    "OptimizationResult",
    "cut_values",
    "evolve",
    "expectation",
    "gradient",
    "approximation_ratio",
    "adam_optimize",
    "multistart_optimize",
    "linear_ramp_init",
]


@dataclass(frozen=True)
class ParamVector:
    """Depth-p pair of angle sequences (gamma[1..p], beta[1..p]), radians."""

    gamma: tuple[float, ...]
    beta: tuple[float, ...]

    def __post_init__(self):
        gamma = tuple(float(x) for x in self.gamma)
        beta = tuple(float(x) for x in self.beta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)
        if len(gamma) != len(beta) or len(gamma) < 1:
            raise ParameterError(
                f"gamma and beta must have equal length >= 1, got {len(gamma)}/{len(beta)}")
        if not all(np.isfinite(gamma)) or not all(np.isfinite(beta)):
            raise ParameterError("angles must be finite")

    @property
    def p(self) -> int:
        return len(self.gamma)


@dataclass
class OptimizationResult:
    params: ParamVector
    cost: float            # final F_p
    ar: float              # cost / C_max
    iterations: int
    trace: list[tuple[int, float]] = field(default_factory=list)


def _check_size(g: Graph) -> None:
    if g.n > SIM_MAX_QUBITS:
        raise BoundsError(f"simulator supports n <= {SIM_MAX_QUBITS}, got {g.n}")


def cut_values(g: Graph) -> np.ndarray:
    """Cut value of every basis state: the diagonal of the cost Hamiltonian.
    Bit i of the state index gives the side of node i."""
    _check_size(g)
    z = np.arange(1 << g.n, dtype=np.int64)
    cut = np.zeros(1 << g.n)
    for u, v, w in g.edges:
        cut += w * (((z >> u) ^ (z >> v)) & 1)
    return cut


# ----------------------------------------------------------------------------
# Batched layer primitives. States have shape (B,) + (2,)*n with qubit i on
# axis n - i (axis order matches index-bit significance of cut_values).
# ----------------------------------------------------------------------------


def _mix_batch(psi: np.ndarray, n: int, beta: np.ndarray) -> np.ndarray:
    """Apply exp(-i beta X) on every qubit; beta has shape (B,)."""
    shape = (-1,) + (1,) * (n - 1)
    c = np.cos(beta).reshape(shape)
    s = np.sin(beta).reshape(shape)
    for axis in range(1, n + 1):
        a = np.take(psi, 0, axis=axis)
        b = np.take(psi, 1, axis=axis)
        psi = np.stack((c * a - 1j * s * b, c * b - 1j * s * a), axis=axis)
    return psi


def _hx_apply(psi: np.ndarray, n: int) -> np.ndarray:
    """Apply the mixer Hamiltonian (sum of per-qubit X) to a batch of states."""
    out = np.zeros_like(psi)
    for axis in range(1, n + 1):
        out += np.flip(psi, axis=axis)
    return out


def _evolve_batch(cut: np.ndarray, n: int, gammas: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """Full circuit for B parameter sets: gammas/betas shape (B, p)."""
    B, p = gammas.shape
    dim = cut.size
    psi = np.full((B, dim), 1.0 / np.sqrt(dim), dtype=complex)
    cut_nd = cut.reshape((1,) + (2,) * n)
    psi = psi.reshape((B,) + (2,) * n)
    for j in range(p):
        psi = psi * np.exp(-1j * gammas[:, j].reshape((-1,) + (1,) * n) * cut_nd)
        psi = _mix_batch(psi, n, betas[:, j])
    return psi.reshape(B, dim)


def _expectation_batch(cut: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return (np.abs(psi) ** 2) @ cut


def _batch_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, a.ndim))
    return np.sum(np.conj(a) * b, axis=axes)


def _gradient_batch(cut: np.ndarray, n: int, gammas: np.ndarray, betas: np.ndarray):
    """Adjoint derivative of F_p w.r.t. every angle. Returns (F, dgamma, dbeta)
    with shapes (B,), (B, p), (B, p)."""
    B, p = gammas.shape
    psi = _evolve_batch(cut, n, gammas, betas)
    F = _expectation_batch(cut, psi)

    shape_nd = (B,) + (2,) * n
    cut_nd = cut.reshape((1,) + (2,) * n)
    psi = psi.reshape(shape_nd)
    lam = cut_nd * psi  # H_z |psi_final>
    dgamma = np.empty((B, p))
    dbeta = np.empty((B, p))
    for j in range(p - 1, -1, -1):
        # state currently sits just after the layer-j mixer
        dbeta[:, j] = 2.0 * np.real(_batch_dot(lam, -1j * _hx_apply(psi, n)))
        psi = _mix_batch(psi, n, -betas[:, j])
        lam = _mix_batch(lam, n, -betas[:, j])
        # now just after the layer-j cost phase
        dgamma[:, j] = 2.0 * np.real(_batch_dot(lam, -1j * cut_nd * psi))
        phase = np.exp(1j * gammas[:, j].reshape((-1,) + (1,) * n) * cut_nd)
        psi = psi * phase
        lam = lam * phase
    return F, dgamma, dbeta


# ----------------------------------------------------------------------------
# Public single-instance API
# ----------------------------------------------------------------------------


def evolve(g: Graph, params: ParamVector) -> np.ndarray:
    """Statevector of the depth-p circuit; 2^n complex amplitudes."""
    cut = cut_values(g)
    psi = _evolve_batch(cut, g.n, np.array([params.gamma]), np.array([params.beta]))
    return psi[0]


def expectation(g: Graph, params: ParamVector) -> float:
    """F_p = <psi_p| H_z |psi_p>."""
    cut = cut_values(g)
    psi = _evolve_batch(cut, g.n, np.array([params.gamma]), np.array([params.beta]))
    return float(_expectation_batch(cut, psi)[0])


def gradient(g: Graph, params: ParamVector) -> tuple[np.ndarray, np.ndarray]:
    """Exact (dF/dgamma, dF/dbeta)."""
    cut = cut_values(g)
    _, dg, db = _gradient_batch(cut, g.n, np.array([params.gamma]), np.array([params.beta]))
    return dg[0], db[0]


def approximation_ratio(g: Graph, params: ParamVector, cmax: float) -> float:
    if cmax <= 0:
        raise DomainError(f"approximation ratio needs C_max > 0, got {cmax}")
    return expectation(g, params) / cmax


def linear_ramp_init(p: int, dt: float = 0.75) -> ParamVector:
    """Linear annealing-ramp initialization: gamma_j = (j/p) dt, beta_j = (1 - j/p) dt."""
    if p < 1:
        raise ParameterError(f"depth must be >= 1, got {p}")
    if dt <= 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    j = np.arange(1, p + 1)
    return ParamVector(gamma=tuple(j / p * dt), beta=tuple((1 - j / p) * dt))


# ----------------------------------------------------------------------------
# Classical optimization (gradient ascent on F_p)
# ----------------------------------------------------------------------------

ADAM_B1 = 0.9
ADAM_B2 = 0.999
ADAM_EPS = 1e-8


def _adam_ascent_batch(cut, n, gammas, betas, lr, iters):
    """Run Adam ascent on all B parameter rows. Returns final angles and the
    per-iteration F trace of shape (B, iters + 1) (entry 0 = initial F)."""
    B, p = gammas.shape
    theta = np.concatenate([gammas, betas], axis=1)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    trace = np.empty((B, iters + 1))
    for t in range(1, iters + 1):
        F, dg, db = _gradient_batch(cut, n, theta[:, :p], theta[:, p:])
        trace[:, t - 1] = F
        grad = np.concatenate([dg, db], axis=1)
        m = ADAM_B1 * m + (1 - ADAM_B1) * grad
        v = ADAM_B2 * v + (1 - ADAM_B2) * grad ** 2
        mhat = m / (1 - ADAM_B1 ** t)
        vhat = v / (1 - ADAM_B2 ** t)
        theta = theta + lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
    psi = _evolve_batch(cut, n, theta[:, :p], theta[:, p:])
    trace[:, iters] = _expectation_batch(cut, psi)
    return theta[:, :p], theta[:, p:], trace


def adam_optimize(g: Graph, init: ParamVector, lr: float = 0.01, iters: int = 100,
                  cmax: float | None = None) -> OptimizationResult:
    """Maximize F_p from a single start with standard Adam moments."""
    _check_size(g)
    cut = cut_values(g)
    gs, bs, trace = _adam_ascent_batch(
        cut, g.n, np.array([init.gamma]), np.array([init.beta]), lr, iters)
    if cmax is None:
        cmax = max_cut_bruteforce(g)
    cost = float(trace[0, -1])
    return OptimizationResult(
        params=ParamVector(gamma=tuple(gs[0]), beta=tuple(bs[0])),
        cost=cost,
        ar=cost / cmax if cmax > 0 else float("nan"),
        iterations=iters,
        trace=[(i, float(f)) for i, f in enumerate(trace[0])],
    )


def random_params(p: int, rng: np.random.Generator) -> ParamVector:
    """Draw from the initial bounds gamma in [-pi, pi)^p, beta in [-pi/2, pi/2)^p."""
    return ParamVector(gamma=tuple(rng.uniform(-np.pi, np.pi, p)),
                       beta=tuple(rng.uniform(-np.pi / 2, np.pi / 2, p)))


def multistart_optimize(g: Graph, p: int, starts: int, seed: int,
                        lr: float = 0.01, iters: int = 100) -> OptimizationResult:
    """Best of `starts` Adam runs from seeded random initializations.
    Ties in final F break toward the lowest start index."""
    if starts < 1:
        raise ParameterError(f"starts must be >= 1, got {starts}")
    _check_size(g)
    rng = np.random.default_rng(seed)
    gammas = rng.uniform(-np.pi, np.pi, (starts, p))
    betas = rng.uniform(-np.pi / 2, np.pi / 2, (starts, p))
    cut = cut_values(g)
    gs, bs, trace = _adam_ascent_batch(cut, g.n, gammas, betas, lr, iters)
    final = trace[:, -1]
    best = int(np.argmax(final))  # argmax returns the first (lowest) index on ties
    cmax = max_cut_bruteforce(g)
    cost = float(final[best])
    return OptimizationResult(
        params=ParamVector(gamma=tuple(gs[best]), beta=tuple(bs[best])),
        cost=cost,
        ar=cost / cmax if cmax > 0 else float("nan"),
        iterations=iters,
        trace=[(i, float(f)) for i, f in enumerate(trace[best])],
    )
