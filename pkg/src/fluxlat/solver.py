"""Low-lying spectra of real symmetric sparse operators.

:func:`low_spectrum` is a block Lanczos iteration with full
reorthogonalization and thick restart.  Each step multiplies the newest block
by ``H`` and appends it to the Krylov basis; the projected matrix is
accumulated column-block by column-block and Rayleigh-Ritz extraction runs on
a geometric schedule.  With block size ``k``, degenerate eigenvalues of
multiplicity up to ``k`` are resolved.

:func:`dense_spectrum` is the LAPACK reference used as a verification oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import CapacityError, EmptyBasisError

DEFAULT_SEED = 20111220
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 5000
DEFAULT_DENSE_CAP = 4000
# bytes allowed for the Krylov basis and its image together
DEFAULT_MEMORY_BUDGET = 400 * 2**20


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, unit norm
    residuals: np.ndarray
    iterations: int = 0
    converged: bool = True
    seed: int | None = None
    matvecs: int = 0
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SolverOptions:
    k: int = 4
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    seed: int = DEFAULT_SEED
    dense_cap: int = DEFAULT_DENSE_CAP


def matvec(h, x: np.ndarray) -> np.ndarray:
    """``H @ x`` with a length check; CSR rows are reduced sequentially."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != h.shape[1]:
        raise ValueError(f"vector of length {x.shape[0]} does not match operator dimension {h.shape[1]}")
    return h @ x


def _residuals(h, values, vectors) -> np.ndarray:
    if vectors.shape[1] == 0:
        return np.empty(0)
    return np.linalg.norm(matvec(h, vectors) - vectors * values, axis=0)


def dense_spectrum(h, cap: int = DEFAULT_DENSE_CAP, vectors: bool = True) -> EigenResult:
    """Full spectrum by dense symmetric diagonalisation."""
    n = h.shape[0]
    if n > cap:
        raise CapacityError(f"dense diagonalisation refused: dimension {n} exceeds cap {cap}")
    if n == 0:
        raise EmptyBasisError("operator has dimension 0")
    a = h.toarray() if sp.issparse(h) else np.asarray(h, dtype=np.float64)
    if not vectors:
        w = sla.eigh(a, eigvals_only=True)
        return EigenResult(w, np.empty((n, 0)), np.empty(0), iterations=1, converged=True)
    w, v = sla.eigh(a)
    return EigenResult(w, v, _residuals(h, w, v), iterations=1, converged=True)


def _orthonormalize(block: np.ndarray, basis: np.ndarray, rng, scale: float) -> np.ndarray:
    """Orthogonalize ``block`` against ``basis`` (two passes) and itself.

    Columns that collapse below round-off are replaced by fresh random
    directions, which lets the iteration leave an exhausted invariant subspace.
    """
    n, b = block.shape
    out = np.empty_like(block)
    for j in range(b):
        v = block[:, j].copy()
        for attempt in range(3):
            for _ in range(2):
                if basis.shape[1]:
                    v -= basis @ (basis.T @ v)
                if j:
                    v -= out[:, :j] @ (out[:, :j].T @ v)
            norm = np.linalg.norm(v)
            if norm > 1e-10 * max(scale, 1.0):
                break
            v = rng.standard_normal(n)
            scale = np.linalg.norm(v)
        else:
            raise ArithmeticError("could not extend the Krylov basis")
        out[:, j] = v / norm
    return out


def low_spectrum(
    h,
    k: int = 1,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
    block_size: int | None = None,
    max_basis: int | None = None,
) -> EigenResult:
    """The ``k`` lowest eigenpairs of a real symmetric operator.

    Converged pairs satisfy ``||H x - theta x|| <= tol * max(1, |theta|)``.
    If ``max_iter`` block steps pass without convergence the current Ritz
    pairs are returned with ``converged=False``.
    """
    n = h.shape[0]
    if n == 0:
        raise EmptyBasisError("operator has dimension 0")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    b = min(block_size or k, n)
    if max_basis is None:
        max_basis = max(DEFAULT_MEMORY_BUDGET // (16 * n), 3 * b + k)
    max_basis = min(max(max_basis, 2 * b + k), n)

    rng = np.random.default_rng(seed)
    V = np.empty((n, max_basis))
    AV = np.empty((n, max_basis))
    T = np.zeros((max_basis, max_basis))
    m = 0
    block = _orthonormalize(rng.standard_normal((n, b)), V[:, :0], rng, 1.0)
    matvecs = 0
    restarts = 0
    theta = np.empty(0)
    S = np.empty((0, 0))

    next_check = 0
    for it in range(1, max_iter + 1):
        w = np.asarray(matvec(h, block))
        matvecs += block.shape[1]
        nb = block.shape[1]
        V[:, m : m + nb] = block
        AV[:, m : m + nb] = w
        coupling = V[:, : m + nb].T @ w
        T[: m + nb, m : m + nb] = coupling
        T[m : m + nb, : m + nb] = coupling.T
        m += nb

        nxt = min(b, n - m)
        must_restart = m + nxt > max_basis and m < n
        if m >= next_check or m == n or must_restart or it == max_iter:
            # Ritz extraction on a geometric schedule keeps the O(m^3) cost bounded
            next_check = m + max(b, m // 8)
            theta, S = np.linalg.eigh(0.5 * (T[:m, :m] + T[:m, :m].T))
            kk = min(k, m)
            Y = V[:, :m] @ S[:, :kk]
            R = AV[:, :m] @ S[:, :kk] - Y * theta[:kk]
            res = np.linalg.norm(R, axis=0)
            bound = tol * np.maximum(1.0, np.abs(theta[:kk]))
            if kk == k and (m == n or np.all(res <= bound)):
                res = _residuals(h, theta[:k], Y)
                matvecs += k
                if m == n or np.all(res <= bound):
                    info = {"basis": m, "restarts": restarts}
                    return EigenResult(theta[:k].copy(), Y, res, it, True, seed, matvecs, info)

        scale = float(np.max(np.abs(theta))) if len(theta) else 1.0
        if must_restart:
            # thick restart: keep the lowest Ritz vectors, continue from the newest direction
            keep = min(m - b, max(k + b, m // 2))
            new = w - V[:, :m] @ (V[:, :m].T @ w)
            V[:, :keep] = V[:, :m] @ S[:, :keep]
            AV[:, :keep] = AV[:, :m] @ S[:, :keep]
            T[:, :] = 0.0
            T[np.arange(keep), np.arange(keep)] = theta[:keep]
            m = keep
            next_check = m
            restarts += 1
            nxt = min(b, max_basis - m, n - m)
            block = _orthonormalize(new[:, :nxt], V[:, :m], rng, scale)
        else:
            block = _orthonormalize(w[:, :nxt], V[:, :m], rng, scale)

    theta, S = np.linalg.eigh(0.5 * (T[:m, :m] + T[:m, :m].T))
    kk = min(k, m)
    Y = V[:, :m] @ S[:, :kk]
    res = _residuals(h, theta[:kk], Y)
    info = {"basis": m, "restarts": restarts}
    return EigenResult(theta[:kk].copy(), Y, res, max_iter, False, seed, matvecs + kk, info)
