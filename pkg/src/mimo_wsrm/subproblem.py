"""Per-base-station covariance subproblem.

With the receive filters and the other cells' beams held fixed, cell ``m``
maximises over PSD covariances ``W_n`` (one per subcarrier)

    f(W) = sum_n [ w_n log2 det(A_n W_n A_n^H + eps I) - tr(P_n W_n) / ln 2 ]

subject to ``sum_n tr(W_n) <= P_max``. ``A_n = U_n^H H_n`` maps the cell's
own transmission onto its filtered receiver, and the penalty ``P_n`` collects
the trace-linearised leakage into every other cell:

    P_n = sum_{victims v} w_v B_v^H N_v^{-1} B_v,    B_v = U_v^H H_{m -> v}

The objective is concave, so it is solved by projected gradient ascent with
an Armijo backtracking line search. Rank-``Nr`` beamformers are read off the
dominant eigenpairs of the solution.
"""

import csv
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .exceptions import SolverError
from .linalg import LN2, herm, hermitize, log2det, normalize_phase, real_inner
from .rate_engine import aggregate_leakage_plus_noise

__all__ = [
    "SubproblemData",
    "SolverOptions",
    "DegenerateCovarianceWarning",
    "build_subproblem",
    "objective",
    "gradient",
    "project_feasible",
    "project_euclidean",
    "solve",
    "recover_beamformer",
    "recover_beamformers",
    "initial_covariances",
    "write_solver_trace",
]


class DegenerateCovarianceWarning(UserWarning):
    pass


@dataclass
class SubproblemData:
    """Everything cell ``cell`` needs to optimise its covariances locally.

    Attributes
    ----------
    signal_maps : ndarray, shape (N, Nr, Nt)
        ``A_n = U_mn^H H_mmn``.
    weights : ndarray, shape (N,)
        Weight of the user served on each subcarrier.
    penalty : ndarray, shape (N, Nt, Nt)
        Weighted leakage penalty ``P_n`` (Hermitian PSD).
    leakage_maps : ndarray, shape (M - 1, N, Nr, Nt)
        ``B`` for every victim cell, in the order of ``victims``.
    leakage_noise : ndarray, shape (M - 1, N, Nr, Nr)
        Aggregate leakage-plus-noise ``N`` of every victim link.
    """

    cell: int
    signal_maps: np.ndarray
    weights: np.ndarray
    penalty: np.ndarray
    budget: float
    victims: tuple = ()
    leakage_maps: Optional[np.ndarray] = None
    leakage_noise: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SolverOptions:
    max_inner_iters: int = 200
    step_init: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    eps: float = 1e-9
    objective_tol: float = 1e-6
    # "euclidean" (exact projection) or "scaled" (clip then rescale)
    projection: str = "euclidean"
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0 < self.backtrack < 1 or not 0 < self.armijo < 1:
            raise ValueError("backtrack and armijo factors must lie in (0, 1)")
        if self.step_init <= 0 or self.objective_tol <= 0 or self.eps < 0:
            raise ValueError("step_init and objective_tol must be positive, eps non-negative")
        if self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be positive")
        if self.projection not in ("euclidean", "scaled"):
            raise ValueError(f"unknown projection {self.projection!r}")


def build_subproblem(channels, beams, filters, config, m):
    """Assemble cell ``m``'s subproblem from a snapshot of beams and filters.

    Raises :class:`~mimo_wsrm.exceptions.DegenerateFilterError` if some
    victim's leakage-plus-noise matrix is singular.
    """
    G = channels.links
    M, _, N = G.shape[:3]
    users = channels.assignment.user_of
    w = config.weights
    A = herm(filters[m]) @ G[m, m]
    weights = w[m, users[m]]
    victims = tuple(v for v in range(M) if v != m)
    Nt = G.shape[-1]
    P = np.zeros((N, Nt, Nt), dtype=complex)
    Bs, Ns = [], []
    for v in victims:
        B = herm(filters[v]) @ G[m, v]
        N_leak = np.stack([aggregate_leakage_plus_noise(channels, beams, filters, v, n, m)
                           for n in range(N)])
        P += w[v, users[v]][:, None, None] * (herm(B) @ np.linalg.solve(N_leak, B))
        Bs.append(B)
        Ns.append(N_leak)
    return SubproblemData(
        cell=m,
        signal_maps=A,
        weights=weights,
        penalty=hermitize(P),
        budget=float(config.power_linear[m]),
        victims=victims,
        leakage_maps=np.stack(Bs) if Bs else None,
        leakage_noise=np.stack(Ns) if Ns else None,
    )


def _signal_cov(data, covs, eps):
    A = data.signal_maps
    return A @ covs @ herm(A) + eps * np.eye(A.shape[-2])


def objective(data, covs, eps=1e-9):
    """Concave surrogate objective of the subproblem (bits)."""
    S = _signal_cov(data, covs, eps)
    try:
        logdets = log2det(S)
    except np.linalg.LinAlgError as exc:
        raise SolverError("signal term is singular; objective is -inf") from exc
    penalty = np.real(np.einsum("nij,nji->n", data.penalty, covs))
    return float(np.sum(data.weights * logdets) - np.sum(penalty) / LN2)


def gradient(data, covs, eps=1e-9):
    """Hermitian gradient of :func:`objective` with respect to each ``W_n``.

    ``(w_n / ln 2) A_n^H (A_n W_n A_n^H + eps I)^{-1} A_n - P_n / ln 2``; the
    directional derivative along a Hermitian ``D`` is ``Re tr(grad D)``.
    """
    A = data.signal_maps
    S = _signal_cov(data, covs, eps)
    try:
        inner = herm(A) @ np.linalg.solve(S, A)
    except np.linalg.LinAlgError as exc:
        raise SolverError("signal term is singular; gradient undefined") from exc
    return hermitize(data.weights[:, None, None] * inner - data.penalty) / LN2


def project_feasible(covs, budget):
    """Clip negative eigenvalues, then rescale all matrices if the trace budget is exceeded.

    Feasible for both constraints but not the Euclidean projection onto
    their intersection; see :func:`project_euclidean` for that.
    """
    vals, vecs = np.linalg.eigh(hermitize(covs))
    vals = np.clip(vals, 0.0, None)
    out = hermitize((vecs * vals[..., None, :]) @ herm(vecs))
    total = float(np.sum(vals))
    if total > budget:
        out = out * (budget / total)
    return out


def _cap_simplex(vals, budget):
    """Euclidean projection of a vector onto ``{x >= 0, sum(x) <= budget}``."""
    x = np.clip(vals, 0.0, None)
    if x.sum() <= budget:
        return x
    # find tau >= 0 with sum(max(vals - tau, 0)) == budget
    u = np.sort(vals.ravel())[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u - (css - budget) / k > 0)[0][-1]
    tau = (css[rho] - budget) / (rho + 1)
    return np.clip(vals - tau, 0.0, None)


def project_euclidean(covs, budget):
    """Nearest point (Frobenius norm) with ``W_n >= 0`` and ``sum_n tr(W_n) <= budget``.

    The set is unitarily invariant per block, so projecting the pooled
    eigenvalues onto the capped simplex and keeping the eigenvectors is exact.
    """
    vals, vecs = np.linalg.eigh(hermitize(covs))
    vals = _cap_simplex(vals, budget)
    return hermitize((vecs * vals[..., None, :]) @ herm(vecs))


def _project(covs, budget, opts):
    if opts.projection == "scaled":
        return project_feasible(covs, budget)
    return project_euclidean(covs, budget)


def solve(data, init, opts=None, trace: Optional[List] = None):
    """Projected gradient ascent on the covariance subproblem.

    Trial steps use the Barzilai-Borwein length (``opts.step_init`` on the
    first iteration) and are halved by ``opts.backtrack`` until the Armijo
    condition ``f(W+) >= f(W) + c1 <grad, W+ - W>`` holds. Stops once an
    accepted step gains less than ``opts.objective_tol`` or after
    ``opts.max_inner_iters`` iterations.

    If ``trace`` is a list, ``(inner_iter, objective, step)`` tuples are
    appended for the start point (iteration 0, step 0) and every accepted
    step, so the recorded objectives are nondecreasing.
    """
    opts = opts or SolverOptions()
    W = np.asarray(init, dtype=complex)
    f = objective(data, W, opts.eps)
    if not np.isfinite(f):
        raise SolverError("objective is not finite at the initial point")
    if trace is not None:
        trace.append((0, f, 0.0))
    t = opts.step_init
    W_prev = g_prev = None
    for it in range(1, opts.max_inner_iters + 1):
        g = gradient(data, W, opts.eps)
        if W_prev is not None:
            s, y = W - W_prev, g - g_prev
            sy = real_inner(s, y)
            if sy < 0:
                t = real_inner(s, s) / -sy
        accepted = False
        for _ in range(opts.max_backtracks):
            W_new = _project(W + t * g, data.budget, opts)
            ascent = real_inner(g, W_new - W)
            if not ascent > 0:
                break
            try:
                f_new = objective(data, W_new, opts.eps)
            except SolverError:
                f_new = -np.inf
            if f_new >= f + opts.armijo * ascent:
                accepted = True
                break
            t *= opts.backtrack
        if not accepted:
            break
        gain = f_new - f
        W_prev, g_prev = W, g
        W, f = W_new, f_new
        if trace is not None:
            trace.append((it, f, t))
        if gain < opts.objective_tol:
            break
    return W


def initial_covariances(beams_cell, budget, jitter=1e-6):
    """Strictly interior start ``V V^H + jitter I`` pulled back into the feasible set."""
    W = beams_cell @ herm(beams_cell)
    W = W + jitter * np.eye(W.shape[-1])
    return project_feasible(W, budget)


def recover_beamformer(W, Nr):
    """Rank-``Nr`` beamformer ``[v_1 .. v_Nr] diag(sqrt(sigma_i))`` from a covariance.

    ``sigma_i`` are the ``Nr`` largest eigenvalues of ``W``, so ``V V^H`` is
    the best rank-``Nr`` PSD approximation of ``W`` in Frobenius norm.
    Emits :class:`DegenerateCovarianceWarning` (and zero columns) when fewer
    than ``Nr`` eigenvalues are positive.
    """
    return recover_beamformers(np.asarray(W)[None], Nr)[0]


def recover_beamformers(covs, Nr):
    """Batched :func:`recover_beamformer` over a ``(N, Nt, Nt)`` stack."""
    vals, vecs = np.linalg.eigh(hermitize(covs))
    vals = vals[..., ::-1][..., :Nr]
    vecs = normalize_phase(vecs[..., ::-1][..., :Nr])
    if np.any(vals <= 0):
        warnings.warn("covariance has fewer than Nr positive eigenvalues; emitting zero columns",
                      DegenerateCovarianceWarning, stacklevel=2)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))[..., None, :]


def write_solver_trace(rows, path):
    """Rows of ``(cell, outer_iter, inner_iter, objective, step)``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cell", "outer_iter", "inner_iter", "objective", "step"])
        for cell, outer, inner, obj, step in rows:
            writer.writerow([cell, outer, inner, repr(float(obj)), repr(float(step))])
