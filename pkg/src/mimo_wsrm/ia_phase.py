"""Interference-alignment initialisation by alternating leakage minimisation.

Each sweep first picks, for every cell and subcarrier, the ``Nr`` transmit
directions that leak least into the other cells' receive subspaces, then
re-fits every receive subspace to the least interfered directions. Both
steps minimise the same network leakage, so the total leakage after each
sweep never increases. The best of several random restarts (by unweighted
sum capacity) seeds the weighted sum-rate phase.
"""

import csv
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .channel_model import IA_STREAM, cell_powers, random_feasible_beamformers
from .linalg import herm, hermitize, normalize_phase
from .rate_engine import link_rates

__all__ = [
    "IaResult",
    "leakage",
    "link_leakages",
    "least_dominant_subspace",
    "min_interference_filters",
    "ia_sweep",
    "run_ia_phase",
    "write_leakage_trace",
]


@dataclass
class IaResult:
    beams: np.ndarray
    filters: np.ndarray
    leakage_per_user: np.ndarray
    sum_capacity: float
    restarts_run: int
    best_restart: int = 0
    restart_capacities: List[float] = field(default_factory=list)
    # (restart, sweep, total_leakage, sum_capacity); sweep 0 is the random start
    trace: List[Tuple[int, int, float, float]] = field(default_factory=list)


def leakage(channels, beams, filters, m, n):
    """Filtered interference power reaching the user on subcarrier ``n`` of cell ``m``."""
    G = channels.links
    U = filters[m, n]
    total = 0.0
    for j in range(G.shape[0]):
        if j == m:
            continue
        T = herm(U) @ G[j, m, n] @ beams[j, n]
        total += float(np.real(np.trace(T @ herm(T))))
    return total


def link_leakages(channels, beams, filters):
    """Batched :func:`leakage` for every link, shape ``(M, N)``."""
    T = herm(filters)[None] @ channels.links @ beams[:, None]
    power = np.sum(np.abs(T) ** 2, axis=(-2, -1))
    M = power.shape[0]
    power[np.arange(M), np.arange(M)] = 0.0
    return power.sum(axis=0)


def least_dominant_subspace(mats, d, tie_tol=1e-10):
    """Orthonormal bases of the ``d`` least-dominant eigenvectors of a Hermitian stack.

    Eigenvalues are taken in ascending order and eigenvectors are phase
    normalised; eigenvalues equal within ``tie_tol`` (relative to the
    spectral radius) are ordered lexicographically by their eigenvectors so
    the selection does not hinge on solver ordering.
    """
    vals, vecs = np.linalg.eigh(hermitize(mats))
    vecs = normalize_phase(vecs)
    scale = np.maximum(np.max(np.abs(vals), axis=-1, keepdims=True), 1.0)
    tied = np.diff(vals, axis=-1) <= tie_tol * scale
    group = np.concatenate([np.zeros_like(tied[..., :1], dtype=int),
                            np.cumsum(~tied, axis=-1)], axis=-1)
    # lexsort: last key is primary; entries compared first-row-first
    keys = []
    for i in range(vecs.shape[-2] - 1, -1, -1):
        keys += [vecs[..., i, :].imag, vecs[..., i, :].real]
    order = np.lexsort(keys + [group], axis=-1)[..., :d]
    return np.take_along_axis(vecs, order[..., None, :], axis=-1)


def min_interference_filters(channels, beams):
    """Receive filters spanning the ``Nr`` least interfered directions of every link."""
    T = channels.links @ beams[:, None]
    Q = T @ herm(T)
    M = Q.shape[0]
    Q[np.arange(M), np.arange(M)] = 0.0
    return least_dominant_subspace(Q.sum(axis=0), beams.shape[-1])


def ia_sweep(channels, beams, filters, config):
    """One alternating leakage-minimisation sweep.

    Transmit directions are refit against the given filters, scaled by a
    single factor per cell to meet the power budget with equality, and the
    filters are then refit against the new beams.

    Returns
    -------
    beams, filters : ndarray
        Updated ``(M, N, Nt, Nr)`` beamformers and ``(M, N, Nr, Nr)`` filters.
    """
    G = channels.links
    M = G.shape[0]
    Nr = beams.shape[-1]
    if M == 1:
        # no victims and no interferers: any beam/filter pair is leakage free
        scale = np.sqrt(config.power_linear / cell_powers(beams))
        return beams * scale[:, None, None, None], filters
    # outgoing leakage map of BS j: sum over victims m != j of G^H U U^H G
    B = herm(filters)[None] @ G
    L = herm(B) @ B
    L[np.arange(M), np.arange(M)] = 0.0
    directions = least_dominant_subspace(L.sum(axis=1), Nr)
    scale = np.sqrt(config.power_linear / cell_powers(directions))
    new_beams = directions * scale[:, None, None, None]
    return new_beams, min_interference_filters(channels, new_beams)


def run_ia_phase(channels, config):
    """Best of ``config.ia_restarts`` restarts of ``config.ia_iters`` sweeps each.

    Every restart starts from fresh random feasible beamformers. The restart
    with the largest unweighted sum capacity wins; ties go to the lowest
    restart index.
    """
    best = None
    capacities = []
    trace = []
    for r in range(config.ia_restarts):
        V = random_feasible_beamformers(config, realization=r, purpose=IA_STREAM)
        U = min_interference_filters(channels, V)
        trace.append((r, 0, float(link_leakages(channels, V, U).sum()),
                      float(link_rates(channels, V).sum())))
        for s in range(1, config.ia_iters + 1):
            V, U = ia_sweep(channels, V, U, config)
            trace.append((r, s, float(link_leakages(channels, V, U).sum()),
                          float(link_rates(channels, V).sum())))
        cap = trace[-1][3]
        capacities.append(cap)
        if best is None or cap > best[0]:
            best = (cap, r, V, U)
    cap, r, V, U = best
    return IaResult(beams=V, filters=U, leakage_per_user=link_leakages(channels, V, U),
                    sum_capacity=cap, restarts_run=config.ia_restarts, best_restart=r,
                    restart_capacities=capacities, trace=trace)


def write_leakage_trace(result, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["restart", "sweep", "total_leakage", "sum_capacity"])
        for r, s, leak, cap in result.trace:
            writer.writerow([r, s, repr(leak), repr(cap)])
