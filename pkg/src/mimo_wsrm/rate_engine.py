"""Link rates, MMSE receive filters and interference statistics.

All rates are in bits per channel use (base-2 logarithms). The noise at every
receive antenna is unit-variance, so the interference-plus-noise covariance at
user ``f(m, n)`` is

    X = I + sum_{j != m} H_j V_j V_j^H H_j^H

and the SINR matrix of that link is ``gamma = V^H H^H X^{-1} H V``.
"""

import csv
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .exceptions import DegenerateFilterError
from .linalg import LN2, herm, hermitize, log2det

__all__ = [
    "RateReport",
    "interference_covariance",
    "interference_covariances",
    "sinr_matrix",
    "rate",
    "mmse_filter",
    "mmse_filters",
    "filtered_rate",
    "high_sinr_rate",
    "aggregate_leakage_plus_noise",
    "trace_rate_approx",
    "link_rates",
    "weighted_sum_rate",
    "write_rate_report",
]


def _received(channels, beams):
    """Received signal matrices ``T[j, m, n] = G[j, m, n] V[j, n]``, shape (M, M, N, Nr, Nr)."""
    return channels.links @ beams[:, None]


def interference_covariance(channels, beams, m, n):
    """Interference-plus-noise covariance X at the user served on subcarrier ``n`` of cell ``m``."""
    G = channels.links
    X = np.eye(G.shape[-2], dtype=complex)
    for j in range(G.shape[0]):
        if j == m:
            continue
        T = G[j, m, n] @ beams[j, n]
        X = X + T @ herm(T)
    return hermitize(X)


def interference_covariances(channels, beams):
    """Batched X for every (cell, subcarrier), shape ``(M, N, Nr, Nr)``."""
    T = _received(channels, beams)
    Q = T @ herm(T)
    M = Q.shape[0]
    own = Q[np.arange(M), np.arange(M)]
    X = Q.sum(axis=0) - own + np.eye(Q.shape[-1])
    return hermitize(X)


def sinr_matrix(channels, beams, m, n):
    """SINR matrix ``V^H H^H X^{-1} H V`` of one link (Hermitian PSD, Nr x Nr)."""
    X = interference_covariance(channels, beams, m, n)
    T = channels.link(m, m, n) @ beams[m, n]
    try:
        return hermitize(herm(T) @ np.linalg.solve(X, T))
    except np.linalg.LinAlgError as exc:
        raise DegenerateFilterError("interference covariance is singular") from exc


def rate(gamma):
    """Link rate ``log2 det(I + gamma)`` for a Hermitian PSD SINR matrix."""
    gamma = np.asarray(gamma)
    scale = max(1.0, float(np.max(np.abs(gamma), initial=0.0)))
    if not np.allclose(gamma, herm(gamma), rtol=0, atol=1e-9 * scale):
        raise ValueError("SINR matrix must be Hermitian")
    value = float(log2det(np.eye(gamma.shape[-1]) + hermitize(gamma)))
    return max(value, 0.0)


def mmse_filter(channels, beams, m, n):
    """Capacity-preserving receive filter ``U = X^{-1} H V``."""
    X = interference_covariance(channels, beams, m, n)
    return np.linalg.solve(X, channels.link(m, m, n) @ beams[m, n])


def mmse_filters(channels, beams):
    """Batched MMSE filters for every (cell, subcarrier), shape ``(M, N, Nr, Nr)``."""
    X = interference_covariances(channels, beams)
    M = beams.shape[0]
    own = _received(channels, beams)[np.arange(M), np.arange(M)]
    return np.linalg.solve(X, own)


def _filtered_terms(channels, beams, filters, m, n):
    U = filters[m, n]
    X = interference_covariance(channels, beams, m, n)
    T = channels.link(m, m, n) @ beams[m, n]
    S = hermitize(herm(U) @ X @ U)
    signal = hermitize(herm(U) @ T @ herm(T) @ U)
    return S, signal


def _check_pd(a, what):
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFilterError(f"{what} is not positive definite") from exc


def filtered_rate(channels, beams, filters, m, n):
    """Rate after the linear filter U:

    ``log2 det(I + (U^H X U)^{-1} U^H H V V^H H^H U)``.

    Raises :class:`DegenerateFilterError` when ``U^H X U`` is singular.
    """
    S, signal = _filtered_terms(channels, beams, filters, m, n)
    _check_pd(S, "U^H X U")
    # det(I + S^-1 T) = det(S + T) / det(S), both Hermitian PD
    return max(float(log2det(S + signal) - log2det(S)), 0.0)


def high_sinr_rate(channels, beams, filters, m, n, rcond=1e-12):
    """High-SINR rate ``log2 det(U^H H V V^H H^H U) - log2 det(U^H X U)``.

    A (numerically) singular signal term would give minus infinity; it is
    reported as :class:`DegenerateFilterError` instead.
    """
    S, signal = _filtered_terms(channels, beams, filters, m, n)
    eig = np.linalg.eigvalsh(signal)
    if eig[-1] <= 0 or eig[0] <= rcond * eig[-1]:
        raise DegenerateFilterError("signal term is singular; high-SINR rate is -inf")
    _check_pd(S, "U^H X U")
    return float(log2det(signal) - log2det(S))


def aggregate_leakage_plus_noise(channels, beams, filters, victim, n, excluded):
    """Leakage-plus-noise seen through the victim's filter, ignoring cell ``excluded``.

    ``N = sum_{i not in {excluded, victim}} U^H H_i V_i V_i^H H_i^H U + U^H U``
    with ``U`` the filter of the user served on subcarrier ``n`` of ``victim``.
    """
    U = filters[victim, n]
    G = channels.links
    N_leak = herm(U) @ U
    for i in range(G.shape[0]):
        if i in (excluded, victim):
            continue
        T = herm(U) @ G[i, victim, n] @ beams[i, n]
        N_leak = N_leak + T @ herm(T)
    N_leak = hermitize(N_leak)
    _check_pd(N_leak, "aggregate leakage-plus-noise")
    return N_leak


def trace_rate_approx(a):
    """First-order approximation ``trace(A) / ln 2`` of ``log2 det(I + A)``.

    Accurate when the spectral radius of the PSD matrix ``A`` is small; the
    error is bounded by ``rho**2 * dim / (2 ln 2)``.
    """
    return float(np.real(np.trace(a))) / LN2


def link_rates(channels, beams):
    """Rates of every active link, shape ``(M, N)``."""
    X = interference_covariances(channels, beams)
    M = beams.shape[0]
    T = _received(channels, beams)[np.arange(M), np.arange(M)]
    gamma = hermitize(herm(T) @ np.linalg.solve(X, T))
    sign, logdet = np.linalg.slogdet(np.eye(gamma.shape[-1]) + gamma)
    return np.maximum(logdet / LN2, 0.0)


@dataclass
class RateReport:
    """Rates of one beamformer configuration.

    ``link_rates[m, n]`` is R of the user served on subcarrier ``n`` of cell
    ``m``; ``capacities[m, k]`` sums a user's subcarriers and ``cell_wsr[m]``
    is ``sum_k w_mk C_mk``.
    """

    link_rates: np.ndarray
    capacities: np.ndarray
    cell_wsr: np.ndarray
    wsr: float
    user_of: np.ndarray
    trajectory: List[float] = field(default_factory=list)

    @property
    def sum_rate(self):
        return float(np.sum(self.capacities))


def weighted_sum_rate(channels, beams, config, assignment=None):
    """Evaluate the weighted sum-rate ``sum_m sum_k w_mk C_mk`` of a beam set."""
    if assignment is None:
        assignment = channels.assignment
    R = link_rates(channels, beams)
    M, K = config.num_cells, config.users_per_cell
    C = np.zeros((M, K))
    for m in range(M):
        C[m] = np.bincount(assignment.user_of[m], weights=R[m], minlength=K)
    cell = np.sum(config.weights * C, axis=1)
    return RateReport(link_rates=R, capacities=C, cell_wsr=cell, wsr=float(cell.sum()),
                      user_of=np.asarray(assignment.user_of))


def write_rate_report(report, path):
    """CSV with one ``m,k,n,R_bits`` row per link, then per-cell and total summaries.

    Summary rows put ``all`` in the ``k`` and ``n`` columns; their value is the
    weighted rate of the cell, and the final ``wsr`` row holds the total.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["m", "k", "n", "R_bits"])
        M, N = report.link_rates.shape
        for m in range(M):
            for n in range(N):
                writer.writerow([m, int(report.user_of[m, n]), n, repr(float(report.link_rates[m, n]))])
        for m in range(M):
            writer.writerow([m, "all", "all", repr(float(report.cell_wsr[m]))])
        writer.writerow(["wsr", "all", "all", repr(float(report.wsr))])
