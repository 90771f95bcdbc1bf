"""System configuration, subcarrier assignment and random channel/beam generation.

Array conventions used across the package (all indices 0-based):

* channels ``H``: ``(M_tx, M_rx, K, N, Nr, Nt)``; ``H[j, m, k, n]`` is the
  channel from base station ``j`` to user ``k`` of cell ``m`` on subcarrier ``n``.
* beamformers ``V``: ``(M, N, Nt, Nr)``; ``V[m, n]`` serves user ``f(m, n)``.
* receive filters ``U``: ``(M, N, Nr, Nr)``.
* covariances ``W``: ``(N, Nt, Nt)`` for a single cell.
"""

import csv
import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import ConfigError

__all__ = [
    "DEFAULT_USER_WEIGHTS",
    "SystemConfig",
    "Assignment",
    "ChannelSet",
    "dbw_to_linear",
    "round_robin_assignment",
    "generate_channels",
    "random_feasible_beamformers",
    "cell_powers",
    "write_channels",
    "read_channels",
]

DEFAULT_USER_WEIGHTS = (0.25, 0.54, 0.67, 0.79)

# substream purposes for the hierarchical RNG split
CHANNEL_STREAM = 0
BEAM_STREAM = 1
IA_STREAM = 2


def dbw_to_linear(dbw):
    """Convert a power in dBW to watts, ``10 ** (dBW / 10)``."""
    return 10.0 ** (np.asarray(dbw, dtype=float) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, budgets, weights and iteration caps of one experiment.

    The defaults describe the two-cell, two-user setup with 4 transmit and 2
    receive antennas, 64 subcarriers and a 20 dBW budget per base station.

    ``user_weights`` is a flat cell-major sequence of length ``M * K``
    (``w[m * K + k]``) or ``None`` for unit weights. ``power_budget_dbw`` is
    either one value shared by all cells or one value per cell.
    """

    num_cells: int = 2
    users_per_cell: int = 2
    tx_antennas: int = 4
    rx_antennas: int = 2
    num_subcarriers: int = 64
    power_budget_dbw: Union[float, Sequence[float]] = 20.0
    user_weights: Optional[Sequence[float]] = DEFAULT_USER_WEIGHTS
    convergence_tol: float = 0.01
    ia_iters: int = 10
    ia_restarts: int = 100
    wsrm_max_iters: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("num_cells", "users_per_cell", "tx_antennas", "rx_antennas",
                     "num_subcarriers", "ia_iters", "ia_restarts", "wsrm_max_iters"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.rx_antennas < 2:
            raise ConfigError("rx_antennas must be at least 2")
        if self.tx_antennas < self.rx_antennas:
            raise ConfigError("tx_antennas must be >= rx_antennas for rank-Nr recovery")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigError("rng_seed must be a 64-bit unsigned integer")
        if not self.convergence_tol > 0:
            raise ConfigError("convergence_tol must be positive")

        dbw = np.atleast_1d(np.asarray(self.power_budget_dbw, dtype=float))
        if dbw.ndim != 1 or dbw.size not in (1, self.num_cells):
            raise ConfigError("power_budget_dbw must be a scalar or one value per cell")
        if not np.all(np.isfinite(dbw)):
            raise ConfigError("power_budget_dbw must be finite")
        # normalise containers so the dataclass stays hashable and comparable
        if dbw.size > 1 or not np.isscalar(self.power_budget_dbw):
            object.__setattr__(self, "power_budget_dbw", tuple(float(x) for x in dbw))
        else:
            object.__setattr__(self, "power_budget_dbw", float(dbw[0]))

        if self.user_weights is not None:
            w = np.asarray(self.user_weights, dtype=float).ravel()
            if w.size != self.num_cells * self.users_per_cell:
                raise ConfigError(
                    f"expected {self.num_cells * self.users_per_cell} user weights, got {w.size}")
            if not np.all(w > 0) or not np.all(np.isfinite(w)):
                raise ConfigError("user weights must be positive and finite")
            object.__setattr__(self, "user_weights", tuple(float(x) for x in w))

    @property
    def power_linear(self):
        """Per-cell power budget in watts, shape ``(M,)``."""
        return np.broadcast_to(dbw_to_linear(self.power_budget_dbw), (self.num_cells,)).copy()

    @property
    def weights(self):
        """User weights as an ``(M, K)`` array."""
        if self.user_weights is None:
            return np.ones((self.num_cells, self.users_per_cell))
        return np.asarray(self.user_weights, dtype=float).reshape(self.num_cells, self.users_per_cell)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        for key in ("power_budget_dbw", "user_weights"):
            if isinstance(d[key], tuple):
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Assignment:
    """Subcarrier-to-user map ``user_of[m, n] = f(m, n)`` (0-based)."""

    user_of: np.ndarray
    users_per_cell: int

    def subcarriers(self, m, k):
        """Sorted subcarriers of user ``k`` in cell ``m`` (the set S_km)."""
        return np.flatnonzero(self.user_of[m] == k)

    @property
    def sets(self):
        return [[self.subcarriers(m, k) for k in range(self.users_per_cell)]
                for m in range(self.user_of.shape[0])]


def round_robin_assignment(config):
    """Assign subcarrier ``n`` of every cell to user ``n mod K``.

    With 1-based indices this is f(m, n) = ((n - 1) mod K) + 1.
    """
    K, N = config.users_per_cell, config.num_subcarriers
    if K > N:
        raise ConfigError(f"cannot give {K} users disjoint subcarriers out of {N}")
    row = np.arange(N) % K
    user_of = np.tile(row, (config.num_cells, 1))
    user_of.setflags(write=False)
    return Assignment(user_of=user_of, users_per_cell=K)


@dataclass(frozen=True)
class ChannelSet:
    """All channel matrices plus the assignment that selects the active links."""

    H: np.ndarray
    assignment: Assignment = field(repr=False)

    @cached_property
    def links(self):
        """Active-link channels ``G[j, m, n] = H[j, m, f(m, n), n]``, shape ``(M, M, N, Nr, Nt)``."""
        M, _, _, N = self.H.shape[:4]
        users = self.assignment.user_of
        n_idx = np.arange(N)
        G = np.stack([self.H[:, m, users[m], n_idx] for m in range(M)], axis=1)
        G.setflags(write=False)
        return G

    def link(self, m_tx, m_rx, n):
        """Channel from BS ``m_tx`` to the user served on subcarrier ``n`` of cell ``m_rx``."""
        return self.links[m_tx, m_rx, n]

    @property
    def num_cells(self):
        return self.H.shape[0]

    @property
    def num_subcarriers(self):
        return self.H.shape[3]


def _rng(seed, purpose, *index):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(purpose, *index)))


def _complex_normal(rng, shape):
    # CN(0, 1): real and imaginary parts each N(0, 1/2)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def generate_channels(config, assignment=None):
    """Draw i.i.d. CN(0, 1) channel matrices for every (BS, user, subcarrier).

    Each (receiving cell, subcarrier) pair has its own RNG substream derived
    from ``config.rng_seed``, so the result does not depend on draw order.
    """
    if assignment is None:
        assignment = round_robin_assignment(config)
    M, K, N = config.num_cells, config.users_per_cell, config.num_subcarriers
    Nr, Nt = config.rx_antennas, config.tx_antennas
    H = np.empty((M, M, K, N, Nr, Nt), dtype=complex)
    for m in range(M):
        for n in range(N):
            H[:, m, :, n] = _complex_normal(_rng(config.rng_seed, CHANNEL_STREAM, m, n), (M, K, Nr, Nt))
    H.setflags(write=False)
    return ChannelSet(H=H, assignment=assignment)


def cell_powers(beams):
    """Transmit power of every cell, ``sum_n trace(V V^H)``, shape ``(M,)``."""
    return np.sum(np.abs(beams) ** 2, axis=(1, 2, 3))


def random_feasible_beamformers(config, realization=0, purpose=BEAM_STREAM):
    """Complex Gaussian beamformers scaled so each cell uses its full budget.

    Parameters
    ----------
    config : SystemConfig
    realization : int
        Index of the independent draw; restarts of the IA phase use distinct
        realizations.
    purpose : int
        RNG substream family, kept separate from channel generation.

    Returns
    -------
    V : ndarray, shape (M, N, Nt, Nr)
        ``sum_n trace(V[m, n] V[m, n]^H) == P_m`` for every cell.
    """
    M, N = config.num_cells, config.num_subcarriers
    Nt, Nr = config.tx_antennas, config.rx_antennas
    V = np.empty((M, N, Nt, Nr), dtype=complex)
    for m in range(M):
        for n in range(N):
            V[m, n] = _complex_normal(_rng(config.rng_seed, purpose, realization, m, n), (Nt, Nr))
    scale = np.sqrt(config.power_linear / cell_powers(V))
    return V * scale[:, None, None, None]


CHANNEL_CSV_HEADER = ("m_tx", "m_rx", "k", "n", "row", "col", "re", "im")


def write_channels(channels, path):
    """Dump every channel entry as ``m_tx,m_rx,k,n,row,col,re,im``.

    Floats use ``repr`` so reading the file back is exact.
    """
    H = channels.H
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CHANNEL_CSV_HEADER)
        for idx in np.ndindex(H.shape):
            z = H[idx]
            writer.writerow([*idx, repr(float(z.real)), repr(float(z.imag))])


def read_channels(path, assignment=None):
    """Inverse of :func:`write_channels`.

    The array shape is inferred from the largest indices in the file. Without
    an explicit ``assignment`` the round-robin map is rebuilt.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CHANNEL_CSV_HEADER:
            raise ValueError(f"unexpected channel file header {header}")
        rows = [row for row in reader if row]
    idx = np.array([[int(x) for x in row[:6]] for row in rows])
    shape = tuple(idx.max(axis=0) + 1)
    H = np.zeros(shape, dtype=complex)
    values = np.array([float(row[6]) + 1j * float(row[7]) for row in rows])
    H[tuple(idx.T)] = values
    H.setflags(write=False)
    if assignment is None:
        M, _, K, N = shape[:4]
        user_of = np.tile(np.arange(N) % K, (M, 1))
        assignment = Assignment(user_of=user_of, users_per_cell=K)
    return ChannelSet(H=H, assignment=assignment)
