"""Two-phase distributed weighted sum-rate maximisation.

After initialisation (IA phase or random beams) every outer iteration

1. refits all receive filters with the MMSE rule ``U = X^{-1} H V``,
2. lets every base station solve its own covariance subproblem against the
   same start-of-iteration snapshot (Jacobi update) and recover rank-``Nr``
   beamformers,
3. records the true weighted sum-rate of the new beams.

Base stations are modelled as :class:`CellAgent` objects. The only channel
between agents is :meth:`CellAgent.send`, which counts messages, so a run
can certify that no information was exchanged during the iterations.
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .channel_model import random_feasible_beamformers
from .exceptions import DegenerateFilterError, SolverError
from .ia_phase import run_ia_phase
from .rate_engine import mmse_filters, weighted_sum_rate
from .subproblem import (SolverOptions, build_subproblem, initial_covariances,
                         recover_beamformers, solve)

__all__ = [
    "INIT_MODES",
    "TrajectoryPoint",
    "RunState",
    "MessageCounter",
    "CellAgent",
    "initial_state",
    "wsrm_iteration",
    "run",
    "write_trajectory",
]

log = logging.getLogger(__name__)

INIT_MODES = ("ia", "random")


@dataclass
class TrajectoryPoint:
    iteration: int
    cell_wsr: np.ndarray
    wsr: float


@dataclass
class MessageCounter:
    """Counts inter-agent messages; ``total`` stays 0 for a fully local run."""

    total: int = 0
    log: List[tuple] = field(default_factory=list)

    def record(self, src, dst, payload):
        self.total += 1
        self.log.append((src, dst, payload))


class CellAgent:
    """Local optimiser of one base station.

    An agent reads the read-only snapshot handed to it and writes only its
    own covariances. Messages to other agents go through :meth:`send`.
    """

    def __init__(self, cell, counter):
        self.cell = cell
        self.counter = counter
        self.covs = None

    def send(self, dst, payload):
        self.counter.record(self.cell, dst.cell, payload)

    def optimize(self, channels, beams, filters, config, opts, trace=None):
        data = build_subproblem(channels, beams, filters, config, self.cell)
        init = initial_covariances(beams[self.cell], data.budget)
        self.covs = solve(data, init, opts, trace=trace)
        return recover_beamformers(self.covs, config.rx_antennas)


@dataclass
class RunState:
    """Progress of one run. ``trajectory`` excludes the initial point."""

    beams: np.ndarray
    filters: np.ndarray
    covs: list
    init_mode: str
    initial: TrajectoryPoint
    trajectory: List[TrajectoryPoint] = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0
    messages: MessageCounter = field(default_factory=MessageCounter)
    agents: list = field(default_factory=list)
    events: List[str] = field(default_factory=list)
    # (cell, outer_iter, inner_iter, objective, step)
    solver_trace: List[tuple] = field(default_factory=list)
    ia_result: object = None

    @property
    def wsr(self):
        return self.trajectory[-1].wsr if self.trajectory else self.initial.wsr


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def initial_state(channels, config, init_mode="ia", beams=None):
    """Initial beams from the IA phase or random feasible draws.

    ``beams`` overrides both (useful for warm starts and tests).
    """
    if init_mode not in INIT_MODES:
        raise ValueError(f"init_mode must be one of {INIT_MODES}, got {init_mode!r}")
    ia_result = None
    if beams is None:
        if init_mode == "ia":
            ia_result = run_ia_phase(channels, config)
            beams = ia_result.beams
        else:
            beams = random_feasible_beamformers(config)
    report = weighted_sum_rate(channels, beams, config)
    counter = MessageCounter()
    agents = [CellAgent(m, counter) for m in range(config.num_cells)]
    return RunState(
        beams=np.asarray(beams),
        filters=mmse_filters(channels, beams),
        covs=[None] * config.num_cells,
        init_mode=init_mode,
        initial=TrajectoryPoint(0, report.cell_wsr, report.wsr),
        messages=counter,
        agents=agents,
        ia_result=ia_result,
    )


def wsrm_iteration(state, channels, config, opts=None):
    """One filter update plus one Jacobi round of per-cell solves.

    A cell whose subproblem fails keeps its previous beams; the failure is
    logged in ``state.events``. The state is updated in place and returned.
    """
    opts = opts or SolverOptions()
    it = state.iterations_used + 1
    beams = _readonly(state.beams)
    filters = _readonly(mmse_filters(channels, beams))
    new_beams = np.array(beams, copy=True)
    for agent in state.agents:
        m = agent.cell
        trace = []
        try:
            new_beams[m] = agent.optimize(channels, beams, filters, config, opts, trace)
        except (DegenerateFilterError, SolverError) as exc:
            msg = f"iteration {it}: cell {m} kept previous beams ({exc})"
            log.warning(msg)
            state.events.append(msg)
        state.solver_trace.extend((m, it, inner, obj, step) for inner, obj, step in trace)
        state.covs[m] = agent.covs
    report = weighted_sum_rate(channels, new_beams, config)
    state.beams = new_beams
    state.filters = filters
    state.trajectory.append(TrajectoryPoint(it, report.cell_wsr, report.wsr))
    state.iterations_used = it
    return state


def run(channels, config, init_mode="ia", opts=None, beams=None):
    """Iterate until successive weighted sum-rates differ by at most
    ``config.convergence_tol`` or ``config.wsrm_max_iters`` iterations ran."""
    state = initial_state(channels, config, init_mode, beams)
    for _ in range(config.wsrm_max_iters):
        wsrm_iteration(state, channels, config, opts)
        traj = state.trajectory
        if len(traj) >= 2 and abs(traj[-1].wsr - traj[-2].wsr) <= config.convergence_tol:
            state.converged = True
            break
    return state


TRAJECTORY_HEADER = ["iteration", "cell", "wsr_cell", "wsr_global", "delta"]


def trajectory_rows(state):
    """Rows ``iteration,cell,wsr_cell,wsr_global,delta`` starting at the initial point.

    ``delta`` is the change of that cell's weighted rate since the previous
    iteration and is empty for iteration 0.
    """
    points = [state.initial] + state.trajectory
    rows = []
    for i, p in enumerate(points):
        for m, value in enumerate(p.cell_wsr):
            delta = "" if i == 0 else repr(float(value - points[i - 1].cell_wsr[m]))
            rows.append([p.iteration, m, repr(float(value)), repr(float(p.wsr)), delta])
    return rows


def write_trajectory(state, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        writer.writerows(trajectory_rows(state))
