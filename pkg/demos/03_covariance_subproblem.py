"""
One base station's covariance subproblem
========================================

Holding the filters and the other cell's beams fixed, a BS maximises a
concave log-det objective minus a linear leakage penalty over PSD
covariances with a shared trace budget. The solution is then cut back to
rank ``Nr`` beamformers.
"""

import numpy as np

from mimo_wsrm import SystemConfig, generate_channels, random_feasible_beamformers
from mimo_wsrm.rate_engine import mmse_filters
from mimo_wsrm.subproblem import (build_subproblem, initial_covariances, objective,
                                  project_euclidean, project_feasible, recover_beamformers, solve)

cfg = SystemConfig(num_subcarriers=4, rng_seed=3)
channels = generate_channels(cfg)
beams = random_feasible_beamformers(cfg)
data = build_subproblem(channels, beams, mmse_filters(channels, beams), cfg, m=0)

init = initial_covariances(beams[0], data.budget)
trace = []
W = solve(data, init, trace=trace)
print(f"objective {trace[0][1]:.4f} -> {trace[-1][1]:.4f} in {len(trace) - 1} accepted steps")
print("trace used:", np.trace(W, axis1=1, axis2=2).real.sum(), "of", data.budget)

# the two projections agree on feasible points but not elsewhere
X = W + 5 * np.eye(4)
print("clip-and-scale projection objective:", objective(data, project_feasible(X, data.budget)))
print("Euclidean projection objective:     ", objective(data, project_euclidean(X, data.budget)))

# rank-Nr recovery keeps the two dominant eigen-directions
V = recover_beamformers(W, cfg.rx_antennas)
for n in range(cfg.num_subcarriers):
    sigma = np.linalg.eigvalsh(W[n])[::-1]
    print(f"sc {n}: eigenvalues {np.round(sigma, 3)}  residual {np.linalg.norm(W[n] - V[n] @ V[n].conj().T):.2e}")
