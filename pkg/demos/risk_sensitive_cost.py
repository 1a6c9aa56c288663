"""
Risk-sensitive state cost in one dimension
==========================================

The risk-sensitive cost scores a Gaussian state belief rather than a single
point. Its sign parameter gamma sets the attitude towards uncertainty:
positive values discount a wide belief, negative values penalise it, and
gamma -> 0 recovers the expected quadratic cost.

Here the closed form is checked against a plain Monte-Carlo estimate of the
exponential-of-quadratic expectation, then swept over gamma.
"""

import numpy as np

from umppi.costs import CostParams, mc_rs_oracle, risk_sensitive_cost

# a scalar state with weight Q = 2 and the goal at the origin
def params(gamma):
    return CostParams(Q=[2.0], R=[1.0], gamma=gamma, goal=[0.0], heading_index=None)

# closed form vs sampling at a handful of (gamma, variance, error) cells
print(f"{'gamma':>6} {'Sigma':>6} {'err':>4} {'closed':>10} {'monte-carlo':>12}")
for gamma in (-0.5, 1.0, 2.0):
    for sigma, err in ((0.1, 1.0), (0.5, 2.0)):
        closed = risk_sensitive_cost([err], [[sigma]], params(gamma))
        mc = mc_rs_oracle([err], [[sigma]], params(gamma), 10**6, seed=0)
        print(f"{gamma:6.1f} {sigma:6.2f} {err:4.1f} {closed:10.4f} {mc:12.4f}")

# the hand-checkable cell: gamma = 1, Sigma = 0.5, error 1 gives ln 2 + 1
print("\nhand value:", risk_sensitive_cost([1.0], [[0.5]], params(1.0)), "vs", np.log(2.0) + 1.0)

# sweeping gamma through zero is continuous; the limit is Q*Sigma + Q*err^2.
# gamma = -1 sits where 1/Q + gamma*Sigma = 0 and the expectation diverges:
# the cost saturates at the eigenvalue floor instead of going to infinity.
sigma, err = 0.5, 1.0
for gamma in (-1.0, -0.1, -1e-8, 0.0, 1e-8, 0.1, 1.0, 4.0):
    print(f"gamma={gamma:+.0e}  q_rs={risk_sensitive_cost([err], [[sigma]], params(gamma)):.6f}")
print("expected-cost limit:", 2.0 * sigma + 2.0 * err**2)
