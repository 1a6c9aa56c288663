"""
Propagating a state belief with sigma points
============================================

U-MPPI replaces each sampled trajectory by a small Gaussian belief carried
through the unicycle model with the unscented transform. This script pushes
one belief along a constant turn and prints how the covariance grows, then
checks that a purely linear map is reproduced exactly.
"""

import numpy as np

from umppi.unscented import UtParams, propagate_sigma, reconstruct_moments, sigma_points, unscented_transform, ut_weights

ut = UtParams()  # alpha = 1, k = 0.5, beta = 2 -> 7 points in 3-D
w = ut_weights(ut)
print("mean weights", np.round(w.w_mean, 4))
print("cov weights ", np.round(w.w_cov, 4))

mean = np.zeros(3)
cov = 1e-3 * np.eye(3)
dt = 1.0 / 30.0
control = (1.5, 0.8)  # forward speed and yaw rate

# sixty steps (two seconds); re-sample the points from the moments each step
for k in range(61):
    if k % 15 == 0:
        sd = np.sqrt(np.diag(cov))
        print(f"t={k * dt:4.2f}s mean=({mean[0]:+.3f}, {mean[1]:+.3f}, {mean[2]:+.3f}) sd=({sd[0]:.4f}, {sd[1]:.4f}, {sd[2]:.4f})")
    pts = sigma_points(mean, cov, ut).points
    mean, cov = reconstruct_moments(propagate_sigma(pts, control, dt), w)

# heading uncertainty feeds into lateral position: the xy block picks up correlation
print("final position correlation:", cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1]))

# an affine map is carried through without error
rng = np.random.default_rng(0)
A, b = rng.normal(size=(3, 3)), rng.normal(size=3)
m, c = unscented_transform(lambda x: x @ A.T + b, mean, cov, ut)
print("affine check:", np.abs(m - (A @ mean + b)).max(), np.abs(c - A @ cov @ A.T).max())
