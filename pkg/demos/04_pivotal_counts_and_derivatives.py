"""
Pivotal counts as derivatives
=============================

The expected number of pivotal sites off (on) V_d should equal the slope of
the blocking probability in p (in q).  Compare the two on shared seeds.
"""

import numpy as np

from dreterrace.enhancement import russo_estimates
from dreterrace.environment import ModelSpec
from dreterrace.experiments import ExperimentGeometry, blocked_indicators

p, q, h, trials = 0.55, 0.5, 0.02, 20000
spec = ModelSpec("disturbed", 2, p, q)
est = russo_estimates(spec, N=6, M=2, trials=trials, seed=1)
print(f"E[pivotal off V_d] = {est.d_dp:.3f} +- {est.se_p:.3f}")
print(f"E[pivotal on V_d]  = {est.d_dq:.3f} +- {est.se_q:.3f}")

geom = ExperimentGeometry(2, 6, 2, trials=trials, seed=2)
ind = blocked_indicators(spec, geom, [p - h, p + h, p, p], [q, q, q - h, q + h]).astype(float)
print(f"slope in p: {np.mean(ind[:, 1] - ind[:, 0]) / (2 * h):.3f}")
print(f"slope in q: {np.mean(ind[:, 3] - ind[:, 2]) / (2 * h):.3f}")
