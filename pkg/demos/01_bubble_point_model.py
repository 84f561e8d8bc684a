"""Tour of the binary bubble-point model.

Evaluates saturation pressures, activity coefficients, and the implicit
equilibrium solve for the propanol / propyl-acetate system, then checks the
parameter sensitivities against finite differences.
"""

import numpy as np

from seqoed import boiling_temperature, nrtl_gamma
from seqoed.casestudy import THETA_TOT, case_study_model

model = case_study_model()
theta = THETA_TOT

print("pure-component boiling points at 1 bar:")
for comp in (model.component1, model.component2):
    print(f"  {comp.name}: {boiling_temperature(1e5, comp):.2f} K")

print("\nactivity coefficients across the composition range at 380 K:")
for l in (0.0, 0.25, 0.5, 0.75, 1.0):
    g1, g2 = nrtl_gamma(l, 380.0, theta)
    print(f"  l={l:4.2f}: gamma1={g1:.4f} gamma2={g2:.4f}")

print("\nbubble points along the 2 bar isobar:")
for l in np.linspace(0.1, 0.9, 5):
    out = model.bubble_point((l, 2e5), theta)
    print(f"  l={l:4.2f}: v={out.v:.4f} T={out.T:.2f} K")

x = (0.5, 2e5)
J = model.bubble_point_jacobian(x, theta)
print("\nparameter sensitivities at (l=0.5, P=2 bar):")
print("  dv/dtheta:", np.array2string(J[0], precision=3))
print("  dT/dtheta:", np.array2string(J[1], precision=3))

step = 1e-6 * np.array([1, 1, 100, 100, 0.01])
fd = np.empty_like(J)
theta_arr = theta.as_array()
for j in range(5):
    tp, tm = theta_arr.copy(), theta_arr.copy()
    tp[j] += step[j]
    tm[j] -= step[j]
    fd[:, j] = (model.predict(x, tp).as_array() - model.predict(x, tm).as_array()) / (2 * step[j])
print("  max relative difference to finite differences:",
      float(np.max(np.abs(J - fd) / (np.abs(fd) + 1e-12))))

print("\nat the composition bounds the outputs do not depend on the parameters:")
for l in (0.0, 1.0):
    J = model.bubble_point_jacobian((l, 2e5), theta)
    print(f"  l={l}: max |dy/dtheta| = {np.abs(J).max():.2e}")
