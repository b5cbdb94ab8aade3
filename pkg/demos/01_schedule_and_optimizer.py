# Annealed learning-rate schedule and AdamW on a toy quadratic.
#
# The schedule starts at eta0 and decays polynomially as training progress p
# runs from 0 to 1; AdamW applies decoupled weight decay directly to the
# weights.  Run: python demos/01_schedule_and_optimizer.py

import numpy as np

from dialectshot import AdamW, lr_at

print("annealed schedule, eta0 = 0.001")
for p in (0.0, 0.1, 0.25, 0.5, 0.75, 1.0):
    print(f"  p={p:4.2f}  lr={lr_at(p, 0.001):.6f}")

# Minimize f(w) = ||w - target||^2 with the schedule driving the step size.
rng = np.random.default_rng(0)
target = rng.normal(size=5)
params = {"w": np.zeros(5, dtype=np.float64)}
opt = AdamW(weight_decay=0.0)

steps = 400
print("\nAdamW on a quadratic bowl")
for step in range(steps):
    grad = 2.0 * (params["w"] - target)
    opt.step(params, {"w": grad}, lr=lr_at(step / steps, 0.05))
    if step % 100 == 0 or step == steps - 1:
        err = np.linalg.norm(params["w"] - target)
        print(f"  step {step:3d}  distance to optimum {err:.5f}")
