# Verifying a hand-written backward pass with central finite differences.
#
# Every operator in the package carries an explicit backward; this is the
# procedure the test suite uses to trust them, shown here on one GRU cell in
# float64.
#
# Run: python demos/04_gradient_checking.py

import numpy as np

from dialectshot.layers import gru_cell_backward, gru_cell_forward

rng = np.random.default_rng(0)
batch, d_in, hidden = 3, 4, 5
w_ih = rng.normal(size=(3 * hidden, d_in)) * 0.5
w_hh = rng.normal(size=(3 * hidden, hidden)) * 0.5
b_ih = rng.normal(size=3 * hidden) * 0.1
b_hh = rng.normal(size=3 * hidden) * 0.1
x = rng.normal(size=(batch, d_in))
h = rng.normal(size=(batch, hidden))
proj = rng.normal(size=(batch, hidden))  # fixed projection makes the loss scalar


def loss():
    h_new, _ = gru_cell_forward(x, h, w_ih, w_hh, b_ih, b_hh)
    return float((h_new * proj).sum())


_, cache = gru_cell_forward(x, h, w_ih, w_hh, b_ih, b_hh)
dx, dh, dw_ih, dw_hh, db_ih, db_hh = gru_cell_backward(proj, cache, w_ih, w_hh)

step = 1e-5
worst = 0.0
for arr, grad, name in ((x, dx, "x"), (h, dh, "h"), (w_ih, dw_ih, "w_ih"), (b_hh, db_hh, "b_hh")):
    for idx in np.ndindex(arr.shape):
        keep = arr[idx]
        arr[idx] = keep + step
        hi = loss()
        arr[idx] = keep - step
        lo = loss()
        arr[idx] = keep
        numeric = (hi - lo) / (2 * step)
        rel = abs(grad[idx] - numeric) / max(abs(grad[idx]), abs(numeric), 1e-4)
        worst = max(worst, rel)
    print(f"checked d/d{name:5s} worst relative error so far {worst:.3e}")

print("tolerance 1e-4:", "ok" if worst <= 1e-4 else "MISMATCH")
