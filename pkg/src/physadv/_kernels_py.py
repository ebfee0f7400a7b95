"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``PHYSADV_PURE_PYTHON=1`` is set. Signatures match the extension exactly.
"""
import numpy as np


def rref(a, tol):
    """Row-reduce ``a`` with partial pivoting.

    Entries with magnitude below ``tol`` are treated as zero when choosing a
    pivot. Returns the reduced copy and the list of pivot columns.
    """
    r = np.array(a, dtype=np.float64, copy=True)
    nrows, ncols = r.shape
    pivots = []
    row = 0
    for col in range(ncols):
        if row >= nrows:
            break
        best = row + int(np.argmax(np.abs(r[row:, col])))
        if abs(r[best, col]) < tol:
            r[row:, col] = 0.0
            continue
        if best != row:
            r[[row, best]] = r[[best, row]]
        r[row] /= r[row, col]
        r[row, col] = 1.0
        for i in range(nrows):
            if i != row:
                f = r[i, col]
                if f != 0.0:
                    r[i] -= f * r[row]
                    r[i, col] = 0.0
        pivots.append(col)
        row += 1
    r[row:] = 0.0
    return r, pivots


def _softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def forward(weights, biases, x):
    a = x
    last = len(weights) - 1
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        a = _softmax(z) if k == last else np.maximum(z, 0.0)
    return a


def loss_input_gradient(weights, biases, x, target):
    """Softmax output and d/dx of mean((p - target)**2) for a single vector."""
    acts = [x]
    pre = []
    a = x
    last = len(weights) - 1
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        pre.append(z)
        a = _softmax(z) if k == last else np.maximum(z, 0.0)
        acts.append(a)
    p = acts[-1]
    dp = 2.0 * (p - target) / p.shape[0]
    dz = p * (dp - np.dot(dp, p))
    for k in range(last, -1, -1):
        da = weights[k] @ dz
        if k > 0:
            dz = da * (pre[k - 1] > 0.0)
    return p, da
