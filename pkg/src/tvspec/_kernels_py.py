"""Pure numpy implementations of the hot kernels.

Reference semantics for the compiled extension in ``_kernels.pyx``; the
two backends agree to rounding and are interchangeable (selected in
``kernels.py``).
"""

from __future__ import annotations

import numpy as np

RENORM_HI = 1e100
RENORM_LO = 1e-100


def qr_logdiag_scan(steps: np.ndarray, q0: np.ndarray | None = None) -> np.ndarray:
    """Sequential orthogonal triangular reduction of a factor sequence.

    Propagates Q_k from Q_0 through Z = steps[k] @ Q_{k-1} = Q_k R_k
    (R with positive diagonal) and returns the (K, d) array of
    log diag(R_k).  The product steps[K-1] ... steps[0] @ Q_0 then equals
    Q_K (R_K ... R_1), so window sums of the rows are the log diagonals
    of triangular window transitions, overflow-free.

    Q_0 defaults to the identity, which keeps the scan exact for
    upper-triangular factors.  Pass an orthogonal ``q0`` to start the
    scan pre-aligned (e.g. with the singular flag of an initial window
    product), which removes the alignment transient on dense sequences.
    """
    steps = np.asarray(steps, dtype=np.float64)
    k_steps, d, d2 = steps.shape
    if d != d2:
        raise ValueError("square factors required")
    out = np.empty((k_steps, d))
    q = np.eye(d) if q0 is None else np.array(q0, dtype=np.float64)
    if q.shape != (d, d):
        raise ValueError("q0 must match the factor dimension")
    for k in range(k_steps):
        z = steps[k] @ q
        q, r = np.linalg.qr(z)
        rd = np.einsum("ii->i", r)
        signs = np.where(rd < 0.0, -1.0, 1.0)
        q = q * signs
        with np.errstate(divide="ignore"):
            out[k] = np.log(np.abs(rd))
    return out


def renorm_product(factors: np.ndarray) -> tuple[np.ndarray, float]:
    """Scaled product of a factor sequence in application order.

    ``factors[0]`` is applied first, so the result represents
    factors[K-1] @ ... @ factors[0] = mat * exp(logscale) with mat kept
    inside the representable range by adaptive rescaling.
    """
    factors = np.asarray(factors, dtype=np.float64)
    if factors.ndim != 3:
        raise ValueError("expected a (K, d, d) stack")
    d = factors.shape[1]
    acc = np.eye(d)
    logscale = 0.0
    for k in range(factors.shape[0]):
        acc = factors[k] @ acc
        peak = np.max(np.abs(acc))
        if peak > RENORM_HI or (0.0 < peak < RENORM_LO):
            acc = acc / peak
            logscale += np.log(peak)
    return acc, logscale
