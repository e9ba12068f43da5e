"""NumPy implementation of the midpoint propagator, used when the extension is absent.

Steps are exponentiated in vectorised batches and multiplied together with a
pairwise tree reduction; the arithmetic is the same as the compiled loop.
"""
from __future__ import annotations

import numpy as np

CHUNK = 1 << 14


def _tree_product(us: np.ndarray) -> np.ndarray:
    """Time-ordered product ``us[-1] @ ... @ us[0]``."""
    eye = np.eye(us.shape[1], dtype=complex)[None]
    while len(us) > 1:
        if len(us) % 2:
            us = np.concatenate([us, eye])
        us = us[1::2] @ us[0::2]
    return us[0]


def propagate(h_static, couplings, amps, omegas, phases, t_start, dt, n_steps):
    h_static = np.asarray(h_static, dtype=complex)
    couplings = np.asarray(couplings, dtype=complex).reshape(-1, *h_static.shape)
    amps = np.asarray(amps, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    phases = np.asarray(phases, dtype=float)
    d = h_static.shape[0]
    u = np.eye(d, dtype=complex)
    if d == 0 or n_steps <= 0:
        return u
    for start in range(0, n_steps, CHUNK):
        steps = np.arange(start, min(n_steps, start + CHUNK))
        tm = t_start + (steps + 0.5) * dt
        coef = amps[None, :] * np.sin(np.outer(tm, omegas) + phases[None, :])
        h = h_static[None] + np.einsum("nb,bij->nij", coef, couplings)
        w, v = np.linalg.eigh(h)
        us = np.einsum("nik,nk,njk->nij", v, np.exp(-1j * w * dt), v.conj())
        u = _tree_product(us) @ u
    return u
