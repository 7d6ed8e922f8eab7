"""Pure NumPy twins of the compiled state-vector kernels.

Same signatures and semantics as ``qsdcsim._kernels``; selected by
``qsdcsim.backend`` when the extension is unavailable or disabled.
The amplitude layout is the package-wide one: basis index encodes the
digit string base d with particle 0 as the most significant digit, so a
particle with ``stride = d ** (p - 1 - particle)`` owns contiguous blocks
of that stride.
"""
from __future__ import annotations

import numpy as np


def apply_single(amps: np.ndarray, mat: np.ndarray, stride: int) -> np.ndarray:
    """Apply a d x d matrix to the particle with the given stride."""
    d = mat.shape[0]
    blocks = amps.reshape(-1, d, stride)
    out = np.einsum("rc,bcs->brs", mat, blocks)
    return np.ascontiguousarray(out.reshape(-1))


def particle_probs(amps: np.ndarray, d: int, stride: int) -> np.ndarray:
    """Computational-basis marginal of one particle: length-d probabilities."""
    mags = amps.real * amps.real + amps.imag * amps.imag
    return mags.reshape(-1, d, stride).sum(axis=(0, 2))


def project_digit(amps: np.ndarray, d: int, stride: int, digit: int) -> tuple[np.ndarray, float]:
    """Collapse one particle onto a digit; returns (renormalized amps, probability)."""
    blocks = amps.reshape(-1, d, stride)
    picked = blocks[:, digit, :]
    prob = float((picked.real * picked.real + picked.imag * picked.imag).sum())
    out = np.zeros_like(blocks)
    if prob > 0.0:
        out[:, digit, :] = picked / np.sqrt(prob)
    return np.ascontiguousarray(out.reshape(-1)), prob
