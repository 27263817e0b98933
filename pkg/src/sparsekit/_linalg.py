"""Small dense linear algebra helpers shared across modules.

Everything here is a thin wrapper over numpy's symmetric eigensolvers; the
wrappers exist so that symmetrization and tolerance conventions are applied
in one place.
"""

import numpy as np


def sym(a):
    """Symmetrize a square matrix (cheap guard against fp drift)."""
    return 0.5 * (a + a.T)


def eigh(a):
    """Eigendecomposition of a symmetric matrix, ascending eigenvalues."""
    return np.linalg.eigh(sym(np.asarray(a, dtype=float)))


def eigvalsh(a):
    return np.linalg.eigvalsh(sym(np.asarray(a, dtype=float)))


def min_eig(a):
    return float(eigvalsh(a)[0])


def max_eig(a):
    return float(eigvalsh(a)[-1])


def spectral_norm(a):
    w = eigvalsh(a)
    return float(max(abs(w[0]), abs(w[-1])))


def matfun(a, fn):
    """Apply a scalar function to a symmetric matrix through its spectrum."""
    w, v = eigh(a)
    return sym((v * fn(w)) @ v.T)


def psd_dominates(upper, lower, tol):
    """True when lower <= upper in the PSD order, within absolute slack tol
    on the smallest eigenvalue of the difference."""
    return min_eig(np.asarray(upper) - np.asarray(lower)) >= -tol


def rng_from(seed):
    """Build a Generator from an int, SeedSequence, or existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))
