"""Pure numpy twin of the compiled kernel in ``_kernels.pyx``."""
import numpy as np

_KERNELS = {
    0: lambda th: np.ones_like(th),
    1: lambda th: np.exp(1j * th),
    2: lambda th: -2.0 * np.sin(0.5 * th) ** 2 + 1j * np.sin(th),
    3: lambda th: th,
    4: lambda th: th * th,
}


def twisted_sum(u, v, F3, X, Z, mode):
    if mode not in _KERNELS:
        raise ValueError(f"unknown kernel mode {mode}")
    u = np.asarray(u)
    v = np.asarray(v)
    F3 = np.asarray(F3)
    if F3.shape != (u.shape[0], v.shape[0]) or np.shape(Z)[0] != v.shape[0]:
        raise ValueError("inconsistent kernel shapes")
    if mode == 0:
        terms = F3 * v[None, :]
    else:
        terms = F3 * _KERNELS[mode](np.asarray(X) @ np.asarray(Z).T) * v[None, :]
    # numpy reduces contiguous axes pairwise
    rows = np.sum(terms, axis=1)
    return complex(np.sum(u * rows))
