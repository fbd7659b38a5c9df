"""Reproducible random streams for simulation.

Streams are counter-based (Philox) and keyed per path: path i of a run with
master seed s draws from the stream keyed (s, i), so its draws never depend
on how many paths are requested or in which order blocks execute.  Normals
come from the inverse CDF applied to uniforms, which is bit-stable across
platforms, unlike rejection samplers.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

_U_FLOOR = 1e-300  # random() can return exactly 0.0; ndtri(0) is -inf


def path_generator(seed: int, path_index: int = 0) -> Generator:
    """Generator for one path's private stream."""
    if seed < 0 or path_index < 0:
        raise ValueError("seed and path index must be non-negative")
    key = np.array([seed, path_index], dtype=np.uint64)
    return Generator(Philox(key=key))


def standard_normals(gen: Generator, n: int) -> np.ndarray:
    """n standard normals via the inverse CDF."""
    u = gen.random(n)
    np.maximum(u, _U_FLOOR, out=u)
    return ndtri(u)


def normal_block(seed: int, first_path: int, n_paths: int, n_draws: int) -> np.ndarray:
    """(n_paths, n_draws) normals; row i belongs to path first_path + i.

    Rows are generated from their own keyed streams, so the block
    decomposition is invisible in the output.
    """
    u = np.empty((n_paths, n_draws))
    for i in range(n_paths):
        u[i] = path_generator(seed, first_path + i).random(n_draws)
    np.maximum(u, _U_FLOOR, out=u)
    return ndtri(u)
