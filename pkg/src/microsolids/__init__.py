"""Evolutionary-equation models of micro-structured elastic media.

Solves ``(d0 M0 + M1 + d0^{-1} M2 + A) U = f`` on a uniform grid for a catalog
of micromorphic, micropolar, microstretch and classical models, and maps
models onto their descendants by block conjugation.

Set ``MICROSOLIDS_THREADS`` before import to cap BLAS/OpenMP threads.
"""
from __future__ import annotations

import os as _os

_threads = _os.environ.get("MICROSOLIDS_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .blocks import BlockOperator, classify  # noqa: E402
from .evolution import EvoProblem, run  # noqa: E402
from .grid import Grid  # noqa: E402
from .materials import Block, MaterialLaw, validate  # noqa: E402
from .reduction import ReductionMap, conjugate_problem  # noqa: E402
from .zoo import MODELS, build, build_law, reduction_edge  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockOperator",
    "EvoProblem",
    "Grid",
    "MaterialLaw",
    "MODELS",
    "ReductionMap",
    "build",
    "build_law",
    "classify",
    "conjugate_problem",
    "reduction_edge",
    "run",
    "validate",
]
