"""Backend selection for the simulation loops.

The compiled extension is used when it imports; setting
``NOISEBOUND_PURE_PYTHON=1`` forces the pure-Python twin.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from noisebound import _pykernels
from noisebound.rate_expr import compile_program

S_DONE = _pykernels.S_DONE
S_NEED_RANDOM = _pykernels.S_NEED_RANDOM
S_BUFFER_FULL = _pykernels.S_BUFFER_FULL
S_JUMP_CAP = _pykernels.S_JUMP_CAP
S_NEG_RATE = _pykernels.S_NEG_RATE
S_NONFINITE = _pykernels.S_NONFINITE


def _load_compiled():
    try:
        from noisebound import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = None if os.environ.get("NOISEBOUND_PURE_PYTHON") else _load_compiled()


def get_backend(name: str | None = None):
    """Kernel module by name (``"cython"`` / ``"python"``), default the fastest available."""
    if name is None:
        return _compiled or _pykernels
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    return _compiled is not None


BACKEND = get_backend().BACKEND


@dataclass(frozen=True)
class Program:
    """All rates of a network flattened into one bytecode stream."""

    ops: np.ndarray
    args: np.ndarray
    starts: np.ndarray
    consts: np.ndarray

    def as_args(self):
        return self.ops, self.args, self.starts, self.consts


def compile_network(net) -> Program:
    consts, ops, args, starts = [], [], [], [0]
    for r in net.rates:
        for op, arg in compile_program(r, consts):
            ops.append(op)
            args.append(arg)
        starts.append(len(ops))
    if not consts:
        consts.append(0.0)
    return Program(
        np.asarray(ops, dtype=np.int32),
        np.asarray(args, dtype=np.int32),
        np.asarray(starts, dtype=np.int32),
        np.asarray(consts, dtype=np.float64),
    )
