"""Backend selection for the flow kernels.

The compiled module is used when it imports; otherwise the numpy reference
implementation is used.  Setting ``SEMIQUANT_KERNELS=python`` before import
forces the fallback (used by the benchmark and the backend-agreement tests).
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("SEMIQUANT_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"

hamiltonian_jet = _impl.hamiltonian_jet
flow_rhs = _impl.flow_rhs

__all__ = ["BACKEND", "hamiltonian_jet", "flow_rhs"]
