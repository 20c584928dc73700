"""Numerical laboratory for conformally invariant Willmore-type energies of
closed immersed 4-manifolds in conformally flat ambient spaces of arbitrary
codimension.

Pointwise geometry is exact (truncated Taylor jets); the only approximation
is quadrature over the submanifold.
"""

import importlib

__all__ = [
    "jets",
    "surfaces",
    "riemannian",
    "tractor",
    "energies",
    "conformal",
    "variational",
    "cli",
]

__version__ = "0.1.0"


def __getattr__(name):
    # Submodules are imported on first access so that light uses (for
    # instance the jet calculus alone) do not pay for numba warm-up in
    # the heavier modules.
    if name in __all__:
        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
