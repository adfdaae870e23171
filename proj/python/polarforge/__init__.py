"""Polar-code construction over q-ary erasure channels (bindings to the C++ library)."""

from ._core import *  # noqa: F401,F403
from ._core import (
    BudgetError,
    InfeasibleError,
    ValidationError,
    __version__,
)


def cli(*args):
    """Runs a polarforge subcommand; returns (exit_code, stdout, stderr)."""
    return run_cli([str(a) for a in args])
