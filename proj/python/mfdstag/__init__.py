"""Mixed mimetic finite differences with staggered diffusion coefficients."""

from ._mfdstag import (
    Expr,
    Mesh,
    MfdstagError,
    convergence_study,
    generate_mesh,
    infsup,
    run_cli,
    solve,
)

__all__ = [
    "Expr",
    "Mesh",
    "MfdstagError",
    "convergence_study",
    "generate_mesh",
    "infsup",
    "run_cli",
    "solve",
]
