"""Exception types raised across the package."""


class FsrDiagError(Exception):
    """Base class for all package errors."""


class DomainError(FsrDiagError, ValueError):
    """A time or parameter lies outside its admissible domain."""


class UnsupportedOperationError(FsrDiagError, TypeError):
    """The requested operation is not defined for this object."""


class DegenerateDensityError(FsrDiagError, ValueError):
    """A density does not exist (e.g. a discrete prior at t = 0)."""


class IntractableError(FsrDiagError):
    """No closed form exists for this prior/operator combination."""


class DegenerateEvidenceError(FsrDiagError, FloatingPointError):
    """Every measurement weight underflows; the data are inconsistent with the atoms."""

    def __init__(self, max_log_weight: float):
        self.max_log_weight = float(max_log_weight)
        super().__init__(
            f"all measurement weights underflow (max log-weight {self.max_log_weight:.4g})"
        )


class SamplerDivergenceError(FsrDiagError, FloatingPointError):
    """Too many reverse-SDE trajectories became non-finite."""

    def __init__(self, n_diverged: int, n_total: int, first_step: int | None = None):
        self.n_diverged = n_diverged
        self.n_total = n_total
        self.first_step = first_step
        msg = f"{n_diverged}/{n_total} trajectories diverged"
        if first_step is not None:
            msg += f" (first at step {first_step})"
        super().__init__(msg)


class GridMismatchError(FsrDiagError, ValueError):
    """Two densities are defined on different grids."""
