"""Exception types shared across the toolkit."""


class VecPumError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(VecPumError):
    """A configuration value is invalid or produces an unusable setup."""


class CoverConnectivityError(VecPumError):
    """The patch-intersection graph is disconnected.

    A disconnected cover makes the potential-shift system rank deficient
    beyond its constant nullspace, so the shifts cannot be reconciled.
    """


class CoverageError(VecPumError):
    """A query point is not covered by any patch."""

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = [] if indices is None else list(indices)


class PatchFitError(VecPumError):
    """A local interpolation system could not be factorized.

    Carries the patch id and a condition-number diagnostic of the
    assembled matrix.
    """

    def __init__(self, patch_id, cond, message=None):
        self.patch_id = patch_id
        self.cond = cond
        if message is None:
            message = (
                f"local system for patch {patch_id} is not numerically "
                f"positive definite (cond ~ {cond:.3e})"
            )
        super().__init__(message)


class GlobalFitSizeError(VecPumError):
    """A dense global fit was requested beyond the node-count guard."""
