"""Exception and warning types shared across the package."""


class SpiraldecError(Exception):
    """Base class for all errors raised by spiraldec."""


# --- mesh / topology ---

class MeshError(SpiraldecError):
    pass


class DegenerateFace(MeshError):
    """A face references the same vertex more than once."""


class NonManifoldEdge(MeshError):
    """An undirected edge borders more than two faces."""


class InconsistentWinding(MeshError):
    """Two faces traverse a shared edge in the same direction."""


class MissingCorrespondence(MeshError):
    """A fine vertex has no coarse parent vertex or parent edge."""


# --- numeric core ---

class ShapeMismatch(SpiraldecError):
    pass


class NonFiniteInput(SpiraldecError):
    pass


class NonFiniteGradient(SpiraldecError):
    pass


class NonFiniteLoss(SpiraldecError):
    pass


# --- layers ---

class TableMeshMismatch(SpiraldecError):
    """A spiral table does not match the feature array it is applied to."""


class UnclippedTable(SpiraldecError):
    """A region-refinement layer was given a table without region clipping."""


# --- pipeline ---

class ConfigMismatch(SpiraldecError):
    pass


class TemplateMismatch(SpiraldecError):
    """Checkpoint parameters do not match the model built from the config."""


class CheckpointFormatError(SpiraldecError):
    pass


# --- reported (non-fatal) conditions ---

class DegenerateEdgeWarning(UserWarning):
    """A predicted edge shorter than the degeneracy threshold was skipped."""


class DegenerateConfigurationWarning(UserWarning):
    """Cross-covariance is rank-deficient; the rotation is not unique."""
