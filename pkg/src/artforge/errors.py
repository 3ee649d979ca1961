"""Exception hierarchy shared across the toolkit.

Conditions that the batch pipeline merely flags for human verification
(ambiguous axes, degenerate ranges, ...) are *not* exceptions; they travel
as provenance flags on the proposals themselves.
"""


class ForgeError(Exception):
    """Base class for all toolkit errors."""


# --- mesh ingestion ---------------------------------------------------------

class MalformedFile(ForgeError):
    pass


class EmptyGeometry(ForgeError):
    pass


class NonTriangulatable(ForgeError):
    pass


# --- geometry queries -------------------------------------------------------

class ZeroAreaSelection(ForgeError):
    pass


class DegeneratePart(ForgeError):
    pass


class ZeroExtent(ForgeError):
    pass


# --- segmentation -----------------------------------------------------------

class DimensionMismatch(ForgeError):
    pass


class NoLabeledSegments(ForgeError):
    pass


# --- templates / articulation ----------------------------------------------

class SchemaViolation(ForgeError):
    pass


class UnknownLabel(ForgeError):
    pass


class NoContact(ForgeError):
    pass


class NoValidParent(ForgeError):
    pass


class AmbiguousRoot(ForgeError):
    pass


class CycleDetected(ForgeError):
    pass


# --- interior completion ----------------------------------------------------

class NoCavity(ForgeError):
    pass


class NoGenerator(ForgeError):
    pass


# --- physics ----------------------------------------------------------------

class Unresolvable(ForgeError):
    pass


# --- export -----------------------------------------------------------------

class UnvalidatedGraph(ForgeError):
    pass


class MissingPhysical(ForgeError):
    pass


class UntypedJoint(ForgeError):
    pass


class EmptyInput(ForgeError):
    pass


class ZeroVector(ForgeError):
    pass


# --- pipeline ---------------------------------------------------------------

class ConfigInvalid(ForgeError):
    pass
