"""Exception hierarchy shared by every phasefront module."""


class Error(Exception):
    """Base class for all phasefront errors."""


# --- IR parsing ---

class ParseError(Error):
    """Unparseable IR text; carries 1-based line/column of the offending token."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {column}" if column is not None else "") + ")"
        super().__init__(message + loc)


class UndefinedValueError(Error):
    """Use of an SSA name or block label with no definition in scope."""


class EmptyModuleError(Error):
    """IR text contains no function body."""


# --- numeric kernels ---

class ShapeError(Error):
    """Operand dimensions do not match the operation contract."""


class SymmetryError(Error):
    """Matrix required to be symmetric is not."""


class NumericError(Error):
    """A kernel produced a NaN or infinity."""


class DomainError(Error):
    """Argument outside the mathematical domain of the operation."""


# --- configuration / model lifecycle ---

class ConfigError(Error):
    """Invalid or inconsistent configuration values."""


class EmptyDatasetError(Error):
    """Training requested on an empty dataset."""


class FeatureModeError(Error):
    """Predictor loaded in the wrong feature mode for the requested use."""


class CheckpointVersionError(Error):
    """Checkpoint file version or header does not match this build."""


class PredictorError(Error):
    """Predictor produced an unusable output (wrong shape, non-finite)."""


# --- environment / agents ---

class EpisodeDoneError(Error):
    """step() called on a finished episode."""


class InsufficientBufferError(Error):
    """Replay buffer holds fewer transitions than the requested batch."""


class EmptySetError(Error):
    """Aggregate requested over an empty collection."""


class SpaceTooLargeError(Error):
    """Exhaustive enumeration would exceed the configured cap."""


# --- analytics ---

class EmptyInputError(Error):
    """Operation requires at least one input point."""


class CardinalityError(Error):
    """Solutions and constraints do not pair up one-to-one."""


class BudgetMismatchError(Error):
    """Compared solutions do not both satisfy the shared energy budget."""


class ReferenceDominatedError(Error):
    """Hypervolume reference point does not dominate-or-equal every input point."""


# --- evaluation backends / storage ---

class ToolchainMissingError(Error):
    """A configured toolchain binary could not be resolved."""


class CompileError(Error):
    """External compilation failed; message carries captured diagnostics."""


class CompileTimeoutError(Error):
    """External compile or run exceeded the configured wall limit."""


class EvaluatorError(Error):
    """Evaluation of an assignment failed; offending assignment attached."""

    def __init__(self, message, assignment=None):
        self.assignment = assignment
        super().__init__(message)


class StoreIoError(Error):
    """Record store could not be read or written."""


class UnknownGraphError(Error):
    """Referenced graph id is absent from the store."""
