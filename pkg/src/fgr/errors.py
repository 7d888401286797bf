"""Exception hierarchy for the fgr package.

FgrError subclasses are user-facing (bad input, bad file, bad config) and map
to CLI exit code 1; anything else is treated as an internal error (exit 2).
"""


class FgrError(Exception):
    """Base class for user-facing errors."""

    code = "error"


class ShapeMismatchError(FgrError):
    code = "shape_mismatch"

    def __init__(self, op: str, left: tuple, right: tuple):
        super().__init__(f"{op}: incompatible shapes {left} and {right}")
        self.left = left
        self.right = right


class ZeroRowError(FgrError):
    code = "zero_row"

    def __init__(self, row: int):
        super().__init__(f"cannot L2-normalize all-zero row {row}")
        self.row = row


class ParameterError(FgrError):
    code = "bad_parameter"


class EmptyInputError(FgrError):
    code = "empty_input"


class FormatError(FgrError):
    """Base for binary/file format problems."""

    code = "bad_format"


class BadMagicError(FormatError):
    code = "bad_magic"

    def __init__(self, expected: bytes, got: bytes):
        super().__init__(f"bad file magic: expected {expected!r}, got {got!r}")


class BadVersionError(FormatError):
    code = "bad_version"

    def __init__(self, expected: int, got: int):
        super().__init__(f"unsupported format version {got} (expected {expected})")


class TruncatedFileError(FormatError):
    code = "truncated_file"


class DuplicateIdError(FgrError):
    code = "duplicate_id"

    def __init__(self, id_: str):
        super().__init__(f"duplicate passage id {id_!r}")
        self.id = id_


class MalformedLineError(FgrError):
    code = "malformed_line"

    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


class NotFoundError(FgrError):
    code = "not_found"


class StaleIndexError(FgrError):
    code = "stale_index"


class AnnotationParseError(FgrError):
    code = "unparseable_response"

    def __init__(self, raw: str):
        super().__init__(f"could not extract spans from LLM response: {raw[:200]!r}")
        self.raw = raw


class TrainingDivergedError(FgrError):
    code = "nan_loss"

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
