"""
exceptions.py:

Exception classes for all epvs_fusion modules. Everything raised deliberately by this package derives from
EpvsException. Validation failures (bad inputs, bad configuration, malformed files) derive from
EpvsValidationException and map to command line exit code 1. Everything else is a runtime failure (exit code 2).
"""


class EpvsException(Exception):
    """Root of the package's exception hierarchy"""

    def __init__(self, val):
        self.except_msg = val
        super().__init__(val)

    def getMsg(self):
        return self.except_msg

    def with_context(self, prefix):
        """
        Prefixes the message with some context (subject, sequence combination) and returns self so callers can
        re-raise the original exception type.

        :param prefix: context to prepend
        :return: this exception
        """
        self.except_msg = f"{prefix}: {self.except_msg}"
        self.args = (self.except_msg,)
        return self


class EpvsValidationException(EpvsException):
    """Raised when inputs or configuration are invalid"""


class ConfigException(EpvsValidationException):
    def __init__(self, val):
        super().__init__(f"Configuration error: {str(val)}")


class ShapeException(EpvsValidationException):
    def __init__(self, val):
        super().__init__(f"Shape mismatch: {str(val)}")


class DomainException(EpvsValidationException):
    def __init__(self, val):
        super().__init__(f"Value out of domain: {str(val)}")


class GeometryException(EpvsValidationException):
    def __init__(self, val):
        super().__init__(f"Invalid geometry: {str(val)}")


class DegenerateInputException(EpvsValidationException):
    def __init__(self, val):
        super().__init__(f"Degenerate input: {str(val)}")


class AugmentationSpecException(EpvsValidationException):
    def __init__(self, val):
        super().__init__(f"Invalid augmentation: {str(val)}")


class DecodingException(EpvsValidationException):
    def __init__(self, val):
        super().__init__(f"Decoding error: {str(val)}")


class NiftiFormatException(DecodingException):
    def __init__(self, val):
        super().__init__(f"Malformed NIfTI-1 header: {str(val)}")


class UnsupportedDtypeException(DecodingException):
    def __init__(self, val):
        super().__init__(f"Unsupported datatype code {str(val)}")


class TruncationException(DecodingException):
    def __init__(self, val):
        super().__init__(f"Truncated stream: {str(val)}")


class CheckpointFormatException(DecodingException):
    def __init__(self, val):
        super().__init__(f"Invalid checkpoint: {str(val)}")


class PlacementException(EpvsException):
    def __init__(self, val):
        super().__init__(f"Lesion placement failed: {str(val)}")


class VolumeIOException(EpvsException):
    def __init__(self, val):
        super().__init__(f"I/O failure: {str(val)}")


class UndefinedMetricException(EpvsException):
    """Signals a metric whose denominator or inputs are empty. Report builders turn this into a null entry."""

    def __init__(self, val):
        super().__init__(f"Undefined metric: {str(val)}")
