"""Exception types shared across the package.

Every exception derives from ValueError so callers that do not care about
the fine-grained category can catch a single base class.
"""

from __future__ import annotations


class ModalityError(ValueError):
    """An operation received data in the wrong modality (e.g. non-RGB input)."""


class GeometryError(ValueError):
    """Array dimensions are inconsistent with the declared clip/patch geometry."""


class MaskError(ValueError):
    """A mask is malformed: bad indices, overlap between masked and visible, etc."""


class DegenerateMaskError(ValueError):
    """A mask with zero masked positions was used where at least one is required."""


class ParameterError(ValueError):
    """A scalar argument is outside its documented range."""


class LabelError(ValueError):
    """Labels contain values other than 0 and 1."""


class EmptySequenceError(ValueError):
    """A token sequence with zero elements reached an operation that needs one."""


class ClipFormatError(ValueError):
    """A stored clip file is malformed; the message names the byte offset."""


class ManifestError(ValueError):
    """A dataset manifest is malformed or internally inconsistent."""


class ConfigError(ValueError):
    """A training configuration is invalid or inconsistent with the data."""


class ScheduleError(ValueError):
    """A learning-rate schedule was queried outside its valid step range."""


class DegenerateInputError(ValueError):
    """A metric was asked for on an input where it is undefined (single class)."""
