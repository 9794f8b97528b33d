"""Exception types shared across the toolkit."""


class EdgePoseError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(EdgePoseError, ValueError):
    """An image or array has unusable dimensions."""


class FormatError(EdgePoseError):
    """A file could not be parsed; the message carries file/record context."""

    def __init__(self, message, *, path=None, line=None, scene_id=None, image_id=None):
        parts = []
        if path is not None:
            parts.append(str(path))
        if line is not None:
            parts.append(f"line {line}")
        if scene_id is not None:
            parts.append(f"scene {scene_id}")
        if image_id is not None:
            parts.append(f"image {image_id}")
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.line = line
        self.scene_id = scene_id
        self.image_id = image_id


class BehindCameraError(EdgePoseError):
    """A 3D point projects at non-positive depth."""


class InsufficientDataError(EdgePoseError):
    """Too few correspondences for the solver."""


class DegenerateGeometryError(EdgePoseError):
    """The correspondence geometry leaves the linear system rank deficient."""


class InitializationError(EdgePoseError):
    """The linear initialization produced an unusable starting pose."""


class EvaluationError(EdgePoseError):
    """An evaluation run cannot produce a meaningful report."""
