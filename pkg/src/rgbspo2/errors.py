"""Exception hierarchy.

Every error carries a stable ``code`` string and maps onto a CLI exit status:
2 for validation problems, 3 for data problems, 4 for solver convergence.
"""


class Spo2Error(Exception):
    code = "error"
    exit_status = 1


class ValidationError(Spo2Error, ValueError):
    code = "validation"
    exit_status = 2


class DataError(Spo2Error, ValueError):
    code = "data"
    exit_status = 3


class ConvergenceError(Spo2Error, RuntimeError):
    code = "convergence"
    exit_status = 4


# ingest
class InvalidHeaderError(ValidationError):
    code = "invalid-header"


class CorruptInputError(DataError):
    code = "corrupt-input"


class InvalidTraceError(DataError):
    code = "invalid-trace"


class SchemaError(DataError):
    code = "schema"


class EmptySessionError(DataError):
    code = "empty-session"


# roi
class DegenerateHistogramError(DataError):
    code = "degenerate-histogram"


class InsufficientSkinError(DataError):
    code = "insufficient-skin"

    def __init__(self, message, frame_index=None):
        super().__init__(message)
        self.frame_index = frame_index


# dsp
class InvalidDesignError(ValidationError):
    code = "invalid-design"


class InsufficientSamplesError(DataError):
    code = "insufficient-samples"


# pulse
class UndefinedHrError(DataError):
    code = "undefined-hr"

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


# features
class InvalidDcError(DataError):
    code = "invalid-dc"


class UndefinedAcError(DataError):
    code = "undefined-ac"


# regress
class DegenerateFeatureError(DataError):
    code = "degenerate-feature"


class RankDeficiencyError(DataError):
    code = "rank-deficiency"


class FeatureSchemaError(ValidationError):
    code = "feature-schema"


class IncompatibleModelError(ValidationError):
    code = "incompatible-model"


class ModelParseError(DataError):
    code = "model-parse"


class MissingLabelError(DataError):
    code = "missing-label"


# synth
class InvalidSceneError(ValidationError):
    code = "invalid-scene"


class InvalidGeometryError(ValidationError):
    code = "invalid-geometry"


# eval
class ShapeError(ValidationError):
    code = "shape"


class UndefinedCorrelationError(DataError):
    code = "undefined-correlation"


class ConfigError(ValidationError):
    code = "config"


class LeakageError(DataError):
    code = "leakage"
