"""Exception hierarchy shared across the package."""


class SdgPbError(Exception):
    """Base class for all package errors."""


# taxonomy
class OutOfRange(SdgPbError):
    pass


class IllegalRefinement(SdgPbError):
    pass


# corpus
class HttpFailure(SdgPbError):
    pass


class InvalidCursor(SdgPbError):
    pass


class QuotaExceeded(SdgPbError):
    pass


class MalformedXml(SdgPbError):
    pass


class NotTei(SdgPbError):
    pass


class EmptyDocument(SdgPbError):
    pass


class OverContext(SdgPbError):
    pass


# gateway
class RateLimited(SdgPbError):
    pass


class Timeout(SdgPbError):
    pass


class BackendError(SdgPbError):
    pass


class TransientBackendError(BackendError):
    """Retryable backend failure (429, 5xx, transport hiccup)."""


class ReplayMiss(SdgPbError):
    pass


# pipeline
class SchemaError(SdgPbError):
    pass


class IdOutOfRange(SchemaError):
    pass


class PairSetMismatch(SchemaError):
    pass


class UnknownCategory(SchemaError):
    pass


class UnknownDirection(SchemaError):
    pass


class TemplateVersionMismatch(SdgPbError):
    pass


# analytics
class DuplicateRecord(SdgPbError):
    pass


class EmptyMatrix(SdgPbError):
    pass


class ZeroCorpus(SdgPbError):
    pass


class NoDirectedRecords(SdgPbError):
    pass


class EmptyPanel(SdgPbError):
    pass


class ZeroGlobal(SdgPbError):
    pass


# cli
class ConfigError(SdgPbError):
    pass


class MissingInput(SdgPbError):
    pass


class GoldenMismatch(SdgPbError):
    pass
