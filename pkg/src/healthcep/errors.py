"""Exception hierarchy shared across the package."""


class HealthCepError(Exception):
    pass


class MalformedRecord(HealthCepError, ValueError):
    pass


class ConflictingRetention(HealthCepError):
    pass


class UnknownTopic(HealthCepError, LookupError):
    pass


class OffsetAhead(HealthCepError, ValueError):
    pass


class DegenerateSignal(HealthCepError, ValueError):
    pass


class UnstableDesign(HealthCepError, ValueError):
    pass


class InsufficientData(HealthCepError, ValueError):
    pass


class DegenerateSpectrum(HealthCepError, ValueError):
    pass


class InvalidModel(HealthCepError, ValueError):
    pass


class SourceUnreadable(HealthCepError, OSError):
    pass


class ConfigError(HealthCepError, ValueError):
    pass
