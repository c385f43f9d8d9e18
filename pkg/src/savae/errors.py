"""Exception hierarchy shared by all savae modules."""


class SavaeError(Exception):
    """Base class for all errors raised by this package."""

    #: short machine-parseable category, used by the CLI error reporting
    category = "Error"


class IoError(SavaeError):
    category = "IoError"


class ParseError(SavaeError):
    category = "ParseError"

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EmptyCorpus(SavaeError):
    category = "EmptyCorpus"


class EmptyDocument(SavaeError):
    category = "EmptyDocument"


class AllDocumentsEmpty(SavaeError):
    category = "AllDocumentsEmpty"


class ConfigError(SavaeError):
    """One or more invalid configuration fields; collects all violations."""

    category = "ConfigError"

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NonFiniteGradient(SavaeError):
    category = "NonFiniteGradient"

    def __init__(self, param_name, context=""):
        self.param_name = param_name
        msg = f"non-finite gradient in parameter '{param_name}'"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class UnsupportedVersion(SavaeError):
    category = "UnsupportedVersion"


class CorruptCheckpoint(SavaeError):
    category = "CorruptCheckpoint"


class DegenerateCentroids(SavaeError):
    category = "DegenerateCentroids"


class DegenerateClusters(SavaeError):
    category = "DegenerateClusters"


class DegenerateLabels(SavaeError):
    category = "DegenerateLabels"


class UnknownToken(SavaeError):
    category = "UnknownToken"
