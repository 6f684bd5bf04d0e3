"""Exception types shared across the package."""


class InsqError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateIdError(InsqError):
    pass


class CoincidentSiteError(InsqError):
    pass


class NotFoundError(InsqError):
    pass


class InvalidArgumentError(InsqError):
    pass


class TooFewSitesError(InsqError):
    pass


class DisconnectedGraphError(InsqError):
    pass


class InvalidLengthError(InsqError):
    pass


class SchemaError(InsqError):
    """Scenario document failed validation; `field` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message
