"""Exception hierarchy shared by all modules.

Domain refusals that are ordinary results (validation reports, denied
admissions, routing rejections) are *not* exceptions; these classes cover the
cases where an operation cannot produce a result at all.
"""


class SlicingError(Exception):
    """Base class for every error raised by this package."""


class DocumentError(SlicingError):
    """A document (template, catalogue, substrate, scenario) could not be parsed."""


# templates
class TooManyUseCases(SlicingError):
    pass


class InvalidParent(SlicingError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InvalidOverride(SlicingError):
    pass


# catalogue
class DuplicateId(SlicingError):
    pass


class DanglingSubTemplate(SlicingError):
    pass


class InvalidTemplate(SlicingError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IntegrityViolation(SlicingError):
    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


# infrastructure
class StalePlacement(SlicingError):
    pass


class UnknownSlice(SlicingError):
    pass


# orchestration
class IllegalTransition(SlicingError):
    pass


class AllocationFailed(SlicingError):
    pass


class UnknownComponent(SlicingError):
    pass


# northbound
class Unauthorized(SlicingError):
    pass


class UnboundChannel(SlicingError):
    pass


# simulator
class ScenarioInvalid(SlicingError):
    pass


class InvariantViolation(SlicingError):
    """Raised when a run detects a broken invariant. Always a bug, never a domain outcome."""


class TooManySlices(SlicingError):
    pass


class SliceNotActive(SlicingError):
    pass
