"""Exception hierarchy for the simulator."""


class SapiensError(Exception):
    """Base class for every error raised by the simulator."""


class EmptyBatch(SapiensError):
    pass


class CorruptChain(SapiensError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"chain fails verification at block {index}")


class DuplicateId(SapiensError):
    pass


class RoleViolation(SapiensError):
    pass


class InvalidProof(SapiensError):
    pass


class UnknownNode(SapiensError):
    pass


class AbandonedNode(SapiensError):
    pass


class InsufficientNodes(SapiensError):
    pass


class InsufficientFunds(SapiensError):
    pass


class EscrowExhausted(SapiensError):
    pass


class UnassignedDetector(SapiensError):
    pass


class IncompleteResults(SapiensError):
    pass


class IncompleteVerdicts(SapiensError):
    pass


class NoPocsAvailable(SapiensError):
    pass


class MaxRoundsExceeded(SapiensError):
    pass


class UnknownUser(SapiensError):
    pass


class KeyMismatch(SapiensError):
    pass


class InvalidTransition(SapiensError):
    """A workflow operation observed an entity in the wrong status."""


class ScenarioParseError(SapiensError):
    pass


class ScenarioValidationError(SapiensError):
    pass


class InternalInvariantViolation(SapiensError):
    """A structural invariant broke mid-run. Always a bug, never an outcome."""

    def __init__(self, tick, message):
        self.tick = tick
        super().__init__(f"[tick {tick}] {message}")
