"""Exception hierarchy shared by the package."""


class FeasRestoreError(Exception):
    """Base class for every error raised by this package."""


class CaseFormatError(FeasRestoreError):
    """Case text could not be turned into a valid RawCase."""


class MissingSection(CaseFormatError):
    def __init__(self, name):
        super().__init__(f"case text has no '{name}' assignment")
        self.name = name


class MalformedRow(CaseFormatError):
    def __init__(self, line, detail=""):
        msg = f"malformed matrix row at line {line}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.line = line


class DuplicateBusId(CaseFormatError):
    def __init__(self, bus_id):
        super().__init__(f"bus id {bus_id} appears more than once")
        self.bus_id = bus_id


class InvalidCase(CaseFormatError):
    """Structural invariant of a case violated (ref bus count, dangling ids)."""


class ContingencyError(FeasRestoreError):
    pass


class IndexOutOfRange(ContingencyError):
    pass


class DisconnectsNetwork(ContingencyError):
    pass


class NetworkError(FeasRestoreError):
    pass


class NoSlackBus(NetworkError):
    pass


class IsolatedBus(NetworkError):
    pass


class DimensionMismatch(FeasRestoreError, ValueError):
    pass


class PowerFlowFailure(FeasRestoreError):
    """Newton power flow did not converge.

    ``reason`` is ``"singular"`` or ``"max_iterations"``; ``history`` holds the
    infinity norm of the mismatch at each iterate.
    """

    def __init__(self, reason, history, state=None):
        super().__init__(f"power flow failed ({reason}) after {len(history) - 1} iterations")
        self.reason = reason
        self.history = list(history)
        self.state = state


class SingularJacobian(PowerFlowFailure):
    def __init__(self, history, state=None):
        super().__init__("singular", history, state)


class MaxIterations(PowerFlowFailure):
    def __init__(self, history, state=None):
        super().__init__("max_iterations", history, state)


class OutOfBox(FeasRestoreError, ValueError):
    pass


class NegativeExpectedReduction(FeasRestoreError):
    pass


class LpError(FeasRestoreError):
    pass


class Unbounded(LpError):
    pass


class NumericalStall(LpError):
    pass


class FactorizationError(FeasRestoreError):
    pass


class StructurallySingular(FactorizationError):
    pass


class NumericallySingular(FactorizationError):
    pass


class BorderSingular(FactorizationError):
    pass


class TweakError(FeasRestoreError):
    reason = "tweak"


class RevisitedActiveSet(TweakError):
    reason = "revisit"


class OverdeterminedActiveSet(TweakError):
    reason = "overdetermined"


class TweakBudgetExceeded(TweakError):
    reason = "budget"


class InsufficientTrace(FeasRestoreError, ValueError):
    pass
