"""Exception hierarchy shared by every cosprover module."""


class CosProverError(Exception):
    """Base class for all errors raised by this package."""


class MalformedState(CosProverError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"malformed state at line {line}: {reason}")


class NoStatesFound(CosProverError):
    pass


class NonMonotonicIndex(CosProverError):
    def __init__(self, index: int, expected: int):
        self.index = index
        self.expected = expected
        super().__init__(f"state header {index} out of order (expected {expected})")


class TerminalState(CosProverError):
    """A terminal (zero-goal) state was given where a goal is required."""


class MultiGoal(CosProverError):
    pass


class ArityMismatch(CosProverError):
    pass


class NoCodeBlock(CosProverError):
    pass


class CassetteMiss(CosProverError):
    def __init__(self, key: str, template_id: str = "", scope: str = ""):
        self.key = key
        self.template_id = template_id
        self.scope = scope
        where = f" scope={scope!r}" if scope else ""
        super().__init__(f"CassetteMiss: no recorded response for {template_id} key={key}{where}")


class BackendUnavailable(CosProverError):
    pass


class TokenBudgetExceeded(CosProverError):
    pass


class ProtocolError(CosProverError):
    pass


class SuggestUnsupported(CosProverError):
    pass


class TemplateError(CosProverError):
    pass


class StatementRejected(CosProverError):
    def __init__(self, statement: str, message: str):
        self.statement = statement
        self.message = message
        super().__init__(f"checker rejected statement: {message}")


class BudgetExhausted(CosProverError):
    pass


class SchemaViolation(CosProverError):
    def __init__(self, path, node_index: int, reason: str):
        self.path = path
        self.node_index = node_index
        self.reason = reason
        super().__init__(f"{path}: node {node_index}: {reason}")


class InconsistentChain(CosProverError):
    pass


class MissingExpectedType(CosProverError):
    pass


class ConfigError(CosProverError):
    pass
