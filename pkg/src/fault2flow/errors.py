"""Exception hierarchy shared by every stage of the toolchain.

Each class carries the process exit code the command line uses when the
error escapes a subcommand, so the CLI never needs a lookup table.
"""


class Fault2FlowError(Exception):
    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


# input documents (.pasta, .puml, workflow/suite json, config)

class InputError(Fault2FlowError):
    exit_code = 2


class DslSyntaxError(InputError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class DuplicateId(InputError):
    pass


class UnresolvedReference(InputError):
    pass


class CycleDetected(InputError):
    pass


class DepthJump(InputError):
    pass


class MultipleRoots(InputError):
    pass


class SchemaError(InputError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class ConfigError(InputError):
    pass


# translation

class TranslationError(InputError):
    pass


class UnannotatedLeaf(TranslationError):
    pass


class UnknownParameter(TranslationError):
    pass


class EmptyFaultClass(TranslationError):
    pass


class HookExhausted(TranslationError):
    def __init__(self, message, failures):
        self.failures = failures
        super().__init__(message)


# compilation / workflow structure

class SelfCheckFailed(Fault2FlowError):
    exit_code = 1

    def __init__(self, report):
        self.report = report
        lines = "; ".join(f"{f.node}: {f.message}" for f in report.errors)
        super().__init__(f"fault tree failed self-check: {lines}")


class KofnTooWide(Fault2FlowError):
    exit_code = 2


class WorkflowCycle(InputError):
    pass


class ValidationFailed(Fault2FlowError):
    exit_code = 1

    def __init__(self, report):
        self.report = report
        lines = "; ".join(f"{f.node}: {f.message}" for f in report.errors)
        super().__init__(f"workflow failed validation: {lines}")


# evaluation / execution

class ExecutionError(Fault2FlowError):
    exit_code = 3


class DivisionByZero(ExecutionError):
    pass


class MissingParameter(ExecutionError):
    pass


class MissingField(ExecutionError):
    pass


class DanglingBranch(ExecutionError):
    pass


# test generation / metrics

class UnsatisfiableStrategy(Fault2FlowError):
    exit_code = 1


class EmptyTree(Fault2FlowError):
    exit_code = 2


class LeafCapExceeded(Fault2FlowError):
    exit_code = 2


# evolution

class SeedInvalid(Fault2FlowError):
    exit_code = 2


class NotApplicable(Fault2FlowError):
    """A rewrite found no site to act on."""


# n8n REST client

class PushError(Fault2FlowError):
    exit_code = 4


class NetworkError(PushError):
    pass


class AuthError(PushError):
    pass


class SchemaRejected(PushError):
    def __init__(self, status, body):
        self.status = status
        self.body = body
        super().__init__(f"HTTP {status}: {body}")
