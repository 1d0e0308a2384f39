class ScriptCliqueError(Exception):
    """Base class for data errors surfaced by the pipeline (CLI exit code 2)."""


class CorpusNotFound(ScriptCliqueError):
    pass


class IntegrityError(ScriptCliqueError):
    def __init__(self, script_id: str, message: str):
        super().__init__(f"{script_id}: {message}")
        self.script_id = script_id


class SchemaError(ScriptCliqueError):
    pass


class InvalidArgument(ScriptCliqueError, ValueError):
    pass


class CliqueBudgetExceeded(ScriptCliqueError):
    pass
