class MLIRError(Exception):
    """Base class of every error raised by the toolkit services."""


class ConfigurationError(MLIRError, ValueError):
    pass


class InputFormatError(MLIRError, ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(f"{where}{message}")


class EmptyQueryError(MLIRError, ValueError):
    pass


class DuplicateDocumentError(MLIRError, ValueError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"duplicate document id {doc_id!r}")


class UnknownDocumentError(MLIRError, LookupError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"unknown document id {doc_id!r}")


class ShapeError(MLIRError, ValueError):
    pass


class AggregationError(MLIRError, ValueError):
    pass


class AlignmentError(MLIRError, ValueError):
    def __init__(self, message: str, source: str | None = None):
        self.source = source
        super().__init__(message if source is None else f"{source}: {message}")


class QrelsCollisionError(MLIRError, ValueError):
    pass


class StatisticsInputError(MLIRError, ValueError):
    pass


class EvaluationError(MLIRError, ValueError):
    pass
