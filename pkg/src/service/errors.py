from service.settings import EXIT_CODES


class ToolkitError(Exception):
    """Базовая ошибка пакета."""
    exit_code = EXIT_CODES["numeric"]


class ConfigError(ToolkitError):
    """Ошибка конфигурации запуска."""
    exit_code = EXIT_CODES["config"]

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        self.detail = message
        where = []
        if line is not None:
            where.append(f"строка {line}")
        if key is not None:
            where.append(f"поле {key}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")


class NumericError(ToolkitError):
    """Численная ошибка (вырожденность, отсутствие сходимости)."""


class DomainError(NumericError, ValueError):
    pass


class PoleError(NumericError):
    pass


class ResolutionError(NumericError):
    pass


class BracketingError(NumericError):
    pass


class UnsupportedError(NumericError, ValueError):
    pass


class DerivativeError(NumericError):
    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        self.bracket = bracket
        hint = f" (интервал {bracket[0]!r} .. {bracket[1]!r})" if bracket else ""
        super().__init__(f"{message}{hint}")


class EstimabilityError(NumericError):
    def __init__(self, message: str, null_direction=None):
        self.null_direction = null_direction
        super().__init__(message)


class SingularFisherError(NumericError):
    pass
