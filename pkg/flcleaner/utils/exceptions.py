# flcleaner/utils/exceptions.py
from functools import wraps
from typing import Optional
import logging

logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


class FLCleanerException(Exception):
    """Excepción base para la aplicación."""

    def __init__(
        self,
        detail: str,
        error_type: str = "application_error",
        error_code: Optional[str] = None,
        exit_code: int = EXIT_RUNTIME_ERROR
    ):
        super().__init__(detail)
        self.detail = detail
        self.error_type = error_type
        self.error_code = error_code or f"ERR_{exit_code}"
        self.exit_code = exit_code


# =============================================================================
# MODEL / SHAPE EXCEPTIONS
# =============================================================================

class ShapeCompositionException(FLCleanerException):
    """Excepción cuando dos capas consecutivas no encajan."""

    def __init__(self, layer_index: int, left: str, right: str, reason: str = ""):
        if layer_index < 0:
            detail = f"La {left} -> capa 0 ({right}) no encajan"
        else:
            detail = f"Las capas {layer_index} ({left}) -> {layer_index + 1} ({right}) no encajan"
        if reason:
            detail += f": {reason}"
        super().__init__(
            detail=detail,
            error_type="shape_composition",
            error_code="MODEL_SHAPE"
        )
        self.layer_index = layer_index


class ShapeMismatchException(FLCleanerException):
    """Excepción cuando un tensor no tiene la forma esperada."""

    def __init__(self, what: str, expected, actual):
        super().__init__(
            detail=f"Forma inválida para {what}: se esperaba {expected}, se recibió {actual}",
            error_type="shape_mismatch",
            error_code="MODEL_INPUT"
        )


class EmptyDatasetException(FLCleanerException):
    """Excepción cuando una operación recibe un conjunto de datos vacío."""

    def __init__(self, operation: str = ""):
        detail = f"Conjunto de datos vacío en {operation}" if operation else "Conjunto de datos vacío"
        super().__init__(
            detail=detail,
            error_type="empty_dataset",
            error_code="DATA_EMPTY"
        )


# =============================================================================
# DATASET EXCEPTIONS
# =============================================================================

class IdxFormatException(FLCleanerException):
    """Excepción base para ficheros IDX inválidos."""

    def __init__(self, path: str, detail: str, error_type: str, error_code: str):
        super().__init__(
            detail=f"{path}: {detail}",
            error_type=error_type,
            error_code=error_code
        )
        self.path = path


class IdxMagicException(IdxFormatException):
    """Excepción para un número mágico IDX incorrecto."""

    def __init__(self, path: str, expected: int, actual: int):
        super().__init__(
            path,
            f"número mágico 0x{actual:08x}, se esperaba 0x{expected:08x}",
            "idx_bad_magic",
            "IDX_MAGIC"
        )


class IdxTruncatedException(IdxFormatException):
    """Excepción para ficheros IDX truncados."""

    def __init__(self, path: str, expected_bytes: int, actual_bytes: int):
        super().__init__(
            path,
            f"fichero truncado: {actual_bytes} bytes de datos, se esperaban {expected_bytes}",
            "idx_truncated",
            "IDX_TRUNCATED"
        )


class IdxCountMismatchException(IdxFormatException):
    """Excepción cuando el número de imágenes y etiquetas difiere."""

    def __init__(self, path: str, images: int, labels: int):
        super().__init__(
            path,
            f"{images} imágenes pero {labels} etiquetas",
            "idx_count_mismatch",
            "IDX_COUNT"
        )


class PartitionException(FLCleanerException):
    """Excepción para particiones imposibles de construir."""

    def __init__(self, detail: str):
        super().__init__(
            detail=detail,
            error_type="partition_error",
            error_code="PARTITION"
        )


class PartitionSupplyException(PartitionException):
    """Excepción cuando un cliente pide más muestras de las disponibles."""

    def __init__(self, client_index: int, demand: int, supply: int):
        super().__init__(
            f"El cliente {client_index} necesita {demand} muestras pero sus dos clases solo tienen {supply}"
        )
        self.error_code = "PARTITION_SUPPLY"
        self.client_index = client_index


class TriggerSetSizeException(FLCleanerException):
    """Excepción cuando el trigger set es mayor que el conjunto de test."""

    def __init__(self, requested: int, available: int):
        super().__init__(
            detail=f"Trigger set de {requested} muestras pedido, solo hay {available}",
            error_type="trigger_set_size",
            error_code="TRIGGER_SIZE"
        )


# =============================================================================
# NUMERIC EXCEPTIONS
# =============================================================================

class DivergenceException(FLCleanerException):
    """Excepción cuando una pérdida deja de ser finita."""

    def __init__(self, where: str, value: float):
        super().__init__(
            detail=f"Pérdida no finita en {where}: {value}",
            error_type="divergence",
            error_code="NUM_DIVERGENCE"
        )


class LengthMismatchException(FLCleanerException):
    """Excepción cuando los vectores de pesos tienen longitudes distintas."""

    def __init__(self, expected: int, actual: int, what: str = "vector de pesos"):
        super().__init__(
            detail=f"Longitud de {what} {actual}, se esperaba {expected}",
            error_type="length_mismatch",
            error_code="NUM_LENGTH"
        )


# =============================================================================
# VALIDATION EXCEPTIONS
# =============================================================================

class ValidationException(FLCleanerException):
    """Excepción para errores de validación."""

    def __init__(self, field: str, message: str):
        super().__init__(
            detail=f"Error de validación en {field}: {message}",
            error_type="validation_error",
            error_code="VALIDATION"
        )
        self.field = field


# =============================================================================
# CONFIGURATION EXCEPTIONS
# =============================================================================

class ConfigException(FLCleanerException):
    """Excepción para ficheros de configuración inválidos."""

    def __init__(self, detail: str, path: str = ""):
        super().__init__(
            detail=f"{path}: {detail}" if path else detail,
            error_type="config_error",
            error_code="CONFIG",
            exit_code=EXIT_CONFIG_ERROR
        )
        self.path = path


# =============================================================================
# RUNTIME EXCEPTIONS
# =============================================================================

class ExperimentAbortedException(FLCleanerException):
    """Excepción que aborta un experimento indicando la ronda."""

    def __init__(self, round_number: int, cause: Exception):
        super().__init__(
            detail=f"Experimento abortado en la ronda {round_number}: {cause}",
            error_type="experiment_aborted",
            error_code="RUN_ABORTED"
        )
        self.round_number = round_number
        self.cause = cause


class OracleMismatchException(FLCleanerException):
    """Excepción cuando una implementación no coincide con su oráculo."""

    def __init__(self, oracle: str, failures: int, instances: int):
        super().__init__(
            detail=f"Oráculo {oracle}: {failures} de {instances} instancias no coinciden",
            error_type="oracle_mismatch",
            error_code="ORACLE"
        )
        self.failures = failures


class ReportWriteException(FLCleanerException):
    """Excepción para errores de escritura de informes."""

    def __init__(self, path: str, error: Exception):
        super().__init__(
            detail=f"No se pudo escribir {path}: {error}",
            error_type="report_write",
            error_code="IO_WRITE"
        )
        self.path = path


# =============================================================================
# UTILITY FUNCTIONS
# =============================================================================

def handle_cli_errors(func):
    """Decorator que traduce la jerarquía de errores a códigos de salida."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except FLCleanerException as e:
            logger.error(f"{e.error_code}: {e.detail}")
            raise SystemExit(e.exit_code)
        except OSError as e:
            logger.error(f"I/O error: {e}")
            raise SystemExit(EXIT_RUNTIME_ERROR)
    return wrapper


def validate_unit_interval(value: float, field: str, closed_low: bool = True) -> float:
    """Valida que un valor esté en [0, 1] (o (0, 1] si closed_low es False)."""
    low_ok = value >= 0.0 if closed_low else value > 0.0
    if not (low_ok and value <= 1.0):
        interval = "[0, 1]" if closed_low else "(0, 1]"
        raise ValidationException(field, f"debe estar en {interval}, se recibió {value}")
    return value
