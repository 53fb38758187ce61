# flcleaner/core/config.py
from pathlib import Path
from typing import Optional, Union
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import ValidationError, field_validator
import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from flcleaner.schemas.experiment import ExperimentConfig
from flcleaner.utils.exceptions import ConfigException


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="FLCLEANER_",
        env_file=".env",
        case_sensitive=True,
        env_file_encoding="utf-8",
        extra="ignore"
    )
    # Project
    PROJECT_NAME: str = "flcleaner"
    PROJECT_VERSION: str = "1.0.0"
    PROJECT_DESCRIPTION: str = "Simulador de aprendizaje federado con la defensa FL-CLEANER"

    # Environment
    ENVIRONMENT: str = "development"
    DEBUG: bool = False
    TESTING: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Parallelism (FLCLEANER_THREADS)
    THREADS: Optional[int] = None

    # Data and outputs
    DATA_DIR: str = "data"
    OUTPUT_DIR: str = "runs"

    @field_validator("THREADS", mode="before")
    @classmethod
    def parse_threads(cls, v):
        """Interpretar valores vacíos como 'sin límite explícito'."""
        if v in (None, ""):
            return None
        value = int(v)
        if value < 1:
            raise ValueError("THREADS debe ser >= 1")
        return value

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        """Normalizar el nivel de log a mayúsculas."""
        return str(v).upper()

    @property
    def max_workers(self) -> int:
        """Número efectivo de hilos para el trabajo por cliente."""
        if self.THREADS is not None:
            return self.THREADS
        return os.cpu_count() or 1

    @property
    def is_testing(self) -> bool:
        """Verificar si estamos en testing."""
        return self.TESTING or self.ENVIRONMENT.lower() == "testing"


# Configuración para diferentes entornos
class DevelopmentSettings(Settings):
    DEBUG: bool = True
    LOG_LEVEL: str = "DEBUG"


class ProductionSettings(Settings):
    DEBUG: bool = False
    LOG_LEVEL: str = "WARNING"


class TestingSettings(Settings):
    DEBUG: bool = True
    TESTING: bool = True
    LOG_LEVEL: str = "DEBUG"
    THREADS: Optional[int] = 1


def get_settings() -> Settings:
    """Factory para obtener configuración según el entorno."""
    environment = os.getenv("FLCLEANER_ENVIRONMENT", "development").lower()

    if environment == "production":
        return ProductionSettings()
    elif environment == "testing":
        return TestingSettings()
    else:
        return DevelopmentSettings()


# Usar la factory
settings = get_settings()


def parse_experiment_config(data: dict, source: str = "") -> ExperimentConfig:
    """Validar un diccionario de configuración de experimento."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<raíz>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigException(problems, source)


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """Leer y validar un fichero TOML de experimento."""
    path = Path(path)
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigException("el fichero no existe", str(path))
    except tomllib.TOMLDecodeError as e:
        raise ConfigException(f"TOML inválido: {e}", str(path))
    return parse_experiment_config(data, str(path))
