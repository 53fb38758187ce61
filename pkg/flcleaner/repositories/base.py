from abc import ABC, abstractmethod
from pathlib import Path
from typing import Generic, TypeVar, Union
import logging

from flcleaner.utils.exceptions import ReportWriteException

logger = logging.getLogger(__name__)

T = TypeVar('T')

PathLike = Union[str, Path]


class BaseRepository(ABC, Generic[T]):
    """Repositorio base de persistencia en ficheros"""

    @abstractmethod
    def save(self, entity: T, path: PathLike) -> Path:
        pass

    @abstractmethod
    def load(self, path: PathLike) -> T:
        pass

    def write_bytes(self, path: PathLike, data: bytes) -> Path:
        """Escribir creando directorios; los errores de E/S llevan la ruta."""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        except OSError as e:
            logger.error(f"Error writing {path}: {e}")
            raise ReportWriteException(str(path), e)
        return path

    def write_text(self, path: PathLike, text: str) -> Path:
        return self.write_bytes(path, text.encode("utf-8"))
