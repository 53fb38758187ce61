from pathlib import Path
import json

from flcleaner.models.dataset import Partition
from flcleaner.repositories.base import BaseRepository, PathLike
from flcleaner.utils.exceptions import ConfigException


class PartitionRepository(BaseRepository[Partition]):
    """Exportación de particiones como JSON {client_id: [índices]} para auditoría."""

    def dumps(self, partition: Partition) -> str:
        return json.dumps(partition.to_dict(), indent=None, separators=(",", ":")) + "\n"

    def save(self, entity: Partition, path: PathLike) -> Path:
        return self.write_text(path, self.dumps(entity))

    def load(self, path: PathLike) -> Partition:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigException(f"JSON de partición inválido: {e}", str(path))
        return Partition.from_dict(data)
