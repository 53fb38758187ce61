from pathlib import Path
from typing import List, Optional
import json
import logging
import struct

from flcleaner.models.cvae_state import CvaeState
from flcleaner.models.weights import WeightVector
from flcleaner.repositories.base import BaseRepository, PathLike
from flcleaner.utils.exceptions import LengthMismatchException

logger = logging.getLogger(__name__)

_HEADER_LENGTH = struct.Struct("<Q")


class WeightCheckpointRepository(BaseRepository[WeightVector]):
    """Checkpoints de modelos: el formato binario de WeightVector tal cual."""

    def save(self, entity: WeightVector, path: PathLike) -> Path:
        return self.write_bytes(path, entity.to_bytes())

    def load(self, path: PathLike) -> WeightVector:
        return WeightVector.from_bytes(Path(path).read_bytes())


class CvaeCheckpointRepository(BaseRepository[CvaeState]):
    """Checkpoints del CVAE: longitud u64 LE, cabecera JSON UTF-8 y vector de parámetros."""

    def save(self, entity: CvaeState, path: PathLike) -> Path:
        header = json.dumps(entity.header(), sort_keys=True).encode("utf-8")
        data = _HEADER_LENGTH.pack(len(header)) + header + entity.to_vector().to_bytes()
        logger.debug(f"Saving CVAE checkpoint to {path} ({len(data)} bytes)")
        return self.write_bytes(path, data)

    def load(self, path: PathLike) -> CvaeState:
        data = Path(path).read_bytes()
        if len(data) < _HEADER_LENGTH.size:
            raise LengthMismatchException(_HEADER_LENGTH.size, len(data), "cabecera del checkpoint")
        (length,) = _HEADER_LENGTH.unpack_from(data)
        start = _HEADER_LENGTH.size
        if len(data) < start + length:
            raise LengthMismatchException(start + length, len(data), "cabecera JSON del checkpoint")
        header = json.loads(data[start:start + length].decode("utf-8"))
        vector = WeightVector.from_bytes(data[start + length:])
        return CvaeState.from_vector(header, vector)


def save_checkpoints(out_dir: PathLike, weights: WeightVector, cvae: Optional[CvaeState] = None) -> List[Path]:
    """Modelo global final (global.bin) y, si existe, el CVAE del servidor (cvae.ckpt)."""
    out_dir = Path(out_dir)
    written = [WeightCheckpointRepository().save(weights, out_dir / "global.bin")]
    if cvae is not None:
        written.append(CvaeCheckpointRepository().save(cvae, out_dir / "cvae.ckpt"))
    logger.info(f"Wrote {len(written)} checkpoints to {out_dir}")
    return written
