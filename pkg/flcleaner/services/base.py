from abc import ABC

from flcleaner.schemas.experiment import ExperimentConfig


class BaseService(ABC):
    """Clase base para servicios que operan sobre una configuración de experimento"""

    def __init__(self, config: ExperimentConfig):
        self.config = config

    @property
    def seeds(self):
        return self.config.seeds
