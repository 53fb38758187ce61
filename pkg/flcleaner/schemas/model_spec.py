from typing import Annotated, List, Literal, Tuple, Union
from pydantic import BaseModel, ConfigDict, Field


class DenseLayer(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["dense"] = "dense"
    in_features: int = Field(..., ge=1)
    out_features: int = Field(..., ge=1)

    def describe(self) -> str:
        return f"dense{{{self.in_features},{self.out_features}}}"


class Conv2dLayer(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["conv2d"] = "conv2d"
    in_channels: int = Field(..., ge=1)
    out_channels: int = Field(..., ge=1)
    kernel_size: int = Field(..., ge=1)

    def describe(self) -> str:
        return f"conv2d{{{self.in_channels},{self.out_channels},{self.kernel_size}}}"


class ReluLayer(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["relu"] = "relu"

    def describe(self) -> str:
        return "relu"


class SigmoidLayer(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["sigmoid"] = "sigmoid"

    def describe(self) -> str:
        return "sigmoid"


class MaxPool2Layer(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["maxpool2"] = "maxpool2"

    def describe(self) -> str:
        return "maxpool2"


class FlattenLayer(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["flatten"] = "flatten"

    def describe(self) -> str:
        return "flatten"


class SoftmaxLayer(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["softmax"] = "softmax"

    def describe(self) -> str:
        return "softmax"


LayerSpec = Annotated[
    Union[DenseLayer, Conv2dLayer, ReluLayer, SigmoidLayer, MaxPool2Layer, FlattenLayer, SoftmaxLayer],
    Field(discriminator="type"),
]

PARAMETRIC_LAYERS = (DenseLayer, Conv2dLayer)


class ModelSpec(BaseModel):
    """Descripción de la arquitectura: capas, forma de entrada y semilla de inicialización."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    layers: List[LayerSpec] = Field(..., min_length=1)
    input_shape: Tuple[int, int, int]
    seed: int = Field(0, ge=0)

    @property
    def parametric_layers(self) -> List[Union[DenseLayer, Conv2dLayer]]:
        return [layer for layer in self.layers if isinstance(layer, PARAMETRIC_LAYERS)]

    @property
    def num_classes(self) -> int:
        return self.parametric_layers[-1].out_features


def mlp_spec(
    input_shape: Tuple[int, int, int] = (1, 28, 28),
    hidden: int = 128,
    num_classes: int = 10,
    seed: int = 0,
) -> ModelSpec:
    """MLP de escritorio: 784 -> 128 (ReLU) -> 10 (softmax)."""
    features = input_shape[0] * input_shape[1] * input_shape[2]
    return ModelSpec(
        layers=[
            FlattenLayer(),
            DenseLayer(in_features=features, out_features=hidden),
            ReluLayer(),
            DenseLayer(in_features=hidden, out_features=num_classes),
            SoftmaxLayer(),
        ],
        input_shape=input_shape,
        seed=seed,
    )


def cnn_spec(
    input_shape: Tuple[int, int, int] = (1, 28, 28),
    num_classes: int = 10,
    seed: int = 0,
) -> ModelSpec:
    """CNN opcional: conv(8,3x3)-ReLU-pool-conv(16,3x3)-ReLU-pool-flatten-dense."""
    channels, height, width = input_shape
    for _ in range(2):
        height, width = (height - 2) // 2, (width - 2) // 2
    return ModelSpec(
        layers=[
            Conv2dLayer(in_channels=channels, out_channels=8, kernel_size=3),
            ReluLayer(),
            MaxPool2Layer(),
            Conv2dLayer(in_channels=8, out_channels=16, kernel_size=3),
            ReluLayer(),
            MaxPool2Layer(),
            FlattenLayer(),
            DenseLayer(in_features=16 * height * width, out_features=num_classes),
            SoftmaxLayer(),
        ],
        input_shape=input_shape,
        seed=seed,
    )
