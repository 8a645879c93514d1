import numpy as np

from csae.errors import TensorShapeError
from csae.layers.base import Layer


class Flatten(Layer):
    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._cached())


class Reshape(Layer):
    def output_shape(self, input_shape):
        target = tuple(self.spec.target_shape)
        if int(np.prod(input_shape)) != int(np.prod(target)):
            raise TensorShapeError(f"{self.name}: cannot reshape {input_shape} to {target}")
        return target

    def forward(self, x):
        self._cache = x.shape
        target = tuple(self.spec.target_shape)
        if int(np.prod(x.shape[1:])) != int(np.prod(target)):
            raise TensorShapeError(f"{self.name}: cannot reshape {x.shape[1:]} to {target}")
        return x.reshape((x.shape[0],) + target)

    def backward(self, grad_out):
        return grad_out.reshape(self._cached())
