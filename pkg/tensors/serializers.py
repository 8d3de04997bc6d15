import math

from rest_framework import serializers

from .codec import from_base64, to_base64
from .dense import DenseTensor
from .exceptions import TensorFormatError


class FiniteFloatField(serializers.FloatField):
    """Float that renders inf and nan as null, so reports stay strict JSON"""

    def to_representation(self, value):
        if value is None:
            return None
        value = float(value)
        if not math.isfinite(value):
            return None
        return value


class TensorField(serializers.Field):
    """DenseTensor (or ndarray) carried as a base64 DTF1 string"""

    default_error_messages = {
        'invalid': 'Not a valid base64 DTF1 tensor payload.',
    }

    def to_representation(self, value):
        return to_base64(DenseTensor.coerce(value))

    def to_internal_value(self, data):
        if not isinstance(data, str):
            self.fail('invalid')
        try:
            return from_base64(data)
        except TensorFormatError:
            self.fail('invalid')


class ShapeField(serializers.ListField):
    child = serializers.IntegerField(min_value=1)

    def to_representation(self, value):
        return [int(s) for s in value]
