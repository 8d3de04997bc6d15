from rest_framework import serializers

from tensors.serializers import FiniteFloatField


class MatrixField(serializers.Field):
    """2-D array as nested lists; non-finite entries become null"""

    def to_representation(self, value):
        return [[FiniteFloatField().to_representation(v) for v in row] for row in value]


class SeparableCorrelationSetSerializer(serializers.Serializer):
    modes = serializers.ListField(child=serializers.IntegerField())
    iterations = serializers.IntegerField()
    converged = serializers.BooleanField()
    change_trace = serializers.ListField(child=FiniteFloatField())
    jittered = serializers.ListField(child=serializers.IntegerField())
    correlations = serializers.ListField(child=MatrixField())


class BiplotSerializer(serializers.Serializer):
    mode = serializers.IntegerField(allow_null=True)
    labels = serializers.ListField(child=serializers.CharField())
    eigenvalues = serializers.ListField(child=FiniteFloatField())
    explained_variance = serializers.ListField(child=FiniteFloatField())
    loadings = MatrixField()
