from rest_framework import serializers

from tensors.serializers import FiniteFloatField, ShapeField, TensorField

from .domain import INIT_CHOICES, RegressionSpec


class RegressionSpecSerializer(serializers.Serializer):
    """Validates ALS controls and echoes them into reports"""
    lam = serializers.FloatField(min_value=0.0, default=0.0)
    tucker_rank = serializers.ListField(child=serializers.IntegerField(min_value=1), allow_empty=False)
    max_iters = serializers.IntegerField(min_value=1, required=False)
    tol = serializers.FloatField(min_value=0.0, required=False)
    center = serializers.BooleanField(default=True)
    init = serializers.ChoiceField(choices=INIT_CHOICES, default='random')
    seed = serializers.IntegerField(min_value=0, required=False)
    regularize_core = serializers.BooleanField(default=False)

    def validate_tol(self, value):
        if value <= 0:
            raise serializers.ValidationError('tol must be > 0')
        return value

    def to_spec(self) -> RegressionSpec:
        return RegressionSpec(**self.validated_data)


class TuckerCoefficientSerializer(serializers.Serializer):
    tucker_rank = ShapeField()
    input_shape = ShapeField()
    output_shape = ShapeField()
    parameter_count = serializers.IntegerField()
    core = TensorField()
    input_factors = serializers.ListField(child=TensorField())
    output_factors = serializers.ListField(child=TensorField())


class RegressionFitSerializer(serializers.Serializer):
    """JSON document for a fitted model, tensors embedded as base64 DTF1"""
    spec = serializers.SerializerMethodField()
    coefficient = TuckerCoefficientSerializer()
    intercept = TensorField()
    objective_trace = serializers.ListField(child=FiniteFloatField())
    ssr = FiniteFloatField()
    iterations = serializers.IntegerField()
    converged = serializers.BooleanField()
    singular_solves = serializers.SerializerMethodField()
    damped_core_steps = serializers.SerializerMethodField()
    output_condition_numbers = serializers.SerializerMethodField()
    init = serializers.SerializerMethodField()
    duration_seconds = serializers.SerializerMethodField()
    warnings = serializers.ListField(child=serializers.CharField())

    def get_spec(self, fit):
        return RegressionSpecSerializer(fit.spec).data

    def get_singular_solves(self, fit):
        return fit.diagnostics.get('singular_solves', 0)

    def get_damped_core_steps(self, fit):
        return fit.diagnostics.get('damped_core_steps', 0)

    def get_output_condition_numbers(self, fit):
        field = FiniteFloatField()
        return [field.to_representation(c) for c in fit.diagnostics.get('output_condition_numbers', [])]

    def get_init(self, fit):
        return fit.diagnostics.get('init')

    def get_duration_seconds(self, fit):
        if not self.context.get('timings', True):
            return None
        return fit.diagnostics.get('duration_seconds')
