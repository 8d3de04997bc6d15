"""Validation of merged run configurations, one serializer per command."""
from django.conf import settings
from rest_framework import serializers

from regression.domain import INIT_CHOICES, RegressionSpec
from selection.domain import SCORING_CHOICES, U_MODE_CHOICES
from simulation.experiments import MACRO_LAMBDAS, MACRO_RANKS
from tensors.exceptions import TensorRegError

from .ingest import FILL_CHOICES, ORDER_CHOICES
from .runconfig import parse_float_list, parse_name_list, parse_rank_grid, parse_shape, parse_symmetric_grid


class _ParsedField(serializers.Field):
    """Text value run through a runconfig parser; lists pass through unchanged"""
    parser = None

    def to_internal_value(self, data):
        try:
            return type(self).parser(data)
        except TensorRegError as e:
            raise serializers.ValidationError(str(e))

    def to_representation(self, value):
        return [list(v) if isinstance(v, tuple) else v for v in value]


class ShapeTextField(_ParsedField):
    parser = staticmethod(parse_shape)


class RankGridField(_ParsedField):
    parser = staticmethod(parse_rank_grid)


class SymmetricGridField(_ParsedField):
    parser = staticmethod(parse_symmetric_grid)


class FloatListField(_ParsedField):
    parser = staticmethod(parse_float_list)


class NameListField(_ParsedField):
    parser = staticmethod(parse_name_list)


class RunConfigSerializer(serializers.Serializer):
    """Options shared by every command"""
    seed = serializers.IntegerField(min_value=0, default=lambda: settings.DEFAULT_SEED)
    output_dir = serializers.CharField(required=False)
    jobs = serializers.IntegerField(min_value=1, default=1)
    fill = serializers.ChoiceField(choices=FILL_CHOICES, default='error')
    order = serializers.ChoiceField(choices=ORDER_CHOICES, default='first-seen')
    value_column = serializers.CharField(default='value')


class RegressionControlsSerializer(RunConfigSerializer):
    lam = serializers.FloatField(min_value=0.0, default=0.0)
    max_iters = serializers.IntegerField(min_value=1, default=lambda: settings.ALS_MAX_ITERS)
    tol = serializers.FloatField(default=lambda: settings.ALS_TOL)
    init = serializers.ChoiceField(choices=INIT_CHOICES, default='random')
    center = serializers.BooleanField(default=True)
    regularize_core = serializers.BooleanField(default=False)

    def validate_tol(self, value):
        if not value > 0:
            raise serializers.ValidationError('tol must be > 0')
        return value

    def regression_spec(self, rank=()) -> RegressionSpec:
        data = self.validated_data
        return RegressionSpec(
            lam=data['lam'],
            tucker_rank=tuple(rank or data.get('rank', ())),
            max_iters=data['max_iters'],
            tol=data['tol'],
            seed=data['seed'],
            center=data['center'],
            init=data['init'],
            regularize_core=data['regularize_core'],
        )


class FitConfigSerializer(RegressionControlsSerializer):
    x = serializers.CharField()
    y = serializers.CharField()
    x_columns = NameListField(default=list)
    y_columns = NameListField(default=list)
    rank = ShapeTextField()


class RankGridMixin:
    """Explicit ranks and symmetric 'f-range;g-range' grids combine into one rank list"""

    def validate_rank_choice(self, attrs):
        if 'ranks' not in attrs and 'symmetric_ranks' not in attrs:
            raise serializers.ValidationError('Give ranks or symmetric_ranks')

    @property
    def rank_grid(self):
        data = self.validated_data
        return list(data.get('ranks', [])) + list(data.get('symmetric_ranks', []))


class SelectConfigSerializer(RankGridMixin, RegressionControlsSerializer):
    x = serializers.CharField()
    y = serializers.CharField()
    x_val = serializers.CharField(required=False)
    y_val = serializers.CharField(required=False)
    x_columns = NameListField(default=list)
    y_columns = NameListField(default=list)
    ranks = RankGridField(required=False)
    symmetric_ranks = SymmetricGridField(required=False)
    lambdas = FloatListField(default=lambda: [0.0])
    scoring = serializers.ChoiceField(choices=SCORING_CHOICES, default='train')
    u_mode = serializers.ChoiceField(choices=U_MODE_CHOICES, default='entries')

    def validate(self, attrs):
        self.validate_rank_choice(attrs)
        if attrs['scoring'] == 'holdout' and not (attrs.get('x_val') and attrs.get('y_val')):
            raise serializers.ValidationError('Holdout scoring needs x_val and y_val')
        return attrs


class SimulateRecoveryConfigSerializer(RankGridMixin, RegressionControlsSerializer):
    pattern = serializers.ChoiceField(choices=('tucker', 'smooth'), default='tucker')
    shape = ShapeTextField(default=lambda: (6, 5, 4))
    true_rank = ShapeTextField(default=lambda: (2, 2, 2))
    input_modes = serializers.IntegerField(min_value=1, default=1)
    samples = serializers.IntegerField(min_value=2, default=200)
    noise_sd = serializers.FloatField(min_value=0.0, default=0.0)
    ranks = RankGridField(required=False)
    symmetric_ranks = SymmetricGridField(required=False)
    lambdas = FloatListField(default=lambda: [0.0])

    def validate(self, attrs):
        self.validate_rank_choice(attrs)
        return attrs


class SimulateCollinearityConfigSerializer(RegressionControlsSerializer):
    snr = serializers.FloatField()
    seeds = serializers.IntegerField(min_value=1, default=20)
    shape = ShapeTextField(default=lambda: (100, 6, 19))
    rhos = FloatListField(default=lambda: [0.1, 0.95, 0.8])
    true_rank = ShapeTextField(default=lambda: (2, 3, 2, 3))
    ranks = RankGridField(default=lambda: list(MACRO_RANKS))
    lambdas = FloatListField(default=lambda: list(MACRO_LAMBDAS))

    def validate_snr(self, value):
        if not value > 0:
            raise serializers.ValidationError('snr must be > 0')
        return value


class TarForecastConfigSerializer(RegressionControlsSerializer):
    y = serializers.CharField()
    y_columns = NameListField(default=list)
    rank = ShapeTextField()
    lag = serializers.IntegerField(min_value=1, default=1)
    horizons = serializers.IntegerField(min_value=1, default=4)


class CompareConfigSerializer(RegressionControlsSerializer):
    y = serializers.CharField()
    y_columns = NameListField(default=list)
    split = FloatListField(default=lambda: [0.7, 0.2, 0.1])
    ranks = RankGridField(default=lambda: [(1, 1, 1, 1)])
    lambdas = FloatListField(default=lambda: [0.0])
    horizons = serializers.IntegerField(min_value=1, default=4)
    lag = serializers.IntegerField(min_value=1, default=1)
    block_mode = serializers.IntegerField(min_value=0, required=False)
    alpha = serializers.FloatField(min_value=0.0, max_value=1.0, default=lambda: settings.DM_ALPHA)


class ResidualCovConfigSerializer(RegressionControlsSerializer):
    residuals = serializers.CharField(required=False)
    residual_columns = NameListField(default=list)
    x = serializers.CharField(required=False)
    y = serializers.CharField(required=False)
    x_columns = NameListField(default=list)
    y_columns = NameListField(default=list)
    rank = ShapeTextField(required=False)
    include_sample_mode = serializers.BooleanField(default=False)
    flip_flop_max_iters = serializers.IntegerField(min_value=1, default=lambda: settings.FLIP_FLOP_MAX_ITERS)
    flip_flop_tol = serializers.FloatField(default=lambda: settings.FLIP_FLOP_TOL)

    def validate(self, attrs):
        if attrs.get('residuals'):
            return attrs
        if not (attrs.get('x') and attrs.get('y') and attrs.get('rank')):
            raise serializers.ValidationError('Give residuals, or x, y and rank to fit them')
        return attrs


class DmConfigSerializer(RunConfigSerializer):
    fe1 = serializers.CharField()
    fe2 = serializers.CharField()
    column = serializers.CharField(required=False)
    h = serializers.IntegerField(min_value=1, default=1)
    alpha = serializers.FloatField(min_value=0.0, max_value=1.0, default=lambda: settings.DM_ALPHA)

