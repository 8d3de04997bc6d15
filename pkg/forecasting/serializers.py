from rest_framework import serializers

from selection.serializers import SelectionCellSerializer
from tensors.serializers import FiniteFloatField, ShapeField

from .domain import FAVORED_CHOICES


class DmResultSerializer(serializers.Serializer):
    statistic = FiniteFloatField()
    p_value = FiniteFloatField()
    horizon = serializers.IntegerField()
    n = serializers.IntegerField()
    loss = serializers.CharField()
    favored = serializers.ChoiceField(choices=FAVORED_CHOICES)
    degenerate = serializers.BooleanField()


class RejectionSummarySerializer(serializers.Serializer):
    tested = serializers.IntegerField()
    rejections = serializers.IntegerField()
    favor_tar = serializers.IntegerField()
    favor_var = serializers.IntegerField()
    favor_tar_share = FiniteFloatField()
    indistinguishable_share = FiniteFloatField()


class ComparisonReportSerializer(serializers.Serializer):
    """Headline numbers of a TAR vs VAR(1) comparison; per-cell detail goes to CSV"""
    segments = ShapeField()
    alpha = FiniteFloatField()
    lag = serializers.IntegerField(source='tar.lag')
    block_mode = serializers.IntegerField(source='var.block_mode', allow_null=True)
    var_blocks = serializers.SerializerMethodField()
    selected = SelectionCellSerializer(source='selection.best_cell')
    rmsfe_tar = serializers.SerializerMethodField()
    rmsfe_var = serializers.SerializerMethodField()
    rejections = serializers.SerializerMethodField()

    def _mean_by_horizon(self, forecasts):
        field = FiniteFloatField()
        return [field.to_representation(v) for v in forecasts.rmsfe_by_horizon().mean(axis=1)]

    def get_var_blocks(self, report):
        return len(report.var.blocks) if report.var is not None else 0

    def get_rmsfe_tar(self, report):
        return self._mean_by_horizon(report.tar_forecasts)

    def get_rmsfe_var(self, report):
        return self._mean_by_horizon(report.var_forecasts)

    def get_rejections(self, report):
        return RejectionSummarySerializer(report.rejection_summary()).data
