from rest_framework import serializers

from tensors.serializers import FiniteFloatField, ShapeField

from .domain import SCORING_CHOICES, U_MODE_CHOICES


class SelectionCellSerializer(serializers.Serializer):
    index = serializers.IntegerField()
    rank = ShapeField()
    lam = FiniteFloatField()
    bic = FiniteFloatField()
    ssr = FiniteFloatField()
    u = serializers.IntegerField()
    w = serializers.IntegerField()
    converged = serializers.BooleanField()
    iterations = serializers.IntegerField()
    perfect_fit = serializers.BooleanField()
    status = serializers.CharField()
    error = serializers.CharField(allow_blank=True)


class SelectionReportSerializer(serializers.Serializer):
    """Grid report; the winning cell is repeated under 'best'"""
    scoring = serializers.ChoiceField(choices=SCORING_CHOICES)
    u_mode = serializers.ChoiceField(choices=U_MODE_CHOICES)
    best = SelectionCellSerializer(source='best_cell')
    tie_break_note = serializers.CharField()
    failed_count = serializers.SerializerMethodField()
    cells = SelectionCellSerializer(many=True)

    def get_failed_count(self, report):
        return len(report.failed_cells)
