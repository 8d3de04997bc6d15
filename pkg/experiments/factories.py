import factory
from factory.django import DjangoModelFactory

from .models import ExperimentRun


class ExperimentRunFactory(DjangoModelFactory):
    class Meta:
        model = ExperimentRun

    command = 'select'
    config = factory.LazyAttribute(lambda run: {'seed': run.seed, 'lambdas': [0.0]})
    seed = factory.Sequence(lambda n: n)
    output_dir = factory.LazyAttribute(lambda run: f'runs/{run.command}-{run.seed}')
