import factory

from .domain import RegressionSpec


class RegressionSpecFactory(factory.Factory):
    class Meta:
        model = RegressionSpec

    lam = 0.0
    tucker_rank = (1, 1)
    max_iters = 500
    tol = 1e-10
    center = True
    init = 'random'
    seed = factory.Sequence(lambda n: n)
    regularize_core = False
