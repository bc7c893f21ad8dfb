"""`mlmoments` computes multivariate L-moments of point clouds. The L-moment of
index `alpha` is the projection of a quantile map onto the multivariate shifted
Legendre polynomial `L_alpha` (or, with a Gaussian reference measure, onto a
Hermite polynomial). The quantile map is either the empirical Rosenblatt
transport, built by sorting on one coordinate, or the monotone transport of
the uniform cube (or standard Gaussian) onto the empirical measure, found by
solving a semi-discrete transport problem over power diagrams. Closed-form
values of copula, Gaussian and LCIV models are provided as references.
"""
import importlib.metadata

from mlmoments.exceptions import *
from mlmoments.result import *
from mlmoments.polybasis import *
from mlmoments.rosenblatt import *
from mlmoments.transport import *
from mlmoments.estimators import *
from mlmoments.models import *
from mlmoments.experiment import *

try:
    __version__ = importlib.metadata.version(__name__)
except importlib.metadata.PackageNotFoundError:
    __version__ = '0.1.0'
