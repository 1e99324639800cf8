"""Evidence and divergence control objectives on finite models, with checked relations."""

__version__ = "0.1.0"

from .probcore import (  # noqa: E402
    AbsoluteContinuityError,
    CondTable,
    JointTable,
    ProbabilityError,
    VariableSpace,
    build_joint,
    condition,
    conditional_entropy,
    cross_entropy,
    entropy,
    expected_info_gain,
    kl,
    marginalize,
    mutual_information,
)
from .objectives import (  # noqa: E402
    DesireDistribution,
    GenerativeModel,
    PolicySimplex,
    desire_from_reward,
    divergence_objective,
    evidence_objective,
)
from .reports import RelationReport  # noqa: E402
