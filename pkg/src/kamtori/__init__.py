"""Invariant tori of near-integrable Hamiltonians by iterated averaging
over rational approximations, with dynamical verification.

The pipeline: describe the physical Hamiltonian (``IntegrableSpec``),
reduce it to a frequency-parameterized family (``reduce_to_param_form``),
run the quadratic iteration (``iterate``), and verify the embedded torus
against the original flow (``verify_torus``). The ``kam`` console script
drives the same pipeline from TOML configs.
"""

import os as _os

# Cap numerical thread pools before numpy is imported anywhere below.
if "KAM_THREADS" in _os.environ:
    _t = _os.environ["KAM_THREADS"]
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS",
                 "VECLIB_MAXIMUM_THREADS"):
        _os.environ.setdefault(_var, _t)

__version__ = "0.1.0"

from .diophantine import (  # noqa: E402
    ArithmeticProfile,
    EnumerationBudget,
    FrequencyVector,
    RationalBasis,
    RationalVector,
    build_profile,
    preset_frequency,
    psi,
    psi_argmin,
    rational_basis,
)
from .errors import KamError  # noqa: E402
from .parampoly import ParamPoly, ParamVector  # noqa: E402
from .series import (  # noqa: E402
    DiscardLedger,
    DomainParams,
    FourierTaylor,
    ParamHamiltonian,
    SeriesCaps,
)
from .transforms import Transform, TorusEmbedding  # noqa: E402
from .step import StepSettings, StepReport, kam_step  # noqa: E402
from .iterate import (  # noqa: E402
    IterationSettings,
    TorusResult,
    build_schedule,
    iterate,
)
from .reduction import (  # noqa: E402
    IntegrableSpec,
    PlacementResult,
    ReductionResult,
    action_polynomial,
    cosine_series,
    place_torus,
    reduce_to_param_form,
)
from .verify import (  # noqa: E402
    PhysicalFlow,
    VerificationResult,
    VerifySettings,
    verify_torus,
)
from .config import RunConfig, config_from_echo, load_config  # noqa: E402

__all__ = [
    "ArithmeticProfile",
    "DiscardLedger",
    "DomainParams",
    "EnumerationBudget",
    "FourierTaylor",
    "FrequencyVector",
    "IntegrableSpec",
    "IterationSettings",
    "KamError",
    "ParamHamiltonian",
    "ParamPoly",
    "ParamVector",
    "PhysicalFlow",
    "PlacementResult",
    "RationalBasis",
    "RationalVector",
    "ReductionResult",
    "RunConfig",
    "SeriesCaps",
    "StepReport",
    "StepSettings",
    "TorusEmbedding",
    "TorusResult",
    "Transform",
    "VerificationResult",
    "VerifySettings",
    "action_polynomial",
    "build_profile",
    "build_schedule",
    "config_from_echo",
    "cosine_series",
    "iterate",
    "kam_step",
    "load_config",
    "place_torus",
    "preset_frequency",
    "psi",
    "psi_argmin",
    "rational_basis",
    "reduce_to_param_form",
    "verify_torus",
    "__version__",
]
