"""Group-bias auditing for speaker verification systems from trial scores."""

from .bias import (
    BiasReport,
    RunComparison,
    SubgroupResult,
    SupportFloor,
    Undefined,
    audit,
    compare_runs,
    error_rate_ratios,
    subgroup_bias,
    threshold_bias,
)
from .det import DetCurve, det_curve, probit
from .metrics import (
    DcfConfig,
    ErrorCurve,
    OperatingPoint,
    compute_error_curve,
    dcf,
    eer,
    min_dcf,
    operating_point_at,
)
from .trials import (
    SpeakerIdRule,
    SubgroupKey,
    TrialFileFormat,
    TrialRecord,
    TrialSet,
    assign_subgroups,
    composition_summary,
    parse_metadata,
    parse_trials,
    speaker_of,
)

__version__ = "0.1.0"
