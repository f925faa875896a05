from ._version import __version__

from .exceptions import CarkitError, ValidationError
from .tables import (
    DepthRange,
    DepthTable,
    IndexMode,
    TableSpace,
    WidthVector,
    class_index,
    make_adaptive_table,
    make_uniform_log_table,
    normalize_widths,
)
from .maps import (
    DepthMap,
    GroundTruthDepth,
    LabelKind,
    LabelMap,
    ProbMap,
    ProbSemantics,
    UncertaintyMap,
    UncertaintyMethod,
)
from .encode import (
    encode_labels,
    encode_onehot,
    encode_ordinal,
    encode_smooth1,
    encode_smooth2,
    encode_smooth3,
)
from .losses import (
    LossKind,
    ce_loss,
    finite_diff_check,
    multi_bce_loss,
    ordinal_loss,
    scale_invariant_loss,
    smooth_l1_loss,
    softmax,
    weighted_ce_loss,
)
from .decode import (
    DecodeMethod,
    decode,
    decode_adaptive,
    decode_argmax,
    decode_ordinal,
    decode_soft_weighted,
)
from .uncertainty import (
    e_dist,
    e_dist_adaptive,
    e_dist_ordinal,
    ensemble_variance,
    one_minus_mcp,
    shannon_entropy,
    uncertainty_map,
)
from .metrics import (
    DepthMetrics,
    MetricKind,
    SparsificationCurve,
    ause,
    depth_metrics,
    oracle_ranking,
    sparsification_curve,
)
from .io import read_array, write_array
