"""confolkit: symbolic and numeric checks for confoliations and taming cones."""

from confolkit.grassmann import (
    UNDECIDED,
    FormAlgebra,
    FormExpr,
    ScalarExpr,
    UnsupportedScalar,
    wedge_all,
)
from confolkit.chartfield import (
    Chart,
    FormFieldNum,
    PointSample,
    d_fd,
    fd_jacobian,
    flow_rk4,
    pullback,
    sample_grid,
)
from confolkit.conetame import (
    FAIL,
    PASS,
    UNDETERMINED,
    BasedSubspace,
    SkewPair,
    cayley_interpolate,
    compatible_J,
    kernel_with_tol,
    pencil_positive,
    pfaffian,
    split_cotamed_J,
    taming_check,
)
from confolkit.confolcheck import (
    SKIPPED,
    BLobData,
    ConfoliationData,
    HyperplaneField,
    StableHamiltonianPair,
    Verdict,
    blob_pointwise_check,
    confoliation_check,
    open_book_confoliation,
    order_at,
    shs_check,
    transversely_exact_check,
)
from confolkit.approx import (
    DeformationFamily,
    PartitionedForm,
    StratumData,
    approx_verdict,
    compat_check,
    conformal_limit,
)

__version__ = "0.1.0"

__all__ = [
    "UNDECIDED",
    "FormAlgebra",
    "FormExpr",
    "ScalarExpr",
    "UnsupportedScalar",
    "wedge_all",
    "Chart",
    "FormFieldNum",
    "PointSample",
    "d_fd",
    "fd_jacobian",
    "flow_rk4",
    "pullback",
    "sample_grid",
    "FAIL",
    "PASS",
    "UNDETERMINED",
    "BasedSubspace",
    "SkewPair",
    "cayley_interpolate",
    "compatible_J",
    "kernel_with_tol",
    "pencil_positive",
    "pfaffian",
    "split_cotamed_J",
    "taming_check",
    "SKIPPED",
    "BLobData",
    "ConfoliationData",
    "HyperplaneField",
    "StableHamiltonianPair",
    "Verdict",
    "blob_pointwise_check",
    "confoliation_check",
    "open_book_confoliation",
    "order_at",
    "shs_check",
    "transversely_exact_check",
    "DeformationFamily",
    "PartitionedForm",
    "StratumData",
    "approx_verdict",
    "compat_check",
    "conformal_limit",
    "__version__",
]
