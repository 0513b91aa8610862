"""Chance-adjusted and standardized clustering comparison with Tsallis q-entropy."""

from .exceptions import (
    ConfigError,
    InvalidTableError,
    NumericalConsistencyError,
    UndefinedMeasureError,
    UnsupportedQError,
)
from .partition import (
    ContingencyTable,
    PairCounts,
    as_table,
    build_contingency,
    from_counts,
    pair_counts,
    read_label_file,
    read_table_file,
)
from .qparam import SHANNON, QParam, as_qparam
from .entropy import (
    conditional_entropy_q,
    entropy_q,
    jaccard,
    joint_entropy_q,
    mirkin_index,
    mutual_information_q,
    nmi_q,
    rand_index,
    tsallis_entropy,
    variation_of_information_q,
)
from .moments import (
    MomentReport,
    asymptotic_expected_jaccard,
    asymptotic_expected_measure,
    expected_joint_entropy_q,
    expected_mi_q,
    expected_phi_cell,
    expected_sum_phi,
    expected_vi_q,
    hypergeometric_pmf_series,
    moment_report,
    second_moment_sum_phi,
    variance_joint_entropy_q,
    variance_mi_q,
    variance_vi_q,
)
from .adjusted import (
    AdjustedReport,
    adjusted_report,
    ami_q,
    ami_q_multi,
    ari,
    avi_q,
    nvi_q,
    p_value_bound,
    smi_q,
    smi_q_multi,
    sri,
    svi_q,
)
from .oracle import (
    OracleMoments,
    RandomPartitionSpec,
    enumerate_moments,
    monte_carlo_moments,
    permutation_moments,
    random_partition,
)
from .report import MeasureReport, compare
from .experiments import ExperimentConfig, ExperimentResult, run_experiment
from ._version import __version__
