"""Work extraction and formation for individual quantum systems.

A system exchanges energy with a thermal bath (supplied as one tailored qubit
per step) and a weight that stores the work. Units: k_B = hbar = 1, entropies
in nats.
"""
from .errors import (
    AuditUnavailable,
    BranchOverflow,
    GridTooSmall,
    InfeasiblePlan,
    InfeasibleStep,
    InfiniteGap,
    NotEnergyConserving,
    PopulationInversion,
    QThermoError,
    RankDeficientTarget,
    ValidationError,
)
from .qcore import (
    eig_hermitian,
    ket_to_density,
    partial_trace,
    random_density,
    tensor,
    trace_distance,
    trace_norm,
    vn_entropy,
)
from .thermo import BathSpec, BathQubit, bath_qubit_for, energetics, thermal_populations, thermal_state
from .weight import GaussianWavepacket, OffsetMixture, WeightConfig, gram_matrix, mixture_entropy
from .protocol import (
    BranchEnsemble,
    PathStep,
    ProtocolLedger,
    StepRecord,
    plan_path,
    reverse_path,
    run_extraction,
    run_formation,
    run_population_path,
    stage1,
    stage1_plan,
    stage2_step,
)
from .carnot import CarnotReport, run_cycle, run_heat_pump
from .audit import (
    ShiftUnitary,
    cyclic_second_law_check,
    decohere,
    entropy_audit,
    strict_deficit,
    work_independence_check,
)

__version__ = "0.1.0"
