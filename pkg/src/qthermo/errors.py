"""Exception hierarchy for qthermo."""


class QThermoError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(QThermoError, ValueError):
    """Input failed a structural check (shape, hermiticity, normalisation)."""


class InfiniteGap(QThermoError):
    """A bath qubit would need an infinite (or numerically unrepresentable) gap."""


class PopulationInversion(QThermoError):
    """A bath qubit would need a negative gap, i.e. a negative temperature."""


class RankDeficientTarget(QThermoError):
    """Target state has a zero eigenvalue and cannot be reached with thermal qubits."""


class InfeasiblePlan(QThermoError):
    """The requested number of steps cannot realise the path."""


class InfeasibleStep(QThermoError):
    """A single path step does not fit the current populations."""


class BranchOverflow(QThermoError):
    """Exact-mode branch bookkeeping grew past its cap."""


class AuditUnavailable(QThermoError):
    """The audit needs artefacts that the run did not record."""


class NotEnergyConserving(QThermoError):
    """Weight shifts do not compensate the system-bath energy change."""


class GridTooSmall(QThermoError):
    """A lattice wavefunction reached the edge of its periodic grid."""
