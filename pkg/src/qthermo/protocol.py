"""Two-stage work extraction, its reverse, and per-step thermodynamic ledgers.

Stage 1 rotates the eigenbasis of the state onto the energy eigenbasis while
translating the weight by the energy each eigenvector loses. Stage 2 walks the
level populations to the thermal distribution in small transfers, each one a
swap with a fresh bath qubit whose population ratio matches the post-step pair.

Two simulation modes share one path:

``population``
    tracks level populations only; cheap, any number of steps.
``exact``
    additionally tracks the joint system-weight state as a classical ensemble of
    (level, weight offset) branches, which is the exact state because every
    operation maps basis states to shifted basis states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import BranchOverflow, InfeasiblePlan, InfeasibleStep, RankDeficientTarget, ValidationError
from .qcore import as_density, as_observable, eig_hermitian, entropy_from_probabilities
from .thermo import BathSpec, bath_qubit_for, energetics, population_energetics, thermal_populations
from .weight import GaussianWavepacket, OffsetMixture, WeightConfig

Mode = Literal["population", "exact"]

DEFAULT_BRANCH_CAP = 200_000
BRANCH_MERGE_TOL = 1e-12
# populations closer than this to their target are left alone by the planner
PLAN_EQUAL_TOL = 1e-13
STEP_MATCH_TOL = 1e-12
FULL_RANK_TOL = 1e-12


@dataclass(frozen=True)
class Stage1Plan:
    """Basis map |psi_n> -> |E_n> with weight shifts eps_n.

    ``populations`` are the eigenvalues of the state in descending order,
    ``energies`` the Hamiltonian eigenvalues ascending; column n of
    ``state_basis`` is sent to column n of ``energy_basis``.
    """

    populations: np.ndarray
    shifts: np.ndarray
    energies: np.ndarray
    state_basis: np.ndarray
    energy_basis: np.ndarray

    @property
    def work(self) -> float:
        return math.fsum(self.populations * self.shifts)


@dataclass(frozen=True)
class PathStep:
    """Transfer ``dp`` of probability from level ``i`` to level ``j`` (E_i <= E_j)."""

    i: int
    j: int
    dp: float
    pre: tuple[float, float]
    target: tuple[float, float]
    gap: float
    shift: float


@dataclass(frozen=True)
class StepRecord:
    stage: str
    dW: float
    dQ: float
    dU: float
    dS_sys: float
    dS_bath: float
    gap: float
    pair: tuple[int, int] | None = None

    @property
    def first_law_residual(self) -> float:
        return abs(self.dU - (self.dQ - self.dW))


@dataclass
class BranchEnsemble:
    """Classical joint state of system level and weight offset.

    ``offsets`` are weight displacements in length units (energy / mg).
    """

    probabilities: np.ndarray
    levels: np.ndarray
    offsets: np.ndarray

    @classmethod
    def from_populations(cls, pops, offsets=None) -> "BranchEnsemble":
        p = np.asarray(pops, dtype=float)
        a = np.zeros_like(p) if offsets is None else np.asarray(offsets, dtype=float)
        keep = p > 0
        return cls(p[keep].copy(), np.nonzero(keep)[0], a[keep].copy())

    def __len__(self) -> int:
        return int(self.probabilities.size)

    @property
    def total_probability(self) -> float:
        return math.fsum(self.probabilities)

    def level_marginal(self, dim: int) -> np.ndarray:
        return np.bincount(self.levels, weights=self.probabilities, minlength=dim)

    def mean_offset(self) -> float:
        return math.fsum(self.probabilities * self.offsets)

    def offset_variance(self) -> float:
        mu = self.mean_offset()
        return math.fsum(self.probabilities * (self.offsets - mu) ** 2)

    def merged(self, tol: float = BRANCH_MERGE_TOL) -> "BranchEnsemble":
        """Combine branches sharing a level and an offset (within ``tol``)."""
        if len(self) == 0:
            return self
        order = np.lexsort((self.offsets, self.levels))
        p, lv, a = self.probabilities[order], self.levels[order], self.offsets[order]
        new_group = np.ones(p.size, dtype=bool)
        new_group[1:] = (lv[1:] != lv[:-1]) | (np.abs(a[1:] - a[:-1]) > tol)
        gid = np.cumsum(new_group) - 1
        starts = np.nonzero(new_group)[0]
        return BranchEnsemble(
            np.bincount(gid, weights=p),
            lv[starts].copy(),
            a[starts].copy(),
        )

    def weight_mixture(self, base: GaussianWavepacket) -> OffsetMixture:
        """Marginal weight state as a mixture of translated ``base`` packets."""
        return OffsetMixture.from_entries(zip(self.probabilities, self.offsets), base)


@dataclass
class ProtocolLedger:
    """Everything recorded by one protocol run.

    ``free_energy_change`` is F(initial) - F(final) relative to the bath, and
    ``deficit`` is that drop minus the work actually extracted.
    """

    kind: str
    mode: str
    bath: BathSpec
    energies: np.ndarray
    steps: list[StepRecord]
    path: list[PathStep]
    initial_free_energy: float
    final_free_energy: float
    initial_populations: np.ndarray
    final_populations: np.ndarray
    stage1: Stage1Plan | None = None
    ensemble: BranchEnsemble | None = None
    weight: OffsetMixture | None = None
    mg: float = 1.0
    initial_entropy: float = 0.0

    @property
    def W(self) -> float:
        return math.fsum(s.dW for s in self.steps)

    @property
    def Q(self) -> float:
        return math.fsum(s.dQ for s in self.steps)

    @property
    def dU(self) -> float:
        return math.fsum(s.dU for s in self.steps)

    @property
    def dS_sys(self) -> float:
        return math.fsum(s.dS_sys for s in self.steps)

    @property
    def dS_bath(self) -> float:
        return math.fsum(s.dS_bath for s in self.steps)

    @property
    def free_energy_change(self) -> float:
        return self.initial_free_energy - self.final_free_energy

    @property
    def deficit(self) -> float:
        return self.free_energy_change - self.W

    @property
    def first_law_residual(self) -> float:
        """Largest |dU - (dQ - dW)| over the steps and the totals."""
        per_step = max((s.first_law_residual for s in self.steps), default=0.0)
        return max(per_step, abs(self.dU - (self.Q - self.W)))

    @property
    def exact_work(self) -> float | None:
        """Work read off the weight (mg times mean offset); exact mode only."""
        if self.ensemble is None:
            return None
        return self.mg * self.ensemble.mean_offset()

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "mode": self.mode,
            "temperature": self.bath.temperature,
            "steps": len(self.path),
            "W": self.W,
            "Q": self.Q,
            "dU": self.dU,
            "dS_sys": self.dS_sys,
            "dS_bath": self.dS_bath,
            "free_energy_change": self.free_energy_change,
            "deficit": self.deficit,
            "first_law_residual": self.first_law_residual,
        }


# ---------------------------------------------------------------- stage 1


def stage1_plan(rho, h) -> Stage1Plan:
    rho = as_density(rho)
    h = as_observable(h)
    if rho.shape != h.shape:
        raise ValidationError(f"state {rho.shape} and Hamiltonian {h.shape} differ in size")
    hs = eig_hermitian(h)
    rs = eig_hermitian(rho)
    # descending populations; equal eigenvalues keep eigenvector index order
    order = np.argsort(-rs.eigenvalues, kind="stable")
    p = np.clip(rs.eigenvalues[order], 0.0, None)
    p = p / p.sum()
    psi = rs.eigenvectors[:, order]
    mean_e = np.einsum("in,ij,jn->n", psi.conj(), h, psi).real
    return Stage1Plan(
        populations=p,
        shifts=mean_e - hs.eigenvalues,
        energies=hs.eigenvalues,
        state_basis=psi,
        energy_basis=hs.eigenvectors,
    )


def stage1(rho, h, mg: float = 1.0):
    """Rotate ``rho`` into the energy eigenbasis.

    Returns ``(plan, populations, ensemble, W1)`` where ``populations`` are the
    energy-level populations afterwards and ``ensemble`` holds one branch per
    non-zero population, displaced by eps_n / mg.
    """
    plan = stage1_plan(rho, h)
    ens = BranchEnsemble.from_populations(plan.populations, plan.shifts / mg)
    return plan, plan.populations.copy(), ens, plan.work


def _stage1_record(plan: Stage1Plan, inverse: bool = False) -> StepRecord:
    w1 = plan.work
    if inverse:
        w1 = -w1
    return StepRecord(stage="stage1-inverse" if inverse else "stage1",
                      dW=w1, dQ=0.0, dU=-w1, dS_sys=0.0, dS_bath=0.0, gap=0.0)


# ---------------------------------------------------------------- stage 2 planning


def _make_step(i, j, pre_i, pre_j, new_j, energies, bath) -> PathStep:
    new_i = (pre_i + pre_j) - new_j
    qubit = bath_qubit_for(new_i, new_j, bath)
    return PathStep(
        i=i,
        j=j,
        dp=new_j - pre_j,
        pre=(pre_i, pre_j),
        target=(new_i, new_j),
        gap=qubit.gap,
        shift=qubit.gap - (energies[j] - energies[i]),
    )


def plan_path(p, q_target, energies, N: int, bath: BathSpec) -> list[PathStep]:
    """Uniform-split path from populations ``p`` to ``q_target``.

    Levels holding more probability than the target hand it to the ground level,
    starting from the top; the ground level then hands probability to the levels
    that are short. Each pair gets ``N // (d - 1)`` equal transfers. ``energies``
    must be ascending and index the same levels as ``p``.

    Raises:
        RankDeficientTarget: a target population is zero.
        InfeasiblePlan: ``N`` gives fewer than one step per pair.
        PopulationInversion / InfiniteGap: a step's bath qubit is unrealisable.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q_target, dtype=float)
    e = np.asarray(energies, dtype=float)
    d = p.size
    if q.shape != p.shape or e.shape != p.shape:
        raise ValidationError("populations, target and energies must have equal length")
    if np.any(np.diff(e) < 0):
        raise ValidationError("energies must be ascending")
    for v, name in ((p, "populations"), (q, "target")):
        if np.any(v < -1e-15) or abs(v.sum() - 1.0) > 1e-10:
            raise ValidationError(f"{name} are not a probability distribution")
    if np.any(q <= 0):
        raise RankDeficientTarget("target populations must all be strictly positive")
    if N < 1:
        raise InfeasiblePlan(f"N must be at least 1, got {N}")

    moving = [k for k in range(1, d) if abs(p[k] - q[k]) > PLAN_EQUAL_TOL]
    if not moving:
        return []
    n_pair = N // (d - 1)
    if n_pair < 1:
        raise InfeasiblePlan(f"N={N} gives no steps for the {d - 1} level pairs")

    cur = p.copy()
    funnel = [k for k in range(d - 1, 0, -1) if k in moving and cur[k] > q[k]]
    spread = [k for k in range(d - 1, 0, -1) if k in moving and cur[k] < q[k]]
    path: list[PathStep] = []
    for k in funnel + spread:
        start = cur[k]
        for s in range(1, n_pair + 1):
            new_k = q[k] if s == n_pair else start + (q[k] - start) * s / n_pair
            step = _make_step(0, k, cur[0], cur[k], new_k, e, bath)
            donor = step.pre[0] if step.dp > 0 else step.pre[1]
            if abs(step.dp) > donor + 1e-15:
                raise InfeasiblePlan(f"step {len(path)} moves {step.dp} from a level holding {donor}")
            cur[0], cur[k] = step.target
            path.append(step)
    return path


def reverse_path(path: list[PathStep], energies, bath: BathSpec) -> list[PathStep]:
    """Steps that undo ``path`` in reverse order, with bath qubits for ``bath``."""
    e = np.asarray(energies, dtype=float)
    out = []
    for st in reversed(path):
        out.append(_make_step(st.i, st.j, st.target[0], st.target[1], st.pre[1], e, bath))
    return out


# ---------------------------------------------------------------- stage 2 execution


def _pair_entropy_change(before: tuple[float, float], after: tuple[float, float]) -> float:
    return entropy_from_probabilities(after) - entropy_from_probabilities(before)


def stage2_step(p, step: PathStep, bath: BathSpec, energies=None) -> tuple[np.ndarray, StepRecord]:
    """Apply one swap with a fresh bath qubit.

    ``energies`` is only used for dU; when omitted the step's own gap and shift
    supply it (dU = dQ - dW holds by construction either way).

    Raises:
        InfeasibleStep: the step's recorded pre-step pair does not match ``p``.
    """
    p = np.asarray(p, dtype=float)
    i, j = step.i, step.j
    if abs(p[i] - step.pre[0]) > STEP_MATCH_TOL or abs(p[j] - step.pre[1]) > STEP_MATCH_TOL:
        raise InfeasibleStep(
            f"step on pair ({i}, {j}) expects {step.pre}, populations are ({p[i]}, {p[j]})"
        )
    qi, qj = step.target
    if qi < 0 or qj < 0:
        raise InfeasibleStep(f"step on pair ({i}, {j}) would create negative populations")
    new = p.copy()
    new[i], new[j] = qi, qj
    dp = qj - p[j]
    total = qi + qj
    r0, r1 = qi / total, qj / total
    # the swap moves dp of bath excitation into the system pair
    bath_after = (r0 + dp, r1 - dp)
    de = (energies[j] - energies[i]) if energies is not None else step.gap - step.shift
    rec = StepRecord(
        stage="swap",
        dW=step.shift * dp,
        dQ=step.gap * dp,
        dU=de * dp,
        dS_sys=_pair_entropy_change((p[i], p[j]), (qi, qj)),
        dS_bath=_pair_entropy_change((r0, r1), bath_after),
        gap=step.gap,
        pair=(i, j),
    )
    return new, rec


def _swap_branches(ens: BranchEnsemble, step: PathStep, mg: float, cap: int) -> BranchEnsemble:
    total = step.target[0] + step.target[1]
    r0, r1 = step.target[0] / total, step.target[1] / total
    da = step.shift / mg
    p, lv, a = ens.probabilities, ens.levels, ens.offsets
    at_i = lv == step.i
    at_j = lv == step.j
    other = ~(at_i | at_j)
    # |E_i>|1> -> |E_j>|0> raises the weight; |E_j>|0> -> |E_i>|1> lowers it
    parts_p = [p[other], p[at_i] * r0, p[at_i] * r1, p[at_j] * r1, p[at_j] * r0]
    parts_l = [lv[other], lv[at_i], np.full(at_i.sum(), step.j), lv[at_j], np.full(at_j.sum(), step.i)]
    parts_a = [a[other], a[at_i], a[at_i] + da, a[at_j], a[at_j] - da]
    out = BranchEnsemble(
        np.concatenate(parts_p), np.concatenate(parts_l).astype(int), np.concatenate(parts_a)
    )
    keep = out.probabilities > 0
    out = BranchEnsemble(out.probabilities[keep], out.levels[keep], out.offsets[keep]).merged()
    if len(out) > cap:
        raise BranchOverflow(f"{len(out)} branches exceed the cap of {cap}; use population mode")
    return out


def _run_steps(pops, path, energies, bath, ensemble, mg, cap):
    records = []
    for st in path:
        pops, rec = stage2_step(pops, st, bath, energies)
        records.append(rec)
        if ensemble is not None:
            ensemble = _swap_branches(ensemble, st, mg, cap)
    return pops, records, ensemble


def _check_mode(mode: str, w: GaussianWavepacket | None) -> None:
    if mode not in ("population", "exact"):
        raise ValidationError(f"unknown mode {mode!r}")
    if mode == "exact" and w is None:
        raise ValidationError("exact mode needs a weight wavepacket")


def run_population_path(
    pops,
    path: list[PathStep],
    energies,
    bath: BathSpec,
    mode: Mode = "population",
    w: GaussianWavepacket | None = None,
    *,
    kind: str = "stage2",
    ensemble: BranchEnsemble | None = None,
    weight_config: WeightConfig = WeightConfig(),
    branch_cap: int = DEFAULT_BRANCH_CAP,
) -> ProtocolLedger:
    """Run a precomputed stage-2 path on an energy-diagonal state."""
    _check_mode(mode, w)
    p0 = np.asarray(pops, dtype=float)
    e = np.asarray(energies, dtype=float)
    mg = weight_config.mg
    if mode == "exact" and ensemble is None:
        ensemble = BranchEnsemble.from_populations(p0)
    if mode == "population":
        ensemble = None
    final, records, ens = _run_steps(p0.copy(), path, e, bath, ensemble, mg, branch_cap)
    return ProtocolLedger(
        kind=kind,
        mode=mode,
        bath=bath,
        energies=e,
        steps=records,
        path=list(path),
        initial_free_energy=population_energetics(p0, e, bath).F,
        final_free_energy=population_energetics(final, e, bath).F,
        initial_populations=p0,
        final_populations=final,
        ensemble=ens,
        weight=ens.weight_mixture(w) if ens is not None else None,
        mg=mg,
        initial_entropy=entropy_from_probabilities(p0),
    )


def run_extraction(
    rho,
    h,
    bath: BathSpec,
    N: int,
    mode: Mode = "population",
    w: GaussianWavepacket | None = None,
    *,
    weight_config: WeightConfig = WeightConfig(),
    branch_cap: int = DEFAULT_BRANCH_CAP,
) -> ProtocolLedger:
    """Extract work from ``rho`` by driving it to the thermal state of ``h``.

    The deficit F(rho) - F(tau) - W is positive and shrinks like 1/N (log N / N
    when a level starts empty).
    """
    _check_mode(mode, w)
    rho = as_density(rho)
    h = as_observable(h)
    mg = weight_config.mg
    plan, pops, ens, _ = stage1(rho, h, mg)
    q, _ = thermal_populations(plan.energies, bath)
    path = plan_path(pops, q, plan.energies, N, bath)
    ens = ens if mode == "exact" else None
    final, records, ens = _run_steps(pops.copy(), path, plan.energies, bath, ens, mg, branch_cap)
    return ProtocolLedger(
        kind="extraction",
        mode=mode,
        bath=bath,
        energies=plan.energies,
        steps=[_stage1_record(plan)] + records,
        path=path,
        initial_free_energy=energetics(rho, h, bath).F,
        final_free_energy=population_energetics(final, plan.energies, bath).F,
        initial_populations=plan.populations,
        final_populations=final,
        stage1=plan,
        ensemble=ens,
        weight=ens.weight_mixture(w) if ens is not None else None,
        mg=mg,
        initial_entropy=entropy_from_probabilities(plan.populations),
    )


def run_formation(
    target,
    h,
    bath: BathSpec,
    N: int,
    mode: Mode = "population",
    w: GaussianWavepacket | None = None,
    *,
    ensemble: BranchEnsemble | None = None,
    weight_config: WeightConfig = WeightConfig(),
    branch_cap: int = DEFAULT_BRANCH_CAP,
) -> ProtocolLedger:
    """Create ``target`` from the thermal state of ``h``.

    Runs the extraction path for ``target`` backwards and then the inverse of its
    stage-1 map. ``ensemble`` lets exact mode continue from an earlier run's
    system-weight state (its level marginal must be thermal).

    Raises:
        RankDeficientTarget: ``target`` has an eigenvalue below 1e-12.
    """
    _check_mode(mode, w)
    target = as_density(target)
    h = as_observable(h)
    if np.linalg.eigvalsh(target)[0] <= FULL_RANK_TOL:
        raise RankDeficientTarget("only full-rank states can be formed from a thermal state")
    mg = weight_config.mg
    plan = stage1_plan(target, h)
    e = plan.energies
    q, _ = thermal_populations(e, bath)
    path = reverse_path(plan_path(plan.populations, q, e, N, bath), e, bath)

    ens = None
    if mode == "exact":
        if ensemble is None:
            ens = BranchEnsemble.from_populations(q)
        else:
            marg = ensemble.level_marginal(len(q))
            if np.max(np.abs(marg - q)) > 1e-9:
                raise ValidationError("starting ensemble is not in the thermal state")
            ens = ensemble
    final, records, ens = _run_steps(q.copy(), path, e, bath, ens, mg, branch_cap)
    if ens is not None:
        # inverse stage 1: |E_n> -> |psi_n>, weight lowered by eps_n
        ens = BranchEnsemble(ens.probabilities, ens.levels, ens.offsets - plan.shifts[ens.levels] / mg)
    return ProtocolLedger(
        kind="formation",
        mode=mode,
        bath=bath,
        energies=e,
        steps=records + [_stage1_record(plan, inverse=True)],
        path=path,
        initial_free_energy=population_energetics(q, e, bath).F,
        final_free_energy=energetics(target, h, bath).F,
        initial_populations=q,
        final_populations=final,
        stage1=plan,
        ensemble=ens,
        weight=ens.weight_mixture(w) if ens is not None else None,
        mg=mg,
        initial_entropy=entropy_from_probabilities(q),
    )


# ---------------------------------------------------------------- fluctuations


@dataclass(frozen=True)
class OffsetHistogram:
    centers: np.ndarray
    masses: np.ndarray
    mean: float
    variance: float


def offset_histogram(e: BranchEnsemble, bin_width: float) -> OffsetHistogram:
    """Probability histogram of weight offsets, bins centred on multiples of ``bin_width``.

    ``mean`` and ``variance`` are computed from the branches, not the bins.
    """
    if not bin_width > 0:
        raise ValidationError("bin_width must be positive")
    idx = np.round(e.offsets / bin_width).astype(np.int64)
    uniq, inv = np.unique(idx, return_inverse=True)
    masses = np.bincount(inv, weights=e.probabilities)
    return OffsetHistogram(
        centers=uniq * bin_width,
        masses=masses,
        mean=e.mean_offset(),
        variance=e.offset_variance(),
    )
