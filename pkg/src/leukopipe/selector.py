"""Population-based feature selection.

A sine-cosine position update drives the global search: each coordinate
moves around the incumbent best along a sine or cosine step whose
amplitude decays linearly over the run; a candidate keeps its previous
position when a step strictly worsens its fitness. Continuous positions
in [0, 1] are thresholded at 0.5 into binary feature masks. The best mask
is then refined by an adaptive hill climber whose single-bit-flip
operator cools down while its random-reset operator heats up, accepting
only strict fitness improvements.

Fitness of a mask is the validation F1 of a small logistic probe trained
on the masked features, minus a sparsity penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractError, DataError, FitnessError, ParameterError
from .seeding import substream

WORST_FITNESS = -1.0e9  # sentinel for empty masks; finite so traces stay readable

PROBE_EPOCHS = 200
PROBE_LEARNING_RATE = 0.5


@dataclass
class Candidate:
    """One search element: continuous position, derived mask, cached fitness."""

    position: np.ndarray
    mask: np.ndarray
    fitness: float | None = None

    @staticmethod
    def from_position(position: np.ndarray) -> "Candidate":
        position = np.asarray(position, dtype=np.float64)
        return Candidate(position=position, mask=position >= 0.5)

    def copy(self) -> "Candidate":
        return Candidate(self.position.copy(), self.mask.copy(), self.fitness)


@dataclass(frozen=True)
class SCAConfig:
    population_size: int = 20
    iterations: int = 30
    alpha: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ParameterError(f"population_size must be >= 2, got {self.population_size}")
        if self.iterations < 1:
            raise ParameterError(f"iterations must be >= 1, got {self.iterations}")
        if self.alpha <= 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class ABHCConfig:
    iterations: int = 30            # T_max
    shape: float = 2.0              # P, controls the flip-probability decay
    beta_min: float = 0.01
    beta_max: float = 0.1

    def __post_init__(self):
        if self.iterations < 1:
            raise ParameterError(f"iterations must be >= 1, got {self.iterations}")
        if not self.shape > 0:
            raise ParameterError(f"shape must be positive, got {self.shape}")
        if not 0.0 <= self.beta_min <= self.beta_max <= 1.0:
            raise ParameterError(
                f"need 0 <= beta_min <= beta_max <= 1, got ({self.beta_min}, {self.beta_max})")


@dataclass(frozen=True)
class FitnessSpec:
    """Masked-classification objective data.

    The validation rows must be disjoint from the training rows; the split
    machinery guarantees this by construction.
    """

    train_features: np.ndarray
    train_labels: np.ndarray
    val_features: np.ndarray
    val_labels: np.ndarray
    sparsity_weight: float = 0.01

    def __post_init__(self):
        if self.train_features.ndim != 2 or self.val_features.ndim != 2:
            raise DataError("feature matrices must be 2-D")
        if self.train_features.shape[1] != self.val_features.shape[1]:
            raise DataError(
                f"feature widths disagree: train {self.train_features.shape[1]} "
                f"vs val {self.val_features.shape[1]}")
        if len(self.train_labels) != len(self.train_features):
            raise DataError("train labels do not match train features")
        if len(self.val_labels) != len(self.val_features):
            raise DataError("val labels do not match val features")
        if self.sparsity_weight < 0:
            raise ParameterError(f"sparsity_weight must be >= 0, got {self.sparsity_weight}")

    @property
    def dim(self) -> int:
        return self.train_features.shape[1]


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    best_fitness: float
    mean_fitness: float
    selected_count: int


@dataclass
class SelectionResult:
    best: Candidate
    trace: list[TraceRow] = field(default_factory=list)


# ---------------------------------------------------------------------------
# schedules


def r1_schedule(t: int, total: int, alpha: float) -> float:
    """Linear amplitude decay: ``alpha`` at t=0, exactly 0 at t=total."""
    if total < 1:
        raise ParameterError(f"total iterations must be >= 1, got {total}")
    if not 0 <= t <= total:
        raise ParameterError(f"t must be in [0, {total}], got {t}")
    return alpha - t * alpha / total


def abhc_schedules(t: int, config: ABHCConfig) -> tuple[float, float]:
    """Flip probability (decaying from 1) and reset probability (growing)."""
    t_max = config.iterations
    if not 0 <= t <= t_max:
        raise ParameterError(f"t must be in [0, {t_max}], got {t}")
    inv_p = 1.0 / config.shape
    n_hc = 1.0 - t ** inv_p / t_max ** inv_p
    beta = config.beta_min + t * (config.beta_max - config.beta_min) / t_max
    return n_hc, beta


# ---------------------------------------------------------------------------
# sine-cosine global search


def sca_update_value(p: float, r1: float, r2: float, r3: float, r4: float,
                     d_best: float) -> float:
    """One coordinate update: sine branch for r4 < 0.5, cosine otherwise."""
    wave = math.sin(r2) if r4 < 0.5 else math.cos(r2)
    return p + r1 * wave * abs(r3 * d_best - p)


def sca_step(population: list[Candidate], best_position: np.ndarray, t: int,
             config: SCAConfig) -> list[Candidate]:
    """Move every candidate around the incumbent best and re-threshold.

    Candidate ``i`` draws from the substream ``(seed, "sca-step", t, i)``,
    so the result does not depend on evaluation order. Positions are
    clamped back into [0, 1].
    """
    r1 = r1_schedule(t, config.iterations, config.alpha)
    d = len(best_position)
    out = []
    for i, cand in enumerate(population):
        rng = substream(config.seed, "sca-step", t, i)
        r2 = rng.uniform(0.0, 2.0 * math.pi, d)
        r3 = rng.uniform(0.0, 2.0, d)
        r4 = rng.random(d)
        wave = np.where(r4 < 0.5, np.sin(r2), np.cos(r2))
        moved = cand.position + r1 * wave * np.abs(r3 * best_position - cand.position)
        out.append(Candidate.from_position(np.clip(moved, 0.0, 1.0)))
    return out


# ---------------------------------------------------------------------------
# fitness


def _train_logistic_probe(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float,
                                                                 np.ndarray, np.ndarray]:
    """Gradient-descent logistic fit; returns weights, bias, and scaler stats."""
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    xs = (x - mu) / sd
    n = len(y)
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(PROBE_EPOCHS):
        z = xs @ w + b
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        err = p - y
        w -= PROBE_LEARNING_RATE * (xs.T @ err) / n
        b -= PROBE_LEARNING_RATE * err.mean()
    return w, b, mu, sd


def _f1_score(pred: np.ndarray, truth: np.ndarray) -> float:
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def penalized_score(f1: float, selected: int, dim: int, weight: float) -> float:
    """F1 minus the sparsity penalty ``weight * selected / dim``."""
    return f1 - weight * selected / dim


def fitness(mask: np.ndarray, spec: FitnessSpec) -> float:
    """Validation F1 of the probe on the masked columns, minus sparsity cost.

    All-zero masks score the sentinel worst value instead of raising, so
    population updates stay total.
    """
    mask = np.asarray(mask).astype(bool)
    if mask.shape != (spec.dim,):
        raise DataError(f"mask shape {mask.shape} does not match dimension {spec.dim}")
    selected = int(mask.sum())
    if selected == 0:
        return WORST_FITNESS
    y_train = np.asarray(spec.train_labels)
    if len(np.unique(y_train)) < 2:
        raise FitnessError("training split contains a single class")
    w, b, mu, sd = _train_logistic_probe(spec.train_features[:, mask], y_train)
    xv = (spec.val_features[:, mask] - mu) / sd
    pred = (xv @ w + b >= 0.0).astype(int)
    f1 = _f1_score(pred, np.asarray(spec.val_labels))
    return penalized_score(f1, selected, spec.dim, spec.sparsity_weight)


def make_mask_objective(spec: FitnessSpec) -> Callable[[Candidate], float]:
    """Memoized mask fitness; masks repeat heavily as the search converges."""
    cache: dict[bytes, float] = {}

    def objective(cand: Candidate) -> float:
        key = np.packbits(cand.mask).tobytes()
        if key not in cache:
            cache[key] = fitness(cand.mask, spec)
        return cache[key]

    return objective


# ---------------------------------------------------------------------------
# run loops


def optimize(objective: Callable[[Candidate], float], dim: int,
             config: SCAConfig) -> SelectionResult:
    """Generic sine-cosine run over an arbitrary candidate objective.

    The initial population is uniform in [0, 1]^dim (candidate ``i`` uses
    substream ``(seed, "sca-init", i)``). Stepped positions replace a
    candidate only when they do not worsen its fitness (elitist retention;
    ties move so plateaus keep drifting). The incumbent best is replaced
    only on strict improvement, so the returned trace is monotone and the
    first-found candidate wins ties.
    """
    population = [
        Candidate.from_position(substream(config.seed, "sca-init", i).random(dim))
        for i in range(config.population_size)
    ]
    result = SelectionResult(best=None)

    def record(iteration: int) -> None:
        result.trace.append(TraceRow(
            iteration=iteration,
            best_fitness=result.best.fitness,
            mean_fitness=float(np.mean([c.fitness for c in population])),
            selected_count=int(result.best.mask.sum()),
        ))

    for cand in population:
        cand.fitness = objective(cand)
        if result.best is None or cand.fitness > result.best.fitness:
            result.best = cand.copy()
    record(0)
    for t in range(1, config.iterations + 1):
        proposals = sca_step(population, result.best.position, t, config)
        for i, prop in enumerate(proposals):
            prop.fitness = objective(prop)
            if prop.fitness >= population[i].fitness:
                population[i] = prop
            if prop.fitness > result.best.fitness:
                result.best = prop.copy()
        record(t)
    return result


def sca_run(spec: FitnessSpec, config: SCAConfig) -> SelectionResult:
    """Sine-cosine feature selection against the mask fitness."""
    return optimize(make_mask_objective(spec), spec.dim, config)


def abhc_refine(seed_candidate: Candidate, spec: FitnessSpec, config: ABHCConfig,
                rng: np.random.Generator,
                objective: Callable[[Candidate], float] | None = None) -> Candidate:
    """Greedy mask-space local search around an evaluated candidate.

    Per iteration the proposal flips one uniformly chosen bit with the
    decaying probability and independently re-randomizes each bit with the
    growing probability; it is accepted only on strict fitness improvement,
    so the returned fitness is never below the seed's.
    """
    if seed_candidate.fitness is None:
        raise ContractError("abhc_refine needs a seed candidate with evaluated fitness")
    if objective is None:
        objective = make_mask_objective(spec)
    current = seed_candidate.copy()
    d = len(current.mask)
    for t in range(1, config.iterations + 1):
        n_hc, beta = abhc_schedules(t, config)
        proposal = current.mask.copy()
        if rng.random() < n_hc:
            j = int(rng.integers(d))
            proposal[j] = ~proposal[j]
        resets = rng.random(d) < beta
        coins = rng.integers(0, 2, d).astype(bool)
        proposal[resets] = coins[resets]
        if np.array_equal(proposal, current.mask):
            continue
        cand = Candidate(position=proposal.astype(np.float64), mask=proposal)
        cand.fitness = objective(cand)
        if cand.fitness > current.fitness:
            current = cand
    return current


def run_selection(spec: FitnessSpec, sca_config: SCAConfig,
                  abhc_config: ABHCConfig) -> SelectionResult:
    """Global search followed by local refinement, sharing one fitness cache."""
    objective = make_mask_objective(spec)
    result = optimize(objective, spec.dim, sca_config)
    refine_rng = substream(sca_config.seed, "abhc")
    result.best = abhc_refine(result.best, spec, abhc_config, refine_rng,
                              objective=objective)
    return result
