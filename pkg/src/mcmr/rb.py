"""Interleaved randomized benchmarking with mid-circuit measurement and reset.

A benchmarking sequence of length ``l`` applies ``l`` random Clifford gates,
each followed by the interleaved operations under test (measurement and/or
reset windows on a neighbouring "focus" ion, which leak crosstalk light onto
the idle "probe" qubit), and ends with the gate that folds the whole sequence
into a net Pauli drawn from {I, X, Y, Z}.  Sequences ending in I or Z should
leave the probe dark, X or Y bright; the fraction of correct outcomes decays
as ``A * base**l + 1/2`` and the dark-outcome fraction pooled over a
*balanced* Pauli mix isolates the leakage dynamics,
``p_L(l) = intercept * t_minus**(l+1) + asymptote``.

The module provides:

* sequence generation with a balanced (or deliberately unbalanced) Pauli mix,
* exact per-sequence survival probabilities in the Liouville picture,
* the exact all-sequences average via a transfer-matrix accumulation that is
  algebraically identical to enumerating all ``24**l`` sequences,
* closed-form decay coefficients from the channel's eigensystem,
* binomial sampling, the two decay fits, scattering-probability estimators,
  and a semi-parametric bootstrap,
* a classical per-shot simulation of the focus ion (preparation, readout,
  depumping, reset) feeding mid-circuit SPAM reports,
* experiment configuration objects and a campaign runner.

Randomness policy: every public entry point takes a seed (or an
``numpy.random.SeedSequence``) and derives independent child streams for
sequence generation, shot sampling, focus trajectories and the bootstrap, so
campaign outputs are reproducible byte for byte, serial or parallel.
"""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from . import channels, clifford, liouville
from .errors import ConfigError, DataFormatError, FitError

DEFAULT_LENGTHS = (2, 11, 81)
DEFAULT_SEQUENCES_PER_LENGTH = 40
DEFAULT_SHOTS = 100

PAULI_LABELS = clifford.PAULI_LABELS
_DARK_PAULIS = ("I", "Z")
_BRIGHT_PAULIS = ("X", "Y")

INTERLEAVED_OPS = ("measure", "reset", "x_pi", "random_su2")

DATASET_HEADER = ("length", "seq_id", "pauli", "target_outcome",
                  "shots", "dark_counts", "bright_counts")
FOCUS_HEADER = ("length", "seq_id", "slot", "meas_index", "shots", "errors")

#: fraction of bootstrap refits allowed to fail before the analysis is
#: declared unstable
BOOTSTRAP_FAILURE_BUDGET = 0.10


def _as_matrix(channel_or_matrix) -> np.ndarray:
    m = getattr(channel_or_matrix, "matrix", channel_or_matrix)
    return np.asarray(m, dtype=float)


# ---------------------------------------------------------------------------
# state preparation and measurement model (probe qubit)


@dataclass(frozen=True)
class SpamModel:
    """Preparation and readout imperfections of the probe qubit.

    ``prep_flip`` prepares |1> instead of |0>; ``prep_leak`` prepares the
    maximally mixed extra-level state; readout confusions flip the reported
    outcome.  The two effect vectors always sum to the identity.
    """

    prep_flip: float = 0.0
    prep_leak: float = 0.0
    dark_to_bright: float = 0.0
    bright_to_dark: float = 0.0

    def __post_init__(self):
        for name in ("prep_flip", "prep_leak", "dark_to_bright", "bright_to_dark"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v!r}")
        if self.prep_flip + self.prep_leak > 1.0:
            raise ConfigError("prep_flip + prep_leak must not exceed 1")

    def prep_vector(self) -> np.ndarray:
        qubit = 1.0 - self.prep_leak
        rho = np.diag([
            qubit * (1.0 - self.prep_flip),
            qubit * self.prep_flip,
            self.prep_leak / 2.0,
            self.prep_leak / 2.0,
        ])
        return liouville.to_supervector(rho)

    def dark_effect(self) -> np.ndarray:
        return ((1.0 - self.dark_to_bright) * liouville.dark_effect_vector()
                + self.bright_to_dark * liouville.bright_effect_vector())

    def bright_effect(self) -> np.ndarray:
        return (self.dark_to_bright * liouville.dark_effect_vector()
                + (1.0 - self.bright_to_dark) * liouville.bright_effect_vector())

    def to_dict(self) -> dict:
        return {"prep_flip": self.prep_flip, "prep_leak": self.prep_leak,
                "dark_to_bright": self.dark_to_bright,
                "bright_to_dark": self.bright_to_dark}

    @classmethod
    def from_dict(cls, data: dict) -> "SpamModel":
        extra = set(data) - {"prep_flip", "prep_leak", "dark_to_bright", "bright_to_dark"}
        if extra:
            raise ConfigError(f"unknown SPAM keys: {', '.join(sorted(extra))}")
        return cls(**{k: float(v) for k, v in data.items()})


PERFECT_SPAM = SpamModel()


# ---------------------------------------------------------------------------
# sequences


@dataclass(frozen=True)
class RBSequence:
    length: int
    seq_id: int
    clifford_indices: tuple[int, ...]
    pauli: str
    inversion_index: int
    target_outcome: int


def generate_sequences(lengths=DEFAULT_LENGTHS,
                       sequences_per_length: int = DEFAULT_SEQUENCES_PER_LENGTH,
                       seed=None, rng: np.random.Generator | None = None,
                       balanced: bool = True) -> list[RBSequence]:
    """Draw random benchmarking sequences.

    With ``balanced=True`` (the default) exactly half of each length's
    sequences target the dark outcome (net Pauli I or Z) and half the bright
    one (X or Y), which is what makes the pooled dark fraction insensitive to
    the ordinary decay.  ``balanced=False`` draws the net Pauli uniformly at
    random per sequence, which inflates the pooled variance (useful as a
    negative control).
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    lengths = tuple(int(l) for l in lengths)
    if any(l < 1 for l in lengths):
        raise ConfigError("sequence lengths must be positive")
    if sequences_per_length < 1:
        raise ConfigError("sequences_per_length must be positive")
    if balanced and sequences_per_length % 2:
        raise ConfigError("balanced sampling needs an even sequences_per_length")

    sequences = []
    for length in lengths:
        if balanced:
            half = sequences_per_length // 2
            labels = list(rng.choice(_DARK_PAULIS, half))
            labels += list(rng.choice(_BRIGHT_PAULIS, half))
            labels = [labels[i] for i in rng.permutation(sequences_per_length)]
        else:
            labels = list(rng.choice(PAULI_LABELS, sequences_per_length))
        for seq_id, label in enumerate(labels):
            indices = tuple(int(i) for i in rng.integers(0, clifford.GROUP_ORDER, length))
            inv = clifford.inversion_element(indices, label)
            sequences.append(RBSequence(
                length=length, seq_id=seq_id, clifford_indices=indices,
                pauli=str(label), inversion_index=inv.index,
                target_outcome=clifford.target_outcome(str(label))))
    return sequences


# ---------------------------------------------------------------------------
# exact survival


def survival_dark_probabilities(sequences, slot_channel,
                                spam: SpamModel = PERFECT_SPAM) -> np.ndarray:
    """Dark-outcome probability of every sequence, exactly.

    ``slot_channel`` is the error applied after every random Clifford (the
    interleaved crosstalk, composed with any gate error); the inversion gate
    is applied clean.
    """
    slot = _as_matrix(slot_channel)
    gates = clifford.superop_table()
    stepped = np.einsum("ij,njk->nik", slot, gates)
    prep = spam.prep_vector()
    effect = spam.dark_effect()
    out = np.empty(len(sequences))
    for i, seq in enumerate(sequences):
        v = prep
        for idx in seq.clifford_indices:
            v = stepped[idx] @ v
        v = gates[seq.inversion_index] @ v
        out[i] = liouville.born_probability(effect, v)
    return out


def exact_average_survival(slot_channel, spam: SpamModel, length: int,
                           paulis=PAULI_LABELS) -> dict:
    """Average survival over *all* sequences of a length, for each net Pauli.

    Propagates one accumulator per possible running net element; after the
    final step each accumulator is closed with that net element's inversion.
    Because the survival depends on a sequence only through the running
    product, this equals the literal average over all ``24**l`` sequences at
    ``O(l * 24^2)`` cost.

    Returns ``{(pauli, outcome): probability}`` for both outcomes.
    """
    if length < 1:
        raise ValueError("length must be positive")
    slot = _as_matrix(slot_channel)
    gates = clifford.superop_table()
    stepped = np.einsum("ij,njk->nik", slot, gates)
    table = clifford.clifford_table()
    compose_into = [[clifford.compose(table[i], table[d]).index
                     for d in range(clifford.GROUP_ORDER)]
                    for i in range(clifford.GROUP_ORDER)]
    prep = spam.prep_vector()

    states = [stepped[i] @ prep for i in range(clifford.GROUP_ORDER)]
    for _ in range(length - 1):
        nxt = [np.zeros(liouville.N_BASIS) for _ in range(clifford.GROUP_ORDER)]
        for d in range(clifford.GROUP_ORDER):
            moved = np.einsum("nij,j->ni", stepped, states[d])
            for i in range(clifford.GROUP_ORDER):
                nxt[compose_into[i][d]] += moved[i]
        states = nxt

    effects = {0: spam.dark_effect(), 1: spam.bright_effect()}
    norm = float(clifford.GROUP_ORDER) ** length
    out = {}
    for label in paulis:
        pauli = clifford.pauli_element(label)
        totals = {0: 0.0, 1: 0.0}
        for d in range(clifford.GROUP_ORDER):
            inv = clifford.compose(pauli, clifford.inverse(table[d]))
            v = gates[inv.index] @ states[d]
            for k in (0, 1):
                totals[k] += float(effects[k] @ v)
        for k in (0, 1):
            out[(label, k)] = totals[k] / norm
    return out


def _identity_block_superop(block: np.ndarray) -> np.ndarray:
    """Embed a 2x2 matrix acting on the (qubit identity, extra identity) span."""
    out = np.zeros((liouville.N_BASIS, liouville.N_BASIS))
    idx = (0, 4)
    for a in range(2):
        for b in range(2):
            out[idx[a], idx[b]] = block[a, b]
    return out


@dataclass(frozen=True)
class DecayCoefficients:
    """Closed-form survival ``A * base**l + B * t_minus**l + C`` per (pauli, outcome)."""

    base: float
    t_minus: float
    amplitudes: dict
    intercepts: dict
    asymptotes: dict
    degenerate: bool

    def survival(self, pauli: str, outcome: int, length: int) -> float:
        a = self.amplitudes[(pauli, outcome)]
        b = self.intercepts[outcome]
        c = self.asymptotes[outcome]
        return a * self.base ** length + b * self.t_minus ** length + c


def decay_coefficients(slot_channel, spam: SpamModel = PERFECT_SPAM) -> DecayCoefficients:
    """Exact decay constants and coefficients of the sequence-averaged survival.

    The Clifford average of the slot channel reduces the reachable dynamics
    to the qubit Pauli block (factor ``base`` per step) plus a 2x2 population
    exchange between the subspace identities, whose eigensystem supplies the
    ``t_minus`` branch and the constant.
    """
    ch = slot_channel if isinstance(slot_channel, channels.LeakageChannel) \
        else channels.LeakageChannel(_as_matrix(slot_channel))
    tw = channels.twirl(ch)
    eig = channels.decay_eigensystem(tw.leakage, tw.seepage)
    prep = spam.prep_vector()
    effects = {0: spam.dark_effect(), 1: spam.bright_effect()}
    traceless_proj = np.zeros((liouville.N_BASIS, liouville.N_BASIS))
    for i in (1, 2, 3):
        traceless_proj[i, i] = 1.0

    amplitudes, intercepts, asymptotes = {}, {}, {}
    for k in (0, 1):
        effect = effects[k]
        if eig.degenerate:
            intercepts[k] = 0.0
            asymptotes[k] = float(effect @ _identity_block_superop(np.eye(2)) @ prep)
        else:
            intercepts[k] = float(effect @ _identity_block_superop(eig.pi_minus) @ prep)
            asymptotes[k] = float(effect @ _identity_block_superop(eig.pi_plus) @ prep)
        for label in PAULI_LABELS:
            pauli_gate = clifford.superop(clifford.pauli_element(label))
            amplitudes[(label, k)] = float(effect @ pauli_gate @ traceless_proj @ prep)
    return DecayCoefficients(base=tw.base, t_minus=eig.t_minus,
                             amplitudes=amplitudes, intercepts=intercepts,
                             asymptotes=asymptotes, degenerate=eig.degenerate)


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class DatasetRecord:
    length: int
    seq_id: int
    pauli: str
    target_outcome: int
    shots: int
    dark_counts: int

    @property
    def bright_counts(self) -> int:
        return self.shots - self.dark_counts

    @property
    def dark_fraction(self) -> float:
        return self.dark_counts / self.shots

    @property
    def correct_fraction(self) -> float:
        hits = self.dark_counts if self.target_outcome == 0 else self.bright_counts
        return hits / self.shots


@dataclass(frozen=True)
class RBDataset:
    records: tuple[DatasetRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise DataFormatError("dataset has no records")
        for r in self.records:
            if r.shots <= 0:
                raise DataFormatError(f"non-positive shots in record {r}")
            if not 0 <= r.dark_counts <= r.shots:
                raise DataFormatError(f"dark_counts outside [0, shots] in record {r}")
            if r.pauli not in PAULI_LABELS:
                raise DataFormatError(f"unknown pauli {r.pauli!r}")
            if r.target_outcome != clifford.target_outcome(r.pauli):
                raise DataFormatError(
                    f"target_outcome {r.target_outcome} inconsistent with pauli "
                    f"{r.pauli!r} (length {r.length}, seq {r.seq_id})")

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(sorted({r.length for r in self.records}))

    def by_length(self) -> dict:
        groups: dict[int, list[DatasetRecord]] = {}
        for r in self.records:
            groups.setdefault(r.length, []).append(r)
        return groups

    @classmethod
    def from_counts(cls, sequences, shots: int, dark_counts) -> "RBDataset":
        records = tuple(
            DatasetRecord(length=s.length, seq_id=s.seq_id, pauli=s.pauli,
                          target_outcome=s.target_outcome, shots=int(shots),
                          dark_counts=int(d))
            for s, d in zip(sequences, dark_counts))
        return cls(records)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(DATASET_HEADER)
            for r in self.records:
                writer.writerow([r.length, r.seq_id, r.pauli, r.target_outcome,
                                 r.shots, r.dark_counts, r.bright_counts])

    @classmethod
    def from_csv(cls, path) -> "RBDataset":
        records = []
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != DATASET_HEADER:
                raise DataFormatError(
                    f"bad dataset header in {path}: expected {','.join(DATASET_HEADER)}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(DATASET_HEADER):
                    raise DataFormatError(f"{path}:{lineno}: wrong column count")
                try:
                    length, seq_id = int(row[0]), int(row[1])
                    pauli = row[2].strip()
                    target, shots = int(row[3]), int(row[4])
                    dark, bright = int(row[5]), int(row[6])
                except ValueError as exc:
                    raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
                if dark + bright != shots:
                    raise DataFormatError(
                        f"{path}:{lineno}: dark + bright != shots")
                records.append(DatasetRecord(length, seq_id, pauli, target,
                                             shots, dark))
        try:
            return cls(tuple(records))
        except DataFormatError as exc:
            raise DataFormatError(f"{path}: {exc}") from exc


def simulate_dataset(sequences, slot_channel, shots: int,
                     spam: SpamModel = PERFECT_SPAM, seed=None,
                     rng: np.random.Generator | None = None) -> RBDataset:
    """Binomial shot sampling of the exact per-sequence dark probabilities."""
    if shots < 1:
        raise ConfigError("shots must be positive")
    if rng is None:
        rng = np.random.default_rng(seed)
    p_dark = survival_dark_probabilities(sequences, slot_channel, spam)
    dark = rng.binomial(shots, p_dark)
    return RBDataset.from_counts(sequences, shots, dark)


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class PerLengthStats:
    length: int
    n_sequences: int
    mean: float
    sem: float


@dataclass(frozen=True)
class StandardFit:
    """Correct-outcome decay ``amplitude * base**l + 1/2``.

    The 1/2 asymptote is exact for a balanced Pauli mix (the leakage branch
    cancels between dark- and bright-targeted sequences), so it is pinned.
    """

    amplitude: float
    base: float
    per_length: tuple[PerLengthStats, ...]


@dataclass(frozen=True)
class LeakageFit:
    """Pooled dark-outcome decay ``intercept * t_minus**(l+1) + asymptote``."""

    intercept: float
    asymptote: float
    t_minus: float
    leakage: float
    seepage: float
    per_length: tuple[PerLengthStats, ...]


def _per_length_stats(dataset: RBDataset, value) -> tuple[PerLengthStats, ...]:
    stats = []
    for length, group in sorted(dataset.by_length().items()):
        vals = np.array([value(r) for r in group])
        sem = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        stats.append(PerLengthStats(length, vals.size, float(vals.mean()), sem))
    return tuple(stats)


def _fit_sigma(stats) -> np.ndarray | None:
    sems = np.array([s.sem for s in stats])
    if np.any(sems <= 0):
        return None
    return sems


def fit_standard(dataset: RBDataset) -> StandardFit:
    """Fit the correct-outcome fractions to ``amplitude * base**l + 1/2``."""
    stats = _per_length_stats(dataset, lambda r: r.correct_fraction)
    if len(stats) < 2:
        raise DataFormatError("standard fit needs at least two distinct lengths")
    lengths = np.array([s.length for s in stats], dtype=float)
    means = np.array([s.mean for s in stats])

    first, last = means[0] - 0.5, means[-1] - 0.5
    if first > 1e-12 and last > 1e-12 and lengths[-1] > lengths[0]:
        base0 = float(np.clip((last / first) ** (1.0 / (lengths[-1] - lengths[0])),
                              1e-6, 1.0))
    else:
        base0 = 0.9
    amp0 = float(np.clip(first / base0 ** lengths[0] if first > 0 else 0.4,
                         1e-6, 0.75))
    try:
        with warnings.catch_warnings():
            # parameter covariance is unused (uncertainties come from the bootstrap)
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(
                lambda l, a, b: a * np.power(b, l) + 0.5,
                lengths, means, p0=[amp0, base0], sigma=_fit_sigma(stats),
                bounds=([0.0, 1e-9], [0.75, 1.0]), maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"standard decay fit failed: {exc}") from exc
    amplitude, base = map(float, popt)
    if not (np.isfinite(amplitude) and np.isfinite(base)):
        raise FitError("standard decay fit returned non-finite parameters")
    return StandardFit(amplitude, base, stats)


def fit_leakage(dataset: RBDataset, ls_ratio: float = 1.0) -> LeakageFit:
    """Fit pooled dark-outcome fractions to ``B * t**(l+1) + C``.

    ``ls_ratio`` is the expected leakage/seepage ratio of the interleaved
    channel (1 for measurement windows, below 1 when resets repump); it only
    seeds the optimiser's starting point via
    ``C0 = 1/(2(1+ratio))``, ``B0 = 1/2 - C0``.

    Derived quantities: ``leakage = 2B(1-t)``, ``seepage = 2C(1-t)``.
    """
    if ls_ratio <= 0:
        raise ValueError("ls_ratio must be positive")
    stats = _per_length_stats(dataset, lambda r: r.dark_fraction)
    if len(stats) < 3:
        raise DataFormatError("leakage fit needs at least three distinct lengths")
    lengths = np.array([s.length for s in stats], dtype=float)
    means = np.array([s.mean for s in stats])

    c0 = 1.0 / (2.0 * (1.0 + ls_ratio))
    b0 = 0.5 - c0
    num, den = means[-1] - c0, means[0] - c0
    if num > 1e-12 and den > 1e-12 and lengths[-1] > lengths[0]:
        t0 = float(np.clip((num / den) ** (1.0 / (lengths[-1] - lengths[0])),
                           1e-3, 1.0 - 1e-9))
    else:
        t0 = 0.95
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(
                lambda l, b, c, t: b * np.power(t, l + 1.0) + c,
                lengths, means, p0=[b0, c0, t0], sigma=_fit_sigma(stats),
                bounds=([0.0, 0.0, 1e-9], [1.0, 1.0, 1.0]), maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"leakage decay fit failed: {exc}") from exc
    intercept, asymptote, t_minus = map(float, popt)
    if not all(np.isfinite(v) for v in (intercept, asymptote, t_minus)):
        raise FitError("leakage decay fit returned non-finite parameters")
    leakage = 2.0 * intercept * (1.0 - t_minus)
    seepage = 2.0 * asymptote * (1.0 - t_minus)
    return LeakageFit(intercept, asymptote, t_minus, leakage, seepage, stats)


def average_error(base: float, leakage: float) -> float:
    """Average error per interleaved cycle, ``(1 - base + leakage) / 2``."""
    return 0.5 * (1.0 - base + leakage)


@dataclass(frozen=True)
class ScatteringEstimates:
    """Crosstalk scattering probability per window, by two routes.

    ``standard`` inverts the ordinary decay (``3(1-base)/4``), ``leakage``
    inverts the population exchange (``2(1-t_minus)/3``).
    """

    standard: float
    leakage: float


def scattering_estimates(base: float, t_minus: float) -> ScatteringEstimates:
    return ScatteringEstimates(standard=0.75 * (1.0 - base),
                               leakage=(2.0 / 3.0) * (1.0 - t_minus))


# ---------------------------------------------------------------------------
# bootstrap and analysis


_BOOTSTRAP_FIELDS = ("amplitude", "base", "intercept", "asymptote", "t_minus",
                     "leakage", "seepage", "epsilon",
                     "scattering_standard", "scattering_leakage")


@dataclass(frozen=True)
class BootstrapResult:
    n_resamples: int
    failures: int
    sigmas: dict
    samples: dict = field(repr=False)


def bootstrap_analysis(dataset: RBDataset, n_resamples: int = 200,
                       seed=None, rng: np.random.Generator | None = None,
                       ls_ratio: float = 1.0) -> BootstrapResult:
    """Semi-parametric bootstrap of both decay fits.

    Each resample draws sequences with replacement within every length, then
    redraws each chosen sequence's counts binomially around its empirical
    dark rate, and refits.  More than 10% failed refits raises
    :class:`FitError` (the dataset does not support a stable analysis).
    """
    if n_resamples < 2:
        raise ValueError("need at least two resamples")
    if rng is None:
        rng = np.random.default_rng(seed)
    groups = dataset.by_length()
    samples: dict[str, list[float]] = {k: [] for k in _BOOTSTRAP_FIELDS}
    failures = 0
    for _ in range(n_resamples):
        records = []
        for _, group in sorted(groups.items()):
            picks = rng.integers(0, len(group), len(group))
            for j in picks:
                r = group[j]
                dark = int(rng.binomial(r.shots, r.dark_counts / r.shots))
                records.append(replace(r, dark_counts=dark))
        resampled = RBDataset(tuple(records))
        try:
            std = fit_standard(resampled)
            leak = fit_leakage(resampled, ls_ratio=ls_ratio)
        except FitError:
            failures += 1
            continue
        est = scattering_estimates(std.base, leak.t_minus)
        samples["amplitude"].append(std.amplitude)
        samples["base"].append(std.base)
        samples["intercept"].append(leak.intercept)
        samples["asymptote"].append(leak.asymptote)
        samples["t_minus"].append(leak.t_minus)
        samples["leakage"].append(leak.leakage)
        samples["seepage"].append(leak.seepage)
        samples["epsilon"].append(average_error(std.base, leak.leakage))
        samples["scattering_standard"].append(est.standard)
        samples["scattering_leakage"].append(est.leakage)
    if failures > BOOTSTRAP_FAILURE_BUDGET * n_resamples:
        raise FitError(
            f"bootstrap unstable: {failures}/{n_resamples} refits failed")
    arrays = {k: np.array(v) for k, v in samples.items()}
    sigmas = {k: float(a.std(ddof=1)) for k, a in arrays.items()}
    return BootstrapResult(n_resamples=n_resamples, failures=failures,
                           sigmas=sigmas, samples=arrays)


@dataclass(frozen=True)
class AnalysisResult:
    """Everything the decay analysis of one dataset produces."""

    standard: StandardFit
    leakage_fit: LeakageFit
    epsilon: float
    scattering: ScatteringEstimates
    bootstrap: BootstrapResult | None
    lengths: tuple[int, ...]
    sequences_per_length: dict
    shots: tuple[int, ...]

    def sigma(self, name: str) -> float | None:
        if self.bootstrap is None:
            return None
        return self.bootstrap.sigmas.get(name)

    def to_dict(self) -> dict:
        def stats_rows(stats):
            return [{"length": s.length, "n_sequences": s.n_sequences,
                     "mean": s.mean, "sem": s.sem} for s in stats]

        out = {
            "lengths": list(self.lengths),
            "sequences_per_length": {str(k): v for k, v in
                                     sorted(self.sequences_per_length.items())},
            "shots": list(self.shots),
            "standard": {
                "amplitude": self.standard.amplitude,
                "base": self.standard.base,
                "per_length": stats_rows(self.standard.per_length),
            },
            "leakage": {
                "intercept": self.leakage_fit.intercept,
                "asymptote": self.leakage_fit.asymptote,
                "t_minus": self.leakage_fit.t_minus,
                "leakage": self.leakage_fit.leakage,
                "seepage": self.leakage_fit.seepage,
                "per_length": stats_rows(self.leakage_fit.per_length),
            },
            "epsilon": self.epsilon,
            "scattering_estimates": {
                "standard": self.scattering.standard,
                "leakage": self.scattering.leakage,
            },
        }
        if self.bootstrap is not None:
            out["bootstrap"] = {
                "n_resamples": self.bootstrap.n_resamples,
                "failures": self.bootstrap.failures,
                "sigmas": dict(sorted(self.bootstrap.sigmas.items())),
            }
        return out


def analyze_dataset(dataset: RBDataset, ls_ratio: float = 1.0,
                    resamples: int = 200, seed=None,
                    rng: np.random.Generator | None = None) -> AnalysisResult:
    """Run both decay fits plus the bootstrap (``resamples=0`` skips it)."""
    std = fit_standard(dataset)
    leak = fit_leakage(dataset, ls_ratio=ls_ratio)
    boot = None
    if resamples:
        boot = bootstrap_analysis(dataset, n_resamples=resamples, seed=seed,
                                  rng=rng, ls_ratio=ls_ratio)
    counts = {length: len(group) for length, group in dataset.by_length().items()}
    shots = tuple(sorted({r.shots for r in dataset.records}))
    return AnalysisResult(
        standard=std, leakage_fit=leak,
        epsilon=average_error(std.base, leak.leakage),
        scattering=scattering_estimates(std.base, leak.t_minus),
        bootstrap=boot, lengths=dataset.lengths,
        sequences_per_length=counts, shots=shots)


# ---------------------------------------------------------------------------
# focus-ion trajectory simulation


@dataclass(frozen=True)
class FocusModel:
    """Classical error model of the measured/reset (focus) ion.

    Per measurement window a bright shot depumps to dark with probability
    ``depump_per_measure`` (before readout, persisting until a reset);
    readout then misreports with the confusion probabilities.  A reset leaves
    the state unchanged with probability ``reset_error``.  The pi-pulse is
    treated as calibration-grade (error-free); ``random_su2`` rerandomises
    the ion and the sampled ideal bit is the reference for error counting.
    """

    prep_flip: float = 0.0
    dark_to_bright: float = 0.0
    bright_to_dark: float = 0.0
    depump_per_measure: float = 0.0
    reset_error: float = 0.0

    def __post_init__(self):
        for name in ("prep_flip", "dark_to_bright", "bright_to_dark",
                     "depump_per_measure", "reset_error"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v!r}")

    def to_dict(self) -> dict:
        return {"prep_flip": self.prep_flip,
                "dark_to_bright": self.dark_to_bright,
                "bright_to_dark": self.bright_to_dark,
                "depump_per_measure": self.depump_per_measure,
                "reset_error": self.reset_error}

    @classmethod
    def from_dict(cls, data: dict) -> "FocusModel":
        known = {"prep_flip", "dark_to_bright", "bright_to_dark",
                 "depump_per_measure", "reset_error"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown focus-model keys: {', '.join(sorted(extra))}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class FocusRecord:
    """Error tally of one in-slot measurement: ``errors`` of ``shots`` wrong."""

    length: int
    seq_id: int
    slot: int
    meas_index: int
    shots: int
    errors: int


def simulate_focus(sequences, interleaved_ops, initial_state: int,
                   model: FocusModel, shots: int, seed=None,
                   rng: np.random.Generator | None = None) -> list[FocusRecord]:
    """Per-shot classical trajectories of the focus ion through every sequence.

    Returns one record per (sequence, slot, in-slot measurement).  Errors are
    counted against the ideal error-free trajectory, which is tracked
    alongside (after a ``random_su2`` the sampled random bit is the ideal).
    """
    if initial_state not in (0, 1):
        raise ConfigError("initial_state must be 0 or 1")
    for op in interleaved_ops:
        if op not in INTERLEAVED_OPS:
            raise ConfigError(f"unknown interleaved op {op!r}")
    if rng is None:
        rng = np.random.default_rng(seed)
    records = []
    for seq in sequences:
        state = np.full(shots, initial_state, dtype=np.int8)
        ideal = np.full(shots, initial_state, dtype=np.int8)
        if model.prep_flip > 0:
            flip = rng.random(shots) < model.prep_flip
            state[flip] ^= 1
        for slot in range(1, seq.length + 1):
            meas_index = 0
            for op in interleaved_ops:
                if op == "measure":
                    if model.depump_per_measure > 0:
                        drop = (state == 1) & (rng.random(shots) < model.depump_per_measure)
                        state[drop] = 0
                    confusion = np.where(state == 1, model.bright_to_dark,
                                         model.dark_to_bright)
                    outcome = np.where(rng.random(shots) < confusion, 1 - state, state)
                    records.append(FocusRecord(
                        length=seq.length, seq_id=seq.seq_id, slot=slot,
                        meas_index=meas_index, shots=shots,
                        errors=int(np.sum(outcome != ideal))))
                    meas_index += 1
                elif op == "reset":
                    keep = rng.random(shots) < model.reset_error
                    state = np.where(keep, state, 0).astype(np.int8)
                    ideal = np.zeros(shots, dtype=np.int8)
                elif op == "x_pi":
                    state = (1 - state).astype(np.int8)
                    ideal = (1 - ideal).astype(np.int8)
                elif op == "random_su2":
                    ideal = rng.integers(0, 2, shots).astype(np.int8)
                    state = ideal.copy()
    return records


def write_focus_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FOCUS_HEADER)
        for r in records:
            writer.writerow([r.length, r.seq_id, r.slot, r.meas_index,
                             r.shots, r.errors])


def read_focus_csv(path) -> list[FocusRecord]:
    records = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != FOCUS_HEADER:
            raise DataFormatError(f"bad focus header in {path}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [int(x) for x in row]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
            if len(vals) != len(FOCUS_HEADER):
                raise DataFormatError(f"{path}:{lineno}: wrong column count")
            rec = FocusRecord(*vals)
            if not 0 <= rec.errors <= rec.shots:
                raise DataFormatError(f"{path}:{lineno}: errors outside [0, shots]")
            records.append(rec)
    return records


@dataclass(frozen=True)
class SpamReportEntry:
    """Pooled mid-circuit readout error of one in-slot measurement position."""

    meas_index: int
    shots: int
    errors: int
    rate: float
    sigma: float
    per_length: tuple  # (length, shots, errors, rate) rows


def spam_report(records) -> tuple[SpamReportEntry, ...]:
    """Aggregate focus records per measurement position and per depth.

    The per-length breakdown is what reveals depth-dependent SPAM (for
    example a bright ion slowly depumping when it is never reset).
    """
    by_meas: dict[int, list[FocusRecord]] = {}
    for r in records:
        by_meas.setdefault(r.meas_index, []).append(r)
    entries = []
    for meas_index, group in sorted(by_meas.items()):
        shots = sum(r.shots for r in group)
        errors = sum(r.errors for r in group)
        rate = errors / shots
        sigma = float(np.sqrt(max(rate * (1 - rate), 1.0 / shots) / shots))
        per_length = []
        by_len: dict[int, list[FocusRecord]] = {}
        for r in group:
            by_len.setdefault(r.length, []).append(r)
        for length, sub in sorted(by_len.items()):
            s = sum(r.shots for r in sub)
            e = sum(r.errors for r in sub)
            per_length.append((length, s, e, e / s))
        entries.append(SpamReportEntry(meas_index, shots, errors, rate, sigma,
                                       tuple(per_length)))
    return tuple(entries)


# ---------------------------------------------------------------------------
# experiment configuration and campaign running


@dataclass(frozen=True)
class ChannelSpec:
    """JSON-friendly description of one crosstalk channel."""

    kind: str
    gamma_t: float
    polarization: tuple = channels.POLARIZATION_BALANCED
    dark_branching: float = channels.DEFAULT_DARK_BRANCHING

    def build(self) -> channels.LeakageChannel:
        config = {"kind": self.kind, "gamma_t": self.gamma_t,
                  "polarization": list(self.polarization)}
        if self.kind == "reset":
            config["dark_branching"] = self.dark_branching
        return channels.channel_from_config(config)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "gamma_t": self.gamma_t,
               "polarization": list(self.polarization)}
        if self.kind == "reset":
            out["dark_branching"] = self.dark_branching
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelSpec":
        channels.channel_from_config(data)  # full validation
        kwargs = {"kind": data["kind"], "gamma_t": float(data["gamma_t"])}
        if "polarization" in data:
            kwargs["polarization"] = tuple(float(w) for w in data["polarization"])
        if "dark_branching" in data:
            kwargs["dark_branching"] = float(data["dark_branching"])
        return cls(**kwargs)


@dataclass(frozen=True)
class ProbeSpec:
    """Per-probe channel strengths and readout model."""

    measurement: ChannelSpec | None = None
    reset: ChannelSpec | None = None
    gate_depolarizing: float = 0.0
    spam: SpamModel = PERFECT_SPAM

    def slot_channel(self, interleaved_ops) -> channels.LeakageChannel:
        """The error applied after each random Clifford, in op order."""
        steps = []
        if self.gate_depolarizing > 0:
            steps.append(channels.depolarizing(self.gate_depolarizing))
        for op in interleaved_ops:
            if op == "measure" and self.measurement is not None:
                steps.append(self.measurement.build())
            elif op == "reset" and self.reset is not None:
                steps.append(self.reset.build())
        if not steps:
            return channels.identity_channel()
        return channels.compose(*steps)

    def to_dict(self) -> dict:
        return {
            "measurement": None if self.measurement is None else self.measurement.to_dict(),
            "reset": None if self.reset is None else self.reset.to_dict(),
            "gate_depolarizing": self.gate_depolarizing,
            "spam": self.spam.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProbeSpec":
        known = {"measurement", "reset", "gate_depolarizing", "spam"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown probe keys: {', '.join(sorted(extra))}")
        meas = data.get("measurement")
        rst = data.get("reset")
        if meas is not None and meas.get("kind") != "measurement":
            raise ConfigError("probe 'measurement' entry must have kind 'measurement'")
        if rst is not None and rst.get("kind") != "reset":
            raise ConfigError("probe 'reset' entry must have kind 'reset'")
        return cls(
            measurement=None if meas is None else ChannelSpec.from_dict(meas),
            reset=None if rst is None else ChannelSpec.from_dict(rst),
            gate_depolarizing=float(data.get("gate_depolarizing", 0.0)),
            spam=SpamModel.from_dict(data.get("spam", {})),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmarking experiment: interleaved ops, probes, focus, sampling."""

    name: str
    interleaved_ops: tuple = ()
    initial_focus_state: int = 0
    probes: dict = field(default_factory=dict)
    focus: FocusModel = FocusModel()
    lengths: tuple = DEFAULT_LENGTHS
    sequences_per_length: int = DEFAULT_SEQUENCES_PER_LENGTH
    shots: int = DEFAULT_SHOTS
    balanced: bool = True

    def __post_init__(self):
        if not self.name or not all(c.isalnum() or c in "-_" for c in self.name):
            raise ConfigError(
                f"experiment name must be non-empty [-_ alphanumeric], got {self.name!r}")
        for op in self.interleaved_ops:
            if op not in INTERLEAVED_OPS:
                raise ConfigError(f"unknown interleaved op {op!r}")
        if self.initial_focus_state not in (0, 1):
            raise ConfigError("initial_focus_state must be 0 or 1")
        if not self.probes:
            raise ConfigError("experiment needs at least one probe")
        for label in self.probes:
            if not label or not all(c.isalnum() or c in "-_" for c in label):
                raise ConfigError(f"bad probe label {label!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "interleaved_ops": list(self.interleaved_ops),
            "initial_focus_state": self.initial_focus_state,
            "probes": {label: spec.to_dict()
                       for label, spec in sorted(self.probes.items())},
            "focus": self.focus.to_dict(),
            "lengths": list(self.lengths),
            "sequences_per_length": self.sequences_per_length,
            "shots": self.shots,
            "balanced": self.balanced,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"name", "interleaved_ops", "initial_focus_state", "probes",
                 "focus", "lengths", "sequences_per_length", "shots", "balanced"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown experiment keys: {', '.join(sorted(extra))}")
        if "name" not in data or "probes" not in data:
            raise ConfigError("experiment config requires 'name' and 'probes'")
        probes = {label: ProbeSpec.from_dict(spec)
                  for label, spec in data["probes"].items()}
        return cls(
            name=str(data["name"]),
            interleaved_ops=tuple(data.get("interleaved_ops", ())),
            initial_focus_state=int(data.get("initial_focus_state", 0)),
            probes=probes,
            focus=FocusModel.from_dict(data.get("focus", {})),
            lengths=tuple(int(l) for l in data.get("lengths", DEFAULT_LENGTHS)),
            sequences_per_length=int(data.get("sequences_per_length",
                                              DEFAULT_SEQUENCES_PER_LENGTH)),
            shots=int(data.get("shots", DEFAULT_SHOTS)),
            balanced=bool(data.get("balanced", True)),
        )


def load_campaign(path) -> list[ExperimentConfig]:
    """Read a campaign JSON file: ``{"experiments": [...]}``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"campaign file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict) or "experiments" not in data:
        raise ConfigError(f"{path}: campaign file must contain an 'experiments' list")
    experiments = data["experiments"]
    if not isinstance(experiments, list) or not experiments:
        raise ConfigError(f"{path}: 'experiments' must be a non-empty list")
    configs = [ExperimentConfig.from_dict(e) for e in experiments]
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: duplicate experiment names")
    return configs


@dataclass(frozen=True)
class ChannelReference:
    """Exact figures of merit of the constructed slot channel (ground truth)."""

    base: float
    leakage: float
    seepage: float
    epsilon: float
    t_minus: float


def channel_reference(slot_channel) -> ChannelReference:
    ch = slot_channel if isinstance(slot_channel, channels.LeakageChannel) \
        else channels.LeakageChannel(_as_matrix(slot_channel))
    base = channels.decay_base(ch)
    leak, seep = channels.leakage_seepage(ch)
    return ChannelReference(base=base, leakage=leak, seepage=seep,
                            epsilon=average_error(base, leak),
                            t_minus=1.0 - leak - seep)


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    datasets: dict
    analyses: dict
    references: dict
    focus_records: tuple
    spam: tuple


def run_experiment(config: ExperimentConfig, seed=None,
                   resamples: int = 200) -> ExperimentResult:
    """Simulate and analyse one experiment end to end.

    One set of sequences is shared by all probes (they ride the same
    circuits); each probe gets its own sampling stream.  The leakage fit's
    starting ratio is taken from the probe's exact channel, which is
    available here because the data is synthetic.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seq_ss, focus_ss, probes_ss = ss.spawn(3)
    sequences = generate_sequences(
        config.lengths, config.sequences_per_length,
        rng=np.random.default_rng(seq_ss), balanced=config.balanced)

    datasets, analyses, references = {}, {}, {}
    probe_children = probes_ss.spawn(len(config.probes))
    for child, (label, probe) in zip(probe_children,
                                     sorted(config.probes.items())):
        sample_ss, boot_ss = child.spawn(2)
        slot = probe.slot_channel(config.interleaved_ops)
        ref = channel_reference(slot)
        ratio = ref.leakage / ref.seepage if ref.seepage > 1e-15 else 1.0
        dataset = simulate_dataset(sequences, slot, config.shots,
                                   spam=probe.spam,
                                   rng=np.random.default_rng(sample_ss))
        analysis = analyze_dataset(dataset, ls_ratio=max(ratio, 1e-3),
                                   resamples=resamples,
                                   rng=np.random.default_rng(boot_ss))
        datasets[label] = dataset
        analyses[label] = analysis
        references[label] = ref

    focus_records = tuple(simulate_focus(
        sequences, config.interleaved_ops, config.initial_focus_state,
        config.focus, config.shots, rng=np.random.default_rng(focus_ss)))
    return ExperimentResult(config=config, datasets=datasets,
                            analyses=analyses, references=references,
                            focus_records=focus_records,
                            spam=spam_report(focus_records))


def _run_campaign_job(args):
    config, entropy, resamples = args
    return run_experiment(config, seed=np.random.SeedSequence(entropy),
                          resamples=resamples)


def run_campaign(configs, seed=None, resamples: int = 200,
                 parallel: int = 1) -> list[ExperimentResult]:
    """Run every experiment with independent, reproducible seed streams."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(len(configs))
    jobs = [(cfg, child.entropy, resamples)
            for cfg, child in zip(configs, children)]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_run_campaign_job, jobs))
    return [_run_campaign_job(job) for job in jobs]


def standard_experiments(gamma_t_measure: float = 2e-3,
                         gamma_t_reset: float = 2e-4,
                         gate_depolarizing: float = 2e-4,
                         polarization=channels.POLARIZATION_BALANCED,
                         dark_branching: float = channels.DEFAULT_DARK_BRANCHING,
                         focus: FocusModel | None = None,
                         probe_label: str = "probe",
                         spam: SpamModel = PERFECT_SPAM,
                         lengths=DEFAULT_LENGTHS,
                         sequences_per_length: int = DEFAULT_SEQUENCES_PER_LENGTH,
                         shots: int = DEFAULT_SHOTS) -> list[ExperimentConfig]:
    """The canonical experiment set, from bare control to bleed-through.

    Covers: no interleaved ops (control), reset only, measurement with the
    focus ion dark or bright, measurement+reset in both focus configurations
    (the bright one re-excites the ion each slot), and a double
    measure/reset slot with a randomised focus ion (bleed-through).
    """
    focus = focus or FocusModel()
    meas = ChannelSpec("measurement", gamma_t_measure, tuple(polarization))
    rst = ChannelSpec("reset", gamma_t_reset, tuple(polarization), dark_branching)
    probe = ProbeSpec(measurement=meas, reset=rst,
                      gate_depolarizing=gate_depolarizing, spam=spam)
    sampling = {"lengths": tuple(lengths),
                "sequences_per_length": sequences_per_length, "shots": shots,
                "probes": {probe_label: probe}, "focus": focus}
    return [
        ExperimentConfig(name="control", interleaved_ops=(), **sampling),
        ExperimentConfig(name="reset", interleaved_ops=("reset",), **sampling),
        ExperimentConfig(name="measure-dark", interleaved_ops=("measure",),
                         **sampling),
        ExperimentConfig(name="measure-bright", interleaved_ops=("measure",),
                         initial_focus_state=1, **sampling),
        ExperimentConfig(name="measure-reset-dark",
                         interleaved_ops=("measure", "reset"), **sampling),
        ExperimentConfig(name="measure-reset-bright",
                         interleaved_ops=("measure", "reset", "x_pi"),
                         initial_focus_state=1, **sampling),
        ExperimentConfig(name="bleed-through",
                         interleaved_ops=("random_su2", "measure", "reset",
                                          "measure", "reset"), **sampling),
    ]
