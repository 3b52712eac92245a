"""Seeded synthetic-embedding populations with known ground truth.

Speaker means sit uniformly on the unit sphere; utterances are the mean
plus Gaussian within-speaker noise, length-normalized. Test-side
utterances (and the cohort, which is generated from held-out speakers
the same way) can carry an extra domain-shift bias added before
normalization, which is exactly the situation adaptive score
normalization exists to fix.

Everything flows from one seeded Generator in a fixed draw order, so a
config generates bit-identical data forever.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .store_io import (
    EmbeddingStore,
    QualityTable,
    Trial,
    TrialList,
    TARGET,
    NONTARGET,
)

DURATION_TABLE_NAME = "duration"


@dataclass
class SynthConfig:
    n_speakers: int
    utts_per_speaker: int
    dim: int
    within_spread: float
    test_bias: np.ndarray | None = None
    seed: int = 0
    cohort_speakers: int = 200
    imposter_ratio: int = 10
    duration_range: tuple[float, float] = (1.0, 1.8)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("embedding dimension must be >= 2")
        if self.within_spread <= 0:
            raise ValueError("within_spread must be positive")
        if self.n_speakers < 2 or self.utts_per_speaker < 1:
            raise ValueError("need >= 2 speakers with >= 1 utterance each")
        if self.imposter_ratio < 1:
            raise ValueError("imposter_ratio must be >= 1")
        if self.imposter_ratio > self.n_speakers - 1:
            raise ValueError(
                "imposter_ratio cannot exceed n_speakers - 1 "
                "(nontargets are drawn without replacement per target)"
            )
        if self.test_bias is not None:
            self.test_bias = np.asarray(self.test_bias, dtype=np.float64)
            if self.test_bias.shape != (self.dim,):
                raise ValueError("test_bias must match the embedding dimension")


@dataclass
class SynthData:
    enroll: EmbeddingStore
    test: EmbeddingStore
    cohort: EmbeddingStore
    trials: TrialList
    durations: QualityTable
    enroll_map: dict[str, list[str]] = field(default_factory=dict)


def _unit(v):
    return v / np.linalg.norm(v)


def _utterance(rng, mean, spread, bias):
    v = mean + spread * rng.standard_normal(mean.size)
    if bias is not None:
        v = v + bias
    return _unit(v)


def generate(config: SynthConfig) -> SynthData:
    """Deterministic population: enrollment store, biased test store,
    speaker-wise-averaged held-out cohort, labeled trials at the
    configured imposter:target ratio, and a duration table."""
    rng = np.random.default_rng(config.seed)
    dim = config.dim

    # 1. speaker means (eval speakers first, then held-out cohort speakers)
    total = config.n_speakers + config.cohort_speakers
    means = rng.standard_normal((total, dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)

    # 2. enrollment utterances (no bias: enrollment side is the clean one)
    enroll_ids, enroll_rows = [], []
    enroll_map = {}
    for i in range(config.n_speakers):
        speaker = f"s{i:03d}"
        utts = []
        for j in range(config.utts_per_speaker):
            utt = f"{speaker}-e{j:02d}"
            enroll_ids.append(utt)
            enroll_rows.append(_utterance(rng, means[i], config.within_spread, None))
            utts.append(utt)
        enroll_map[speaker] = utts

    # 3. test utterances, domain-shifted by test_bias
    test_ids, test_rows = [], []
    test_speaker = []
    for i in range(config.n_speakers):
        for j in range(config.utts_per_speaker):
            test_ids.append(f"s{i:03d}-t{j:02d}")
            test_rows.append(
                _utterance(rng, means[i], config.within_spread, config.test_bias)
            )
            test_speaker.append(i)

    # 4. cohort: held-out speakers, same bias, averaged speaker-wise
    cohort_ids, cohort_rows = [], []
    for c in range(config.cohort_speakers):
        mean = means[config.n_speakers + c]
        utts = [
            _utterance(rng, mean, config.within_spread, config.test_bias)
            for _ in range(config.utts_per_speaker)
        ]
        cohort_ids.append(f"c{c:03d}")
        cohort_rows.append(np.mean(utts, axis=0))

    # 5. durations for every enrollment and test utterance
    lo, hi = config.duration_range
    durations = QualityTable(DURATION_TABLE_NAME)
    for utt in enroll_ids + test_ids:
        durations.values[utt] = float(rng.uniform(lo, hi))

    # 6. trials: per speaker, own test utterances as targets, then
    #    imposter_ratio nontargets per target drawn from other speakers
    test_speaker = np.array(test_speaker)
    entries = []
    for i in range(config.n_speakers):
        speaker = f"s{i:03d}"
        own = np.flatnonzero(test_speaker == i)
        other = np.flatnonzero(test_speaker != i)
        for k in own:
            entries.append(Trial(speaker, test_ids[k], TARGET))
        n_non = config.imposter_ratio * own.size
        chosen = rng.choice(other.size, size=n_non, replace=False)
        for k in other[chosen]:
            entries.append(Trial(speaker, test_ids[k], NONTARGET))

    return SynthData(
        enroll=EmbeddingStore(dim, enroll_ids, np.array(enroll_rows)),
        test=EmbeddingStore(dim, test_ids, np.array(test_rows)),
        cohort=EmbeddingStore(dim, cohort_ids, np.array(cohort_rows)),
        trials=TrialList(entries),
        durations=durations,
        enroll_map=enroll_map,
    )


# ---------------------------------------------------------------------------
# config files

_INT_KEYS = ("n_speakers", "utts_per_speaker", "dim", "seed", "cohort_speakers",
             "imposter_ratio")
_FLOAT_KEYS = ("within_spread", "duration_lo", "duration_hi", "test_bias_mag")


def parse_synth_config(path) -> SynthConfig:
    """key<TAB>value config. test_bias is either a comma list of floats or
    a magnitude (test_bias_mag m puts the shift on the first axis)."""
    raw = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise DataError.at_line(path, lineno, "expected 'key<TAB>value'")
            raw[fields[0]] = (fields[1], lineno)

    def take(key, conv, default=None):
        if key not in raw:
            if default is None:
                raise DataError(f"{path}: missing required key {key!r}")
            return default
        value, lineno = raw.pop(key)
        try:
            return conv(value)
        except ValueError:
            raise DataError.at_line(path, lineno, f"bad value for {key!r}: {value!r}") from None

    kwargs = {
        "n_speakers": take("n_speakers", int),
        "utts_per_speaker": take("utts_per_speaker", int),
        "dim": take("dim", int),
        "within_spread": take("within_spread", float),
        "seed": take("seed", int, 0),
        "cohort_speakers": take("cohort_speakers", int, 200),
        "imposter_ratio": take("imposter_ratio", int, 10),
    }
    lo = take("duration_lo", float, 1.0)
    hi = take("duration_hi", float, 1.8)
    kwargs["duration_range"] = (lo, hi)

    bias = None
    if "test_bias" in raw:
        value, lineno = raw.pop("test_bias")
        try:
            bias = np.array([float(t) for t in value.split(",")])
        except ValueError:
            raise DataError.at_line(path, lineno, f"bad test_bias: {value!r}") from None
    if "test_bias_mag" in raw:
        if bias is not None:
            raise DataError(f"{path}: give test_bias or test_bias_mag, not both")
        value, lineno = raw.pop("test_bias_mag")
        try:
            mag = float(value)
        except ValueError:
            raise DataError.at_line(path, lineno, f"bad test_bias_mag: {value!r}") from None
        bias = np.zeros(kwargs["dim"])
        bias[0] = mag
    if raw:
        raise DataError(f"{path}: unknown keys {sorted(raw)}")
    kwargs["test_bias"] = bias
    return SynthConfig(**kwargs)
