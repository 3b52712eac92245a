"""Enrollment prototypes and raw cosine trial scoring.

A speaker's prototype is the duration-weighted sum of their enrollment
embeddings (uniform weights when no duration table is given). Prototypes
are deliberately not length-normalized: cosine scoring divides norms out
later, and keeping the raw weighted sum preserves its semantics.
"""

from dataclasses import dataclass

import numpy as np

from . import core
from .errors import DataError
from .store_io import EmbeddingStore, ScoreFile, TrialList

# substituted for utterances whose VAD detected no speech at all
NO_VAD_DURATION_S = 1e-6


@dataclass(eq=False)
class SpeakerPrototype:
    speaker_id: str
    vector: np.ndarray
    weights_used: dict[str, float]  # utterance id -> weight, sums to 1

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        w = np.array(list(self.weights_used.values()))
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("prototype weights must be nonnegative and sum to 1")


def build_prototype(speaker_id, utt_embeddings, durations=None) -> SpeakerPrototype:
    """Weighted-sum prototype from (utt_id, vector) pairs.

    With a duration map, weight_i = d_i / sum(d); utterances with
    duration exactly 0 (no VAD detection) are substituted by 1e-6 s
    first. Without durations, the prototype is the plain average.
    """
    utt_embeddings = list(utt_embeddings)
    if not utt_embeddings:
        raise ValueError(f"speaker {speaker_id!r} has no enrollment embeddings")
    vectors = [core.as_vector(v) for _, v in utt_embeddings]
    dim = vectors[0].shape[0]
    for (utt, _), v in zip(utt_embeddings, vectors):
        if v.shape[0] != dim:
            raise ValueError(f"embedding {utt!r} has dim {v.shape[0]}, expected {dim}")

    ids = [utt for utt, _ in utt_embeddings]
    if durations is None:
        weights = np.full(len(ids), 1.0 / len(ids))
    else:
        d = np.empty(len(ids))
        for i, utt in enumerate(ids):
            if utt not in durations:
                raise DataError(f"no duration for enrollment utterance {utt!r}")
            d[i] = durations[utt]
            if d[i] < 0:
                raise DataError(f"negative duration for utterance {utt!r}: {d[i]}")
        d[d == 0.0] = NO_VAD_DURATION_S
        weights = d / d.sum()

    proto = np.zeros(dim)
    for w, v in zip(weights, vectors):
        proto += w * v
    return SpeakerPrototype(speaker_id, proto, dict(zip(ids, weights)))


def build_prototypes(store: EmbeddingStore, enroll_map, durations=None):
    """Prototype per speaker from an enrollment map (speaker -> utt ids)."""
    prototypes = {}
    for speaker, utts in enroll_map.items():
        pairs = []
        for utt in utts:
            if utt not in store:
                raise DataError(
                    f"enrollment map names unknown utterance {utt!r} "
                    f"for speaker {speaker!r}"
                )
            pairs.append((utt, store.get(utt)))
        prototypes[speaker] = build_prototype(speaker, pairs, durations)
    return prototypes


def prototype_store(prototypes) -> EmbeddingStore:
    """Prototypes re-packed as an embedding store keyed by speaker id."""
    ids = list(prototypes)
    vectors = np.array([prototypes[s].vector for s in ids])
    return EmbeddingStore(vectors.shape[1], ids, vectors)


def score_trials(store: EmbeddingStore, prototypes, trials: TrialList) -> ScoreFile:
    """Cosine score for every trial, in trial-list order."""
    entries = []
    for i, trial in enumerate(trials, start=1):
        if trial.enroll_id not in prototypes:
            raise DataError(f"trial {i}: unknown enrollment speaker {trial.enroll_id!r}")
        if trial.test_id not in store:
            raise DataError(f"trial {i}: unknown test utterance {trial.test_id!r}")
        score = core.cosine(prototypes[trial.enroll_id].vector, store.get(trial.test_id))
        entries.append((trial.enroll_id, trial.test_id, score))
    return ScoreFile(entries)
