"""Quality measure functions and linear score fusion.

The fused score is linear in the system scores and QMF values,

    S_fusion = sum_k x_k * S(k) + sum_n y_n * Q(n) + bias,

with the weights fit by logistic regression on labeled trials (the
sigmoid is used only during fitting; fused scores are reported as the
linear logit, which is monotone in the logistic output, so EER/DCF
decisions are unchanged). Setting bias to 0 recovers the pure
weighted-sum form.

QMF features are extracted per trial side (enrollment prototype and test
embedding): l1/l2 norms, per-dimension std, AS-Norm cohort mean/std, the
sigmoid-calibrated TAS-Norm mean/std, and one value per supplied quality
table. Enroll-side quality values are summed over the speaker's
enrollment utterances; test-side values are looked up directly.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as sigmoid

from . import core
from .errors import DataError, DegenerateInputError
from .normalization import TasNormParams, tas_calibrated
from .store_io import QmfTable, ScoreFile, TrialList

SIDE_FEATURES = (
    "l1",
    "l2",
    "dim_std",
    "asnorm_mean",
    "asnorm_std",
    "tasnorm_mean",
    "tasnorm_std",
)


@dataclass(eq=False)
class QmfVector:
    names: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate QMF feature names")
        if self.values.shape != (len(self.names),):
            raise ValueError("QMF names and values are misaligned")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("QMF values must be finite")

    def __eq__(self, other):
        return (
            isinstance(other, QmfVector)
            and self.names == other.names
            and np.array_equal(self.values, other.values)
        )


def _side_features(side, vector, stats, params):
    l1, l2, dim_std = core.dim_stats(vector)
    mean, std = stats
    cal_mean, cal_std = tas_calibrated(params, mean, std)
    names = [f"{side}.{feat}" for feat in SIDE_FEATURES]
    values = [l1, l2, dim_std, mean, std, float(cal_mean), float(cal_std)]
    return names, values


def extract_qmf(
    enroll_vector,
    test_vector,
    enroll_stats,
    test_stats,
    params: TasNormParams,
    quality=(),
) -> QmfVector:
    """QMF vector for one trial.

    quality is an ordered sequence of (table_name, enroll_value,
    test_value) triples. Names come out deterministic:
    '{side}.{feature}' and '{side}.qt.{table-name}'.
    """
    names, values = [], []
    for side, vector, stats in (
        ("enroll", enroll_vector, enroll_stats),
        ("test", test_vector, test_stats),
    ):
        side_names, side_values = _side_features(side, vector, stats, params)
        names += side_names
        values += side_values
        for table_name, enroll_value, test_value in quality:
            names.append(f"{side}.qt.{table_name}")
            values.append(enroll_value if side == "enroll" else test_value)
    return QmfVector(names, np.array(values))


def build_qmf_table(
    trials: TrialList,
    store,
    prototypes,
    enroll_stats,
    test_stats,
    params: TasNormParams,
    quality_tables=(),
) -> QmfTable:
    """QMF vectors for every trial, aligned to trial order.

    Quality tables are per-utterance; a missing entry for any trial
    utterance is a hard error, never a silent default.
    """
    names = None
    entries, rows = [], []
    for i, trial in enumerate(trials, start=1):
        if trial.enroll_id not in prototypes:
            raise DataError(f"trial {i}: unknown enrollment speaker {trial.enroll_id!r}")
        if trial.test_id not in store:
            raise DataError(f"trial {i}: unknown test utterance {trial.test_id!r}")
        proto = prototypes[trial.enroll_id]
        if trial.enroll_id not in enroll_stats:
            raise DataError(f"trial {i}: no cohort stats for speaker {trial.enroll_id!r}")
        if trial.test_id not in test_stats:
            raise DataError(f"trial {i}: no cohort stats for utterance {trial.test_id!r}")
        quality = []
        for table in quality_tables:
            enroll_value = 0.0
            for utt in proto.weights_used:
                try:
                    enroll_value += table.get(utt)
                except KeyError as exc:
                    raise DataError(f"trial {i}: {exc.args[0]}") from None
            try:
                test_value = table.get(trial.test_id)
            except KeyError as exc:
                raise DataError(f"trial {i}: {exc.args[0]}") from None
            quality.append((table.name, enroll_value, test_value))
        vec = extract_qmf(
            proto.vector,
            store.get(trial.test_id),
            enroll_stats[trial.enroll_id],
            test_stats[trial.test_id],
            params,
            quality,
        )
        if names is None:
            names = vec.names
        entries.append((trial.enroll_id, trial.test_id))
        rows.append(vec.values)
    if names is None:
        raise DegenerateInputError("no trials to extract QMFs for")
    return QmfTable(names, entries, np.array(rows))


# ---------------------------------------------------------------------------
# fusion

@dataclass(eq=False)
class FusionModel:
    """Linear fusion weights plus the standardization used while fitting.

    Column keys are 'x.<i>' for 1-based system indices and 'y.<name>'
    for QMF features. Dropped (constant) columns keep weight 0 and are
    recorded with their constant value.
    """

    system_weights: np.ndarray
    qmf_names: list[str]
    qmf_weights: np.ndarray
    bias: float
    standardization: dict[str, tuple[float, float]] = field(default_factory=dict)
    dropped: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.system_weights = np.asarray(self.system_weights, dtype=np.float64)
        self.qmf_weights = np.asarray(self.qmf_weights, dtype=np.float64)
        if self.qmf_weights.shape != (len(self.qmf_names),):
            raise ValueError("QMF names and weights are misaligned")
        for key, (_, scale) in self.standardization.items():
            if scale <= 0:
                raise ValueError(f"standardization scale for {key!r} must be > 0")

    def column_keys(self):
        return [f"x.{i + 1}" for i in range(self.system_weights.size)] + [
            f"y.{name}" for name in self.qmf_names
        ]

    def as_model_dict(self) -> dict[str, float]:
        out = {"bias": self.bias}
        for i, w in enumerate(self.system_weights):
            out[f"x.{i + 1}"] = float(w)
        for name, w in zip(self.qmf_names, self.qmf_weights):
            out[f"y.{name}"] = float(w)
        for key in self.column_keys():
            if key in self.standardization:
                shift, scale = self.standardization[key]
                out[f"shift.{key}"] = shift
                out[f"scale.{key}"] = scale
        for key in self.column_keys():
            if key in self.dropped:
                out[f"dropped.{key}"] = self.dropped[key]
        return out

    @classmethod
    def from_model_dict(cls, model) -> "FusionModel":
        if "bias" not in model:
            raise DataError("fusion model file is missing the 'bias' key")
        systems = {}
        qmf_names, qmf_weights = [], []
        standardization, dropped = {}, {}
        for key, value in model.items():
            if key == "bias":
                continue
            head, _, rest = key.partition(".")
            if head == "x":
                try:
                    systems[int(rest)] = value
                except ValueError:
                    raise DataError(f"bad system weight key {key!r}") from None
            elif head == "y":
                qmf_names.append(rest)
                qmf_weights.append(value)
            elif head == "shift":
                standardization.setdefault(rest, [0.0, 1.0])[0] = value
            elif head == "scale":
                standardization.setdefault(rest, [0.0, 1.0])[1] = value
            elif head == "dropped":
                dropped[rest] = value
            else:
                raise DataError(f"unknown fusion model key {key!r}")
        indices = sorted(systems)
        if indices != list(range(1, len(indices) + 1)):
            raise DataError(f"system weight keys are not contiguous x.1..x.k: {indices}")
        return cls(
            np.array([systems[i] for i in indices]),
            qmf_names,
            np.array(qmf_weights),
            model["bias"],
            {k: (v[0], v[1]) for k, v in standardization.items()},
            dropped,
        )

    def __eq__(self, other):
        return (
            isinstance(other, FusionModel)
            and np.array_equal(self.system_weights, other.system_weights)
            and self.qmf_names == other.qmf_names
            and np.array_equal(self.qmf_weights, other.qmf_weights)
            and self.bias == other.bias
            and self.standardization == other.standardization
            and self.dropped == other.dropped
        )


def _fusion_columns(system_scores, qmf):
    columns = [np.asarray(s, dtype=np.float64) for s in system_scores]
    keys = [f"x.{i + 1}" for i in range(len(columns))]
    if qmf is not None and qmf.names:
        for j, name in enumerate(qmf.names):
            columns.append(qmf.values[:, j])
            keys.append(f"y.{name}")
    n = {c.size for c in columns}
    if len(n) != 1:
        raise DataError("fusion inputs are not aligned on the same trial list")
    return np.column_stack(columns), keys


def fit_fusion(
    system_scores,
    labels,
    qmf: QmfTable | None = None,
    learning_rate=0.1,
    iterations=5000,
    l2=0.0,
) -> FusionModel:
    """Deterministic full-batch logistic regression over standardized
    columns; weights are reported back in the original coordinate frame.

    Constant columns cannot be standardized; they are dropped with a
    warning and recorded in the model.
    """
    if not system_scores:
        raise ValueError("at least one system score set is required")
    labels = np.asarray(labels, dtype=bool)
    n_target = int(labels.sum())
    if n_target == 0 or n_target == labels.size:
        raise DegenerateInputError("fusion fitting needs both trial classes")

    X, keys = _fusion_columns(system_scores, qmf)
    if X.shape[0] != labels.size:
        raise DataError("labels are not aligned with the fusion inputs")

    shift = X.mean(axis=0)
    scale = X.std(axis=0)  # population
    # "constant" includes constant-up-to-rounding columns: standardizing a
    # 1e-16-spread column around a unit mean would map weights back through
    # a near-zero scale and wreck the bias by cancellation
    kept = scale > 1e-12 * np.maximum(1.0, np.abs(shift))
    dropped = {}
    for j, key in enumerate(keys):
        if not kept[j]:
            dropped[key] = float(shift[j])
            warnings.warn(f"dropping constant fusion feature {key!r}")

    Xs = (X[:, kept] - shift[kept]) / scale[kept]
    y = labels.astype(np.float64)
    w = np.zeros(Xs.shape[1])
    b = 0.0
    n = y.size
    for _ in range(iterations):
        p = sigmoid(Xs @ w + b)
        grad_w = Xs.T @ (p - y) / n + l2 * w
        grad_b = float(np.mean(p - y))
        w = w - learning_rate * grad_w
        b = b - learning_rate * grad_b

    # map standardized-frame weights back to raw columns
    weights = np.zeros(len(keys))
    weights[kept] = w / scale[kept]
    bias = b - float(np.sum(w * shift[kept] / scale[kept]))

    k = len(system_scores)
    standardization = {
        key: (float(shift[j]), float(scale[j]))
        for j, key in enumerate(keys)
        if kept[j]
    }
    return FusionModel(
        weights[:k],
        list(qmf.names) if qmf is not None else [],
        weights[k:],
        bias,
        standardization,
        dropped,
    )


def fuse(system_scores, qmf: QmfTable | None, model: FusionModel) -> np.ndarray:
    """Apply the linear fusion to aligned score columns and QMF values."""
    if len(system_scores) != model.system_weights.size:
        raise DataError(
            f"model fuses {model.system_weights.size} systems, "
            f"got {len(system_scores)} score sets"
        )
    qmf_names = list(qmf.names) if qmf is not None else []
    if sorted(qmf_names) != sorted(model.qmf_names):
        raise DataError("QMF feature names do not match the fusion model")
    X, _ = _fusion_columns(system_scores, qmf)
    k = model.system_weights.size
    fused = X[:, :k] @ model.system_weights + model.bias
    if model.qmf_names:
        order = [qmf_names.index(name) for name in model.qmf_names]
        fused = fused + X[:, k:][:, order] @ model.qmf_weights
    return fused


def fused_score_file(score_files, qmf: QmfTable | None, model: FusionModel) -> ScoreFile:
    """File-level fuse: checks trial alignment across systems and the QMF
    table, returns fused scores in the shared trial order."""
    if not score_files:
        raise ValueError("at least one score file is required")
    pairs = [(e, t) for e, t, _ in score_files[0]]
    for sf in score_files[1:]:
        if [(e, t) for e, t, _ in sf] != pairs:
            raise DataError("score files do not cover identical trials in order")
    if qmf is not None and qmf.entries != pairs:
        raise DataError("QMF table is not aligned with the score files")
    fused = fuse([sf.scores() for sf in score_files], qmf, model)
    return ScoreFile([(e, t, float(s)) for (e, t), s in zip(pairs, fused)])
