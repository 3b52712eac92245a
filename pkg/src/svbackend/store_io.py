"""Parsing and serialization of every on-disk artifact the back-end touches.

All formats are TAB-separated UTF-8 text with LF line endings; floats are
written in their shortest round-trip decimal form, so read(write(x)) == x
bit-exactly and files diff cleanly.

    embedding store   dim<TAB>D
                      id<TAB>v1 v2 ... vD          (single spaces)
    trial list        enroll_id<TAB>test_id[<TAB>target|nontarget]
    quality table     name<TAB>table-name
                      utterance_id<TAB>float
    score file        enroll_id<TAB>test_id<TAB>score
    model file        key<TAB>value
    cohort stats      id<TAB>mean<TAB>std
    enroll map        speaker_id<TAB>utt_id1,utt_id2,...
    qmf matrix        names<TAB>f1 f2 ... fm
                      enroll_id<TAB>test_id<TAB>v1 v2 ... vm

Every parse error names the file, the line number, and the reason.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

TARGET = "target"
NONTARGET = "nontarget"


def fmt_float(x) -> str:
    """Shortest decimal representation that round-trips to the same bits."""
    return repr(float(x))


def _parse_float(token, path, lineno, what):
    try:
        return float(token)
    except ValueError:
        raise DataError.at_line(path, lineno, f"bad {what}: {token!r}") from None


def _lines(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


# ---------------------------------------------------------------------------
# embedding stores

@dataclass(eq=False)
class EmbeddingStore:
    """Fixed-dimension embeddings addressed by utterance (or speaker) id."""

    dim: int
    ids: list[str]
    vectors: np.ndarray  # (len(ids), dim) float64

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        if self.vectors.shape != (len(self.ids), self.dim):
            raise ValueError(
                f"vector block {self.vectors.shape} does not match "
                f"{len(self.ids)} ids of dim {self.dim}"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding store contains non-finite values")
        self._index = {}
        for i, utt in enumerate(self.ids):
            if utt in self._index:
                raise ValueError(f"duplicate id {utt!r}")
            self._index[utt] = i

    @classmethod
    def from_pairs(cls, pairs):
        ids = [utt for utt, _ in pairs]
        vecs = np.array([v for _, v in pairs], dtype=np.float64)
        return cls(vecs.shape[1], ids, vecs)

    def __len__(self):
        return len(self.ids)

    def __contains__(self, utt_id):
        return utt_id in self._index

    def get(self, utt_id) -> np.ndarray:
        try:
            return self.vectors[self._index[utt_id]]
        except KeyError:
            raise KeyError(f"unknown id {utt_id!r}") from None

    def __eq__(self, other):
        return (
            isinstance(other, EmbeddingStore)
            and self.dim == other.dim
            and self.ids == other.ids
            and np.array_equal(self.vectors, other.vectors)
        )


def read_embeddings(path) -> EmbeddingStore:
    lines = _lines(path)
    if not lines:
        raise DataError.at_line(path, 1, "empty embedding store")
    head = lines[0].split("\t")
    if len(head) != 2 or head[0] != "dim":
        raise DataError.at_line(path, 1, "expected header 'dim<TAB><D>'")
    try:
        dim = int(head[1])
    except ValueError:
        raise DataError.at_line(path, 1, f"bad dimension {head[1]!r}") from None
    if dim < 1:
        raise DataError.at_line(path, 1, f"dimension must be >= 1, got {dim}")

    ids, rows = [], []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 2:
            raise DataError.at_line(path, lineno, "expected 'id<TAB>values'")
        utt, values_str = fields
        if utt in seen:
            raise DataError.at_line(path, lineno, f"duplicate id {utt!r}")
        seen.add(utt)
        tokens = values_str.split(" ")
        if len(tokens) != dim:
            raise DataError.at_line(
                path, lineno, f"expected {dim} values, got {len(tokens)}"
            )
        row = [_parse_float(t, path, lineno, "embedding value") for t in tokens]
        if not all(np.isfinite(row)):
            raise DataError.at_line(path, lineno, "non-finite embedding value")
        ids.append(utt)
        rows.append(row)
    vectors = (
        np.array(rows, dtype=np.float64) if rows else np.empty((0, dim))
    )
    return EmbeddingStore(dim, ids, vectors)


def write_embeddings(path, store: EmbeddingStore):
    lines = [f"dim\t{store.dim}"]
    for utt, vec in zip(store.ids, store.vectors):
        lines.append(utt + "\t" + " ".join(fmt_float(v) for v in vec))
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# trial lists

@dataclass(frozen=True)
class Trial:
    enroll_id: str
    test_id: str
    label: str | None = None  # TARGET / NONTARGET / None


@dataclass
class TrialList:
    """Ordered trials; labels are all-present or all-absent."""

    entries: list[Trial] = field(default_factory=list)

    def __post_init__(self):
        labeled = [t.label is not None for t in self.entries]
        if any(labeled) and not all(labeled):
            raise ValueError("mixed labeled/unlabeled trial entries")
        for t in self.entries:
            if t.label is not None and t.label not in (TARGET, NONTARGET):
                raise ValueError(f"bad label {t.label!r}")

    @property
    def labeled(self) -> bool:
        return bool(self.entries) and self.entries[0].label is not None

    def labels(self) -> np.ndarray:
        """Boolean array, True for target trials."""
        if not self.labeled:
            raise ValueError("trial list carries no labels")
        return np.array([t.label == TARGET for t in self.entries], dtype=bool)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def read_trials(path) -> TrialList:
    entries = []
    n_labeled = 0
    for lineno, line in enumerate(_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) == 2:
            entries.append(Trial(fields[0], fields[1]))
        elif len(fields) == 3:
            if fields[2] not in (TARGET, NONTARGET):
                raise DataError.at_line(
                    path, lineno, f"label must be target|nontarget, got {fields[2]!r}"
                )
            entries.append(Trial(fields[0], fields[1], fields[2]))
            n_labeled += 1
        else:
            raise DataError.at_line(
                path, lineno, "expected 'enroll<TAB>test[<TAB>label]'"
            )
    if n_labeled not in (0, len(entries)):
        raise DataError(
            f"{path}: {n_labeled} of {len(entries)} trials are labeled; "
            "labels must be present on every entry or none"
        )
    return TrialList(entries)


def write_trials(path, trials: TrialList):
    lines = []
    for t in trials:
        if t.label is None:
            lines.append(f"{t.enroll_id}\t{t.test_id}")
        else:
            lines.append(f"{t.enroll_id}\t{t.test_id}\t{t.label}")
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# quality tables

@dataclass
class QualityTable:
    """Named per-utterance scalar table (e.g. VAD speech duration in s)."""

    name: str
    values: dict[str, float] = field(default_factory=dict)

    def get(self, utt_id) -> float:
        try:
            return self.values[utt_id]
        except KeyError:
            raise KeyError(
                f"quality table {self.name!r} has no entry for {utt_id!r}"
            ) from None


def read_quality_table(path) -> QualityTable:
    lines = _lines(path)
    if not lines:
        raise DataError.at_line(path, 1, "empty quality table")
    head = lines[0].split("\t")
    if len(head) != 2 or head[0] != "name":
        raise DataError.at_line(path, 1, "expected header 'name<TAB><table-name>'")
    table = QualityTable(head[1])
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 2:
            raise DataError.at_line(path, lineno, "expected 'id<TAB>float'")
        utt, tok = fields
        if utt in table.values:
            raise DataError.at_line(path, lineno, f"duplicate id {utt!r}")
        value = _parse_float(tok, path, lineno, "quality value")
        if not np.isfinite(value):
            raise DataError.at_line(path, lineno, "non-finite quality value")
        table.values[utt] = value
    return table


def write_quality_table(path, table: QualityTable):
    lines = [f"name\t{table.name}"]
    lines += [f"{utt}\t{fmt_float(v)}" for utt, v in table.values.items()]
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# score files

@dataclass
class ScoreFile:
    """Ordered (enroll_id, test_id, score) rows, in trial-list order."""

    entries: list[tuple[str, str, float]] = field(default_factory=list)

    def scores(self) -> np.ndarray:
        return np.array([s for _, _, s in self.entries], dtype=np.float64)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def read_scores(path) -> ScoreFile:
    entries = []
    for lineno, line in enumerate(_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataError.at_line(
                path, lineno, "expected 'enroll<TAB>test<TAB>score'"
            )
        score = _parse_float(fields[2], path, lineno, "score")
        entries.append((fields[0], fields[1], score))
    return ScoreFile(entries)


def write_scores(path, scores: ScoreFile):
    _write_lines(
        path, [f"{e}\t{t}\t{fmt_float(s)}" for e, t, s in scores.entries]
    )


# ---------------------------------------------------------------------------
# model files (flat key -> float)

def read_model(path) -> dict[str, float]:
    model = {}
    for lineno, line in enumerate(_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) != 2:
            raise DataError.at_line(path, lineno, "expected 'key<TAB>value'")
        key, tok = fields
        if key in model:
            raise DataError.at_line(path, lineno, f"duplicate key {key!r}")
        model[key] = _parse_float(tok, path, lineno, f"value for {key!r}")
    return model


def write_model(path, model: dict[str, float]):
    _write_lines(path, [f"{k}\t{fmt_float(v)}" for k, v in model.items()])


# ---------------------------------------------------------------------------
# cohort statistics tables (id -> (mean, std))

def read_cohort_stats(path) -> dict[str, tuple[float, float]]:
    stats = {}
    for lineno, line in enumerate(_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataError.at_line(path, lineno, "expected 'id<TAB>mean<TAB>std'")
        utt, mean_tok, std_tok = fields
        if utt in stats:
            raise DataError.at_line(path, lineno, f"duplicate id {utt!r}")
        mean = _parse_float(mean_tok, path, lineno, "cohort mean")
        std = _parse_float(std_tok, path, lineno, "cohort std")
        if std <= 0:
            raise DataError.at_line(path, lineno, f"cohort std must be > 0, got {std}")
        stats[utt] = (mean, std)
    return stats


def write_cohort_stats(path, stats: dict[str, tuple[float, float]]):
    _write_lines(
        path,
        [f"{u}\t{fmt_float(m)}\t{fmt_float(s)}" for u, (m, s) in stats.items()],
    )


# ---------------------------------------------------------------------------
# enrollment maps (speaker -> utterance ids)

def read_enroll_map(path) -> dict[str, list[str]]:
    mapping = {}
    for lineno, line in enumerate(_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) != 2:
            raise DataError.at_line(
                path, lineno, "expected 'speaker<TAB>utt1,utt2,...'"
            )
        speaker, utts = fields
        if speaker in mapping:
            raise DataError.at_line(path, lineno, f"duplicate speaker {speaker!r}")
        utt_ids = utts.split(",")
        if not utts or any(u == "" for u in utt_ids):
            raise DataError.at_line(path, lineno, "empty utterance id in map")
        mapping[speaker] = utt_ids
    return mapping


def write_enroll_map(path, mapping: dict[str, list[str]]):
    _write_lines(path, [f"{s}\t{','.join(u)}" for s, u in mapping.items()])


# ---------------------------------------------------------------------------
# QMF matrices

@dataclass(eq=False)
class QmfTable:
    """Per-trial QMF vectors, aligned to a trial list."""

    names: list[str]
    entries: list[tuple[str, str]]  # (enroll_id, test_id) in trial order
    values: np.ndarray  # (n_trials, len(names))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate QMF feature names")
        if self.values.shape != (len(self.entries), len(self.names)):
            raise ValueError(
                f"QMF block {self.values.shape} does not match "
                f"{len(self.entries)} trials x {len(self.names)} features"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("QMF table contains non-finite values")

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return (
            isinstance(other, QmfTable)
            and self.names == other.names
            and self.entries == other.entries
            and np.array_equal(self.values, other.values)
        )


def read_qmf(path) -> QmfTable:
    lines = _lines(path)
    if not lines:
        raise DataError.at_line(path, 1, "empty QMF matrix")
    head = lines[0].split("\t")
    if len(head) != 2 or head[0] != "names":
        raise DataError.at_line(path, 1, "expected header 'names<TAB>f1 f2 ...'")
    names = head[1].split(" ")
    entries, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataError.at_line(
                path, lineno, "expected 'enroll<TAB>test<TAB>values'"
            )
        tokens = fields[2].split(" ")
        if len(tokens) != len(names):
            raise DataError.at_line(
                path, lineno, f"expected {len(names)} values, got {len(tokens)}"
            )
        rows.append([_parse_float(t, path, lineno, "QMF value") for t in tokens])
        entries.append((fields[0], fields[1]))
    values = (
        np.array(rows, dtype=np.float64) if rows else np.empty((0, len(names)))
    )
    return QmfTable(names, entries, values)


def write_qmf(path, table: QmfTable):
    lines = ["names\t" + " ".join(table.names)]
    for (e, t), row in zip(table.entries, table.values):
        lines.append(f"{e}\t{t}\t" + " ".join(fmt_float(v) for v in row))
    _write_lines(path, lines)
