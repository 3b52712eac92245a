"""Subcommand front-end wiring the back-end stages into a file pipeline.

Exit codes: 0 ok, 2 usage error, 3 data/format error, 4 numeric or
degenerate-input error. All randomness enters through explicit --seed
flags; rerunning any subcommand on identical inputs produces
byte-identical outputs.
"""

import argparse
import sys
from pathlib import Path

from . import augment, calibration, metrics, normalization, scoring, store_io, synth
from .errors import DataError, DegenerateInputError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DEGENERATE = 4

FMT_EMBEDDINGS = """\
embedding store:
  dim\t2
  utt1\t0.25 -1.0
  utt2\t1.0 0.5"""

FMT_TRIALS = """\
trial list (label column all-present or all-absent):
  spk1\tutt9\ttarget
  spk1\tutt7\tnontarget
  spk2\tutt9\tnontarget"""

FMT_SCORES = """\
score file (same trial order as the trial list):
  spk1\tutt9\t0.83
  spk1\tutt7\t-0.12
  spk2\tutt9\t0.05"""

FMT_STATS = """\
cohort stats file:
  spk1\t0.41\t0.07
  utt9\t0.38\t0.05
  utt7\t0.29\t0.06"""

FMT_QUALITY = """\
quality table:
  name\tvad_pn
  utt9\t1.44
  utt7\t0.98"""

FMT_ENROLL_MAP = """\
enrollment map:
  spk1\tutt1,utt2,utt3
  spk2\tutt4
  spk3\tutt5,utt6"""

FMT_QMF = """\
QMF matrix:
  names\tenroll.l1 enroll.l2 test.l1 test.l2
  spk1\tutt9\t12.1 1.02 11.8 0.99
  spk1\tutt7\t12.1 1.02 10.6 0.95"""

FMT_MODEL = """\
model file (key/value):
  w_mean\t0.12
  b_mean\t-0.8
  w_std\t0.33"""

FMT_PLAN = """\
augmentation plan:
  reverb_prob\t0.5
  noise.babble\t13,20,on
  noise.music\t5,15,off"""

FMT_SYNTH = """\
synthesis config:
  n_speakers\t30
  utts_per_speaker\t3
  dim\t16"""


def _epilog(*blocks):
    return "file formats (TAB-separated, LF, shortest round-trip floats):\n\n" + \
        "\n\n".join(blocks)


def _check_aligned(score_file, trials, what="score file"):
    pairs = [(e, t) for e, t, _ in score_file]
    expected = [(t.enroll_id, t.test_id) for t in trials]
    if pairs != expected:
        raise DataError(f"{what} is not aligned with the trial list")


def _labeled(trials):
    if not trials.labeled:
        raise DataError("trial list must carry target/nontarget labels")
    return trials.labels()


# ---------------------------------------------------------------------------
# subcommands

def cmd_score(args):
    store = store_io.read_embeddings(args.embeddings)
    enroll_map = store_io.read_enroll_map(args.enroll_map)
    trials = store_io.read_trials(args.trials)
    durations = None
    if args.durations:
        durations = store_io.read_quality_table(args.durations).values
    prototypes = scoring.build_prototypes(store, enroll_map, durations)
    scores = scoring.score_trials(store, prototypes, trials)
    store_io.write_scores(args.out, scores)
    if args.proto_out:
        store_io.write_embeddings(args.proto_out, scoring.prototype_store(prototypes))


def cmd_cohort(args):
    store = store_io.read_embeddings(args.embeddings)
    cohort = store_io.read_embeddings(args.cohort)
    stats = normalization.cohort_stats_table(store, cohort, args.top_k)
    store_io.write_cohort_stats(args.out, stats)


def cmd_asnorm(args):
    scores = store_io.read_scores(args.scores)
    enroll_stats = store_io.read_cohort_stats(args.enroll_stats)
    test_stats = store_io.read_cohort_stats(args.test_stats)
    normed = normalization.as_norm_scores(scores, enroll_stats, test_stats)
    store_io.write_scores(args.out, normed)


def cmd_tasnorm_apply(args):
    scores = store_io.read_scores(args.scores)
    enroll_stats = store_io.read_cohort_stats(args.enroll_stats)
    test_stats = store_io.read_cohort_stats(args.test_stats)
    params = normalization.TasNormParams.from_model_dict(
        store_io.read_model(args.params)
    )
    normed = normalization.tas_norm_scores(scores, enroll_stats, test_stats, params)
    store_io.write_scores(args.out, normed)


def cmd_tasnorm_train(args):
    scores = store_io.read_scores(args.scores)
    trials = store_io.read_trials(args.trials)
    _check_aligned(scores, trials)
    labels = _labeled(trials)
    enroll_stats = store_io.read_cohort_stats(args.enroll_stats)
    test_stats = store_io.read_cohort_stats(args.test_stats)
    arrays = normalization.stats_arrays(scores, enroll_stats, test_stats)
    config = normalization.TasNormTrainConfig(
        batch_size=args.batch, steps=args.steps, learning_rate=args.lr, seed=args.seed
    )
    params = normalization.tas_norm_train(*arrays, labels, config)
    store_io.write_model(args.out, params.as_model_dict())


def cmd_qmf(args):
    trials = store_io.read_trials(args.trials)
    store = store_io.read_embeddings(args.embeddings)
    enroll_map = store_io.read_enroll_map(args.enroll_map)
    durations = None
    if args.durations:
        durations = store_io.read_quality_table(args.durations).values
    prototypes = scoring.build_prototypes(store, enroll_map, durations)
    enroll_stats = store_io.read_cohort_stats(args.enroll_stats)
    test_stats = store_io.read_cohort_stats(args.test_stats)
    params = normalization.TasNormParams.from_model_dict(
        store_io.read_model(args.params)
    )
    tables = []
    for spec in args.quality_table or []:
        name, _, path = spec.partition("=")
        if not path:
            table = store_io.read_quality_table(name)
        else:
            table = store_io.read_quality_table(path)
            table.name = name
        tables.append(table)
    qmf = calibration.build_qmf_table(
        trials, store, prototypes, enroll_stats, test_stats, params, tables
    )
    store_io.write_qmf(args.out, qmf)


def _read_score_sets(paths, trials):
    score_files = []
    for path in paths:
        sf = store_io.read_scores(path)
        _check_aligned(sf, trials, what=f"score file {path}")
        score_files.append(sf)
    return score_files


def cmd_fuse_fit(args):
    trials = store_io.read_trials(args.trials)
    labels = _labeled(trials)
    score_files = _read_score_sets(args.scores, trials)
    qmf = None
    if args.qmf:
        qmf = store_io.read_qmf(args.qmf)
        if qmf.entries != [(t.enroll_id, t.test_id) for t in trials]:
            raise DataError("QMF matrix is not aligned with the trial list")
    model = calibration.fit_fusion(
        [sf.scores() for sf in score_files], labels, qmf, l2=args.l2
    )
    store_io.write_model(args.out, model.as_model_dict())


def cmd_fuse_apply(args):
    model = calibration.FusionModel.from_model_dict(store_io.read_model(args.model))
    score_files = [store_io.read_scores(p) for p in args.scores]
    qmf = store_io.read_qmf(args.qmf) if args.qmf else None
    fused = calibration.fused_score_file(score_files, qmf, model)
    store_io.write_scores(args.out, fused)


def cmd_eval(args):
    scores_file = store_io.read_scores(args.scores)
    trials = store_io.read_trials(args.trials)
    _check_aligned(scores_file, trials)
    labels = _labeled(trials)
    scores = scores_file.scores()
    normalize = not args.no_normalize

    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    known = ("eer", "dcf_day", "dcf_night", "dcf_c")
    for name in wanted:
        if name not in known:
            raise DataError(f"unknown metric {name!r}; choose from {', '.join(known)}")
    for name in wanted:
        if name == "eer":
            value, threshold = metrics.eer(scores, labels)
            thr_str = store_io.fmt_float(threshold)
        elif name == "dcf_day":
            value, threshold = metrics.min_dcf(scores, labels, metrics.DAY, normalize)
            thr_str = store_io.fmt_float(threshold)
        elif name == "dcf_night":
            value, threshold = metrics.min_dcf(scores, labels, metrics.NIGHT, normalize)
            thr_str = store_io.fmt_float(threshold)
        else:
            value = metrics.dcf_c(scores, labels, normalize)
            thr_str = "-"
        print(f"{name}\t{store_io.fmt_float(value)}\t{thr_str}")


def _load_wav_dir(path, what):
    files = sorted(Path(path).glob("*.wav"))
    if not files:
        raise DataError(f"no .wav files in {what} directory {path}")
    return [augment.read_wav(f) for f in files]


def cmd_augment(args):
    plan = augment.parse_plan(args.plan)
    seed = plan.seed if args.seed is None else args.seed

    sources = augment.AugmentSources()
    enabled = [c for c in plan.noise_classes if c.enabled]
    if enabled:
        if not args.noise_dir:
            raise DataError("plan enables noise classes but --noise-dir is missing")
        for cls in enabled:
            class_dir = Path(args.noise_dir) / cls.name
            sources.noise[cls.name] = _load_wav_dir(class_dir, f"noise class {cls.name!r}")
    if plan.reverb_prob > 0:
        if not args.rir_dir:
            raise DataError("plan enables reverberation but --rir-dir is missing")
        sources.rirs = _load_wav_dir(args.rir_dir, "RIR")

    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wav_files = sorted(in_dir.glob("*.wav"))
    if not wav_files:
        raise DataError(f"no .wav files in input directory {in_dir}")
    for wav_path in wav_files:
        sub_seed = augment.derive_seed(seed, wav_path.stem)
        wave = augment.read_wav(wav_path)
        out, meta = augment.apply_plan(wave, plan, sources, seed=sub_seed)
        augment.write_wav(out_dir / wav_path.name, out, dither_seed=sub_seed)
        augment.write_sidecar(out_dir / (wav_path.stem + ".meta"), meta)
        print(f"{wav_path.name}\tok")


def cmd_synth(args):
    config = synth.parse_synth_config(args.config)
    data = synth.generate(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store_io.write_embeddings(out_dir / "embeddings_enroll.tsv", data.enroll)
    store_io.write_embeddings(out_dir / "embeddings_test.tsv", data.test)
    store_io.write_embeddings(out_dir / "embeddings_cohort.tsv", data.cohort)
    store_io.write_trials(out_dir / "trials.tsv", data.trials)
    store_io.write_quality_table(out_dir / "durations.tsv", data.durations)
    store_io.write_enroll_map(out_dir / "enroll_map.tsv", data.enroll_map)


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svbackend",
        description="Speaker-verification scoring, normalization, calibration "
        "and augmentation pipeline over plain text files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, *fmt_blocks):
        p = sub.add_parser(
            name,
            help=help_text,
            description=help_text,
            epilog=_epilog(*fmt_blocks),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.set_defaults(func=func)
        return p

    p = add(
        "score",
        cmd_score,
        "Build enrollment prototypes and write raw cosine scores per trial.",
        FMT_EMBEDDINGS, FMT_ENROLL_MAP, FMT_TRIALS, FMT_QUALITY, FMT_SCORES,
    )
    p.add_argument("--embeddings", required=True)
    p.add_argument("--enroll-map", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--durations", help="quality table of per-utterance VAD seconds")
    p.add_argument("--out", required=True)
    p.add_argument("--proto-out", help="also write prototypes as an embedding store")

    p = add(
        "cohort",
        cmd_cohort,
        "Top-K cohort score statistics (mean/std) for every embedding.",
        FMT_EMBEDDINGS, FMT_STATS,
    )
    p.add_argument("--embeddings", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--top-k", type=int, default=400)
    p.add_argument("--out", required=True)

    p = add(
        "asnorm",
        cmd_asnorm,
        "Adaptive score normalization from per-side cohort statistics.",
        FMT_SCORES, FMT_STATS,
    )
    p.add_argument("--scores", required=True)
    p.add_argument("--enroll-stats", required=True)
    p.add_argument("--test-stats", required=True)
    p.add_argument("--out", required=True)

    p = add(
        "tasnorm-apply",
        cmd_tasnorm_apply,
        "Trainable AS-Norm with learned scalar calibration of the statistics.",
        FMT_SCORES, FMT_STATS, FMT_MODEL,
    )
    p.add_argument("--scores", required=True)
    p.add_argument("--enroll-stats", required=True)
    p.add_argument("--test-stats", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)

    p = add(
        "tasnorm-train",
        cmd_tasnorm_train,
        "Train the four TAS-Norm scalars by mini-batch gradient descent.",
        FMT_SCORES, FMT_TRIALS, FMT_STATS, FMT_MODEL,
    )
    p.add_argument("--scores", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--enroll-stats", required=True)
    p.add_argument("--test-stats", required=True)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add(
        "qmf",
        cmd_qmf,
        "Per-trial quality measure vectors from norms, cohort statistics "
        "and quality tables.",
        FMT_TRIALS, FMT_EMBEDDINGS, FMT_STATS, FMT_QUALITY, FMT_QMF,
    )
    p.add_argument("--trials", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--enroll-map", required=True)
    p.add_argument("--durations")
    p.add_argument("--enroll-stats", required=True)
    p.add_argument("--test-stats", required=True)
    p.add_argument("--params", required=True, help="TAS-Norm params file")
    p.add_argument(
        "--quality-table",
        action="append",
        metavar="NAME=PATH",
        help="extra per-utterance table; repeatable; NAME overrides the file header",
    )
    p.add_argument("--out", required=True)

    p = add(
        "fuse-fit",
        cmd_fuse_fit,
        "Fit logistic-regression fusion weights over systems and QMFs.",
        FMT_SCORES, FMT_TRIALS, FMT_QMF, FMT_MODEL,
    )
    p.add_argument("--scores", action="append", required=True,
                   help="repeatable, one per system")
    p.add_argument("--qmf")
    p.add_argument("--trials", required=True)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = add(
        "fuse-apply",
        cmd_fuse_apply,
        "Apply fitted fusion weights to score sets (and QMFs).",
        FMT_SCORES, FMT_QMF, FMT_MODEL,
    )
    p.add_argument("--model", required=True)
    p.add_argument("--scores", action="append", required=True)
    p.add_argument("--qmf")
    p.add_argument("--out", required=True)

    p = add(
        "eval",
        cmd_eval,
        "EER and Day/Night detection costs; prints metric<TAB>value<TAB>threshold.",
        FMT_SCORES, FMT_TRIALS,
    )
    p.add_argument("--scores", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--metrics", default="eer,dcf_day,dcf_night,dcf_c")
    p.add_argument("--no-normalize", action="store_true",
                   help="report raw detection costs, not normalized ones")

    p = add(
        "augment",
        cmd_augment,
        "Corrupt a directory of WAV files per an augmentation plan.",
        FMT_PLAN,
    )
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--noise-dir", help="one subdirectory of WAVs per noise class")
    p.add_argument("--rir-dir")
    p.add_argument("--seed", type=int, help="overrides the plan's seed")

    p = add(
        "synth",
        cmd_synth,
        "Generate a synthetic embedding population with known ground truth.",
        FMT_SYNTH,
    )
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
