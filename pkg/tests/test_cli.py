from pathlib import Path

import numpy as np
import pytest

from svbackend import store_io
from svbackend.augment import Waveform, write_wav
from svbackend.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def run(*argv):
    return main([str(a) for a in argv])


def shifted(name):
    return FIXTURES / "shifted" / name


@pytest.fixture()
def scored(tmp_path):
    """Raw scores plus prototype store for the shifted fixture."""
    scores = tmp_path / "raw.tsv"
    protos = tmp_path / "protos.tsv"
    code = run(
        "score",
        "--embeddings", shifted("embeddings_test.tsv"),
        "--enroll-map", shifted("enroll_map.tsv"),
        "--trials", shifted("trials.tsv"),
        "--durations", shifted("durations.tsv"),
        "--out", scores,
        "--proto-out", protos,
    )
    # the test store lacks enrollment utterances; combine stores first
    assert code == 3
    combined = tmp_path / "all.tsv"
    enroll = store_io.read_embeddings(shifted("embeddings_enroll.tsv"))
    test = store_io.read_embeddings(shifted("embeddings_test.tsv"))
    store_io.write_embeddings(
        combined,
        store_io.EmbeddingStore(
            enroll.dim,
            enroll.ids + test.ids,
            np.vstack([enroll.vectors, test.vectors]),
        ),
    )
    code = run(
        "score",
        "--embeddings", combined,
        "--enroll-map", shifted("enroll_map.tsv"),
        "--trials", shifted("trials.tsv"),
        "--durations", shifted("durations.tsv"),
        "--out", scores,
        "--proto-out", protos,
    )
    assert code == 0
    return {"scores": scores, "protos": protos, "embeddings": combined, "tmp": tmp_path}


def test_score_writes_trial_ordered_scores(scored):
    trials = store_io.read_trials(shifted("trials.tsv"))
    scores = store_io.read_scores(scored["scores"])
    assert [(e, t) for e, t, _ in scores] == [(t.enroll_id, t.test_id) for t in trials]
    protos = store_io.read_embeddings(scored["protos"])
    assert len(protos) == 30


def test_score_unknown_utterance_exits_3(tmp_path, capsys):
    emb = tmp_path / "emb.tsv"
    store_io.write_embeddings(
        emb, store_io.EmbeddingStore(2, ["u1"], np.array([[1.0, 0.0]]))
    )
    emap = tmp_path / "map.tsv"
    store_io.write_enroll_map(emap, {"s1": ["u1"]})
    trials = tmp_path / "trials.tsv"
    trials.write_text("s1\tu1\ns1\tmissing\n")
    code = run(
        "score", "--embeddings", emb, "--enroll-map", emap,
        "--trials", trials, "--out", tmp_path / "out.tsv",
    )
    assert code == 3
    err = capsys.readouterr().err
    assert "trial 2" in err and "missing" in err


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("eval", "--nonsense", "x")
    assert exc.value.code == 2


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 2


def test_eval_single_class_exits_4(tmp_path, capsys):
    (tmp_path / "scores.tsv").write_text("s1\tu1\t0.5\ns1\tu2\t0.4\n")
    (tmp_path / "trials.tsv").write_text("s1\tu1\ttarget\ns1\tu2\ttarget\n")
    code = run(
        "eval", "--scores", tmp_path / "scores.tsv", "--trials", tmp_path / "trials.tsv"
    )
    assert code == 4


def test_eval_malformed_file_exits_3(tmp_path):
    (tmp_path / "scores.tsv").write_text("not a score line\n")
    (tmp_path / "trials.tsv").write_text("s1\tu1\ttarget\n")
    code = run(
        "eval", "--scores", tmp_path / "scores.tsv", "--trials", tmp_path / "trials.tsv"
    )
    assert code == 3


def test_eval_prints_metric_lines(scored, capsys):
    code = run("eval", "--scores", scored["scores"], "--trials", shifted("trials.tsv"))
    assert code == 0
    lines = capsys.readouterr().out.strip().split("\n")
    names = [line.split("\t")[0] for line in lines]
    assert names == ["eer", "dcf_day", "dcf_night", "dcf_c"]
    for line in lines:
        fields = line.split("\t")
        assert len(fields) == 3
        float(fields[1])  # parses
    assert lines[3].split("\t")[2] == "-"  # dcf_c has no single threshold


def test_eval_no_normalize_changes_dcf(scored, capsys):
    run("eval", "--scores", scored["scores"], "--trials", shifted("trials.tsv"),
        "--metrics", "dcf_night")
    normalized = float(capsys.readouterr().out.split("\t")[1])
    run("eval", "--scores", scored["scores"], "--trials", shifted("trials.tsv"),
        "--metrics", "dcf_night", "--no-normalize")
    raw = float(capsys.readouterr().out.split("\t")[1])
    assert raw == pytest.approx(normalized * min(10.0 * 0.01, 100.0 * 0.99), rel=1e-12)


def test_full_backend_pipeline_through_files(scored, capsys):
    tmp = scored["tmp"]
    # cohort statistics for both sides
    assert run(
        "cohort", "--embeddings", scored["protos"],
        "--cohort", shifted("embeddings_cohort.tsv"),
        "--top-k", 100, "--out", tmp / "enroll_stats.tsv",
    ) == 0
    assert run(
        "cohort", "--embeddings", shifted("embeddings_test.tsv"),
        "--cohort", shifted("embeddings_cohort.tsv"),
        "--top-k", 100, "--out", tmp / "test_stats.tsv",
    ) == 0

    # AS-Norm; idempotent rerun is byte-identical
    assert run(
        "asnorm", "--scores", scored["scores"],
        "--enroll-stats", tmp / "enroll_stats.tsv",
        "--test-stats", tmp / "test_stats.tsv",
        "--out", tmp / "asnorm.tsv",
    ) == 0
    first = (tmp / "asnorm.tsv").read_bytes()
    assert run(
        "asnorm", "--scores", scored["scores"],
        "--enroll-stats", tmp / "enroll_stats.tsv",
        "--test-stats", tmp / "test_stats.tsv",
        "--out", tmp / "asnorm.tsv",
    ) == 0
    assert (tmp / "asnorm.tsv").read_bytes() == first

    # TAS-Norm training and application
    assert run(
        "tasnorm-train", "--scores", scored["scores"], "--trials", shifted("trials.tsv"),
        "--enroll-stats", tmp / "enroll_stats.tsv", "--test-stats", tmp / "test_stats.tsv",
        "--batch", 128, "--steps", 50, "--lr", 0.01, "--seed", 3,
        "--out", tmp / "tas.tsv",
    ) == 0
    params = store_io.read_model(tmp / "tas.tsv")
    assert set(params) == {"w_mean", "b_mean", "w_std", "b_std"}
    assert run(
        "tasnorm-apply", "--scores", scored["scores"],
        "--enroll-stats", tmp / "enroll_stats.tsv", "--test-stats", tmp / "test_stats.tsv",
        "--params", tmp / "tas.tsv", "--out", tmp / "tasnorm.tsv",
    ) == 0

    # QMF extraction
    assert run(
        "qmf", "--trials", shifted("trials.tsv"),
        "--embeddings", scored["embeddings"], "--enroll-map", shifted("enroll_map.tsv"),
        "--durations", shifted("durations.tsv"),
        "--enroll-stats", tmp / "enroll_stats.tsv", "--test-stats", tmp / "test_stats.tsv",
        "--params", tmp / "tas.tsv",
        "--quality-table", f"vad={shifted('durations.tsv')}",
        "--out", tmp / "qmf.tsv",
    ) == 0
    qmf = store_io.read_qmf(tmp / "qmf.tsv")
    assert "enroll.qt.vad" in qmf.names and "test.qt.vad" in qmf.names

    # fusion fit over two systems plus QMFs; apply; evaluate
    assert run(
        "fuse-fit", "--scores", tmp / "asnorm.tsv", "--scores", tmp / "tasnorm.tsv",
        "--qmf", tmp / "qmf.tsv", "--trials", shifted("trials.tsv"),
        "--out", tmp / "fusion.tsv",
    ) == 0
    assert run(
        "fuse-apply", "--model", tmp / "fusion.tsv",
        "--scores", tmp / "asnorm.tsv", "--scores", tmp / "tasnorm.tsv",
        "--qmf", tmp / "qmf.tsv", "--out", tmp / "fused.tsv",
    ) == 0
    assert run(
        "eval", "--scores", tmp / "fused.tsv", "--trials", shifted("trials.tsv"),
        "--metrics", "eer",
    ) == 0
    eer_value = float(capsys.readouterr().out.split("\t")[1])
    assert 0.0 <= eer_value <= 0.5


def test_fuse_apply_identity_model(scored, tmp_path):
    model = tmp_path / "identity.tsv"
    store_io.write_model(model, {"bias": 0.0, "x.1": 1.0})
    out = tmp_path / "fused.tsv"
    assert run(
        "fuse-apply", "--model", model, "--scores", scored["scores"], "--out", out
    ) == 0
    assert out.read_bytes() == Path(scored["scores"]).read_bytes()


def test_synth_then_eval_clean(tmp_path, capsys):
    assert run("synth", "--config", FIXTURES / "clean.cfg", "--out-dir", tmp_path / "d") == 0
    d = tmp_path / "d"
    combined = tmp_path / "all.tsv"
    enroll = store_io.read_embeddings(d / "embeddings_enroll.tsv")
    test = store_io.read_embeddings(d / "embeddings_test.tsv")
    store_io.write_embeddings(
        combined,
        store_io.EmbeddingStore(
            enroll.dim, enroll.ids + test.ids, np.vstack([enroll.vectors, test.vectors])
        ),
    )
    assert run(
        "score", "--embeddings", combined, "--enroll-map", d / "enroll_map.tsv",
        "--trials", d / "trials.tsv", "--durations", d / "durations.tsv",
        "--out", tmp_path / "raw.tsv",
    ) == 0
    assert run(
        "eval", "--scores", tmp_path / "raw.tsv", "--trials", d / "trials.tsv",
        "--metrics", "eer",
    ) == 0
    out = capsys.readouterr().out
    assert float(out.split("\t")[1]) < 0.01


def test_augment_cli_deterministic(tmp_path):
    in_dir = tmp_path / "in"
    noise_dir = tmp_path / "noise" / "noise"
    rir_dir = tmp_path / "rir"
    for d in (in_dir, noise_dir, rir_dir):
        d.mkdir(parents=True)
    rng = np.random.default_rng(8)
    for i in range(2):
        write_wav(in_dir / f"utt{i}.wav", Waveform(0.3 * rng.standard_normal(3200)))
    write_wav(noise_dir / "n0.wav", Waveform(0.2 * rng.standard_normal(5000)))
    rir = np.zeros(64)
    rir[0] = 1.0
    rir[20] = 0.3
    write_wav(rir_dir / "r0.wav", Waveform(rir))
    plan = tmp_path / "plan.tsv"
    plan.write_text(
        "reverb_prob\t1.0\nclip_prob\t1.0\nspeech_dur_s\t0.15\nnoise_dur_s\t0.2\n"
        "noise.noise\t-3,15,on\n"
    )

    out1, out2 = tmp_path / "out1", tmp_path / "out2"
    for out in (out1, out2):
        assert run(
            "augment", "--in", in_dir, "--out", out, "--plan", plan,
            "--noise-dir", tmp_path / "noise", "--rir-dir", rir_dir, "--seed", 11,
        ) == 0
    for name in ("utt0.wav", "utt1.wav", "utt0.meta", "utt1.meta"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    meta = dict(
        line.split("\t") for line in (out1 / "utt0.meta").read_text().splitlines()
    )
    assert meta["reverb"] == "1" and meta["clip"] == "1"
    assert meta["noise_class"] == "noise"
    assert -3.0 <= float(meta["snr_db"]) <= 15.0


def test_augment_missing_noise_dir_exits_3(tmp_path):
    in_dir = tmp_path / "in"
    in_dir.mkdir()
    write_wav(in_dir / "a.wav", Waveform(np.ones(1600) * 0.1))
    plan = tmp_path / "plan.tsv"
    plan.write_text("noise.noise\t0,5,on\nspeech_dur_s\t0.05\nnoise_dur_s\t0.1\n")
    code = run("augment", "--in", in_dir, "--out", tmp_path / "o", "--plan", plan)
    assert code == 3
