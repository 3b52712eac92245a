"""Waveform corruption: SNR-targeted noise mixing, babble, clipping,
RIR reverberation, and the speech-shorter-than-noise window policy.

Conventions, fixed once here:
  - 16 kHz mono throughout; durations in seconds map to samples via the
    fixed rate.
  - SNR is measured over full-window RMS, not speech-active regions;
    windows are longer than the speech by design, so a full-window
    reference is the only unambiguous one.
  - Every random choice flows through one numpy Generator in a fixed
    draw order, so results are bit-reproducible given (inputs, seed).

Mixing can transiently push samples outside the nominal [-1, 1] range;
values are clamped only at WAV write time.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

from .errors import DataError, DegenerateInputError

SAMPLE_RATE = 16000
CLIP_PERCENT_RANGE = (3, 8)  # inclusive integer draw for amplitude clipping


@dataclass(eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveforms are mono (1-D)")
        if self.sample_rate != SAMPLE_RATE:
            raise ValueError(f"sample rate must be {SAMPLE_RATE}, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


def rms(samples) -> float:
    x = np.asarray(samples, dtype=np.float64)
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0


def seconds_to_samples(seconds) -> int:
    return int(round(seconds * SAMPLE_RATE))


def derive_seed(seed: int, file_id: str) -> int:
    """Per-file sub-seed: base seed XOR a stable 64-bit hash of the id."""
    digest = hashlib.blake2s(file_id.encode("utf-8"), digest_size=8).digest()
    return (seed ^ int.from_bytes(digest, "little")) & 0xFFFFFFFFFFFFFFFF


# ---------------------------------------------------------------------------
# primitive operations

def mix_at_snr(speech: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """speech + g * noise with g chosen so the component SNR equals
    snr_db exactly: g = (rms(speech) / rms(noise)) * 10^(-snr_db / 20)."""
    if len(speech) != len(noise):
        raise ValueError("speech and noise must be equal length for mixing")
    rms_s = rms(speech.samples)
    rms_n = rms(noise.samples)
    if rms_s == 0.0 or rms_n == 0.0:
        raise DegenerateInputError("cannot mix at a target SNR with silent input")
    gain = (rms_s / rms_n) * 10.0 ** (-snr_db / 20.0)
    return Waveform(speech.samples + gain * noise.samples)


def _loop_crop(samples, length, rng):
    """Random-phase crop; sources shorter than length wrap around."""
    start = int(rng.integers(0, samples.size))
    idx = (start + np.arange(length)) % samples.size
    return samples[idx]


def _loop_crop_nonsilent(samples, length, rng):
    for _ in range(100):
        crop = _loop_crop(samples, length, rng)
        if rms(crop) > 0.0:
            return crop
    raise DegenerateInputError("could not draw a non-silent crop from source")


def make_babble(speeches, count: int, length: int, rng) -> Waveform:
    """Sum of `count` randomly chosen, randomly cropped speech sources,
    RMS-equalized (to their mean crop RMS) before summation."""
    lo, hi = 3, 7
    if not lo <= count <= hi:
        raise ValueError(f"babble speech count must be in [{lo}, {hi}], got {count}")
    if len(speeches) < count:
        raise DataError(
            f"babble needs {count} sources, only {len(speeches)} available"
        )
    chosen = rng.choice(len(speeches), size=count, replace=False)
    crops = [_loop_crop_nonsilent(speeches[i].samples, length, rng) for i in chosen]
    levels = np.array([rms(c) for c in crops])
    target = float(levels.mean())
    mixed = np.zeros(length)
    for crop, level in zip(crops, levels):
        mixed += crop * (target / level)
    return Waveform(mixed)


def hard_clip(speech: Waveform, threshold: float) -> Waveform:
    """Clamp to [-threshold, threshold]. Samples within bounds pass
    through bit-exact; a second clamp at the same level changes nothing."""
    if threshold < 0:
        raise ValueError("clip threshold must be nonnegative")
    return Waveform(np.clip(speech.samples, -threshold, threshold))


def clip_amplitude(speech: Waveform, n_percent: int) -> Waveform:
    """Hard-limit to t = (n_percent/100) * max|x|, the level derived once
    from the input; silent input is returned unchanged."""
    lo, hi = CLIP_PERCENT_RANGE
    if not lo <= n_percent <= hi:
        raise ValueError(f"clip percent must be in [{lo}, {hi}], got {n_percent}")
    if len(speech) == 0:
        raise ValueError("cannot clip an empty waveform")
    peak = float(np.max(np.abs(speech.samples)))
    if peak == 0.0:
        return Waveform(speech.samples.copy())
    return hard_clip(speech, (n_percent / 100.0) * peak)


def _place(samples, window_n, rng):
    if window_n < samples.size:
        raise ValueError(
            f"window of {window_n} samples is shorter than speech ({samples.size})"
        )
    offset = int(rng.integers(0, window_n - samples.size + 1))
    out = np.zeros(window_n)
    out[offset:offset + samples.size] = samples
    return out, offset


def place_speech_in_noise_window(speech: Waveform, window_s: float, rng) -> Waveform:
    """Zero-padded window of window_s seconds with the speech at a
    uniformly random offset."""
    out, _ = _place(speech.samples, seconds_to_samples(window_s), rng)
    return Waveform(out)


def convolve_rir(speech: Waveform, rir: Waveform) -> Waveform:
    """Full convolution cut to the input length, aligned at the RIR's
    peak-magnitude tap, then renormalized to the input's original peak
    (so reverb never changes the level the clipping stage sees)."""
    if len(rir) == 0 or not np.any(rir.samples):
        raise DegenerateInputError("RIR is empty or all-zero")
    full = np.convolve(speech.samples, rir.samples)
    peak_tap = int(np.argmax(np.abs(rir.samples)))
    out = full[peak_tap:peak_tap + len(speech)]
    peak_in = float(np.max(np.abs(speech.samples)))
    peak_out = float(np.max(np.abs(out)))
    if peak_out > 0.0:
        out = out * (peak_in / peak_out)
    return Waveform(out)


# ---------------------------------------------------------------------------
# plans

@dataclass
class NoiseClass:
    name: str
    snr_lo: float
    snr_hi: float
    enabled: bool = True

    def __post_init__(self):
        if self.snr_lo > self.snr_hi:
            raise ValueError(f"SNR range for {self.name!r} has lo > hi")


def default_noise_classes():
    # music exists but stays off by default: it hurt in this condition
    return [
        NoiseClass("babble", 13.0, 20.0),
        NoiseClass("music", 5.0, 15.0, enabled=False),
        NoiseClass("noise", -3.0, 15.0),
    ]


@dataclass
class AugmentPlan:
    reverb_prob: float = 0.5
    clip_prob: float = 0.25
    noise_classes: list[NoiseClass] = field(default_factory=default_noise_classes)
    babble_count_range: tuple[int, int] = (3, 7)
    speech_dur_s: float = 1.8
    noise_dur_s: float = 2.4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.reverb_prob <= 1.0 or not 0.0 <= self.clip_prob <= 1.0:
            raise ValueError("probabilities must be in [0, 1]")
        if self.noise_dur_s < self.speech_dur_s:
            raise ValueError("noise window must be at least as long as the speech")
        lo, hi = self.babble_count_range
        if not (3 <= lo <= hi <= 7):
            raise ValueError("babble count range must sit inside [3, 7]")


@dataclass
class AugmentSources:
    """Raw material per noise class, plus room impulse responses."""

    noise: dict[str, list[Waveform]] = field(default_factory=dict)
    rirs: list[Waveform] = field(default_factory=list)


def apply_plan(speech: Waveform, plan: AugmentPlan, sources: AugmentSources, seed=None):
    """One corrupted window plus a metadata record of what was applied.

    Fixed draw order: speech crop, placement offset, reverb Bernoulli
    (then RIR index), noise class + SNR + material, clip Bernoulli (then
    N). Composition: place -> reverb? -> mix -> clip?.
    """
    used_seed = plan.seed if seed is None else seed
    rng = np.random.default_rng(used_seed)
    meta = {"seed": used_seed}

    speech_n = seconds_to_samples(plan.speech_dur_s)
    x = speech.samples
    if x.size > speech_n:
        offset = int(rng.integers(0, x.size - speech_n + 1))
        x = x[offset:offset + speech_n]
        meta["speech_crop_offset"] = offset
    elif x.size < speech_n:
        x = np.concatenate([x, np.zeros(speech_n - x.size)])
        meta["speech_pad_samples"] = speech_n - speech.samples.size

    placed, place_offset = _place(x, seconds_to_samples(plan.noise_dur_s), rng)
    window = Waveform(placed)
    meta["place_offset"] = place_offset

    do_reverb = bool(rng.random() < plan.reverb_prob)
    meta["reverb"] = int(do_reverb)
    if do_reverb:
        if not sources.rirs:
            raise DataError("reverb requested but no RIR material supplied")
        rir_index = int(rng.integers(0, len(sources.rirs)))
        window = convolve_rir(window, sources.rirs[rir_index])
        meta["rir_index"] = rir_index

    enabled = [c for c in plan.noise_classes if c.enabled]
    if enabled:
        cls = enabled[int(rng.integers(0, len(enabled)))]
        snr_db = float(rng.uniform(cls.snr_lo, cls.snr_hi))
        material = sources.noise.get(cls.name, [])
        if not material:
            raise DataError(f"noise class {cls.name!r} enabled but has no material")
        if cls.name == "babble":
            lo, hi = plan.babble_count_range
            count = int(rng.integers(lo, hi + 1))
            noise = make_babble(material, count, len(window), rng)
            meta["babble_count"] = count
        else:
            src_index = int(rng.integers(0, len(material)))
            noise = Waveform(
                _loop_crop_nonsilent(material[src_index].samples, len(window), rng)
            )
            meta["noise_source_index"] = src_index
        window = mix_at_snr(window, noise, snr_db)
        meta["noise_class"] = cls.name
        meta["snr_db"] = snr_db

    do_clip = bool(rng.random() < plan.clip_prob)
    meta["clip"] = int(do_clip)
    if do_clip:
        lo, hi = CLIP_PERCENT_RANGE
        n_percent = int(rng.integers(lo, hi + 1))
        window = clip_amplitude(window, n_percent)
        meta["clip_percent"] = n_percent

    return window, meta


def parse_plan(path) -> AugmentPlan:
    """key<TAB>value plan file.

    Scalar keys: reverb_prob, clip_prob, speech_dur_s, noise_dur_s, seed,
    babble_count (as 'lo,hi'). Noise classes: noise.<name> with value
    'snr_lo,snr_hi,on|off'. Classes replace the defaults entirely when
    any noise.* key is present.
    """
    scalars = {}
    classes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise DataError.at_line(path, lineno, "expected 'key<TAB>value'")
            key, value = fields
            if key.startswith("noise."):
                parts = value.split(",")
                if len(parts) != 3 or parts[2] not in ("on", "off"):
                    raise DataError.at_line(
                        path, lineno, f"noise class needs 'lo,hi,on|off', got {value!r}"
                    )
                try:
                    classes.append(
                        NoiseClass(
                            key[len("noise."):],
                            float(parts[0]),
                            float(parts[1]),
                            parts[2] == "on",
                        )
                    )
                except ValueError as exc:
                    raise DataError.at_line(path, lineno, str(exc)) from None
            else:
                scalars[key] = (value, lineno)

    def take(key, conv, default):
        if key not in scalars:
            return default
        value, lineno = scalars.pop(key)
        try:
            return conv(value)
        except ValueError:
            raise DataError.at_line(path, lineno, f"bad value for {key!r}: {value!r}") from None

    def int_pair(value):
        lo, hi = value.split(",")
        return int(lo), int(hi)

    kwargs = {
        "reverb_prob": take("reverb_prob", float, 0.5),
        "clip_prob": take("clip_prob", float, 0.25),
        "speech_dur_s": take("speech_dur_s", float, 1.8),
        "noise_dur_s": take("noise_dur_s", float, 2.4),
        "seed": take("seed", int, 0),
        "babble_count_range": take("babble_count", int_pair, (3, 7)),
    }
    if scalars:
        raise DataError(f"{path}: unknown keys {sorted(scalars)}")
    if classes:
        kwargs["noise_classes"] = classes
    try:
        return AugmentPlan(**kwargs)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# WAV and sidecar I/O

def read_wav(path) -> Waveform:
    """16-bit signed PCM mono at 16 kHz; anything else is a data error."""
    try:
        rate, data = wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None
    if rate != SAMPLE_RATE:
        raise DataError(f"{path}: sample rate {rate}, expected {SAMPLE_RATE}")
    if data.dtype != np.int16:
        raise DataError(f"{path}: sample format {data.dtype}, expected int16")
    if data.ndim != 1:
        raise DataError(f"{path}: {data.shape[1]} channels, expected mono")
    return Waveform(data.astype(np.float64) / 32768.0)


def write_wav(path, wave: Waveform, dither_seed: int | None = 0):
    """Clamp to [-1, 1] and quantize to 16-bit with TPDF dither.

    The dither RNG is seeded so writes stay bit-reproducible;
    dither_seed=None quantizes by plain rounding.
    """
    x = np.clip(wave.samples, -1.0, 1.0) * 32767.0
    if dither_seed is None:
        q = np.rint(x)
    else:
        rng = np.random.default_rng(dither_seed)
        dither = rng.random(x.size) - rng.random(x.size)  # triangular in (-1, 1)
        q = np.rint(x + dither)
    q = np.clip(q, -32768, 32767).astype(np.int16)
    wavfile.write(path, SAMPLE_RATE, q)


def write_sidecar(path, meta: dict):
    """key<TAB>value record of the operations applied to one file."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in meta.items():
            if isinstance(value, float):
                value = repr(value)
            fh.write(f"{key}\t{value}\n")
