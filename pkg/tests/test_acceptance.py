"""Exit criteria for the artifact, one test per criterion at its pinned tolerance.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary lists one
PASS/FAIL line per criterion.
"""

import json
import math

import numpy as np

from smartpam.cli import main
from smartpam.device import (
    DeviceProfile,
    TimingModel,
    baseline_cycle_energy_mj,
    cycle_energy_mj,
    deadline_check,
    simulate,
)
from smartpam.errors import CorruptModel, MalformedModel, UnsupportedVersion, WavError
from smartpam.fixtures import gen_fixture, pattern_stream
from smartpam.modelfile import MAGIC, dumps_model, loads_model
from smartpam.nn import conv_stack_forward, model_forward, model_size_bytes, models_equal
from smartpam.stream import AudioStream, count_windows, detection_cycle, window_duration_ms
from smartpam.tiler import (
    IndexRange,
    make_tile_plan,
    peak_activation_bytes,
    stack_receptive_range,
    tiled_conv_stack,
    tiled_forward,
)
from smartpam.wavio import parse_wav, wav_bytes

from oracles import dependency_hull, input_length_for, random_model, random_stack


def test_1_tiling_equivalence(accept):
    rng = np.random.default_rng(20260101)
    models = plans = 0
    mismatches = []
    while models < 200:
        n_layers = int(rng.integers(1, 7))
        final = int(rng.integers(1, 25))
        model = random_model(rng, n_layers, final, max_channels=8, max_kernel=5, max_dilation=4, max_stride=3)
        if model.window_samples > 2048:
            continue
        models += 1
        x = rng.normal(size=(1, model.window_samples)).astype(np.float32)
        ref_act = conv_stack_forward(x, model.conv_layers).tobytes()
        ref_probs, ref_label = model_forward(x, model)
        for n in range(1, model.final_length + 1):
            plan = make_tile_plan(model, n)
            plans += 1
            probs, label = tiled_forward(x, model, plan)
            if (tiled_conv_stack(x, model, plan).tobytes() != ref_act
                    or probs.tobytes() != ref_probs.tobytes() or label != ref_label):
                mismatches.append((models, n))
    accept(1, "tiling equivalence", not mismatches,
           f"{models} random models, {plans} plans, {len(mismatches)} non-bit-identical")


def test_2_receptive_field_oracle(accept):
    rng = np.random.default_rng(77)
    stacks = 0
    failures = []
    while stacks < 50:
        layers = random_stack(rng, int(rng.integers(1, 7)), max_channels=4, max_kernel=4,
                              max_dilation=3, max_stride=2, positive=True)
        final = int(rng.integers(1, 8))
        window = input_length_for(layers, final)
        if window > 400:
            continue
        stacks += 1
        a = int(rng.integers(0, final))
        b = int(rng.integers(a, final))
        predicted = stack_receptive_range(IndexRange(a, b), layers)
        traced = dependency_hull(layers, window, (a, b))
        if traced != (predicted.start, predicted.end):
            failures.append((stacks, traced, predicted))
    accept(2, "receptive-field oracle", not failures, f"{stacks} stacks traced, {len(failures)} mismatches")


def test_3_table_sizes(accept):
    small = model_size_bytes(gen_fixture("small"))
    large = model_size_bytes(gen_fixture("large"))
    ok = small == 3232 and abs(small - 3300) <= 330 and large == 59600 and abs(large - 62000) <= 6200
    accept(3, "model size arithmetic", ok,
           f"small {small} B vs 3.3 kB ({small / 3300 - 1:+.1%}), large {large} B vs 62 kB ({large / 62000 - 1:+.1%})")


def test_4_memory_ratio(accept):
    small = gen_fixture("small", seed=1)
    untiled = peak_activation_bytes(small).peak_bytes
    tiled = peak_activation_bytes(small, make_tile_plan(small, 5)).peak_bytes
    large = peak_activation_bytes(gen_fixture("large", weight_mode="zero")).peak_bytes
    ok = tiled <= untiled / 3 and large > 256_000
    accept(4, "memory reduction ratio", ok,
           f"small {untiled} B -> {tiled} B with 5 slices ({untiled / tiled:.2f}x, need >= 3x); "
           f"large untiled {large / 1000:.1f} kB (need > 256 kB)")


def test_5_window_arithmetic(accept):
    w_large = window_duration_ms(9000, 24000)
    w_small = window_duration_ms(1024, 24000)
    n = count_windows(10 * 24000, 1024)
    ok = w_large == 375.0 and abs(w_small - 42.67) <= 0.01 and n == 234
    accept(5, "window arithmetic", ok, f"9000 -> {w_large} ms, 1024 -> {w_small:.3f} ms, 10 s / 1024 -> {n} windows")


def test_6_detection_semantics(accept):
    model = gen_fixture("small", weight_mode="detector")
    a = detection_cycle(AudioStream(pattern_stream(model, ["noise"] * 4 + ["male"] * 30 + ["noise"] * 6)), model)
    b = detection_cycle(AudioStream(pattern_stream(model, ["male"] * 29 + ["female"] * 29 + ["noise"] * 20)), model)
    c = detection_cycle(AudioStream(np.zeros(10 * 24000, dtype=np.int16)), model)
    ok_a = a.triggered and a.trigger_class == "male" and a.windows_evaluated == 34 and a.counts["male"] == 30
    ok_b = not b.triggered and b.counts["male"] == 29 and b.counts["female"] == 29
    ok_c = not c.triggered and c.counts["noise"] == c.windows_evaluated == 234
    accept(6, "detection semantics", ok_a and ok_b and ok_c,
           f"(a) {a.trigger_class} at window {a.windows_evaluated} (30th positive = 34); "
           f"(b) 29+29 triggered={b.triggered}; (c) all-noise triggered={c.triggered}")


def test_7_timing_energy(accept):
    d = deadline_check(TimingModel(window_ms=42.7, preprocess_ms=16.0, inference_ms=20.0))
    profile, timing = DeviceProfile(), TimingModel()
    smart = cycle_energy_mj(profile, timing)
    base = baseline_cycle_energy_mj(profile, timing)
    overhead = smart / base - 1
    ok = (d.met and abs(d.utilization - 0.843) <= 0.001 and abs(smart - 8.31) <= 0.01
          and abs(base - 7.03) <= 0.01 and abs(overhead - 0.182) <= 0.001)
    accept(7, "timing/energy arithmetic", ok,
           f"utilization {d.utilization:.4f}, smart {smart:.4f} mJ, baseline {base:.4f} mJ, overhead {overhead:.2%}")


def test_8_simulator(accept):
    model = gen_fixture("small", weight_mode="detector")
    rng = np.random.default_rng(8)
    stream = AudioStream(rng.integers(-2000, 2000, 60 * 24000))
    fast = simulate(stream, model, mode="f2")
    slow = simulate(stream, model, mode="f2", timing=TimingModel(window_ms=42.7, preprocess_ms=20.0, inference_ms=30.0))
    ok = (fast.deadline_misses == 0 and fast.buffer_overruns == 0 and fast.windows_processed == fast.windows_total
          and slow.deadline_misses == slow.windows_processed
          and slow.deadline_misses + slow.buffer_overruns == slow.windows_total)
    accept(8, "simulator guarantees", ok,
           f"36/42.7 ms: {fast.deadline_misses} misses, {fast.buffer_overruns} overruns over {fast.windows_total} windows; "
           f"50/42.7 ms: {slow.deadline_misses} late + {slow.buffer_overruns} dropped of {slow.windows_total}")


def test_9_format_round_trips(accept):
    model = gen_fixture("small", seed=9)
    data = dumps_model(model)
    round_trip = models_equal(loads_model(data), model) and dumps_model(loads_model(data)) == data

    def rejected(blob, error):
        try:
            loads_model(blob)
        except error:
            return True
        return False

    flipped = bytearray(data)
    flipped[-1] ^= 0x40
    end = data.index(b"\n", len(MAGIC))
    meta = json.loads(data[len(MAGIC):end])
    meta["format_version"] = 2
    versioned = MAGIC + json.dumps(meta).encode() + data[end:]
    errors_ok = (rejected(data[:-4], MalformedModel) and rejected(bytes(flipped), CorruptModel)
                 and rejected(versioned, UnsupportedVersion))

    good = wav_bytes(np.arange(200) - 100, 24000)
    rng = np.random.default_rng(99)
    crashes = 0
    for _ in range(1200):
        mutated = bytearray(good)
        for pos in rng.integers(0, 44, int(rng.integers(1, 6))):
            mutated[pos] = int(rng.integers(0, 256))
        cut = int(rng.integers(8, len(mutated) + 1))
        try:
            parse_wav(bytes(mutated[:cut]))
        except WavError:
            pass
        except Exception:
            crashes += 1
    accept(9, "format round-trips", round_trip and errors_ok and crashes == 0,
           f"model round-trip {'bit-exact' if round_trip else 'BROKEN'}; error classes {'ok' if errors_ok else 'wrong'}; "
           f"1200 mutated WAV headers, {crashes} crashes")


def test_10_end_to_end_f1(accept, tmp_path, capsys):
    assert main(["gen-model", "--arch", "small", "--weights", "detector", "--out", str(tmp_path / "m.model")]) == 0
    assert main(["gen-wav", "--model", str(tmp_path / "m.model"), "--out", str(tmp_path / "demo.wav"),
                 "--silence-s", "2", "--tone-s", "2"]) == 0
    capsys.readouterr()
    code = main(["simulate", str(tmp_path / "m.model"), str(tmp_path / "demo.wav"), "--mode", "f1"])
    doc = json.loads(capsys.readouterr().out)
    w = window_duration_ms(1024, 24000)
    first_tone_window = math.ceil(2 * 24000 / 1024)
    thirtieth_end = (first_tone_window + 30) * w
    triggers = doc["triggers"]
    ok = code == 0 and len(triggers) == 1 and abs(triggers[0]["time_ms"] - thirtieth_end) <= w
    detail = f"{len(triggers)} trigger(s)"
    if triggers:
        detail += f", at {triggers[0]['time_ms']:.1f} ms vs 30th tone window ending {thirtieth_end:.1f} ms (window {w:.2f} ms)"
    accept(10, "end-to-end triggered recording", ok, detail)
