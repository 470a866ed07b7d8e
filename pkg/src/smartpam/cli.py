"""Command-line entry point: ``smartpam <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings

import numpy as np

from . import fixtures
from .config import SimConfig, load_config, save_config
from .device import deadline_check, simulate
from .errors import SmartPamError
from .modelfile import atomic_write, load_model, save_model
from .nn import layer_lengths, model_size_bytes, param_count
from .stream import DetectionConfig, classify, detection_cycles, iter_records, check_rate, windows
from .tiler import make_tile_plan, peak_activation_bytes, receptive_field, smallest_slices_for_budget
from .wavio import read_wav, write_wav


def _emit(text: str, out: str | None = None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _load(path):
    try:
        return load_model(path)
    except OSError as exc:
        raise SmartPamError(f"cannot read model {path}: {exc.strerror}") from None


def _plan(model, n):
    return None if n is None else make_tile_plan(model, n)


def cmd_info(args):
    model = _load(args.model)
    lengths = layer_lengths(model.window_samples, model.conv_layers)
    counts = param_count(model)
    jump, size = receptive_field(model.conv_layers)
    lines = [
        f"window: {model.window_samples} samples at {model.sample_rate_hz} Hz ({model.window_ms:.2f} ms)",
        f"classes: {', '.join(model.class_labels)}",
        "layer,in_ch,out_ch,kernel,stride,dilation,activation,out_length,params",
    ]
    for i, (layer, n) in enumerate(zip(model.conv_layers, lengths[1:]), 1):
        lines.append(
            f"conv{i},{layer.in_channels},{layer.out_channels},{layer.kernel},{layer.stride},"
            f"{layer.dilation},{layer.activation.value},{n},{layer.param_count}"
        )
    d = model.dense
    lines.append(f"dense,{d.in_features},{d.out_features},,,,none,{d.out_features},{d.param_count}")
    lines += [
        f"receptive field: {size} samples, jump {jump}",
        f"params: conv {counts.conv}, dense {counts.dense}, total {counts.total}",
        f"size: {model_size_bytes(model)} bytes (float32)",
    ]
    _emit("\n".join(lines) + "\n")


def cmd_plan(args):
    model = _load(args.model)
    untiled = peak_activation_bytes(model)
    budget = None if args.budget_kb is None else int(round(args.budget_kb * 1000))
    lines = []
    n = args.slices
    scan = []
    if budget is not None:
        found, scan = smallest_slices_for_budget(model, budget)
        if args.slices is None:
            n = found
    if n is None and budget is None:
        raise SmartPamError("plan needs --slices N or --budget-kb B")
    plan = _plan(model, n)
    tiled = peak_activation_bytes(model, plan) if plan else None

    if args.json:
        doc = {"untiled": untiled.to_dict()}
        if plan:
            doc["plan"] = plan.to_dict()
            doc["tiled"] = tiled.to_dict()
        if budget is not None:
            doc["budget_bytes"] = budget
            doc["budget_scan"] = [{"n_slices": k, "peak_bytes": p} for k, p in scan]
            doc["smallest_fitting_slices"] = scan[-1][0] if scan and scan[-1][1] <= budget else None
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        if plan:
            lines.append(f"# plan: window={model.window_samples} final_length={plan.final_length} slices={plan.n_slices}")
            lines.append("slice,out_start,out_end,in_start,in_end,in_samples")
            for k, s in enumerate(plan.slices):
                lines.append(
                    f"{k},{s.out_range.start},{s.out_range.end},{s.in_range.start},{s.in_range.end},{len(s.in_range)}"
                )
        lines.append("# memory (" + untiled.assumptions + ")")
        lines.append("mode,slices,peak_bytes,peak_step")
        lines.append(f"untiled,,{untiled.peak_bytes},{untiled.peak_step.label}")
        if tiled:
            lines.append(f"tiled,{tiled.n_slices},{tiled.peak_bytes},{tiled.peak_step.label}")
            lines.append(f"# reduction: {untiled.peak_bytes / tiled.peak_bytes:.3f}x")
        if budget is not None:
            lines.append(f"# budget scan ({budget} bytes)")
            lines.append("slices,peak_bytes,fits")
            lines += [f"{k},{p},{int(p <= budget)}" for k, p in scan]
            if scan and scan[-1][1] <= budget:
                lines.append(f"# smallest slice count within budget: {scan[-1][0]}")
            else:
                lines.append("# no slice count fits the budget")
        _emit("\n".join(lines) + "\n", args.out)
    if args.figure and tiled:
        from .plotting import plot_memory

        plot_memory(untiled, tiled, args.figure, budget)


def _stream(path):
    return read_wav(path).stream


def cmd_infer(args):
    model = _load(args.model)
    stream = _stream(args.wav)
    check_rate(stream, model)
    records = list(iter_records(stream, model, _plan(model, args.plan)))
    _emit("".join(r.to_line() + "\n" for r in records), args.out)
    if args.figure:
        from .plotting import plot_window_classes

        plot_window_classes(records, model.class_labels, args.figure)


def cmd_detect(args):
    model = _load(args.model)
    stream = _stream(args.wav)
    config = DetectionConfig(cycle_seconds=args.cycle_s, threshold=args.threshold)
    outcomes = detection_cycles(stream, model, _plan(model, args.plan), config)
    _emit("".join(json.dumps(o.to_dict()) + "\n" for o in outcomes), args.out)


def cmd_simulate(args):
    model = _load(args.model)
    stream = _stream(args.wav)
    cfg = load_config(args.profile) if args.profile else SimConfig()
    report = simulate(stream, model, _plan(model, args.plan), args.mode, cfg.profile, cfg.timing, cfg.detection)
    doc = report.to_dict()
    deadline = deadline_check(cfg.timing)
    doc["deadline"] = {"met": deadline.met, "utilization": round(deadline.utilization, 6)}
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    if args.log:
        atomic_write(args.log, "".join(r.to_line() + "\n" for r in report.records))
    if args.figure:
        from .plotting import plot_shunt_trace

        plot_shunt_trace(cfg.profile, cfg.timing, args.figure)


def cmd_gen_model(args):
    model = fixtures.gen_fixture(args.arch, args.seed, args.weights)
    save_model(model, args.out)


def cmd_gen_wav(args):
    model = _load(args.model)
    samples = fixtures.demo_samples(model, args.silence_s, args.tone_s, args.label, args.amplitude)
    write_wav(args.out, samples, model.sample_rate_hz)


def cmd_gen_profile(args):
    save_config(SimConfig(), args.out)


def cmd_bench(args):
    model = _load(args.model)
    stream = _stream(args.wav)
    plan = _plan(model, args.plan)
    times = []
    for raw in windows(stream, model.window_samples):
        t0 = time.perf_counter()
        classify(raw, model, plan)
        times.append((time.perf_counter() - t0) * 1000.0)
    if not times:
        raise SmartPamError("stream shorter than one window")
    t = np.array(times)
    _emit(
        f"host time (this machine, not device time) over {len(t)} windows, "
        f"{'tiled ' + str(args.plan) + ' slices' if plan else 'untiled'}\n"
        f"mean_ms,p50_ms,p95_ms,max_ms\n"
        f"{t.mean():.3f},{np.percentile(t, 50):.3f},{np.percentile(t, 95):.3f},{t.max():.3f}\n"
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smartpam", description="Raw-audio CNN planning, streaming and device simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("info", help="architecture table, parameter counts, size")
    s.add_argument("model")
    s.set_defaults(func=cmd_info)

    s = sub.add_parser("plan", help="tile plan and activation-memory report")
    s.add_argument("model")
    s.add_argument("--slices", type=int)
    s.add_argument("--budget-kb", type=float, help="find the smallest slice count within this many kB (1 kB = 1000 B)")
    s.add_argument("--json", action="store_true")
    s.add_argument("--figure", help="write a memory-profile figure to this path")
    s.add_argument("--out")
    s.set_defaults(func=cmd_plan)

    for name, func, help_ in (("infer", cmd_infer, "per-window classification log"),
                              ("detect", cmd_detect, "detection outcome per cycle"),
                              ("bench", cmd_bench, "host-side per-window timing")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("model")
        s.add_argument("wav")
        s.add_argument("--plan", type=int, metavar="N", help="run tiled with N slices")
        s.set_defaults(func=func)
        if name != "bench":
            s.add_argument("--out")
        if name == "infer":
            s.add_argument("--figure")
        if name == "detect":
            s.add_argument("--cycle-s", type=float, default=10.0)
            s.add_argument("--threshold", type=int, default=30)

    s = sub.add_parser("simulate", help="device timing/energy simulation")
    s.add_argument("model")
    s.add_argument("wav")
    s.add_argument("--mode", choices=["f1", "f2"], required=True)
    s.add_argument("--profile", help="profile file (defaults reproduce the 7.03/8.31 mJ cycle energies)")
    s.add_argument("--plan", type=int, metavar="N")
    s.add_argument("--out")
    s.add_argument("--log", help="write the F2 window log here")
    s.add_argument("--figure", help="write a shunt-voltage trace figure here")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("gen-model", help="write a fixture model")
    s.add_argument("--arch", choices=sorted(fixtures.ARCHITECTURES), default="small")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--weights", choices=fixtures.WEIGHT_MODES, default="random")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_model)

    s = sub.add_parser("gen-wav", help="write a silence/tone/silence demo WAV for a model")
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--label", choices=sorted(fixtures.TONE_HARMONIC), default="male")
    s.add_argument("--silence-s", type=float, default=2.0)
    s.add_argument("--tone-s", type=float, default=2.0)
    s.add_argument("--amplitude", type=int, default=8000)
    s.set_defaults(func=cmd_gen_wav)

    s = sub.add_parser("gen-profile", help="write the default device profile")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_profile)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            args.func(args)
        except (SmartPamError, OSError) as exc:
            msg = exc.strerror if isinstance(exc, OSError) and exc.strerror else str(exc)
            print(f"smartpam: error: {msg}", file=sys.stderr)
            code = 1
    for w in caught:
        print(f"smartpam: warning: {w.message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
