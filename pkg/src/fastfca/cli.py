"""Command-line interface: ``separate``, ``simulate``, ``benchmark``, ``evaluate``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
All commands are deterministic for a fixed seed in single-thread mode; the
benchmark writes its seed-deterministic metrics and its timing measurements
to separate CSV files so the former can be compared byte-for-byte.
"""

import argparse
import contextlib
import csv
import dataclasses
import json
import sys
from pathlib import Path

from .config import ALGORITHMS, INITIALIZERS, build_config, parse_config_file
from .errors import (
    ConfigurationError,
    FastFcaError,
    MetricError,
    PipelineError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

SCHEMA_VERSION = 1

RESULTS_CSV_HEADER = [
    "schema_version",
    "rt60_ms",
    "trial",
    "algorithm",
    "sdr_source1_db",
    "sdr_source2_db",
    "sdr_mean_db",
]

TIMING_CSV_HEADER = [
    "schema_version",
    "rt60_ms",
    "rtf_fca",
    "rtf_fastfca",
    "speedup",
    "em_seconds_fca",
    "em_seconds_fastfca",
]

EVAL_CSV_HEADER = [
    "schema_version",
    "algorithm",
    "sdr_source1_db",
    "sdr_source2_db",
    "sdr_mean_db",
    "rtf",
]


def _thread_limit(n):
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=n)
    except ImportError:
        return contextlib.nullcontext()


def _fmt(x):
    return f"{x:.10g}"


def _check_finite(arrays, stage):
    import numpy as np

    for arr in arrays:
        if not np.isfinite(arr).all():
            raise PipelineError(stage)


def _load_input(path):
    from .wavio import read_wav

    audio = read_wav(path)
    if audio.channels < 2:
        raise ConfigurationError(
            f"{path}: separation needs a multichannel input, got {audio.channels} channel(s)"
        )
    return audio


def _build_init(spec, cfg):
    from .initializers import init_from_masks, init_random

    if cfg.init == "masks":
        return init_from_masks(spec)
    return init_random(spec, seed=cfg.seed)


def _engines(algorithm):
    from .conventional import fca_run
    from .fast import fastfca_run

    table = {"fca": ("FCA", fca_run), "fastfca": ("FastFCA", fastfca_run)}
    if algorithm == "both":
        return [table["fca"], table["fastfca"]]
    return [table[algorithm]]


def _warm_kernels():
    import numpy as np

    from .conventional import fca_run
    from .fast import fastfca_run
    from .initializers import init_random

    rng = np.random.default_rng(0)
    y = rng.standard_normal((4, 3, 2)) + 1j * rng.standard_normal((4, 3, 2))
    init = init_random(y, seed=0)
    fca_run(y, init, 1, compute_likelihood=False)
    fastfca_run(y, init, 1, compute_likelihood=False)


def _refuse_overwrite(paths, force):
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise ConfigurationError(
            "refusing to overwrite existing files (use --force): " + ", ".join(existing)
        )


def _config_from_args(args, **extra):
    file_values = parse_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {
        "algorithm": getattr(args, "algorithm", None),
        "em_iterations": getattr(args, "iterations", None),
        "seed": getattr(args, "seed", None),
        "init": getattr(args, "init", None),
        "threads": getattr(args, "threads", None),
        "out_dir": getattr(args, "out_dir", None),
        "frame_length": getattr(args, "frame_length", None),
        "frame_shift": getattr(args, "frame_shift", None),
        "channels": getattr(args, "channels", None),
        "duration": getattr(args, "duration", None),
        "trials": getattr(args, "trials", None),
    }
    overrides.update(extra)
    return build_config(file_values, overrides)


def _separate_once(spec, init, cfg, label, run):
    import numpy as np

    from .stft import stft_synthesize
    from .types import SpectrogramTensor

    result = run(spec.data, init, cfg.em_iterations)
    _check_finite([result.images], f"separation ({label})")
    outputs = []
    for j in range(2):
        image = SpectrogramTensor(
            result.images[j],
            sample_rate=cfg.sampling_frequency,
            frame_length=cfg.frame_length,
            frame_shift=cfg.frame_shift,
            original_length=spec.original_length,
        )
        audio = stft_synthesize(image, cfg.frame_length, cfg.frame_shift)
        _check_finite([audio.samples], f"synthesis ({label})")
        outputs.append(audio)
    return result, outputs


def _run_report(result):
    return {
        "algorithm": result.algorithm,
        "loglik_trace": result.loglik_trace,
        "iteration_seconds": result.iteration_seconds,
        "em_seconds": result.em_seconds,
        "op_counts": dataclasses.asdict(result.op_counts),
    }


def cmd_separate(args):
    import numpy as np

    from . import _backend
    from .stft import stft_analyze

    cfg = _config_from_args(args)
    audio = _load_input(args.input)
    cfg = dataclasses.replace(cfg, sampling_frequency=audio.sample_rate)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem

    try:
        spec = stft_analyze(audio, cfg.frame_length, cfg.frame_shift)
    except ConfigurationError as exc:
        if "non-finite" in str(exc):
            raise PipelineError("stft") from exc
        raise
    init = _build_init(spec, cfg)

    report = {
        "schema_version": SCHEMA_VERSION,
        "input": str(args.input),
        "backend": _backend.backend_name(),
        "config": dataclasses.asdict(cfg),
        "runs": {},
    }
    images = {}
    wav_paths = []
    from .wavio import write_wav

    for label, run in _engines(cfg.algorithm):
        result, outputs = _separate_once(spec, init, cfg, label, run)
        report["runs"][label] = _run_report(result)
        images[label] = result.images
        for j, out in enumerate(outputs, start=1):
            path = out_dir / f"{stem}_{label.lower()}_source{j}.wav"
            write_wav(path, out)
            wav_paths.append(path)

    if len(images) == 2:
        diff = float(np.abs(images["FCA"] - images["FastFCA"]).max())
        report["equivalence"] = {"max_image_deviation": diff}
        print(f"max image deviation FCA vs FastFCA: {diff:.3e}")

    report_path = out_dir / f"{stem}_report.json"
    report_path.write_text(json.dumps(report, indent=2))
    for path in wav_paths:
        print(f"wrote {path}")
    print(f"wrote {report_path}")
    return EXIT_OK


def cmd_simulate(args):
    from .simulate import RoomSpec, mix, source_pair, synth_rir
    from .wavio import write_wav

    cfg = _config_from_args(args, rt60=args.rt60)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / name for name in ("mixture.wav", "image1.wav", "image2.wav")]
    _refuse_overwrite(paths, args.force)

    sources = source_pair(cfg.duration, cfg.sampling_frequency, cfg.seed)
    room = RoomSpec(
        rt60=cfg.rt60,
        channels=cfg.channels,
        sample_rate=cfg.sampling_frequency,
        seed=cfg.seed,
    )
    truth = mix(sources, synth_rir(room))
    for path, audio in zip(paths, (truth.mixture, *truth.images)):
        write_wav(path, audio)
        print(f"wrote {path}")
    return EXIT_OK


def _aggregate_rtf(em_seconds, duration):
    import numpy as np

    return float(np.median(em_seconds)) / duration


def cmd_benchmark(args):
    import numpy as np

    from .metrics import sdr_pairing
    from .simulate import RT60_PRESETS, RoomSpec, mix, source_pair, synth_rir
    from .stft import stft_analyze

    cfg = _config_from_args(args)
    rt60_list = args.rt60 or list(RT60_PRESETS)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    _warm_kernels()

    result_rows = []
    timing_rows = []
    chart_sdr = {"FCA": [], "FastFCA": []}
    chart_rtf = {"FCA": [], "FastFCA": []}

    for cond_index, rt60 in enumerate(rt60_list):
        per_algo_sdr = {"FCA": [], "FastFCA": []}
        per_algo_em = {"FCA": [], "FastFCA": []}
        for trial in range(cfg.trials):
            seed = cfg.seed + 1000 * cond_index + trial
            sources = source_pair(cfg.duration, cfg.sampling_frequency, seed)
            room = RoomSpec(
                rt60=rt60,
                channels=cfg.channels,
                sample_rate=cfg.sampling_frequency,
                seed=seed + 500,
            )
            truth = mix(sources, synth_rir(room))
            spec = stft_analyze(truth.mixture, cfg.frame_length, cfg.frame_shift)
            init = _build_init(spec, cfg)
            for label, run in _engines("both"):
                result, outputs = _separate_once(spec, init, cfg, label, run)
                values, _ = sdr_pairing(outputs, truth.images)
                per_algo_sdr[label].append(values)
                per_algo_em[label].append(result.em_seconds)
                result_rows.append(
                    [
                        SCHEMA_VERSION,
                        _fmt(rt60 * 1000),
                        trial,
                        label,
                        _fmt(values[0]),
                        _fmt(values[1]),
                        _fmt(np.mean(values)),
                    ]
                )
        for label in ("FCA", "FastFCA"):
            mean_sdr = float(np.mean(per_algo_sdr[label]))
            result_rows.append(
                [
                    SCHEMA_VERSION,
                    _fmt(rt60 * 1000),
                    "mean",
                    label,
                    _fmt(float(np.mean([v[0] for v in per_algo_sdr[label]]))),
                    _fmt(float(np.mean([v[1] for v in per_algo_sdr[label]]))),
                    _fmt(mean_sdr),
                ]
            )
            chart_sdr[label].append(mean_sdr)
            chart_rtf[label].append(_aggregate_rtf(per_algo_em[label], cfg.duration))
        rtf_fca = chart_rtf["FCA"][-1]
        rtf_fast = chart_rtf["FastFCA"][-1]
        timing_rows.append(
            [
                SCHEMA_VERSION,
                _fmt(rt60 * 1000),
                _fmt(rtf_fca),
                _fmt(rtf_fast),
                _fmt(rtf_fca / rtf_fast),
                _fmt(float(np.sum(per_algo_em["FCA"]))),
                _fmt(float(np.sum(per_algo_em["FastFCA"]))),
            ]
        )
        print(
            f"rt60={rt60*1000:.0f}ms: SDR FCA={chart_sdr['FCA'][-1]:.2f} dB,"
            f" FastFCA={chart_sdr['FastFCA'][-1]:.2f} dB,"
            f" RTF {rtf_fca:.4f} vs {rtf_fast:.4f} (speedup {rtf_fca / rtf_fast:.1f}x)"
        )

    results_path = out_dir / "benchmark_results.csv"
    with open(results_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_CSV_HEADER)
        writer.writerows(result_rows)
    timing_path = out_dir / "benchmark_timing.csv"
    with open(timing_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMING_CSV_HEADER)
        writer.writerows(timing_rows)

    labels = [f"{int(round(rt * 1000))}" for rt in rt60_list]
    _bar_chart(
        out_dir / "rtf.svg", labels, chart_rtf, "Real time factor", log_scale=True
    )
    _bar_chart(out_dir / "sdr.svg", labels, chart_sdr, "SDR (dB)", log_scale=False)
    for path in (results_path, timing_path, out_dir / "rtf.svg", out_dir / "sdr.svg"):
        print(f"wrote {path}")
    return EXIT_OK


def _bar_chart(path, conditions, series, ylabel, log_scale):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    x = np.arange(len(conditions))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for k, (label, values) in enumerate(series.items()):
        ax.bar(x + (k - 0.5) * width, values, width, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels(conditions)
    ax.set_xlabel("RT60 (ms)")
    ax.set_ylabel(ylabel)
    if log_scale:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_evaluate(args):
    import numpy as np

    from .metrics import sdr_pairing
    from .wavio import read_wav

    estimates = [read_wav(p) for p in args.estimates]
    references = [read_wav(p) for p in args.references]
    for est, ref in zip(estimates, references):
        if est.samples.shape != ref.samples.shape:
            raise MetricError(
                "estimate/reference shapes differ; lengths and channel counts must match"
            )
    values, perm = sdr_pairing(estimates, references, max_shift=args.max_shift)
    mean = float(np.mean(values))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "schema_version": SCHEMA_VERSION,
        "algorithm": args.label,
        "sdr_per_source_db": values,
        "sdr_mean_db": mean,
        "pairing": list(perm),
    }
    json_path = out_dir / "evaluation.json"
    json_path.write_text(json.dumps(report, indent=2))
    csv_path = out_dir / "evaluation.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVAL_CSV_HEADER)
        writer.writerow(
            [SCHEMA_VERSION, args.label, _fmt(values[0]), _fmt(values[1]), _fmt(mean), ""]
        )
    print(f"SDR: source1={values[0]:.2f} dB source2={values[1]:.2f} dB mean={mean:.2f} dB")
    print(f"wrote {json_path}")
    print(f"wrote {csv_path}")
    return EXIT_OK


def _add_common(parser, with_engine=True):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--threads", type=int, help="thread cap (default 1)")
    parser.add_argument("--out-dir", dest="out_dir", help="output directory")
    if with_engine:
        parser.add_argument("--algorithm", choices=ALGORITHMS)
        parser.add_argument("--iterations", type=int, help="EM iterations")
        parser.add_argument("--init", choices=INITIALIZERS)
        parser.add_argument("--frame-length", dest="frame_length", type=int)
        parser.add_argument("--frame-shift", dest="frame_shift", type=int)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fastfca",
        description="Two-source multichannel separation with full-rank spatial covariance models",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("separate", help="separate a multichannel WAV into two source images")
    p.add_argument("input", help="multichannel WAV file")
    _add_common(p)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("simulate", help="synthesize a reverberant two-source mixture")
    p.add_argument("--rt60", type=float, default=0.30, help="reverberation time in seconds")
    p.add_argument("--channels", type=int)
    p.add_argument("--duration", type=float, help="source length in seconds")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    _add_common(p, with_engine=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="run the RT60 sweep comparing both engines")
    p.add_argument(
        "--rt60",
        type=float,
        nargs="*",
        help="RT60 conditions in seconds (default: the six presets)",
    )
    p.add_argument("--trials", type=int, help="trials per condition (default 10)")
    p.add_argument("--channels", type=int)
    p.add_argument("--duration", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("evaluate", help="pairing-optimal SDR of estimates against references")
    p.add_argument("--estimates", nargs=2, required=True, metavar="WAV")
    p.add_argument("--references", nargs=2, required=True, metavar="WAV")
    p.add_argument("--max-shift", dest="max_shift", type=int, default=31)
    p.add_argument("--label", default="FastFCA", help="algorithm label for the report")
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    threads = getattr(args, "threads", None) or 1
    try:
        with _thread_limit(threads):
            return args.func(args)
    except (ConfigurationError, MetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FastFcaError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Exception as exc:
        import numpy as np

        if isinstance(exc, np.linalg.LinAlgError):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        raise


if __name__ == "__main__":
    sys.exit(main())
