"""Command-line interface.

Four subcommands, all file-driven and deterministic for a fixed ``--seed``:

* ``scan``       displacement scan of detection-light suppression,
* ``depump``     simulate and fit a bright-state depumping curve,
* ``benchmark``  simulate and analyse a benchmarking campaign,
* ``fit``        re-analyse an existing dataset CSV.

Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 fit failure.  Floating-point values in CSV output carry 17 significant
digits so files round-trip exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import micromotion, rb
from .errors import AssumptionError, ConfigError, DataFormatError, FitError

DEFAULT_SCAN_POINTS = 400
DEFAULT_SCAN_MAX_INDEX = 6.0
DEFAULT_RESAMPLES = 200

DECAY_HEADER = ("length", "standard_mean", "standard_sem", "standard_fit",
                "dark_mean", "dark_sem", "dark_fit")


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_json(path, what: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{what} file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def _ensure_out(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# scan


def _cmd_scan(args) -> int:
    config = micromotion.TrapBeamConfig.from_json(args.config)
    out = _ensure_out(args.out)

    first = micromotion.first_null_modulation_index()
    second = micromotion.carrier_null_index((5.0, 6.0))
    ratio = config.rf_over_linewidth

    max_disp = micromotion.displacement_for_index(config, args.max_index)
    displacements = np.linspace(0.0, max_disp, args.points)
    indices, suppression = micromotion.suppression_scan(config, displacements)

    csv_path = os.path.join(out, "scan.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# first_null_modulation_index={_fmt(first)}\n")
        fh.write(f"# first_null_displacement_m="
                 f"{_fmt(micromotion.displacement_for_index(config, first))}\n")
        fh.write(f"# second_null_modulation_index={_fmt(second)}\n")
        fh.write(f"# second_null_displacement_m="
                 f"{_fmt(micromotion.displacement_for_index(config, second))}\n")
        writer = csv.writer(fh)
        writer.writerow(("displacement_m", "modulation_index", "suppression"))
        for d, n, s in zip(displacements, indices, suppression):
            writer.writerow((_fmt(d), _fmt(n), _fmt(s)))

    configured_index = micromotion.modulation_index(config)
    summary = {
        "config": config.to_dict(),
        "first_null": {
            "modulation_index": first,
            "displacement_m": micromotion.displacement_for_index(config, first),
            "suppression": micromotion.suppression_factor(first, ratio),
        },
        "second_null": {
            "modulation_index": second,
            "displacement_m": micromotion.displacement_for_index(config, second),
            "suppression": micromotion.suppression_factor(second, ratio),
        },
        "configured": {
            "displacement_m": config.displacement_m,
            "modulation_index": configured_index,
            "suppression": micromotion.suppression_factor(configured_index, ratio),
        },
    }
    _write_json(os.path.join(out, "scan.json"), summary)
    print(f"wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# depump


def _depump_times(config: dict) -> np.ndarray:
    if "times_s" in config:
        times = np.asarray(config["times_s"], dtype=float)
        if times.ndim != 1 or times.size < 3:
            raise ConfigError("times_s must list at least three times")
        return times
    if "t_max_s" in config:
        points = int(config.get("points", 12))
        if points < 3:
            raise ConfigError("points must be at least 3")
        t_max = float(config["t_max_s"])
        if t_max <= 0:
            raise ConfigError("t_max_s must be positive")
        return np.linspace(0.0, t_max, points)
    raise ConfigError("depump config needs either times_s or t_max_s")


def _cmd_depump(args) -> int:
    config = _load_json(args.config, "depump config")
    known = {"gamma_per_s", "times_s", "t_max_s", "points", "shots",
             "free_amplitude"}
    extra = set(config) - known
    if extra:
        raise ConfigError(f"unknown depump config keys: {', '.join(sorted(extra))}")
    if "gamma_per_s" not in config:
        raise ConfigError("depump config requires gamma_per_s")
    gamma = float(config["gamma_per_s"])
    if gamma <= 0:
        raise ConfigError("gamma_per_s must be positive")
    shots = int(config.get("shots", 1000))
    if shots < 1:
        raise ConfigError("shots must be positive")
    free_amplitude = bool(config.get("free_amplitude", False))
    times = _depump_times(config)

    rng = np.random.default_rng(args.seed)
    probs = micromotion.depump_probability(gamma, times)
    counts = rng.binomial(shots, probs)
    fractions = counts / shots

    out = _ensure_out(args.out)
    samples_path = os.path.join(out, "depump_samples.csv")
    with open(samples_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("time_s", "shots", "dark_counts", "dark_fraction"))
        for t, d in zip(times, counts):
            writer.writerow((_fmt(t), shots, int(d), _fmt(d / shots)))

    fit = micromotion.fit_depump(times, fractions, shots=shots,
                                 free_amplitude=free_amplitude)
    _write_json(os.path.join(out, "depump_fit.json"), {
        "gamma_per_s": fit.gamma,
        "gamma_sigma_per_s": fit.gamma_sigma,
        "time_constant_s": fit.time_constant,
        "time_constant_sigma_s": fit.time_constant_sigma,
        "amplitude": fit.amplitude,
        "amplitude_sigma": fit.amplitude_sigma,
        "free_amplitude": fit.free_amplitude,
        "truth": {"gamma_per_s": gamma, "shots": shots},
    })
    print(f"wrote {samples_path}; fitted 1/gamma = {fit.time_constant:.6g} s")
    return 0


# ---------------------------------------------------------------------------
# benchmark / fit


def _write_decay_csv(path, analysis: rb.AnalysisResult) -> None:
    std = {s.length: s for s in analysis.standard.per_length}
    dark = {s.length: s for s in analysis.leakage_fit.per_length}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DECAY_HEADER)
        for length in analysis.lengths:
            s, d = std[length], dark[length]
            std_fit = (analysis.standard.amplitude
                       * analysis.standard.base ** length + 0.5)
            dark_fit = (analysis.leakage_fit.intercept
                        * analysis.leakage_fit.t_minus ** (length + 1)
                        + analysis.leakage_fit.asymptote)
            writer.writerow((length, _fmt(s.mean), _fmt(s.sem), _fmt(std_fit),
                             _fmt(d.mean), _fmt(d.sem), _fmt(dark_fit)))


def _results_payload(analysis: rb.AnalysisResult, reference=None,
                     experiment=None, probe=None) -> dict:
    payload = analysis.to_dict()
    if reference is not None:
        payload["channel_reference"] = {
            "base": reference.base, "leakage": reference.leakage,
            "seepage": reference.seepage, "epsilon": reference.epsilon,
            "t_minus": reference.t_minus,
        }
    if experiment is not None:
        payload["experiment"] = experiment
    if probe is not None:
        payload["probe"] = probe
    return payload


def _cmd_benchmark(args) -> int:
    configs = rb.load_campaign(args.config)
    out = _ensure_out(args.out)
    results = rb.run_campaign(configs, seed=args.seed,
                              resamples=args.resamples, parallel=args.parallel)
    summary = {"seed": args.seed, "resamples": args.resamples,
               "experiments": {}}
    for result in results:
        name = result.config.name
        focus_path = os.path.join(out, f"{name}_focus.csv")
        rb.write_focus_csv(result.focus_records, focus_path)
        probes_summary = {}
        for label, analysis in sorted(result.analyses.items()):
            dataset_path = os.path.join(out, f"{name}_{label}.csv")
            result.datasets[label].to_csv(dataset_path)
            _write_decay_csv(os.path.join(out, f"{name}_{label}_decay.csv"),
                             analysis)
            payload = _results_payload(analysis, result.references[label],
                                       experiment=result.config.to_dict(),
                                       probe=label)
            payload["spam_report"] = [
                {"meas_index": e.meas_index, "shots": e.shots,
                 "errors": e.errors, "rate": e.rate, "sigma": e.sigma,
                 "per_length": [{"length": l, "shots": s, "errors": err,
                                 "rate": r} for (l, s, err, r) in e.per_length]}
                for e in result.spam]
            _write_json(os.path.join(out, f"{name}_{label}_results.json"),
                        payload)
            probes_summary[label] = {
                "epsilon": analysis.epsilon,
                "base": analysis.standard.base,
                "t_minus": analysis.leakage_fit.t_minus,
                "leakage": analysis.leakage_fit.leakage,
                "seepage": analysis.leakage_fit.seepage,
                "scattering_standard": analysis.scattering.standard,
                "scattering_leakage": analysis.scattering.leakage,
            }
        summary["experiments"][name] = probes_summary
    _write_json(os.path.join(out, "summary.json"), summary)
    print(f"ran {len(results)} experiments into {out}")
    return 0


def _cmd_fit(args) -> int:
    if not os.path.exists(args.data):
        raise DataFormatError(f"dataset file not found: {args.data}")
    dataset = rb.RBDataset.from_csv(args.data)
    rng = np.random.default_rng(args.seed)
    analysis = rb.analyze_dataset(dataset, ls_ratio=args.ls_ratio,
                                  resamples=args.resamples, rng=rng)
    out = _ensure_out(args.out)
    stem = os.path.splitext(os.path.basename(args.data))[0]
    _write_decay_csv(os.path.join(out, f"{stem}_decay.csv"), analysis)
    results_path = os.path.join(out, f"{stem}_results.json")
    _write_json(results_path, _results_payload(analysis))
    print(f"wrote {results_path}; epsilon = {analysis.epsilon:.6g}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcmr",
        description="Mid-circuit measurement/reset crosstalk: suppression "
                    "scans, depumping curves, and randomized benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="displacement scan of light suppression")
    scan.add_argument("--config", required=True, help="trap/beam JSON config")
    scan.add_argument("--out", required=True, help="output directory")
    scan.add_argument("--points", type=int, default=DEFAULT_SCAN_POINTS)
    scan.add_argument("--max-index", type=float, default=DEFAULT_SCAN_MAX_INDEX,
                      help="largest modulation index to scan to")
    scan.set_defaults(func=_cmd_scan)

    depump = sub.add_parser("depump", help="simulate and fit a depumping curve")
    depump.add_argument("--config", required=True, help="depump JSON config")
    depump.add_argument("--out", required=True, help="output directory")
    depump.add_argument("--seed", type=int, default=0)
    depump.set_defaults(func=_cmd_depump)

    bench = sub.add_parser("benchmark", help="simulate and analyse a campaign")
    bench.add_argument("--config", required=True, help="campaign JSON config")
    bench.add_argument("--out", required=True, help="output directory")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    bench.add_argument("--parallel", type=int, default=1,
                       help="worker processes for experiments")
    bench.set_defaults(func=_cmd_benchmark)

    fit = sub.add_parser("fit", help="re-analyse an existing dataset CSV")
    fit.add_argument("--data", required=True, help="dataset CSV")
    fit.add_argument("--out", required=True, help="output directory")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    fit.add_argument("--ls-ratio", type=float, default=1.0,
                     help="expected leakage/seepage ratio (fit starting point)")
    fit.set_defaults(func=_cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, AssumptionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
