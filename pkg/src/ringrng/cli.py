"""Command-line front end and end-to-end pipeline orchestration.

One JSON config file describes a full run (source, window, extractor,
battery); flags override file values and the effective config is embedded
in the run manifest together with per-stage timings and a content hash of
every artifact, so a run can be audited and replayed bit for bit.

Exit codes: 0 on success, 1 on validation or usage errors, 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bitgen, entropy, spdcsim, stats, toeplitz
from .coincidence import CoincidenceWindow, EventList, find_coincidences, heralded_g2
from .errors import RingRngError, ValidationError
from .spdcsim import HomScanConfig, SimConfig
from .timetag import BitBuffer, read_bits, read_tags, write_bits, write_tags


class PipelineStageError(RingRngError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class StatsConfig:
    alpha: float = 0.01
    sequence_bits: int = 100_000
    sequence_count: int | None = None  # None: use every full sequence

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must lie in (0, 1)")
        if self.sequence_bits < 128:
            raise ValidationError("sequence_bits must be at least 128")
        if self.sequence_count is not None and self.sequence_count < 1:
            raise ValidationError("sequence_count must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a pipeline run depends on; units live in the key names."""

    sim: SimConfig
    window: CoincidenceWindow = CoincidenceWindow()
    extractor_block_bits: int = 100_000
    extractor_ratio: float | None = None  # None: derive from measured entropy
    seed_key: int = 0
    stats: StatsConfig = field(default_factory=StatsConfig)
    out_dir: str = "run"
    max_autocorr_lag: int = 100

    def __post_init__(self):
        if self.extractor_block_bits < 2:
            raise ValidationError("extractor_block_bits must be at least 2")
        if self.extractor_ratio is not None and not 0.0 < self.extractor_ratio < 1.0:
            raise ValidationError("extractor_ratio must lie in (0, 1)")
        if self.max_autocorr_lag < 1:
            raise ValidationError("max_autocorr_lag must be positive")

    def to_dict(self) -> dict:
        sim = self.sim
        return {
            "sim": {
                "pump_power_mw": sim.pump_power_mw,
                "duration_s": sim.duration_s,
                "rng_seed": sim.rng_seed,
                "pair_rate_coeff": sim.pair_rate_coeff,
                "pair_bias": sim.pair_bias,
                "detection_efficiency": list(sim.detection_efficiency),
                "jitter_sigma_ps": sim.jitter_sigma_ps,
                "dead_time_ps": sim.dead_time_ps,
                "dark_rate_hz": sim.dark_rate_hz,
            },
            "window": {"width_ps": self.window.width_ps,
                       "bin_ps": self.window.bin_ps},
            "extractor": {"block_bits": self.extractor_block_bits,
                          "output_ratio": self.extractor_ratio,
                          "seed_key": self.seed_key},
            "stats": {"alpha": self.stats.alpha,
                      "sequence_bits": self.stats.sequence_bits,
                      "sequence_count": self.stats.sequence_count},
            "out_dir": self.out_dir,
            "max_autocorr_lag": self.max_autocorr_lag,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        try:
            sim = SimConfig(**raw["sim"])
            window = CoincidenceWindow(**raw.get("window", {}))
            ext = raw.get("extractor", {})
            st = StatsConfig(**raw.get("stats", {}))
        except TypeError as exc:
            raise ValidationError(f"bad config key: {exc}") from exc
        except KeyError as exc:
            raise ValidationError(f"config is missing section {exc}") from exc
        return cls(sim=sim, window=window,
                   extractor_block_bits=int(ext.get("block_bits", 100_000)),
                   extractor_ratio=ext.get("output_ratio"),
                   seed_key=int(ext.get("seed_key", 0)),
                   stats=st,
                   out_dir=str(raw.get("out_dir", "run")),
                   max_autocorr_lag=int(raw.get("max_autocorr_lag", 100)))


def default_config() -> dict:
    """Calibrated 17 mW desk-scale run: ~10^6 raw bits in 0.3 s."""
    return PipelineConfig(sim=spdcsim.preset(17.0, 0.3, rng_seed=1)).to_dict()


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    raw = json.loads(Path(path).read_text()) if path else default_config()
    if not isinstance(raw, dict):
        raise ValidationError("config file must hold a JSON object")
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section = raw
        *heads, leaf = dotted.split(".")
        for head in heads:
            section = section.setdefault(head, {})
        section[leaf] = value
    return PipelineConfig.from_dict(raw)


def config_hash(config: PipelineConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# pipeline

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class _Run:
    """Tracks stage artifacts; writes go to .partial and are promoted."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.stages = []

    def stage(self, name: str, filename: str, worker):
        partial = self.out_dir / (filename + ".partial")
        final = self.out_dir / filename
        start = time.perf_counter()
        try:
            value = worker(partial)
        except Exception as exc:
            raise PipelineStageError(name, exc) from exc
        partial.replace(final)
        self.stages.append({
            "name": name,
            "artifact": filename,
            "seconds": round(time.perf_counter() - start, 6),
            "bytes": final.stat().st_size,
            "sha256": _sha256(final),
        })
        return value


def _write_events(events: EventList, duration_ps: int, path: Path) -> None:
    # hand savez a handle: given a bare path it would append its own suffix
    with open(path, "wb") as fh:
        np.savez(fh, t=events.t, kind=events.kind,
                 duration_ps=np.int64(duration_ps))


def _read_events(path) -> tuple:
    with np.load(path) as data:
        events = EventList(data["t"], data["kind"])
        duration_ps = int(data["duration_ps"])
    return events, duration_ps


def _battery_dict(report: stats.TestReport) -> dict:
    lo, hi = report.proportion_band
    return {
        "alpha": report.alpha,
        "n_sequences": report.n_sequences,
        "sequence_bits": report.sequence_bits,
        "entries": list(report.entries),
        "skipped": report.skipped,
        "p_values": [[round(float(p), 6) for p in row] for row in report.p_values],
        "proportions": report.proportions,
        "proportion_band": [lo, hi],
        "uniformity": report.uniformity,
        "ks_statistic": report.ks_statistic,
        "passed": report.passed(),
    }


def _battery_table(report: stats.TestReport) -> str:
    lo, hi = report.proportion_band
    props = report.proportions
    unif = report.uniformity
    lines = [f"{'test':<26} {'proportion':>10} {'uniformity':>10}  verdict",
             "-" * 58]
    for name in report.entries:
        ok = lo <= props[name] <= hi and unif[name] >= stats.UNIFORMITY_THRESHOLD
        lines.append(f"{name:<26} {props[name]:>10.4f} {unif[name]:>10.4g}  "
                     f"{'pass' if ok else 'FAIL'}")
    for name, reason in report.skipped.items():
        lines.append(f"{name:<26} {'skipped':>22}  {reason}")
    lines.append(f"pass proportion band: [{lo:.4f}, {hi:.4f}] "
                 f"over {report.n_sequences} sequences")
    return "\n".join(lines)


def run_pipeline(config: PipelineConfig, threads: int | None = None) -> dict:
    """Simulate, match, transcribe, estimate, extract, test, correlate.

    Writes the seven stage artifacts plus manifest.json into out_dir and
    returns the manifest.  Identical configs reproduce identical artifacts
    for any thread count.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = _Run(out_dir)

    def simulate_stage(path):
        stream = spdcsim.simulate(config.sim)
        write_tags(stream, path)
        return stream

    def coincide_stage(path):
        events = find_coincidences(stream, config.window)
        _write_events(events, stream.acquisition_duration, path)
        return events

    def bits_stage(path):
        record = bitgen.generate_raw_bits(events, stream.duration_s)
        write_bits(record.bits, path)
        return record

    def entropy_stage(path):
        report = entropy.min_entropy_8bit(record.bits)
        ratio = (config.extractor_ratio if config.extractor_ratio is not None
                 else entropy.extraction_ratio(report))
        path.write_text(json.dumps(_entropy_dict(report, ratio), indent=2) + "\n")
        return report, ratio

    def extract_stage(path):
        ext_config = toeplitz.ExtractorConfig(
            block_bits=config.extractor_block_bits, output_ratio=ratio,
            seed_key=config.seed_key)
        result = toeplitz.extract(record.bits, ext_config, workers=threads)
        write_bits(result.bits, path)
        return result

    def test_stage(path):
        battery = _run_battery(extracted.bits, config.stats)
        path.write_text(json.dumps(_battery_dict(battery), indent=2) + "\n")
        return battery

    def autocorr_stage(path):
        max_lag = min(config.max_autocorr_lag, extracted.bits.bit_len - 1)
        acorr = stats.autocorrelation(extracted.bits, max_lag)
        _write_autocorr(acorr, path)
        return acorr

    stream = run.stage("simulate", "tags.qtt", simulate_stage)
    events = run.stage("coincide", "events.npz", coincide_stage)
    record = run.stage("bits", "raw.qbb", bits_stage)
    report, ratio = run.stage("entropy", "entropy.json", entropy_stage)
    extracted = run.stage("extract", "extracted.qbb", extract_stage)
    battery = run.stage("test", "battery.json", test_stage)
    autocorr = run.stage("autocorr", "autocorr.csv", autocorr_stage)

    manifest = {
        "config": config.to_dict(),
        "config_sha256": config_hash(config),
        "rng_seed": config.sim.rng_seed,
        "stages": run.stages,
        "summary": {
            "raw_bits": record.bit_count,
            "raw_bit_rate_hz": record.bit_rate_hz,
            "raw_bias": record.bias,
            "min_entropy_per_bit": report.min_entropy_per_bit,
            "extraction_ratio": ratio,
            "extracted_bits": extracted.bits.bit_len,
            "extracted_bit_rate_hz": extracted.bits.bit_len / config.sim.duration_s,
            "battery_passed": battery.passed(),
            "max_abs_autocorrelation": autocorr.max_abs,
            "autocorr_bound": stats.autocorrelation_bound(extracted.bits.bit_len),
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def _entropy_dict(report: entropy.EntropyReport, ratio: float) -> dict:
    return {"n_blocks": report.n_blocks,
            "counts": report.counts.tolist(),
            "p_max": report.p_max,
            "p_max_conservative": report.p_max_conservative,
            "most_common_block": report.most_common_block,
            "min_entropy_bits": report.min_entropy_bits,
            "min_entropy_per_bit": report.min_entropy_per_bit,
            "min_entropy_per_bit_conservative":
                report.min_entropy_per_bit_conservative,
            "extraction_ratio": ratio}


def _run_battery(bits: BitBuffer, st: StatsConfig) -> stats.TestReport:
    n = st.sequence_bits
    available = bits.bit_len // n
    count = available if st.sequence_count is None else st.sequence_count
    if count > available or count == 0:
        raise ValidationError(
            f"need {count or 1} sequences of {n} bits, "
            f"only {available} available from {bits.bit_len} extracted bits")
    arr = bits.to_array()
    seqs = [arr[i * n:(i + 1) * n] for i in range(count)]
    return stats.nist_subset(seqs, alpha=st.alpha)


def _write_autocorr(acorr: stats.AutocorrReport, path: Path) -> None:
    lines = ["lag,r"] + [f"{k},{v:.8e}" for k, v in
                         zip(acorr.lags.tolist(), acorr.coefficients.tolist())]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# figure data

def write_figure_data(config: PipelineConfig, out_dir: Path,
                      powers_mw=None, threads: int | None = None) -> list:
    """Emit the four figure CSVs: interference and g2 vs power, the
    visibility-g2 relation, entropy and bit rate vs power, and the
    extracted stream's autocorrelation."""
    out_dir.mkdir(parents=True, exist_ok=True)
    powers = list(powers_mw) if powers_mw is not None else [1, 3, 5, 7, 9, 11, 13, 15, 17]
    written = []

    rows_2a, rows_2b = [], []
    for p in powers:
        sim = _with_power(config.sim, p)
        g2 = spdcsim.analytic_g2(sim, config.window.width_ps)
        vis = stats.dip_visibility(spdcsim.hom_scan(sim, HomScanConfig()))
        rows_2a.append((p, vis, g2))
        rows_2b.append((g2, vis))
    vis_fit = stats.fit_linear([g for g, _ in rows_2b], [v for _, v in rows_2b])
    written.append(_write_csv(out_dir / "fig2a.csv", "power_mw,visibility,g2",
                              [f"{p},{v:.6f},{g:.6f}" for p, v, g in rows_2a]))
    written.append(_write_csv(
        out_dir / "fig2b.csv", "g2,visibility,fit",
        [f"{g:.6f},{v:.6f},{vis_fit.slope * g + vis_fit.intercept:.6f}"
         for g, v in rows_2b]))

    rows_3 = []
    for p in powers:
        sim = _with_power(config.sim, p)
        record = bitgen.bits_from_stream(spdcsim.simulate(sim), config.window)
        report = entropy.min_entropy_8bit(record.bits)
        ratio = (config.extractor_ratio if config.extractor_ratio is not None
                 else entropy.extraction_ratio(report))
        ext = toeplitz.extract(
            record.bits,
            toeplitz.ExtractorConfig(block_bits=config.extractor_block_bits,
                                     output_ratio=ratio,
                                     seed_key=config.seed_key),
            workers=threads)
        rows_3.append((p, report.min_entropy_per_bit,
                       ext.bits.bit_len / sim.duration_s))
    written.append(_write_csv(
        out_dir / "fig3.csv", "power_mw,min_entropy_per_bit,extracted_bit_rate_hz",
        [f"{p},{h:.6f},{r:.1f}" for p, h, r in rows_3]))

    record = bitgen.bits_from_stream(spdcsim.simulate(config.sim), config.window)
    report = entropy.min_entropy_8bit(record.bits)
    ratio = (config.extractor_ratio if config.extractor_ratio is not None
             else entropy.extraction_ratio(report))
    ext = toeplitz.extract(
        record.bits,
        toeplitz.ExtractorConfig(block_bits=config.extractor_block_bits,
                                 output_ratio=ratio, seed_key=config.seed_key),
        workers=threads)
    acorr = stats.autocorrelation(ext.bits, min(config.max_autocorr_lag,
                                                ext.bits.bit_len - 1))
    written.append(_write_csv(
        out_dir / "fig5.csv", "lag,r",
        [f"{k},{v:.8e}" for k, v in
         zip(acorr.lags.tolist(), acorr.coefficients.tolist())]))
    return written


def _with_power(sim: SimConfig, power_mw: float) -> SimConfig:
    return SimConfig(pump_power_mw=float(power_mw), duration_s=sim.duration_s,
                     rng_seed=sim.rng_seed, pair_rate_coeff=sim.pair_rate_coeff,
                     pair_bias=sim.pair_bias,
                     detection_efficiency=sim.detection_efficiency,
                     jitter_sigma_ps=sim.jitter_sigma_ps,
                     dead_time_ps=sim.dead_time_ps, dark_rate_hz=sim.dark_rate_hz)


def _write_csv(path: Path, header: str, rows: list) -> str:
    path.write_text("\n".join([header] + rows) + "\n")
    return str(path)


# ---------------------------------------------------------------------------
# exports

def export_nist(bits: BitBuffer, out_dir: Path, sequences: int,
                bits_per_sequence: int) -> dict:
    """Split a bit file into ASCII '0'/'1' sequence files plus a manifest."""
    needed = sequences * bits_per_sequence
    if bits.bit_len < needed:
        raise ValidationError(
            f"need {needed} bits for {sequences} x {bits_per_sequence}, "
            f"have {bits.bit_len}")
    out_dir.mkdir(parents=True, exist_ok=True)
    arr = bits.to_array()
    files = []
    for i in range(sequences):
        seq = arr[i * bits_per_sequence:(i + 1) * bits_per_sequence]
        name = f"seq_{i:04d}.txt"
        path = out_dir / name
        path.write_text("".join("1" if b else "0" for b in seq.tolist()) + "\n")
        files.append({"name": name, "sha256": _sha256(path)})
    manifest = {"sequences": sequences, "bits_per_sequence": bits_per_sequence,
                "files": files}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def export_testu01(bits: BitBuffer, path: Path) -> int:
    """Dump the packed bit payload as a headerless binary file."""
    path.write_bytes(bits.payload)
    return len(bits.payload)


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit 2; this tool reserves 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ringrng",
                     description="Photon-pair random number pipeline: "
                                 "simulate, match, extract, validate.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a tag stream to a .qtt file")
    p.add_argument("--power-mw", type=float, default=17.0, help="pump power")
    p.add_argument("--duration-s", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=1, help="simulation RNG seed")
    p.add_argument("--split-u1", action="store_true",
                   help="conditional-g2 layout: split the U1 arm 50:50")
    p.add_argument("--out", required=True, help="output .qtt path")

    p = sub.add_parser("coincide", help="match opposite-section coincidences")
    p.add_argument("tags", help="input .qtt file")
    p.add_argument("--window-ps", type=int, default=1000)
    p.add_argument("--bin-ps", type=int, default=5)
    p.add_argument("--out", required=True, help="output .npz event file")

    p = sub.add_parser("bits", help="transcribe matched events into raw bits")
    p.add_argument("events", help="input .npz event file")
    p.add_argument("--out", required=True, help="output .qbb path")

    p = sub.add_parser("entropy", help="8-bit plug-in min-entropy of a bit file")
    p.add_argument("bits", help="input .qbb file")

    p = sub.add_parser("extract", help="Toeplitz-extract a raw bit file")
    p.add_argument("bits", help="input .qbb file")
    p.add_argument("--block-bits", type=int, default=1_000_000)
    p.add_argument("--ratio", type=float, default=0.95)
    p.add_argument("--seed-key", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True, help="output .qbb path")

    p = sub.add_parser("test", help="run the randomness battery on a bit file")
    p.add_argument("bits", help="input .qbb file")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--sequence-bits", type=int, default=100_000)
    p.add_argument("--sequences", type=int, default=None,
                   help="default: every full sequence")
    p.add_argument("--format", choices=("json", "table"), default="json")

    p = sub.add_parser("autocorr", help="autocorrelation of a bit file as CSV")
    p.add_argument("bits", help="input .qbb file")
    p.add_argument("--max-lag", type=int, default=100)
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")

    p = sub.add_parser("pipeline", help="run the full pipeline into a directory")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out-dir", default=None, help="override output directory")
    p.add_argument("--power-mw", type=float, default=None)
    p.add_argument("--duration-s", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--print-config", action="store_true",
                   help="print the default config and exit")

    p = sub.add_parser("export-nist",
                       help="split a bit file into ASCII sequences + manifest")
    p.add_argument("bits", help="input .qbb file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sequences", type=int, default=80)
    p.add_argument("--bits", type=int, default=1_000_000, dest="bits_per_sequence")

    p = sub.add_parser("export-testu01",
                       help="dump packed bits as a headerless binary file")
    p.add_argument("bits", help="input .qbb file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("figures", help="write figure-data CSVs")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--powers-mw", default=None,
                   help="comma-separated power list")
    p.add_argument("--threads", type=int, default=None)

    return parser


# ---------------------------------------------------------------------------
# subcommand bodies

def _cmd_simulate(args) -> int:
    config = spdcsim.preset(args.power_mw, args.duration_s, args.seed)
    stream = spdcsim.simulate(config, split_u1=args.split_u1)
    write_tags(stream, args.out)
    print(json.dumps({"tags": stream.tag_count,
                      "duration_s": stream.duration_s,
                      "out": args.out}))
    return 0


def _cmd_coincide(args) -> int:
    stream = read_tags(args.tags)
    window = CoincidenceWindow(width_ps=args.window_ps, bin_ps=args.bin_ps)
    events = find_coincidences(stream, window)
    _write_events(events, stream.acquisition_duration, Path(args.out))
    print(json.dumps({"events": len(events), "out": args.out}))
    return 0


def _cmd_bits(args) -> int:
    events, duration_ps = _read_events(args.events)
    record = bitgen.generate_raw_bits(events, duration_ps / 1e12)
    write_bits(record.bits, args.out)
    print(json.dumps({"bits": record.bit_count, "ones": record.ones,
                      "bias": record.bias, "bit_rate_hz": record.bit_rate_hz,
                      "out": args.out}))
    return 0


def _cmd_entropy(args) -> int:
    report = entropy.min_entropy_8bit(read_bits(args.bits))
    ratio = entropy.extraction_ratio(report)
    print(json.dumps(_entropy_dict(report, ratio), indent=2))
    return 0


def _cmd_extract(args) -> int:
    config = toeplitz.ExtractorConfig(block_bits=args.block_bits,
                                      output_ratio=args.ratio,
                                      seed_key=args.seed_key)
    result = toeplitz.extract(read_bits(args.bits), config, workers=args.threads)
    write_bits(result.bits, args.out)
    print(json.dumps({"input_bits_used": result.input_bits_used,
                      "output_bits": result.bits.bit_len,
                      "blocks": result.n_blocks,
                      "dropped_bits": result.dropped_bits,
                      "out": args.out}))
    return 0


def _cmd_test(args) -> int:
    st = StatsConfig(alpha=args.alpha, sequence_bits=args.sequence_bits,
                     sequence_count=args.sequences)
    report = _run_battery(read_bits(args.bits), st)
    if args.format == "table":
        print(_battery_table(report))
    else:
        print(json.dumps(_battery_dict(report), indent=2))
    return 0 if report.passed() else 1


def _cmd_autocorr(args) -> int:
    bits = read_bits(args.bits)
    acorr = stats.autocorrelation(bits, args.max_lag)
    if args.out:
        _write_autocorr(acorr, Path(args.out))
    else:
        print("lag,r")
        for k, v in zip(acorr.lags.tolist(), acorr.coefficients.tolist()):
            print(f"{k},{v:.8e}")
    return 0


def _cmd_pipeline(args) -> int:
    if args.print_config:
        print(json.dumps(default_config(), indent=2))
        return 0
    config = load_config(args.config, overrides={
        "out_dir": args.out_dir,
        "sim.pump_power_mw": args.power_mw,
        "sim.duration_s": args.duration_s,
        "sim.rng_seed": args.seed,
    })
    manifest = run_pipeline(config, threads=args.threads)
    print(json.dumps(manifest["summary"], indent=2))
    return 0


def _cmd_export_nist(args) -> int:
    manifest = export_nist(read_bits(args.bits), Path(args.out_dir),
                           args.sequences, args.bits_per_sequence)
    print(json.dumps({"files": len(manifest["files"]),
                      "out_dir": args.out_dir}))
    return 0


def _cmd_export_testu01(args) -> int:
    n = export_testu01(read_bits(args.bits), Path(args.out))
    print(json.dumps({"bytes": n, "out": args.out}))
    return 0


def _cmd_figures(args) -> int:
    config = load_config(args.config)
    powers = ([float(p) for p in args.powers_mw.split(",")]
              if args.powers_mw else None)
    written = write_figure_data(config, Path(args.out_dir), powers_mw=powers,
                                threads=args.threads)
    print(json.dumps({"files": written}))
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "coincide": _cmd_coincide,
    "bits": _cmd_bits,
    "entropy": _cmd_entropy,
    "extract": _cmd_extract,
    "test": _cmd_test,
    "autocorr": _cmd_autocorr,
    "pipeline": _cmd_pipeline,
    "export-nist": _cmd_export_nist,
    "export-testu01": _cmd_export_testu01,
    "figures": _cmd_figures,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc.cause, OSError) else 1
    except RingRngError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
