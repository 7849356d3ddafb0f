"""Command-line interface: simulate / analyze / thermometry / plot / selftest.

Exit codes: 0 success, 2 configuration/validation error, 3 numeric failure,
4 I/O failure. The output directory can be overridden with OMQCT_OUTDIR and
worker counts capped with OMQCT_THREADS.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, dsp, fits, formats, plotting, thermometry
from .config import RunConfig, default_config_text, load_config
from .errors import (CalibrationError, ConfigError, EstimationError, FitError,
                     OmqctError, SynthesisError, TrackingError,
                     UnphysicalResultError)
from .pipeline import analyze_record_pair, thermometry_from_spectra
from .records import read_record, write_record
from .synth import (dispersion_for_rotation_slope, inject_detector_nonlinearity,
                    phase_comb_record, shot_noise_record, synth_lo_pair)

_NUMERIC_ERRORS = (SynthesisError, TrackingError, CalibrationError,
                   EstimationError, FitError, UnphysicalResultError)


def _outdir(cfg: RunConfig, override=None) -> Path:
    path = override or os.environ.get("OMQCT_OUTDIR") or cfg.outputs.directory
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _comb_tones(cfg: RunConfig):
    from .synth import _layout
    layout = _layout(cfg.device, cfg.probe, cfg.synth)
    span = 0.75 * layout.w * 2 * math.pi
    n = cfg.comb_tone_count
    return [layout.omega_center + x for x in np.linspace(-span, span, n)]


def cmd_simulate(cfg: RunConfig, outdir=None) -> Path:
    """Synthesize the +/-LO record pair plus calibration records + manifest."""
    out = _outdir(cfg, outdir)
    electronics = None
    slope = cfg.artifacts.get("dispersion_slope", 0.0)
    if slope:
        electronics = dispersion_for_rotation_slope(
            slope, cfg.device.omega_m, cfg.synth.f_lo)
    rec_p, rec_m = synth_lo_pair(cfg.device, cfg.probe, cfg.synth, electronics)
    nl = cfg.artifacts.get("nonlinearity", 0.0)
    if nl:
        rec_p = inject_detector_nonlinearity(rec_p, nl)
        rec_m = inject_detector_nonlinearity(rec_m, nl)
    shot = shot_noise_record(cfg.device, cfg.probe, cfg.synth)
    comb = phase_comb_record(cfg.device, cfg.probe, cfg.synth, _comb_tones(cfg))
    if electronics is not None:
        from .synth import inject_electronic_dispersion
        shot = inject_electronic_dispersion(shot, electronics)
        comb = inject_electronic_dispersion(comb, electronics)
    files = {}
    for name, rec in (("lo_plus.omqc", rec_p), ("lo_minus.omqc", rec_m),
                      ("shot.omqc", shot), ("comb.omqc", comb)):
        path = out / name
        write_record(rec, path)
        files[name] = _sha256(path)
    manifest = {
        "schema": formats.MANIFEST_SCHEMA,
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "config_canonical": cfg.canonical_text(),
        "files": files,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return out


def _load_manifest(records_dir: Path) -> dict:
    path = records_dir / "manifest.json"
    if not path.exists():
        raise OmqctError(f"no manifest.json in {records_dir}")
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    for name, digest in manifest.get("files", {}).items():
        fpath = records_dir / name
        if not fpath.exists():
            raise OmqctError(f"manifest lists {name} but the file is missing")
        if _sha256(fpath) != digest:
            raise OmqctError(f"{name} does not match its manifest hash")
    return manifest


def cmd_analyze(cfg: RunConfig, records_dir, outdir=None,
                skip_phase_calibration: bool = False,
                skip_gain_calibration: bool = False) -> Path:
    """Calibrate, demodulate, null-rotate, lock-in combine; write spectra."""
    records_dir = Path(records_dir)
    out = _outdir(cfg, outdir)
    manifest = _load_manifest(records_dir)
    rec_p = read_record(records_dir / "lo_plus.omqc")
    rec_m = read_record(records_dir / "lo_minus.omqc")
    gain = phase_cal = None
    if not skip_gain_calibration:
        shot_path = records_dir / "shot.omqc"
        if not shot_path.exists():
            raise CalibrationError("missing shot-noise record for gain calibration "
                                   "(pass --skip-gain-calibration to override)")
        gain = dsp.calibrate_gain(read_record(shot_path),
                                  segment_len=cfg.analysis.segment_len)
    if not skip_phase_calibration:
        comb_path = records_dir / "comb.omqc"
        if not comb_path.exists():
            raise CalibrationError("missing phase-comb record for phase calibration "
                                   "(pass --skip-phase-calibration to override)")
        phase_cal = dsp.calibrate_phase(read_record(comb_path))
    quantum, thermal, scan_info, _sets = analyze_record_pair(
        rec_p, rec_m, cfg.analysis, gain=gain, phase_cal=phase_cal)
    chash = manifest.get("config_hash", cfg.config_hash())
    formats.spectrum_to_json(quantum, out / "quantum.json", chash, "quantum")
    formats.spectrum_to_csv(quantum, out / "quantum.csv", chash)
    formats.spectrum_to_json(thermal, out / "thermal.json", chash, "thermal")
    formats.spectrum_to_csv(thermal, out / "thermal.csv", chash)
    analysis_report = {
        "schema": formats.REPORT_SCHEMA,
        "version": __version__,
        "config_hash": chash,
        "kind": "analysis",
        "phi_star": {str(k): v for k, v in (scan_info or {}).items()},
        "calibrations": {
            "gain": None if gain is None else
            {"coeffs": gain.coeffs.tolist(), "baseline": gain.baseline},
            "phase": None if phase_cal is None else
            {"coeffs": phase_cal.coeffs.tolist(),
             "tone_angles": phase_cal.tone_angles.tolist()},
        },
        "record_duration_s": rec_p.meta.duration_s,
        "omega_m": cfg.device.omega_m,
        "gamma_m": cfg.device.gamma_m,
        "delta_p": cfg.probe.delta_p,
    }
    formats.report_to_json(analysis_report, out / "analysis.json")
    return out


def _temperature_rows(cfg: RunConfig, quantum, thermal, delta_p):
    rows = []
    joint, t_a, t_e, t_c = thermometry_from_spectra(
        quantum, thermal, cfg.analysis, cfg.device.gamma_m, delta_p=delta_p,
        want_coth=cfg.thermometry.method in ("coth", "both"))
    if cfg.thermometry.method in ("ratio", "both"):
        for est in (t_a, t_e):
            rows.append({"method": est.method, "t": est.t, "sigma_t": est.sigma_t})
    if t_c is not None:
        rows.append({"method": t_c.method, "t": t_c.t, "sigma_t": t_c.sigma_t})
    fit_info = {
        "a": joint.amplitude, "b": joint.amplitude_b, "center": joint.center,
        "width": joint.width, "offset": joint.offset, "offset_b": joint.offset_b,
        "covariance": joint.covariance.tolist(),
        "chi2_per_dof": joint.chi2_per_dof,
    }
    return rows, fit_info


def cmd_thermometry(cfg: RunConfig, spectra_dirs, outdir=None,
                    powers=None) -> Path:
    """Fit spectra and report temperature; Allan and sweep when applicable."""
    dirs = [Path(d) for d in spectra_dirs]
    if not dirs:
        raise ConfigError("no spectra directories given")
    out = _outdir(cfg, outdir)
    all_rows, fit_infos, interval = [], [], None
    for d in dirs:
        qpath, tpath = d / "quantum.json", d / "thermal.json"
        if not (qpath.exists() and tpath.exists()):
            raise OmqctError(f"{d}: quantum.json/thermal.json not found")
        quantum = formats.spectrum_from_json(qpath)
        thermal = formats.spectrum_from_json(tpath)
        delta_p = cfg.probe.delta_p
        apath = d / "analysis.json"
        if apath.exists():
            arep = formats.report_from_json(apath)
            delta_p = arep.get("delta_p", delta_p)
            interval = arep.get("record_duration_s", interval)
        rows, fit_info = _temperature_rows(cfg, quantum, thermal, delta_p)
        all_rows.append(rows)
        fit_infos.append(fit_info)
    report = {
        "schema": formats.REPORT_SCHEMA,
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "kind": "thermometry",
        "temperatures": all_rows[0],
        "fit": fit_infos[0],
        "n_runs": len(dirs),
    }
    if len(dirs) > 1:
        series = {}
        for rows in all_rows:
            for row in rows:
                series.setdefault(row["method"], []).append(row)
        report["series"] = {m: [r["t"] for r in rows]
                            for m, rows in series.items()}
        method = "ratio_exact" if "ratio_exact" in series else \
            next(iter(series))
        ts = [r["t"] for r in series[method]]
        if len(ts) >= 16 and interval:
            allan = thermometry.allan_deviation(ts, interval)
            report["allan"] = {
                "method": method, "interval_s": interval,
                "taus": allan.taus.tolist(), "adev": allan.adev.tolist(),
                "adev_sigma": allan.adev_sigma.tolist(),
                "white_coeff": allan.white_coeff,
                "white_coeff_sigma": allan.white_coeff_sigma,
            }
        use_powers = powers if powers else cfg.thermometry.powers
        if use_powers and len(use_powers) == len(dirs) and len(dirs) >= 3:
            pts = [(pw, r["t"], r["sigma_t"])
                   for pw, r in zip(use_powers, series[method])]
            est = thermometry.extrapolate_zero_power(pts)
            report["zero_power"] = {
                "t": est.t, "sigma_t": est.sigma_t,
                "heating_coeff": est.inputs["heating_coeff"],
                "powers": list(use_powers),
                "temps": [r["t"] for r in series[method]],
                "sigmas": [r["sigma_t"] for r in series[method]],
            }
    formats.report_to_json(report, out / "report.json")
    formats.report_to_csv(report, out / "report.csv")
    return out


def cmd_plot(inputs, outdir=None) -> list:
    """Render SVG figures for spectrum and report files."""
    out = Path(outdir or os.environ.get("OMQCT_OUTDIR") or ".")
    out.mkdir(parents=True, exist_ok=True)
    made = []
    for item in inputs:
        path = Path(item)
        with open(path, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise OmqctError(f"{path}: not valid JSON ({exc})") from exc
        schema = obj.get("schema")
        if schema == formats.SPECTRUM_SCHEMA:
            spec = formats.spectrum_from_json(path)
            dest = out / (path.stem + ".svg")
            plotting.plot_spectrum(spec, dest, title=obj.get("label", ""))
            made.append(dest)
        elif schema == formats.REPORT_SCHEMA:
            rep = formats.report_from_json(path)
            if rep.get("allan"):
                a = rep["allan"]
                dest = out / (path.stem + "_allan.svg")
                plotting.plot_allan(a["taus"], a["adev"], a["adev_sigma"],
                                    a["white_coeff"], dest)
                made.append(dest)
            if rep.get("zero_power"):
                z = rep["zero_power"]
                dest = out / (path.stem + "_sweep.svg")
                plotting.plot_power_sweep(z["powers"], z["temps"], z["sigmas"],
                                          z["t"], z["heating_coeff"], dest)
                made.append(dest)
            if rep.get("fit") and rep.get("kind") == "thermometry":
                # overlay the fit on sibling spectra when present
                qp = path.parent / "quantum.json"
                tp = path.parent / "thermal.json"
                if qp.exists() and tp.exists():
                    dest = out / (path.stem + "_spectra.svg")
                    plotting.plot_correlation_pair(
                        formats.spectrum_from_json(qp),
                        formats.spectrum_from_json(tp), dest, fit=rep["fit"])
                    made.append(dest)
        else:
            raise OmqctError(
                f"{path}: unknown schema {schema!r} (expected "
                f"{formats.SPECTRUM_SCHEMA!r} or {formats.REPORT_SCHEMA!r})")
    return made


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="omqct",
        description="Optomechanical quantum-correlation thermometry simulator")
    ap.add_argument("--version", action="version", version=f"omqct {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", required=False,
                       help="run configuration file (omitted: built-in defaults)")
        p.add_argument("--outdir", default=None, help="output directory")

    p_sim = sub.add_parser("simulate", help="synthesize records + manifest")
    add_config(p_sim)
    p_an = sub.add_parser("analyze", help="records -> correlation spectra")
    add_config(p_an)
    p_an.add_argument("--records", required=True, help="directory with records")
    p_an.add_argument("--skip-phase-calibration", action="store_true")
    p_an.add_argument("--skip-gain-calibration", action="store_true")
    p_th = sub.add_parser("thermometry", help="spectra -> temperature report")
    add_config(p_th)
    p_th.add_argument("spectra", nargs="+", help="spectra director(ies)")
    p_th.add_argument("--powers", default=None,
                      help="comma-separated probe powers (W) for the sweep")
    p_pl = sub.add_parser("plot", help="render SVG figures from output files")
    p_pl.add_argument("inputs", nargs="+")
    p_pl.add_argument("--outdir", default=None)
    p_df = sub.add_parser("defaults", help="print the default configuration")
    p_st = sub.add_parser("selftest", help="reduced-scale acceptance checks")
    p_st.add_argument("--outdir", default=None)
    return ap


def _get_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    from .config import parse_config
    return parse_config(default_config_text())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "defaults":
            sys.stdout.write(default_config_text())
            return 0
        if args.command == "simulate":
            out = cmd_simulate(_get_config(args), args.outdir)
            print(f"records + manifest written to {out}")
            return 0
        if args.command == "analyze":
            out = cmd_analyze(_get_config(args), args.records, args.outdir,
                              skip_phase_calibration=args.skip_phase_calibration,
                              skip_gain_calibration=args.skip_gain_calibration)
            print(f"spectra written to {out}")
            return 0
        if args.command == "thermometry":
            powers = None
            if args.powers:
                powers = tuple(float(x) for x in args.powers.split(","))
            out = cmd_thermometry(_get_config(args), args.spectra, args.outdir,
                                  powers=powers)
            print(f"report written to {out}")
            return 0
        if args.command == "plot":
            made = cmd_plot(args.inputs, args.outdir)
            for m in made:
                print(f"wrote {m}")
            return 0
        if args.command == "selftest":
            from .selftest import run_selftest
            ok = run_selftest(args.outdir)
            return 0 if ok else 3
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, OmqctError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
