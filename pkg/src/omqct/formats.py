"""Structured (JSON) and delimited (CSV) output files.

Every non-plot output embeds the producing config hash and tool version; JSON
keys are sorted and floats serialized via repr, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json
import math
from typing import Optional

import numpy as np

from . import __version__
from .errors import OmqctError
from .spectra import ComplexSpectrum

SPECTRUM_SCHEMA = "omqct-spectrum/1"
REPORT_SCHEMA = "omqct-report/1"
MANIFEST_SCHEMA = "omqct-manifest/1"


def _dump(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _clean_meta(meta: dict) -> dict:
    out = {}
    for k, v in meta.items():
        if isinstance(v, (np.floating, np.integer)):
            v = float(v)
        if isinstance(v, (str, int, float, bool)) or v is None:
            out[k] = v
    return out


def spectrum_to_json(spec: ComplexSpectrum, path, config_hash: str = "",
                     label: str = "") -> None:
    obj = {
        "schema": SPECTRUM_SCHEMA,
        "version": __version__,
        "config_hash": config_hash,
        "label": label,
        "norm": spec.norm,
        "n_avg": spec.n_avg,
        "omega_rad_s": spec.freqs.tolist(),
        "re": spec.values.real.tolist(),
        "im": spec.values.imag.tolist(),
        "sigma_re": None if spec.sigma is None else spec.sigma.real.tolist(),
        "sigma_im": None if spec.sigma is None else spec.sigma.imag.tolist(),
        "meta": _clean_meta(spec.meta),
    }
    _dump(obj, path)


def spectrum_from_json(path) -> ComplexSpectrum:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("schema") != SPECTRUM_SCHEMA:
        raise OmqctError(f"{path}: schema key missing or not {SPECTRUM_SCHEMA!r} "
                         f"(got {obj.get('schema')!r})")
    for key in ("omega_rad_s", "re", "im", "norm"):
        if key not in obj:
            raise OmqctError(f"{path}: malformed spectrum file, missing key {key!r}")
    freqs = np.asarray(obj["omega_rad_s"], dtype=float)
    values = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    sigma = None
    if obj.get("sigma_re") is not None:
        sigma = (np.asarray(obj["sigma_re"], dtype=float)
                 + 1j * np.asarray(obj["sigma_im"], dtype=float))
    return ComplexSpectrum(freqs, values, obj["norm"], sigma=sigma,
                           n_avg=obj.get("n_avg"), meta=obj.get("meta", {}))


def spectrum_to_csv(spec: ComplexSpectrum, path, config_hash: str = "") -> None:
    """Delimited spectrum: typed header row, one line per frequency bin."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# omqct-spectrum-csv/1 version={__version__} "
                 f"config_hash={config_hash} norm={spec.norm}\n")
        cols = "omega[rad/s],re[sn],im[sn],sigma_re[sn],sigma_im[sn]"
        fh.write(cols + "\n")
        sig = spec.sigma if spec.sigma is not None else np.zeros(len(spec), complex)
        for w, v, s in zip(spec.freqs, spec.values, sig):
            fh.write(f"{w!r},{v.real!r},{v.imag!r},{s.real!r},{s.imag!r}\n")


def report_to_json(report: dict, path) -> None:
    report = dict(report)
    report.setdefault("schema", REPORT_SCHEMA)
    report.setdefault("version", __version__)
    _dump(report, path)


def report_from_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("schema") != REPORT_SCHEMA:
        raise OmqctError(f"{path}: schema key missing or not {REPORT_SCHEMA!r}")
    return obj


def report_to_csv(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# omqct-report-csv/1 version={__version__} "
                 f"config_hash={report.get('config_hash', '')}\n")
        fh.write("method,T[K],sigma_T[K]\n")
        for row in report.get("temperatures", []):
            fh.write(f"{row['method']},{row['t']!r},{row['sigma_t']!r}\n")
        allan = report.get("allan")
        if allan:
            fh.write("tau[s],adev[K],adev_sigma[K]\n")
            for tau, ad, sg in zip(allan["taus"], allan["adev"], allan["adev_sigma"]):
                fh.write(f"{tau!r},{ad!r},{sg!r}\n")
