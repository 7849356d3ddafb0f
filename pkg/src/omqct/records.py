"""Record and quadrature-series containers plus the chunked binary record format.

A PhotocurrentRecord holds three real sampled channels:

``carrier``      beat note at the (signed) LO offset frequency, with slow
                 phase drift
``sideband_i/q`` in-phase / out-of-phase outputs of the complex IF capture of
                 the mechanical band; the two heterodyne sidebands sit at
                 f_if -/+ f_lo and the mechanical line maps to f_if

File format (``.omqc``): magic, version, a key-sorted text header (params
snapshot, seed, layout), then one chunk per synthesis block per channel as
little-endian float32 with a CRC32 per chunk. A ``.meta`` text sidecar
duplicates the header for external tooling.
"""

from __future__ import annotations

import io
import zlib
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, OmqctError

MAGIC = b"OMQC"
FORMAT_VERSION = 1
_CHANNELS = ("carrier", "sideband_i", "sideband_q")


@dataclass
class RecordMeta:
    """Everything needed to regenerate or interpret a record."""

    sample_rate: float          # Hz
    n_samples: int
    block_len: int              # synthesis block length (samples)
    f_if: float                 # IF band center (Hz), line position
    f_lo: float                 # signed LO offset (Hz)
    omega_center: float         # physical angular frequency mapped to f_if (rad/s)
    band_halfwidth: float       # synthesized envelope half-band (Hz)
    seed: int
    stream_salt: int = 0
    lo_sign: int = 1
    kind: str = "heterodyne"    # heterodyne | shot | comb
    electronics_applied: str = "none"
    nonlinearity: float = 0.0
    drift_rms: float = 0.0
    drift_bandwidth: float = 0.0
    carrier_amp: float = 1.0
    carrier_noise_std: float = 0.0
    theta_static: float = 0.0   # beat-note static phase (carrier reference)
    comb_tones: tuple = ()      # physical rad/s tone positions for comb records
    device: dict = field(default_factory=dict)
    probe: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate

    def to_flat(self) -> dict:
        """Flatten to sorted scalar key/value pairs for the text header."""
        out = {}
        simple = {
            "format": f"omqc-record/{FORMAT_VERSION}",
            "sample_rate": self.sample_rate, "n_samples": self.n_samples,
            "block_len": self.block_len, "f_if": self.f_if, "f_lo": self.f_lo,
            "omega_center": self.omega_center,
            "band_halfwidth": self.band_halfwidth,
            "seed": self.seed, "stream_salt": self.stream_salt,
            "lo_sign": self.lo_sign, "kind": self.kind,
            "electronics_applied": self.electronics_applied,
            "nonlinearity": self.nonlinearity,
            "drift_rms": self.drift_rms, "drift_bandwidth": self.drift_bandwidth,
            "carrier_amp": self.carrier_amp,
            "carrier_noise_std": self.carrier_noise_std,
            "theta_static": self.theta_static,
            "channels": ",".join(_CHANNELS),
        }
        out.update(simple)
        for i, tone in enumerate(self.comb_tones):
            out[f"comb_tone_{i}"] = tone
        for k, v in self.device.items():
            out[f"device.{k}"] = v
        for k, v in self.probe.items():
            out[f"probe.{k}"] = v
        for k, v in self.extra.items():
            out[f"extra.{k}"] = v
        return out


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _header_text(meta: RecordMeta) -> str:
    flat = meta.to_flat()
    return "".join(f"{k}: {_format_value(flat[k])}\n" for k in sorted(flat))


def _parse_header(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, val = line.partition(":")
        out[key.strip()] = val.strip()
    return out


@dataclass
class PhotocurrentRecord:
    meta: RecordMeta
    carrier: np.ndarray
    sideband_i: np.ndarray
    sideband_q: np.ndarray

    def __post_init__(self):
        n = self.meta.n_samples
        for name in _CHANNELS:
            ch = getattr(self, name)
            if ch.shape != (n,):
                raise ConfigError(f"record channel {name} has length {ch.shape}, "
                                  f"expected ({n},)")
        if self.meta.sample_rate <= 4.0 * abs(self.meta.f_lo):
            raise ConfigError(
                "record sample_rate must exceed 4x the LO offset frequency")

    @property
    def sideband_complex(self) -> np.ndarray:
        return self.sideband_i.astype(np.float64) + 1j * self.sideband_q.astype(np.float64)

    def with_sidebands(self, c: np.ndarray, **meta_updates) -> "PhotocurrentRecord":
        """New record with complex IF signal ``c`` split into i/q channels."""
        meta = replace(self.meta, **meta_updates)
        return PhotocurrentRecord(
            meta=meta,
            carrier=self.carrier.copy(),
            sideband_i=c.real.astype(np.float32),
            sideband_q=c.imag.astype(np.float32),
        )


@dataclass
class QuadraturePair:
    """Demodulated real quadrature series at the record IF.

    The declared angles satisfy angle_b - angle_a = pi/2; the mechanical line
    sits at ``f_if`` and bin f maps to physical omega_center + 2*pi*(f - f_if).
    """

    sample_rate: float
    x_a: np.ndarray
    x_b: np.ndarray
    angle_a: float
    angle_b: float
    lo_sign: int
    f_if: float
    omega_center: float
    band_halfwidth: float
    block_len: Optional[int] = None
    corrections_applied: frozenset = frozenset()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.x_a.shape != self.x_b.shape:
            raise ConfigError("quadrature channels must have equal length")
        if abs((self.angle_b - self.angle_a) - 0.5 * np.pi) > 1e-12:
            raise ConfigError("quadrature pair angles must be orthogonal "
                              "(angle_b = angle_a + pi/2)")

    @property
    def n_samples(self) -> int:
        return self.x_a.size

    def trim_blocks(self, n: int) -> "QuadraturePair":
        """Drop n leading and n trailing synthesis blocks."""
        if not self.block_len or n <= 0:
            return self
        lo = n * self.block_len
        hi = self.x_a.size - n * self.block_len
        if hi <= lo:
            raise ConfigError("trim would remove the whole series")
        return replace(self, x_a=self.x_a[lo:hi], x_b=self.x_b[lo:hi])


# ---------------------------------------------------------------------------
# binary record I/O


def write_record(record: PhotocurrentRecord, path) -> None:
    header = _header_text(record.meta).encode("utf-8")
    meta = record.meta
    n_blocks = int(np.ceil(meta.n_samples / meta.block_len))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(FORMAT_VERSION.to_bytes(4, "little"))
        fh.write(len(header).to_bytes(4, "little"))
        fh.write(header)
        fh.write(n_blocks.to_bytes(4, "little"))
        for b in range(n_blocks):
            lo = b * meta.block_len
            hi = min(lo + meta.block_len, meta.n_samples)
            payload = io.BytesIO()
            for name in _CHANNELS:
                ch = getattr(record, name)[lo:hi].astype("<f4")
                payload.write(ch.tobytes())
            data = payload.getvalue()
            fh.write(b.to_bytes(4, "little"))
            fh.write(len(data).to_bytes(8, "little"))
            fh.write(zlib.crc32(data).to_bytes(4, "little"))
            fh.write(data)
    with open(str(path) + ".meta", "w", encoding="utf-8") as fh:
        fh.write(header.decode("utf-8"))


def read_record(path) -> PhotocurrentRecord:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise OmqctError(f"{path}: not an omqc record (bad magic)")
        version = int.from_bytes(fh.read(4), "little")
        if version != FORMAT_VERSION:
            raise OmqctError(f"{path}: unsupported record version {version}")
        hlen = int.from_bytes(fh.read(4), "little")
        header = _parse_header(fh.read(hlen).decode("utf-8"))
        meta = _meta_from_header(header)
        n_blocks = int.from_bytes(fh.read(4), "little")
        chans = {name: np.empty(meta.n_samples, dtype=np.float32)
                 for name in _CHANNELS}
        for _ in range(n_blocks):
            b = int.from_bytes(fh.read(4), "little")
            nbytes = int.from_bytes(fh.read(8), "little")
            crc = int.from_bytes(fh.read(4), "little")
            data = fh.read(nbytes)
            if zlib.crc32(data) != crc:
                raise OmqctError(f"{path}: chunk {b} failed its CRC check")
            lo = b * meta.block_len
            hi = min(lo + meta.block_len, meta.n_samples)
            span = hi - lo
            arr = np.frombuffer(data, dtype="<f4")
            for i, name in enumerate(_CHANNELS):
                chans[name][lo:hi] = arr[i * span:(i + 1) * span]
    return PhotocurrentRecord(meta=meta, carrier=chans["carrier"],
                              sideband_i=chans["sideband_i"],
                              sideband_q=chans["sideband_q"])


def _meta_from_header(h: dict) -> RecordMeta:
    device = {k[7:]: float(v) for k, v in h.items() if k.startswith("device.")}
    probe = {k[6:]: float(v) for k, v in h.items() if k.startswith("probe.")}
    extra = {k[6:]: v for k, v in h.items() if k.startswith("extra.")}
    tones = []
    i = 0
    while f"comb_tone_{i}" in h:
        tones.append(float(h[f"comb_tone_{i}"]))
        i += 1
    return RecordMeta(
        sample_rate=float(h["sample_rate"]), n_samples=int(h["n_samples"]),
        block_len=int(h["block_len"]), f_if=float(h["f_if"]),
        f_lo=float(h["f_lo"]), omega_center=float(h["omega_center"]),
        band_halfwidth=float(h["band_halfwidth"]), seed=int(h["seed"]),
        stream_salt=int(h["stream_salt"]), lo_sign=int(h["lo_sign"]),
        kind=h["kind"], electronics_applied=h["electronics_applied"],
        nonlinearity=float(h["nonlinearity"]), drift_rms=float(h["drift_rms"]),
        drift_bandwidth=float(h["drift_bandwidth"]),
        carrier_amp=float(h["carrier_amp"]),
        carrier_noise_std=float(h["carrier_noise_std"]),
        theta_static=float(h["theta_static"]),
        comb_tones=tuple(tones), device=device, probe=probe, extra=extra)
