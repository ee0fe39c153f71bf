"""Simulated random-unitary measurements on the ground truth |0><0|.

Only the measured state |psi_m> = U_m^dagger |b_m> is ever produced.  The
D x D unitary is never built: for a pure ground truth the outcome statistics
depend on a single row of U^dagger, and the detected column is uniform on a
sphere of known radius once its first entry is fixed.

Randomness comes from numpy's counter-based Philox generator keyed through a
``SeedSequence``: stream ``k`` under root seed ``s`` is
``Philox(SeedSequence(s, spawn_key=(k,)))``.  Outputs are reproducible for a
given numpy version, not across implementations.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetFormatError, InvariantViolation, ShadowBenchError
from .hilbert import UNIT_TOL, normalize

FORMAT_VERSION = 1
BIN_MAGIC = b"SHDW"
_BIN_HEADER = struct.Struct("<4sIIIQQ")

_U64 = (1 << 64) - 1


def derive_stream_id(*parts) -> int:
    """Map an arbitrary tuple of labels to a 64-bit stream id."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """A reproducible random stream identified by ``(root_seed, stream_id)``.

    Not thread-safe: give every thread or process its own stream.
    """

    def __init__(self, root_seed: int, stream_id: int = 0):
        if not (0 <= root_seed <= _U64 and 0 <= stream_id <= _U64):
            raise ShadowBenchError("root_seed and stream_id must be 64-bit unsigned integers")
        self.root_seed = int(root_seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.root_seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(root_seed={self.root_seed}, stream_id={self.stream_id})"

    def complex_normal(self, n: int) -> np.ndarray:
        """``n`` draws of N(0,1) + i N(0,1)."""
        return self.generator.standard_normal(2 * n).view(np.complex128)

    def uniform(self) -> float:
        return float(self.generator.random())


def sample_haar_unit_vector(dim: int, rng: RngStream) -> np.ndarray:
    """Uniformly distributed unit vector on the complex sphere in C^dim."""
    if dim < 1:
        raise ShadowBenchError(f"dim must be >= 1, got {dim}")
    while True:
        w = rng.complex_normal(dim)
        if np.any(w != 0):
            return normalize(w)


def simulate_shot(dim: int, rng: RngStream) -> np.ndarray:
    """One measured state |psi_m> for ground truth |0><0|.

    Draws the first row ``u`` of U^dagger, picks the detected column ``n``
    with probability |u_n|^2, then fills the remaining D-1 entries of that
    column with an isotropic complex vector of length sqrt(1 - |u_n|^2).
    """
    if dim < 2:
        raise ShadowBenchError(f"simulate_shot requires dim >= 2, got {dim}")
    u = sample_haar_unit_vector(dim, rng)
    n = select_index(np.abs(u) ** 2, rng.uniform())
    while True:
        v = rng.complex_normal(dim - 1)
        s = float(np.vdot(v, v).real)
        if s > 0.0:
            break
    un = u[n]
    tail_norm2 = max(0.0, 1.0 - (un.real**2 + un.imag**2))
    psi = np.empty(dim, dtype=np.complex128)
    psi[0] = un
    psi[1:] = np.sqrt(tail_norm2 / s) * v
    return psi


def select_index(probs: np.ndarray, r: float) -> int:
    """Inverse-CDF draw; the last cumulative value is pinned to 1."""
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return int(np.searchsorted(cdf, r, side="right"))


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered set of measured states plus the provenance to regenerate it.

    ``created`` is informational and excluded from equality and from the
    dataset file formats, so that regenerated files are byte-identical.
    """

    dim: int
    outcomes: np.ndarray
    seed: int
    trial_index: int
    created: str = field(default="", compare=False)

    def __post_init__(self):
        out = np.array(self.outcomes, dtype=np.complex128)
        if out.ndim == 1 and out.size == 0:
            out = out.reshape(0, self.dim)
        if out.ndim != 2 or out.shape[1] != self.dim:
            raise DatasetFormatError(
                f"outcomes must have shape (shots, {self.dim}), got {out.shape}"
            )
        norms = np.einsum("ij,ij->i", out.conj(), out).real
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
        if bad.size:
            raise InvariantViolation(
                f"outcome {bad[0]} is not unit norm (|psi|^2 = {norms[bad[0]]!r})"
            )
        out.setflags(write=False)
        object.__setattr__(self, "outcomes", out)

    @property
    def shots(self) -> int:
        return self.outcomes.shape[0]

    @property
    def ref(self) -> tuple[int, int, int, int]:
        return (self.dim, self.seed, self.trial_index, self.shots)

    def prefix(self, m: int) -> np.ndarray:
        """The first ``m`` outcomes as an (m, D) array."""
        if not 0 <= m <= self.shots:
            raise ShadowBenchError(f"prefix length {m} outside [0, {self.shots}]")
        return self.outcomes[:m]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.seed == other.seed
            and self.trial_index == other.trial_index
            and self.outcomes.shape == other.outcomes.shape
            and bool(np.array_equal(self.outcomes, other.outcomes))
        )

    __hash__ = None


def simulate_dataset(dim: int, shots: int, seed: int, trial_index: int) -> Dataset:
    """``shots`` outcomes drawn from stream ``trial_index`` of root ``seed``."""
    if shots < 1:
        raise ShadowBenchError(f"shots must be >= 1, got {shots}")
    rng = RngStream(seed, trial_index)
    outcomes = np.empty((shots, dim), dtype=np.complex128)
    for m in range(shots):
        outcomes[m] = simulate_shot(dim, rng)
    created = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return Dataset(dim, outcomes, seed, trial_index, created)


# -- serialization ---------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_json(d: Dataset) -> str:
    lines = [
        "{",
        f'  "format_version": {FORMAT_VERSION},',
        f'  "dim": {d.dim},',
        f'  "shots": {d.shots},',
        f'  "seed": {d.seed},',
        f'  "trial_index": {d.trial_index},',
        '  "outcomes": [',
    ]
    rows = []
    for psi in d.outcomes:
        pairs = ", ".join(f"[{_fmt(c.real)}, {_fmt(c.imag)}]" for c in psi)
        rows.append(f"    [{pairs}]")
    lines.append(",\n".join(rows))
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def loads_json(text: str) -> Dataset:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"dataset is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DatasetFormatError("dataset JSON must be an object")
    missing = {"format_version", "dim", "shots", "seed", "trial_index", "outcomes"} - doc.keys()
    if missing:
        raise DatasetFormatError(f"dataset header missing fields: {sorted(missing)}")
    if doc["format_version"] != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported format_version {doc['format_version']}")
    dim, shots = doc["dim"], doc["shots"]
    rows = doc["outcomes"]
    if not isinstance(rows, list) or len(rows) != shots:
        raise DatasetFormatError(f"header declares {shots} shots but file holds {len(rows)}")
    out = np.empty((shots, dim), dtype=np.complex128)
    for m, row in enumerate(rows):
        if len(row) != dim:
            raise DatasetFormatError(
                f"outcome {m} has length {len(row)}, header declares dim {dim}"
            )
        try:
            arr = np.asarray(row, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise DatasetFormatError(f"outcome {m} is not a list of [re, im] pairs") from exc
        if arr.shape != (dim, 2):
            raise DatasetFormatError(f"outcome {m} is not a list of [re, im] pairs")
        out[m] = arr[:, 0] + 1j * arr[:, 1]
    return Dataset(dim, out, int(doc["seed"]), int(doc["trial_index"]))


def dumps_bin(d: Dataset) -> bytes:
    header = _BIN_HEADER.pack(BIN_MAGIC, FORMAT_VERSION, d.dim, d.shots, d.seed, d.trial_index)
    body = np.ascontiguousarray(d.outcomes).astype("<c16").tobytes()
    return header + body


def loads_bin(data: bytes) -> Dataset:
    if len(data) < _BIN_HEADER.size:
        raise DatasetFormatError("binary dataset shorter than its header")
    magic, version, dim, shots, seed, trial = _BIN_HEADER.unpack_from(data)
    if magic != BIN_MAGIC:
        raise DatasetFormatError(f"bad magic bytes {magic!r}")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported format version {version}")
    expected = _BIN_HEADER.size + 16 * dim * shots
    if len(data) != expected:
        raise DatasetFormatError(
            f"binary payload is {len(data)} bytes, header implies {expected}"
        )
    out = np.frombuffer(data, dtype="<c16", offset=_BIN_HEADER.size).reshape(shots, dim)
    return Dataset(dim, out.astype(np.complex128), seed, trial)


def _format_for(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        return fmt
    return "bin" if path.suffix == ".bin" else "json"


def save_dataset(d: Dataset, path, fmt: str | None = None) -> Path:
    path = Path(path)
    if _format_for(path, fmt) == "bin":
        path.write_bytes(dumps_bin(d))
    else:
        path.write_text(dumps_json(d))
    return path


def load_dataset(path, fmt: str | None = None) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"dataset file not found: {path}")
    if _format_for(path, fmt) == "bin":
        return loads_bin(path.read_bytes())
    return loads_json(path.read_text())
