"""Core domain types, dataset ingestion, feature codecs and record persistence.

Binary layouts (all little-endian):

* embedding file: ``b"SGEMB1"``, u32 count, u32 dim, ``count*dim`` float32.
* keypoint file: ``b"SGKPT1"``, u32 frame_count, u32 point_count, u32 track_count,
  ``frame_count*point_count*3`` float32, then ``track_count*frame_count`` bytes
  (0/1 presence flags, track-major).

Hand keypoint files carry 42 points (left hand joints 0-20, right 21-41) and two
presence tracks (left, right). Body keypoint files use :data:`BODY_JOINTS`.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import (
    BadMagic,
    DataError,
    DuplicateSampleId,
    FrameCountMismatch,
    MissingFeatureFile,
    NonFiniteValue,
    ParseError,
    SchemaViolation,
    TruncatedFile,
)

EMB_MAGIC = b"SGEMB1"
KPT_MAGIC = b"SGKPT1"

COMPONENT_KINDS = (
    "handshape-base",
    "handshape-minor",
    "movement",
    "location-major",
    "location-minor",
)

# Closed label sets per component kind. Dictionaries and prototype banks may only
# use these labels unless an explicit override is passed to the loaders.
LABEL_SETS: dict[str, frozenset[str]] = {
    "handshape-base": frozenset(
        ["A", "B", "C", "F", "G", "H", "I", "L", "O", "S", "V", "W", "Y", "5", "flat-B", "claw-5"]
    ),
    "handshape-minor": frozenset(["plain", "bent", "spread", "thumb-out", "thumb-in", "curved"]),
    "movement": frozenset(["hold", "straight", "arc", "circle", "zigzag", "oscillate", "tap", "twist"]),
    "location-major": frozenset(["head", "neck", "chest", "torso", "neutral-space"]),
    "location-minor": frozenset(
        [
            "forehead",
            "eyes",
            "nose",
            "mouth",
            "chin",
            "cheek",
            "neck-front",
            "shoulder",
            "chest-centre",
            "stomach",
            "waist",
            "neutral-high",
            "neutral-mid",
            "neutral-low",
        ]
    ),
}

HANDEDNESS_VALUES = ("one-handed", "two-handed", "unknown")

BODY_JOINTS = (
    "nose",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
)
NOSE, L_SHOULDER, R_SHOULDER, L_ELBOW, R_ELBOW, L_WRIST, R_WRIST = range(len(BODY_JOINTS))
HAND_JOINTS = 21


# --------------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------------


def as_embedding(vector, dim: int | None = None) -> np.ndarray:
    """Validate and return a 1-D float64 embedding vector."""
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"embedding must be a non-empty 1-D vector, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise ValueError(f"embedding dim {v.size} != expected {dim}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue("embedding contains non-finite values")
    return v


@dataclass
class SampleRecord:
    sample_id: str
    sentence: str | None = None
    gloss_label: str | None = None
    segments: list[tuple[int, int]] | None = None
    feature_refs: dict[str, str] = field(default_factory=dict)
    frame_rate: float = 25.0
    subset: str | None = None

    def __post_init__(self):
        if not isinstance(self.sample_id, str) or not self.sample_id:
            raise DataError("sample_id must be a non-empty string")
        if self.segments is not None:
            self.segments = [(int(a), int(b)) for a, b in self.segments]
        if not self.frame_rate > 0:
            raise DataError(f"{self.sample_id}: frame_rate must be positive")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"sample_id": self.sample_id}
        if self.sentence is not None:
            d["sentence"] = self.sentence
        if self.gloss_label is not None:
            d["gloss_label"] = self.gloss_label
        if self.segments is not None:
            d["segments"] = [list(s) for s in self.segments]
        d["feature_refs"] = dict(self.feature_refs)
        d["frame_rate"] = self.frame_rate
        if self.subset is not None:
            d["subset"] = self.subset
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SampleRecord":
        known = {"sample_id", "sentence", "gloss_label", "segments", "feature_refs", "frame_rate", "subset"}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown sample fields: {sorted(unknown)}")
        if "sample_id" not in d:
            raise DataError("missing sample_id")
        return cls(
            sample_id=d["sample_id"],
            sentence=d.get("sentence"),
            gloss_label=d.get("gloss_label"),
            segments=d.get("segments"),
            feature_refs=dict(d.get("feature_refs", {})),
            frame_rate=float(d.get("frame_rate", 25.0)),
            subset=d.get("subset"),
        )


@dataclass
class FrameFeatures:
    """Per-frame features of one sample. Arrays share the leading frame axis."""

    body_keypoints: np.ndarray  # (F, len(BODY_JOINTS), 3)
    hand_keypoints_left: np.ndarray  # (F, 21, 3); rows meaningless where absent
    hand_keypoints_right: np.ndarray
    hand_present_left: np.ndarray  # (F,) bool
    hand_present_right: np.ndarray
    frame_rate: float = 25.0
    frame_embeddings: np.ndarray | None = None  # (F, D)

    def __post_init__(self):
        self.body_keypoints = np.asarray(self.body_keypoints, dtype=np.float64)
        self.hand_keypoints_left = np.asarray(self.hand_keypoints_left, dtype=np.float64)
        self.hand_keypoints_right = np.asarray(self.hand_keypoints_right, dtype=np.float64)
        self.hand_present_left = np.asarray(self.hand_present_left, dtype=bool)
        self.hand_present_right = np.asarray(self.hand_present_right, dtype=bool)
        n = self.body_keypoints.shape[0]
        arrays = [self.hand_keypoints_left, self.hand_keypoints_right, self.hand_present_left, self.hand_present_right]
        if self.frame_embeddings is not None:
            self.frame_embeddings = np.asarray(self.frame_embeddings, dtype=np.float64)
            arrays.append(self.frame_embeddings)
        if any(a.shape[0] != n for a in arrays):
            raise FrameCountMismatch("per-frame arrays differ in length")
        if self.body_keypoints.ndim != 3 or self.body_keypoints.shape[2] != 3:
            raise DataError(f"body keypoints must be (F, P, 3), got {self.body_keypoints.shape}")
        for a in (self.body_keypoints, self.hand_keypoints_left, self.hand_keypoints_right):
            if not np.all(np.isfinite(a)):
                raise NonFiniteValue("keypoint coordinates must be finite")
        if not self.frame_rate > 0:
            raise DataError("frame_rate must be positive")

    @property
    def frame_count(self) -> int:
        return int(self.body_keypoints.shape[0])

    @property
    def wrists(self) -> tuple[np.ndarray, np.ndarray]:
        """(left, right) wrist trajectories, each (F, 3)."""
        return self.body_keypoints[:, L_WRIST], self.body_keypoints[:, R_WRIST]

    def slice(self, start: int, end: int) -> "FrameFeatures":
        emb = None if self.frame_embeddings is None else self.frame_embeddings[start:end]
        return FrameFeatures(
            self.body_keypoints[start:end],
            self.hand_keypoints_left[start:end],
            self.hand_keypoints_right[start:end],
            self.hand_present_left[start:end],
            self.hand_present_right[start:end],
            self.frame_rate,
            emb,
        )


@dataclass
class DictionaryEntry:
    gloss_id: str
    canonical_phonology: dict[str, str]
    reference_embedding: np.ndarray
    handedness: str = "unknown"
    keywords: list[str] | None = None
    frequency: float = 1.0

    def __post_init__(self):
        if not self.gloss_id:
            raise DataError("gloss_id must be non-empty")
        self.reference_embedding = as_embedding(self.reference_embedding)
        if self.handedness not in HANDEDNESS_VALUES:
            raise DataError(f"{self.gloss_id}: bad handedness {self.handedness!r}")
        if self.keywords is None:
            self.keywords = [default_keyword(self.gloss_id)]
        self.keywords = [k.lower() for k in self.keywords]

    def to_dict(self, inline_embedding: bool = True) -> dict[str, Any]:
        d: dict[str, Any] = {
            "gloss_id": self.gloss_id,
            "canonical_phonology": dict(self.canonical_phonology),
            "handedness": self.handedness,
            "keywords": list(self.keywords),
            "frequency": self.frequency,
        }
        if inline_embedding:
            d["reference_embedding"] = [float(x) for x in self.reference_embedding]
        return d


def default_keyword(gloss_id: str) -> str:
    """``"DOG2"`` -> ``"dog"``: lowercase with trailing variant digits removed."""
    base = gloss_id.rstrip("0123456789").rstrip("-_")
    return (base or gloss_id).lower()


@dataclass
class DatasetManifest:
    samples: list[SampleRecord]
    dictionary_ref: str | None = None
    metadata: dict[str, str] = field(default_factory=dict)
    base_dir: Path | None = None

    def __post_init__(self):
        seen: set[str] = set()
        for s in self.samples:
            if s.sample_id in seen:
                raise DuplicateSampleId(s.sample_id)
            seen.add(s.sample_id)

    def __len__(self) -> int:
        return len(self.samples)

    def by_id(self) -> dict[str, SampleRecord]:
        return {s.sample_id: s for s in self.samples}

    def resolve(self, ref: str) -> Path:
        p = Path(ref)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p


# --------------------------------------------------------------------------------
# binary codecs
# --------------------------------------------------------------------------------


def write_embedding_file(path, vectors) -> None:
    arr = np.asarray(vectors, dtype="<f4")
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("expected a (count, dim) array")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("refusing to write non-finite embeddings")
    count, dim = arr.shape
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<II", count, dim))
        fh.write(np.ascontiguousarray(arr).tobytes())


def _read_header(data: bytes, magic: bytes, n_fields: int, path) -> tuple[int, ...]:
    if data[: len(magic)] != magic:
        raise BadMagic(f"{path}: expected magic {magic!r}")
    need = len(magic) + 4 * n_fields
    if len(data) < need:
        raise TruncatedFile(f"{path}: header truncated")
    return struct.unpack("<" + "I" * n_fields, data[len(magic) : need])


def load_embedding_file(path) -> np.ndarray:
    """Decode an embedding file into a ``(count, dim)`` float32 array."""
    data = Path(path).read_bytes()
    count, dim = _read_header(data, EMB_MAGIC, 2, path)
    offset = len(EMB_MAGIC) + 8
    nbytes = count * dim * 4
    if len(data) < offset + nbytes:
        raise TruncatedFile(f"{path}: expected {nbytes} payload bytes, found {len(data) - offset}")
    arr = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset).reshape(count, dim)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{path}: non-finite value in payload")
    return arr.copy()


def write_keypoint_file(path, points, presence=None) -> None:
    pts = np.asarray(points, dtype="<f4")
    if pts.ndim != 3 or pts.shape[2] != 3:
        raise ValueError("points must be (frames, points, 3)")
    if not np.all(np.isfinite(pts)):
        raise NonFiniteValue("refusing to write non-finite keypoints")
    frames, npts, _ = pts.shape
    tracks = np.zeros((0, frames), dtype=np.uint8) if presence is None else np.asarray(presence, dtype=np.uint8)
    if tracks.ndim != 2 or tracks.shape[1] != frames:
        raise ValueError("presence must be (tracks, frames)")
    with open(path, "wb") as fh:
        fh.write(KPT_MAGIC)
        fh.write(struct.pack("<III", frames, npts, tracks.shape[0]))
        fh.write(np.ascontiguousarray(pts).tobytes())
        fh.write(np.ascontiguousarray(tracks).tobytes())


def load_keypoint_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(points (F, P, 3) float32, presence (tracks, F) bool)``."""
    data = Path(path).read_bytes()
    frames, npts, ntracks = _read_header(data, KPT_MAGIC, 3, path)
    offset = len(KPT_MAGIC) + 12
    nfloat = frames * npts * 3
    need = offset + 4 * nfloat + ntracks * frames
    if len(data) < need:
        raise TruncatedFile(f"{path}: expected {need} bytes, found {len(data)}")
    pts = np.frombuffer(data, dtype="<f4", count=nfloat, offset=offset).reshape(frames, npts, 3)
    if not np.all(np.isfinite(pts)):
        raise NonFiniteValue(f"{path}: non-finite keypoint")
    raw = np.frombuffer(data, dtype=np.uint8, count=ntracks * frames, offset=offset + 4 * nfloat)
    if np.any(raw > 1):
        raise ParseError(f"{path}: presence flags must be 0/1")
    return pts.copy(), raw.reshape(ntracks, frames).astype(bool)


def _frames_in(path: Path) -> int:
    with open(path, "rb") as fh:
        head = fh.read(18)
    if head[:6] == EMB_MAGIC:
        return _read_header(head, EMB_MAGIC, 2, path)[0]
    return _read_header(head, KPT_MAGIC, 3, path)[0]


# --------------------------------------------------------------------------------
# manifest
# --------------------------------------------------------------------------------

FRAME_REFS = ("embeddings", "body", "hands")


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    """Load and eagerly validate a JSON Lines manifest.

    An optional first line of the form ``{"manifest": {...}}`` carries
    ``dictionary_ref`` and ``metadata``; every other line is one sample.
    """
    path = Path(path)
    samples: list[SampleRecord] = []
    header: dict[str, Any] = {}
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not isinstance(doc, dict):
                raise ParseError("expected a JSON object", line=lineno)
            if "manifest" in doc and lineno == 1:
                header = doc["manifest"]
                continue
            try:
                rec = SampleRecord.from_dict(doc)
            except DuplicateSampleId:
                raise
            except DataError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if rec.sample_id in seen:
                raise DuplicateSampleId(rec.sample_id)
            seen.add(rec.sample_id)
            samples.append(rec)
    manifest = DatasetManifest(
        samples,
        dictionary_ref=header.get("dictionary_ref"),
        metadata={str(k): str(v) for k, v in header.get("metadata", {}).items()},
        base_dir=path.parent,
    )
    if check_files:
        for rec in samples:
            _check_sample_files(manifest, rec)
        if manifest.dictionary_ref is not None and not manifest.resolve(manifest.dictionary_ref).exists():
            raise MissingFeatureFile(manifest.resolve(manifest.dictionary_ref))
    return manifest


def _check_sample_files(manifest: DatasetManifest, rec: SampleRecord) -> None:
    counts = {}
    for key, ref in rec.feature_refs.items():
        p = manifest.resolve(ref)
        if not p.exists():
            raise MissingFeatureFile(p)
        if key in FRAME_REFS:
            counts[key] = _frames_in(p)
    if len(set(counts.values())) > 1:
        raise FrameCountMismatch(f"{rec.sample_id}: frame counts differ across feature files {counts}")
    if rec.segments and counts:
        n = next(iter(counts.values()))
        for a, b in rec.segments:
            if not (0 <= a < b <= n):
                raise DataError(f"{rec.sample_id}: segment ({a}, {b}) outside 0..{n}")


def write_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if manifest.dictionary_ref is not None or manifest.metadata:
            head = {"dictionary_ref": manifest.dictionary_ref, "metadata": manifest.metadata}
            fh.write(json.dumps({"manifest": head}, sort_keys=True) + "\n")
        for s in manifest.samples:
            fh.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")


def normalize_signer_centric(body: np.ndarray, *others: np.ndarray) -> tuple[np.ndarray, ...]:
    """Translate to mid-shoulder origin and scale by shoulder width, per frame."""
    body = np.asarray(body, dtype=np.float64)
    mid = 0.5 * (body[:, L_SHOULDER] + body[:, R_SHOULDER])
    width = np.linalg.norm(body[:, L_SHOULDER] - body[:, R_SHOULDER], axis=1)
    if np.any(width <= 0):
        raise DataError("zero shoulder width; cannot normalize keypoints")
    out = [(body - mid[:, None, :]) / width[:, None, None]]
    for arr in others:
        out.append((np.asarray(arr, dtype=np.float64) - mid[:, None, :]) / width[:, None, None])
    return tuple(out)


def load_features(manifest: DatasetManifest, rec: SampleRecord) -> FrameFeatures:
    refs = rec.feature_refs
    if "body" not in refs:
        raise MissingFeatureFile(f"{rec.sample_id}: no body keypoint reference")
    body, _ = load_keypoint_file(manifest.resolve(refs["body"]))
    n = body.shape[0]
    if "hands" in refs:
        hands, presence = load_keypoint_file(manifest.resolve(refs["hands"]))
        if hands.shape[1] != 2 * HAND_JOINTS or presence.shape[0] != 2:
            raise DataError(f"{rec.sample_id}: hand file must hold 42 points and 2 presence tracks")
    else:
        hands = np.zeros((n, 2 * HAND_JOINTS, 3), dtype=np.float32)
        presence = np.zeros((2, n), dtype=bool)
    emb = load_embedding_file(manifest.resolve(refs["embeddings"])) if "embeddings" in refs else None
    body_n, hands_n = normalize_signer_centric(body, hands)
    return FrameFeatures(
        body_keypoints=body_n,
        hand_keypoints_left=hands_n[:, :HAND_JOINTS],
        hand_keypoints_right=hands_n[:, HAND_JOINTS:],
        hand_present_left=presence[0],
        hand_present_right=presence[1],
        frame_rate=rec.frame_rate,
        frame_embeddings=emb,
    )


# --------------------------------------------------------------------------------
# dictionary
# --------------------------------------------------------------------------------


def validate_phonology(gloss_id: str, phonology: Mapping[str, str], label_sets=None) -> None:
    from .errors import UnknownComponentLabel

    label_sets = LABEL_SETS if label_sets is None else label_sets
    for kind, label in phonology.items():
        if kind not in label_sets:
            raise UnknownComponentLabel(f"{gloss_id}: unknown component kind {kind!r}")
        if label not in label_sets[kind]:
            raise UnknownComponentLabel(f"{gloss_id}: label {label!r} not in the {kind} label set")


def load_dictionary(path, label_sets=None) -> list[DictionaryEntry]:
    """Load a dictionary JSON array.

    Each entry carries ``reference_embedding`` inline (list of floats) or
    ``embedding_ref: {"file": ..., "index": i}`` pointing into an embedding file
    relative to the dictionary.
    """
    path = Path(path)
    try:
        docs = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(docs, list):
        raise ParseError(f"{path}: dictionary must be a JSON array")
    cache: dict[str, np.ndarray] = {}
    entries = []
    for d in docs:
        if "reference_embedding" in d:
            emb = d["reference_embedding"]
        elif "embedding_ref" in d:
            ref = d["embedding_ref"]
            f = str(path.parent / ref["file"])
            if f not in cache:
                if not Path(f).exists():
                    raise MissingFeatureFile(f)
                cache[f] = load_embedding_file(f)
            emb = cache[f][int(ref["index"])]
        else:
            raise ParseError(f"{d.get('gloss_id')}: entry has no reference embedding")
        validate_phonology(d["gloss_id"], d.get("canonical_phonology", {}), label_sets)
        entries.append(
            DictionaryEntry(
                gloss_id=d["gloss_id"],
                canonical_phonology=dict(d.get("canonical_phonology", {})),
                reference_embedding=np.asarray(emb, dtype=np.float64),
                handedness=d.get("handedness", "unknown"),
                keywords=d.get("keywords"),
                frequency=float(d.get("frequency", 1.0)),
            )
        )
    return entries


def write_dictionary(entries: Iterable[DictionaryEntry], path, embedding_file: str | None = None) -> None:
    """Write a dictionary; with ``embedding_file`` the vectors go to a sibling binary file."""
    entries = list(entries)
    path = Path(path)
    if embedding_file is None:
        docs = [e.to_dict() for e in entries]
    else:
        write_embedding_file(path.parent / embedding_file, np.stack([e.reference_embedding for e in entries]))
        docs = []
        for i, e in enumerate(entries):
            d = e.to_dict(inline_embedding=False)
            d["embedding_ref"] = {"file": embedding_file, "index": i}
            docs.append(d)
    path.write_text(json.dumps(docs, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------------
# annotation records
# --------------------------------------------------------------------------------

_SCHEMA_DIR = Path(__file__).parent / "schemas"
_SCHEMA_FILES = {
    "pseudogloss": "pseudogloss_record.schema.json",
    "idgloss": "idgloss_record.schema.json",
}
_schema_cache: dict[str, dict] = {}


def record_schema(task: str) -> dict:
    if task not in _SCHEMA_FILES:
        raise SchemaViolation(["task"], f"unknown record task {task!r}")
    if task not in _schema_cache:
        _schema_cache[task] = json.loads((_SCHEMA_DIR / _SCHEMA_FILES[task]).read_text())
    return _schema_cache[task]


def validate_record(doc: Mapping[str, Any]) -> None:
    """Raise :class:`SchemaViolation` listing every failing field of ``doc``."""
    import jsonschema

    task = doc.get("task") if isinstance(doc, Mapping) else None
    schema = record_schema(task)
    validator = jsonschema.Draft202012Validator(schema)
    failing = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        where = "/".join(str(p) for p in err.absolute_path)
        if err.validator == "required":
            missing = [r for r in err.validator_value if r not in err.instance]
            failing.extend(f"{where}/{m}" if where else m for m in missing)
        else:
            failing.append(where or err.validator)
    if failing:
        raise SchemaViolation(failing)


def _jsonable(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    return obj


def dumps_record(doc: Mapping[str, Any]) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_annotation_record(record, path) -> None:
    """Schema-validate and persist a task record (validity flags are kept as-is)."""
    doc = _jsonable(record)
    validate_record(doc)
    text = dumps_record(doc)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def read_annotation_record(path) -> dict[str, Any]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    validate_record(doc)
    return doc


def finite_or_none(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None
