"""File formats: datasets, content-embedding stores, checkpoints, reports.

Datasets are line-delimited JSON for streaming validation; embeddings use a
compact binary layout; checkpoints are zipped numpy archives with a JSON
metadata record.  All writes go to a temp file first and are atomically
renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .consistency import ThresholdTable
from .encoders import EmbeddingStore
from .errors import DataError
from .graph import MisinfoTarget, StanceLabel
from .trainer import ModelState, ScoringModel, TrainConfig

SPLITS = ("train", "dev", "test")

STORE_MAGIC = b"CVLE"
STORE_VERSION = 1
CHECKPOINT_VERSION = 1

#: Default misinformation taxonomy: theme -> known concerns.
DEFAULT_TAXONOMY = {
    "vaccine-ingredients": ["contains the virus", "microchips", "toxic additives",
                            "fetal tissue"],
    "adverse-events": ["severe side effects", "worse than the disease", "deaths"],
    "vaccine-unsafe": ["risky pregnancies", "bells palsy", "infertility", "autism",
                       "dna alteration", "long-term harm", "allergic reactions",
                       "other illnesses"],
    "vaccine-alternatives": ["natural immunity", "unproven treatments"],
    "vaccine-testing": ["rushed development", "skipped trials"],
    "vaccine-unnecessary": ["low personal risk", "pandemic exaggerated"],
    "immune-system": ["weakens immunity", "immune overload"],
    "information-concealment": ["hidden safety data"],
    "vaccine-ineffective": ["does not prevent infection"],
}


def _atomic_write(path: str, payload: bytes):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class DatasetRecord:
    tweet_id: str
    mist_id: str
    stance: StanceLabel
    split: str
    text: Optional[str] = None


def read_dataset(path: str):
    """Parse the line-delimited dataset; malformed records raise DataError."""
    records, errors = scan_dataset(path)
    if errors:
        raise DataError(f"{len(errors)} malformed dataset records; first: {errors[0]}")
    return records


def scan_dataset(path: str):
    """Parse leniently, returning (records, error_strings) for validation."""
    records, errors = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(f"line {lineno}: invalid JSON ({exc})")
                continue
            try:
                stance = StanceLabel.parse(str(raw["stance"]))
            except (KeyError, ValueError):
                errors.append(f"line {lineno}: bad stance {raw.get('stance')!r}")
                continue
            split = raw.get("split", "")
            if split not in SPLITS:
                errors.append(f"line {lineno}: bad split {split!r}")
                continue
            if "tweet_id" not in raw or "mist_id" not in raw:
                errors.append(f"line {lineno}: missing tweet_id or mist_id")
                continue
            records.append(DatasetRecord(
                tweet_id=str(raw["tweet_id"]), mist_id=str(raw["mist_id"]),
                stance=stance, split=split, text=raw.get("text")))
    return records, errors


def write_dataset(path: str, records):
    buf = io.StringIO()
    for r in records:
        row = {"tweet_id": r.tweet_id, "mist_id": r.mist_id,
               "stance": r.stance.value, "split": r.split}
        if r.text is not None:
            row["text"] = r.text
        buf.write(json.dumps(row, sort_keys=True) + "\n")
    _atomic_write(path, buf.getvalue().encode("utf-8"))


def read_mists(path: str):
    mists = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            if "mist_id" not in raw:
                raise DataError(f"{path} line {lineno}: missing mist_id")
            mid = str(raw["mist_id"])
            if mid in seen:
                raise DataError(f"{path} line {lineno}: duplicate mist_id {mid!r}")
            seen.add(mid)
            mists.append(MisinfoTarget(id=mid, text=raw.get("text", ""),
                                       theme=raw.get("theme", ""),
                                       concern=raw.get("concern", "")))
    return mists


def write_mists(path: str, mists):
    buf = io.StringIO()
    for m in mists:
        buf.write(json.dumps({"mist_id": m.id, "text": m.text, "theme": m.theme,
                              "concern": m.concern}, sort_keys=True) + "\n")
    _atomic_write(path, buf.getvalue().encode("utf-8"))


def load_taxonomy(path: Optional[str] = None) -> dict:
    if path is None:
        return {k: list(v) for k, v in DEFAULT_TAXONOMY.items()}
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise DataError(f"taxonomy file {path} must map themes to concern lists")
    return {str(k): [str(c) for c in v] for k, v in data.items()}


# ---------------------------------------------------------------------------
# binary content-embedding store
#
# magic "CVLE" | version u32 LE | record count u64 LE | dimension u32 LE
# then per record: key length u16 LE | UTF-8 key | dimension float32 LE values


def write_embedding_store(path: str, store: EmbeddingStore):
    buf = io.BytesIO()
    buf.write(STORE_MAGIC)
    buf.write(struct.pack("<I", STORE_VERSION))
    buf.write(struct.pack("<Q", len(store.records)))
    buf.write(struct.pack("<I", store.dim))
    for key, vec in store.records.items():
        encoded = key.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise DataError(f"embedding key too long: {key[:40]!r}...")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(np.asarray(vec, dtype="<f4").tobytes())
    _atomic_write(path, buf.getvalue())


def read_embedding_store(path: str) -> EmbeddingStore:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != STORE_MAGIC:
        raise DataError(f"{path}: bad magic bytes, not an embedding store")
    version, = struct.unpack_from("<I", data, 4)
    if version != STORE_VERSION:
        raise DataError(f"{path}: unsupported store version {version}")
    count, = struct.unpack_from("<Q", data, 8)
    dim, = struct.unpack_from("<I", data, 16)
    store = EmbeddingStore(dim=dim)
    offset = 20
    for _ in range(count):
        klen, = struct.unpack_from("<H", data, offset)
        offset += 2
        key = data[offset:offset + klen].decode("utf-8")
        offset += klen
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
        store.add(key, vec)
    if offset != len(data):
        raise DataError(f"{path}: {len(data) - offset} trailing bytes after "
                        f"declared {count} records")
    return store


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str, state: ModelState, config: Optional[TrainConfig] = None,
                    thresholds: Optional[ThresholdTable] = None):
    """Write parameters plus metadata; bit-exact on reload."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "kind": state.kind.value,
        "dim_in": state.dim_in,
        "dim_k": state.dim_k,
        "mist_ids": state.mist_ids,
        "step": state.step,
        "epoch_losses": state.epoch_losses,
        "param_names": list(state.params.keys()),
    }
    if config is not None:
        meta["config"] = {
            "model": config.model.value, "epochs": config.epochs,
            "batch_size": config.batch_size, "peak_lr": config.peak_lr,
            "warmup_fraction": config.warmup_fraction, "margin": config.margin,
            "negatives_per_positive": config.negatives_per_positive,
            "dim_k": config.dim_k, "seed": config.seed,
            "positive_cap_per_mist_per_epoch": config.positive_cap_per_mist_per_epoch,
        }
    if thresholds is not None:
        meta["thresholds"] = {"values": thresholds.values,
                              "global_fallback": thresholds.global_fallback}

    arrays = {"meta_json": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    for name, value in state.params.items():
        arrays[f"param_{name}"] = value
        arrays[f"m1_{name}"] = state.m1[name]
        arrays[f"m2_{name}"] = state.m2[name]

    buf = io.BytesIO()
    np.savez(buf, **arrays)
    _atomic_write(path, buf.getvalue())


def load_checkpoint(path: str):
    """Returns (ModelState, TrainConfig | None, ThresholdTable | None)."""
    with np.load(path) as archive:
        meta = json.loads(bytes(archive["meta_json"]).decode("utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        params, m1, m2 = {}, {}, {}
        for name in meta["param_names"]:
            params[name] = archive[f"param_{name}"].copy()
            m1[name] = archive[f"m1_{name}"].copy()
            m2[name] = archive[f"m2_{name}"].copy()

    state = ModelState(
        kind=ScoringModel(meta["kind"]), dim_in=meta["dim_in"], dim_k=meta["dim_k"],
        mist_ids=list(meta["mist_ids"]), params=params, m1=m1, m2=m2,
        step=meta["step"], epoch_losses=list(meta["epoch_losses"]))

    config = None
    if "config" in meta:
        c = meta["config"]
        config = TrainConfig(
            model=ScoringModel(c["model"]), epochs=c["epochs"],
            batch_size=c["batch_size"], peak_lr=c["peak_lr"],
            warmup_fraction=c["warmup_fraction"], margin=c["margin"],
            negatives_per_positive=c["negatives_per_positive"], dim_k=c["dim_k"],
            seed=c["seed"],
            positive_cap_per_mist_per_epoch=c["positive_cap_per_mist_per_epoch"])

    thresholds = None
    if "thresholds" in meta:
        t = meta["thresholds"]
        thresholds = ThresholdTable(values=dict(t["values"]),
                                    global_fallback=t["global_fallback"])
    return state, config, thresholds


# ---------------------------------------------------------------------------
# thresholds, predictions, reports


def write_thresholds(path: str, table: ThresholdTable):
    """Key-value text: one `mist_id<TAB>threshold` line; `*` is the fallback."""
    lines = [f"{mid}\t{table.values[mid]!r}" for mid in sorted(table.values)]
    lines.append(f"*\t{table.global_fallback!r}")
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_thresholds(path: str) -> ThresholdTable:
    values, fallback = {}, 0.0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                key, value = line.split("\t")
                value = float(value)
            except ValueError:
                raise DataError(f"{path} line {lineno}: expected 'mist_id<TAB>float'") from None
            if key == "*":
                fallback = value
            else:
                values[key] = value
    return ThresholdTable(values=values, global_fallback=fallback)


def write_predictions(path: str, predictions):
    buf = io.StringIO()
    for p in predictions:
        buf.write(json.dumps({
            "tweet_id": p.tweet_id, "mist_id": p.mist_id, "stance": p.stance.value,
            "score_accept": p.score_accept, "score_reject": p.score_reject,
        }, sort_keys=True) + "\n")
    _atomic_write(path, buf.getvalue().encode("utf-8"))


def read_predictions(path: str):
    """Returns (tweet_id, mist_id, StanceLabel) triples."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            out.append((str(raw["tweet_id"]), str(raw["mist_id"]),
                        StanceLabel.parse(raw["stance"])))
    return out


def write_report_json(path: str, report, theme_report=None, extra: Optional[dict] = None):
    doc = {"overall": report.to_dict()}
    if theme_report is not None:
        doc["by_theme"] = theme_report.to_dict()
    if extra:
        doc["meta"] = extra
    _atomic_write(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def write_theme_csv(path: str, theme_report):
    """Plot-ready rows: theme, accept_f1, reject_f1, support."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["theme", "accept_f1", "reject_f1", "support"])
    for theme, m in theme_report.per_theme.items():
        writer.writerow([theme, f"{m.accept_f1:.6f}", f"{m.reject_f1:.6f}", m.support])
    _atomic_write(path, buf.getvalue().encode("utf-8"))
