"""File formats: model JSON documents, trial-log CSV with a metadata
sidecar, and coincidence-count CSV.

Model documents name built-in response families with their parameters;
arbitrary code is never serialized.  Finite distributions are arrays of
{"index", "weight"} entries; weights may be JSON numbers or decimal strings
(strings are parsed exactly and preserved as exact rational weights).
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .models import (
    CoincidenceModel,
    ContextualFittedModel,
    ContextualProductModel,
    FiniteInstrument,
    FiniteJointSource,
    LrhvModel,
    Setting,
    SettingPair,
    ShvModel,
)
from .protocol import CoincidenceCounts, RunMeta, SettingSchedule, TrialLog


def _weight_entries(weights: np.ndarray, exact) -> list[dict]:
    out = []
    it = np.ndindex(weights.shape)
    for idx in it:
        index = idx[0] if len(idx) == 1 else list(idx)
        if exact is not None:
            w = exact[idx[0]] if len(idx) == 1 else exact[idx[0]][idx[1]]
            out.append({"index": index, "weight": str(w)})
        else:
            out.append({"index": index, "weight": float(weights[idx])})
    return out


def _parse_weight(w) -> tuple[float, Fraction | None]:
    if isinstance(w, str):
        frac = Fraction(w)
        return float(frac), frac
    return float(w), None


def _parse_dist(entries, shape) -> tuple[np.ndarray, object]:
    weights = np.zeros(shape)
    exact: dict = {}
    any_exact = False
    for entry in entries:
        idx = entry["index"]
        idx = tuple(idx) if isinstance(idx, list) else (idx,)
        value, frac = _parse_weight(entry["weight"])
        weights[idx] = value
        exact[idx] = frac if frac is not None else Fraction(value)
        any_exact = any_exact or frac is not None
    if not any_exact:
        return weights, None
    if len(shape) == 1:
        return weights, tuple(exact[(k,)] for k in range(shape[0]))
    return weights, tuple(
        tuple(exact[(i, j)] for j in range(shape[1])) for i in range(shape[0])
    )


def _settings_doc(settings) -> list[dict]:
    return [{"label": s.label, "angle": s.angle} for s in settings]


def _parse_settings(doc, side) -> tuple[Setting, ...]:
    return tuple(Setting(side, d["angle"], d["label"]) for d in doc)


def model_to_dict(model) -> dict:
    """JSON-ready description of a model instance."""
    if isinstance(model, CoincidenceModel):
        return {
            "family": "coincidence",
            "responses": {
                "kind": "sign_cos2",
                "delay": {
                    "kind": "sin2_power",
                    "exponent": model.delay_exponent,
                    "max_delay": model.max_delay,
                },
            },
            "source": {"kind": "continuous_shared", "name": "uniform_angle"},
        }
    doc: dict = {
        "family": model.family,
        "settings": {
            "A": _settings_doc(model.settings_a),
            "B": _settings_doc(model.settings_b),
        },
    }
    if isinstance(model, ContextualFittedModel):
        doc["tables"] = {
            f"{x}|{y}": [
                {"index": [a, b], "weight": float(t[a, b])}
                for a in range(3) for b in range(3)
            ]
            for (x, y), t in sorted(model.tables.items())
        }
        return doc
    doc["source"] = {
        "kind": "finite_joint",
        "shape": list(model.source.shape),
        "weights": _weight_entries(model.source.weights, model.source.exact),
    }
    if isinstance(model, ContextualProductModel):
        doc["instruments"] = {
            s.key: {"weights": _weight_entries(inst.weights, inst.exact)}
            for s, inst in sorted(model.instruments.items(), key=lambda kv: kv[0].key)
        }
        doc["responses"] = {
            "kind": "tables",
            **{
                s.key: model.responses[s].tolist()
                for s in sorted(model.responses, key=lambda s: s.key)
            },
        }
    elif isinstance(model, ShvModel):
        doc["responses"] = {
            "kind": "stochastic",
            **{
                s.key: model.response_probs[s].tolist()
                for s in sorted(model.response_probs, key=lambda s: s.key)
            },
        }
    elif isinstance(model, LrhvModel):
        doc["responses"] = {
            "kind": "deterministic",
            **{
                s.key: model.responses[s].tolist()
                for s in sorted(model.responses, key=lambda s: s.key)
            },
        }
    else:
        raise ValidationError(f"cannot serialize model of type {type(model).__name__}")
    return doc


def model_from_dict(doc: dict):
    """Inverse of :func:`model_to_dict`."""
    family = doc.get("family")
    if family not in ("coincidence", "contextual_product", "contextual_fitted", "shv", "lrhv"):
        raise ValidationError(f"unknown model family {family!r}")
    if family == "coincidence":
        delay = doc["responses"]["delay"]
        return CoincidenceModel(
            delay_exponent=float(delay["exponent"]),
            max_delay=float(delay["max_delay"]),
        )
    settings_a = _parse_settings(doc["settings"]["A"], "A")
    settings_b = _parse_settings(doc["settings"]["B"], "B")
    by_key = {s.key: s for s in (*settings_a, *settings_b)}
    if family == "contextual_fitted":
        tables = {}
        for key, entries in doc["tables"].items():
            x, y = key.split("|")
            t = np.zeros((3, 3))
            for e in entries:
                a, b = e["index"]
                t[a, b] = float(e["weight"])
            tables[(x, y)] = t
        return ContextualFittedModel(settings_a, settings_b, tables)
    shape = tuple(doc["source"]["shape"])
    weights, exact = _parse_dist(doc["source"]["weights"], shape)
    source = FiniteJointSource(weights, exact)
    resp_doc = doc["responses"]
    if family == "contextual_product":
        instruments = {}
        for key, inst in doc["instruments"].items():
            n = len(inst["weights"])
            w, ex = _parse_dist(inst["weights"], (n,))
            instruments[by_key[key]] = FiniteInstrument(w, ex)
        responses = {
            by_key[key]: np.asarray(v)
            for key, v in resp_doc.items() if key != "kind"
        }
        return ContextualProductModel(source, settings_a, settings_b, instruments, responses)
    if family == "shv":
        probs = {
            by_key[key]: np.asarray(v, dtype=np.float64)
            for key, v in resp_doc.items() if key != "kind"
        }
        return ShvModel(source, settings_a, settings_b, probs)
    if family == "lrhv":
        responses = {
            by_key[key]: np.asarray(v)
            for key, v in resp_doc.items() if key != "kind"
        }
        return LrhvModel(source, settings_a, settings_b, responses)
    raise ValidationError(f"unknown model family {family!r}")


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True))


def load_model(path: str | Path):
    return model_from_dict(json.loads(Path(path).read_text()))


LOG_HEADER = ["window", "setting_a", "setting_b", "a", "b", "delay_a", "delay_b"]


def write_log_csv(log: TrialLog, path: str | Path) -> None:
    """One row per window plus a `<name>.meta.json` sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_HEADER)
        labels_a = [p.x.label for p in log.pairs]
        labels_b = [p.y.label for p in log.pairs]
        for w in range(len(log)):
            k = log.pair_index[w]
            writer.writerow([
                w, labels_a[k], labels_b[k],
                int(log.a[w]), int(log.b[w]),
                repr(float(log.delay_a[w])), repr(float(log.delay_b[w])),
            ])
    meta = {
        "seed": log.meta.seed,
        "n": log.meta.n,
        "window": log.meta.window,
        "schedule": log.meta.schedule,
        "model": log.meta.model,
        "backend": log.meta.backend,
    }
    meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_suffix(path.suffix + ".meta.json") if path.suffix != ".csv" \
        else path.with_name(path.stem + ".meta.json")


def read_log_csv(path: str | Path) -> TrialLog:
    path = Path(path)
    meta_file = meta_path(path)
    if not meta_file.exists():
        raise ValidationError(f"missing metadata sidecar {meta_file}")
    meta_doc = json.loads(meta_file.read_text())
    schedule_doc = meta_doc["schedule"]
    pairs = tuple(
        SettingPair(
            Setting("A", p["angle_a"], p["setting_a"]),
            Setting("B", p["angle_b"], p["setting_b"]),
            p["weight"],
        )
        for p in schedule_doc["pairs"]
    )
    key_to_index = {(p.x.label, p.y.label): k for k, p in enumerate(pairs)}

    pair_index, a, b, da, db = [], [], [], [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LOG_HEADER:
            raise ValidationError(f"unexpected log header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            try:
                _, sa, sb, va, vb, dda, ddb = row
                pair_index.append(key_to_index[(sa, sb)])
                a.append(int(va))
                b.append(int(vb))
                da.append(float(dda))
                db.append(float(ddb))
            except (ValueError, KeyError) as exc:
                raise ValidationError(f"{path}:{lineno}: malformed row ({exc})") from exc
    meta = RunMeta(
        seed=meta_doc["seed"], n=meta_doc["n"], window=meta_doc["window"],
        schedule=schedule_doc, model=meta_doc["model"],
        backend=meta_doc.get("backend", "unknown"),
    )
    return TrialLog(
        pairs,
        np.asarray(pair_index, dtype=np.int32),
        np.asarray(a, dtype=np.int8),
        np.asarray(b, dtype=np.int8),
        np.asarray(da), np.asarray(db),
        meta,
    )


COUNTS_HEADER = ["setting_a", "setting_b", "a", "b", "count"]


def write_counts_csv(counts: CoincidenceCounts, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COUNTS_HEADER)
        for k, pair in enumerate(counts.pairs):
            for a in (-1, 0, 1):
                for b in (-1, 0, 1):
                    writer.writerow([
                        pair.x.label, pair.y.label, a, b,
                        int(counts.tables[k, a + 1, b + 1]),
                    ])


def read_counts_csv(path: str | Path) -> CoincidenceCounts:
    rows: dict[tuple[str, str], np.ndarray] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != COUNTS_HEADER:
            raise ValidationError(f"unexpected counts header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            try:
                sa, sb, a, b, count = row
                table = rows.setdefault((sa, sb), np.zeros((3, 3), dtype=np.int64))
                table[int(a) + 1, int(b) + 1] += int(count)
            except (ValueError, KeyError) as exc:
                raise ValidationError(f"{path}:{lineno}: malformed row ({exc})") from exc
    pairs = tuple(
        SettingPair(Setting("A", 0.0, sa), Setting("B", 0.0, sb))
        for sa, sb in rows
    )
    tables = np.stack([rows[p.labels] for p in pairs]) if rows else np.zeros((0, 3, 3))
    return CoincidenceCounts(pairs, tables)
