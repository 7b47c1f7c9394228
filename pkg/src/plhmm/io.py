"""CSV and JSON formats: series, models, segmentations, score tracks, traces.

Floats are written with ``repr`` so every value reads back bit-identical.
"""
import csv
import json
import math

import numpy as np

from .durations import duration_from_dict
from .errors import DataError, DomainError, ModelFormatError, ParseError
from .lattice import Segmentation
from .model import (DEFAULT_SAMPLING_PERIOD, BasisConfig, EmissionParams, Model,
                    Series, validate)

MODEL_VERSION = 1


def _fmt(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------

def _parse_float(text, lineno):
    try:
        x = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", lineno) from None
    if not math.isfinite(x):
        raise ParseError(f"non-finite value {text!r}", lineno)
    return x


def load_series(path):
    """Read a ``t,value`` or ``value`` CSV, honouring an optional ``# fs=<Hz>`` line."""
    period = DEFAULT_SAMPLING_PERIOD
    header = None
    values = []
    last_t = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.lower().startswith("fs="):
                    fs = _parse_float(body[3:].strip(), lineno)
                    if fs <= 0:
                        raise ParseError("sampling rate must be positive", lineno)
                    period = 1.0 / fs
                continue
            cells = [c.strip() for c in line.split(",")]
            if header is None:
                header = [c.lower() for c in cells]
                if header not in (["t", "value"], ["value"]):
                    raise ParseError(f"expected header 't,value' or 'value', got {line!r}", lineno)
                continue
            if len(cells) != len(header):
                raise ParseError(f"expected {len(header)} columns, got {len(cells)}", lineno)
            if len(header) == 2:
                t = _parse_float(cells[0], lineno)
                if last_t is not None and t <= last_t:
                    raise ParseError("sample index must increase", lineno)
                last_t = t
            values.append(_parse_float(cells[-1], lineno))
    if header is None:
        raise ParseError("missing header")
    if not values:
        raise ParseError("series has no samples")
    return Series(np.array(values), period)


def save_series(series, path, index=True):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# fs={format(1.0 / series.sampling_period, '.15g')}\n")
        fh.write("t,value\n" if index else "value\n")
        for t, v in enumerate(series.values):
            fh.write(f"{t},{_fmt(v)}\n" if index else f"{_fmt(v)}\n")


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def model_to_dict(model):
    b = model.basis
    return {
        "version": MODEL_VERSION,
        "n_states": model.n_states,
        "pi": [float(x) for x in model.pi],
        "trans": [[float(x) for x in row] for row in model.trans],
        "topology_mask": [[bool(x) for x in row] for row in model.topology_mask],
        "durations": [d.to_dict() for d in model.durations],
        "emissions": [{"weights": [float(w) for w in e.weights], "precision": e.precision,
                       "order": e.order} for e in model.emissions],
        "basis": {"family": b.family, "max_order": b.max_order, "orders": list(model.orders),
                  "scale": b.scale, "time_convention": b.time_convention},
        "sampling_period": model.sampling_period,
    }


def model_from_dict(doc):
    """Rebuild and validate a model from its JSON document."""
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
    try:
        n = int(doc["n_states"])
        bdoc = doc["basis"]
        basis = BasisConfig(bdoc["family"], bdoc["max_order"], bdoc["scale"], bdoc["time_convention"])
        emissions = []
        for i, e in enumerate(doc["emissions"]):
            em = EmissionParams(e["weights"], e["precision"])
            if "order" in e and int(e["order"]) != em.order:
                raise ModelFormatError(f"state {i + 1}: order does not match weight count")
            emissions.append(em)
        orders = bdoc.get("orders")
        if orders is not None and list(orders) != [e.order for e in emissions]:
            raise ModelFormatError("basis orders do not match emission weights")
        model = Model(doc["pi"], doc["trans"], doc["topology_mask"],
                      [duration_from_dict(d) for d in doc["durations"]], emissions,
                      basis, doc.get("sampling_period", DEFAULT_SAMPLING_PERIOD))
    except (KeyError, TypeError) as err:
        raise ModelFormatError(f"malformed model document: {err!r}") from None
    except DomainError as err:
        raise ModelFormatError(str(err)) from None
    if model.n_states != n:
        raise ModelFormatError(f"n_states={n} but arrays describe {model.n_states} states")
    report = validate(model)
    if not report.ok:
        raise ModelFormatError(f"model violates invariants: {report}")
    return model


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as err:
        raise ModelFormatError(f"{path}: not valid JSON ({err})") from None
    return model_from_dict(doc)


# ---------------------------------------------------------------------------
# segmentations, tracks, detections, traces
# ---------------------------------------------------------------------------

def save_segmentation(segmentation, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(segmentation.to_list(), fh, indent=2)
        fh.write("\n")


def load_segmentation(path):
    with open(path, encoding="utf-8") as fh:
        items = json.load(fh)
    try:
        return Segmentation.from_list(items)
    except (KeyError, TypeError, ValueError) as err:
        raise DataError(f"malformed segmentation: {err!r}") from None


def write_track(track, fh):
    fh.write("window_start,loglik\n")
    for start, s in zip(track.starts, track.scores):
        fh.write(f"{int(start)},{_fmt(s)}\n")


def save_track(track, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_track(track, fh)


def load_track(path):
    starts, scores = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ["window_start", "loglik"]:
            raise ParseError("expected header 'window_start,loglik'", 1)
        for row in reader:
            starts.append(int(row[0]))
            scores.append(float(row[1]))
    return np.array(starts), np.array(scores)


def detections_to_list(detections, track):
    return [{"window": d.index, "window_start": int(1 + d.index * track.stride),
             "score": d.score, "peak": d.peak} for d in detections]


def save_detections(detections, track, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(detections_to_list(detections, track), fh, indent=2)
        fh.write("\n")


def save_trace(trace, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("iteration,loglik,millis\n")
        for k, ll, ms in trace.rows():
            fh.write(f"{k},{_fmt(ll)},{ms:.3f}\n")
