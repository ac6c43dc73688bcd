"""Dataset (CSV) and model (JSON tree) persistence.

Dataset files look like::

    # roles: input,input,time | response,response
    x,xdot,time,x_next,xdot_next
    3,0,0,2.9987...,-0.0412...

Reals are written with 17 significant digits so doubles round-trip exactly.

Model files are a JSON object with a format tag, a ``major.minor`` version,
a SHA-256 checksum of the canonical body, and the body itself.  Covariances
are stored as row-major upper triangles.
"""
import csv
import hashlib
import io
import json
import math

import numpy as np

from .dataset import INPUT_ROLES, Dataset
from .errors import ModelFileError, ParseError, SchemaError
from .features import LAMBDA_FLOOR
from .segmentation import Segment, SegmentedModel
from .trainer import BatchModel, HyperParams, LocalModel

ROLES_PREFIX = "# roles:"
MODEL_FORMAT = "batch-hblr-model"
MODEL_VERSION = (1, 0)


def format_real(v):
    return "%.17g" % v


def dataset_to_text(data):
    buf = io.StringIO()
    buf.write(f"{ROLES_PREFIX} {','.join(data.input_roles)} | "
              f"{','.join(['response'] * data.response_dim)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(data.input_names + data.response_names)
    for row in np.hstack([data.inputs, data.responses]):
        writer.writerow([format_real(v) for v in row])
    return buf.getvalue()


def write_dataset(path, data):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dataset_to_text(data))


def _parse_roles(line):
    if not line.startswith(ROLES_PREFIX):
        raise SchemaError("missing '# roles:' schema line")
    body = line[len(ROLES_PREFIX):].strip()
    if body.count("|") != 1:
        raise SchemaError("roles line must separate inputs and responses with one '|'")
    left, right = (part.strip() for part in body.split("|"))
    in_roles = [r.strip() for r in left.split(",")] if left else []
    out_roles = [r.strip() for r in right.split(",")] if right else []
    for r in in_roles:
        if r not in INPUT_ROLES:
            raise SchemaError(f"unknown input role {r!r}")
    if not out_roles or any(r != "response" for r in out_roles):
        raise SchemaError("right side of the roles line must list only 'response' roles")
    return in_roles, len(out_roles)


def dataset_from_text(text):
    lines = text.splitlines()
    if not lines:
        raise SchemaError("empty dataset file")
    in_roles, q = _parse_roles(lines[0])
    rows = list(csv.reader(lines[1:]))
    if not rows:
        raise SchemaError("missing header row")
    header = rows[0]
    width = len(in_roles) + q
    if len(header) != width:
        raise SchemaError(f"header has {len(header)} columns but roles cover {width}")
    values = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:]):
        lineno = i + 3
        if len(row) != width:
            raise ParseError(f"expected {width} cells, found {len(row)}", row=lineno)
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"cannot parse {cell!r} as a real", row=lineno,
                                 column=j + 1) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell!r}", row=lineno, column=j + 1)
            values[i, j] = v
    d = len(in_roles)
    return Dataset(values[:, :d], values[:, d:], header[:d], header[d:], in_roles)


def read_dataset(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return dataset_from_text(fh.read())


def _upper(a):
    return a[np.triu_indices(a.shape[0])].tolist()


def _from_upper(vals, P):
    out = np.zeros((P, P))
    iu = np.triu_indices(P)
    if len(vals) != len(iu[0]):
        raise ModelFileError(f"covariance triangle has {len(vals)} entries, expected {len(iu[0])}")
    out[iu] = vals
    return out + np.triu(out, 1).T


def _local_to_tree(m):
    return {
        "center": m.center.tolist(),
        "scale": m.scale.tolist(),
        "alpha_hat": m.alpha_hat.tolist(),
        "beta_f_hat": float(m.beta_f_hat),
        "mean": m.mean.tolist(),
        "covariance_upper": _upper(m.covariance),
        "active_mask": [bool(b) for b in m.active_mask],
    }


def _vector(tree, key, n):
    v = np.asarray(tree[key], dtype=float)
    if v.shape != (n,) or not np.all(np.isfinite(v)):
        raise ModelFileError(f"{key!r} must be {n} finite reals")
    return v


def _local_from_tree(tree, d):
    P = d + 1
    center = _vector(tree, "center", d)
    scale = _vector(tree, "scale", d)
    alpha = _vector(tree, "alpha_hat", P)
    mean = _vector(tree, "mean", P)
    mask = np.asarray(tree["active_mask"], dtype=bool)
    if mask.shape != (P,):
        raise ModelFileError(f"active_mask must have {P} entries")
    beta = float(tree["beta_f_hat"])
    if np.any(scale < LAMBDA_FLOOR):
        raise ModelFileError("length scale below the floor")
    if not (beta > 0 and math.isfinite(beta)) or np.any(alpha <= 0):
        raise ModelFileError("precisions must be positive")
    if np.any(mean[~mask] != 0):
        raise ModelFileError("pruned weights must be exactly zero")
    cov = _from_upper(tree["covariance_upper"], P)
    if not np.all(np.isfinite(cov)):
        raise ModelFileError("non-finite covariance")
    return LocalModel(center, scale, mean, cov, alpha, beta, mask)


def model_body(seg_model):
    return {
        "hyperparams": {k: getattr(seg_model.params, k) for k in HyperParams.field_names()},
        "input_names": list(seg_model.input_names or []),
        "input_roles": list(seg_model.input_roles or []),
        "response_names": list(seg_model.response_names or []),
        "segments": [
            {
                "rows": [seg.start, seg.stop],
                "input_scaling": seg.input_scaling,
                "lower": seg.lower.tolist(),
                "upper": seg.upper.tolist(),
                "responses": [
                    {
                        "training_nmse_trace": list(b.training_nmse_trace),
                        "iterations_used": b.iterations_used,
                        "local_models": [_local_to_tree(m) for m in b.models],
                    }
                    for b in batches
                ],
            }
            for seg, batches in zip(seg_model.segments, seg_model.batch_models)
        ],
    }


def _checksum(body):
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def model_to_text(seg_model):
    body = model_body(seg_model)
    doc = {
        "format": MODEL_FORMAT,
        "version": "%d.%d" % MODEL_VERSION,
        "checksum": _checksum(body),
        "body": body,
    }
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def save_model(path, seg_model):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_text(seg_model))


def model_from_text(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"model file is truncated or malformed: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFileError("not a batch-hblr model file")
    try:
        major, minor = (int(p) for p in str(doc["version"]).split("."))
    except (KeyError, ValueError):
        raise ModelFileError("missing or malformed version") from None
    if major != MODEL_VERSION[0]:
        raise ModelFileError(
            f"model file version {major}.{minor} is not supported "
            f"(this build reads {MODEL_VERSION[0]}.x)")
    body = doc.get("body")
    if not isinstance(body, dict) or _checksum(body) != doc.get("checksum"):
        raise ModelFileError("checksum mismatch; the model file is corrupted")
    try:
        return _model_from_body(body)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"invalid model structure: {exc}") from None


def _model_from_body(body):
    hp = body["hyperparams"]
    unknown = set(hp) - set(HyperParams.field_names())
    if unknown:
        raise ModelFileError(f"unknown hyperparameters {sorted(unknown)}")
    params = HyperParams(**hp)
    segments, batches = [], []
    for st in body["segments"]:
        lower = np.asarray(st["lower"], dtype=float)
        upper = np.asarray(st["upper"], dtype=float)
        d = lower.shape[0]
        if upper.shape != (d,) or np.any(upper < lower):
            raise ModelFileError("segment bounds are inconsistent")
        seg = Segment(int(st["rows"][0]), int(st["rows"][1]), lower, upper, st["input_scaling"])
        segments.append(seg)
        per = []
        for rt in st["responses"]:
            models = [_local_from_tree(m, d) for m in rt["local_models"]]
            per.append(BatchModel(models, d, list(rt["training_nmse_trace"]),
                                  int(rt["iterations_used"])))
        batches.append(per)
    if not segments:
        raise ModelFileError("model has no segments")
    q = len(batches[0])
    if any(len(b) != q for b in batches):
        raise ModelFileError("segments disagree on the number of responses")
    return SegmentedModel(segments, batches, params, body["input_names"],
                          body["response_names"], body["input_roles"])


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_text(fh.read())
