"""JSON encoding of datasets, fits and packings.

Floats are written with Python's shortest round-trip representation, so a
save/load cycle reproduces every value bit for bit.
"""

import json

import numpy as np

from .datagen import BoundedBernstein, Dataset, Gaussian, GroundTruth
from .errors import InvalidInputError
from .sampling import Column, Dense, Point, SamplingOperator
from .solver import FitResult

__all__ = [
    "dataset_to_dict",
    "dataset_from_dict",
    "save_dataset",
    "load_dataset",
    "fit_to_dict",
    "fit_from_dict",
    "write_json",
    "read_json",
]


def _mask_to_dict(mask):
    if isinstance(mask, Point):
        return {"type": "point", "row": mask.row, "col": mask.col}
    if isinstance(mask, Column):
        return {"type": "column", "task": mask.task, "x": list(mask.x)}
    return {"type": "dense", "data": np.asarray(mask.data).tolist()}


def _mask_from_dict(d):
    kind = d.get("type") if isinstance(d, dict) else None
    try:
        if kind == "point":
            return Point(int(d["row"]), int(d["col"]))
        if kind == "column":
            return Column(int(d["task"]), tuple(float(v) for v in d["x"]))
        if kind == "dense":
            return Dense(np.asarray(d["data"], dtype=np.float64))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed {kind} mask: {exc}") from exc
    raise InvalidInputError(f"unknown mask type {kind!r}")


def dataset_to_dict(data):
    noise = data.noise
    out = {
        "m": data.m,
        "T": data.t,
        "N": data.n,
        "scenario": data.scenario,
        "seed": data.seed,
        "sigma": data.sigma,
        "noise": None if noise is None else noise.kind,
        "H": getattr(noise, "h", None),
        "n_per_task": data.n_per_task,
        "masks": [_mask_to_dict(k) for k in data.op.masks],
        "y": data.y.tolist(),
        "a_star": None,
        "r": None,
    }
    if data.truth is not None:
        out["a_star"] = data.truth.a_star.tolist()
        out["r"] = data.truth.r
        out["spectral_scale"] = data.truth.spectral_scale
    return out


def _require(d, keys):
    if not isinstance(d, dict):
        raise InvalidInputError("dataset JSON must be an object")
    missing = [k for k in keys if k not in d]
    if missing:
        raise InvalidInputError(f"dataset JSON lacks {', '.join(missing)}")


def dataset_from_dict(d):
    _require(d, ("m", "T", "N", "masks", "y"))
    try:
        m, t, n = int(d["m"]), int(d["T"]), int(d["N"])
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"m, T and N must be integers: {exc}") from exc
    if not isinstance(d["masks"], list) or len(d["masks"]) != n:
        raise InvalidInputError(f"expected {n} masks")
    if not isinstance(d["y"], list) or len(d["y"]) != n:
        raise InvalidInputError(f"expected {n} responses")
    op = SamplingOperator.from_masks(m, t, [_mask_from_dict(k) for k in d["masks"]])
    truth = None
    if d.get("a_star") is not None:
        a_star = np.asarray(d["a_star"], dtype=np.float64)
        if a_star.shape != (m, t):
            raise InvalidInputError(f"a_star must be {m}x{t}")
        r = d.get("r")
        truth = GroundTruth(a_star, int(r) if r is not None else int(np.linalg.matrix_rank(a_star)),
                            float(d.get("spectral_scale", 1.0)))
    noise = None
    kind, sigma = d.get("noise"), d.get("sigma")
    if kind == "gaussian":
        noise = Gaussian(float(sigma))
    elif kind == "bernstein":
        noise = BoundedBernstein(float(sigma), float(d.get("H")))
    elif kind is not None:
        raise InvalidInputError(f"unknown noise kind {kind!r}")
    npt = d.get("n_per_task")
    return Dataset(op, np.asarray(d["y"], dtype=np.float64), truth, noise,
                   int(d.get("seed", 0)), str(d.get("scenario", "custom")),
                   None if npt is None else int(npt))


def fit_to_dict(result):
    return result.to_dict()


def fit_from_dict(d):
    try:
        return FitResult(np.asarray(d["a_hat"], dtype=np.float64), float(d["objective"]),
                         int(d["iterations"]), bool(d["converged"]), float(d["lambda_used"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed fit JSON: {exc}") from exc


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, allow_nan=False)
        fh.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path} is not valid JSON: {exc}") from exc


def save_dataset(data, path):
    write_json(dataset_to_dict(data), path)


def load_dataset(path):
    return dataset_from_dict(read_json(path))
