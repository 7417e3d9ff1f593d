"""JSON encodings shared by the CLI and the instance corpus.

Conventions: a complex scalar is a two-element array [re, im]; a matrix is an
array of row arrays; a rational is {"num": int, "den": positive int}.  Schema
violations carry a JSON-pointer-style path to the offending element."""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction

import numpy as np

from .linalg import Flag, HermitianMetric, WeightVector
from .pairs import RepPair, WeightedPair
from .surface import Presentation

SCHEMA_VERSION = 1

INSTANCE_FIELDS = {
    "schema_version",
    "genus",
    "punctures",
    "rank",
    "images",
    "flags",
    "weights",
    "solver",
}
SOLVER_FIELDS = {"tol", "max_steps", "eta", "seed", "initial_metric"}


class InstanceError(ValueError):
    def __init__(self, message: str, path: str = "$"):
        self.path = path
        super().__init__(f"{path}: {message}")


def encode_complex(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def decode_complex(obj, path: str = "$") -> complex:
    if (
        not isinstance(obj, (list, tuple))
        or len(obj) != 2
        or not all(isinstance(x, (int, float)) for x in obj)
    ):
        raise InstanceError("complex scalar must be a two-element [re, im] array", path)
    return complex(obj[0], obj[1])


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[encode_complex(z) for z in row] for row in m]


def decode_matrix(obj, path: str = "$") -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise InstanceError("matrix must be a nonempty array of row arrays", path)
    width = len(obj[0])
    rows = []
    for i, row in enumerate(obj):
        if len(row) != width:
            raise InstanceError("matrix rows have unequal lengths", f"{path}[{i}]")
        rows.append([decode_complex(z, f"{path}[{i}][{j}]") for j, z in enumerate(row)])
    return np.array(rows, dtype=complex)


def encode_rational(q: Fraction) -> dict:
    q = Fraction(q)
    return {"num": q.numerator, "den": q.denominator}


def decode_rational(obj, path: str = "$") -> Fraction:
    if not isinstance(obj, dict) or set(obj) != {"num", "den"}:
        raise InstanceError('rational must be {"num": int, "den": positive int}', path)
    num, den = obj["num"], obj["den"]
    if not isinstance(num, int) or not isinstance(den, int) or den <= 0:
        raise InstanceError("rational needs integer num and positive integer den", path)
    return Fraction(num, den)


def encode_instance(pair: RepPair, weights=None, solver: dict | None = None) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "genus": pair.presentation.genus,
        "punctures": pair.presentation.punctures,
        "rank": pair.rank,
        "images": {n: encode_matrix(m) for n, m in pair.images.items()},
        "flags": [[encode_matrix(b) for b in f.subspaces] for f in pair.flags],
    }
    if weights is not None:
        out["weights"] = [[encode_rational(x) for x in w.weights] for w in weights]
    if solver is not None:
        out["solver"] = dict(solver)
    return out


def decode_instance(obj):
    """Parse an instance document into (RepPair, weights-or-None, solver dict)."""
    if not isinstance(obj, dict):
        raise InstanceError("instance document must be a JSON object")
    unknown = set(obj) - INSTANCE_FIELDS
    if unknown:
        raise InstanceError(f"unknown fields {sorted(unknown)}", "$")
    for key in ("schema_version", "genus", "punctures", "rank", "images", "flags"):
        if key not in obj:
            raise InstanceError(f"missing required field {key!r}", "$")
    if obj["schema_version"] != SCHEMA_VERSION:
        raise InstanceError(
            f"unsupported schema_version {obj['schema_version']}", "$.schema_version"
        )
    for key in ("genus", "punctures", "rank"):
        if not isinstance(obj[key], int) or obj[key] < 0:
            raise InstanceError("must be a non-negative integer", f"$.{key}")
    presentation = Presentation(obj["genus"], obj["punctures"])
    r = obj["rank"]

    if not isinstance(obj["images"], dict):
        raise InstanceError("images must map generator names to matrices", "$.images")
    names = presentation.generator_names()
    images = {}
    for n in names:
        if n not in obj["images"]:
            raise InstanceError(f"missing image for generator {n!r}", "$.images")
        images[n] = decode_matrix(obj["images"][n], f"$.images.{n}")
        if images[n].shape != (r, r):
            raise InstanceError(f"image must be {r} x {r}", f"$.images.{n}")
    unknown_gens = set(obj["images"]) - set(names)
    if unknown_gens:
        raise InstanceError(f"unknown generators {sorted(unknown_gens)}", "$.images")

    if not isinstance(obj["flags"], list) or len(obj["flags"]) != presentation.punctures:
        raise InstanceError(
            f"flags must be a list with one entry per puncture ({presentation.punctures})",
            "$.flags",
        )
    flags = []
    for i, levels in enumerate(obj["flags"]):
        if not isinstance(levels, list):
            raise InstanceError("flag must be a list of level bases", f"$.flags[{i}]")
        bases = [decode_matrix(b, f"$.flags[{i}][{l}]") for l, b in enumerate(levels)]
        try:
            flags.append(Flag(r, bases))
        except ValueError as exc:
            raise InstanceError(str(exc), f"$.flags[{i}]") from exc

    try:
        pair = RepPair(presentation, images, flags)
    except ValueError as exc:
        raise InstanceError(str(exc), "$") from exc

    weights = None
    if "weights" in obj:
        weights = decode_weights(obj["weights"], pair, path="$.weights")

    solver = obj.get("solver", {})
    if not isinstance(solver, dict):
        raise InstanceError("solver options must be an object", "$.solver")
    unknown_solver = set(solver) - SOLVER_FIELDS
    if unknown_solver:
        raise InstanceError(f"unknown solver fields {sorted(unknown_solver)}", "$.solver")
    return pair, weights, solver


def decode_weights(obj, pair: RepPair, path: str = "$.weights"):
    if not isinstance(obj, list) or len(obj) != pair.presentation.punctures:
        raise InstanceError("need one weight vector per puncture", path)
    out = []
    for i, entries in enumerate(obj):
        if not isinstance(entries, list):
            raise InstanceError("weight vector must be a list of rationals", f"{path}[{i}]")
        vals = tuple(decode_rational(x, f"{path}[{i}][{k}]") for k, x in enumerate(entries))
        try:
            out.append(WeightVector(vals))
        except ValueError as exc:
            raise InstanceError(str(exc), f"{path}[{i}]") from exc
        if len(vals) != pair.flags[i].levels + 1:
            raise InstanceError(
                f"weight count {len(vals)} != flag level count {pair.flags[i].levels + 1}",
                f"{path}[{i}]",
            )
    return out


def weighted_pair_from(obj):
    pair, weights, solver = decode_instance(obj)
    if weights is None:
        raise InstanceError("this operation needs a weight system", "$.weights")
    return WeightedPair(pair, weights), solver


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    return hashlib.sha256(canonical_dumps(obj).encode()).hexdigest()


def encode_metric(h: HermitianMetric) -> list:
    return encode_matrix(h.gram)


def encode_residue_data(data) -> dict:
    return {
        "blocks": [
            {
                "eigenvalue": encode_complex(b.eigenvalue),
                "log": encode_complex(b.log_choice),
                "dim": b.dim,
                "nilpotent": encode_matrix(b.nilpotent),
                "basis": encode_matrix(b.basis),
            }
            for b in data.blocks
        ],
        "residue": encode_matrix(data.residue_matrix),
        "normalized": data.normalized,
    }
