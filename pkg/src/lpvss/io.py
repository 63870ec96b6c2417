"""Reading and writing model specification files (JSON).

Layout::

    {
      "dims": {"nx": 2, "nu": 1, "ny": 2, "np": 1},
      "basis": [{"kind": "identity", "params": {"component": 0}, "bound": 1.0}],
      "matrices": {
        "A": {"M0": [[...]], "terms": [{"i": 1, "M": [[...]]}]},
        ...  "B", "C", "D", "G", "H"
      },
      "noise": {"Q": [[...]], "S": [[...]], "R": [[...]]},
      "scheduling_set": {"min": [-1.0], "max": [1.0]}
    }

Basis kinds are ``identity`` (``component``), ``monomial`` (``component``,
``degree``) and ``constant`` (``value``); ``i`` in a term is the 1-based
position in ``basis``. Floats are written with ``repr`` so they survive a
round trip exactly; ``NaN`` and ``Infinity`` are rejected on read.
"""
from __future__ import annotations

import json

import numpy as np

from .core import (AffineMatrixFunction, LpvSsModel, ModelError, NoiseSpec,
                   SchedulingSet, constant_basis, identity_basis, monomial_basis)

__all__ = ["model_from_dict", "model_to_dict", "load_model", "save_model", "loads_strict"]

_NAMES = ("A", "B", "C", "D", "G", "H")


def _reject(token):
    raise ModelError(f"non-finite number {token!r} in model file")


def loads_strict(text):
    """``json.loads`` that refuses ``NaN``/``Infinity`` literals."""
    return json.loads(text, parse_constant=_reject)


def _matrix(value, name, shape=None):
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ModelError(f"{name}: not a numeric matrix") from None
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(1, -1) if shape is None or shape[0] == 1 else M.reshape(-1, 1)
    if M.ndim != 2:
        raise ModelError(f"{name}: expected a 2-D matrix")
    if not np.all(np.isfinite(M)):
        raise ModelError(f"{name}: non-finite entry")
    if shape is not None and M.size == 0 and 0 in shape:
        M = np.zeros(shape)
    if shape is not None and M.shape != shape:
        raise ModelError(f"{name}: shape {M.shape}, expected {shape}")
    return M


def _basis(entry, index):
    kind = entry.get("kind")
    params = entry.get("params", {})
    bound = entry.get("bound")
    if kind == "identity":
        return identity_basis(index, int(params.get("component", 0)), bound)
    if kind == "monomial":
        return monomial_basis(index, int(params.get("component", 0)),
                              int(params.get("degree", 1)), bound)
    if kind == "constant":
        return constant_basis(index, float(params["value"]), bound)
    raise ModelError(f"basis {index}: unknown kind {kind!r}")


def model_from_dict(d):
    """Build an :class:`LpvSsModel` from the parsed JSON layout."""
    try:
        dims = d["dims"]
        nx, nu, ny = int(dims["nx"]), int(dims["nu"]), int(dims["ny"])
        n_p = int(dims.get("np", len(d["scheduling_set"]["min"])))
        shapes = {"A": (nx, nx), "B": (nx, nu), "C": (ny, nx), "D": (ny, nu),
                  "G": (nx, nx), "H": (ny, ny)}
        basis = [_basis(b, k + 1) for k, b in enumerate(d.get("basis", []))]
        fns = {}
        for name in _NAMES:
            spec = d["matrices"][name]
            M0 = _matrix(spec["M0"], f"{name}.M0", shapes[name])
            terms = []
            for term in spec.get("terms", []):
                i = int(term["i"])
                if not 1 <= i <= len(basis):
                    raise ModelError(f"{name}: basis index {i} out of range")
                terms.append((i, _matrix(term["M"], f"{name}.M{i}", shapes[name])))
            fns[name] = AffineMatrixFunction(M0, tuple(terms))
        n = d["noise"]
        noise = NoiseSpec(_matrix(n["Q"], "Q", (nx, nx)), _matrix(n["S"], "S", (nx, ny)),
                          _matrix(n["R"], "R", (ny, ny)))
        box = SchedulingSet(d["scheduling_set"]["min"], d["scheduling_set"]["max"])
    except KeyError as exc:
        raise ModelError(f"model file missing field {exc}") from None
    if box.n_p != n_p:
        raise ModelError(f"scheduling set has {box.n_p} axes, dims say {n_p}")
    return LpvSsModel(*(fns[n] for n in _NAMES), noise, basis, box)


def _list(M):
    return [[float(v) for v in row] for row in np.asarray(M)]


def model_to_dict(model):
    nx, nu, ny, n_p = model.dims
    basis = []
    for b in model.basis:
        entry = {"kind": b.kind, "params": dict(b.params)}
        if b.bound is not None:
            entry["bound"] = b.bound
        basis.append(entry)
    pos = {b.index: k + 1 for k, b in enumerate(model.basis)}
    mats = {}
    for name in _NAMES:
        fn = getattr(model, name)
        mats[name] = {"M0": _list(fn.M0),
                      "terms": [{"i": pos[i], "M": _list(Mi)} for i, Mi in fn.terms]}
    n = model.noise
    return {
        "dims": {"nx": nx, "nu": nu, "ny": ny, "np": n_p},
        "basis": basis,
        "matrices": mats,
        "noise": {"Q": _list(n.Q), "S": _list(n.S), "R": _list(n.R)},
        "scheduling_set": {"min": [float(v) for v in model.scheduling_set.lo],
                           "max": [float(v) for v in model.scheduling_set.hi]},
    }


def load_model(path):
    with open(path) as fh:
        return model_from_dict(loads_strict(fh.read()))


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")
