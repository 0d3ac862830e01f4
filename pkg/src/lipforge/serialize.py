"""Canonical JSON helpers.

All real numbers are encoded as C99 hex-float strings so that
serialize -> parse -> evaluate round-trips are bit-exact, and all
documents are dumped with sorted keys and fixed separators so that
identical inputs produce byte-identical files.
"""

import json
import math

import numpy as np


def enc_float(v) -> str:
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        raise ValueError("non-finite value cannot be serialized: %r" % v)
    return v.hex()


def dec_float(s) -> float:
    if isinstance(s, (int, float)):
        return float(s)
    return float.fromhex(s)


def enc_vec(v):
    return [enc_float(x) for x in np.asarray(v, dtype=float).ravel()]


def dec_vec(lst):
    return np.array([dec_float(x) for x in lst], dtype=float)


def enc_mat(m):
    m = np.asarray(m, dtype=float)
    return [[enc_float(x) for x in row] for row in m]


def dec_mat(rows):
    return np.array([[dec_float(x) for x in row] for row in rows], dtype=float)


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def loads(text):
    return json.loads(text)


def dump_path(doc, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(doc))
        fh.write("\n")


def load_path(path):
    with open(path) as fh:
        return json.load(fh)
