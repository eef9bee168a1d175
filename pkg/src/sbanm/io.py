"""Network construction from raw data, normalization transforms, layer
aggregation, and bit-exact file I/O.

File formats
------------
Network (TSV, UTF-8): header line ``#sbanm-net v1 n=<n> K=<K>``, then
exactly n(n-1)/2 lines ``i<TAB>j<TAB>w1<TAB>...<TAB>wK`` with 0-based
i < j in lexicographic pair order; floats printed with 17 significant
digits so write(read(f)) reproduces f byte for byte.

Responses (CSV): header ``subject,<layer>:<item>,...``; cells in {1,0,NA}.

Memberships (CSV): header ``node,block,tau_0,...,tau_{Q-1}``.

Parameters (JSON): keys Q, K, alpha, psi, noise_block,
blocks[{mu,var,rho}], noise{mu,var}, elbo, icl, seed.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass
from io import StringIO

import numpy as np

from .errors import DataError
from .model import BlockParams, ModelParams, MultilayerNetwork, NoiseParams, num_pairs

_R_CLAMP = 1e-7   # keeps agreement ratios inside atanh's domain
_P_CLAMP = 1e-12  # keeps strength ratios inside logit's domain

_NET_HEADER = re.compile(r"^#sbanm-net v1 n=(\d+) K=(\d+)$")


@dataclass
class ResponseMatrix:
    """Survey responses: per layer an (n_subjects, U_k) block of answers.

    Answers are stored as floats: 1.0 = yes, 0.0 = no, NaN = missing.
    """

    n_subjects: int
    layers: list[tuple[str, np.ndarray]]
    subjects: list[str] | None = None

    def __post_init__(self):
        if self.n_subjects < 2:
            raise DataError("need at least 2 subjects")
        checked = []
        for name, block in self.layers:
            block = np.asarray(block, dtype=float)
            if block.ndim != 2 or block.shape[0] != self.n_subjects:
                raise DataError(f"layer {name!r} has wrong shape")
            if block.shape[1] < 1:
                raise DataError("layer has no items")
            valid = np.isnan(block) | (block == 0.0) | (block == 1.0)
            if not valid.all():
                raise DataError(f"layer {name!r} has entries outside {{1,0,NA}}")
            checked.append((name, block))
        self.layers = checked


def fisher(r: float) -> float:
    """Fisher transform atanh(r) = 0.5*log((1+r)/(1-r)) for |r| < 1."""
    if not abs(r) < 1.0:
        raise ValueError("fisher transform requires |r| < 1")
    return math.atanh(r)


def build_similarity_network(responses: ResponseMatrix) -> MultilayerNetwork:
    """Agreement-ratio similarity network, one layer per response block.

    For each pair and item: +1 if both answered yes, -1 if both no,
    0 otherwise (missing counts as 0).  The per-layer mean agreement ratio
    is clamped away from +-1 and Fisher-transformed into the edge weight.
    """
    n = responses.n_subjects
    iu, ju = np.triu_indices(n, 1)
    cols = []
    for _, block in responses.layers:
        U = block.shape[1]
        yes = np.where(np.nan_to_num(block, nan=0.0) == 1.0, 1.0, 0.0)
        no = np.where(np.nan_to_num(block, nan=-1.0) == 0.0, 1.0, 0.0)
        h_sum = yes @ yes.T - no @ no.T
        r = h_sum[iu, ju] / U
        r = np.clip(r, -1.0 + _R_CLAMP, 1.0 - _R_CLAMP)
        cols.append(np.arctanh(r))
    return MultilayerNetwork(
        n=n,
        K=len(cols),
        weights=np.column_stack(cols),
        node_labels=list(responses.subjects) if responses.subjects else None,
    )


def normalize_logit(net: MultilayerNetwork) -> MultilayerNetwork:
    """Strength-normalize nonnegative count weights and logit-transform.

    Each weight is divided by its layer's total weight, clamped into
    (0, 1), and mapped through log(p/(1-p)).
    """
    w = net.weights
    if np.any(w < 0):
        raise ValueError("strength normalization requires nonnegative weights")
    sums = w.sum(axis=0)
    if np.any(sums <= 0):
        raise DataError("layer has no trips")
    p = np.clip(w / sums, _P_CLAMP, 1.0 - _P_CLAMP)
    return MultilayerNetwork(
        n=net.n, K=net.K, weights=np.log(p / (1.0 - p)), node_labels=net.node_labels
    )


def sum_layers(net: MultilayerNetwork) -> MultilayerNetwork:
    """Entrywise sum across layers; returns a single-layer network."""
    return MultilayerNetwork(
        n=net.n,
        K=1,
        weights=net.weights.sum(axis=1, keepdims=True),
        node_labels=net.node_labels,
    )


def _atomic_write(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_network(net: MultilayerNetwork, path: str) -> None:
    """Serialize a network in canonical form (atomic write)."""
    iu, ju = net.pair_nodes()
    lines = [f"#sbanm-net v1 n={net.n} K={net.K}"]
    for p in range(net.n_pairs):
        vals = "\t".join(_fmt(v) for v in net.weights[p])
        lines.append(f"{iu[p]}\t{ju[p]}\t{vals}")
    _atomic_write(path, "\n".join(lines) + "\n")


def read_network(path: str) -> MultilayerNetwork:
    """Parse a canonical network file; errors name the offending line."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        m = _NET_HEADER.match(header)
        if not m:
            raise DataError(f"{path}:1: malformed header {header!r}")
        n, K = int(m.group(1)), int(m.group(2))
        if n < 2 or K < 1:
            raise DataError(f"{path}:1: invalid dimensions n={n}, K={K}")
        weights = np.empty((num_pairs(n), K), dtype=float)
        p = 0
        expect_i, expect_j = 0, 1
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line:
                raise DataError(f"{path}:{lineno}: unexpected blank line")
            parts = line.split("\t")
            if len(parts) != 2 + K:
                raise DataError(f"{path}:{lineno}: expected {2 + K} fields")
            if p >= num_pairs(n):
                raise DataError(f"{path}:{lineno}: more pairs than n(n-1)/2")
            try:
                i, j = int(parts[0]), int(parts[1])
                vals = [float(v) for v in parts[2:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if (i, j) != (expect_i, expect_j):
                raise DataError(
                    f"{path}:{lineno}: incomplete dense pair list "
                    f"(expected pair {expect_i},{expect_j}, got {i},{j})"
                )
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{lineno}: non-finite weight")
            weights[p] = vals
            p += 1
            expect_j += 1
            if expect_j == n:
                expect_i += 1
                expect_j = expect_i + 1
        if p != num_pairs(n):
            raise DataError(f"{path}: incomplete dense pair list ({p} of {num_pairs(n)} pairs)")
    return MultilayerNetwork(n=n, K=K, weights=weights)


def read_responses(path: str) -> ResponseMatrix:
    """Parse a response CSV into per-layer answer blocks.

    Layers are taken from the ``<layer>:<item>`` column headers in order of
    first appearance.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}:1: empty file") from None
        if not header or header[0] != "subject":
            raise DataError(f"{path}:1: first column must be 'subject'")
        layer_cols: dict[str, list[int]] = {}
        for c, name in enumerate(header[1:], start=1):
            if ":" not in name:
                raise DataError(f"{path}:1: column {name!r} is not '<layer>:<item>'")
            layer = name.split(":", 1)[0]
            layer_cols.setdefault(layer, []).append(c)
        subjects = []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells")
            subjects.append(row[0])
            vals = []
            for cell in row[1:]:
                cell = cell.strip()
                if cell == "1":
                    vals.append(1.0)
                elif cell == "0":
                    vals.append(0.0)
                elif cell == "NA":
                    vals.append(math.nan)
                else:
                    raise DataError(f"{path}:{lineno}: cell {cell!r} not in {{1,0,NA}}")
            rows.append(vals)
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 subjects")
    data = np.asarray(rows, dtype=float)
    layers = [(name, data[:, np.asarray(cols) - 1]) for name, cols in layer_cols.items()]
    return ResponseMatrix(n_subjects=len(rows), layers=layers, subjects=subjects)


def write_memberships(
    path: str,
    hard: np.ndarray,
    tau: np.ndarray,
    node_labels: list[str] | None = None,
) -> None:
    hard = np.asarray(hard, dtype=int)
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    n, Q = tau.shape
    if hard.shape != (n,):
        raise DataError("hard labels and tau disagree on n")
    names = node_labels if node_labels is not None else [str(i) for i in range(n)]
    buf = StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["node", "block"] + [f"tau_{q}" for q in range(Q)])
    for i in range(n):
        writer.writerow([names[i], hard[i]] + [_fmt(v) for v in tau[i]])
    _atomic_write(path, buf.getvalue())


def read_memberships(path: str) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Returns (node names, hard labels, tau matrix)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}:1: empty file") from None
        if len(header) < 3 or header[:2] != ["node", "block"]:
            raise DataError(f"{path}:1: malformed membership header")
        Q = len(header) - 2
        names, hard, tau = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells")
            names.append(row[0])
            try:
                hard.append(int(row[1]))
                tau.append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return names, np.asarray(hard, dtype=int), np.asarray(tau, dtype=float).reshape(-1, Q)


def write_params(
    path: str,
    params: ModelParams,
    elbo: float | None = None,
    icl: float | None = None,
    seed: int | None = None,
) -> None:
    doc = {
        "Q": params.Q,
        "K": params.K,
        "alpha": params.alpha.tolist(),
        "psi": params.psi,
        "noise_block": params.noise_block,
        "blocks": [
            {"mu": b.mu.tolist(), "var": b.var.tolist(), "rho": b.rho}
            for b in params.blocks
        ],
        "noise": {"mu": params.noise.mu.tolist(), "var": params.noise.var.tolist()},
        "elbo": elbo,
        "icl": icl,
        "seed": seed,
    }
    _atomic_write(path, json.dumps(doc, indent=2) + "\n")


def read_params(path: str) -> tuple[ModelParams, dict]:
    """Returns (ModelParams, extras) where extras holds elbo/icl/seed."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from exc
    try:
        params = ModelParams(
            Q=int(doc["Q"]),
            blocks=[
                BlockParams(mu=b["mu"], var=b["var"], rho=b["rho"])
                for b in doc["blocks"]
            ],
            noise=NoiseParams(mu=doc["noise"]["mu"], var=doc["noise"]["var"]),
            alpha=doc["alpha"],
            psi=float(doc["psi"]),
            noise_block=doc["noise_block"],
        )
    except KeyError as exc:
        raise DataError(f"{path}: missing key {exc}") from exc
    if params.K != int(doc["K"]):
        raise DataError(f"{path}: K does not match block dimensions")
    extras = {"elbo": doc.get("elbo"), "icl": doc.get("icl"), "seed": doc.get("seed")}
    return params, extras
