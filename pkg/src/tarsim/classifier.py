"""Scorers over the corpus: the L2 logistic regression baseline and a
client for external scorer plugins speaking the stdio wire protocol.

Both paths produce a full-corpus vector of relevance probabilities in
corpus document order; that vector is the interchange type consumed by
sampling and metrics.
"""

from __future__ import annotations

import json
import os
import select
import subprocess
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import optimize, sparse
from scipy.special import expit

# Probabilities are kept strictly inside (0, 1), one ulp from the endpoints,
# so downstream ranking keeps every bit of resolution the sigmoid produces.
_PROB_LO = float(np.nextafter(0.0, 1.0))
_PROB_HI = float(np.nextafter(1.0, 0.0))

GRADIENT_TOLERANCE = 1e-6


class TrainingError(RuntimeError):
    """Training preconditions violated or the optimizer failed to converge."""


@dataclass(frozen=True)
class LabeledExample:
    doc_id: str
    label: int
    iteration_acquired: int


class LabeledSet:
    """Ordered, append-only set of reviewed documents with binary labels."""

    def __init__(self, entries: Iterable[LabeledExample] = ()):
        self._entries: list[LabeledExample] = []
        self._ids: set[str] = set()
        for e in entries:
            self.add(e.doc_id, e.label, e.iteration_acquired)

    def add(self, doc_id: str, label: int, iteration_acquired: int) -> None:
        if label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {label!r}")
        if doc_id in self._ids:
            raise ValueError(f"document {doc_id!r} already labeled")
        self._entries.append(LabeledExample(doc_id, label, iteration_acquired))
        self._ids.add(doc_id)

    def add_batch(self, doc_ids: Iterable[str], labels: Iterable[int], iteration: int) -> None:
        for doc_id, label in zip(doc_ids, labels):
            self.add(doc_id, label, iteration)

    @property
    def entries(self) -> tuple[LabeledExample, ...]:
        return tuple(self._entries)

    @property
    def doc_ids(self) -> frozenset[str]:
        return frozenset(self._ids)

    @property
    def n_pos(self) -> int:
        return sum(e.label for e in self._entries)

    @property
    def n_neg(self) -> int:
        return len(self._entries) - self.n_pos

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._ids

    def __iter__(self):
        return iter(self._entries)


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    penalty: float


def _objective_parts(X: sparse.csr_matrix, y: np.ndarray, C: float):
    """Closures for value, gradient and Hessian-vector product of

        C * sum_i log(1 + exp(-y_i (x_i.w + b))) + 0.5 ||w||^2

    with an unpenalized intercept. Parameter vector is [w, b].
    """
    n_features = X.shape[1]

    def split(theta):
        return theta[:n_features], theta[n_features]

    def value(theta):
        w, b = split(theta)
        margins = y * (X @ w + b)
        return C * np.logaddexp(0.0, -margins).sum() + 0.5 * float(w @ w)

    def grad(theta):
        w, b = split(theta)
        margins = y * (X @ w + b)
        coeff = -C * y * expit(-margins)
        g_w = X.T @ coeff + w
        g_b = coeff.sum()
        return np.concatenate([g_w, [g_b]])

    def hessp(theta, v):
        w, b = split(theta)
        v_w, v_b = split(v)
        z = X @ w + b
        p = expit(z)
        d = C * p * (1.0 - p)
        u = d * (X @ v_w + v_b)
        h_w = X.T @ u + v_w
        h_b = u.sum()
        return np.concatenate([h_w, [h_b]])

    return value, grad, hessp


def fit_logreg(
    features: sparse.csr_matrix,
    labeled: LabeledSet,
    doc_index: Mapping[str, int],
    penalty: float = 1.0,
) -> LinearModel:
    """Train the regularized logistic model on all labeled documents.

    Training is from scratch on every call. The returned model satisfies
    the first-order optimality check ||grad||_inf <= 1e-6; a labeled set
    with a single positive and no negatives is trained as-is (the
    stopping rule terminates at a finite intercept).
    """
    if penalty <= 0:
        raise ValueError(f"penalty must be > 0, got {penalty}")
    if labeled.n_pos < 1:
        raise TrainingError("training requires at least one positive example")
    rows = [doc_index[e.doc_id] for e in labeled]
    X = features[rows]
    if not np.isfinite(X.data).all():
        raise ValueError("feature matrix contains non-finite values")
    y = np.asarray([1.0 if e.label == 1 else -1.0 for e in labeled])
    C = float(penalty)
    value, grad, hessp = _objective_parts(X, y, C)

    theta0 = np.zeros(X.shape[1] + 1)
    result = optimize.minimize(
        value,
        theta0,
        jac=grad,
        hessp=hessp,
        method="trust-ncg",
        options={"gtol": GRADIENT_TOLERANCE / 10.0, "maxiter": 2000},
    )
    theta = result.x
    if np.max(np.abs(grad(theta))) > GRADIENT_TOLERANCE:
        # Rare stall: polish with a quasi-Newton pass from the current point.
        result = optimize.minimize(
            value,
            theta,
            jac=grad,
            method="L-BFGS-B",
            options={"gtol": GRADIENT_TOLERANCE / 10.0, "ftol": 0.0, "maxiter": 20000},
        )
        theta = result.x
    gnorm = np.max(np.abs(grad(theta)))
    if gnorm > GRADIENT_TOLERANCE:
        raise TrainingError(f"optimizer failed to converge (||grad||_inf = {gnorm:.3g})")
    return LinearModel(weights=theta[:-1].copy(), intercept=float(theta[-1]), penalty=C)


def predict_proba(model: LinearModel, features: sparse.csr_matrix) -> np.ndarray:
    """Sigmoid of the linear score per document, nudged into open (0, 1)."""
    if features.shape[1] != model.weights.shape[0]:
        raise ValueError(
            f"feature dimension {features.shape[1]} does not match model "
            f"dimension {model.weights.shape[0]}"
        )
    scores = expit(features @ model.weights + model.intercept)
    return np.clip(scores, _PROB_LO, _PROB_HI)


def validate_score_vector(scores: np.ndarray, n_docs: int) -> np.ndarray:
    """Check shape and the strict (0, 1) range of a score vector."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (n_docs,):
        raise ValueError(f"expected {n_docs} scores, got shape {scores.shape}")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    if (scores <= 0.0).any() or (scores >= 1.0).any():
        raise ValueError("scores must lie strictly inside (0, 1)")
    return scores


# --------------------------------------------------------------------------
# Plugin protocol client
#
# Wire format: one JSON object per line over the plugin's stdin/stdout, one
# response per request, strictly ordered. Commands: init, load_corpus, fit,
# score, shutdown. Any response may be {"ok": false, "error": "..."}.

PROTOCOL_VERSION = 1


class PluginProtocolError(RuntimeError):
    """The plugin process failed, stalled, or broke the wire contract."""


@dataclass(frozen=True)
class PluginLaunchSpec:
    argv: tuple[str, ...]
    config: Mapping[str, object] = field(default_factory=dict)
    init_timeout: float = 60.0
    call_timeout: float = 3600.0

    def __post_init__(self) -> None:
        if not self.argv:
            raise ValueError("plugin argv must be non-empty")


class PluginHandle:
    """One plugin subprocess owned by one run; calls are strictly sequential."""

    def __init__(self, spec: PluginLaunchSpec):
        self.spec = spec
        self.name: str | None = None
        self.n_docs: int | None = None
        self._buf = b""
        try:
            self._proc = subprocess.Popen(
                list(spec.argv),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,
                bufsize=0,
            )
        except OSError as exc:
            raise PluginProtocolError(f"could not launch plugin {spec.argv[0]!r}: {exc}") from exc

    def _send(self, message: dict) -> None:
        if self._proc.stdin is None or self._proc.poll() is not None:
            raise PluginProtocolError("plugin process is not running")
        data = (json.dumps(message) + "\n").encode("utf-8")
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PluginProtocolError(f"plugin pipe closed while sending {message.get('cmd')!r}") from exc

    def _read_line(self, timeout: float) -> bytes:
        assert self._proc.stdout is not None
        fd = self._proc.stdout.fileno()
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise PluginProtocolError(f"plugin response timed out after {timeout:.0f}s")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 1 << 16)
            if not chunk:
                raise PluginProtocolError("plugin closed its output mid-protocol")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def _call(self, message: dict, timeout: float) -> dict:
        self._send(message)
        line = self._read_line(timeout)
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PluginProtocolError(
                f"malformed plugin response to {message['cmd']!r}: {line[:200]!r}"
            ) from exc
        if not isinstance(response, dict) or "ok" not in response:
            raise PluginProtocolError(f"plugin response to {message['cmd']!r} lacks 'ok' field")
        if not response["ok"]:
            raise PluginProtocolError(
                f"plugin error on {message['cmd']!r}: {response.get('error', 'unspecified')}"
            )
        return response

    def init(self) -> str:
        response = self._call(
            {"cmd": "init", "protocol": PROTOCOL_VERSION, "config": dict(self.spec.config)},
            self.spec.init_timeout,
        )
        name = response.get("name")
        if not isinstance(name, str):
            raise PluginProtocolError("init response must carry a string 'name'")
        self.name = name
        return name

    def load_corpus(self, path: str, category: str) -> int:
        response = self._call(
            {"cmd": "load_corpus", "path": str(path), "category": category},
            self.spec.call_timeout,
        )
        n_docs = response.get("n_docs")
        if not isinstance(n_docs, int) or n_docs < 0:
            raise PluginProtocolError("load_corpus response must carry integer 'n_docs'")
        self.n_docs = n_docs
        return n_docs

    def fit(self, labeled: LabeledSet) -> float:
        payload = [{"doc_id": e.doc_id, "label": e.label} for e in labeled]
        response = self._call({"cmd": "fit", "labeled": payload}, self.spec.call_timeout)
        seconds = response.get("train_seconds", 0.0)
        if not isinstance(seconds, (int, float)):
            raise PluginProtocolError("fit response 'train_seconds' must be numeric")
        return float(seconds)

    def score(self, doc_ids: Sequence[str] | None = None) -> np.ndarray:
        response = self._call({"cmd": "score"}, self.spec.call_timeout)
        raw = response.get("scores")
        if not isinstance(raw, list):
            raise PluginProtocolError("score response must carry a 'scores' array")
        expected = self.n_docs if self.n_docs is not None else len(raw)
        if len(raw) != expected:
            raise PluginProtocolError(f"expected {expected} scores, plugin sent {len(raw)}")
        scores = np.empty(len(raw), dtype=np.float64)
        for i, value in enumerate(raw):
            if not isinstance(value, (int, float)) or not np.isfinite(value) or not 0.0 <= value <= 1.0:
                where = doc_ids[i] if doc_ids is not None else f"position {i}"
                raise PluginProtocolError(f"plugin score for {where} is not a probability: {value!r}")
            scores[i] = value
        # Exact 0/1 are valid probabilities on the wire but are nudged into
        # the open interval the rest of the pipeline assumes.
        return np.clip(scores, _PROB_LO, _PROB_HI)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._call({"cmd": "shutdown"}, min(self.spec.init_timeout, 10.0))
            except PluginProtocolError:
                pass
            try:
                self._proc.wait(timeout=10.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        for stream in (self._proc.stdin, self._proc.stdout):
            if stream is not None:
                stream.close()

    def __enter__(self) -> "PluginHandle":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def plugin_open(spec: PluginLaunchSpec) -> PluginHandle:
    """Launch the plugin process and complete the init handshake."""
    handle = PluginHandle(spec)
    try:
        handle.init()
    except PluginProtocolError:
        handle.close()
        raise
    return handle


def plugin_fit(handle: PluginHandle, labeled: LabeledSet) -> float:
    return handle.fit(labeled)


def plugin_score(handle: PluginHandle, doc_ids: Sequence[str] | None = None) -> np.ndarray:
    return handle.score(doc_ids)


def plugin_close(handle: PluginHandle) -> None:
    handle.close()
