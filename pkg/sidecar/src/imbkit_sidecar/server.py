"""Stdio scoring server: one JSON object per line, strict request/response.

Wraps a probabilistic model behind the wire protocol the imbkit harness
speaks, so real models (scikit-learn estimators, or TabPFN when
installed) can serve as the classifier under test:

    -> {"op": "fit", "features": [[...]], "labels": [0, 1, ...]}
    <- {"ok": true}
    -> {"op": "predict", "features": [[...]]}
    <- {"ok": true, "scores": [0.73, ...]}
    -> {"op": "shutdown"}
    <- {"ok": true}

Fit stores the context (for ICL-style models nothing is "trained" in
the gradient sense; scikit estimators refit from scratch each time).
Malformed requests get {"ok": false, "error": ...} and the loop
continues; predict before fit is rejected the same way. The process
exits 0 on shutdown and on a closed input stream. Scores are emitted at
full double precision; the harness owns all rounding.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np


def _make_model(name: str):
    if name == "logistic":
        from sklearn.linear_model import LogisticRegression

        return LogisticRegression(max_iter=1000)
    if name == "gaussian_nb":
        from sklearn.naive_bayes import GaussianNB

        return GaussianNB()
    if name == "random_forest":
        from sklearn.ensemble import RandomForestClassifier

        return RandomForestClassifier(n_estimators=200, random_state=0)
    if name == "gradient_boosting":
        from sklearn.ensemble import HistGradientBoostingClassifier

        return HistGradientBoostingClassifier(random_state=0)
    if name == "knn":
        from sklearn.neighbors import KNeighborsClassifier

        return KNeighborsClassifier(n_neighbors=5)
    if name == "tabpfn":
        try:
            from tabpfn import TabPFNClassifier
        except ImportError as exc:
            raise RuntimeError(
                "tabpfn is not installed; pip install 'imbkit-sidecar[tabpfn]'"
            ) from exc
        return TabPFNClassifier()
    raise RuntimeError(f"unknown model {name!r}; see --help for choices")


MODEL_CHOICES = ("logistic", "gaussian_nb", "random_forest", "gradient_boosting", "knn", "tabpfn")


class ScoringSession:
    """Holds the wrapped estimator and the fitted-state guard."""

    def __init__(self, model_name: str):
        self.model_name = model_name
        self.model = None
        self.constant_score = None  # single-class contexts
        self.n_features = None

    def fit(self, features, labels):
        X = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
            raise ValueError("fit needs a nonempty (n, d) feature matrix with one label per row")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        self.n_features = X.shape[1]
        if np.unique(y).size < 2:
            self.model = "constant"
            self.constant_score = float(y[0])
            return
        self.model = _make_model(self.model_name)
        self.model.fit(X, y)

    def predict(self, features):
        if self.model is None:
            raise ValueError("predict before fit")
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"queries must be (n, {self.n_features})")
        if self.model == "constant":
            return [self.constant_score] * X.shape[0]
        proba = self.model.predict_proba(X)
        col = list(self.model.classes_).index(1)
        return np.clip(proba[:, col], 0.0, 1.0).tolist()


def serve(model_name: str, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def respond(payload):
        stdout.write(json.dumps(payload) + "\n")
        stdout.flush()

    session = ScoringSession(model_name)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            respond({"ok": False, "error": f"malformed JSON: {exc}"})
            continue
        op = request.get("op") if isinstance(request, dict) else None
        try:
            if op == "fit":
                session.fit(request["features"], request["labels"])
                respond({"ok": True})
            elif op == "predict":
                respond({"ok": True, "scores": session.predict(request["features"])})
            elif op == "shutdown":
                respond({"ok": True})
                return 0
            else:
                respond({"ok": False, "error": f"unknown op {op!r}"})
        except (KeyError, ValueError, TypeError, RuntimeError) as exc:
            respond({"ok": False, "error": str(exc)})
    return 0  # input stream closed


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="imbkit-sidecar",
        description="Serve a probabilistic model over line-delimited JSON on stdio.",
    )
    parser.add_argument(
        "--model",
        default="logistic",
        choices=MODEL_CHOICES,
        help="wrapped estimator (default: logistic)",
    )
    args = parser.parse_args(argv)
    try:
        return serve(args.model)
    except KeyboardInterrupt:
        return 0


if __name__ == "__main__":
    sys.exit(main())
