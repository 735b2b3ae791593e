"""Golden transcript and session-state tests for the wire protocol."""

import json
import subprocess
import sys

import numpy as np
import pytest

from imbkit_sidecar import ScoringSession

CMD = [sys.executable, "-m", "imbkit_sidecar", "--model", "logistic"]

FIT_MSG = {
    "op": "fit",
    "features": [[0.0, 0.1], [0.2, -0.1], [-0.3, 0.2], [0.1, 0.0],
                 [2.0, 2.1], [1.8, 2.2], [2.2, 1.9], [2.1, 2.0]],
    "labels": [0, 0, 0, 0, 1, 1, 1, 1],
}
PREDICT_MSG = {"op": "predict", "features": [[0.0, 0.0], [2.0, 2.0], [1.0, 1.0]]}


def transcript(lines, timeout=60):
    """Send raw lines to a fresh sidecar process, return parsed replies."""
    proc = subprocess.run(
        CMD,
        input="\n".join(lines) + "\n",
        capture_output=True,
        text=True,
        timeout=timeout,
    )
    replies = [json.loads(line) for line in proc.stdout.strip().splitlines()]
    return proc.returncode, replies


class TestGoldenTranscript:
    def test_full_session(self):
        lines = [
            json.dumps(PREDICT_MSG),        # before fit: rejected
            json.dumps(FIT_MSG),            # ok
            json.dumps(PREDICT_MSG),        # ok with 3 scores
            "this is not json",             # rejected, loop continues
            json.dumps({"op": "resample"}),  # unknown op: rejected
            json.dumps({"op": "shutdown"}),  # ok, exit 0
        ]
        code, replies = transcript(lines)
        assert code == 0
        assert len(replies) == 6  # exactly one response per request
        assert replies[0]["ok"] is False
        assert "before fit" in replies[0]["error"]
        assert replies[1] == {"ok": True}
        assert replies[2]["ok"] is True
        scores = replies[2]["scores"]
        assert len(scores) == 3
        assert all(0.0 <= s <= 1.0 for s in scores)
        assert scores[0] < 0.5 < scores[1]  # tracks query order
        assert replies[3]["ok"] is False
        assert replies[4]["ok"] is False
        assert replies[5] == {"ok": True}

    def test_deterministic_scores(self):
        lines = [json.dumps(FIT_MSG), json.dumps(PREDICT_MSG), json.dumps({"op": "shutdown"})]
        _, first = transcript(lines)
        _, second = transcript(lines)
        assert first[1]["scores"] == second[1]["scores"]

    def test_closed_stdin_exits_cleanly(self):
        code, replies = transcript([json.dumps(FIT_MSG)])  # no shutdown
        assert code == 0
        assert replies == [{"ok": True}]

    def test_every_request_gets_one_ordered_response(self):
        n_predicts = 5
        lines = [json.dumps(FIT_MSG)] + [json.dumps(PREDICT_MSG)] * n_predicts
        lines.append(json.dumps({"op": "shutdown"}))
        code, replies = transcript(lines)
        assert code == 0
        assert len(replies) == n_predicts + 2


class TestScoringSession:
    def test_predict_before_fit_rejected(self):
        session = ScoringSession("logistic")
        with pytest.raises(ValueError, match="before fit"):
            session.predict([[0.0, 0.0]])

    def test_single_class_context_constant_scores(self):
        session = ScoringSession("logistic")
        session.fit([[0.0, 1.0], [0.5, 0.5]], [1, 1])
        assert session.predict([[9.9, -3.0], [0.0, 0.0]]) == [1.0, 1.0]

    def test_label_validation(self):
        session = ScoringSession("logistic")
        with pytest.raises(ValueError):
            session.fit([[0.0], [1.0]], [0, 2])
        with pytest.raises(ValueError):
            session.fit([], [])

    def test_dimension_guard(self):
        session = ScoringSession("gaussian_nb")
        session.fit(FIT_MSG["features"], FIT_MSG["labels"])
        with pytest.raises(ValueError):
            session.predict([[1.0, 2.0, 3.0]])

    @pytest.mark.parametrize("name", ["logistic", "gaussian_nb", "knn"])
    def test_wrapped_models_score_in_unit_interval(self, name):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 3))
        y = (rng.uniform(size=40) < 0.4).astype(int)
        y[:2] = [0, 1]
        session = ScoringSession(name)
        session.fit(X.tolist(), y.tolist())
        scores = session.predict(rng.normal(size=(10, 3)).tolist())
        assert len(scores) == 10
        assert all(0.0 <= s <= 1.0 for s in scores)

    def test_unknown_model_rejected_at_fit(self):
        session = ScoringSession("perceptron9000")
        with pytest.raises(RuntimeError):
            session.fit([[0.0], [1.0]], [0, 1])
