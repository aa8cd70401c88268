"""
Predictivity analysis - how well do landscape features predict the successful operator?

For every search phase of a case dataset:

    - Pearson correlation matrix of the features
    - chi-square ranking of each feature against the operator label
      (equal-frequency bins, up to 10 per feature)
    - three classifiers trained on a stratified 80/20 split:
        forest      random forest of 200 Gini trees, hard majority vote
        margin      one-vs-rest linear hinge-loss classifier (SGD)
        perceptron  one hidden layer of 32 ReLU units, softmax output, Adam
    - importance rankings from the forest (mean impurity decrease) and the
      margin classifier (mean |coefficient|), min-max normalised to [0, 1]

Accuracies are reported per phase with a cross-phase mean row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np
import pandas as pd
from scipy.special import log_softmax, softmax
from scipy.stats import chi2_contingency
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import SGDClassifier
from sklearn.metrics import accuracy_score
from sklearn.preprocessing import StandardScaler

from case_dataset import LABEL_COLUMN, N_PHASES
from landscape_features import FEATURE_NAMES

logger = logging.getLogger(__name__)

# Configuration
DEFAULT_BINS = 10
DEFAULT_TREES = 200
DEFAULT_TEST_FRACTION = 0.2
MARGIN_LAMBDA = 1e-4
MARGIN_EPOCHS = 100
HIDDEN_UNITS = 32
PERCEPTRON_EPOCHS = 200
PERCEPTRON_STEP = 1e-3
BATCH_SIZE = 32

CLASSIFIERS = ("forest", "margin", "perceptron")

# Forest accuracy means printed next to measured results for comparison
REFERENCE_FOREST_ACCURACY = {"onemax": 0.83, "sukp": 0.77}


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DataMatrix:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = FEATURE_NAMES
    phase: int = None
    problem: str = None

    def __post_init__(self):
        if len(self.X) == 0 or len(self.X) != len(self.y):
            raise AnalysisError(f"need matching, non-empty X and y (got {len(self.X)} "
                                f"rows and {len(self.y)} labels)")
        if self.X.shape[1] != len(self.feature_names):
            raise AnalysisError("column count differs from the number of feature names")
        if not np.all(np.isfinite(self.X)):
            raise AnalysisError("feature matrix contains non-finite values")

    @classmethod
    def from_frame(cls, frame, feature_columns=FEATURE_NAMES, phase=None, problem=None):
        return cls(X=frame[list(feature_columns)].to_numpy(dtype=float),
                   y=frame[LABEL_COLUMN].to_numpy(dtype=int),
                   feature_names=tuple(feature_columns), phase=phase, problem=problem)


def min_max(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    span = values.max() - values.min()
    if span == 0:
        return np.zeros_like(values)
    return (values - values.min()) / span


@dataclass(frozen=True, eq=False)
class ImportanceRanking:
    """Normalised scores (1 = most important) with the raw scores they came from."""

    method: str
    scores: pd.Series
    raw: pd.Series

    @classmethod
    def from_raw(cls, method, raw, names):
        raw = pd.Series(np.asarray(raw, dtype=float), index=list(names), name=method)
        return cls(method=method, scores=pd.Series(min_max(raw), index=raw.index, name=method),
                   raw=raw)

    @property
    def order(self) -> list:
        """Feature names from most to least important; ties keep feature order."""
        positions = np.argsort(-self.scores.to_numpy(), kind="stable")
        return [self.scores.index[i] for i in positions]

    @property
    def ranks(self) -> pd.Series:
        return pd.Series({name: rank for rank, name in enumerate(self.order, start=1)})[self.scores.index]

    def to_frame(self) -> pd.DataFrame:
        order = self.order
        return pd.DataFrame({
            "rank": range(1, len(order) + 1),
            "feature": order,
            "score": [self.scores[name] for name in order],
            "raw": [self.raw[name] for name in order],
        })


# ---------------------------------------------------------------------------
# Exploratory statistics
# ---------------------------------------------------------------------------

def pearson_matrix(X, names=FEATURE_NAMES) -> pd.DataFrame:
    """Feature correlation matrix; constant columns correlate 0 with everything else."""
    X = np.asarray(X, dtype=float)
    if len(X) < 2:
        raise AnalysisError("Pearson correlation needs at least two rows")
    constant = np.ptp(X, axis=0) == 0
    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    denom = np.outer(norms, norms)
    cov = centered.T @ centered
    r = np.divide(cov, denom, out=np.zeros_like(cov), where=denom > 0)
    r[constant, :] = 0.0
    r[:, constant] = 0.0
    r = np.clip((r + r.T) / 2, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return pd.DataFrame(r, index=list(names), columns=list(names))


def _chi2_statistic(column, y, bins):
    if np.ptp(column) == 0:
        return 0.0
    codes = pd.qcut(column, q=bins, labels=False, duplicates="drop")
    table = pd.crosstab(codes, y)
    if table.shape[0] < 2 or table.shape[1] < 2:
        return 0.0
    return float(chi2_contingency(table.to_numpy(), correction=False)[0])


def chi2_rank(X, y, bins=DEFAULT_BINS, names=FEATURE_NAMES) -> ImportanceRanking:
    """Chi-square association of each (equal-frequency binned) feature with the label."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if len(np.unique(y)) < 2:
        raise AnalysisError("chi-square ranking needs at least two classes")
    raw = [_chi2_statistic(X[:, j], y, bins) for j in range(X.shape[1])]
    return ImportanceRanking.from_raw("chi2", raw, names)


# ---------------------------------------------------------------------------
# Data preparation
# ---------------------------------------------------------------------------

def stratified_split(X, y, test_fraction=DEFAULT_TEST_FRACTION, seed=0):
    """Seeded stratified split; returns X_train, X_test, y_train, y_test.

    Each class sends round(test_fraction * n_c) rows to the test side, clipped so
    both sides keep at least one row of every class.
    """
    X = np.asarray(X)
    y = np.asarray(y)
    if not 0.0 < test_fraction < 1.0:
        raise AnalysisError(f"test fraction must lie in (0, 1), got {test_fraction}")
    labels, counts = np.unique(y, return_counts=True)
    if np.any(counts < 2):
        raise AnalysisError(f"class {labels[np.argmax(counts < 2)]} has fewer than 2 rows")
    rng = np.random.default_rng(seed)
    in_test = np.zeros(len(y), dtype=bool)
    for label, n in zip(labels, counts):
        rows = rng.permutation(np.flatnonzero(y == label))
        k = int(np.clip(round(test_fraction * n), 1, n - 1))
        in_test[rows[:k]] = True
    train = rng.permutation(np.flatnonzero(~in_test))
    test = rng.permutation(np.flatnonzero(in_test))
    return X[train], X[test], y[train], y[test]


def zscore_fit_apply(train, test):
    """Standardise with training statistics; zero-variance columns become 0."""
    scaler = StandardScaler().fit(train)
    constant = scaler.var_ == 0
    train_z = scaler.transform(train)
    test_z = scaler.transform(test)
    train_z[:, constant] = 0.0
    test_z[:, constant] = 0.0
    return train_z, test_z


def _require_classes(y):
    if len(np.unique(y)) < 2:
        raise AnalysisError("training data must contain at least two classes")


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------

def train_forest(X, y, trees=DEFAULT_TREES, seed=0, jobs=None) -> RandomForestClassifier:
    """Bootstrap forest of Gini trees grown to purity, sqrt(p) candidate features per split.

    Per-tree seeds are drawn from `seed` up front, so jobs only changes speed.
    """
    _require_classes(y)
    model = RandomForestClassifier(
        n_estimators=trees, criterion="gini", max_features="sqrt",
        bootstrap=True, min_samples_split=2, random_state=seed, n_jobs=jobs)
    return model.fit(X, y)


def forest_predict(model, X) -> np.ndarray:
    """Hard majority vote over trees; ties go to the smallest label."""
    votes = np.stack([tree.predict(X) for tree in model.estimators_]).astype(int)
    counts = np.stack([(votes == c).sum(axis=0) for c in range(len(model.classes_))])
    return model.classes_[counts.argmax(axis=0)]


def forest_importance(model, names=FEATURE_NAMES) -> ImportanceRanking:
    return ImportanceRanking.from_raw("forest", model.feature_importances_, names)


# ---------------------------------------------------------------------------
# Linear max-margin classifier
# ---------------------------------------------------------------------------

def train_margin(X, y, lam=MARGIN_LAMBDA, epochs=MARGIN_EPOCHS, seed=0) -> SGDClassifier:
    """One-vs-rest hinge loss with L2 penalty lam, step 1 / (lam * (t + t0)).

    Expects standardised inputs; raw features train but are ill-conditioned.
    """
    _require_classes(y)
    model = SGDClassifier(loss="hinge", penalty="l2", alpha=lam, max_iter=epochs,
                          tol=None, learning_rate="optimal", shuffle=True,
                          random_state=seed)
    return model.fit(X, y)


def margin_predict(model, X) -> np.ndarray:
    return model.predict(X)


def margin_coefficients(model, names=FEATURE_NAMES) -> ImportanceRanking:
    return ImportanceRanking.from_raw("margin", np.abs(model.coef_).mean(axis=0), names)


# ---------------------------------------------------------------------------
# One-hidden-layer perceptron
# ---------------------------------------------------------------------------

class PerceptronModel:
    """ReLU hidden layer, softmax output, mean cross-entropy loss."""

    PARAMS = ("W1", "b1", "W2", "b2")

    def __init__(self, n_features, classes, hidden=HIDDEN_UNITS, seed=0):
        rng = np.random.default_rng(seed)
        self.classes = np.asarray(classes)
        k = len(self.classes)
        self.params = {
            "W1": rng.normal(0.0, np.sqrt(2.0 / n_features), (n_features, hidden)),
            "b1": np.zeros(hidden),
            "W2": rng.normal(0.0, np.sqrt(2.0 / hidden), (hidden, k)),
            "b2": np.zeros(k),
        }

    def _forward(self, X):
        p = self.params
        z1 = X @ p["W1"] + p["b1"]
        h = np.maximum(z1, 0.0)
        return z1, h, h @ p["W2"] + p["b2"]

    def predict(self, X):
        return self.classes[np.argmax(self._forward(np.asarray(X, dtype=float))[2], axis=1)]

    def label_indices(self, y):
        return np.searchsorted(self.classes, y)

    def loss(self, X, targets):
        logits = self._forward(X)[2]
        return float(-log_softmax(logits, axis=1)[np.arange(len(X)), targets].mean())

    def loss_and_gradients(self, X, targets):
        """Mean cross-entropy and its gradient w.r.t. every parameter; targets are class indices."""
        p = self.params
        n = len(X)
        z1, h, logits = self._forward(X)
        loss = float(-log_softmax(logits, axis=1)[np.arange(n), targets].mean())

        delta = softmax(logits, axis=1)
        delta[np.arange(n), targets] -= 1.0
        delta /= n
        dh = delta @ p["W2"].T
        dh[z1 <= 0] = 0.0
        grads = {
            "W2": h.T @ delta,
            "b2": delta.sum(axis=0),
            "W1": X.T @ dh,
            "b1": dh.sum(axis=0),
        }
        return loss, grads

    def fit(self, X, y, epochs=PERCEPTRON_EPOCHS, step=PERCEPTRON_STEP, batch=BATCH_SIZE,
            seed=0, beta1=0.9, beta2=0.999, eps=1e-8):
        """Mini-batch Adam."""
        X = np.asarray(X, dtype=float)
        targets = self.label_indices(y)
        rng = np.random.default_rng(seed)
        m = {k: np.zeros_like(v) for k, v in self.params.items()}
        v = {k: np.zeros_like(v) for k, v in self.params.items()}
        t = 0
        for _ in range(epochs):
            order = rng.permutation(len(X))
            for start in range(0, len(X), batch):
                rows = order[start:start + batch]
                _, grads = self.loss_and_gradients(X[rows], targets[rows])
                t += 1
                for name in self.PARAMS:
                    g = grads[name]
                    m[name] = beta1 * m[name] + (1 - beta1) * g
                    v[name] = beta2 * v[name] + (1 - beta2) * g * g
                    m_hat = m[name] / (1 - beta1 ** t)
                    v_hat = v[name] / (1 - beta2 ** t)
                    self.params[name] -= step * m_hat / (np.sqrt(v_hat) + eps)
        return self


def train_perceptron(X, y, hidden=HIDDEN_UNITS, epochs=PERCEPTRON_EPOCHS, seed=0,
                     step=PERCEPTRON_STEP, batch=BATCH_SIZE) -> PerceptronModel:
    X = np.asarray(X, dtype=float)
    model = PerceptronModel(X.shape[1], np.unique(y), hidden=hidden, seed=seed)
    return model.fit(X, y, epochs=epochs, step=step, batch=batch, seed=seed)


def perceptron_predict(model, X) -> np.ndarray:
    return model.predict(X)


# ---------------------------------------------------------------------------
# Per-phase evaluation
# ---------------------------------------------------------------------------

@dataclass
class PhaseReport:
    phase: int
    n_cases: int
    class_counts: dict
    pearson: pd.DataFrame
    chi2: ImportanceRanking
    accuracy: dict
    baseline: float
    importances: dict


@dataclass
class AnalysisReport:
    problem: str = None
    feature_names: tuple = FEATURE_NAMES
    phases: dict = field(default_factory=dict)

    def accuracy_table(self) -> pd.DataFrame:
        """Phase rows plus a Mean row; one column per classifier and the baseline."""
        rows = []
        for k in sorted(self.phases):
            report = self.phases[k]
            rows.append({"phase": f"Phase {k}", **report.accuracy, "baseline": report.baseline})
        table = pd.DataFrame(rows, columns=["phase", *CLASSIFIERS, "baseline"])
        mean = {"phase": "Mean", **table[list(CLASSIFIERS) + ["baseline"]].mean().to_dict()}
        return pd.concat([table, pd.DataFrame([mean])], ignore_index=True)

    def rankings(self, phase) -> dict:
        report = self.phases[phase]
        return {"chi2": report.chi2, **report.importances}

    def importance_long(self) -> pd.DataFrame:
        frames = []
        for k in sorted(self.phases):
            for method, ranking in self.rankings(k).items():
                frame = ranking.to_frame()[["feature", "score", "rank"]]
                frame.insert(0, "method", method)
                frame.insert(0, "phase", k)
                frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def pearson_long(self) -> pd.DataFrame:
        frames = []
        for k in sorted(self.phases):
            stacked = self.phases[k].pearson.stack().reset_index()
            stacked.columns = ["feature_a", "feature_b", "r"]
            stacked.insert(0, "phase", k)
            frames.append(stacked)
        return pd.concat(frames, ignore_index=True)

    def feature_rank(self, feature) -> pd.DataFrame:
        """Rank of one feature under every method and phase."""
        rows = [{"phase": k, **{m: int(r.ranks[feature]) for m, r in self.rankings(k).items()}}
                for k in sorted(self.phases)]
        return pd.DataFrame(rows)

    def to_text(self, top=5) -> str:
        title = f"PREDICTIVITY REPORT ({self.problem})" if self.problem else "PREDICTIVITY REPORT"
        lines = ["=" * 60, title, "=" * 60, ""]
        for k in sorted(self.phases):
            report = self.phases[k]
            counts = ", ".join(f"OP {op}: {n}" for op, n in sorted(report.class_counts.items()))
            lines.append(f"Phase {k}: {report.n_cases} cases ({counts})")
        lines += ["", "--- Accuracy ---", format_accuracy_table(self.accuracy_table())]

        reference = REFERENCE_FOREST_ACCURACY.get(self.problem)
        if reference is not None:
            forest_mean = self.accuracy_table().iloc[-1]["forest"]
            lines.append(f"Forest mean {forest_mean:.2f} (reference: {reference:.2f})")

        for k in sorted(self.phases):
            lines += ["", f"--- Phase {k}: top {top} features ---"]
            for method, ranking in self.rankings(k).items():
                lines.append(f"  {method:<8} " + ", ".join(ranking.order[:top]))
        return "\n".join(lines) + "\n"


def format_accuracy_table(table) -> str:
    columns = [c for c in table.columns if c != "phase"]
    lines = [f"{'':<10}" + "".join(f"{c:>12}" for c in columns)]
    for row in table.itertuples(index=False):
        values = row._asdict()
        lines.append(f"{values['phase']:<10}" + "".join(f"{values[c]:>12.2f}" for c in columns))
    return "\n".join(lines)


def _usable_classes(frame, phase):
    """Drop operator classes with fewer than two cases in a phase (they cannot be stratified)."""
    counts = frame[LABEL_COLUMN].value_counts()
    rare = sorted(counts[counts < 2].index)
    if rare:
        logger.warning("phase %d: dropping operator classes %s with fewer than 2 cases",
                       phase, rare)
        frame = frame[~frame[LABEL_COLUMN].isin(rare)]
    return frame


def evaluate_phase(data, seed=0, trees=DEFAULT_TREES, test_fraction=DEFAULT_TEST_FRACTION,
                   bins=DEFAULT_BINS, jobs=None) -> PhaseReport:
    names = data.feature_names
    labels, counts = np.unique(data.y, return_counts=True)
    if len(labels) < 2:
        raise AnalysisError(f"phase {data.phase} has fewer than two operator classes")

    X_train, X_test, y_train, y_test = stratified_split(data.X, data.y, test_fraction, seed)
    forest = train_forest(X_train, y_train, trees=trees, seed=seed, jobs=jobs)
    Z_train, Z_test = zscore_fit_apply(X_train, X_test)
    margin = train_margin(Z_train, y_train, seed=seed)
    perceptron = train_perceptron(Z_train, y_train, seed=seed)

    accuracy = {
        "forest": accuracy_score(y_test, forest_predict(forest, X_test)),
        "margin": accuracy_score(y_test, margin_predict(margin, Z_test)),
        "perceptron": accuracy_score(y_test, perceptron_predict(perceptron, Z_test)),
    }
    baseline = float(np.unique(y_test, return_counts=True)[1].max() / len(y_test))
    logger.info("phase %s: %d cases, accuracy forest %.3f margin %.3f perceptron %.3f "
                "(baseline %.3f)", data.phase, len(data.y), accuracy["forest"],
                accuracy["margin"], accuracy["perceptron"], baseline)

    return PhaseReport(
        phase=data.phase, n_cases=len(data.y),
        class_counts={int(label): int(c) for label, c in zip(labels, counts)},
        pearson=pearson_matrix(data.X, names),
        chi2=chi2_rank(data.X, data.y, bins=bins, names=names),
        accuracy={k: float(v) for k, v in accuracy.items()},
        baseline=baseline,
        importances={
            "forest": forest_importance(forest, names),
            "margin": margin_coefficients(margin, names),
        },
    )


def evaluate(frame, feature_columns=FEATURE_NAMES, seed=0, trees=DEFAULT_TREES,
             test_fraction=DEFAULT_TEST_FRACTION, bins=DEFAULT_BINS, jobs=None,
             problem=None) -> AnalysisReport:
    """Analyse each of the three phases of a case DataFrame."""
    present = set(frame["phase"].unique())
    for k in range(1, N_PHASES + 1):
        if k not in present:
            raise AnalysisError(f"dataset has no cases in phase {k}")

    report = AnalysisReport(problem=problem, feature_names=tuple(feature_columns))
    for k in range(1, N_PHASES + 1):
        subset = _usable_classes(frame[frame["phase"] == k], k)
        data = DataMatrix.from_frame(subset, feature_columns, phase=k, problem=problem)
        report.phases[k] = evaluate_phase(data, seed=seed, trees=trees,
                                          test_fraction=test_fraction, bins=bins, jobs=jobs)
    return report
