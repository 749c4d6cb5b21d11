"""Base classifiers for the toxicity ensemble, implemented from scratch.

All learners share a tiny interface: fit(X, y) with y in {0, 1}, and
predict_proba(X) returning the positive-class probability per row.
Every source of randomness flows from a spawned SeedSequence, so fits
are deterministic and independent of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError, DataError, ValidationError

ALGORITHMS = ("rf", "ert", "gbt", "knn", "lr", "adb", "dt")


@dataclass(frozen=True)
class ClassifierSpec:
    """One base learner plus its hyperparameters.

    trees counts forest members, boosting rounds, or stumps depending on
    the algorithm; depth limits individual trees.  Unset fields take the
    per-algorithm defaults resolved in make_classifier.
    """

    algorithm: str
    trees: int | None = None
    depth: int | None = None
    k: int = 5
    learning_rate: float | None = None
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        for field_name in ("trees", "depth"):
            v = getattr(self, field_name)
            if v is not None and v < 1:
                raise ConfigError(f"{field_name} must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")


# named presets: the boosted-tree learner carries two hyperparameter
# flavors so the reference five-member ensemble can weight them separately
PRESETS = {
    "rf": ClassifierSpec("rf"),
    "ert": ClassifierSpec("ert"),
    "gbt-x": ClassifierSpec("gbt", depth=3, learning_rate=0.1),
    "gbt-l": ClassifierSpec("gbt", depth=4, learning_rate=0.05),
    "knn": ClassifierSpec("knn"),
    "lr": ClassifierSpec("lr"),
    "adb": ClassifierSpec("adb"),
    "dt": ClassifierSpec("dt"),
}

DEFAULT_MEMBERS = ("rf", "gbt-l", "gbt-x", "knn", "lr")

# the reference weighting reported for the five-member ensemble
REFERENCE_WEIGHTS = {"rf": 0.3, "gbt-l": 0.1, "gbt-x": 0.2, "knn": 0.2, "lr": 0.2}


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError("X must be (n, d) with one label per row")
    if X.shape[0] < 2:
        raise DataError("need at least 2 samples")
    classes = np.unique(y)
    if not np.array_equal(classes, [0, 1]):
        raise DataError(f"labels must contain both classes 0 and 1, got {classes}")
    return X, y.astype(np.int64)


# --- decision trees ---------------------------------------------------------


class _Tree:
    """Array-encoded binary tree: feature < 0 marks a leaf with `value`."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature = np.array(self.feature)
        threshold = np.array(self.threshold)
        left = np.array(self.left)
        right = np.array(self.right)
        value = np.array(self.value)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            f = feature[node[idx]]
            t = threshold[node[idx]]
            goes_left = X[idx, f] <= t
            node[idx] = np.where(goes_left, left[node[idx]], right[node[idx]])
            active = feature[node] >= 0
        return value[node]

    def to_state(self) -> dict:
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "value": self.value,
        }

    @classmethod
    def from_state(cls, state: dict) -> "_Tree":
        tree = cls()
        tree.feature = [int(v) for v in state["feature"]]
        tree.threshold = [float(v) for v in state["threshold"]]
        tree.left = [int(v) for v in state["left"]]
        tree.right = [int(v) for v in state["right"]]
        tree.value = [float(v) for v in state["value"]]
        return tree


def _best_split_gini(X, y, w, feat_ids, rng=None):
    """Best (feature, threshold) by weighted Gini; None when no split helps.

    With rng set (extremely randomized mode) one uniform threshold per
    feature is tried instead of every boundary between sorted values.
    """
    best = None  # (impurity, feature, threshold)
    total_w = w.sum()
    for f in feat_ids:
        xs = X[:, f]
        if rng is not None:
            lo, hi = xs.min(), xs.max()
            if lo == hi:
                continue
            thr_list = [lo + (hi - lo) * rng.random()]
            for thr in thr_list:
                mask = xs <= thr
                wl = w[mask].sum()
                wr = total_w - wl
                if wl == 0 or wr == 0:
                    continue
                pl = (w[mask] * y[mask]).sum() / wl
                pr = (w[~mask] * y[~mask]).sum() / wr
                imp = wl * pl * (1 - pl) + wr * pr * (1 - pr)
                if best is None or imp < best[0] - 1e-15:
                    best = (imp, f, thr)
            continue
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        w_sorted = w[order]
        wy_sorted = w_sorted * y[order]
        cw = np.cumsum(w_sorted)
        cwy = np.cumsum(wy_sorted)
        # candidate boundaries between distinct consecutive values
        distinct = np.nonzero(xs_sorted[:-1] < xs_sorted[1:])[0]
        if distinct.size == 0:
            continue
        wl = cw[distinct]
        wr = total_w - wl
        pl = cwy[distinct] / wl
        pr = (cwy[-1] - cwy[distinct]) / wr
        imp = wl * pl * (1 - pl) + wr * pr * (1 - pr)
        j = int(np.argmin(imp))
        thr = 0.5 * (xs_sorted[distinct[j]] + xs_sorted[distinct[j] + 1])
        if best is None or imp[j] < best[0] - 1e-15:
            best = (float(imp[j]), f, float(thr))
    return best


class DecisionTree:
    """CART classifier with Gini splits and optional feature subsampling."""

    def __init__(
        self,
        max_depth: int = 12,
        max_features: str | None = None,
        random_thresholds: bool = False,
        seed_seq: np.random.SeedSequence | None = None,
    ):
        self.max_depth = max_depth
        self.max_features = max_features
        self.random_thresholds = random_thresholds
        self.seed_seq = seed_seq or np.random.SeedSequence(0)
        self.tree = _Tree()

    def fit(self, X, y, sample_weight=None):
        X, y = _check_xy(X, y)
        w = (
            np.full(len(y), 1.0 / len(y))
            if sample_weight is None
            else np.asarray(sample_weight, dtype=float)
        )
        rng = np.random.default_rng(self.seed_seq)
        self.tree = _Tree()
        self._grow(X, y, w, np.arange(len(y)), 0, rng)
        return self

    def _n_features(self, d: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(d)))
        return d

    def _grow(self, X, y, w, idx, depth, rng) -> int:
        node = self.tree.add_node()
        wsum = w[idx].sum()
        pos = (w[idx] * y[idx]).sum() / wsum if wsum > 0 else 0.0
        self.tree.value[node] = float(pos)
        if depth >= self.max_depth or len(idx) < 2 or pos in (0.0, 1.0):
            return node
        d = X.shape[1]
        n_feat = self._n_features(d)
        if n_feat < d:
            feat_ids = np.sort(rng.choice(d, size=n_feat, replace=False))
        else:
            feat_ids = np.arange(d)
        split = _best_split_gini(
            X[idx], y[idx], w[idx], feat_ids, rng if self.random_thresholds else None
        )
        if split is None:
            return node
        _, f, thr = split
        mask = X[idx, f] <= thr
        if not mask.any() or mask.all():
            return node
        self.tree.feature[node] = int(f)
        self.tree.threshold[node] = float(thr)
        self.tree.left[node] = self._grow(X, y, w, idx[mask], depth + 1, rng)
        self.tree.right[node] = self._grow(X, y, w, idx[~mask], depth + 1, rng)
        return node

    def predict_proba(self, X) -> np.ndarray:
        return self.tree.predict(np.asarray(X, dtype=float))

    def to_state(self) -> dict:
        return {"tree": self.tree.to_state()}

    def from_state(self, state: dict):
        self.tree = _Tree.from_state(state["tree"])
        return self


class _Forest:
    """Shared machinery for bagged (RF) and extremely randomized (ERT) trees."""

    bootstrap = True
    random_thresholds = False

    def __init__(self, n_trees: int = 200, max_depth: int = 12, seed: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.seed = seed
        self.trees: list[DecisionTree] = []

    def fit(self, X, y, sample_weight=None):
        X, y = _check_xy(X, y)
        seqs = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        self.trees = []
        n = len(y)
        for seq in seqs:
            rng = np.random.default_rng(seq.spawn(1)[0])
            if self.bootstrap:
                idx = rng.integers(0, n, size=n)
            else:
                idx = np.arange(n)
            tree = DecisionTree(
                max_depth=self.max_depth,
                max_features="sqrt",
                random_thresholds=self.random_thresholds,
                seed_seq=seq,
            )
            xi, yi = X[idx], y[idx]
            if np.unique(yi).size < 2:
                # degenerate bootstrap: fall back to the full sample
                xi, yi = X, y
            tree.fit(xi, yi)
            self.trees.append(tree)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def to_state(self) -> dict:
        return {"trees": [t.to_state() for t in self.trees]}

    def from_state(self, state: dict):
        self.trees = [
            DecisionTree(max_depth=self.max_depth).from_state(s)
            for s in state["trees"]
        ]
        return self


class RandomForest(_Forest):
    bootstrap = True
    random_thresholds = False


class ExtraTrees(_Forest):
    bootstrap = False
    random_thresholds = True


class _RegressionTree:
    """Squared-error regression tree used as the boosting weak learner."""

    def __init__(self, max_depth: int = 3):
        self.max_depth = max_depth
        self.tree = _Tree()

    def fit(self, X, residual, hessian):
        self.tree = _Tree()
        self._grow(X, residual, hessian, np.arange(len(residual)), 0)
        return self

    def _grow(self, X, r, h, idx, depth) -> int:
        node = self.tree.add_node()
        # Newton step for logistic loss
        self.tree.value[node] = float(r[idx].sum() / max(h[idx].sum(), 1e-12))
        if depth >= self.max_depth or len(idx) < 2:
            return node
        best = None
        for f in range(X.shape[1]):
            xs = X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs_sorted = xs[order]
            rs = np.cumsum(r[idx][order])
            ns = np.arange(1, len(idx) + 1)
            distinct = np.nonzero(xs_sorted[:-1] < xs_sorted[1:])[0]
            if distinct.size == 0:
                continue
            nl = ns[distinct]
            nr = len(idx) - nl
            sl = rs[distinct]
            sr = rs[-1] - sl
            gain = sl**2 / nl + sr**2 / nr
            j = int(np.argmax(gain))
            thr = 0.5 * (xs_sorted[distinct[j]] + xs_sorted[distinct[j] + 1])
            if best is None or gain[j] > best[0] + 1e-15:
                best = (float(gain[j]), f, float(thr))
        if best is None:
            return node
        _, f, thr = best
        mask = X[idx, f] <= thr
        if not mask.any() or mask.all():
            return node
        self.tree.feature[node] = int(f)
        self.tree.threshold[node] = float(thr)
        self.tree.left[node] = self._grow(X, r, h, idx[mask], depth + 1)
        self.tree.right[node] = self._grow(X, r, h, idx[~mask], depth + 1)
        return node

    def predict(self, X) -> np.ndarray:
        return self.tree.predict(X)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


class GradientBoosting:
    """Additive depth-limited trees on the logistic loss."""

    def __init__(self, n_rounds: int = 200, max_depth: int = 3, learning_rate: float = 0.1):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.f0 = 0.0
        self.stages: list[_RegressionTree] = []

    def fit(self, X, y, sample_weight=None):
        X, y = _check_xy(X, y)
        p0 = np.clip(y.mean(), 1e-6, 1 - 1e-6)
        self.f0 = float(np.log(p0 / (1 - p0)))
        f = np.full(len(y), self.f0)
        self.stages = []
        for _ in range(self.n_rounds):
            p = _sigmoid(f)
            residual = y - p
            hessian = p * (1 - p)
            tree = _RegressionTree(self.max_depth).fit(X, residual, hessian)
            f = f + self.learning_rate * tree.predict(X)
            self.stages.append(tree)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        f = np.full(X.shape[0], self.f0)
        for tree in self.stages:
            f = f + self.learning_rate * tree.predict(X)
        return _sigmoid(f)

    def to_state(self) -> dict:
        return {"f0": self.f0, "stages": [t.tree.to_state() for t in self.stages]}

    def from_state(self, state: dict):
        self.f0 = float(state["f0"])
        self.stages = []
        for s in state["stages"]:
            tree = _RegressionTree(self.max_depth)
            tree.tree = _Tree.from_state(s)
            self.stages.append(tree)
        return self


class KNearest:
    """k-NN with probability = toxic fraction among the k nearest rows.

    Distance ties resolve by training-row index via a stable sort.
    """

    def __init__(self, k: int = 5):
        self.k = k
        self.X = None
        self.y = None

    def fit(self, X, y, sample_weight=None):
        X, y = _check_xy(X, y)
        if len(y) < self.k:
            raise DataError(f"need at least k={self.k} training rows")
        self.X = X
        self.y = y
        return self

    def predict_proba(self, Xq) -> np.ndarray:
        Xq = np.asarray(Xq, dtype=float)
        out = np.empty(Xq.shape[0])
        # chunked to bound the distance-matrix footprint
        step = max(1, int(2e7 // max(self.X.shape[0], 1)))
        for s in range(0, Xq.shape[0], step):
            block = Xq[s : s + step]
            d2 = (
                (block**2).sum(axis=1)[:, None]
                - 2 * block @ self.X.T
                + (self.X**2).sum(axis=1)[None, :]
            )
            idx = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
            out[s : s + step] = self.y[idx].mean(axis=1)
        return out

    def to_state(self) -> dict:
        return {"X": self.X.tolist(), "y": self.y.tolist(), "k": self.k}

    def from_state(self, state: dict):
        self.X = np.asarray(state["X"], dtype=float)
        self.y = np.asarray(state["y"], dtype=np.int64)
        self.k = int(state["k"])
        return self


class LogisticRegressionGD:
    """L2-regularized logistic regression fitted by plain gradient descent.

    The step size is 1 / L for the logistic-loss Lipschitz bound
    L = ||X||^2 / (4n) + l2, and iteration stops when the gradient's
    max-norm falls below the tolerance.
    """

    def __init__(self, l2: float = 1e-4, tol: float = 1e-6, max_iter: int = 20_000):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.coef = None
        self.intercept = 0.0

    def fit(self, X, y, sample_weight=None):
        X, y = _check_xy(X, y)
        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        # spectral-norm upper bound via the Frobenius norm
        lipschitz = (np.linalg.norm(X) ** 2 + n) / (4.0 * n) + self.l2
        step = 1.0 / lipschitz
        for _ in range(self.max_iter):
            p = _sigmoid(X @ w + b)
            err = p - y
            gw = X.T @ err / n + self.l2 * w
            gb = err.mean()
            if max(np.abs(gw).max(), abs(gb)) < self.tol:
                break
            w -= step * gw
            b -= step * gb
        self.coef = w
        self.intercept = float(b)
        return self

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(np.asarray(X, dtype=float) @ self.coef + self.intercept)

    def to_state(self) -> dict:
        return {"coef": self.coef.tolist(), "intercept": self.intercept}

    def from_state(self, state: dict):
        self.coef = np.asarray(state["coef"], dtype=float)
        self.intercept = float(state["intercept"])
        return self


class AdaBoostStumps:
    """Discrete two-class boosting over depth-1 stumps.

    Stump weights are ln((1 - err) / err); the predicted probability is
    the weighted vote share for the toxic class.
    """

    def __init__(self, n_stumps: int = 100):
        self.n_stumps = n_stumps
        self.stumps: list[DecisionTree] = []
        self.alphas: list[float] = []

    def fit(self, X, y, sample_weight=None):
        X, y = _check_xy(X, y)
        n = len(y)
        w = np.full(n, 1.0 / n)
        self.stumps, self.alphas = [], []
        for _ in range(self.n_stumps):
            stump = DecisionTree(max_depth=1)
            stump.fit(X, y, sample_weight=w)
            pred = (stump.predict_proba(X) >= 0.5).astype(np.int64)
            miss = pred != y
            err = float(w[miss].sum())
            if err >= 0.5:
                break
            err = max(err, 1e-10)
            alpha = float(np.log((1 - err) / err))
            self.stumps.append(stump)
            self.alphas.append(alpha)
            w = w * np.exp(alpha * miss)
            w /= w.sum()
            if err <= 1e-10:
                break
        if not self.stumps:
            # no stump beat chance: keep a single majority-vote stump
            stump = DecisionTree(max_depth=1)
            stump.fit(X, y)
            self.stumps = [stump]
            self.alphas = [1.0]
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        votes = np.zeros(X.shape[0])
        for stump, alpha in zip(self.stumps, self.alphas):
            votes += alpha * (stump.predict_proba(X) >= 0.5)
        return votes / sum(self.alphas)

    def to_state(self) -> dict:
        return {
            "stumps": [s.to_state() for s in self.stumps],
            "alphas": self.alphas,
        }

    def from_state(self, state: dict):
        self.stumps = [
            DecisionTree(max_depth=1).from_state(s) for s in state["stumps"]
        ]
        self.alphas = [float(a) for a in state["alphas"]]
        return self


def make_classifier(spec: ClassifierSpec):
    """Instantiate a learner with per-algorithm defaults filled in."""
    alg = spec.algorithm
    if alg == "rf":
        forest = RandomForest(spec.trees or 200, spec.depth or 12, seed=spec.seed)
        return forest
    if alg == "ert":
        forest = ExtraTrees(spec.trees or 200, spec.depth or 12, seed=spec.seed)
        return forest
    if alg == "gbt":
        return GradientBoosting(
            spec.trees or 200, spec.depth or 3, spec.learning_rate or 0.1
        )
    if alg == "knn":
        return KNearest(spec.k)
    if alg == "lr":
        return LogisticRegressionGD(l2=spec.l2)
    if alg == "adb":
        return AdaBoostStumps(spec.trees or 100)
    if alg == "dt":
        return DecisionTree(max_depth=spec.depth or 12)
    raise ConfigError(f"unknown algorithm {alg!r}")


def preset_spec(name: str, seed: int = 0, trees: int | None = None) -> ClassifierSpec:
    """Look up a preset by name, optionally overriding seed and size."""
    if name not in PRESETS:
        raise ConfigError(f"unknown classifier preset {name!r}")
    spec = replace(PRESETS[name], seed=seed)
    if trees is not None:
        spec = replace(spec, trees=trees)
    return spec
