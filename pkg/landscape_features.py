"""
Landscape features - the 19 values that describe a successful move.

Population features (computed once per iteration from the employed-phase
parents P and children C):

    psd  mean pairwise Hamming distance of parents, / D
    pfd  mean pairwise absolute fitness difference of parents
    pnb  share of children beating their parent
    pic  share of children beating the global best
    pai  sum of relative improvements (f_c - f_p) / f_c over improving children, / N
    pcv  (max F_c - max F_p) / max F_p
    pcr  mean of H(x*, p_i) - H(x*, c_i), / D
    eap  std(F_p) * sum over improving children of |max F_p - f_c|, / N
    evp  eap * pic
    atn  mean trial counter, / trial_max
    pdd  largest Hamming distance between any two members of P and C, / D

Individual features (per move):

    idg  H(x*, p) / D          idp  H(p, c) / D
    ifg  (f* - f_c) / f*       ifp  (f_c - f_p) / f_c
    idb  H(pbest, p) / D       idw  H(pworst, p) / D
    itn  trial / trial_max     osr  successes / uses of the operator

x* is the best solution found so far. Degenerate denominators yield 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import pdist

POPULATION_FEATURES = ("psd", "pfd", "pnb", "pic", "pai", "pcv", "pcr",
                       "eap", "evp", "atn", "pdd")
INDIVIDUAL_FEATURES = ("idg", "idp", "ifg", "ifp", "idb", "idw", "itn", "osr")
FEATURE_NAMES = POPULATION_FEATURES + INDIVIDUAL_FEATURES

EAP_VARIANTS = ("literal", "divide")


class FeatureError(ValueError):
    pass


class FeatureVector(NamedTuple):
    psd: float
    pfd: float
    pnb: float
    pic: float
    pai: float
    pcv: float
    pcr: float
    eap: float
    evp: float
    atn: float
    pdd: float
    idg: float
    idp: float
    ifg: float
    ifp: float
    idb: float
    idw: float
    itn: float
    osr: float


@dataclass(frozen=True, eq=False)
class PopulationSnapshot:
    """Parents, their employed-phase children and the references of one iteration."""

    parents: np.ndarray
    children: np.ndarray
    parent_fitness: np.ndarray
    child_fitness: np.ndarray
    gbest: np.ndarray
    gbest_fitness: float
    trials: np.ndarray
    trial_max: int

    def __post_init__(self):
        n = len(self.parents)
        if self.children.shape != self.parents.shape:
            raise FeatureError("parents and children must have the same shape")
        if len(self.parent_fitness) != n or len(self.child_fitness) != n or len(self.trials) != n:
            raise FeatureError("fitness and trial arrays must have one entry per parent")
        if len(self.gbest) != self.parents.shape[1]:
            raise FeatureError("gbest length differs from the solution length")

    @property
    def size(self):
        return len(self.parents)

    @property
    def dims(self):
        return self.parents.shape[1]

    @property
    def pbest(self):
        """Best parent of the snapshot (first on ties)."""
        return self.parents[int(np.argmax(self.parent_fitness))]

    @property
    def pworst(self):
        """Worst parent of the snapshot (first on ties)."""
        return self.parents[int(np.argmin(self.parent_fitness))]


def hamming(a, b) -> int:
    """Number of positions where two bit vectors differ."""
    if len(a) != len(b):
        raise FeatureError(f"length mismatch: {len(a)} vs {len(b)}")
    return int(np.count_nonzero(np.asarray(a) != np.asarray(b)))


def _ratio(num, den):
    """Division that yields 0 for a zero denominator."""
    return num / den if den != 0 else 0.0


def population_features(s, eap_variant="literal") -> dict:
    """The eleven population features of a snapshot, in POPULATION_FEATURES order."""
    if s.size < 2:
        raise FeatureError(f"population features need N >= 2, got {s.size}")
    if eap_variant not in EAP_VARIANTS:
        raise FeatureError(f"unknown eap variant {eap_variant!r}")

    n, dims = s.size, s.dims
    fp = np.asarray(s.parent_fitness, dtype=float)
    fc = np.asarray(s.child_fitness, dtype=float)
    improving = fc > fp

    # pdist 'hamming' is already the fraction of differing positions
    psd = float(pdist(s.parents, "hamming").mean())
    pfd = float(pdist(fp[:, None], "cityblock").mean())
    pnb = float(improving.mean())
    pic = float(np.mean(fc > s.gbest_fitness))
    pai = float(np.sum((fc[improving] - fp[improving]) / fc[improving]) / n)
    pcv = _ratio(fc.max() - fp.max(), fp.max())

    to_parents = np.count_nonzero(s.parents != s.gbest, axis=1)
    to_children = np.count_nonzero(s.children != s.gbest, axis=1)
    pcr = float(np.mean(to_parents - to_children) / dims)

    sigma = float(np.std(fp))
    gap = float(np.sum(np.abs(fp.max() - fc[improving])))
    if eap_variant == "literal":
        eap = sigma * gap / n
    else:
        eap = _ratio(gap, sigma * n)
    evp = eap * pic

    atn = _ratio(float(np.mean(s.trials)), s.trial_max)
    pdd = float(pdist(np.vstack([s.parents, s.children]), "hamming").max())

    return dict(psd=psd, pfd=pfd, pnb=pnb, pic=pic, pai=pai, pcv=float(pcv), pcr=pcr,
                eap=float(eap), evp=float(evp), atn=float(atn), pdd=pdd)


def individual_features(parent, child, parent_fitness, child_fitness, snapshot,
                        trial, op_success, op_total) -> dict:
    """The eight per-move features, in INDIVIDUAL_FEATURES order."""
    dims = snapshot.dims
    fstar = float(snapshot.gbest_fitness)
    return dict(
        idg=hamming(snapshot.gbest, parent) / dims,
        idp=hamming(parent, child) / dims,
        ifg=float(_ratio(fstar - child_fitness, fstar)),
        ifp=float(_ratio(child_fitness - parent_fitness, child_fitness)),
        idb=hamming(snapshot.pbest, parent) / dims,
        idw=hamming(snapshot.pworst, parent) / dims,
        itn=float(_ratio(min(trial, snapshot.trial_max), snapshot.trial_max)),
        osr=float(_ratio(op_success, op_total)),
    )


def feature_vector(snapshot, parent, child, parent_fitness, child_fitness, trial,
                   op_success, op_total, population=None, eap_variant="literal") -> FeatureVector:
    """
    Assemble the 19-value vector of one move. Pass the iteration's cached
    population features as `population`; they are computed from the snapshot
    otherwise.
    """
    if population is None:
        population = population_features(snapshot, eap_variant)
    individual = individual_features(parent, child, parent_fitness, child_fitness,
                                     snapshot, trial, op_success, op_total)
    vector = FeatureVector(**population, **individual)
    if not np.all(np.isfinite(vector)):
        bad = [name for name, v in zip(FEATURE_NAMES, vector) if not np.isfinite(v)]
        raise FeatureError(f"non-finite features: {', '.join(bad)}")
    return vector
