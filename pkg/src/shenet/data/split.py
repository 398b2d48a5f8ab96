"""Patient-level cross-validation plans for the P0, P1 and PM protocols.

Pairs are named by ``(patient, t1)`` where ``t1`` is the 0-based position of
the pre-therapy cube in the patient's series; the post-therapy cube is ``t1 + 1``.

* P0: fold patients are unseen. Train on every consecutive pair of the other
  patients, test on each fold patient's first pair.
* P1: start from the P0 fold model, fine-tune on each fold patient's first
  pair, test on its second pair.
* PM: a single fold. The last two cubes of every patient form its test pair;
  training uses the consecutive pairs among the remaining cubes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMES = ("P0", "P1", "PM")
ROLES = ("train", "finetune", "test")


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class PlanEntry:
    fold: int
    role: str
    patient: str
    t1_index: int


@dataclass
class SplitPlan:
    scheme: str
    folds: list
    entries: list = field(default_factory=list)

    def pairs(self, fold: int, role: str) -> list:
        return [(e.patient, e.t1_index) for e in self.entries if e.fold == fold and e.role == role]

    def fold_ids(self) -> list:
        return sorted({e.fold for e in self.entries})

    def to_text(self) -> str:
        lines = [f"# scheme {self.scheme}"]
        for i, f in enumerate(self.folds):
            lines.append(f"# fold {i} " + " ".join(f))
        lines.append("fold,role,patient,t1_index")
        lines += [f"{e.fold},{e.role},{e.patient},{e.t1_index}" for e in self.entries]
        return "\n".join(lines) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text())
        return path

    @classmethod
    def from_text(cls, text: str) -> "SplitPlan":
        scheme, folds, entries = None, [], []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("# scheme"):
                scheme = line.split()[2]
            elif line.startswith("# fold"):
                folds.append(line.split()[3:])
            elif line.startswith("fold,"):
                continue
            else:
                f, role, pid, t = line.split(",")
                entries.append(PlanEntry(int(f), role, pid, int(t)))
        if scheme not in SCHEMES:
            raise SplitError(f"plan has unknown scheme {scheme!r}")
        return cls(scheme, folds, entries)

    @classmethod
    def load(cls, path) -> "SplitPlan":
        return cls.from_text(Path(path).read_text())


def partition(patients, n_folds: int = 5, seed: int = 0) -> list:
    """Shuffle patient ids with ``seed`` and cut into ``n_folds`` near-equal folds."""
    patients = list(patients)
    if len(set(patients)) != len(patients):
        raise SplitError("duplicate patient ids")
    if n_folds < 1 or len(patients) < n_folds:
        raise SplitError(f"need at least {n_folds} patients, got {len(patients)}")
    order = np.random.default_rng(seed).permutation(len(patients))
    return [[patients[i] for i in chunk] for chunk in np.array_split(order, n_folds)]


def make_split(patients, scheme: str, n_folds: int = 5, seed: int = 0, n_timepoints=6) -> SplitPlan:
    """Build a plan. ``n_timepoints`` is an int or a ``{patient: count}`` map."""
    scheme = scheme.upper().replace("-", "")
    if scheme not in SCHEMES:
        raise SplitError(f"unknown scheme {scheme!r}")
    patients = list(patients)
    counts = n_timepoints if isinstance(n_timepoints, dict) else {p: int(n_timepoints) for p in patients}
    need = {"P0": 2, "P1": 3, "PM": 4}[scheme]
    for p in patients:
        if counts.get(p, 0) < need:
            raise SplitError(f"{scheme} needs {need} timepoints per patient; {p} has {counts.get(p, 0)}")

    entries = []
    if scheme == "PM":
        if len(set(patients)) != len(patients):
            raise SplitError("duplicate patient ids")
        for p in patients:
            t = counts[p]
            entries += [PlanEntry(0, "train", p, i) for i in range(t - 3)]
            entries.append(PlanEntry(0, "test", p, t - 2))
        return SplitPlan(scheme, [list(patients)], entries)

    folds = partition(patients, n_folds, seed)
    for k, fold in enumerate(folds):
        held = set(fold)
        for p in patients:
            if p in held:
                continue
            entries += [PlanEntry(k, "train", p, i) for i in range(counts[p] - 1)]
        for p in fold:
            if scheme == "P0":
                entries.append(PlanEntry(k, "test", p, 0))
            else:
                entries.append(PlanEntry(k, "finetune", p, 0))
                entries.append(PlanEntry(k, "test", p, 1))
    return SplitPlan(scheme, folds, entries)


def check_plan(plan: SplitPlan, n_timepoints) -> None:
    """Raise :class:`SplitError` unless ``plan`` obeys its scheme's invariants."""
    counts = n_timepoints if isinstance(n_timepoints, dict) else None
    for k in plan.fold_ids():
        train = set(plan.pairs(k, "train"))
        test = plan.pairs(k, "test")
        test_patients = {p for p, _ in test}
        train_patients = {p for p, _ in train}
        if plan.scheme in ("P0", "P1") and test_patients & train_patients:
            raise SplitError(f"fold {k}: test patients appear in training")
        if plan.scheme == "P1":
            ft = plan.pairs(k, "finetune")
            if sorted(ft) != sorted((p, 0) for p in test_patients) or sorted(test) != sorted((p, 1) for p in test_patients):
                raise SplitError(f"fold {k}: P1 must fine-tune on (t1, t2) and test on (t2, t3)")
        if plan.scheme == "PM":
            for p, t in test:
                last = (counts[p] if counts else (n_timepoints)) - 1
                if t != last - 1:
                    raise SplitError(f"{p}: PM test pair must be the last two cubes")
                if any(q == p and t2 + 1 >= last - 1 for q, t2 in train):
                    raise SplitError(f"{p}: a held-out cube appears in training")
