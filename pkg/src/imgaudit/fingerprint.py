"""Per-dataset spectral fingerprints and the dataset similarity matrix."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDatasetError, IncompatibleFingerprintsError, DimensionError
from .raster import BBox, Pipeline, Raster, apply_pipeline, pipeline_from_descriptor
from .spectrum import profile_of


@dataclass(frozen=True)
class DatasetFingerprint:
    name: str
    mean: np.ndarray
    std: np.ndarray
    count: int
    pipeline: Pipeline
    padding: float
    normalized: bool

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64))
        if self.mean.shape != self.std.shape:
            raise DimensionError("fingerprint mean/std length mismatch")
        if self.count < 1:
            raise EmptyDatasetError("fingerprint needs at least one image")
        if np.any(self.std < 0):
            raise DimensionError("fingerprint std must be nonnegative")

    @property
    def n_bins(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class SimilarityMatrix:
    names: tuple
    values: np.ndarray
    max_d2: float


def fingerprint_dataset(images, p: float, pipe: Pipeline, normalize: bool,
                        name: str) -> DatasetFingerprint:
    """Profile every (Raster, BBox) pair through the pipeline; bin-wise mean and
    population std, accumulated in sequence order."""
    profiles = []
    for img, bbox in images:
        patch = apply_pipeline(img, bbox, p, pipe)
        profiles.append(profile_of(patch, normalize=normalize).bins)
    if not profiles:
        raise EmptyDatasetError(f"dataset {name!r} has no images")
    n_bins = len(profiles[0])
    if any(len(pr) != n_bins for pr in profiles):
        raise DimensionError("images produced profiles of different lengths")
    stack = np.stack(profiles)
    mean = stack.mean(axis=0)
    std = stack.std(axis=0)  # population std
    return DatasetFingerprint(name, mean, std, len(profiles), pipe, p, normalize)


def _check_compatible(fps) -> None:
    if len(fps) < 2:
        raise IncompatibleFingerprintsError("need at least 2 fingerprints")
    first = fps[0]
    for fp in fps[1:]:
        if fp.n_bins != first.n_bins:
            raise IncompatibleFingerprintsError(
                f"profile length mismatch: {fp.name} has {fp.n_bins}, "
                f"{first.name} has {first.n_bins}")
        if fp.pipeline != first.pipeline or fp.normalized != first.normalized:
            raise IncompatibleFingerprintsError(
                f"fingerprints {first.name!r} and {fp.name!r} use different settings")


def squared_distances(fps) -> np.ndarray:
    _check_compatible(fps)
    means = np.stack([fp.mean for fp in fps])
    diff = means[:, np.newaxis, :] - means[np.newaxis, :, :]
    return np.sum(diff * diff, axis=2)


def similarity_matrix(fps) -> SimilarityMatrix:
    """values[i][j] = max_d2 - ||mean_i - mean_j||^2, max over off-diagonal pairs."""
    d2 = squared_distances(fps)
    off = ~np.eye(len(fps), dtype=bool)
    max_d2 = float(d2[off].max())
    return SimilarityMatrix(tuple(fp.name for fp in fps), max_d2 - d2, max_d2)


def pairwise_spread(fps) -> float:
    """Mean squared profile distance over unordered dataset pairs."""
    d2 = squared_distances(fps)
    n = len(fps)
    iu = np.triu_indices(n, k=1)
    return float(d2[iu].mean())


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def fingerprint_to_csv(fp: DatasetFingerprint) -> str:
    lines = ["bin,mean,std"]
    lines += [f"{i},{m:.9g},{s:.9g}" for i, (m, s) in enumerate(zip(fp.mean, fp.std))]
    return "\n".join(lines) + "\n"


def fingerprint_metadata(fp: DatasetFingerprint) -> dict:
    return {
        "name": fp.name,
        "count": fp.count,
        "pipeline": fp.pipeline.descriptor(),
        "padding": fp.padding,
        "normalized": fp.normalized,
    }


def save_fingerprint(csv_path: str, fp: DatasetFingerprint) -> None:
    with open(csv_path, "w") as f:
        f.write(fingerprint_to_csv(fp))
    with open(csv_path.rsplit(".", 1)[0] + ".json", "w") as f:
        json.dump(fingerprint_metadata(fp), f, indent=2, sort_keys=True)
        f.write("\n")


def load_fingerprint(csv_path: str) -> DatasetFingerprint:
    with open(csv_path.rsplit(".", 1)[0] + ".json") as f:
        meta = json.load(f)
    means, stds = [], []
    with open(csv_path) as f:
        header = f.readline().strip()
        if header != "bin,mean,std":
            raise IncompatibleFingerprintsError(f"{csv_path}: not a fingerprint CSV")
        for line in f:
            if not line.strip():
                continue
            _, m, s = line.strip().split(",")
            means.append(float(m))
            stds.append(float(s))
    return DatasetFingerprint(
        meta["name"], np.array(means), np.array(stds), meta["count"],
        pipeline_from_descriptor(meta["pipeline"]), meta["padding"],
        meta["normalized"])


def similarity_to_csv(sm: SimilarityMatrix) -> str:
    lines = ["name," + ",".join(sm.names)]
    for name, row in zip(sm.names, sm.values):
        lines.append(name + "," + ",".join(f"{v:.9g}" for v in row))
    return "\n".join(lines) + "\n"
