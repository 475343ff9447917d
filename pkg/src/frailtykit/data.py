"""Clustered right-censored survival data: records and array preparation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class ObservationRecord:
    """One subject in a clustered survival dataset.

    Parameters
    ----------
    cluster_id : int
        Integer label of the cluster (family, centre, pair, ...) the
        subject belongs to.
    time : float
        Observed follow-up time, strictly positive.
    status : int
        1 if the event was observed at `time`, 0 if right-censored.
    covariates : sequence of float
        Covariate values; must have the same length for every record in
        a dataset.
    """

    cluster_id: int
    time: float
    status: int
    covariates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cluster_id", int(self.cluster_id))
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "status", int(self.status))
        object.__setattr__(
            self, "covariates", tuple(float(v) for v in self.covariates)
        )
        if not self.time > 0:
            raise ValueError(f"time must be positive, got {self.time}")
        if self.status not in (0, 1):
            raise ValueError(f"status must be 0 or 1, got {self.status}")


def n_covariates(dataset: Sequence[ObservationRecord]) -> int:
    """Covariate dimension of a validated dataset."""
    if not dataset:
        raise ValueError("dataset is empty")
    return len(dataset[0].covariates)


def validate_dataset(dataset: Sequence[ObservationRecord]) -> int:
    """Check dataset-level invariants and return the covariate dimension."""
    if not dataset:
        raise ValueError("dataset is empty")
    p = len(dataset[0].covariates)
    for i, rec in enumerate(dataset):
        if len(rec.covariates) != p:
            raise ValueError(
                f"record {i}: covariate length {len(rec.covariates)} differs "
                f"from {p} seen earlier in the dataset"
            )
    return p


@dataclass(frozen=True)
class ClusteredArrays:
    """Dataset flattened to numpy arrays in canonical order.

    Canonical order sorts clusters by ascending id and records within a
    cluster by (time, status, covariates).  Summation in this fixed order
    makes likelihood values invariant to permutations of the input records.
    """

    time: np.ndarray           # (n,)
    status: np.ndarray         # (n,) 0.0/1.0
    covariates: np.ndarray     # (n, p)
    cluster_ids: np.ndarray    # (n_clusters,) sorted unique ids
    cluster_start: np.ndarray  # (n_clusters,) offsets into the record arrays
    n_events: np.ndarray       # (n_clusters,) events per cluster

    @property
    def n_records(self) -> int:
        return self.time.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.cluster_ids.shape[0]


def as_clustered_arrays(dataset: Iterable[ObservationRecord]) -> ClusteredArrays:
    """Flatten records into canonically ordered arrays grouped by cluster."""
    records = list(dataset)
    p = validate_dataset(records)

    cluster = np.array([r.cluster_id for r in records], dtype=np.int64)
    time = np.array([r.time for r in records], dtype=float)
    status = np.array([r.status for r in records], dtype=float)
    cov = np.array([r.covariates for r in records], dtype=float).reshape(len(records), p)

    # lexsort: last key is primary
    keys = tuple(cov[:, j] for j in reversed(range(p))) + (status, time, cluster)
    order = np.lexsort(keys)
    cluster, time, status, cov = cluster[order], time[order], status[order], cov[order]

    ids, start = np.unique(cluster, return_index=True)
    events = np.add.reduceat(status, start)
    return ClusteredArrays(
        time=time,
        status=status,
        covariates=cov,
        cluster_ids=ids,
        cluster_start=start,
        n_events=events,
    )
