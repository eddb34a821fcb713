"""Compare inferred mobility with the original, on positions and on contacts."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mobinfer.errors import DomainError
from mobinfer.mobility import MovementTrace, frame_time, pairwise_distances
from mobinfer.synthetic import extract_contacts
from mobinfer.trace import ContactSchedule, ContactTrace


def pairwise_distance_correlation(original: MovementTrace, inferred: MovementTrace) -> float:
    """Pearson correlation of all (pair, frame) distances, each in its own geometry.

    Traces must share node count and dt; the longer one is truncated.
    """
    if original.node_count != inferred.node_count:
        raise DomainError(
            f"node counts differ: {original.node_count} vs {inferred.node_count}"
        )
    if not math.isclose(original.dt, inferred.dt, rel_tol=1e-12):
        raise DomainError(f"frame spacing differs: {original.dt} vs {inferred.dt}")
    frames = min(original.frame_count, inferred.frame_count)
    n = original.node_count
    if n < 2:
        raise DomainError("correlation needs at least two nodes")
    iu, ju = np.triu_indices(n, k=1)

    def chunks():
        step = max(1, 2_000_000 // (n * n))
        for s in range(0, frames, step):
            e = min(s + step, frames)
            a = pairwise_distances(original.geometry, original.frames[s:e])[:, iu, ju]
            b = pairwise_distances(inferred.geometry, inferred.frames[s:e])[:, iu, ju]
            yield a.ravel(), b.ravel()

    # two passes keep the centered sums accurate on long traces
    count, sa, sb = 0, 0.0, 0.0
    for a, b in chunks():
        count += a.size
        sa += a.sum()
        sb += b.sum()
    ma, mb = sa / count, sb / count
    saa = sbb = sab = 0.0
    for a, b in chunks():
        a = a - ma
        b = b - mb
        saa += a @ a
        sbb += b @ b
        sab += a @ b
    if saa == 0 or sbb == 0:
        raise DomainError("pairwise distances have zero variance; correlation undefined")
    return float(np.clip(sab / math.sqrt(saa * sbb), -1.0, 1.0))


@dataclass
class ContactAccuracy:
    """Per-frame contact comparison. Percentages are NaN where no contact exists."""

    times: np.ndarray
    existing: np.ndarray
    missed: np.ndarray
    added: np.ndarray

    @property
    def missed_pct(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.existing > 0, 100.0 * self.missed / self.existing, np.nan)

    @property
    def added_pct(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.existing > 0, 100.0 * self.added / self.existing, np.nan)

    @property
    def mean_missed_pct(self) -> float:
        return _nanmean(self.missed_pct)

    @property
    def mean_added_pct(self) -> float:
        return _nanmean(self.added_pct)


def _nanmean(x: np.ndarray) -> float:
    x = x[~np.isnan(x)]
    return float(x.mean()) if x.size else math.nan


def contact_accuracy(
    original: ContactTrace, inferred_mobility: MovementTrace, r: float
) -> ContactAccuracy:
    """Missed and added contacts for every inferred frame inside [0, duration).

    Missed: pairs in contact in ``original`` but farther than ``r`` apart.
    Added: pairs not in contact but within ``r``.
    """
    if inferred_mobility.node_count != original.node_count:
        raise DomainError("node counts differ between contact trace and mobility")
    n = original.node_count
    iu, ju = np.triu_indices(n, k=1)
    sweep = ContactSchedule(original)
    times, existing, missed, added = [], [], [], []
    for k in range(inferred_mobility.frame_count):
        t = frame_time(k, inferred_mobility.dt)
        if t >= original.duration:
            break
        in_contact, _ = sweep.at(t)
        c = in_contact[iu, ju]
        near = pairwise_distances(inferred_mobility.geometry, inferred_mobility.frames[k])[iu, ju] <= r
        times.append(t)
        existing.append(int(c.sum()))
        missed.append(int((c & ~near).sum()))
        added.append(int((~c & near).sum()))
    return ContactAccuracy(
        np.array(times, float), np.array(existing, int), np.array(missed, int), np.array(added, int)
    )


def inter_contact_times(trace: ContactTrace) -> list[float]:
    """Gaps between consecutive contacts of every pair, pair by pair in id order."""
    out = []
    for a, b in trace.pairs():
        starts, ends = trace.intervals(a, b)
        out.extend(s - e for s, e in zip(starts[1:], ends[:-1]))
    return out


def ccdf(samples) -> list[tuple[float, float]]:
    """(value, fraction of samples >= value) for each distinct value, ascending."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise DomainError("ccdf of an empty sample")
    values, first = np.unique(x, return_index=True)
    surv = (x.size - first) / x.size
    return list(zip(values.tolist(), surv.tolist()))


@dataclass
class EvaluationReport:
    accuracy: ContactAccuracy
    ict_samples_original: list[float]
    ict_samples_inferred: list[float]
    pearson_correlation: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def mean_missed_pct(self) -> float:
        return self.accuracy.mean_missed_pct

    @property
    def mean_added_pct(self) -> float:
        return self.accuracy.mean_added_pct

    def summary(self) -> dict:
        acc = self.accuracy
        tot = int(acc.existing.sum())
        out = {
            "pearson_correlation": self.pearson_correlation,
            "mean_missed_pct": self.mean_missed_pct,
            "mean_added_pct": self.mean_added_pct,
            "pooled_missed_pct": float(100.0 * acc.missed.sum() / tot) if tot else math.nan,
            "pooled_added_pct": float(100.0 * acc.added.sum() / tot) if tot else math.nan,
            "frames": len(acc.times),
            "frames_with_contacts": int((acc.existing > 0).sum()),
            "ict_count_original": len(self.ict_samples_original),
            "ict_count_inferred": len(self.ict_samples_inferred),
        }
        out.update(self.extra)
        return out


def evaluate(
    original_contacts: ContactTrace,
    inferred: MovementTrace,
    r: float,
    original_mobility: MovementTrace | None = None,
) -> EvaluationReport:
    """Both comparison paths: mobility vs mobility (when known) and contacts vs contacts.

    The inferred contact trace for the ICT comparison is sampled every frame.
    """
    corr = None
    if original_mobility is not None:
        corr = pairwise_distance_correlation(original_mobility, inferred)
    inferred_contacts = extract_contacts(inferred, r, inferred.dt)
    return EvaluationReport(
        accuracy=contact_accuracy(original_contacts, inferred, r),
        ict_samples_original=inter_contact_times(original_contacts),
        ict_samples_inferred=inter_contact_times(inferred_contacts),
        pearson_correlation=corr,
    )


# -- report files ----------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_summary(summary: dict) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in summary.items())


def format_per_frame(acc: ContactAccuracy) -> str:
    buf = io.StringIO()
    buf.write("t,existing,missed,added,missed_pct,added_pct\n")
    for t, c, m, a, mp, ap in zip(
        acc.times.tolist(), acc.existing.tolist(), acc.missed.tolist(), acc.added.tolist(),
        acc.missed_pct.tolist(), acc.added_pct.tolist(),
    ):
        buf.write(f"{t!r},{c},{m},{a},{mp!r},{ap!r}\n")
    return buf.getvalue()


def format_ccdf(points) -> str:
    return "value,fraction\n" + "".join(f"{v!r},{f!r}\n" for v, f in points)


def write_report(report: EvaluationReport, out_dir, prefix: str = "") -> dict[str, Path]:
    """Write summary, per-frame series and ICT CCDFs; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "summary": out_dir / f"{prefix}summary.txt",
        "per_frame": out_dir / f"{prefix}per_frame.csv",
    }
    paths["summary"].write_text(format_summary(report.summary()))
    paths["per_frame"].write_text(format_per_frame(report.accuracy))
    for side, samples in (("original", report.ict_samples_original),
                          ("inferred", report.ict_samples_inferred)):
        p = out_dir / f"{prefix}ict_ccdf_{side}.csv"
        p.write_text(format_ccdf(ccdf(samples)) if samples else "value,fraction\n")
        paths[f"ict_{side}"] = p
    return paths
