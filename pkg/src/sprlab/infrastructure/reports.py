# src/sprlab/infrastructure/reports.py
"""
Salidas CSV (separador ';', listas para graficar). Los flotantes se
escriben con repr para que dos corridas iguales den archivos idénticos.
"""
from __future__ import annotations
import csv
from pathlib import Path
from typing import Any, Iterable, List, Sequence

import numpy as np

from sprlab.domain.group import format_word
from sprlab.domain.records import (
    ClosedGeodesic, DerivativeExperiment, ExponentEstimate, SprReport, StretchSample,
)


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=";", lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(c) for c in r])
    return path


def write_record(path: Path, record: dict) -> Path:
    """Registro de una sola fila (resúmenes y veredictos)."""
    return write_csv(path, list(record.keys()), [list(record.values())])


# -------------------- Por subcomando -------------------- #
def exponent_rows(dists: np.ndarray, est: ExponentEstimate, grid_step: float) -> List[list]:
    lo, hi = est.window
    d = np.sort(dists)
    Rs = np.arange(lo, hi + 0.5 * grid_step, grid_step)
    N = np.searchsorted(d, Rs, side="right")
    return [[float(R), int(n), float(np.log(n)) if n > 0 else None] for R, n in zip(Rs, N)]


def exponent_summary(est: ExponentEstimate) -> dict:
    return {"delta_hat": est.value, "residual": est.residual, "count": est.count,
            "window_lo": est.window[0], "window_hi": est.window[1],
            "secondary": est.secondary, "ratio_max": est.ratio_max}


def spr_rows(report: SprReport) -> List[list]:
    return [[R_W, e.value, e.residual, e.count] for R_W, e in report.delta_out_ladder]


def spr_summary(report: SprReport) -> dict:
    return {"verdict": report.verdict, "delta_full": report.delta_full.value,
            "delta_full_residual": report.delta_full.residual,
            "delta_infinity": report.delta_infinity, "gap": report.gap,
            "threshold": report.threshold}


def stretch_rows(samples: Sequence[StretchSample], norms: Sequence[float]) -> List[list]:
    return [[i, s.v.base.x, s.v.base.y, s.v.angle, s.value, n, s.fd_step, s.horizon]
            for i, (s, n) in enumerate(zip(samples, norms))]


STRETCH_HEADER = ["sample", "x", "y", "angle", "stretch", "norm", "fd_step", "horizon"]


def length_rows(geodesics: Sequence[ClosedGeodesic], metric_ids: Sequence[str],
                labels: Sequence[str]) -> List[list]:
    return [[format_word(g.rep, labels), g.length0] + [g.lengths.get(m) for m in metric_ids]
            for g in geodesics]


def derivative_rows(exp: DerivativeExperiment) -> List[list]:
    return [[r.eps, r.h.value, r.h.residual, r.I_forward, r.I_backward, r.bm_avg_phi]
            for r in exp.rungs]


DERIVATIVE_HEADER = ["eps", "h_estimate", "h_residual", "I_forward", "I_backward",
                     "bm_avg_phi"]


def derivative_bounds_rows(exp: DerivativeExperiment) -> List[list]:
    return [[r.eps, r.h.value, r.katok_lower, r.katok_upper, r.katok_ok, r.thurston, r.h_orbit]
            for r in exp.rungs]


def derivative_summary(exp: DerivativeExperiment) -> dict:
    return {"fd_slope": exp.fd_slope, "predicted_slope": exp.predicted_slope,
            "relative_error": exp.relative_error, "h0": exp.h0,
            "bm_avg_phi": exp.bm_avg_phi, "stretch_slope": exp.stretch_slope,
            "katok_ok": all(r.katok_ok for r in exp.rungs),
            "failures": len(exp.failures), "spr_warning": exp.spr_warning}
