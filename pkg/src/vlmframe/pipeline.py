"""Oversample, difference, fit and transform in one call."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable

from .fields import RasterGrid, VelocityField
from .frame_fit import Correction, PolynomialModel, fit_polynomial, pixel_corrections
from .resample import DifferenceField, Oversampled, difference_field, oversample_model


@dataclass(frozen=True, eq=False)
class FrameTie:
    model: PolynomialModel
    transformed: VelocityField
    correction: Correction
    oversampled: Oversampled
    diff: DifferenceField


def tie_frame(local: VelocityField, grid: RasterGrid,
              degrees: Iterable[int] = (1, 2, 3)) -> Dict[int, FrameTie]:
    """Move ``local`` into the frame of ``grid`` with one fit per degree.

    Pixels the grid cannot resolve are passed through uncorrected and
    flagged in ``correction.applied``.
    """
    over = oversample_model(grid, local)
    diff = difference_field(local, over)
    out = {}
    for k in degrees:
        model = fit_polynomial(diff, k)
        corr = pixel_corrections(local, model, over.excluded_ids)
        transformed = local.replace(value=local.value + corr.correction, frame="global")
        out[k] = FrameTie(model, transformed, corr, over, diff)
    return out
