"""Named interpolator handles.

A handle bundles one estimation method with its parameters and exposes
both faces of it: ``apply`` evaluates a single window (pure Python, the
reference semantics) and ``method_id``/``engine_params`` drive the
compiled sliding-window engine. The two faces are bit-identical by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import _engine
from .bfstar import BfStarParams, bf_star
from .depthmap import WindowSample
from .interpolators import IdwParams, VariogramParams, bilateral, idw, kriging, op_basic

#: methods evaluated through the sliding window (everything but Delaunay)
WINDOW_METHODS = ("ave", "min", "max", "med", "nea", "idw", "kri", "bf", "bfstar")

#: global triangulation methods handled by :mod:`lidar_upsample.delaunay`
DELAUNAY_METHODS = ("del_lin", "del_nea", "del_nat")

ALL_METHODS = WINDOW_METHODS + DELAUNAY_METHODS

_BASIC = {"ave": "average", "min": "min", "max": "max",
          "med": "median", "nea": "nearest"}

_METHOD_IDS = {
    "ave": _engine.METHOD_AVERAGE,
    "min": _engine.METHOD_MIN,
    "max": _engine.METHOD_MAX,
    "med": _engine.METHOD_MEDIAN,
    "nea": _engine.METHOD_NEAREST,
    "idw": _engine.METHOD_IDW,
    "kri": _engine.METHOD_KRIGING,
    "bf": _engine.METHOD_BILATERAL,
    "bfstar": _engine.METHOD_BFSTAR,
}


@dataclass(frozen=True)
class Interpolator:
    name: str
    idw_params: IdwParams = field(default_factory=IdwParams)
    variogram: VariogramParams = field(default_factory=VariogramParams)
    bfstar_params: BfStarParams = field(default_factory=BfStarParams)

    @property
    def method_id(self):
        return _METHOD_IDS[self.name]

    def engine_params(self):
        if self.name == "idw":
            return [self.idw_params.p]
        if self.name == "kri":
            vg = self.variogram
            return [vg.nugget,
                    vg.sill if vg.sill is not None else math.nan,
                    vg.range_len if vg.range_len is not None else math.nan]
        if self.name == "bfstar":
            bp = self.bfstar_params
            return [bp.epsilon, float(bp.min_pts), bp.thr]
        return []

    def apply(self, w: WindowSample):
        """Evaluate one window; None when the window is empty."""
        if self.name in _BASIC:
            return op_basic(_BASIC[self.name], w)
        if self.name == "idw":
            return idw(w, self.idw_params)
        if self.name == "kri":
            return kriging(w, self.variogram)
        if self.name == "bf":
            return bilateral(w)
        return bf_star(w, self.bfstar_params)


def make_interpolator(name, *, idw_p=2.0, nugget=0.0, sill=None, range_len=None,
                      epsilon=0.08, min_pts=2, thr=1.0) -> Interpolator:
    """Build a window interpolator handle from flat parameter values."""
    if name not in WINDOW_METHODS:
        raise ValueError(
            f"unknown window method {name!r}; expected one of {WINDOW_METHODS}")
    return Interpolator(
        name=name,
        idw_params=IdwParams(p=idw_p),
        variogram=VariogramParams(nugget=nugget, sill=sill, range_len=range_len),
        bfstar_params=BfStarParams(epsilon=epsilon, min_pts=min_pts, thr=thr),
    )
