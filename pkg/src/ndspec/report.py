"""Diagnostics record shared by the factorization stages and the driver."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field


@dataclass
class FactorizationReport:
    residual: float = 0.0  # max over grid of ||S - S+ S+*||_2
    scale: float = 0.0  # max over grid of ||S||_2
    det_drift: float = 0.0  # relative, determinant conservation across stages
    unitarity_dev: float = 0.0  # max ||U U* - I|| over every unitary built
    det_unitary_dev: float = 0.0  # max |det U_m - 1| over the structured unitaries
    outer_gap: float = 0.0  # |mean log|det S+| - log|det S+(0)||
    logdet_gap: float = 0.0  # |mean log det S - 2 mean log|det S+||
    analytic_leakage: float = 0.0  # relative coefficient energy outside the half-plane
    product_leakage: float = 0.0  # relative negative-degree energy of F_-^{n} U
    stage_orders: list = field(default_factory=list)
    grid: list = field(default_factory=list)
    min_f0_ratio: float = math.inf  # min over slices of |f_m^{n}(0)| / ||f_m^{n}||
    flagged_slices: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    status: str = "ok"
    message: str = ""

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual

    def passes(self, tol: float) -> bool:
        """Residual and analytic-type checks, the CLI's exit criterion."""
        return self.status == "ok" and self.relative_residual <= tol and self.analytic_leakage <= tol

    def merge_stage(self, other: "FactorizationReport", **extra):
        """Fold a stage's unitary diagnostics into this report."""
        self.unitarity_dev = max(self.unitarity_dev, other.unitarity_dev)
        self.det_unitary_dev = max(self.det_unitary_dev, other.det_unitary_dev)
        self.product_leakage = max(self.product_leakage, other.product_leakage)
        self.min_f0_ratio = min(self.min_f0_ratio, other.min_f0_ratio)
        self.flagged_slices.extend(other.flagged_slices)
        self.stages.append({**extra, "residual": other.residual, "scale": other.scale,
                            "unitarity_dev": other.unitarity_dev,
                            "det_unitary_dev": other.det_unitary_dev,
                            "product_leakage": other.product_leakage})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["relative_residual"] = self.relative_residual
        if math.isinf(out["min_f0_ratio"]):
            out["min_f0_ratio"] = None
        return out
