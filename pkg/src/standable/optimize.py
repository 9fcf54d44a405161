"""Gradient-descent refinement of vertex positions.

Adam over raw vertex coordinates with the loss schedule: smoothness,
stability and fidelity terms every iteration, the simulation-backed
standability term every ``stand_stride`` iterations.  The placement is
re-canonicalized each iteration so the tilt-probe pivot convention keeps
holding as vertices move, and a forward-simulation certification check
every ``check_stride`` iterations stops the run early once the mesh stands.
"""

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .evaluate import certify
from .gradsim import AdjointError
from .losses import LossWeights, TiltProbe, total_loss
from .mesh import MeshError, TriMesh
from .objectives import (
    bottom_laplacian_term,
    canonicalize,
    fidelity_term,
    normal_term,
    stable_term,
    stand_term,
)
from .platforms import Platform
from .simulation import (
    CONTACT_BAND_FRACTION,
    CONTACT_POINT_CAP,
    SimParams,
    SimulationError,
)


@dataclass
class OptimizerConfig:
    """Knobs of the refinement loop.

    The learning rate is expressed as a fraction of the bounding-box
    diagonal so behavior is scale-free; fidelity is normalized by the
    squared diagonal for the same reason.
    """

    max_iterations: int = 5000
    learning_rate_fraction: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    stand_stride: int = 10
    stand_horizon: float = 0.5
    stand_grad_clip_scale: float = 100.0
    check_stride: int = 250
    trd_threshold: float = 0.05
    displacement_cap_fraction: float = 0.15
    bottom_band_fraction: float = 0.02
    contact_band_fraction: float = CONTACT_BAND_FRACTION
    contact_cap: int = CONTACT_POINT_CAP
    full_vertex_contact: bool = False
    max_lr_halvings: int = 5
    weights: LossWeights = field(default_factory=LossWeights)
    sim: SimParams = field(default_factory=SimParams)
    probe: TiltProbe = field(default_factory=TiltProbe)

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.learning_rate_fraction <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.stand_stride < 1 or self.check_stride < 1:
            raise ValueError("strides must be >= 1")


@dataclass
class RunHistory:
    """One record per executed iteration plus the run outcome."""

    records: list = field(default_factory=list)
    early_stop: str = ""
    distorted: bool = False
    mean_displacement: float = 0.0
    final_certification: dict = field(default_factory=dict)

    def weighted_totals(self):
        return np.array([r["weighted_total"] for r in self.records])

    def to_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")
            fh.write(json.dumps({
                "early_stop": self.early_stop,
                "distorted": self.distorted,
                "mean_displacement": self.mean_displacement,
                "final_certification": self.final_certification,
            }) + "\n")


def _contact_kwargs(config):
    return {
        "band_fraction": config.contact_band_fraction,
        "cap": config.contact_cap,
        "full_vertex_contact": config.full_vertex_contact,
    }


def optimize(mesh, config=None, platform=None):
    """Refine vertex positions until the mesh stands (or budget runs out).

    Returns ``(optimized_mesh, history)``.  Topology is never touched; only
    vertex positions move.  Runs are deterministic for a fixed config.
    """
    config = config or OptimizerConfig()
    platform = platform or Platform.ground()
    report = mesh.validate()
    if not report.ok:
        raise MeshError("; ".join(report.errors))

    density = config.sim.density
    canon, _ = canonicalize(mesh, density)
    verts = canon.vertices.copy()
    faces = canon.faces
    reference = canon
    ref_verts = verts.copy()
    diag = canon.bbox_diagonal()
    fid_scale = diag * diag
    lr = config.learning_rate_fraction * diag

    history = RunHistory()
    if config.max_iterations == 0:
        return canon, history

    m1 = np.zeros_like(verts)
    m2 = np.zeros_like(verts)
    halvings = 0
    adam_t = 0
    contact = _contact_kwargs(config)
    stand_params = replace(config.sim, end_time=config.stand_horizon)
    stand_clip = config.stand_grad_clip_scale / diag
    weights = config.weights
    start = time.perf_counter()
    last_good = verts.copy()
    stand_value = None

    for it in range(config.max_iterations):
        current = TriMesh(verts, faces)
        if it % config.check_stride == 0:
            cert = certify(
                current, config.sim, platform, config.probe,
                config.trd_threshold, **contact,
            )
            if cert["certified"]:
                history.early_stop = "certified"
                history.final_certification = cert
                break

        try:
            components = {}
            grads = {}
            components["stable"], grads["stable"], _ = stable_term(
                current, density, config.probe
            )
            components["normal"], grads["normal"], _ = normal_term(current)
            components["bottom_laplacian"], grads["bottom_laplacian"], _ = (
                bottom_laplacian_term(current, config.bottom_band_fraction)
            )
            fid_val, fid_grad, _ = fidelity_term(current, reference, density)
            components["fidelity"] = fid_val / fid_scale
            grads["fidelity"] = fid_grad / fid_scale
            if it % config.stand_stride == 0:
                stand_value, stand_grad, _ = stand_term(
                    current, stand_params, platform, **contact
                )
                # long-horizon adjoints through completed topples explode;
                # clip the term's norm, keeping its direction
                norm = np.linalg.norm(stand_grad)
                if norm > stand_clip:
                    stand_grad = stand_grad * (stand_clip / norm)
                components["stand"] = stand_value
                grads["stand"] = stand_grad
        except (SimulationError, AdjointError, MeshError) as exc:
            history.early_stop = f"aborted: {exc}"
            verts = last_good
            break

        value, mask = total_loss(components, weights, it, config.stand_stride)
        w = weights.as_dict()
        grad = np.zeros_like(verts)
        for name, g in grads.items():
            if mask[name]:
                grad += w[name] * g

        if not np.isfinite(grad).all():
            halvings += 1
            lr *= 0.5
            history.records.append({
                "iteration": it,
                "weighted_total": float(value),
                "skipped": True,
                "learning_rate": lr,
                "wall_time": time.perf_counter() - start,
            })
            if halvings > config.max_lr_halvings:
                history.early_stop = "aborted: non-finite gradients persisted"
                verts = last_good
                break
            continue
        halvings = 0
        last_good = verts.copy()

        adam_t += 1
        m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad
        m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad * grad
        m1_hat = m1 / (1.0 - config.beta1**adam_t)
        m2_hat = m2 / (1.0 - config.beta2**adam_t)
        verts = verts - lr * m1_hat / (np.sqrt(m2_hat) + config.eps)

        try:
            canon_mesh, _ = canonicalize(TriMesh(verts, faces), density)
        except MeshError as exc:
            history.early_stop = f"aborted: {exc}"
            verts = last_good
            break
        verts = canon_mesh.vertices.copy()

        record = {
            "iteration": it,
            "weighted_total": float(value),
            "grad_norm": float(np.linalg.norm(grad)),
            "learning_rate": lr,
            "wall_time": time.perf_counter() - start,
        }
        for name in components:
            record[name] = float(components[name])
        record["stand_included"] = bool(mask["stand"])
        history.records.append(record)
    else:
        history.early_stop = "max_iterations"

    result = TriMesh(verts, faces)
    if not history.final_certification:
        try:
            history.final_certification = certify(
                result, config.sim, platform, config.probe,
                config.trd_threshold, **contact,
            )
        except (SimulationError, MeshError) as exc:
            history.final_certification = {"error": str(exc)}

    disp = float(np.linalg.norm(verts - ref_verts, axis=1).mean())
    history.mean_displacement = disp
    history.distorted = disp > config.displacement_cap_fraction * diag
    return result, history
