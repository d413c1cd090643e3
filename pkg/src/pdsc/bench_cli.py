"""Benchmark harness: configure, run and report the reference experiments.

Four experiments are available, each runnable end-to-end from one config
file (plus CLI overrides) with plot-ready CSV artifacts per variant:

* ``tension``   rectangular sheet, uniform end traction, errors vs the
                closed-form uniaxial field,
* ``clamped``   square sheet stretched between fully clamped edges, mean
                tensile stress vs the finite-element reference,
* ``indent``    rigid circular punch pressed into a block under stick
                contact, force-depth curves vs the finite-element reference,
* ``calibrate`` bulk-amplitude calibration report for both radial profiles
                and both calibration modes.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 every requested bond-model variant of ``indent`` aborted on inversion.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analytic, fem_ref, geometry, material, pd_core
from .geometry import Domain, GridSpec, GeometryError
from .material import ElasticParams, MaterialModel
from .pd_core import BCSet, SolverFailure


class ConfigError(ValueError):
    """Malformed configuration file, key or value."""


VARIANTS = {
    "tension": ("uncorrected", "corrected"),
    "clamped": ("fem", "uncorrected", "corrected", "virtual_nodes",
                "virtual_nodes_corrected_sides"),
    "indent": ("fem", "corrected", "uncorrected"),
    "calibrate": (),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    variants: tuple[str, ...]
    size_x: float
    size_y: float
    spacing: float
    horizon: float
    profile: str = "constant"
    youngs_modulus: float = 1000.0       # MPa
    thickness: float = 1.0               # mm
    traction: float = 1.0                # MPa, tension experiment
    strain: float = 0.01                 # clamped experiment
    indenter_radius: float = 15.0        # mm
    depth_max: float = 2.0               # mm
    depth_steps: int = 100
    calibration: str = "discrete"
    tol: float = 1e-10
    method: str = "auto"
    zero_tol: float = 1e-12              # symmetry-zero exclusion, mm
    out: str = "runs"
    dump_bonds: bool = False

    @property
    def m_ratio(self) -> float:
        return self.spacing / self.horizon

    def validate(self) -> None:
        if self.experiment not in VARIANTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        bad = [v for v in self.variants if v not in VARIANTS[self.experiment]]
        if bad:
            raise ConfigError(f"variant(s) {bad} invalid for {self.experiment}")
        if self.spacing <= 0 or self.horizon <= 0:
            raise ConfigError("spacing and horizon must be positive")
        if self.profile not in material.PROFILE_KINDS:
            raise ConfigError(f"unknown profile {self.profile!r}")
        if self.calibration not in ("discrete", "continuum"):
            raise ConfigError(f"unknown calibration {self.calibration!r}")
        if self.depth_steps < 1:
            raise ConfigError("depth_steps must be at least 1")


def default_config(experiment: str) -> ExperimentConfig:
    if experiment == "tension":
        return ExperimentConfig(
            experiment="tension", variants=VARIANTS["tension"],
            size_x=50.0, size_y=100.0, spacing=1.0, horizon=5.0,
            out="runs/tension")
    if experiment == "clamped":
        horizon = 1.0
        return ExperimentConfig(
            experiment="clamped", variants=VARIANTS["clamped"],
            size_x=4 * horizon, size_y=4 * horizon,
            spacing=horizon / 6, horizon=horizon, out="runs/clamped")
    if experiment == "indent":
        return ExperimentConfig(
            experiment="indent", variants=VARIANTS["indent"],
            size_x=40.0, size_y=40.0, spacing=0.25, horizon=1.5,
            out="runs/indent")
    if experiment == "calibrate":
        return ExperimentConfig(
            experiment="calibrate", variants=(),
            size_x=50.0, size_y=100.0, spacing=1.0, horizon=5.0,
            out="runs/calibrate")
    raise ConfigError(f"unknown experiment {experiment!r}")


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    raw = raw.strip()
    kind = _FIELD_TYPES[key]
    if key == "variants":
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean for {key}, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def read_config_file(path) -> dict:
    """Parse a ``key = value`` text file; '#' starts a comment."""
    overrides = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        try:
            overrides[key] = _coerce(key, raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return overrides


def load_config(experiment: str | None = None, config_path=None,
                overrides: dict | None = None) -> ExperimentConfig:
    file_overrides = read_config_file(config_path) if config_path else {}
    name = experiment or file_overrides.get("experiment")
    if name is None:
        raise ConfigError("no experiment given on the command line or in the config")
    cfg = default_config(name)
    merged = {k: v for k, v in file_overrides.items() if k != "experiment"}
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = replace(cfg, **merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


@dataclass
class RunSummary:
    experiment: str
    config: dict
    metrics: dict
    artifacts: list[str] = field(default_factory=list)
    wall_seconds: float = 0.0

    def to_text(self) -> str:
        lines = [f"experiment = {self.experiment}", ""]
        lines.append("[config]")
        lines += [f"{k} = {v}" for k, v in self.config.items()]
        lines.append("")
        lines.append("[metrics]")
        lines += [f"{k} = {_fmt(v)}" for k, v in self.metrics.items()]
        lines.append("")
        lines.append("[artifacts]")
        lines += list(self.artifacts)
        lines.append("")
        lines.append(f"wall_seconds = {self.wall_seconds:.3f}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: Path) -> None:
        (out_dir / "summary.txt").write_text(self.to_text())


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _config_echo(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["variants"] = ",".join(cfg.variants)
    d["m_ratio"] = cfg.m_ratio
    return d


# ---------------------------------------------------------------------------
# CSV artifacts
# ---------------------------------------------------------------------------

def write_fields_csv(path, positions, u, w, source: str) -> None:
    with open(path, "w") as f:
        f.write("id,x,y,ux,uy,W,source\n")
        for k in range(len(positions)):
            f.write(f"{k},{positions[k, 0]:.17g},{positions[k, 1]:.17g},"
                    f"{u[k, 0]:.17g},{u[k, 1]:.17g},{w[k]:.17g},{source}\n")


def write_errors_csv(path, positions, err, included) -> None:
    with open(path, "w") as f:
        f.write("id,x,y,err_ux,err_uy,included_ux,included_uy\n")
        for k in range(len(positions)):
            f.write(f"{k},{positions[k, 0]:.17g},{positions[k, 1]:.17g},"
                    f"{err[k, 0]:.17g},{err[k, 1]:.17g},"
                    f"{int(included[k, 0])},{int(included[k, 1])}\n")


def write_curve_csv(path, depths, forces, source: str) -> None:
    with open(path, "w") as f:
        f.write("depth_mm,force_N,source\n")
        f.write(f"0,0,{source}\n")
        for d, fo in zip(depths, forces):
            f.write(f"{d:.17g},{fo:.17g},{source}\n")


def write_stress_csv(path, rows) -> None:
    with open(path, "w") as f:
        f.write("variant,stress_mpa\n")
        for name, s in rows:
            f.write(f"{name},{s:.17g}\n")


def _edge_weights(coords: np.ndarray) -> np.ndarray:
    """Tributary lengths of sorted nodes along an edge (trapezoidal rule)."""
    w = np.zeros(len(coords))
    if len(coords) == 1:
        return w  # a single node cannot carry a line load consistently
    w[1:-1] = 0.5 * (coords[2:] - coords[:-2])
    w[0] = 0.5 * (coords[1] - coords[0])
    w[-1] = 0.5 * (coords[-1] - coords[-2])
    return w


def edge_traction_loads(bcs: BCSet, node_ids: np.ndarray, positions: np.ndarray,
                        axis: int, traction: float, thickness: float) -> None:
    """Distribute a uniform traction over an axis-aligned edge's nodes.

    End nodes carry half weight so the resultant equals traction times the
    discrete edge length; interior nodes carry a full spacing.
    """
    along = 1 - axis
    order = np.argsort(positions[node_ids, along])
    ids = np.asarray(node_ids)[order]
    w = _edge_weights(positions[ids, along])
    force = traction * thickness * w
    if axis == 0:
        bcs.add_load(ids, fx=force)
    else:
        bcs.add_load(ids, fy=force)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _pd_setup(cfg: ExperimentConfig, domain: Domain, spec: GridSpec):
    nodes = geometry.build_grid(domain, spec)
    bonds = geometry.build_bonds(nodes, cfg.horizon)
    elastic = ElasticParams(cfg.youngs_modulus, cfg.thickness)
    mat = MaterialModel.calibrated(elastic, cfg.horizon, cfg.profile,
                                   cfg.calibration, cfg.spacing)
    return nodes, bonds, mat


def _calibration_metrics(mat_model: MaterialModel, spacing: float) -> dict:
    """Bulk amplitude plus the residual of the affine energy match."""
    lattice = material.discrete_hooke(mat_model, spacing)
    target = material.hooke_plane_stress(mat_model.elastic)
    return {"c0": mat_model.bulk_amplitude,
            "calibration_residual": abs(lattice.xxxx / target.xxxx - 1.0)}


def _surfaces_for(variant: str):
    if variant == "corrected":
        return "all"
    if variant == "virtual_nodes_corrected_sides":
        return ("-x", "+x")
    return None


def run_tension(cfg: ExperimentConfig) -> RunSummary:
    """Uniaxial traction on a rectangular sheet vs the closed-form field."""
    t0 = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    domain = Domain.rectangle(cfg.size_x, cfg.size_y, thickness=cfg.thickness)
    spec = GridSpec.covering(domain, cfg.spacing)
    nodes, bonds, mat = _pd_setup(cfg, domain, spec)
    lattice_hooke = material.discrete_hooke(mat, cfg.spacing)
    e_eff, nu_eff = material.effective_constants(lattice_hooke)
    reference = analytic.uniaxial_solution(e_eff, nu_eff, cfg.traction)
    u_ref = reference(nodes.positions)

    bcs = BCSet(nodes.n)
    top = nodes.on_side(domain, "+y")
    bottom = nodes.on_side(domain, "-y")
    edge_traction_loads(bcs, top, nodes.positions, 1, cfg.traction, cfg.thickness)
    edge_traction_loads(bcs, bottom, nodes.positions, 1, -cfg.traction, cfg.thickness)
    # pin rigid modes on the symmetry axis where the reference is zero anyway
    center = int(np.argmin(np.linalg.norm(nodes.positions, axis=1)))
    axis_nodes = np.where(np.abs(nodes.positions[:, 0]) < 1e-9 * cfg.spacing)[0]
    partner = int(axis_nodes[np.argmax(nodes.positions[axis_nodes, 1])])
    bcs.loads[center] = 0.0
    bcs.loads[partner, 0] = 0.0
    bcs.prescribe([center], ux=0.0, uy=0.0)
    bcs.prescribe([partner], ux=0.0)

    metrics = {**_calibration_metrics(mat, cfg.spacing),
               "effective_modulus": e_eff, "effective_poisson": nu_eff,
               "nodes": nodes.n, "bonds": bonds.m}
    geometry.write_nodes_csv(out / "nodes.csv", nodes)
    artifacts = ["nodes.csv"]
    for variant in cfg.variants:
        vdir = out / variant
        vdir.mkdir(exist_ok=True)
        corr = material.correct_bonds(bonds, nodes, domain, mat, _surfaces_for(variant))
        k = pd_core.assemble(nodes, bonds, corr)
        u, diag = pd_core.solve_static(k, bcs, tol=cfg.tol, method=cfg.method)
        result = pd_core.FieldResult(
            u=u, energy_density=pd_core.strain_energy_density(nodes, bonds, corr, u),
            diagnostics=diag)
        err, included, max_err = analytic.relative_error_field(u, u_ref, cfg.zero_tol)
        write_fields_csv(vdir / "fields.csv", nodes.positions, result.u,
                         result.energy_density, f"pd_{variant}")
        write_errors_csv(vdir / "errors.csv", nodes.positions, err, included)
        if cfg.dump_bonds:
            geometry.write_bonds_csv(vdir / "bonds.csv", bonds, corr)
            artifacts.append(f"{variant}/bonds.csv")
        artifacts += [f"{variant}/fields.csv", f"{variant}/errors.csv"]
        metrics[f"{variant}.max_err_ux"] = float(max_err[0])
        metrics[f"{variant}.max_err_uy"] = float(max_err[1])
        metrics[f"{variant}.excluded_ux"] = int((~included[:, 0]).sum())
        metrics[f"{variant}.excluded_uy"] = int((~included[:, 1]).sum())
        metrics[f"{variant}.solver_iterations"] = diag.iterations
        metrics[f"{variant}.solver_residual"] = diag.residual
    summary = RunSummary("tension", _config_echo(cfg), metrics, artifacts,
                         time.perf_counter() - t0)
    summary.write(out)
    return summary


def _clamped_rows(positions: np.ndarray, half: float, spacing: float):
    tol = 1e-7 * spacing
    top = np.where(np.abs(positions[:, 1] - half) < tol)[0]
    bottom = np.where(np.abs(positions[:, 1] + half) < tol)[0]
    return top, bottom


def run_clamped(cfg: ExperimentConfig) -> RunSummary:
    """Clamped-edge stretching of a square sheet vs the FEM reference."""
    t0 = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    size = cfg.size_x
    half = 0.5 * size
    domain = Domain.rectangle(size, size, thickness=cfg.thickness)
    edge_disp = cfg.strain * half
    metrics = {"edge_displacement": edge_disp}
    artifacts = []
    stresses = []

    for variant in cfg.variants:
        vdir = out / variant
        vdir.mkdir(exist_ok=True)
        if variant == "fem":
            spec = GridSpec.covering(domain, cfg.spacing)
            mesh = fem_ref.FEMesh.from_grid(domain, spec)
            law = fem_ref.PlaneStressLaw(cfg.youngs_modulus, thickness=cfg.thickness)
            k = fem_ref.fem_assemble(mesh, law)
            top, bottom = _clamped_rows(mesh.nodes, half, cfg.spacing)
            bcs = BCSet(len(mesh.nodes))
            bcs.prescribe(top, ux=0.0, uy=edge_disp)
            bcs.prescribe(bottom, ux=0.0, uy=-edge_disp)
            u, diag = pd_core.solve_static(k, bcs, tol=cfg.tol, method=cfg.method)
            w = fem_ref.fem_energy_density(mesh, law, u)
            stress = pd_core.mean_tensile_stress(
                pd_core.reaction_force(k, u, bcs, top)[1], size, cfg.thickness)
            positions = mesh.nodes
            corner_peak = _near_corner(positions[np.argmax(w)], domain, cfg.spacing)
        else:
            virtual = variant.startswith("virtual_nodes")
            if virtual:
                spec = GridSpec.cell_centered(domain, cfg.spacing)
                nodes = geometry.build_grid(domain, spec)
                layers = int(round(cfg.horizon / cfg.spacing))
                nodes = geometry.add_virtual_layers(nodes, domain, "+y", layers)
                nodes = geometry.add_virtual_layers(nodes, domain, "-y", layers)
            else:
                spec = GridSpec.covering(domain, cfg.spacing)
                nodes = geometry.build_grid(domain, spec)
            bonds = geometry.build_bonds(nodes, cfg.horizon)
            elastic = ElasticParams(cfg.youngs_modulus, cfg.thickness)
            mat = MaterialModel.calibrated(elastic, cfg.horizon, cfg.profile,
                                           cfg.calibration, cfg.spacing)
            for key, val in _calibration_metrics(mat, cfg.spacing).items():
                metrics.setdefault(key, val)
            corr = material.correct_bonds(bonds, nodes, domain, mat,
                                          _surfaces_for(variant))
            k = pd_core.assemble(nodes, bonds, corr)
            bcs = BCSet(nodes.n)
            if virtual:
                # buffers move rigidly with the clamped surface displacement
                buffer_disp = cfg.strain * half
                vids = np.where(nodes.virtual_mask)[0]
                up = vids[nodes.positions[vids, 1] > 0]
                down = vids[nodes.positions[vids, 1] < 0]
                bcs.prescribe(up, ux=0.0, uy=buffer_disp)
                bcs.prescribe(down, ux=0.0, uy=-buffer_disp)
                pulled = up
                metrics.setdefault(f"{variant}.buffer_displacement", buffer_disp)
            else:
                top, bottom = _clamped_rows(nodes.positions, half, cfg.spacing)
                bcs.prescribe(top, ux=0.0, uy=edge_disp)
                bcs.prescribe(bottom, ux=0.0, uy=-edge_disp)
                pulled = top
            u, diag = pd_core.solve_static(k, bcs, tol=cfg.tol, method=cfg.method)
            result = pd_core.FieldResult(
                u=u, energy_density=pd_core.strain_energy_density(nodes, bonds, corr, u),
                diagnostics=diag, reactions=pd_core.reaction_force(k, u, bcs, pulled))
            w = result.energy_density
            stress = pd_core.mean_tensile_stress(result.reactions[1], size,
                                                 cfg.thickness)
            positions = nodes.positions
            real = nodes.real_mask
            metrics[f"{variant}.energy_real"] = float((w * nodes.volumes)[real].sum())
            metrics[f"{variant}.energy_virtual"] = float((w * nodes.volumes)[~real].sum())
            corner_peak = _near_corner(
                positions[np.flatnonzero(real)[np.argmax(w[real])]], domain, cfg.spacing)
            geometry.write_nodes_csv(vdir / "nodes.csv", nodes)
            artifacts.append(f"{variant}/nodes.csv")
            if cfg.dump_bonds:
                geometry.write_bonds_csv(vdir / "bonds.csv", bonds, corr)
                artifacts.append(f"{variant}/bonds.csv")
        write_fields_csv(vdir / "fields.csv", positions, u, w, variant)
        artifacts.append(f"{variant}/fields.csv")
        stresses.append((variant, float(stress)))
        metrics[f"{variant}.tensile_stress"] = float(stress)
        metrics[f"{variant}.corner_energy_peak"] = bool(corner_peak)
        metrics[f"{variant}.solver_iterations"] = diag.iterations
        metrics[f"{variant}.solver_residual"] = diag.residual
    write_stress_csv(out / "stresses.csv", stresses)
    artifacts.append("stresses.csv")
    if "fem" in cfg.variants:
        fem_stress = metrics["fem.tensile_stress"]
        for variant, stress in stresses:
            if variant != "fem":
                metrics[f"{variant}.stress_vs_fem"] = stress / fem_stress
    summary = RunSummary("clamped", _config_echo(cfg), metrics, artifacts,
                         time.perf_counter() - t0)
    summary.write(out)
    return summary


def _near_corner(point: np.ndarray, domain: Domain, spacing: float) -> bool:
    return bool(np.min(np.linalg.norm(domain.vertices - point, axis=1)) < 1.5 * spacing)


def run_indent(cfg: ExperimentConfig) -> RunSummary:
    """Circular-punch indentation: FEM reference vs bond models."""
    t0 = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    domain = Domain.rectangle(cfg.size_x, cfg.size_y, thickness=cfg.thickness)
    spec = GridSpec.covering(domain, cfg.spacing)
    depths = np.linspace(cfg.depth_max / cfg.depth_steps, cfg.depth_max,
                         cfg.depth_steps)
    metrics = {"indenter_radius": cfg.indenter_radius,
               "depth_max": cfg.depth_max, "depth_steps": cfg.depth_steps}
    artifacts = []
    curves = {}
    aborted = {}

    pd_cache = None
    for variant in cfg.variants:
        tv = time.perf_counter()
        vdir = out / variant
        vdir.mkdir(exist_ok=True)
        if variant == "fem":
            mesh = fem_ref.FEMesh.from_grid(domain, spec)
            law = fem_ref.PlaneStressLaw(cfg.youngs_modulus, thickness=cfg.thickness)
            k = fem_ref.fem_assemble(mesh, law)
            positions = mesh.nodes
            bonds = None
            w_of = lambda u: fem_ref.fem_energy_density(mesh, law, u)
        else:
            if pd_cache is None:
                pd_cache = _pd_setup(cfg, domain, spec)
            nodes, bonds, mat = pd_cache
            corr = material.correct_bonds(bonds, nodes, domain, mat,
                                          _surfaces_for(variant))
            k = pd_core.assemble(nodes, bonds, corr)
            positions = nodes.positions
            for key, val in _calibration_metrics(mat, cfg.spacing).items():
                metrics.setdefault(key, val)
            if cfg.dump_bonds:
                geometry.write_bonds_csv(vdir / "bonds.csv", bonds, corr)
                artifacts.append(f"{variant}/bonds.csv")
            w_of = lambda u, c=corr, b=bonds, nd=nodes: \
                pd_core.strain_energy_density(nd, b, c, u)
        tol_pos = 1e-7 * cfg.spacing
        top_ids = np.where(np.abs(positions[:, 1] - 0.5 * cfg.size_y) < tol_pos)[0]
        bottom_ids = np.where(np.abs(positions[:, 1] + 0.5 * cfg.size_y) < tol_pos)[0]
        base = BCSet(len(positions))
        base.prescribe(bottom_ids, ux=0.0, uy=0.0)  # block rests on a rigid support
        result = pd_core.run_indentation(
            positions, k, base, top_ids, cfg.indenter_radius, depths,
            bonds=bonds, tol=cfg.tol)
        curves[variant] = result
        aborted[variant] = result.failed
        write_curve_csv(vdir / "curve.csv", result.depths, result.forces, variant)
        w = w_of(result.u_final)
        write_fields_csv(vdir / "fields.csv", positions, result.u_final, w, variant)
        artifacts += [f"{variant}/curve.csv", f"{variant}/fields.csv"]
        metrics[f"{variant}.steps_converged"] = len(result.depths)
        metrics[f"{variant}.final_depth"] = float(result.depths[-1]) if len(result.depths) else 0.0
        metrics[f"{variant}.final_force"] = float(result.forces[-1]) if len(result.forces) else 0.0
        metrics[f"{variant}.stuck_nodes"] = int(result.stuck_counts[-1]) if len(result.stuck_counts) else 0
        metrics[f"{variant}.aborted_on_inversion"] = bool(result.failed)
        if result.failed:
            metrics[f"{variant}.failure_depth"] = float(result.failure_depth)
            metrics[f"{variant}.inverted_bonds"] = int(len(result.inverted_bonds))
        if len(result.depths):
            peak = positions[int(np.argmax(w))]
            under = (abs(peak[0]) <= 3 * cfg.spacing
                     and peak[1] >= 0.5 * cfg.size_y - 2 * cfg.horizon)
            metrics[f"{variant}.energy_peak_under_indenter"] = bool(under)
        metrics[f"{variant}.wall_seconds"] = time.perf_counter() - tv

    if "fem" in curves:
        fem = curves["fem"]
        for variant in cfg.variants:
            if variant == "fem" or not len(curves[variant].depths):
                continue
            res = curves[variant]
            shared = min(len(res.depths), len(fem.depths))
            if shared:
                ratio = res.forces[shared - 1] / fem.forces[shared - 1]
                metrics[f"{variant}.force_vs_fem_at_last_depth"] = float(ratio)
    pd_variants = [v for v in cfg.variants if v != "fem"]
    metrics["all_bond_variants_aborted"] = bool(
        pd_variants and all(aborted.get(v, False) for v in pd_variants))
    summary = RunSummary("indent", _config_echo(cfg), metrics, artifacts,
                         time.perf_counter() - t0)
    summary.write(out)
    return summary


def run_calibrate(cfg: ExperimentConfig) -> RunSummary:
    """Report bulk amplitudes and affine energy-match residuals."""
    t0 = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    elastic = ElasticParams(cfg.youngs_modulus, cfg.thickness)
    target = material.hooke_plane_stress(elastic)
    metrics = {}
    for kind in material.PROFILE_KINDS:
        for mode in ("continuum", "discrete"):
            c0 = material.calibrate_bulk(elastic, kind, cfg.horizon, mode, cfg.spacing)
            metrics[f"c0.{kind}.{mode}"] = c0
            mat = MaterialModel(elastic, cfg.horizon,
                                material.MicromodulusProfile(kind), c0, mode)
            lattice = material.discrete_hooke(mat, cfg.spacing)
            metrics[f"residual_uniaxial.{kind}.{mode}"] = abs(
                lattice.xxxx / target.xxxx - 1.0)
            metrics[f"residual_shear.{kind}.{mode}"] = abs(
                lattice.xyxy / target.xyxy - 1.0)
        metrics[f"discrete_vs_continuum.{kind}"] = (
            metrics[f"c0.{kind}.discrete"] / metrics[f"c0.{kind}.continuum"] - 1.0)
    summary = RunSummary("calibrate", _config_echo(cfg), metrics, [],
                         time.perf_counter() - t0)
    summary.write(out)
    return summary


RUNNERS = {
    "tension": run_tension,
    "clamped": run_clamped,
    "indent": run_indent,
    "calibrate": run_calibrate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pdsc",
        description="Bond-model benchmark experiments with built-in references.")
    p.add_argument("experiment", choices=sorted(RUNNERS),
                   help="which experiment to run")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--variant", action="append", dest="variants",
                   help="restrict to the given variant(s); repeatable")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--dump-bonds", action="store_true",
                   help="also write bonds.csv per variant")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"out": args.out,
                 "variants": tuple(args.variants) if args.variants else None,
                 "dump_bonds": True if args.dump_bonds else None}
    try:
        cfg = load_config(args.experiment, args.config, overrides)
    except (ConfigError, GeometryError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = RUNNERS[cfg.experiment](cfg)
    except (ConfigError, GeometryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    print(summary.to_text(), end="")
    if cfg.experiment == "indent" and summary.metrics.get("all_bond_variants_aborted"):
        return 4
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
