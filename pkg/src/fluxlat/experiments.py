"""Config-driven runs that write CSV artifacts plus a ``run.json`` record."""

from __future__ import annotations

import json
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .basis import (
    Convention,
    Picture,
    enumerate_full,
    enumerate_gauss_sector,
    filter_full_basis,
    validate_charges,
)
from .config import ExperimentConfig
from .errors import ConvergenceError, RegimeError
from .hamiltonian import (
    CouplingParams,
    RegimeWarning,
    build_kogut_susskind,
    build_microscopic_rotor,
    derive_effective,
    stagger_equivalent,
)
from .observables import (
    field_map,
    flux_tube_report,
    static_potential,
    validity_bound_check,
    write_csv,
)
from .solver import dense_spectrum, low_spectrum

BRUTE_FORCE_LIMIT = 1_000_000
LOW_LEVELS = 3  # levels compared in the effective-theory check


@dataclass
class RunRecord:
    kind: str
    config: dict
    basis_sizes: dict = field(default_factory=dict)
    energies: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config,
            "basis_sizes": self.basis_sizes,
            "energies": self.energies,
            "results": self.results,
            "convergence": self.convergence,
            "timings": self.timings,
            "warnings": self.warnings,
            "artifacts": self.artifacts,
        }

    @contextmanager
    def timed(self, phase: str):
        t0 = time.perf_counter()
        yield
        self.timings[phase] = round(time.perf_counter() - t0, 6)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "run.json"
        self.artifacts.append(str(path))
        path.write_text(json.dumps(_plain(self.as_dict()), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _plain(obj):
    """Convert numpy scalars/arrays for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _spectrum(h, k: int, cfg: ExperimentConfig, label: str, record: RunRecord) -> np.ndarray:
    """Lowest ``k`` eigenvalues, dense below the cap and Krylov above it."""
    n = h.shape[0]
    k = min(k, n)
    if n <= cfg.solver.dense_cap:
        record.convergence[label] = {"method": "dense", "dimension": n}
        return dense_spectrum(h, cfg.solver.dense_cap, vectors=False).eigenvalues[:k]
    res = low_spectrum(h, k, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter, seed=cfg.solver.seed)
    record.convergence[label] = {
        "method": "lanczos",
        "dimension": n,
        "iterations": res.iterations,
        "max_residual": float(np.max(res.residuals)),
        "seed": res.seed,
        "converged": res.converged,
    }
    if not res.converged:
        raise ConvergenceError(f"{label}: {k} eigenpairs not converged after {res.iterations} steps")
    return res.eigenvalues


def _prepare(cfg: ExperimentConfig) -> tuple[RunRecord, Path]:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return RunRecord(cfg.kind, cfg.echo()), out_dir


def _artifact(record: RunRecord, path: Path):
    record.artifacts.append(str(path))


def run_sector_count(cfg: ExperimentConfig) -> RunRecord:
    record, out_dir = _prepare(cfg)
    geom = cfg.geometry()
    full_count = (2 * cfg.trunc + 1) ** geom.n_links
    with record.timed("enumerate"):
        sector = enumerate_gauss_sector(geom, cfg.charges, cfg.trunc, cfg.max_states)
    record.basis_sizes = {"n_links": geom.n_links, "full": full_count, "projected": len(sector)}

    brute = None
    if cfg.brute_force and full_count <= BRUTE_FORCE_LIMIT:
        with record.timed("brute_force"):
            filtered = filter_full_basis(enumerate_full(geom, cfg.trunc, Picture.E, cfg.max_states), cfg.charges)
        brute = len(filtered)
        match = bool(np.array_equal(filtered.states, sector.states))
        record.results["brute_force_match"] = match
        if not match:
            record.warnings.append("Gauss-sector search disagrees with brute-force filtering")
    elif cfg.brute_force:
        record.warnings.append(f"brute-force cross-check skipped: {full_count} raw states exceed {BRUTE_FORCE_LIMIT}")
    record.basis_sizes["brute_force"] = brute

    path = write_csv(
        out_dir / "sector_count.csv",
        ("n_links", "trunc", "full", "projected", "brute_force"),
        [(geom.n_links, cfg.trunc, full_count, len(sector), brute)],
    )
    _artifact(record, path)
    record.write(out_dir)
    return record


def run_ground_state(cfg: ExperimentConfig) -> RunRecord:
    record, out_dir = _prepare(cfg)
    geom = cfg.geometry()
    params = cfg.coupling
    with record.timed("enumerate"):
        sector = enumerate_gauss_sector(geom, cfg.charges, cfg.trunc, cfg.max_states)
    record.basis_sizes["projected"] = len(sector)
    with record.timed("assemble"):
        h = build_kogut_susskind(sector, params)
    k = min(cfg.solver.k, len(sector))
    with record.timed("solve"):
        res = low_spectrum(h, k, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter, seed=cfg.solver.seed)
    record.convergence["ground_state"] = {
        "iterations": res.iterations,
        "residuals": res.residuals,
        "seed": res.seed,
        "converged": res.converged,
    }
    if not res.converged:
        raise ConvergenceError(f"ground state not converged after {res.iterations} steps")
    e = res.eigenvalues
    record.energies = {"levels": e, "ground": e[0], "units": "U0", "U0": params.energy_scale, "g2": params.coupling_sq}
    if k > 1 and abs(e[1] - e[0]) <= 1e-8 * max(1.0, abs(e[0])):
        record.warnings.append("ground state is degenerate; the field map is of one vector in the block")

    fmap = field_map(res.eigenvectors[:, 0], sector, {"g2": params.coupling_sq, "trunc": cfg.trunc})
    _artifact(record, fmap.write_csv(out_dir / "field_map.csv"))
    _artifact(record, write_csv(out_dir / "spectrum.csv", ("level", "energy"), enumerate(e)))
    record.results["gauss_residual"] = float(
        np.max(np.abs(fmap.divergence() - cfg.charges.as_convention(Convention.QED).dense(geom)))
    )
    if len(cfg.charges.charges) == 2:
        try:
            record.results["flux_tube"] = flux_tube_report(fmap, cfg.charges).as_dict()
        except ValueError as exc:
            record.warnings.append(f"flux-tube report skipped: {exc}")
        if params.is_microscopic:
            (m0, n0, _), (m1, n1, _) = cfg.charges.charges
            msg = validity_bound_check(params, abs(m0 - m1) + abs(n0 - n1), cfg.validity_fraction)
            if msg:
                record.warnings.append(msg)
    record.write(out_dir)
    return record


def run_potential_scan(cfg: ExperimentConfig) -> RunRecord:
    record, out_dir = _prepare(cfg)
    geom = cfg.geometry()
    with record.timed("scan"):
        table = static_potential(
            geom, cfg.coupling, cfg.trunc, cfg.r_list, cfg.solver, cfg.row, cfg.max_states, cfg.validity_fraction
        )
    record.basis_sizes = table.basis_sizes
    record.convergence = table.convergence
    record.warnings += table.warnings
    record.energies = {
        "units": "U0",
        "g2": table.g_sq,
        "vacuum": table.rows[0].e_vacuum,
        "charged": {f"R={r.r}": r.e_charged for r in table.rows},
        "V": {f"R={r.r}": r.v for r in table.rows},
    }
    if len(table.rows) >= 2:
        slope = table.slope()
        expected = table.g_sq / 2.0
        record.results.update({"slope": slope, "slope_strong": expected, "slope_rel_dev": (slope - expected) / expected})
    _artifact(record, table.write_csv(out_dir / "potential.csv"))
    record.write(out_dir)
    return record


def compare_effective(
    geom, trunc: int, params: CouplingParams, charges, cfg: ExperimentConfig, record: RunRecord, tag: str = ""
) -> dict:
    """Offset-aligned spectra of the full rotor model, the effective model and Kogut-Susskind."""
    with record.timed(f"full_rotor{tag}"):
        full = enumerate_full(geom, trunc, Picture.DELTA, cfg.max_states)
        h_full = build_microscopic_rotor(full, params, charges.as_convention(Convention.DELTA))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        with record.timed(f"effective{tag}"):
            h_eff, sector = derive_effective(geom, trunc, params, charges, cfg.max_states, cfg.regime_ratio)
    h_ks = build_kogut_susskind(sector, params, physical_units=True)
    n = len(sector)
    a = _spectrum(h_full, n, cfg, f"full_rotor{tag}", record)
    b = _spectrum(h_eff, n, cfg, f"effective{tag}", record)
    c = _spectrum(h_ks, n, cfg, f"kogut_susskind{tag}", record)
    a_al, b_al, c_al = a - a[0], b - b[0], c - c[0]
    low = min(LOW_LEVELS, n)
    off = (h_eff - sp.diags(h_eff.diagonal())).tocsr()
    off.eliminate_zeros()
    return {
        "levels": n,
        "full_rotor": a,
        "effective": b,
        "kogut_susskind": c,
        "aligned": (a_al, b_al, c_al),
        "max_diff_full_effective_low": float(np.max(np.abs(a_al[:low] - b_al[:low]))),
        "max_diff_full_effective_all": float(np.max(np.abs(a_al - b_al))),
        "max_diff_full_kogut_susskind_all": float(np.max(np.abs(a_al - c_al))),
        "plaquette_coupling": 2.0 * params.omega**2 / params.lam,
        "effective_offdiagonal": sorted(set(np.round(off.data, 15).tolist())),
        "full_dimension": len(full),
    }


def run_effective_compare(cfg: ExperimentConfig) -> RunRecord:
    record, out_dir = _prepare(cfg)
    params = cfg.coupling
    if not params.in_qed_regime(cfg.regime_ratio):
        r_mu, r_om = params.regime_ratios()
        msg = f"outside the QED regime: lambda/mu = {r_mu:.6g}, lambda/omega = {r_om:.6g} (< {cfg.regime_ratio:g})"
        if not cfg.force_regime:
            raise RegimeError(msg + "; pass --force-regime to run anyway")
        record.warnings.append(msg)
    geom = cfg.geometry()
    cmp = compare_effective(geom, cfg.trunc, params, cfg.charges, cfg, record)
    record.basis_sizes = {"full": cmp["full_dimension"], "projected": cmp["levels"]}
    record.energies = {
        "full_rotor": cmp["full_rotor"],
        "effective": cmp["effective"],
        "kogut_susskind": cmp["kogut_susskind"],
        "units": "rotor",
    }
    record.results = {k: v for k, v in cmp.items() if k not in ("full_rotor", "effective", "kogut_susskind", "aligned")}
    record.results["low_levels_compared"] = min(LOW_LEVELS, cmp["levels"])

    if cfg.omega_halving and params.omega > 0:
        half = CouplingParams.microscopic(params.lam, params.mu, params.omega / 2.0)
        cmp2 = compare_effective(geom, cfg.trunc, half, cfg.charges, cfg, record, tag="_half_omega")
        d1, d2 = cmp["max_diff_full_effective_low"], cmp2["max_diff_full_effective_low"]
        record.results["half_omega_max_diff_low"] = d2
        record.results["halving_ratio"] = d1 / d2 if d2 > 0 else None

    a_al, b_al, c_al = cmp["aligned"]
    rows = [(i, a_al[i], b_al[i], c_al[i], a_al[i] - b_al[i], a_al[i] - c_al[i]) for i in range(cmp["levels"])]
    header = ("level", "full_rotor", "effective", "kogut_susskind", "diff_full_effective", "diff_full_kogut_susskind")
    _artifact(record, write_csv(out_dir / "effective_compare.csv", header, rows))
    record.write(out_dir)
    return record


def run_stagger_check(cfg: ExperimentConfig) -> RunRecord:
    record, out_dir = _prepare(cfg)
    geom = cfg.geometry()
    params = cfg.coupling
    delta = cfg.charges.as_convention(Convention.DELTA)
    validate_charges(delta, geom).raise_if_invalid()
    with record.timed("assemble"):
        micro_basis = enumerate_full(geom, cfg.trunc, Picture.DELTA, cfg.max_states)
        stag_basis = enumerate_full(geom, cfg.trunc, Picture.E, cfg.max_states)
        h_micro = build_microscopic_rotor(micro_basis, params, delta)
        h_stag = stagger_equivalent(stag_basis, params, delta)
    n = len(micro_basis)
    record.basis_sizes["full"] = n
    k = n if n <= cfg.solver.dense_cap else cfg.solver.k
    with record.timed("solve"):
        a = _spectrum(h_micro, k, cfg, "microscopic", record)
        b = _spectrum(h_stag, k, cfg, "staggered", record)

    # the E-picture state i is the delta-picture state perm[i]
    perm = micro_basis.locate(stag_basis.states.astype(np.int64) * geom.link_signs())
    permuted = h_micro[perm][:, perm]
    record.results = {
        "levels_compared": len(a),
        "max_abs_diff": float(np.max(np.abs(a - b))),
        "permutation_equal": bool((permuted != h_stag).nnz == 0),
    }
    record.energies = {"microscopic_ground": a[0], "staggered_ground": b[0], "units": "rotor"}
    rows = [(i, a[i], b[i], abs(a[i] - b[i])) for i in range(len(a))]
    _artifact(record, write_csv(out_dir / "stagger_check.csv", ("level", "microscopic", "staggered", "abs_diff"), rows))
    record.write(out_dir)
    return record


RUNNERS = {
    "sector-count": run_sector_count,
    "ground-state": run_ground_state,
    "potential": run_potential_scan,
    "effective-compare": run_effective_compare,
    "stagger-check": run_stagger_check,
}


def run_experiment(cfg: ExperimentConfig) -> RunRecord:
    return RUNNERS[cfg.kind](cfg)
