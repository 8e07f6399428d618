"""Experiment configuration: strict JSON loading, defaults and validation.

Layout (every section optional except where an experiment needs it)::

    {
      "lattice":    {"lx": 5, "ly": 3, "boundary": "open", "trunc": 2},
      "coupling":   {"g2": 10.0}    or    {"lambda": 1.0, "mu": 1e-5, "omega": 1e-2},
      "charges":    {"convention": "qed", "sites": [{"m": 1, "n": 1, "q": 1}, ...]},
      "experiment": {"kind": "potential", "r_list": [2, 4], ...},
      "solver":     {"k": 4, "tol": 1e-10, "max_iter": 5000, "seed": 20111220, ...},
      "output":     {"dir": "fluxlat-out"}
    }
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .basis import DEFAULT_MAX_STATES, DEFAULT_TRUNCATION, ChargeConfig, Convention, validate_charges
from .errors import ConfigError
from .hamiltonian import DEFAULT_REGIME_RATIO, CouplingParams
from .lattice import Boundary, build_geometry
from .observables import DEFAULT_VALIDITY_FRACTION
from .solver import DEFAULT_DENSE_CAP, DEFAULT_MAX_ITER, DEFAULT_SEED, DEFAULT_TOL, SolverOptions

KINDS = ("sector-count", "ground-state", "potential", "effective-compare", "stagger-check")
ROTOR_KINDS = ("effective-compare", "stagger-check")

SCHEMA = {
    "lattice": {"lx", "ly", "boundary", "trunc"},
    "coupling": {"g2", "lambda", "mu", "omega"},
    "charges": {"convention", "sites"},
    "experiment": {
        "kind",
        "r_list",
        "row",
        "force_regime",
        "regime_ratio",
        "validity_fraction",
        "brute_force",
        "omega_halving",
    },
    "solver": {"k", "tol", "max_iter", "seed", "dense_cap", "max_states"},
    "output": {"dir"},
}
SITE_KEYS = {"m", "n", "q"}


@dataclass
class ExperimentConfig:
    kind: str
    lx: int
    ly: int
    boundary: Boundary = Boundary.OPEN
    trunc: int = DEFAULT_TRUNCATION
    coupling: CouplingParams | None = None
    charges: ChargeConfig = field(default_factory=ChargeConfig)
    r_list: tuple[int, ...] = ()
    row: int | None = None
    force_regime: bool = False
    regime_ratio: float = DEFAULT_REGIME_RATIO
    validity_fraction: float = DEFAULT_VALIDITY_FRACTION
    brute_force: bool = True
    omega_halving: bool = True
    solver: SolverOptions = field(default_factory=SolverOptions)
    max_states: int = DEFAULT_MAX_STATES
    out_dir: Path = Path("fluxlat-out")

    def geometry(self):
        return build_geometry(self.lx, self.ly, self.boundary)

    def echo(self) -> dict:
        """Fully resolved configuration in the input file layout."""
        coupling = None
        if self.coupling is not None:
            c = self.coupling
            coupling = {"g2": c.g_sq} if not c.is_microscopic else {"lambda": c.lam, "mu": c.mu, "omega": c.omega}
        return {
            "lattice": {"lx": self.lx, "ly": self.ly, "boundary": self.boundary.value, "trunc": self.trunc},
            "coupling": coupling,
            "charges": {
                "convention": self.charges.convention.value,
                "sites": [{"m": m, "n": n, "q": q} for m, n, q in self.charges.charges],
            },
            "experiment": {
                "kind": self.kind,
                "r_list": list(self.r_list),
                "row": self.row,
                "force_regime": self.force_regime,
                "regime_ratio": self.regime_ratio,
                "validity_fraction": self.validity_fraction,
                "brute_force": self.brute_force,
                "omega_halving": self.omega_halving,
            },
            "solver": {**asdict(self.solver), "max_states": self.max_states},
            "output": {"dir": str(self.out_dir)},
        }


def read_config_file(path) -> dict:
    """Parse a JSON config; I/O errors propagate as OSError."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def merge_overrides(data: dict, overrides: dict | None) -> dict:
    """Overlay ``{section: {key: value}}`` on the file data; None values are ignored."""
    out = copy.deepcopy(data)
    for section, values in (overrides or {}).items():
        for key, value in values.items():
            if value is None:
                continue
            sec = out.setdefault(section, {})
            if not isinstance(sec, dict):
                continue
            sec[key] = value
    return out


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def config_from_dict(data: dict, kind: str | None = None) -> ExperimentConfig:
    """Validate a parsed config and fill defaults; every problem is reported at once."""
    problems: list[str] = []

    for section, value in data.items():
        if section not in SCHEMA:
            problems.append(f"unknown section '{section}'")
        elif not isinstance(value, dict):
            problems.append(f"section '{section}' must be an object")
        else:
            for key in value:
                if key not in SCHEMA[section]:
                    problems.append(f"unknown key '{section}.{key}'")
    if problems:
        raise ConfigError(problems)

    lat = data.get("lattice", {})
    cpl = data.get("coupling", {})
    chg = data.get("charges", {})
    exp = data.get("experiment", {})
    sol = data.get("solver", {})
    out = data.get("output", {})

    kind = kind or exp.get("kind")
    if kind not in KINDS:
        problems.append(f"experiment.kind must be one of {', '.join(KINDS)}, got {kind!r}")

    lx, ly = lat.get("lx"), lat.get("ly")
    for name, v in (("lx", lx), ("ly", ly)):
        if not _is_int(v) or v < 2:
            problems.append(f"lattice.{name} must be an integer >= 2, got {v!r}")
    try:
        boundary = Boundary(lat.get("boundary", "open"))
    except ValueError:
        problems.append(f"lattice.boundary must be 'open' or 'periodic', got {lat.get('boundary')!r}")
        boundary = Boundary.OPEN
    trunc = lat.get("trunc", DEFAULT_TRUNCATION)
    if not _is_int(trunc) or trunc < 0:
        problems.append(f"lattice.trunc must be a non-negative integer, got {trunc!r}")

    coupling = None
    has_g = "g2" in cpl
    rotor_keys = [k for k in ("lambda", "mu", "omega") if k in cpl]
    if has_g and rotor_keys:
        problems.append("coupling: give either g2 or lambda/mu/omega, not both")
    elif has_g:
        g2 = cpl["g2"]
        if not _is_number(g2) or not g2 > 0:
            problems.append(f"coupling.g2 must be positive, got {g2!r}")
        else:
            coupling = CouplingParams.qed(g2)
    elif rotor_keys:
        missing = [k for k in ("lambda", "mu", "omega") if k not in cpl]
        if missing:
            problems.append(f"coupling: missing {', '.join(missing)}")
        else:
            lam, mu, om = cpl["lambda"], cpl["mu"], cpl["omega"]
            bad = False
            for name, v, strict in (("lambda", lam, True), ("mu", mu, False), ("omega", om, False)):
                if not _is_number(v) or (v <= 0 if strict else v < 0):
                    problems.append(f"coupling.{name} must be {'positive' if strict else 'non-negative'}, got {v!r}")
                    bad = True
            if not bad:
                coupling = CouplingParams.microscopic(lam, mu, om)
    if kind in ("ground-state", "potential") and coupling is None and not (has_g or rotor_keys):
        problems.append(f"{kind} needs a coupling section (g2 or lambda/mu/omega)")
    if kind in ROTOR_KINDS and coupling is not None and not coupling.is_microscopic:
        problems.append(f"{kind} needs rotor couplings lambda/mu/omega, not g2")
    if kind in ROTOR_KINDS and coupling is None and not rotor_keys:
        problems.append(f"{kind} needs rotor couplings lambda/mu/omega")

    force_regime = exp.get("force_regime", False)
    regime_ratio = exp.get("regime_ratio", DEFAULT_REGIME_RATIO)
    if not _is_number(regime_ratio) or regime_ratio <= 0:
        problems.append(f"experiment.regime_ratio must be positive, got {regime_ratio!r}")
        regime_ratio = DEFAULT_REGIME_RATIO
    if kind == "effective-compare" and coupling is not None and coupling.is_microscopic:
        if not coupling.in_qed_regime(regime_ratio) and not force_regime:
            r_mu, r_om = coupling.regime_ratios()
            problems.append(
                f"regime: lambda/mu = {r_mu:.6g} and lambda/omega = {r_om:.6g} must both be >= {regime_ratio:g} "
                "for the gauge theory to emerge; pass --force-regime to run anyway"
            )

    try:
        convention = Convention(chg.get("convention", "qed"))
    except ValueError:
        problems.append(f"charges.convention must be 'qed' or 'delta', got {chg.get('convention')!r}")
        convention = Convention.QED
    sites = chg.get("sites", [])
    entries = []
    if not isinstance(sites, list):
        problems.append("charges.sites must be a list of {m, n, q} records")
        sites = []
    for i, site in enumerate(sites):
        if not isinstance(site, dict) or set(site) != SITE_KEYS or not all(_is_int(site[k]) for k in SITE_KEYS):
            problems.append(f"charges.sites[{i}] must be an object with integer m, n, q")
            continue
        entries.append((site["m"], site["n"], site["q"]))
    charges = ChargeConfig(tuple(entries), convention)

    geom = None
    if _is_int(lx) and _is_int(ly) and lx >= 2 and ly >= 2:
        geom = build_geometry(lx, ly, boundary)
    if geom is not None:
        report = validate_charges(charges, geom)
        problems += [f"charges: {v}" for v in report.violations]
        if report.ok and charges.convention is Convention.QED:
            # the rotor model realises only sublattice-neutral Delta
            micro = validate_charges(charges.converted(), geom)
            problems += [f"charges: {v}" for v in micro.violations]
        if kind in ROTOR_KINDS and not geom.bipartite:
            problems.append("lattice: the rotor model needs even extents on a periodic lattice")

    r_list = exp.get("r_list", [])
    if kind == "potential":
        if not isinstance(r_list, list) or not r_list:
            problems.append("experiment.r_list must be a non-empty list of even separations")
            r_list = []
        for r in r_list:
            if not _is_int(r) or r < 2:
                problems.append(f"experiment.r_list: R={r!r} must be an integer >= 2")
            elif r % 2:
                problems.append(
                    f"experiment.r_list: R={r} is odd; a +1/-1 pair at odd separation sits on opposite "
                    "sublattices, gives a same-sign Delta pair and violates the sublattice charge sums, "
                    "so only even R is allowed"
                )
            elif _is_int(lx) and r > lx - 1:
                problems.append(f"experiment.r_list: R={r} does not fit a lattice {lx} vertices wide")
    row = exp.get("row")
    if row is not None and (not _is_int(row) or not (_is_int(ly) and 0 <= row < ly)):
        problems.append(f"experiment.row must be a row index inside the lattice, got {row!r}")

    validity_fraction = exp.get("validity_fraction", DEFAULT_VALIDITY_FRACTION)
    if not _is_number(validity_fraction) or validity_fraction <= 0:
        problems.append(f"experiment.validity_fraction must be positive, got {validity_fraction!r}")
    for flag in ("force_regime", "brute_force", "omega_halving"):
        if flag in exp and not isinstance(exp[flag], bool):
            problems.append(f"experiment.{flag} must be true or false")

    k = sol.get("k", 4)
    tol = sol.get("tol", DEFAULT_TOL)
    max_iter = sol.get("max_iter", DEFAULT_MAX_ITER)
    seed = sol.get("seed", DEFAULT_SEED)
    dense_cap = sol.get("dense_cap", DEFAULT_DENSE_CAP)
    max_states = sol.get("max_states", DEFAULT_MAX_STATES)
    for name, v in (("k", k), ("max_iter", max_iter), ("dense_cap", dense_cap), ("max_states", max_states)):
        if not _is_int(v) or v < 1:
            problems.append(f"solver.{name} must be a positive integer, got {v!r}")
    if not _is_number(tol) or tol <= 0:
        problems.append(f"solver.tol must be positive, got {tol!r}")
    if not _is_int(seed) or seed < 0:
        problems.append(f"solver.seed must be a non-negative integer, got {seed!r}")

    out_dir = out.get("dir", "fluxlat-out")
    if not isinstance(out_dir, str) or not out_dir:
        problems.append("output.dir must be a non-empty path string")

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        kind=kind,
        lx=lx,
        ly=ly,
        boundary=boundary,
        trunc=trunc,
        coupling=coupling,
        charges=charges,
        r_list=tuple(r_list),
        row=row,
        force_regime=force_regime,
        regime_ratio=float(regime_ratio),
        validity_fraction=float(validity_fraction),
        brute_force=exp.get("brute_force", True),
        omega_halving=exp.get("omega_halving", True),
        solver=SolverOptions(k=k, tol=float(tol), max_iter=max_iter, seed=seed, dense_cap=dense_cap),
        max_states=max_states,
        out_dir=Path(out_dir),
    )


def load_config(path, overrides: dict | None = None, kind: str | None = None) -> ExperimentConfig:
    return config_from_dict(merge_overrides(read_config_file(path), overrides), kind)
