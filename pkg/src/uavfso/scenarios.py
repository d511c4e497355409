"""Scenario files: declarative configs binding geometry, stability,
turbulence, model selection, and the simulation plan.

The format is TOML with fixed SI units (meters, radians); milliradian
quantities are written like 3e-3.  Nine reference scenarios covering the
standard comparison figures ship with the package.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .analytic import UavStability
from .geometry import LinkGeometry
from .montecarlo import SimulationPlan
from .turbulence import (
    WEAK_STRONG_BOUNDARY,
    GammaGamma,
    LogNormal,
    cn2_from_rytov,
    gg_from_rytov,
    lognormal_from_rytov,
)

BUNDLED_SCENARIOS = (
    "fig2a", "fig2b", "fig3a", "fig3b", "fig4", "fig5a", "fig5b", "fig6a", "fig6b",
)

MODEL_TAGS = ("theorem2", "theorem3", "theorem4", "prop1",
              "theorem5", "theorem6", "theorem7")


class SchemaError(ValueError):
    """Configuration violates the scenario schema; carries field paths."""

    def __init__(self, problems):
        self.problems = tuple(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ModelSettings:
    """Truncation knobs of the analytic models."""

    n_prime: int = 10        # FOV lattice terms
    k_terms: int = 10        # offset-expansion terms
    series_epsilon: float = 1e-3
    m_terms: int | None = None   # explicit series order override
    h_m: float | None = None     # explicit turbulence cutoff override


@dataclass(frozen=True)
class Scenario:
    name: str
    geometry: LinkGeometry
    stability: UavStability
    turbulence: LogNormal | GammaGamma
    models: tuple
    settings: ModelSettings
    plan: SimulationPlan | None
    output_dir: str = "out"


_GEOMETRY_REQUIRED = ("z_m", "r_a_m", "w0_m", "wavelength_m", "d_f_m", "n_f", "fov_rad")
_STABILITY_REQUIRED = (
    "sigma_txo_rad", "sigma_tyo_rad", "sigma_rxo_rad", "sigma_ryo_rad",
    "sigma_txp_m", "sigma_typ_m", "sigma_rxp_m", "sigma_ryp_m",
)
_STABILITY_OPTIONAL = ("bore_tx_x_rad", "bore_tx_y_rad", "bore_rx_x_rad", "bore_rx_y_rad")


def _require(section, table, names, problems):
    out = {}
    for name in names:
        if name not in table:
            problems.append(f"missing required field [{section}].{name}")
        else:
            out[name] = table[name]
    return out


def parse_scenario(doc: dict, name_hint: str = "") -> Scenario:
    """Build a Scenario from a parsed TOML document; raises SchemaError with
    one entry per problem found."""
    problems = []
    name = doc.get("name") or name_hint
    if not name:
        problems.append("missing required field name")

    geom_tab = doc.get("geometry")
    stab_tab = doc.get("stability")
    turb_tab = doc.get("turbulence")
    model_tab = doc.get("models")
    for section, tab in (("geometry", geom_tab), ("stability", stab_tab),
                         ("turbulence", turb_tab), ("models", model_tab)):
        if tab is None:
            problems.append(f"missing required section [{section}]")
    if problems:
        raise SchemaError(problems)

    gvals = _require("geometry", geom_tab, _GEOMETRY_REQUIRED, problems)
    svals = _require("stability", stab_tab, _STABILITY_REQUIRED, problems)
    tags = model_tab.get("tags")
    if not tags:
        problems.append("missing required field [models].tags (need at least one tag)")
    else:
        for t in tags:
            if t not in MODEL_TAGS:
                problems.append(f"unknown model tag {t!r} in [models].tags")

    rytov = turb_tab.get("rytov_variance")
    explicit_ab = "alpha" in turb_tab and "beta" in turb_tab
    explicit_ln = "sigma_l2" in turb_tab
    if rytov is None and not explicit_ab and not explicit_ln:
        problems.append(
            "missing required field [turbulence].rytov_variance "
            "(or explicit alpha/beta or sigma_l2)")
    if problems:
        raise SchemaError(problems)

    # turbulence model: regime rule on the Rytov variance unless overridden
    kind = turb_tab.get("model")
    if kind is None and rytov is not None:
        kind = "lognormal" if rytov < WEAK_STRONG_BOUNDARY else "gamma_gamma"
    if explicit_ab:
        model = GammaGamma(alpha=float(turb_tab["alpha"]), beta=float(turb_tab["beta"]),
                           rytov_var=float(rytov) if rytov is not None else float("nan"))
    elif explicit_ln:
        sl2 = float(turb_tab["sigma_l2"])
        model = LogNormal(sigma_l2=sl2, mu_l=float(turb_tab.get("mu_l", -sl2)),
                          rytov_var=float(rytov) if rytov is not None else float("nan"))
    elif kind == "lognormal":
        model = lognormal_from_rytov(float(rytov))
    elif kind == "gamma_gamma":
        model = gg_from_rytov(float(rytov))
    else:
        raise SchemaError([f"unknown [turbulence].model {kind!r}"])

    cn2 = geom_tab.get("cn2")
    if cn2 is None:
        cn2 = cn2_from_rytov(float(rytov), float(gvals["wavelength_m"]),
                             float(gvals["z_m"])) if rytov is not None else 0.0
    r_ap = geom_tab.get("r_ap_m")
    if r_ap is None:
        r_ap = float(gvals["d_f_m"]) * math.tan(float(gvals["fov_rad"]))
    try:
        geometry = LinkGeometry(
            z=float(gvals["z_m"]), r_a=float(gvals["r_a_m"]), r_ap=float(r_ap),
            w0=float(gvals["w0_m"]), wavelength=float(gvals["wavelength_m"]),
            cn2=float(cn2), d_f=float(gvals["d_f_m"]), n_f=float(gvals["n_f"]),
            fov=float(gvals["fov_rad"]), h_l=float(geom_tab.get("channel_loss", 1.0)))
        stability = UavStability(
            sigma_txo=float(svals["sigma_txo_rad"]), sigma_tyo=float(svals["sigma_tyo_rad"]),
            sigma_rxo=float(svals["sigma_rxo_rad"]), sigma_ryo=float(svals["sigma_ryo_rad"]),
            sigma_txp=float(svals["sigma_txp_m"]), sigma_typ=float(svals["sigma_typ_m"]),
            sigma_rxp=float(svals["sigma_rxp_m"]), sigma_ryp=float(svals["sigma_ryp_m"]),
            bore_tx_x=float(stab_tab.get("bore_tx_x_rad", 0.0)),
            bore_tx_y=float(stab_tab.get("bore_tx_y_rad", 0.0)),
            bore_rx_x=float(stab_tab.get("bore_rx_x_rad", 0.0)),
            bore_rx_y=float(stab_tab.get("bore_rx_y_rad", 0.0)))
    except ValueError as exc:
        raise SchemaError([str(exc)]) from exc

    settings = ModelSettings(
        n_prime=int(model_tab.get("n_prime", 10)),
        k_terms=int(model_tab.get("k_terms", 10)),
        series_epsilon=float(model_tab.get("series_epsilon", 1e-3)),
        m_terms=model_tab.get("m_terms"),
        h_m=model_tab.get("h_m"))

    plan = None
    sim = doc.get("simulation")
    if sim is not None:
        try:
            plan = SimulationPlan(
                n_samples=int(sim.get("n_samples", 1_000_000)),
                seed=int(sim.get("seed", 0)),
                bins=int(sim.get("bins", 100)),
                bin_scale=sim.get("bin_scale", "log"),
                hpa_path=sim.get("hpa_path", "step"),
                use_tables=bool(sim.get("use_tables", True)),
                workers=int(sim.get("workers", 1)))
        except ValueError as exc:
            raise SchemaError([f"[simulation]: {exc}"]) from exc

    output_dir = (doc.get("output") or {}).get("directory", "out")
    return Scenario(name=str(name), geometry=geometry, stability=stability,
                    turbulence=model, models=tuple(tags), settings=settings,
                    plan=plan, output_dir=str(output_dir))


def load_scenario(source) -> Scenario:
    """Load a scenario from a bundled name or a TOML file path."""
    source = str(source)
    if source in BUNDLED_SCENARIOS:
        text = resources.files("uavfso").joinpath(f"scenarios/{source}.toml").read_text()
        doc = _toml.loads(text)
        return parse_scenario(doc, name_hint=source)
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"no scenario file or bundled scenario named {source!r}")
    try:
        doc = _toml.loads(path.read_text())
    except _toml.TOMLDecodeError as exc:
        raise SchemaError([f"TOML parse error in {path}: {exc}"]) from exc
    return parse_scenario(doc, name_hint=path.stem)


def list_scenarios() -> tuple:
    return BUNDLED_SCENARIOS
