"""Channel modeling for UAV-based free-space optical links.

Analytical mixture PDFs of the optical channel gain under combined
atmospheric turbulence, geometric pointing loss, and field-of-view loss
with nonzero boresight, plus a Monte-Carlo simulator to verify them.
"""

from .geometry import (
    LinkGeometry,
    PointingState,
    a0,
    aoa,
    aoa_exact,
    beam_width_at_rx,
    build_radial_tables,
    hpa_exact,
    hpa_step,
    hpg_approx,
    hpg_exact,
    radial_displacement,
)
from .turbulence import (
    GammaGamma,
    LogNormal,
    cn2_from_rytov,
    gg_from_rytov,
    gg_pdf,
    lognormal_from_rytov,
    lognormal_pdf,
    sample_turbulence,
)
from .analytic import (
    ChannelPdf,
    UavStability,
    calibrate_series,
    derive_constants,
    marcum_mass,
    pdf_prop1,
    pdf_theorem2,
    pdf_theorem3,
    pdf_theorem4,
    pdf_theorem5,
    pdf_theorem6,
    pdf_theorem7,
    prob_R,
)
from .montecarlo import EmpiricalPdf, SimulationPlan, compare, empirical_pdf, sample_channel

__version__ = "0.1.0"
