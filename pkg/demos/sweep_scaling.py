"""A miniature viscosity sweep with the parallel sweep driver.

Three 64-squared runs at decreasing nu, fixed small friction, reduced by
run_sweep into per-point balance reports, scale selections, and compensated
plateau statistics.  The point of the exercise is the cross-point trends:
the viscous work metric nu*E||w||^2 must fall as nu does, which is the
testable shadow of the vanishing-viscosity limit.  At 64 squared the
compensated plateaus only gesture at their constants, and with box-scale
forcing the energy decorrelates over ~10 time units, so the balance
residuals printed here carry 10-20% finite-sample noise; the acceptance
suite runs the same physics long enough to push them below 1%.

Expect a few minutes of compute; pass --jobs N to spread points over cores.
"""

import argparse

from cascade2d.experiment import SweepConfig, SweepPoint, run_sweep

parser = argparse.ArgumentParser()
parser.add_argument("--jobs", type=int, default=None)
args = parser.parse_args()

config = SweepConfig(
    mode="direct_isolated",
    points=tuple(
        SweepPoint(nu=nu, alpha=0.05, gamma=0.25, box_size=6.283185307179586, n=64, seeds=(1,))
        for nu in (1.6e-2, 8e-3, 4e-3)
    ),
    forcing_k_min=1.0,
    forcing_k_max=2.0,
    epsilon=1.0,
    t_burn=50.0,
    t_sample=150.0,
    sample_interval=0.5,
    dt_max=0.02,
)

report = run_sweep(config, jobs=args.jobs)

print("mode %s, %d points" % (report.mode, len(report.points)))
for point in report.points:
    bal = point.balance
    print("\n%s  (%d samples)" % (point.label, point.sample_count))
    print("  energy balance residual  %6.2f%% of eps (finite-sample)"
          % (100 * abs(bal.energy_residual) / bal.energy_injection))
    print("  eta*_nu %.3f of eta %.3f" % (bal.enstrophy_viscous, bal.enstrophy_injection))
    print("  scales: ell_nu %.4f  ell_alpha %.4f"
          % (point.scales.ell_nu, point.scales.ell_alpha))
    for law in ("vorticity_flux", "longitudinal_cubed"):
        st = point.plateaus[law]
        if st.defined:
            print("  %-18s mean %8.3f vs target %8.3f (band fraction %.2f)"
                  % (law, st.mean, st.target, st.band_fraction))

print("\ntrends across falling nu:")
print("  nu*E||w||^2      %s  decreasing: %s"
      % (["%.4f" % v for v in report.wad_viscous_trend], report.wad_viscous_decreasing))
print("  enstrophy rate   %s" % ["%.3f" % v for v in report.enstrophy_rate_trend])
if report.failures:
    print("failures: %s" % (report.failures,))
