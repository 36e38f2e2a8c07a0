"""From a common-denominator model to per-channel minimal transfer functions.

A two-input system with first-order channels of different poles has an
overall difference equation of order two, so each channel estimated from
that equation alone carries both poles and a nearly cancelling zero.  The
pipeline removes the other channel's contribution from the output, models
the colour that subtraction leaves in the output error, and refits each
channel on its own.  The printout shows the near-cancellation in the
overall model and the first-order result per channel.
"""
import warnings

from misoeiv.datasim import NoiseSpec, corrupt, generate_inputs, benchmark_miso_system, simulate_miso
from misoeiv.lti import pole_zero
from misoeiv.pipeline import PipelineConfig, identify_miso_minimal

warnings.simplefilter("ignore", RuntimeWarning)

sys_ = benchmark_miso_system()
u = generate_inputs(2, 5200, [13, 0], std=(3.0, 2.0))
clean = simulate_miso(sys_, u, burn_in=200)
data, _ = corrupt(clean, NoiseSpec.variances([2.6868, 0.9, 0.4]), [13, 1])

rep = identify_miso_minimal(data, PipelineConfig(bootstrap=100, seed=13))
print(rep.summary())

print("\nnear pole/zero cancellations in the common-denominator channels:")
for r in range(2):
    pairs = pole_zero(rep.overall.model.channel_tf(r)).near_cancellations()
    for p, z in pairs:
        print(f"  channel u{r + 1}: pole {p.real:.4f} vs zero {z.real:.4f}")

print("\nclean record, same procedure:")
clean_rep = identify_miso_minimal(clean, PipelineConfig(bootstrap=20))
for i, ch in enumerate(clean_rep.channels, start=1):
    print(f"  G{i} = {ch.tf.num.trim(1e-9).coeffs.round(6)} / {ch.tf.den.coeffs.round(6)}")
