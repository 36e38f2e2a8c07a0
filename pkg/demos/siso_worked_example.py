"""Second-order single-input system identified from noisy input and output.

The true system is (1 + 0.4q^-1 + 0.6q^-2) y = 1.2q^-1 u, driven by unit
white noise, with error variances 0.24 on y and 0.1 on u.  Stacking three
lags gives an 8x8 covariance; after scaling by the estimated error
covariance two eigenvalues sit at one, so two relations hold among the
stacked variables and the order is 3 - 2 + 1 = 2.
"""
import warnings

import numpy as np

from misoeiv.datasim import NoiseSpec, corrupt, generate_inputs, benchmark_siso_system, simulate_miso
from misoeiv.pipeline import PipelineConfig, dipca_overall
from misoeiv.stackcov import stack_lagged
from misoeiv.ipca import ipca_auto

warnings.simplefilter("ignore", RuntimeWarning)

sys_ = benchmark_siso_system()
u = generate_inputs(1, 5200, [7, 0])
clean = simulate_miso(sys_, u, burn_in=200)
data, true_var = corrupt(clean, NoiseSpec.variances([0.24, 0.1]), [7, 1])

res = ipca_auto(stack_lagged(data, 3))
print("scaled eigenvalues at L=3:", np.array2string(res.eigen.eigenvalues, precision=4))
print("relations found:", res.eigen.d)
print("error variances:", res.noise.variances.round(4), "true:", true_var)

fit = dipca_overall(data, 3, PipelineConfig(L=3))
a, b = fit.model.a, fit.model.b[0]
print(f"order {fit.model.eta}")
print(f"y[k] + {a[1]:.4f} y[k-1] + {a[2]:.4f} y[k-2] = {b[0]:.4f} u[k] + {b[1]:.4f} u[k-1] + {b[2]:.4f} u[k-2]")
print("coefficient vector:", fit.model.as_vector().round(4))
