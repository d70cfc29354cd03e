"""
Radially averaged power spectra
===============================

The correction is smooth, so it should pull the long wavelengths
towards the global model and leave the short ones alone.
"""

import numpy as np
from vlmframe import ScenarioSpec, VelocityField, make_scenario, tie_frame
from vlmframe.resample import sample_grid
from vlmframe.spectral import field_spectrum, rasterize_points

spec = ScenarioSpec(n_pixels=30000, distortion_coeffs=(0.0, 1.5, -1.0),
                    ramp_coeffs=(0.0, 1.5, -1.0), n_bowls=8, noise_sigma=0.2,
                    model_cellsize=0.05, model_smoothing_radius=5.0, seed=2)
s = make_scenario(spec)
d1 = tie_frame(s.local, s.coarse_model, (1,))[1].transformed
v, _ = sample_grid(s.coarse_model, s.local.lon, s.local.lat)
glob = VelocityField(s.local.lon, s.local.lat, v, frame="global")

like = rasterize_points(s.local, 0.005)
curves = {name: field_spectrum(f, 0.005, like=like, label=name)
          for name, f in [("local", s.local), ("global", glob), ("D1", d1)]}

###############################################################################
# log10 power per wavelength bin, longest first.

w = curves["local"].wavelength
print("lambda_km  " + "  ".join(f"{n:>7}" for n in curves))
for i in range(len(w)):
    print(f"{w[i]:9.2f}  " + "  ".join(f"{np.log10(c.power[i]):7.2f}" for c in curves.values()))
