"""
Tying a local InSAR map to a global frame
=========================================

A synthetic scenario stands in for real data: the local map is the truth
minus a tilted offset, the global model is a smoothed copy of the truth.
"""

import numpy as np
from vlmframe import ScenarioSpec, make_scenario, tie_frame, scenario_error

scenario = make_scenario(ScenarioSpec(n_pixels=20000, seed=1))
print("injected distortion:", scenario.spec.distortion_coeffs)

###############################################################################
# Oversample the coarse model at each pixel, difference and fit degrees 1-3.

ties = tie_frame(scenario.local, scenario.coarse_model)
for k, tie in ties.items():
    print(tie.model.label, np.round(tie.model.coeffs[:3], 3), f"cond={tie.model.cond:.2f}")

###############################################################################
# The transformed maps sit much closer to the truth than the local one.

print("local", scenario_error(scenario, scenario.local))
for k, tie in ties.items():
    print(f"D{k}", scenario_error(scenario, tie.transformed))
