"""
Scoring frames against GNSS
===========================

Stations are collocated with pixels inside 100 m and each field gets RMSE,
MAE and STD. Transformed fields also get AIC and BIC.
"""

from vlmframe import ScenarioSpec, compare_models, ecdf, make_scenario, tie_frame

s = make_scenario(ScenarioSpec(seed=4))
ties = tie_frame(s.local, s.coarse_model)
report = compare_models(s.local, {k: t.transformed for k, t in ties.items()}, s.gnss)
print(report.to_table())
print("selected:", report.selected)

###############################################################################
# ECDFs make the offset visible: the transformed values move right by
# about the injected mean distortion.

before, after = ecdf(s.local.value), ecdf(ties[1].transformed.value)
print("local median %.3f, transformed median %.3f" % (before.x[before.F >= 0.5][0],
                                                      after.x[after.F >= 0.5][0]))
