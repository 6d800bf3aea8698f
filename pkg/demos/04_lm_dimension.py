"""
Estimating how many points a model can memorize
===============================================

"""

from quditclass import LMConfig, builtin_model, estimate_lm_dimension

# both rows finish in well under a minute; qubit-D or qubit-G take several
for name in ("qubit-C", "qubit-A"):
    spec = builtin_model(name)
    report = estimate_lm_dimension(spec, LMConfig(k=spec.k, n_max=6))
    print(report.summary_row())
    for row in report.per_n:
        print("   n={n}: shattered={shattered} after {patterns_tried} pattern(s)".format(**row))
