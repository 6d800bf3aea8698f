"""
Classifying XOR, noisy XOR and moons
====================================

"""

import numpy as np

from quditclass import (
    TrainConfig,
    accuracy,
    builtin_model,
    fit_multistart,
    gen_moons,
    gen_xor,
    predict,
    stratified_split,
)


def run(name, data, fraction):
    spec = builtin_model(name)
    train, test = stratified_split(data, fraction, seed=0)
    fit = fit_multistart(spec, train, TrainConfig())
    acc = accuracy(spec, fit.best_params, test)
    print(f"{name}: {len(train)} training points, test accuracy {acc:.3f}")
    return spec, fit.best_params


# two parameters are enough for XOR
spec, theta = run("qubit-A", gen_xor(2000, 0.1, seed=1), 0.04)

# the decision regions as a coarse character map
grid = np.linspace(-0.5, 0.5, 21)
for x2 in grid[::-1]:
    row = predict(spec, theta, np.column_stack([grid, np.full_like(grid, x2)]))
    print("".join(".#"[c] for c in row))

# a qutrit learns noisier XOR from 1% of the data
run("qutrit-B", gen_xor(2000, 0.2, seed=4), 0.01)

# and two moons from 10%
run("qutrit-C", gen_moons(800, 0.1, seed=3), 0.10)
