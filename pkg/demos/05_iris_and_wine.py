"""
A five-parameter qutrit on Iris and Wine
========================================

"""

from pathlib import Path

from quditclass import (
    CrossEntropy,
    SGDConfig,
    TrainConfig,
    accuracy,
    builtin_model,
    fit_sgd,
    load_csv,
    pca_fit,
    pca_transform,
    standardize,
    stratified_split,
)

DATA = Path(__file__).resolve().parents[1] / "data"
spec = builtin_model("qutrit-uci")
config = TrainConfig(learning_rate=0.05, sgd=SGDConfig(patience=50))

# Iris: four features, z-scored with training statistics
iris = load_csv(DATA / "iris.csv", label_column="species")
train, test = stratified_split(iris, 0.7, seed=0)
_, train, test = standardize(train, test)
fit = fit_sgd(spec, train, config, CrossEntropy())
print(f"Iris  train {fit.train_accuracy:.3f}  test {accuracy(spec, fit.best_params, test):.3f}")

# Wine: thirteen features reduced to four principal components
wine = load_csv(DATA / "wine.csv", label_column="class")
train, test = stratified_split(wine, 0.7, seed=0)
pca = pca_fit(train, 4)
print("explained variance of the kept axes:", pca.explained_variance.round(3))
train, test = pca_transform(pca, train), pca_transform(pca, test)
fit = fit_sgd(spec, train, config, CrossEntropy())
print(f"Wine  train {fit.train_accuracy:.3f}  test {accuracy(spec, fit.best_params, test):.3f}")
