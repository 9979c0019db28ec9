"""plasmaseed: predicts cold-plasma seed germination uplift.

Self-contained toolkit: dataset handling, train-only preprocessing, tree
ensembles built from scratch, stacking, evaluation (CV, grid search,
leave-one-cultivar-out), interpretation (permutation importance, Shapley
attribution, partial dependence), a local experiment tracker, a CLI, and
an HTTP what-if service.
"""

__version__ = "0.1.0"
