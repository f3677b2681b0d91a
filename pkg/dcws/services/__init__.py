# DCWS Services
# Priors and metrics, constraints, the label network, the saddle-point solver,
# synthetic benchmarks, dataset files and the experiment pipeline
